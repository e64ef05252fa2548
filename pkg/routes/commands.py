import logging
import os
from dataclasses import asdict, replace
from typing import Callable, Dict, List, Mapping

import click
import numpy as np

from config import (
    DEFAULT_GATE_TIME_NS,
    DEFAULT_J_MHZ,
    DEFAULT_R_SPREAD_REL,
    DEFAULT_SOLVER_TOL,
    DEFAULT_TRIALS,
    EXIT_CODES,
    REFERENCE_MODEL,
)
from middleware.manifest import RunManifest, exit_code_for, record_manifest, require_inputs, run_options
from services import chip_io
from services.anneal_sim import SUCCESS, AnnealSimulator
from services.collision import CollisionDetector
from services.errors import FitError, ParameterError, PipelineError
from services.freq_model import FrequencyModel, PowerLawModel
from services.gate_model import GateModel
from services.lattice import LatticeBuilder
from services.planner import TuningPlanner
from services.yield_mc import YieldEstimator
from utils.helpers import derive_seed, log_command_info, parse_grid

logger = logging.getLogger(__name__)

# Stages run in this order inside a pipeline regardless of listing order
STAGE_ORDER = ["lattice", "fit", "plan", "collisions", "yield", "anneal", "zz", "gate-error"]


def stage_seed(seed: int, stage: str, index: int = 0) -> int:
    """Named derivation of a stage's seed from the top-level seed"""
    return int(derive_seed(seed, stage, index).generate_state(1)[0])


def _resolve(params: Mapping, artifacts: Mapping, key: str, required: bool = True):
    path = params.get(key) or artifacts.get(key)
    if path is None and required:
        raise PipelineError(f"No '{key}' input given and no earlier stage produced one", EXIT_CODES["missing_input"])
    if path is not None and not os.path.exists(path):
        raise PipelineError(f"Input file not found: {path}", EXIT_CODES["missing_input"])
    return path


def _primary_path(ctx: Mapping, default_name: str) -> str:
    """Path of a stage's main artifact; a file-valued --out renames it"""
    return chip_io.output_path(ctx["out"], ctx.get("primary") or default_name)


# ---- stage runners ------------------------------------------------------------------------------

def run_lattice(params: Mapping, ctx: Mapping, artifacts: Mapping, index: int = 0) -> Dict[str, str]:
    if params.get("preset"):
        chip = LatticeBuilder.build_preset(params["preset"], r_n=float(params.get("r_n", 10000.0)))
    else:
        chip = LatticeBuilder.build_heavy_hex(int(params.get("rows", 1)), int(params.get("cols", 1)), float(params.get("r_n", 10000.0)))
    if not params.get("nominal", False):
        reference = PowerLawModel.from_dict(params.get("reference_model", REFERENCE_MODEL))
        spread = float(params.get("spread", DEFAULT_R_SPREAD_REL))
        chip = FrequencyModel.synthesize_measurements(chip, reference, spread, stage_seed(ctx["seed"], "lattice", index))
    return {"chip": chip_io.save_chip(chip, _primary_path(ctx, "chip.json"))}


def run_fit(params: Mapping, ctx: Mapping, artifacts: Mapping, index: int = 0) -> Dict[str, str]:
    chip = chip_io.load_chip(_resolve(params, artifacts, "chip"))
    pin = params.get("pin_exponent")
    model, stats = FrequencyModel.fit_chip(chip, pin_exponent=float(pin) if pin is not None else None)
    summary = {
        "model": model.to_dict(),
        "mean_f_mhz": stats.mean_f,
        "residual_groups_mhz": stats.groups,
        "points": len(stats.residuals),
    }
    return {
        "model": chip_io.save_model(model, _primary_path(ctx, "model.json")),
        "residuals": chip_io.save_residuals(stats, chip_io.output_path(ctx["out"], "residuals.csv")),
        "fit_summary": chip_io.write_json(chip_io.output_path(ctx["out"], "fit_summary.json"), summary),
    }


def run_plan(params: Mapping, ctx: Mapping, artifacts: Mapping, index: int = 0) -> Dict[str, str]:
    chip = chip_io.load_chip(_resolve(params, artifacts, "chip"))
    model = chip_io.load_model(_resolve(params, artifacts, "model"))
    constraints = chip_io.load_constraints(_resolve(params, artifacts, "constraints", required=False))
    plan = TuningPlanner.generate_plan(
        chip, model, constraints, seed=stage_seed(ctx["seed"], "plan", index), strict=bool(params.get("strict", False))
    )
    report = TuningPlanner.validate_plan(chip, model, plan, constraints)
    summary = {
        "feasible": plan.feasible,
        "worst_margin_mhz": plan.worst_margin,
        "infeasible": plan.infeasible,
        "skip_set": plan.skip_set,
        "validation_passed": report.passed,
        "failures": [asdict(c) for c in report.failures],
        "predicted_precision_mhz": TuningPlanner.predicted_precision(plan, model, float(params.get("sigma_r_rel", 0.0016))),
    }
    return {
        "plan": chip_io.save_plan(plan, _primary_path(ctx, "plan.csv")),
        "plan_report": chip_io.write_json(chip_io.output_path(ctx["out"], "plan_report.json"), summary),
    }


def _frequencies(params: Mapping, artifacts: Mapping, chip, key: str) -> Dict[int, float]:
    """Explicit frequency file, else the planned targets, else the chip's measured f01"""
    path = params.get(key) or artifacts.get("plan")
    if path:
        return chip_io.load_frequencies(_resolve({key: path}, {}, key))
    freqs = chip.frequencies()
    if len(freqs) != len(chip.qubits):
        raise ParameterError("Chip has qubits without f01 and no frequency file was given")
    return freqs


def run_collisions(params: Mapping, ctx: Mapping, artifacts: Mapping, index: int = 0) -> Dict[str, str]:
    chip = chip_io.load_chip(_resolve(params, artifacts, "chip"))
    freqs = _frequencies(params, artifacts, chip, "freqs")
    bounds = chip_io.load_bounds(_resolve(params, artifacts, "bounds", required=False))
    report = CollisionDetector.chip_collisions(chip, freqs, bounds)
    summary = {"total": report.total, "counts": {str(k): v for k, v in report.counts.items()}, "bounds": bounds.to_dict()}
    return {
        "collisions": chip_io.save_collisions(report, _primary_path(ctx, "collisions.csv")),
        "collision_summary": chip_io.write_json(chip_io.output_path(ctx["out"], "collision_summary.json"), summary),
    }


def run_yield(params: Mapping, ctx: Mapping, artifacts: Mapping, index: int = 0) -> Dict[str, str]:
    chip = chip_io.load_chip(_resolve(params, artifacts, "chip"))
    targets = _frequencies(params, artifacts, chip, "targets")
    bounds = chip_io.load_bounds(_resolve(params, artifacts, "bounds", required=False))
    grid = params.get("sigma_grid", "0:40:2")
    grid = parse_grid(grid) if isinstance(grid, str) else [float(s) for s in grid]
    curve = YieldEstimator.yield_curve(
        chip,
        targets,
        grid,
        bounds,
        int(params.get("trials", DEFAULT_TRIALS)),
        stage_seed(ctx["seed"], "yield", index),
        threads=int(ctx.get("threads", 1)),
    )
    return {"yield": chip_io.save_yield_curve(curve, _primary_path(ctx, "yield.csv"))}


def run_anneal(params: Mapping, ctx: Mapping, artifacts: Mapping, index: int = 0) -> Dict[str, str]:
    chip = chip_io.load_chip(_resolve(params, artifacts, "chip"))
    targets_r = chip_io.load_resistance_targets(_resolve({"plan": params.get("targets")}, artifacts, "plan"))
    config = chip_io.load_anneal_config(_resolve(params, artifacts, "config", required=False))
    outcomes = AnnealSimulator.anneal_chip(chip, targets_r, config, seed=stage_seed(ctx["seed"], "anneal", index))
    summary = {"total": len(outcomes)}
    if outcomes:
        summary.update(asdict(AnnealSimulator.success_stats(outcomes)))
        ratios = [o.increment_ratio for o in outcomes if o.status == SUCCESS and o.exposures > 0]
        try:
            summary["lognormal_fit"] = asdict(AnnealSimulator.lognormal_fit(ratios))
        except FitError as e:
            logger.warning(f"Skipping log-normal fit: {e}")
    summary = _json_safe(summary)
    return {
        "outcomes": chip_io.save_outcomes(outcomes, _primary_path(ctx, "outcomes.csv")),
        "anneal_summary": chip_io.write_json(chip_io.output_path(ctx["out"], "anneal_summary.json"), summary),
    }


def run_zz(params: Mapping, ctx: Mapping, artifacts: Mapping, index: int = 0) -> Dict[str, str]:
    if not params.get("pair") and (params.get("chip") or artifacts.get("chip")):
        return _run_chip_zz(params, ctx, artifacts)
    pair = chip_io.load_pair(_resolve(params, artifacts, "pair"))
    zz = GateModel.static_zz(pair)
    result = {"detuning_mhz": pair.detuning, "zz_khz": zz.zz_khz, "flagged": zz.flagged, "min_overlap": zz.min_overlap}
    if GateModel.perturbative_valid(pair):
        result["zz_perturbative_khz"] = GateModel.static_zz_perturbative(pair)
    result["dressed_frequencies_mhz"] = GateModel.dressed_frequencies(pair)
    return {"zz": chip_io.write_json(_primary_path(ctx, "zz.json"), _json_safe(result))}


def _run_chip_zz(params: Mapping, ctx: Mapping, artifacts: Mapping) -> Dict[str, str]:
    """ZZ over every edge at the tuned frequencies, with detuning histograms before and after tuning"""
    chip = chip_io.load_chip(_resolve(params, artifacts, "chip"))
    freqs = _frequencies(params, artifacts, chip, "freqs")
    j = float(params.get("j_mhz", DEFAULT_J_MHZ))
    stats = GateModel.chip_zz_stats(chip, freqs, j)
    summary = stats.summary()
    summary["j_mhz"] = j
    measured = chip.frequencies()
    if len(measured) == len(chip.qubits):
        before = GateModel.chip_zz_stats(chip, measured, j)
        summary["untuned"] = before.summary()
    return {
        "zz_edges": chip_io.save_edge_zz(stats, _primary_path(ctx, "zz_edges.csv")),
        "zz_summary": chip_io.write_json(chip_io.output_path(ctx["out"], "zz_summary.json"), _json_safe(summary)),
    }


def run_gate_error(params: Mapping, ctx: Mapping, artifacts: Mapping, index: int = 0) -> Dict[str, str]:
    pair = chip_io.load_pair(_resolve(params, artifacts, "pair"))
    if params.get("levels"):
        pair = replace(pair, levels=int(params["levels"]))
    gate_time = float(params.get("gate_time", DEFAULT_GATE_TIME_NS))
    tol = float(params.get("solver_tol", DEFAULT_SOLVER_TOL))
    sweep = params.get("sweep")
    grid = parse_grid(sweep) if isinstance(sweep, str) else ([float(d) for d in sweep] if sweep else [pair.detuning])
    points = GateModel.error_vs_detuning_sweep(
        pair, grid, gate_time, seed=stage_seed(ctx["seed"], "gate-error", index), solver_tol=tol,
        rotary=not params.get("no_rotary", False),
    )
    windows = {str(k): v for k, v in GateModel.usable_windows(points).items()}
    return {
        "sweep": chip_io.save_sweep(points, _primary_path(ctx, "sweep.csv")),
        "windows": chip_io.write_json(chip_io.output_path(ctx["out"], "windows.json"), windows),
    }


STAGES: Dict[str, Callable] = {
    "lattice": run_lattice,
    "fit": run_fit,
    "plan": run_plan,
    "collisions": run_collisions,
    "yield": run_yield,
    "anneal": run_anneal,
    "zz": run_zz,
    "gate-error": run_gate_error,
}

STAGE_INPUTS = {
    "lattice": (),
    "fit": ("chip",),
    "plan": ("chip", "model", "constraints"),
    "collisions": ("chip", "freqs", "bounds"),
    "yield": ("chip", "targets", "bounds"),
    "anneal": ("chip", "targets", "config"),
    "zz": ("pair", "chip", "freqs"),
    "gate-error": ("pair",),
}


def _json_safe(value):
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, (float, np.floating)):
        return float(value) if np.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    return value


def run_pipeline(config_path: str, seed: int, out_dir: str, threads: int = 1) -> int:
    """
    Run the stages listed in a pipeline JSON file, in dependency order

    Args:
        config_path (str): Pipeline file {"seed": int?, "stages": [{"stage": name, ...params}]}
        seed (int): Top-level seed (the file's "seed" wins when present)
        out_dir (str): Directory receiving every artifact and the manifest
        threads (int): Worker threads for Monte Carlo stages

    Returns:
        int: Exit status (0 only if every stage succeeded)
    """
    manifest = RunManifest(command="pipeline", seed=seed)
    try:
        config = chip_io.read_json(config_path)
        manifest.add_input(config_path)
        seed = int(config.get("seed", seed))
        manifest.seed = seed
        stages = config.get("stages", [])
        if not isinstance(stages, list) or any(not isinstance(s, dict) or "stage" not in s for s in stages):
            raise PipelineError("'stages' must be a list of objects with a 'stage' key", EXIT_CODES["parameter_error"])
        unknown = [s["stage"] for s in stages if s["stage"] not in STAGES]
        if unknown:
            raise PipelineError(f"Unknown stages: {', '.join(unknown)}", EXIT_CODES["unknown_stage"])
    except Exception as e:
        manifest.status, manifest.error = "failed", str(e)
        manifest.write(out_dir)
        logger.error(f"Pipeline rejected: {e}")
        return exit_code_for(e)

    ordered = sorted(stages, key=lambda s: STAGE_ORDER.index(s["stage"]))
    ctx = {"seed": seed, "out": out_dir, "threads": threads}
    artifacts: Dict[str, str] = {}
    counts: Dict[str, int] = {}
    logger.info(f"Pipeline: {len(ordered)} stages, seed {seed}")

    for spec in ordered:
        name = spec["stage"]
        index = counts.get(name, 0)
        counts[name] = index + 1
        params = {k.replace("-", "_"): v for k, v in spec.items() if k != "stage"}
        for key in STAGE_INPUTS[name]:
            manifest.add_input(params.get(key))
        try:
            produced = STAGES[name](params, ctx, artifacts, index)
        except Exception as e:
            code = exit_code_for(e)
            logger.error(f"Stage '{name}' failed (exit {code}): {e}")
            manifest.stages.append({"stage": name, "index": index, "status": "failed", "error": str(e)})
            manifest.status, manifest.error = "failed", f"{name}: {e}"
            manifest.write(out_dir)
            return code
        artifacts.update(produced)
        manifest.add_outputs(list(produced.values()))
        manifest.stages.append({"stage": name, "index": index, "status": "ok", "outputs": list(produced.values())})
        logger.info(f"Stage '{name}' done: {', '.join(produced.values())}")

    manifest.write(out_dir)
    return EXIT_CODES["ok"]


# ---- click subcommands --------------------------------------------------------------------------

def _outputs(produced: Mapping[str, str]) -> List[str]:
    return list(produced.values())


@click.command("lattice")
@click.option("--preset", type=click.Choice(LatticeBuilder.PRESETS), default=None, help="Fixed-size published chip")
@click.option("--rows", type=int, default=1, show_default=True)
@click.option("--cols", type=int, default=1, show_default=True)
@click.option("--r-n", type=float, default=10000.0, show_default=True, help="Nominal junction resistance (Ohm)")
@click.option("--spread", type=float, default=DEFAULT_R_SPREAD_REL, show_default=True, help="Relative r_n spread")
@click.option("--nominal", is_flag=True, help="Skip synthetic measurements; all qubits at r_n, no f01")
@click.pass_obj
@run_options
@record_manifest("lattice")
def lattice_command(obj, **kwargs):
    """Build a heavy-hex chip spec"""
    log_command_info("lattice", kwargs)
    return _outputs(run_lattice(kwargs, obj, {}))


@click.command("fit")
@click.option("--chip", required=True, help="Chip JSON with measured f01")
@click.option("--pin-exponent", type=float, default=None, help="Fix the exponent and fit only the prefactor")
@click.pass_obj
@run_options
@require_inputs("chip")
@record_manifest("fit", inputs=("chip",))
def fit_command(obj, **kwargs):
    """Fit the resistance-to-frequency power law"""
    log_command_info("fit", kwargs)
    return _outputs(run_fit(kwargs, obj, {}))


@click.command("collisions")
@click.option("--chip", required=True)
@click.option("--freqs", default=None, help="CSV (qubit_id, f_mhz) or plan CSV; defaults to chip f01")
@click.option("--bounds", default=None, help="Bounds JSON")
@click.pass_obj
@run_options
@require_inputs("chip", "freqs", "bounds")
@record_manifest("collisions", inputs=("chip", "freqs", "bounds"))
def collisions_command(obj, **kwargs):
    """List nearest-neighbor frequency collisions"""
    log_command_info("collisions", kwargs)
    return _outputs(run_collisions(kwargs, obj, {}))


@click.command("yield")
@click.option("--chip", required=True)
@click.option("--targets", default=None, help="Plan or frequency CSV; defaults to chip f01")
@click.option("--bounds", default=None)
@click.option("--sigma-grid", default="0:40:2", show_default=True)
@click.option("--trials", type=int, default=DEFAULT_TRIALS, show_default=True)
@click.pass_obj
@run_options
@require_inputs("chip", "targets", "bounds")
@record_manifest("yield", inputs=("chip", "targets", "bounds"))
def yield_command(obj, **kwargs):
    """Monte Carlo collision-free yield versus frequency spread"""
    log_command_info("yield", kwargs)
    return _outputs(run_yield(kwargs, obj, {}))


@click.command("plan")
@click.option("--chip", required=True)
@click.option("--model", required=True)
@click.option("--constraints", default=None)
@click.option("--strict", is_flag=True, help="Fail instead of leaving infeasible qubits untuned")
@click.pass_obj
@run_options
@require_inputs("chip", "model", "constraints")
@record_manifest("plan", inputs=("chip", "model", "constraints"))
def plan_command(obj, **kwargs):
    """Generate and validate a downshift-only tuning plan"""
    log_command_info("plan", kwargs)
    return _outputs(run_plan(kwargs, obj, {}))


@click.command("anneal")
@click.option("--chip", required=True)
@click.option("--targets", required=True, help="Plan CSV with r_target_ohm")
@click.option("--config", default=None, help="Anneal config JSON")
@click.pass_obj
@run_options
@require_inputs("chip", "targets", "config")
@record_manifest("anneal", inputs=("chip", "targets", "config"))
def anneal_command(obj, **kwargs):
    """Simulate the anneal loop for every planned junction"""
    log_command_info("anneal", kwargs)
    return _outputs(run_anneal(kwargs, obj, {}))


@click.command("gate-error")
@click.option("--pair", required=True)
@click.option("--sweep", default=None, help="Detuning grid start:stop:step (MHz); defaults to the pair's detuning")
@click.option("--gate-time", type=float, default=DEFAULT_GATE_TIME_NS, show_default=True)
@click.option("--levels", type=int, default=None)
@click.option("--solver-tol", type=float, default=DEFAULT_SOLVER_TOL, show_default=True)
@click.option("--no-rotary", is_flag=True)
@click.pass_obj
@run_options
@require_inputs("pair")
@record_manifest("gate-error", inputs=("pair",))
def gate_error_command(obj, **kwargs):
    """Echoed cross-resonance gate error versus detuning"""
    log_command_info("gate-error", kwargs)
    return _outputs(run_gate_error(kwargs, obj, {}))


@click.command("zz")
@click.option("--pair", default=None, help="Pair JSON; omit to scan every edge of --chip")
@click.option("--chip", default=None)
@click.option("--freqs", default=None, help="Plan or frequency CSV; defaults to chip f01")
@click.option("--j-mhz", type=float, default=DEFAULT_J_MHZ, show_default=True)
@click.pass_obj
@run_options
@require_inputs("pair", "chip", "freqs")
@record_manifest("zz", inputs=("pair", "chip", "freqs"))
def zz_command(obj, **kwargs):
    """Static ZZ of a transmon pair, or of every edge of a chip"""
    if not kwargs["pair"] and not kwargs["chip"]:
        raise ParameterError("zz needs --pair or --chip")
    log_command_info("zz", kwargs)
    return _outputs(run_zz(kwargs, obj, {}))


@click.command("pipeline")
@click.argument("config_path")
@click.pass_obj
@run_options
def pipeline_command(obj, config_path):
    """Run a pipeline file of stages"""
    log_command_info("pipeline", {"config": config_path})
    code = run_pipeline(config_path, obj["seed"], obj["out"], obj["threads"])
    if code:
        click.echo(f"Pipeline failed with exit code {code}", err=True)
        raise SystemExit(code)


COMMANDS = [
    lattice_command,
    fit_command,
    collisions_command,
    yield_command,
    plan_command,
    anneal_command,
    gate_error_command,
    zz_command,
    pipeline_command,
]
