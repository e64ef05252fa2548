import json
import logging
import os
from dataclasses import asdict
from typing import Dict, List, Mapping, Sequence

import pandas as pd

from services.anneal_sim import AnnealConfig, AnnealOutcome
from services.collision import CollisionBounds, CollisionReport
from services.errors import ChipParseError, ParameterError, ValidationError
from services.freq_model import FitStats, PowerLawModel, ghz_to_mhz, mhz_to_ghz
from services.gate_model import ChipZZStats, SweepPoint, TransmonPair
from services.lattice import ChipState, QubitRecord
from services.planner import FrequencyPlan, PlanConstraints
from services.yield_mc import YieldCurve

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"

PLAN_COLUMNS = ["qubit_id", "f_target_mhz", "r_target_ohm", "df_mhz", "dr_rel", "status"]
OUTCOME_COLUMNS = ["qubit_id", "r0", "r_target", "r_final", "exposures", "status", "dev_rel"]
YIELD_COLUMNS = ["sigma_mhz", "yield", "ci", "mean_collisions"]
SWEEP_COLUMNS = ["detuning_mhz", "error", "zz_khz", "status", "amplitude_mhz", "rotary_mhz"]
EDGE_ZZ_COLUMNS = ["control", "target", "detuning_mhz", "zz_khz", "flagged", "in_collision_zone"]


def _require(path: str):
    if not os.path.exists(path):
        logger.error(f"Input file not found: {path}")
        raise FileNotFoundError(f"Input file not found: {path}")


def read_json(path: str) -> Dict:
    """Parse a JSON file, reporting the line of any syntax error"""
    _require(path)
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        logger.error(f"Malformed JSON in {path} at line {e.lineno}: {e.msg}")
        raise ChipParseError(f"Malformed JSON in {path}: {e.msg}", e.lineno)


def write_json(path: str, data: Mapping) -> str:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(data, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return path


def _write_csv(path: str, rows: Sequence[Mapping], columns: List[str]) -> str:
    pd.DataFrame(list(rows), columns=columns).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.debug(f"Wrote {len(rows)} rows to {path}")
    return path


def _read_csv(path: str, required: Sequence[str]) -> pd.DataFrame:
    _require(path)
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        logger.error(f"Malformed CSV in {path}: {e}")
        raise ChipParseError(f"Malformed CSV in {path}: {e}")
    missing = [c for c in required if c not in frame.columns]
    if missing:
        logger.error(f"{path} is missing columns {missing}")
        raise ValidationError(f"{path} is missing columns {missing}", os.path.basename(path))
    return frame


# ---- chip ---------------------------------------------------------------------------------------

def chip_from_dict(data: Mapping) -> ChipState:
    try:
        qubits = [
            QubitRecord(
                id=int(q["id"]),
                r_n=float(q["r_n_ohm"]),
                f01=float(q["f01_mhz"]) if q.get("f01_mhz") is not None else ghz_to_mhz(q.get("f01_ghz")),
                anharmonicity=float(q.get("anharmonicity_mhz", -330.0)),
                tuned=bool(q.get("tuned", False)),
            )
            for q in data["qubits"]
        ]
        edges = [(int(c), int(t)) for c, t in data.get("edges", [])]
        return ChipState(name=str(data.get("name", "chip")), qubits=tuple(qubits), edges=tuple(edges)).validate()
    except (KeyError, TypeError) as e:
        logger.error(f"Chip spec does not match schema: {e}")
        raise ValidationError(f"Chip spec does not match schema: {e}", "chip")


def chip_to_dict(chip: ChipState) -> Dict:
    return {
        "name": chip.name,
        "qubits": [
            {
                "id": q.id,
                "r_n_ohm": q.r_n,
                "f01_ghz": mhz_to_ghz(q.f01),
                "f01_mhz": q.f01,
                "anharmonicity_mhz": q.anharmonicity,
                "tuned": q.tuned,
            }
            for q in chip.qubits
        ],
        "edges": [[c, t] for c, t in chip.edges],
    }


def load_chip(path: str) -> ChipState:
    """
    Load and fully validate a chip-spec JSON file

    Args:
        path (str): Path to chip JSON

    Returns:
        ChipState: Validated chip (frequencies converted to MHz)
    """
    chip = chip_from_dict(read_json(path))
    logger.info(f"Loaded chip '{chip.name}' from {path}: {len(chip.qubits)} qubits, {len(chip.edges)} edges")
    return chip


def save_chip(chip: ChipState, path: str) -> str:
    return write_json(path, chip_to_dict(chip))


# ---- configs and models -------------------------------------------------------------------------

def load_model(path: str) -> PowerLawModel:
    return PowerLawModel.from_dict(read_json(path))


def save_model(model: PowerLawModel, path: str) -> str:
    return write_json(path, model.to_dict())


def load_bounds(path: str = None) -> CollisionBounds:
    return CollisionBounds.from_dict(read_json(path)) if path else CollisionBounds()


def load_constraints(path: str = None) -> PlanConstraints:
    return PlanConstraints.from_dict(read_json(path)) if path else PlanConstraints()


def load_anneal_config(path: str = None) -> AnnealConfig:
    return AnnealConfig.from_dict(read_json(path)) if path else AnnealConfig()


def load_pair(path: str) -> TransmonPair:
    data = read_json(path)
    try:
        return TransmonPair.from_dict(data)
    except KeyError as e:
        logger.error(f"Pair spec in {path} is missing field {e}")
        raise ValidationError(f"Pair spec is missing field {e}", str(e))


# ---- tabular artifacts --------------------------------------------------------------------------

def load_frequencies(path: str) -> Dict[int, float]:
    """Read (qubit_id, f_mhz) or a plan CSV (qubit_id, f_target_mhz)"""
    frame = _read_csv(path, ["qubit_id"])
    column = "f_target_mhz" if "f_target_mhz" in frame.columns else "f_mhz"
    if column not in frame.columns:
        logger.error(f"{path} has no frequency column")
        raise ValidationError(f"{path} needs an f_mhz or f_target_mhz column", os.path.basename(path))
    return {int(q): float(f) for q, f in zip(frame["qubit_id"], frame[column])}


def save_frequencies(freqs: Mapping[int, float], path: str) -> str:
    rows = [{"qubit_id": q, "f_mhz": f} for q, f in sorted(freqs.items())]
    return _write_csv(path, rows, ["qubit_id", "f_mhz"])


def save_residuals(stats: FitStats, path: str) -> str:
    rows = [{"qubit_id": q, "residual_mhz": r} for q, r in stats.residuals]
    return _write_csv(path, rows, ["qubit_id", "residual_mhz"])


def save_plan(plan: FrequencyPlan, path: str) -> str:
    rows = [
        {
            "qubit_id": q,
            "f_target_mhz": plan.targets_f[q],
            "r_target_ohm": plan.targets_r.get(q, float("nan")),
            "df_mhz": plan.shifts_f[q],
            "dr_rel": plan.shifts_r_rel[q],
            "status": plan.status(q),
        }
        for q in sorted(plan.targets_f)
    ]
    return _write_csv(path, rows, PLAN_COLUMNS)


def load_resistance_targets(path: str) -> Dict[int, float]:
    frame = _read_csv(path, ["qubit_id", "r_target_ohm", "status"])
    frame = frame[frame["status"] != "infeasible"]
    return {int(q): float(r) for q, r in zip(frame["qubit_id"], frame["r_target_ohm"])}


def save_collisions(report: CollisionReport, path: str) -> str:
    rows = [
        {"control": v.edge[0], "target": v.edge[1], "type": v.collision_type, "margin_mhz": v.margin}
        for v in report.violations
    ]
    return _write_csv(path, rows, ["control", "target", "type", "margin_mhz"])


def save_outcomes(outcomes: Sequence[AnnealOutcome], path: str) -> str:
    rows = [
        {
            "qubit_id": o.qubit_id,
            "r0": o.r0,
            "r_target": o.r_target,
            "r_final": o.final_r,
            "exposures": o.exposures,
            "status": o.status,
            "dev_rel": o.final_dev_rel,
        }
        for o in outcomes
    ]
    return _write_csv(path, rows, OUTCOME_COLUMNS)


def save_yield_curve(curve: YieldCurve, path: str) -> str:
    return _write_csv(path, curve.rows(), YIELD_COLUMNS)


def save_sweep(points: Sequence[SweepPoint], path: str) -> str:
    rows = [
        {
            "detuning_mhz": p.detuning,
            "error": p.error,
            "zz_khz": p.zz_khz,
            "status": p.status,
            "amplitude_mhz": p.amplitude,
            "rotary_mhz": p.rotary_amplitude,
        }
        for p in points
    ]
    return _write_csv(path, rows, SWEEP_COLUMNS)


def save_edge_zz(stats: ChipZZStats, path: str) -> str:
    rows = [dict(asdict(e), detuning_mhz=e.detuning) for e in stats.edges]
    return _write_csv(path, rows, EDGE_ZZ_COLUMNS)


def output_path(out_dir: str, name: str) -> str:
    if not out_dir:
        raise ParameterError("An output directory is required")
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, name)
