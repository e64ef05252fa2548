import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from config import F_PURCELL_MAX_MHZ, LEVEL_SPACING_MHZ, MAX_DR_REL, PLAN_BOUNDS_MULTIPLIER, PREFERRED_DR_BAND, SPACING_WINDOW_MHZ
from services.collision import CollisionBounds, CollisionDetector
from services.errors import InfeasiblePlanError, MonotonicityError, ParameterError, ValidationError
from services.freq_model import FrequencyModel, PowerLawModel
from services.lattice import ChipState
from utils.helpers import make_rng

logger = logging.getLogger(__name__)

GRID_STEP_MHZ = 1.0
REL_TOL = 1e-9


@dataclass(frozen=True)
class PlanConstraints:
    f_purcell_max: float = F_PURCELL_MAX_MHZ
    max_dr_rel: float = MAX_DR_REL
    spacing_window: Tuple[float, float] = SPACING_WINDOW_MHZ
    bounds: CollisionBounds = field(default_factory=lambda: CollisionBounds(multiplier=PLAN_BOUNDS_MULTIPLIER))
    level_set: Optional[Tuple[float, ...]] = None
    preferred_dr_band: Tuple[float, float] = PREFERRED_DR_BAND

    def __post_init__(self):
        if not 0 < self.max_dr_rel < 1:
            raise ValidationError(f"max_dr_rel must lie in (0, 1), got {self.max_dr_rel}", "max_dr_rel")
        if not self.spacing_window[0] < self.spacing_window[1]:
            raise ValidationError(f"Spacing window must be increasing, got {self.spacing_window}", "spacing_window")
        if not self.f_purcell_max > 0:
            raise ValidationError(f"f_purcell_max must be positive, got {self.f_purcell_max}", "f_purcell_max")

    @classmethod
    def from_dict(cls, data: Mapping) -> "PlanConstraints":
        defaults = cls()
        bounds = CollisionBounds.from_dict({"multiplier": PLAN_BOUNDS_MULTIPLIER, **data.get("bounds", {})})
        levels = data.get("level_set_mhz")
        return cls(
            f_purcell_max=float(data.get("f_purcell_max_mhz", defaults.f_purcell_max)),
            max_dr_rel=float(data.get("max_dr_rel", defaults.max_dr_rel)),
            spacing_window=tuple(data.get("spacing_window_mhz", defaults.spacing_window)),
            bounds=bounds,
            level_set=tuple(float(v) for v in levels) if levels else None,
            preferred_dr_band=tuple(float(v) for v in data.get("preferred_dr_band", defaults.preferred_dr_band)),
        )


@dataclass
class FrequencyPlan:
    targets_f: Dict[int, float]
    targets_r: Dict[int, float]
    shifts_f: Dict[int, float]
    shifts_r_rel: Dict[int, float]
    worst_margin: float
    skip_set: List[int]
    infeasible: List[int] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not self.infeasible and self.worst_margin >= 0

    def status(self, qubit_id: int) -> str:
        if qubit_id in self.infeasible:
            return "infeasible"
        return "untuned" if qubit_id in self.skip_set else "tuned"


@dataclass(frozen=True)
class PlanCheck:
    name: str
    item: str
    passed: bool
    margin: float


@dataclass
class PlanValidation:
    checks: List[PlanCheck] = field(default_factory=list)

    @property
    def failures(self) -> List[PlanCheck]:
        return [c for c in self.checks if not c.passed]

    @property
    def passed(self) -> bool:
        return not self.failures


class TuningPlanner:
    """Collision-free, downshift-only frequency plans under tuning-range and Purcell limits"""

    @staticmethod
    def _edge_margins(detuning: np.ndarray, delta_c: float, delta_t: float, constraints: PlanConstraints) -> np.ndarray:
        bounds = constraints.bounds
        widths = bounds.widths
        lo, hi = constraints.spacing_window
        spacing = np.abs(detuning)
        parts = [np.minimum(spacing - lo, hi - spacing)]
        if 1 in bounds.enabled:
            parts.append(spacing - widths[1])
        if 2 in bounds.enabled:
            parts.append(np.minimum(np.abs(detuning - delta_t / 2.0), np.abs(-detuning - delta_c / 2.0)) - widths[2])
        if 3 in bounds.enabled:
            parts.append(np.minimum(np.abs(detuning - delta_t), np.abs(-detuning - delta_c)) - widths[3])
        if 4 in bounds.enabled:
            parts.append(bounds.d4_max_detuning - spacing)
        return np.min(np.vstack(parts), axis=0)

    @staticmethod
    def reachable_window(current_f: float, r_n: float, model: PowerLawModel, constraints: PlanConstraints) -> Tuple[float, float]:
        """Lowest and highest tunable target for one qubit (high < low means unreachable)"""
        f_low = FrequencyModel.predict_f01(model, r_n * (1.0 + constraints.max_dr_rel))
        f_high = min(current_f, constraints.f_purcell_max)
        return f_low, f_high

    @staticmethod
    def generate_plan(
        chip: ChipState,
        model: PowerLawModel,
        constraints: PlanConstraints = None,
        seed: int = 7,
        strict: bool = False,
        max_sweeps: int = 20,
    ) -> FrequencyPlan:
        """
        Generate a downshift-only frequency plan maximizing worst-case constraint margin

        Args:
            chip (ChipState): Chip with junction resistances
            model (PowerLawModel): Resistance-to-frequency model
            constraints (PlanConstraints): Physical and collision constraints
            seed (int): Seed for initial-pattern jitter
            strict (bool): Raise InfeasiblePlanError instead of returning a best-effort plan
            max_sweeps (int): Coordinate-descent sweep cap

        Returns:
            FrequencyPlan: Plan; `infeasible` lists blocking qubits when no valid plan exists
        """
        constraints = constraints or PlanConstraints()
        current = FrequencyModel.predict_chip(chip, model)
        anh = {q.id: q.anharmonicity for q in chip.qubits}
        order = chip.ids

        # candidate targets per qubit; staying put is always a candidate if it is Purcell-compliant
        candidates: Dict[int, np.ndarray] = {}
        blocked = []
        for q in chip.qubits:
            f_low, f_high = TuningPlanner.reachable_window(current[q.id], q.r_n, model, constraints)
            grid = np.arange(np.floor(f_high), f_low - GRID_STEP_MHZ / 2, -GRID_STEP_MHZ) if f_high >= f_low else np.array([])
            grid = grid[(grid >= f_low) & (grid <= f_high)]
            if current[q.id] <= constraints.f_purcell_max:
                grid = np.concatenate([[current[q.id]], grid])
            if grid.size == 0:
                blocked.append(q.id)
                grid = np.array([current[q.id]])
            candidates[q.id] = grid

        band_lo, band_hi = constraints.preferred_dr_band

        def dr_rel(qubit_id: int, f: np.ndarray) -> np.ndarray:
            return (f / model.a) ** (1.0 / model.p) / chip.qubit(qubit_id).r_n - 1.0

        in_band = {
            qid: ((dr_rel(qid, grid) >= band_lo) & (dr_rel(qid, grid) <= band_hi)) | (grid == current[qid])
            for qid, grid in candidates.items()
        }

        incident: Dict[int, List[Tuple[int, int]]] = {qid: [] for qid in order}
        for control, target in chip.edges:
            incident[control].append((control, target))
            incident[target].append((control, target))

        def edge_margin(edge: Tuple[int, int], freqs: Mapping[int, float]) -> float:
            control, target = edge
            detuning = np.array([freqs[control] - freqs[target]])
            return float(TuningPlanner._edge_margins(detuning, anh[control], anh[target], constraints)[0])

        def candidate_scores(qubit_id: int, freqs: Mapping[int, float]) -> np.ndarray:
            grid = candidates[qubit_id]
            local = np.full(grid.shape, np.inf)
            for control, target in incident[qubit_id]:
                other = target if control == qubit_id else control
                detuning = grid - freqs[other] if control == qubit_id else freqs[other] - grid
                local = np.minimum(local, TuningPlanner._edge_margins(detuning, anh[control], anh[target], constraints))
            return local

        if not blocked and TuningPlanner.already_feasible(chip, current, constraints):
            worst = min((edge_margin(e, current) for e in chip.edges), default=np.inf)
            logger.info(f"Chip {chip.name} already satisfies all constraints; zero-shift plan")
            return TuningPlanner._assemble(chip, model, current, current, worst)

        graph = chip.graph()
        colors = nx.greedy_color(graph, strategy="largest_first") if graph.number_of_nodes() else {}
        highs = [min(current[qid], constraints.f_purcell_max) for qid in order]
        anchor = float(np.percentile(highs, 25)) - 10.0 if highs else constraints.f_purcell_max
        rng = make_rng(seed, "plan-jitter")
        jitter = {qid: float(rng.uniform(-10.0, 10.0)) for qid in order}

        best_plan_freqs, best_key = None, None
        for perm_index, perm in enumerate(itertools.permutations(range(3))):
            if constraints.level_set:
                levels = [constraints.level_set[perm[k] % len(constraints.level_set)] for k in range(3)]
            else:
                levels = [anchor - perm[k] * LEVEL_SPACING_MHZ for k in range(3)]

            freqs: Dict[int, float] = {}
            for qid in order:
                grid = candidates[qid]
                wish = levels[colors.get(qid, 0) % 3] + jitter[qid]
                freqs[qid] = float(grid[np.argmin(np.abs(grid - wish))])

            margins = {e: edge_margin(e, freqs) for e in chip.edges}
            worst = min(margins.values(), default=np.inf)
            for sweep in range(max_sweeps):
                improved = False
                for qid in order:
                    own = set(incident[qid])
                    rest = min((m for e, m in margins.items() if e not in own), default=np.inf)
                    local = candidate_scores(qid, freqs)
                    glob = np.minimum(local, rest)
                    grid = candidates[qid]
                    shift = current[qid] - grid
                    # lexicographic: global worst, local worst, tuning-band preference, smaller shift
                    pick = np.lexsort((-shift, in_band[qid].astype(float), local, glob))[-1]
                    here = int(np.argmin(np.abs(grid - freqs[qid])))
                    new_key = (glob[pick], local[pick], float(in_band[qid][pick]), -shift[pick])
                    old_key = (glob[here], local[here], float(in_band[qid][here]), -shift[here])
                    if new_key > old_key:
                        freqs[qid] = float(grid[pick])
                        for e in own:
                            margins[e] = edge_margin(e, freqs)
                        improved = True
                new_worst = min(margins.values(), default=np.inf)
                if new_worst < worst - 1e-9:
                    raise RuntimeError("Local search decreased the worst-case margin")
                worst = new_worst
                logger.debug(f"Pattern {perm_index} sweep {sweep}: worst margin {worst:.2f} MHz")
                if not improved:
                    break

            banded = sum(float(in_band[q][int(np.argmin(np.abs(candidates[q] - freqs[q])))]) for q in order)
            key = (worst, banded)
            if best_key is None or key > best_key:
                best_key, best_plan_freqs = key, dict(freqs)

        plan = TuningPlanner._assemble(chip, model, current, best_plan_freqs or {}, best_key[0] if best_key else np.inf)
        failing = sorted(
            {qid for e in chip.edges if edge_margin(e, plan.targets_f) < 0 for qid in e} | set(blocked)
        )
        plan.infeasible = failing if plan.worst_margin < 0 or blocked else []
        if plan.infeasible:
            logger.warning(f"Plan for {chip.name} infeasible; blocking qubits {plan.infeasible}")
            if strict:
                raise InfeasiblePlanError(f"No collision-free plan for {chip.name}", plan.infeasible)
        else:
            logger.info(
                f"Plan for {chip.name}: {len(order) - len(plan.skip_set)} tuned, worst margin {plan.worst_margin:.1f} MHz"
            )
        return plan

    @staticmethod
    def _assemble(
        chip: ChipState, model: PowerLawModel, current: Mapping[int, float], freqs: Mapping[int, float], worst: float
    ) -> FrequencyPlan:
        targets_f = {qid: float(freqs.get(qid, current[qid])) for qid in chip.ids}
        skip = [qid for qid in chip.ids if targets_f[qid] == current[qid]]
        for qid in skip:
            targets_f[qid] = float(current[qid])
        plan = FrequencyPlan(
            targets_f=targets_f,
            targets_r={},
            shifts_f={qid: float(current[qid] - targets_f[qid]) for qid in chip.ids},
            shifts_r_rel={},
            worst_margin=float(worst),
            skip_set=skip,
        )
        TuningPlanner.plan_to_resistance_targets(plan, model, chip)
        return plan

    @staticmethod
    def plan_to_resistance_targets(plan: FrequencyPlan, model: PowerLawModel, chip: ChipState) -> Dict[int, float]:
        """
        Convert frequency targets to resistance targets and refresh the shift columns

        Args:
            plan (FrequencyPlan): Plan with targets_f set
            model (PowerLawModel): Power-law model
            chip (ChipState): Chip supplying current resistances

        Returns:
            Dict[int, float]: Target resistance per qubit (Ohm)
        """
        targets_r = {}
        for qid, f_target in plan.targets_f.items():
            r_now = chip.qubit(qid).r_n
            f_now = FrequencyModel.predict_f01(model, r_now)
            if f_target > f_now * (1.0 + REL_TOL):
                raise MonotonicityError(
                    f"Qubit {qid}: target {f_target:.3f} MHz above current {f_now:.3f} MHz implies a resistance decrease"
                )
            r_target = r_now if qid in plan.skip_set else FrequencyModel.predict_rn(model, f_target)
            targets_r[qid] = max(r_target, r_now)
            plan.shifts_f[qid] = float(f_now - f_target)
            plan.shifts_r_rel[qid] = float(targets_r[qid] / r_now - 1.0)
        plan.targets_r = targets_r
        return targets_r

    @staticmethod
    def validate_plan(
        chip: ChipState, model: PowerLawModel, plan: FrequencyPlan, constraints: PlanConstraints = None
    ) -> PlanValidation:
        """Check every plan invariant; failures are reported, never raised"""
        constraints = constraints or PlanConstraints()
        report = PlanValidation()
        unknown = [qid for qid in plan.targets_f if qid not in chip.ids]
        for qid in unknown:
            report.checks.append(PlanCheck("scope", f"qubit {qid}", False, float("nan")))

        for q in chip.qubits:
            if q.id not in plan.targets_f:
                report.checks.append(PlanCheck("scope", f"qubit {q.id}", False, float("nan")))
                continue
            target = plan.targets_f[q.id]
            f_now = FrequencyModel.predict_f01(model, q.r_n)
            downshift = f_now - target
            report.checks.append(PlanCheck("downshift", f"qubit {q.id}", downshift >= -f_now * REL_TOL, downshift))
            dr = FrequencyModel.predict_rn(model, target) / q.r_n - 1.0 if q.id not in plan.skip_set else 0.0
            report.checks.append(
                PlanCheck("max_dr", f"qubit {q.id}", dr <= constraints.max_dr_rel + REL_TOL, constraints.max_dr_rel - dr)
            )
            purcell_margin = constraints.f_purcell_max - target
            report.checks.append(PlanCheck("purcell", f"qubit {q.id}", purcell_margin >= 0, purcell_margin))

        if unknown or any(q.id not in plan.targets_f for q in chip.qubits):
            return report

        for control, target in chip.edges:
            margins = CollisionDetector.pair_margins(
                plan.targets_f[control],
                plan.targets_f[target],
                chip.qubit(control).anharmonicity,
                chip.qubit(target).anharmonicity,
                constraints.bounds,
            )
            for collision_type, margin in sorted(margins.items()):
                report.checks.append(
                    PlanCheck(f"collision_type{collision_type}", f"edge ({control}, {target})", margin >= 0, margin)
                )
            spacing = abs(plan.targets_f[control] - plan.targets_f[target])
            lo, hi = constraints.spacing_window
            report.checks.append(
                PlanCheck("spacing", f"edge ({control}, {target})", lo <= spacing <= hi, min(spacing - lo, hi - spacing))
            )
        return report

    @staticmethod
    def predicted_precision(plan: FrequencyPlan, model: PowerLawModel, sigma_r_rel: float) -> float:
        """RMS frequency-equivalent precision of the plan's tuned targets for a given resistance precision"""
        tuned = [qid for qid in plan.targets_r if qid not in plan.skip_set] or list(plan.targets_r)
        if not tuned:
            raise ParameterError("Plan has no qubits")
        values = [FrequencyModel.freq_sensitivity(model, plan.targets_r[qid], sigma_r_rel) for qid in tuned]
        return float(np.sqrt(np.mean(np.square(values))))

    @staticmethod
    def already_feasible(chip: ChipState, freqs: Mapping[int, float], constraints: PlanConstraints) -> bool:
        if any(f > constraints.f_purcell_max for f in freqs.values()):
            return False
        if CollisionDetector.spacing_violations(chip, freqs, constraints.spacing_window):
            return False
        return CollisionDetector.chip_collisions(chip, freqs, constraints.bounds).is_clean

    @staticmethod
    def resistance_shift_for(model: PowerLawModel, f_now: float, f_target: float) -> float:
        """Fractional resistance increase implied by trimming f_now down to f_target"""
        return (f_target / f_now) ** (1.0 / model.p) - 1.0

    @staticmethod
    def exceeds_tuning_range(dr_rel: float, constraints: PlanConstraints = None) -> bool:
        constraints = constraints or PlanConstraints()
        return dr_rel > constraints.max_dr_rel
