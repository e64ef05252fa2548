import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from config import COLLISION_BOUNDS
from services.errors import ParameterError, ValidationError
from services.lattice import ChipState, Edge

logger = logging.getLogger(__name__)

COLLISION_TYPES = {
    1: "level hybridization",
    2: "two-photon excitation to |2>",
    3: "f01 / f12 degeneracy",
    4: "slow gate (beyond straddling)",
}


@dataclass(frozen=True)
class CollisionBounds:
    """Half-widths (MHz) around each collision condition; multiplier scales d1..d3"""

    d1: float = COLLISION_BOUNDS["d1_mhz"]
    d2: float = COLLISION_BOUNDS["d2_mhz"]
    d3: float = COLLISION_BOUNDS["d3_mhz"]
    d4_max_detuning: float = COLLISION_BOUNDS["d4_max_detuning_mhz"]
    multiplier: float = COLLISION_BOUNDS["multiplier"]
    enabled: Tuple[int, ...] = (1, 2, 3, 4)

    def __post_init__(self):
        for name in ("d1", "d2", "d3", "d4_max_detuning", "multiplier"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"Collision bound {name} must be positive, got {getattr(self, name)}", name)

    def scaled(self, multiplier: float) -> "CollisionBounds":
        return replace(self, multiplier=multiplier)

    @property
    def widths(self) -> Dict[int, float]:
        return {1: self.d1 * self.multiplier, 2: self.d2 * self.multiplier, 3: self.d3 * self.multiplier}

    def to_dict(self) -> Dict[str, float]:
        return {
            "d1_mhz": self.d1,
            "d2_mhz": self.d2,
            "d3_mhz": self.d3,
            "d4_max_detuning_mhz": self.d4_max_detuning,
            "multiplier": self.multiplier,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "CollisionBounds":
        defaults = cls()
        return cls(
            d1=float(data.get("d1_mhz", defaults.d1)),
            d2=float(data.get("d2_mhz", defaults.d2)),
            d3=float(data.get("d3_mhz", defaults.d3)),
            d4_max_detuning=float(data.get("d4_max_detuning_mhz", defaults.d4_max_detuning)),
            multiplier=float(data.get("multiplier", defaults.multiplier)),
            enabled=tuple(data.get("enabled_types", defaults.enabled)),
        )


@dataclass(frozen=True)
class Violation:
    edge: Edge
    collision_type: int
    margin: float


@dataclass
class CollisionReport:
    violations: List[Violation] = field(default_factory=list)
    counts: Dict[int, int] = field(default_factory=lambda: {t: 0 for t in COLLISION_TYPES})

    @property
    def total(self) -> int:
        return len(self.violations)

    @property
    def is_clean(self) -> bool:
        return not self.violations

    def add(self, violation: Violation):
        self.violations.append(violation)
        self.counts[violation.collision_type] += 1


class CollisionDetector:
    """Nearest-neighbor type 1-4 collision checks with signed margins (negative inside a bound)"""

    @staticmethod
    def pair_margins(
        f_c: float, f_t: float, delta_c: float, delta_t: float, bounds: CollisionBounds
    ) -> Dict[int, float]:
        """
        Signed margin per collision type for one control/target pair

        Args:
            f_c, f_t (float): Control and target f01 (MHz)
            delta_c, delta_t (float): Anharmonicities (MHz, negative)
            bounds (CollisionBounds): Tolerances

        Returns:
            Dict[int, float]: type -> distance from the bound edge (MHz), negative = collision
        """
        if f_c <= 0 or f_t <= 0:
            raise ParameterError(f"Frequencies must be positive, got f_c={f_c}, f_t={f_t}")
        if delta_c >= 0 or delta_t >= 0:
            raise ParameterError(f"Anharmonicities must be negative, got {delta_c}, {delta_t}")

        widths = bounds.widths
        detuning = f_c - f_t
        margins = {
            1: abs(detuning) - widths[1],
            # both orientations of the edge
            2: min(abs(detuning - delta_t / 2.0), abs(-detuning - delta_c / 2.0)) - widths[2],
            3: min(abs(detuning - delta_t), abs(-detuning - delta_c)) - widths[3],
            4: bounds.d4_max_detuning - abs(detuning),
        }
        return {t: m for t, m in margins.items() if t in bounds.enabled}

    @staticmethod
    def pair_collisions(
        f_c: float, f_t: float, delta_c: float, delta_t: float, bounds: CollisionBounds
    ) -> List[Tuple[int, float]]:
        margins = CollisionDetector.pair_margins(f_c, f_t, delta_c, delta_t, bounds)
        return [(t, m) for t, m in sorted(margins.items()) if m < 0]

    @staticmethod
    def chip_collisions(
        chip: ChipState, freqs: Mapping[int, float], bounds: CollisionBounds
    ) -> CollisionReport:
        """Scan every edge once (types 2/3 already cover both orientations) in edge order"""
        report = CollisionReport()
        for control, target in chip.edges:
            for qubit_id in (control, target):
                if qubit_id not in freqs or freqs[qubit_id] is None:
                    raise ParameterError(f"Missing frequency for qubit {qubit_id}")
            hits = CollisionDetector.pair_collisions(
                freqs[control],
                freqs[target],
                chip.qubit(control).anharmonicity,
                chip.qubit(target).anharmonicity,
                bounds,
            )
            for collision_type, margin in hits:
                report.add(Violation((control, target), collision_type, margin))

        logger.debug(f"Collision scan on {chip.name}: {report.total} violations {report.counts}")
        return report

    @staticmethod
    def spacing_violations(
        chip: ChipState, freqs: Mapping[int, float], window: Tuple[float, float]
    ) -> List[Tuple[Edge, float]]:
        """Edges whose |detuning| falls outside the comfortable spacing window"""
        lo, hi = window
        failures = []
        for control, target in chip.edges:
            spacing = abs(freqs[control] - freqs[target])
            if spacing < lo or spacing > hi:
                failures.append(((control, target), spacing))
        return failures

    @staticmethod
    def count_batch(
        chip: ChipState,
        freq_samples: np.ndarray,
        bounds: CollisionBounds,
        order: Optional[List[int]] = None,
    ) -> np.ndarray:
        """
        Vectorized collision counts for many frequency samples at once

        Args:
            chip (ChipState): Chip topology
            freq_samples (np.ndarray): (trials, n_qubits) frequencies, columns in `order`
            bounds (CollisionBounds): Tolerances
            order (List[int]): Qubit id of each column (defaults to chip order)

        Returns:
            np.ndarray: Violations per trial, counting each edge once per type
        """
        order = order or chip.ids
        column = {qid: i for i, qid in enumerate(order)}
        counts = np.zeros(freq_samples.shape[0], dtype=np.int64)
        if not chip.edges:
            return counts

        c_idx = np.array([column[c] for c, _ in chip.edges])
        t_idx = np.array([column[t] for _, t in chip.edges])
        delta_c = np.array([chip.qubit(c).anharmonicity for c, _ in chip.edges])
        delta_t = np.array([chip.qubit(t).anharmonicity for _, t in chip.edges])
        detuning = freq_samples[:, c_idx] - freq_samples[:, t_idx]

        widths = bounds.widths
        if 1 in bounds.enabled:
            counts += np.sum(np.abs(detuning) - widths[1] < 0, axis=1)
        if 2 in bounds.enabled:
            dist = np.minimum(np.abs(detuning - delta_t / 2.0), np.abs(-detuning - delta_c / 2.0))
            counts += np.sum(dist - widths[2] < 0, axis=1)
        if 3 in bounds.enabled:
            dist = np.minimum(np.abs(detuning - delta_t), np.abs(-detuning - delta_c))
            counts += np.sum(dist - widths[3] < 0, axis=1)
        if 4 in bounds.enabled:
            counts += np.sum(bounds.d4_max_detuning - np.abs(detuning) < 0, axis=1)
        return counts
