import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence

import numpy as np

from config import DEFAULT_THREADS
from services.collision import CollisionBounds, CollisionDetector
from services.errors import ParameterError
from services.lattice import ChipState
from utils.helpers import derive_seed, is_ascending, make_rng

logger = logging.getLogger(__name__)

BLOCK_SIZE = 1000


@dataclass(frozen=True)
class YieldEstimate:
    yield_fraction: float
    ci: float
    mean_collisions: float
    trials: int
    collision_histogram: Dict[int, int] = field(default_factory=dict)


@dataclass(frozen=True)
class YieldCurve:
    sigma_grid: List[float]
    yields: List[float]
    ci_halfwidth: List[float]
    mean_collisions: List[float]
    trials: int

    def rows(self) -> List[Dict[str, float]]:
        return [
            {"sigma_mhz": s, "yield": y, "ci": c, "mean_collisions": m}
            for s, y, c, m in zip(self.sigma_grid, self.yields, self.ci_halfwidth, self.mean_collisions)
        ]


class YieldEstimator:
    """Monte Carlo collision-free yield under i.i.d. Gaussian frequency spread"""

    @staticmethod
    def yield_estimate(
        chip: ChipState,
        targets: Mapping[int, float],
        sigma_f: float,
        bounds: CollisionBounds,
        trials: int,
        seed: int,
        threads: int = DEFAULT_THREADS,
    ) -> YieldEstimate:
        """
        Fraction of perturbed target sets with zero nearest-neighbor collisions

        Args:
            chip (ChipState): Chip topology and anharmonicities
            targets (Mapping[int, float]): Target frequency per qubit (MHz)
            sigma_f (float): Gaussian spread added to every target (MHz)
            bounds (CollisionBounds): Tolerances
            trials (int): Number of Monte Carlo trials
            seed (int): Seed; trial blocks draw from streams derived from it
            threads (int): Worker threads; results do not depend on it

        Returns:
            YieldEstimate: yield, 95% binomial half-width, mean collision count
        """
        if trials < 1:
            raise ParameterError(f"trials must be >= 1, got {trials}")
        if sigma_f < 0:
            raise ParameterError(f"sigma_f must be non-negative, got {sigma_f}")
        missing = [qid for qid in chip.ids if qid not in targets]
        if missing:
            raise ParameterError(f"Missing target frequency for qubits {missing}")

        order = chip.ids
        base = np.array([targets[qid] for qid in order], dtype=float)
        blocks = [(start, min(BLOCK_SIZE, trials - start)) for start in range(0, trials, BLOCK_SIZE)]

        def run_block(index: int) -> np.ndarray:
            _, size = blocks[index]
            rng = make_rng(seed, "yield-block", index)
            samples = base + rng.normal(0.0, sigma_f, size=(size, len(order))) if sigma_f > 0 else np.tile(base, (size, 1))
            return CollisionDetector.count_batch(chip, samples, bounds, order)

        if threads > 1 and len(blocks) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(pool.map(run_block, range(len(blocks))))
        else:
            parts = [run_block(i) for i in range(len(blocks))]

        counts = np.concatenate(parts)
        fraction = float(np.mean(counts == 0))
        ci = float(1.96 * np.sqrt(fraction * (1.0 - fraction) / trials))
        values, tallies = np.unique(counts, return_counts=True)
        return YieldEstimate(
            yield_fraction=fraction,
            ci=ci,
            mean_collisions=float(np.mean(counts)),
            trials=trials,
            collision_histogram={int(v): int(c) for v, c in zip(values, tallies)},
        )

    @staticmethod
    def yield_curve(
        chip: ChipState,
        targets: Mapping[int, float],
        sigma_grid: Sequence[float],
        bounds: CollisionBounds,
        trials: int,
        seed: int,
        threads: int = DEFAULT_THREADS,
    ) -> YieldCurve:
        if not sigma_grid:
            raise ParameterError("sigma grid must be non-empty")
        if not is_ascending(list(sigma_grid)):
            raise ParameterError(f"sigma grid must be strictly ascending, got {list(sigma_grid)}")

        logger.info(f"Yield curve on {chip.name}: {len(sigma_grid)} points x {trials} trials")
        estimates = []
        for index, sigma in enumerate(sigma_grid):
            sub_seed = int(derive_seed(seed, "sigma", index).generate_state(1)[0])
            estimate = YieldEstimator.yield_estimate(chip, targets, sigma, bounds, trials, sub_seed, threads)
            logger.debug(f"sigma={sigma} MHz: yield={estimate.yield_fraction:.4f} +/- {estimate.ci:.4f}")
            estimates.append(estimate)

        return YieldCurve(
            sigma_grid=[float(s) for s in sigma_grid],
            yields=[e.yield_fraction for e in estimates],
            ci_halfwidth=[e.ci for e in estimates],
            mean_collisions=[e.mean_collisions for e in estimates],
            trials=trials,
        )

    @staticmethod
    def improvement_ratio(tuned: YieldCurve, untuned: YieldCurve) -> List[float]:
        """Pointwise yield ratio tuned/untuned (inf where the untuned yield is zero)"""
        if tuned.sigma_grid != untuned.sigma_grid:
            raise ParameterError("Curves must share the same sigma grid")
        return [t / u if u > 0 else float("inf") for t, u in zip(tuned.yields, untuned.yields)]
