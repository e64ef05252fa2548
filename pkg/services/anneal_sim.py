import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from config import ANNEAL_CONFIG, PLANNED_DR_MEAN, PLANNED_DR_SIGMA
from services.errors import FitError, MonotonicityError, ParameterError, ValidationError
from services.lattice import ChipState
from utils.helpers import make_rng

logger = logging.getLogger(__name__)

SUCCESS = "success"
OVERSHOOT = "overshoot"
UNDERSHOOT_SATURATED = "undershoot_saturated"
EXPOSURE_LIMIT = "exposure_limit"
INVALID_TARGET = "invalid_target"
STATUSES = (SUCCESS, OVERSHOOT, UNDERSHOOT_SATURATED, EXPOSURE_LIMIT, INVALID_TARGET)


@dataclass(frozen=True)
class AnnealConfig:
    band_rel: float = ANNEAL_CONFIG["band_rel"]
    step_fraction: float = ANNEAL_CONFIG["step_fraction"]
    step_sigma_rel: float = ANNEAL_CONFIG["step_sigma_rel"]
    saturation_mean_rel: float = ANNEAL_CONFIG["saturation_mean_rel"]
    saturation_sigma_rel: float = ANNEAL_CONFIG["saturation_sigma_rel"]
    max_exposures: int = ANNEAL_CONFIG["max_exposures"]
    # smallest resistance jump one exposure produces, relative to R_T
    min_step_rel: float = ANNEAL_CONFIG["min_step_rel"]
    # the first exposure on a fresh junction: cautious fraction, a jump floor relative to r0
    # and a response spread step_sigma_rel * first_step_noise_gain
    first_step_fraction: float = ANNEAL_CONFIG["first_step_fraction"]
    first_step_min_rel: float = ANNEAL_CONFIG["first_step_min_rel"]
    first_step_noise_gain: float = ANNEAL_CONFIG["first_step_noise_gain"]
    saturation: bool = True

    def __post_init__(self):
        if not 0 < self.band_rel < 0.01:
            raise ValidationError(f"band_rel must lie in (0, 0.01), got {self.band_rel}", "band_rel")
        for name in ("step_fraction", "first_step_fraction"):
            if not 0 < getattr(self, name) <= 1:
                raise ValidationError(f"{name} must lie in (0, 1], got {getattr(self, name)}", name)
        if self.first_step_min_rel < 0 or self.first_step_noise_gain < 0:
            raise ValidationError("first_step_min_rel and first_step_noise_gain must be non-negative", "anneal config")
        if not self.saturation_mean_rel > 0:
            raise ValidationError("saturation_mean_rel must be positive", "saturation_mean_rel")
        if self.step_sigma_rel < 0 or self.saturation_sigma_rel < 0 or self.min_step_rel < 0:
            raise ValidationError("Noise widths and min_step_rel must be non-negative", "anneal config")
        if self.max_exposures < 1:
            raise ValidationError("max_exposures must be >= 1", "max_exposures")

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> "AnnealConfig":
        known = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        return cls(**known)


@dataclass(frozen=True)
class AnnealOutcome:
    qubit_id: int
    r0: float
    r_target: float
    final_r: float
    exposures: int
    status: str
    final_dev_rel: float
    trace: Tuple[float, ...] = field(default_factory=tuple, repr=False)

    @property
    def planned_dr_rel(self) -> float:
        return self.r_target / self.r0 - 1.0

    @property
    def increment_ratio(self) -> float:
        return self.final_r / self.r0


@dataclass
class SuccessStats:
    total: int
    success_rate: float
    rms_dev_success: float
    overshoot: int
    undershoot: int
    exposure_limit: int
    bins: List[Dict[str, float]] = field(default_factory=list)


@dataclass(frozen=True)
class LogNormalFit:
    mu: float
    sigma: float
    ks_statistic: float
    ks_pvalue: float
    n: int

    def ks_critical(self, alpha: float = 0.05) -> float:
        """Asymptotic one-sample KS critical value"""
        c = {0.10: 1.224, 0.05: 1.358, 0.01: 1.628}.get(alpha, 1.358)
        return c / np.sqrt(self.n)


def classify(final_dev_rel: float, band_rel: float, saturated: bool) -> str:
    if abs(final_dev_rel) <= band_rel:
        return SUCCESS
    if final_dev_rel > band_rel:
        return OVERSHOOT
    return UNDERSHOOT_SATURATED if saturated else EXPOSURE_LIMIT


class AnnealSimulator:
    """Stochastic model of the adaptive, monotone junction anneal loop"""

    @staticmethod
    def anneal_junction(
        r0: float,
        r_target: float,
        config: AnnealConfig = None,
        seed: int = 0,
        qubit_id: int = 0,
        rng: Optional[np.random.Generator] = None,
    ) -> AnnealOutcome:
        """
        Simulate one junction annealed toward r_target

        Args:
            r0 (float): Initial resistance (Ohm)
            r_target (float): Target resistance R_T (Ohm)
            config (AnnealConfig): Loop parameters
            seed (int): Seed used when no generator is passed
            qubit_id (int): Label carried into the outcome
            rng (np.random.Generator): Optional generator

        Returns:
            AnnealOutcome: Final resistance, exposure count and status
        """
        config = config or AnnealConfig()
        if not r0 > 0 or not r_target > 0:
            raise ParameterError(f"Resistances must be positive, got r0={r0}, r_target={r_target}")
        lower = r_target * (1.0 - config.band_rel)
        if r_target < r0 * (1.0 - config.band_rel):
            raise MonotonicityError(
                f"Qubit {qubit_id}: target {r_target:.2f} Ohm below initial {r0:.2f} Ohm; annealing only increases R"
            )

        rng = rng if rng is not None else make_rng(seed, "junction", qubit_id)
        if config.saturation:
            limit_rel = max(0.0, rng.normal(config.saturation_mean_rel, config.saturation_sigma_rel))
            r_max = r0 * (1.0 + limit_rel)
        else:
            r_max = np.inf

        r = r0
        trace = [r]
        exposures = 0
        saturated = False
        while r < lower and exposures < config.max_exposures:
            gap = r_target - r
            if exposures == 0:
                sigma = config.step_sigma_rel * config.first_step_noise_gain
                attempt = max(config.first_step_fraction * gap, config.first_step_min_rel * r0)
            else:
                sigma = config.step_sigma_rel
                attempt = max(config.step_fraction * gap, config.min_step_rel * r_target)
            noise = rng.lognormal(0.0, sigma) if sigma > 0 else 1.0
            step = attempt * noise
            exposures += 1
            if r + step >= r_max:
                r = max(r, r_max)
                trace.append(r)
                saturated = True
                break
            r = r + step
            trace.append(r)

        dev = (r - r_target) / r_target
        status = classify(dev, config.band_rel, saturated)
        logger.debug(f"Qubit {qubit_id}: {status} after {exposures} exposures, dev={dev:.5f}")
        return AnnealOutcome(qubit_id, r0, r_target, float(r), exposures, status, float(dev), tuple(trace))

    @staticmethod
    def anneal_chip(
        chip: ChipState, targets_r: Mapping[int, float], config: AnnealConfig = None, seed: int = 0
    ) -> List[AnnealOutcome]:
        """Independent junction simulations, one derived RNG stream per qubit id"""
        config = config or AnnealConfig()
        outcomes = []
        logger.info(f"Annealing {len(targets_r)} junctions on {chip.name}")
        for q in chip.qubits:
            if q.id not in targets_r:
                continue
            try:
                outcome = AnnealSimulator.anneal_junction(
                    q.r_n, targets_r[q.id], config, qubit_id=q.id, rng=make_rng(seed, "anneal", q.id)
                )
            except (MonotonicityError, ParameterError) as e:
                logger.error(f"Qubit {q.id}: {e}")
                outcome = AnnealOutcome(q.id, q.r_n, targets_r[q.id], q.r_n, 0, INVALID_TARGET, float("nan"))
            outcomes.append(outcome)

        succeeded = sum(o.status == SUCCESS for o in outcomes)
        logger.info(f"Anneal finished: {succeeded}/{len(outcomes)} junctions within band")
        return outcomes

    @staticmethod
    def success_stats(outcomes: Sequence[AnnealOutcome], bin_edges: Optional[Sequence[float]] = None) -> SuccessStats:
        """
        Aggregate success statistics, with per-planned-shift bins (1% wide by default)

        Args:
            outcomes (Sequence[AnnealOutcome]): Simulated outcomes
            bin_edges (Sequence[float]): Planned relative shift bin edges

        Returns:
            SuccessStats: Rates, RMS deviation over successes and per-bin breakdown
        """
        if not outcomes:
            raise ParameterError("success_stats requires at least one outcome")

        edges = list(bin_edges) if bin_edges is not None else [i / 100.0 for i in range(0, 16)] + [np.inf]
        valid = [o for o in outcomes if o.status != INVALID_TARGET]
        successes = [o for o in valid if o.status == SUCCESS]
        rms = float(np.sqrt(np.mean([o.final_dev_rel ** 2 for o in successes]))) if successes else float("nan")

        bins = []
        for lo, hi in zip(edges, edges[1:]):
            members = [o for o in valid if lo <= o.planned_dr_rel < hi]
            if not members:
                continue
            bins.append({
                "dr_lo": lo,
                "dr_hi": hi,
                "count": len(members),
                "success_rate": sum(o.status == SUCCESS for o in members) / len(members),
                "overshoot": sum(o.status == OVERSHOOT for o in members),
                "undershoot": sum(o.status in (UNDERSHOOT_SATURATED, EXPOSURE_LIMIT) for o in members),
            })

        return SuccessStats(
            total=len(outcomes),
            success_rate=len(successes) / len(outcomes),
            rms_dev_success=rms,
            overshoot=sum(o.status == OVERSHOOT for o in valid),
            undershoot=sum(o.status == UNDERSHOOT_SATURATED for o in valid),
            exposure_limit=sum(o.status == EXPOSURE_LIMIT for o in valid),
            bins=bins,
        )

    @staticmethod
    def lognormal_fit(samples: Sequence[float], shift: float = 0.0) -> LogNormalFit:
        """
        Maximum-likelihood log-normal fit plus a Kolmogorov-Smirnov statistic

        Args:
            samples (Sequence[float]): Values, positive after adding `shift`
            shift (float): Support shift applied before fitting

        Returns:
            LogNormalFit: mu and sigma of log(x), KS statistic and p-value
        """
        x = np.asarray(samples, dtype=float) + shift
        if x.size < 10:
            raise FitError(f"Log-normal fit needs at least 10 samples, got {x.size}")
        if np.any(x <= 0):
            raise FitError("Log-normal fit requires strictly positive (shifted) samples")
        logs = np.log(x)
        sigma = float(np.std(logs))
        if sigma == 0:
            raise FitError("Degenerate samples: all values are identical")
        mu = float(np.mean(logs))
        ks = stats.kstest(x, "lognorm", args=(sigma, 0.0, np.exp(mu)))
        return LogNormalFit(mu=mu, sigma=sigma, ks_statistic=float(ks.statistic), ks_pvalue=float(ks.pvalue), n=int(x.size))

    @staticmethod
    def sample_planned_shifts(
        n: int, seed: int, mean: float = PLANNED_DR_MEAN, sigma: float = PLANNED_DR_SIGMA
    ) -> np.ndarray:
        """Planned relative resistance shifts from a normal distribution truncated at zero"""
        if n < 0:
            raise ParameterError(f"n must be non-negative, got {n}")
        a = (0.0 - mean) / sigma
        return stats.truncnorm.rvs(a, np.inf, loc=mean, scale=sigma, size=n, random_state=make_rng(seed, "planned-dr"))
