import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from services.errors import ParameterError, SingularFitError, ValidationError
from services.lattice import ChipState
from utils.helpers import make_rng

logger = logging.getLogger(__name__)


def ghz_to_mhz(value: Optional[float]) -> Optional[float]:
    return None if value is None else float(value) * 1000.0


def mhz_to_ghz(value: Optional[float]) -> Optional[float]:
    return None if value is None else float(value) / 1000.0


@dataclass(frozen=True)
class PowerLawModel:
    """f01 = a * r_n**p, with residual spread sigma_f (MHz)"""

    a: float
    p: float
    sigma_f: float = 0.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValidationError(f"Power-law prefactor must be positive, got {self.a}", "a")
        if not self.p < 0:
            raise ValidationError(f"Power-law exponent must be negative, got {self.p}", "p")
        if not self.sigma_f >= 0:
            raise ValidationError(f"sigma_f must be non-negative, got {self.sigma_f}", "sigma_f")

    def to_dict(self) -> Dict[str, float]:
        return {"a": self.a, "p": self.p, "sigma_f_mhz": self.sigma_f}

    @classmethod
    def from_dict(cls, data: Dict[str, float]) -> "PowerLawModel":
        try:
            return cls(a=float(data["a"]), p=float(data["p"]), sigma_f=float(data.get("sigma_f_mhz", 0.0)))
        except KeyError as e:
            logger.error(f"Model is missing field {e}")
            raise ValidationError(f"Model is missing field {e}", str(e))


@dataclass(frozen=True)
class FitStats:
    residuals: List[Tuple[int, float]]
    sigma_f: float
    mean_f: float
    groups: Dict[str, float] = field(default_factory=dict)


class FrequencyModel:
    """Resistance-to-frequency power law: fitting, evaluation, inversion and sensitivity"""

    @staticmethod
    def fit_power_law(
        points: Sequence[Tuple[float, float]],
        ids: Optional[Sequence[int]] = None,
        pin_exponent: Optional[float] = None,
    ) -> Tuple[PowerLawModel, FitStats]:
        """
        Least-squares fit of log f = log a + p log R

        Args:
            points: (r_n Ohm, f01 MHz) pairs
            ids: Qubit ids labelling the residuals (defaults to point index)
            pin_exponent: Fix p to this value and fit only a

        Returns:
            Tuple[PowerLawModel, FitStats]: Model and residuals in linear frequency space
        """
        if len(points) < 2:
            raise ParameterError(f"Power-law fit needs at least 2 points, got {len(points)}")

        data = np.asarray(points, dtype=float)
        r, f = data[:, 0], data[:, 1]
        if np.any(r <= 0) or np.any(f <= 0):
            raise ParameterError("Power-law fit requires positive resistances and frequencies")

        log_r, log_f = np.log(r), np.log(f)
        if pin_exponent is not None:
            p = float(pin_exponent)
            log_a = float(np.mean(log_f - p * log_r))
        else:
            if np.ptp(log_r) == 0:
                logger.error("All resistances are equal; exponent is undetermined")
                raise SingularFitError("All resistances are equal; exponent is undetermined")
            design = np.column_stack([np.ones_like(log_r), log_r])
            (log_a, p), *_ = np.linalg.lstsq(design, log_f, rcond=None)
            log_a, p = float(log_a), float(p)

        residual_values = f - np.exp(log_a) * r ** p
        model = PowerLawModel(a=float(np.exp(log_a)), p=p, sigma_f=float(np.std(residual_values)))
        labels = list(ids) if ids is not None else list(range(len(points)))
        stats = FitStats(
            residuals=[(int(i), float(v)) for i, v in zip(labels, residual_values)],
            sigma_f=model.sigma_f,
            mean_f=float(np.mean(f)),
        )
        logger.info(f"Fitted power law on {len(points)} points: a={model.a:.6g}, p={model.p:.4f}, sigma_f={model.sigma_f:.2f} MHz")
        return model, stats

    @staticmethod
    def fit_chip(chip: ChipState, pin_exponent: Optional[float] = None) -> Tuple[PowerLawModel, FitStats]:
        """Fit the chip's measured (r_n, f01) records and split residual spread by tuned/untuned"""
        measured = [q for q in chip.qubits if q.f01 is not None]
        model, stats = FrequencyModel.fit_power_law(
            [(q.r_n, q.f01) for q in measured], ids=[q.id for q in measured], pin_exponent=pin_exponent
        )
        residual_by_id = dict(stats.residuals)
        for label, flag in (("tuned", True), ("untuned", False)):
            values = [residual_by_id[q.id] for q in measured if q.tuned == flag]
            if values:
                stats.groups[label] = float(np.std(values))
        return model, stats

    @staticmethod
    def predict_f01(model: PowerLawModel, r_n: float) -> float:
        if not r_n > 0:
            raise ParameterError(f"Resistance must be positive, got {r_n}")
        return model.a * r_n ** model.p

    @staticmethod
    def predict_rn(model: PowerLawModel, f01: float) -> float:
        if not f01 > 0:
            raise ParameterError(f"Frequency must be positive, got {f01}")
        return (f01 / model.a) ** (1.0 / model.p)

    @staticmethod
    def freq_sensitivity(model: PowerLawModel, r_n: float, sigma_r_rel: float) -> float:
        """
        Frequency-equivalent spread of a relative resistance spread: |p| * f01(r_n) * sigma_R

        Args:
            model (PowerLawModel): Power-law model
            r_n (float): Operating resistance (Ohm)
            sigma_r_rel (float): Relative resistance spread (fraction)

        Returns:
            float: sigma_f in MHz
        """
        if sigma_r_rel < 0:
            raise ParameterError(f"Relative resistance spread must be non-negative, got {sigma_r_rel}")
        return abs(model.p) * FrequencyModel.predict_f01(model, r_n) * sigma_r_rel

    @staticmethod
    def predict_chip(chip: ChipState, model: PowerLawModel) -> Dict[int, float]:
        """Predicted f01 for every qubit from its junction resistance"""
        return {q.id: FrequencyModel.predict_f01(model, q.r_n) for q in chip.qubits}

    @staticmethod
    def synthesize_measurements(
        chip: ChipState, model: PowerLawModel, r_spread_rel: float, seed: int, sigma_f: Optional[float] = None
    ) -> ChipState:
        """
        Fabrication-like chip: Gaussian relative resistance spread, f01 from the model plus residual noise

        Args:
            chip (ChipState): Topology with nominal resistances
            model (PowerLawModel): Reference law used to generate frequencies
            r_spread_rel (float): Relative standard deviation of r_n
            seed (int): Seed (one stream per qubit id)
            sigma_f (float): Frequency residual noise in MHz (defaults to model.sigma_f)

        Returns:
            ChipState: Chip with r_n and f01 populated
        """
        if r_spread_rel < 0:
            raise ParameterError(f"Resistance spread must be non-negative, got {r_spread_rel}")
        noise = model.sigma_f if sigma_f is None else sigma_f
        qubits = []
        for q in chip.qubits:
            rng = make_rng(seed, "synthesize", q.id)
            r_n = q.r_n * (1.0 + r_spread_rel * rng.standard_normal())
            f01 = FrequencyModel.predict_f01(model, r_n) + noise * rng.standard_normal()
            qubits.append(replace(q, r_n=float(r_n), f01=float(f01)))
        return replace(chip, qubits=tuple(qubits)).validate()
