import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import eigh, expm
from scipy.optimize import brentq, linear_sum_assignment, minimize, minimize_scalar

from config import (
    DEFAULT_ANHARMONICITY_MHZ,
    DEFAULT_J_MHZ,
    DEFAULT_LEVELS,
    DEFAULT_RISE_FALL_NS,
    DEFAULT_SOLVER_TOL,
    DRIVE_REFERENCE_DETUNING_MHZ,
    MAX_DRIVE_AMPLITUDE_MHZ,
    MAX_DRIVE_SCALE,
)
from services.collision import CollisionBounds, CollisionDetector
from services.errors import CalibrationError, ParameterError, SolverError, ValidationError
from services.lattice import ChipState

logger = logging.getLogger(__name__)

MHZ_NS = 2.0 * np.pi * 1e-3  # MHz -> rad/ns
OVERLAP_FLAG = 0.75
AMPLITUDE_LADDER = (2.0, 5.0, 10.0, 20.0, 40.0, 80.0, MAX_DRIVE_AMPLITUDE_MHZ)

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class TransmonPair:
    """Two coupled Duffing transmons; frequencies and couplings in MHz"""

    f_c: float
    f_t: float
    delta_c: float = DEFAULT_ANHARMONICITY_MHZ
    delta_t: float = DEFAULT_ANHARMONICITY_MHZ
    j_coupling: float = DEFAULT_J_MHZ
    levels: int = DEFAULT_LEVELS

    def __post_init__(self):
        if self.levels < 3:
            raise ParameterError(f"Truncation needs at least 3 levels per transmon, got {self.levels}")
        if self.j_coupling < 0:
            raise ValidationError(f"J must be non-negative, got {self.j_coupling}", "j_coupling")
        if self.delta_c >= 0 or self.delta_t >= 0:
            raise ValidationError("Anharmonicities must be negative", "anharmonicity")

    @property
    def detuning(self) -> float:
        return self.f_c - self.f_t

    @property
    def dim(self) -> int:
        return self.levels ** 2

    def index(self, n_c: int, n_t: int) -> int:
        return n_c * self.levels + n_t

    def with_detuning(self, detuning: float) -> "TransmonPair":
        return replace(self, f_c=self.f_t + detuning)

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict) -> "TransmonPair":
        return cls(
            f_c=float(data["f_c_mhz"]),
            f_t=float(data["f_t_mhz"]),
            delta_c=float(data.get("delta_c_mhz", DEFAULT_ANHARMONICITY_MHZ)),
            delta_t=float(data.get("delta_t_mhz", DEFAULT_ANHARMONICITY_MHZ)),
            j_coupling=float(data.get("j_mhz", DEFAULT_J_MHZ)),
            levels=int(data.get("levels", DEFAULT_LEVELS)),
        )


@dataclass(frozen=True)
class CRPulseSpec:
    gate_time: float
    rise_fall: float = DEFAULT_RISE_FALL_NS
    amplitude: float = 0.0
    rotary_amplitude: float = 0.0
    echo: bool = True
    zx_sign: int = 1
    drive_freq: Optional[float] = None
    warning: Optional[str] = None

    def __post_init__(self):
        if not self.gate_time > 2 * self.rise_fall:
            raise ValidationError(f"gate_time {self.gate_time} ns must exceed twice rise_fall {self.rise_fall} ns", "gate_time")
        half = self.gate_time / 2.0 if self.echo else self.gate_time
        if half < 2 * self.rise_fall:
            raise ValidationError("Each CR segment must hold both Gaussian edges", "rise_fall")
        if self.amplitude < 0 or self.rotary_amplitude < 0:
            raise ValidationError("Pulse amplitudes must be non-negative", "amplitude")


@dataclass(frozen=True)
class ZZResult:
    zz_khz: float
    flagged: bool
    min_overlap: float


@dataclass(frozen=True)
class GateErrorResult:
    error: float
    zz: float
    unitarity_defect: float
    calibrated_amplitude: float
    rotary_amplitude: float = 0.0
    status: str = "ok"


@dataclass(frozen=True)
class SweepPoint:
    detuning: float
    error: float
    zz_khz: float
    status: str
    amplitude: float = float("nan")
    rotary_amplitude: float = float("nan")


@dataclass(frozen=True)
class EdgeZZ:
    control: int
    target: int
    detuning: float
    zz_khz: float
    flagged: bool
    in_collision_zone: bool


@dataclass
class ChipZZStats:
    """Static ZZ over every coupled pair of a chip at one frequency assignment"""

    edges: List[EdgeZZ]
    median_khz: float
    std_khz: float
    collision_zone_fraction: float
    detuning_bins: List[float] = field(default_factory=list)
    detuning_counts: List[int] = field(default_factory=list)

    def summary(self) -> Dict:
        data = asdict(self)
        data.pop("edges")
        data["edge_count"] = len(self.edges)
        return data


def _ladder(levels: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, levels, dtype=float)), k=1).astype(complex)


def _operators(pair: TransmonPair) -> Dict[str, np.ndarray]:
    a = _ladder(pair.levels)
    eye = np.eye(pair.levels, dtype=complex)
    n = a.conj().T @ a
    return {
        "a_c": np.kron(a, eye),
        "a_t": np.kron(eye, a),
        "n_c": np.kron(n, eye),
        "n_t": np.kron(eye, n),
    }


def gaussian_square(t: float, duration: float, rise_fall: float) -> float:
    """Flat top with truncated Gaussian edges (sigma = rise_fall / 2), continuous at zero"""
    if t < 0 or t > duration:
        return 0.0
    if rise_fall <= 0:
        return 1.0
    sigma = rise_fall / 2.0
    floor = np.exp(-rise_fall ** 2 / (2 * sigma ** 2))
    edge = min(t, duration - t)
    if edge >= rise_fall:
        return 1.0
    return float((np.exp(-(edge - rise_fall) ** 2 / (2 * sigma ** 2)) - floor) / (1.0 - floor))


class GateModel:
    """Duffing two-transmon model: static ZZ, echoed CR calibration, propagation and gate error"""

    @staticmethod
    def build_hamiltonian(pair: TransmonPair) -> np.ndarray:
        """
        Static Hamiltonian in MHz over the product basis |n_c> (x) |n_t>

        Args:
            pair (TransmonPair): Pair parameters

        Returns:
            np.ndarray: Hermitian (levels^2 x levels^2) matrix
        """
        ops = _operators(pair)
        eye = np.eye(pair.dim)
        h = np.zeros((pair.dim, pair.dim), dtype=complex)
        for f, delta, n in ((pair.f_c, pair.delta_c, ops["n_c"]), (pair.f_t, pair.delta_t, ops["n_t"])):
            h += f * n + 0.5 * delta * n @ (n - eye)
        exchange = ops["a_c"].conj().T @ ops["a_t"]
        h += pair.j_coupling * (exchange + exchange.conj().T)
        return h

    @staticmethod
    def dressed_basis(h: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
        """
        Eigenpairs labelled by maximum overlap with bare product states

        Returns:
            Tuple: (energies ordered like the bare basis, eigenvector columns, smallest assigned overlap^2)
        """
        energies, vectors = eigh(h)
        overlap = np.abs(vectors) ** 2
        rows, cols = linear_sum_assignment(-overlap)
        order = np.empty(len(energies), dtype=int)
        order[rows] = cols
        vectors = vectors[:, order]
        energies = energies[order]
        # fix the phase so each dressed state overlaps its bare state positively
        diag = np.diag(vectors)
        vectors = vectors * np.where(np.abs(diag) > 0, np.conj(diag) / np.abs(diag), 1.0)
        min_overlap = float(np.min(overlap[rows, cols]))
        return energies, vectors, min_overlap

    @staticmethod
    def dressed_frequencies(pair: TransmonPair) -> Dict[str, float]:
        energies, _, _ = GateModel.dressed_basis(GateModel.build_hamiltonian(pair))
        e = lambda c, t: energies[pair.index(c, t)]  # noqa: E731
        return {
            "control": float(e(1, 0) - e(0, 0)),
            "target": float(e(0, 1) - e(0, 0)),
            "target_given_control_1": float(e(1, 1) - e(1, 0)),
        }

    @staticmethod
    def static_zz(pair: TransmonPair) -> ZZResult:
        """Exact static ZZ, E11 - E10 - E01 + E00, in kHz; flagged when level labels are ambiguous"""
        energies, vectors, _ = GateModel.dressed_basis(GateModel.build_hamiltonian(pair))
        if pair.j_coupling == 0:
            return ZZResult(0.0, False, 1.0)
        e = lambda c, t: energies[pair.index(c, t)]  # noqa: E731
        zeta = (e(1, 1) - e(1, 0) - e(0, 1) + e(0, 0)) * 1e3
        labels = [pair.index(c, t) for c in range(3) for t in range(3)]
        relevant = float(min(np.abs(vectors[k, k]) ** 2 for k in labels))
        flagged = relevant < OVERLAP_FLAG
        if flagged:
            logger.warning(f"Near-degenerate levels at detuning {pair.detuning:.1f} MHz (overlap {relevant:.3f})")
        return ZZResult(float(zeta), flagged, relevant)

    @staticmethod
    def static_zz_perturbative(pair: TransmonPair) -> float:
        """
        Dispersive-limit ZZ in kHz: 2 J^2 (d_c + d_t) / ((D + d_c)(D - d_t))

        Positive inside the straddling regime |D| < |d|, negative outside it.

        Valid when |D + d_c| and |D - d_t| are both much larger than J (see perturbative_valid).
        """
        detuning = pair.detuning
        denominator = (detuning + pair.delta_c) * (detuning - pair.delta_t)
        if abs(denominator) < 1e-12:
            raise ParameterError(f"Perturbative ZZ has a pole at detuning {detuning} MHz")
        return float(2.0 * pair.j_coupling ** 2 * (pair.delta_c + pair.delta_t) / denominator * 1e3)

    @staticmethod
    def perturbative_valid(pair: TransmonPair, factor: float = 20.0) -> bool:
        d = pair.detuning
        j = max(pair.j_coupling, 1e-12)
        return min(abs(d + pair.delta_c), abs(d - pair.delta_t), abs(d)) > factor * j

    # ---- propagation -------------------------------------------------------------------------

    @staticmethod
    def _frame(pair: TransmonPair, drive_freq: Optional[float]) -> Dict[str, np.ndarray]:
        h0 = GateModel.build_hamiltonian(pair)
        if drive_freq is None:
            drive_freq = GateModel.dressed_frequencies(pair)["target"]
        ops = _operators(pair)
        h_s = h0 - drive_freq * (ops["n_c"] + ops["n_t"])
        energies, vectors = eigh(h_s)
        _, dressed, _ = GateModel.dressed_basis(h0)
        swap = np.eye(pair.dim, dtype=complex)
        for t in range(pair.levels):
            i, j = pair.index(0, t), pair.index(1, t)
            swap[[i, j], :] = swap[[j, i], :]
        return {
            "h_s": h_s * MHZ_NS,
            "energies": energies * MHZ_NS,
            "vectors": vectors,
            "dressed": dressed,
            "x_c": dressed @ swap @ dressed.conj().T,
            "drive_c": 0.5 * (ops["a_c"] + ops["a_c"].conj().T) * MHZ_NS,
            "drive_t": 0.5 * (ops["a_t"] + ops["a_t"].conj().T) * MHZ_NS,
        }

    @staticmethod
    def _edge(psi, frame, amp, rot, duration, rise_fall, start, tol):
        """Adaptive Runge-Kutta over one Gaussian edge, in the interaction frame of the static Hamiltonian"""
        w, e = frame["vectors"], frame["energies"]
        w_dag = w.conj().T
        drive_c = w_dag @ frame["drive_c"] @ w
        drive_t = w_dag @ frame["drive_t"] @ w
        omega = e[:, None] - e[None, :]
        shape = psi.shape

        def rhs(tau, y):
            env = gaussian_square(start + tau, duration, rise_fall)
            h = (amp * drive_c + rot * drive_t) * env * np.exp(1j * omega * tau)
            return (-1j * h @ y.reshape(shape)).ravel()

        sol = solve_ivp(rhs, (0.0, rise_fall), (w_dag @ psi).ravel(), method="DOP853", rtol=tol, atol=tol * 1e-2)
        if not sol.success:
            raise SolverError(f"Runge-Kutta integration failed: {sol.message}")
        phi = sol.y[:, -1].reshape(shape)
        return w @ (np.exp(-1j * e * rise_fall)[:, None] * phi)

    @staticmethod
    def _cr_segment(psi, frame, amp, rot, duration, rise_fall, tol):
        psi = GateModel._edge(psi, frame, amp, rot, duration, rise_fall, 0.0, tol)
        flat = duration - 2 * rise_fall
        if flat > 0:
            h = frame["h_s"] + amp * frame["drive_c"] + rot * frame["drive_t"]
            psi = expm(-1j * h * flat) @ psi
        return GateModel._edge(psi, frame, amp, rot, duration, rise_fall, duration - rise_fall, tol)

    @staticmethod
    def propagate_unitary(
        pair: TransmonPair,
        spec: CRPulseSpec,
        solver_tol: float = DEFAULT_SOLVER_TOL,
        initial: Optional[np.ndarray] = None,
        frame: str = "rotating",
    ) -> np.ndarray:
        """
        Propagate the (echoed) CR sequence

        Args:
            pair (TransmonPair): Pair parameters
            spec (CRPulseSpec): Pulse; amplitudes in MHz, times in ns
            solver_tol (float): Relative tolerance of the adaptive solver
            initial (np.ndarray): Columns to propagate (defaults to the identity: full unitary)
            frame (str): 'rotating' (drive frame) or 'interaction' (frame of the static Hamiltonian)

        Returns:
            np.ndarray: Propagated columns in the bare product basis
        """
        fr = GateModel._frame(pair, spec.drive_freq)
        psi = np.eye(pair.dim, dtype=complex) if initial is None else np.asarray(initial, dtype=complex)
        if spec.echo:
            half = spec.gate_time / 2.0
            psi = GateModel._cr_segment(psi, fr, spec.amplitude, spec.rotary_amplitude, half, spec.rise_fall, solver_tol)
            psi = fr["x_c"] @ psi
            psi = GateModel._cr_segment(psi, fr, -spec.amplitude, -spec.rotary_amplitude, half, spec.rise_fall, solver_tol)
            psi = fr["x_c"] @ psi
        else:
            psi = GateModel._cr_segment(
                psi, fr, spec.amplitude, spec.rotary_amplitude, spec.gate_time, spec.rise_fall, solver_tol
            )
        if frame == "interaction":
            psi = expm(1j * fr["h_s"] * spec.gate_time) @ psi
        elif frame != "rotating":
            raise ParameterError(f"Unknown frame '{frame}'")
        return psi

    @staticmethod
    def unitarity_defect(u: np.ndarray) -> float:
        """Largest deviation of U^dagger U from the identity (column norms and orthogonality)"""
        return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[1]))))

    # ---- scoring -----------------------------------------------------------------------------

    @staticmethod
    def target_unitary(zx_sign: int = 1) -> np.ndarray:
        zx = np.kron(PAULI["Z"], PAULI["X"])
        return expm(-1j * zx_sign * (np.pi / 4.0) * zx)

    @staticmethod
    def computational_block(u: np.ndarray, pair: TransmonPair) -> np.ndarray:
        """4x4 block of U on the dressed computational states"""
        _, dressed, _ = GateModel.dressed_basis(GateModel.build_hamiltonian(pair))
        comp = [pair.index(c, t) for c in (0, 1) for t in (0, 1)]
        if u.shape == (pair.dim, pair.dim):
            return dressed[:, comp].conj().T @ u @ dressed[:, comp]
        if u.shape == (pair.dim, 4):
            return dressed[:, comp].conj().T @ u
        raise ParameterError(f"Operator shape {u.shape} does not match pair dimension {pair.dim}")

    @staticmethod
    def gate_error(u: np.ndarray, pair: Optional[TransmonPair] = None, zx_sign: int = 1) -> float:
        """
        Average-gate-fidelity error against exp(-i pi/4 ZX), optimized over output Z phases

        Args:
            u (np.ndarray): 4x4 computational block, full (D x D) unitary, or (D x 4) columns
            pair (TransmonPair): Needed unless u is already 4x4
            zx_sign (int): Sign of the conditional rotation

        Returns:
            float: E = 1 - (|Tr(U_target^dagger U)|^2 + d) / (d (d + 1)), d = 4
        """
        u = np.asarray(u, dtype=complex)
        if u.shape != (4, 4):
            if pair is None:
                raise ParameterError(f"Operator of shape {u.shape} needs the pair to project")
            u = GateModel.computational_block(u, pair)

        d = 4
        m = np.diag(u @ GateModel.target_unitary(zx_sign).conj().T)
        z_c = np.array([1, 1, -1, -1])
        z_t = np.array([1, -1, 1, -1])

        def overlap(phases):
            return -abs(np.sum(np.exp(0.5j * (phases[0] * z_c + phases[1] * z_t)) * m))

        starts = [(a, b) for a in np.linspace(-np.pi, np.pi, 5) for b in np.linspace(-np.pi, np.pi, 5)]
        best = min(starts, key=overlap)
        result = minimize(overlap, best, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14})
        trace = -min(result.fun, overlap(best))
        error = 1.0 - (trace ** 2 + d) / (d * (d + 1))
        return float(min(max(error, 0.0), 1.0))

    @staticmethod
    def _conditional_angle(pair, spec, tol) -> Tuple[float, float]:
        """Target x-rotation angle conditioned on control; returns (half difference, Bloch mismatch)"""
        _, dressed, _ = GateModel.dressed_basis(GateModel.build_hamiltonian(pair))
        comp = [pair.index(c, t) for c in (0, 1) for t in (0, 1)]
        initial = dressed[:, [pair.index(0, 0), pair.index(1, 0)]]
        out = dressed[:, comp].conj().T @ GateModel.propagate_unitary(pair, spec, tol, initial=initial)
        angles, blochs = [], []
        for col in range(2):
            psi = out[:, col].reshape(2, 2)
            rho_t = psi.T @ psi.conj()
            x = 2 * np.real(rho_t[0, 1])
            y = -2 * np.imag(rho_t[0, 1])
            z = np.real(rho_t[0, 0] - rho_t[1, 1])
            angles.append(np.arctan2(-y, z))
            blochs.append(np.array([x, y, z]))
        theta = 0.5 * (angles[0] - angles[1])
        sign = 1.0 if theta >= 0 else -1.0
        ideal = [np.array([0.0, -sign, 0.0]), np.array([0.0, sign, 0.0])]
        mismatch = float(np.sqrt(sum(np.sum((b - i) ** 2) for b, i in zip(blochs, ideal))))
        return float(theta), mismatch

    @staticmethod
    def drive_scale(pair: TransmonPair) -> float:
        """
        Amplitude-search scale factor in [1, MAX_DRIVE_SCALE]

        The dispersive ZX rate per unit drive falls off as 1 / |D (D + d_c)|, so pairs detuned
        further than the reference need proportionally stronger drive for the same rotation.
        """
        reference = abs(DRIVE_REFERENCE_DETUNING_MHZ * (DRIVE_REFERENCE_DETUNING_MHZ + pair.delta_c))
        d = pair.detuning
        return float(np.clip(abs(d * (d + pair.delta_c)) / reference, 1.0, MAX_DRIVE_SCALE))

    @staticmethod
    def calibrate_cr_echo(
        pair: TransmonPair,
        gate_time: float,
        solver_tol: float = DEFAULT_SOLVER_TOL,
        rise_fall: Optional[float] = None,
        max_amplitude: Optional[float] = None,
    ) -> CRPulseSpec:
        """
        Find the echoed-CR drive amplitude giving a conditional pi/2 target rotation

        Args:
            pair (TransmonPair): Pair parameters
            gate_time (float): Total echoed gate time (ns)
            solver_tol (float): Solver tolerance
            rise_fall (float): Gaussian edge length (defaults to min(40 ns, gate_time / 8))
            max_amplitude (float): Upper end of the amplitude search (MHz); defaults to
                MAX_DRIVE_AMPLITUDE_MHZ times drive_scale(pair)

        Returns:
            CRPulseSpec: Calibrated echoed pulse
        """
        if not 100.0 <= gate_time <= 1000.0:
            raise ParameterError(f"gate_time must lie in [100, 1000] ns, got {gate_time}")
        rise_fall = rise_fall if rise_fall is not None else min(DEFAULT_RISE_FALL_NS, gate_time / 8.0)
        drive_freq = GateModel.dressed_frequencies(pair)["target"]
        base = CRPulseSpec(gate_time=gate_time, rise_fall=rise_fall, echo=True, drive_freq=drive_freq)

        def residual(amp: float) -> float:
            theta, _ = GateModel._conditional_angle(pair, replace(base, amplitude=amp), solver_tol)
            return abs(theta) - np.pi / 2.0

        scale = GateModel.drive_scale(pair)
        if max_amplitude is None:
            max_amplitude = MAX_DRIVE_AMPLITUDE_MHZ * scale
        ladder = [a * scale for a in AMPLITUDE_LADDER if a * scale < max_amplitude] + [max_amplitude]

        previous = 0.0
        bracket = None
        for amp in ladder:
            if residual(amp) >= 0:
                bracket = (previous, amp)
                break
            previous = amp
        if bracket is None:
            raise CalibrationError(
                f"No drive amplitude up to {max_amplitude} MHz reaches a pi/2 conditional rotation "
                f"(detuning {pair.detuning:.1f} MHz, J={pair.j_coupling} MHz)"
            )

        amplitude = brentq(residual, bracket[0], bracket[1], xtol=1e-4)
        theta, mismatch = GateModel._conditional_angle(pair, replace(base, amplitude=amplitude), solver_tol)
        logger.debug(f"Calibrated CR at detuning {pair.detuning:.1f} MHz: amp={amplitude:.4f} MHz, mismatch={mismatch:.2e}")
        return replace(base, amplitude=float(amplitude), zx_sign=1 if theta >= 0 else -1)

    @staticmethod
    def score(pair: TransmonPair, spec: CRPulseSpec, solver_tol: float = DEFAULT_SOLVER_TOL) -> float:
        """Gate error of a pulse, propagating only the computational columns"""
        _, dressed, _ = GateModel.dressed_basis(GateModel.build_hamiltonian(pair))
        comp = [pair.index(c, t) for c in (0, 1) for t in (0, 1)]
        columns = GateModel.propagate_unitary(pair, spec, solver_tol, initial=dressed[:, comp])
        return GateModel.gate_error(columns, pair, spec.zx_sign)

    @staticmethod
    def optimize_rotary(
        pair: TransmonPair, spec: CRPulseSpec, solver_tol: float = DEFAULT_SOLVER_TOL, max_rotary: Optional[float] = None
    ) -> CRPulseSpec:
        """1-D bounded minimization of gate error over the rotary amplitude; never worse than zero rotary"""
        max_rotary = max_rotary if max_rotary is not None else max(2.0 * spec.amplitude, 10.0)
        zero = replace(spec, rotary_amplitude=0.0)
        baseline = GateModel.score(pair, zero, solver_tol)

        result = minimize_scalar(
            lambda r: GateModel.score(pair, replace(spec, rotary_amplitude=float(r)), solver_tol),
            bounds=(0.0, max_rotary),
            method="bounded",
            options={"xatol": 1e-3},
        )
        if result.success and result.fun < baseline:
            return replace(spec, rotary_amplitude=float(result.x), warning=None)
        warning = None if result.success else f"rotary optimizer did not converge: {result.message}"
        if warning:
            logger.warning(warning)
        return replace(zero, warning=warning)

    @staticmethod
    def simulate_gate(
        pair: TransmonPair,
        gate_time: float,
        solver_tol: float = DEFAULT_SOLVER_TOL,
        rotary: bool = True,
    ) -> GateErrorResult:
        """Calibrate, optionally optimize the rotary tone, propagate the full unitary and score it"""
        zz = GateModel.static_zz(pair)
        spec = GateModel.calibrate_cr_echo(pair, gate_time, solver_tol)
        if rotary:
            spec = GateModel.optimize_rotary(pair, spec, solver_tol)
        u = GateModel.propagate_unitary(pair, spec, solver_tol)
        return GateErrorResult(
            error=GateModel.gate_error(u, pair, spec.zx_sign),
            zz=zz.zz_khz,
            unitarity_defect=GateModel.unitarity_defect(u),
            calibrated_amplitude=spec.amplitude,
            rotary_amplitude=spec.rotary_amplitude,
            status="flagged" if zz.flagged else "ok",
        )

    @staticmethod
    def error_vs_detuning_sweep(
        base: TransmonPair,
        detuning_grid: Sequence[float],
        gate_time: float,
        seed: int = 0,
        solver_tol: float = DEFAULT_SOLVER_TOL,
        rotary: bool = True,
    ) -> List[SweepPoint]:
        """
        Gate error across control-target detunings; per-point failures are recorded, not raised

        Args:
            base (TransmonPair): Pair whose target frequency is held fixed
            detuning_grid (Sequence[float]): f_c - f_t values (MHz)
            gate_time (float): Echoed gate time (ns)
            seed (int): Recorded for the run; the search itself is deterministic
            solver_tol (float): Solver tolerance
            rotary (bool): Optimize the rotary amplitude at each point

        Returns:
            List[SweepPoint]: One row per detuning
        """
        logger.info(f"Gate-error sweep: {len(detuning_grid)} detunings, {gate_time} ns, seed {seed}")
        points = []
        for detuning in detuning_grid:
            pair = base.with_detuning(float(detuning))
            zz = GateModel.static_zz(pair)
            try:
                spec = GateModel.calibrate_cr_echo(pair, gate_time, solver_tol)
                if rotary:
                    spec = GateModel.optimize_rotary(pair, spec, solver_tol)
                error = GateModel.score(pair, spec, solver_tol)
                status = "flagged" if zz.flagged else ("rotary_warning" if spec.warning else "ok")
                points.append(SweepPoint(float(detuning), error, zz.zz_khz, status, spec.amplitude, spec.rotary_amplitude))
            except CalibrationError as e:
                logger.info(f"Detuning {detuning} MHz: {e}")
                points.append(SweepPoint(float(detuning), float("nan"), zz.zz_khz, "calibration_failed"))
            except SolverError as e:
                logger.error(f"Detuning {detuning} MHz: {e}")
                points.append(SweepPoint(float(detuning), float("nan"), zz.zz_khz, "solver_failed"))
            logger.debug(f"Detuning {detuning} MHz -> {points[-1]}")
        return points

    @staticmethod
    def usable_windows(points: Sequence[SweepPoint], thresholds: Sequence[float] = (1e-2, 5e-3, 1e-3)) -> Dict[float, Dict[str, float]]:
        """Widest contiguous and total detuning span (MHz) with error below each threshold"""
        points = sorted(points, key=lambda p: p.detuning)
        step = np.median(np.diff([p.detuning for p in points])) if len(points) > 1 else 0.0
        windows = {}
        for threshold in thresholds:
            ok = [bool(np.isfinite(p.error) and p.error < threshold) for p in points]
            widest, run = 0, 0
            for flag in ok:
                run = run + 1 if flag else 0
                widest = max(widest, run)
            windows[threshold] = {"contiguous_mhz": float(widest * step), "total_mhz": float(sum(ok) * step)}
        return windows

    # ---- chip level --------------------------------------------------------------------------

    @staticmethod
    def detuning_histogram(
        chip: ChipState, freqs: Dict[int, float], bin_width: float = 50.0, limit: float = 400.0
    ) -> Tuple[List[float], List[int]]:
        """Histogram of signed edge detunings f_control - f_target; out-of-range edges land in the end bins"""
        edges = np.arange(-limit, limit + bin_width, bin_width)
        detunings = [freqs[c] - freqs[t] for c, t in chip.edges]
        counts, _ = np.histogram(np.clip(detunings, -limit, limit), bins=edges)
        return [float(e) for e in edges], [int(n) for n in counts]

    @staticmethod
    def chip_zz_stats(
        chip: ChipState,
        freqs: Dict[int, float],
        j_coupling: float = DEFAULT_J_MHZ,
        levels: int = DEFAULT_LEVELS,
        bounds: Optional[CollisionBounds] = None,
    ) -> ChipZZStats:
        """
        Exact static ZZ on every edge, with the share of edges inside collision zones

        Args:
            chip (ChipState): Lattice with per-qubit anharmonicities
            freqs (Dict[int, float]): Frequency per qubit id (MHz)
            j_coupling (float): Exchange coupling used for every edge (MHz)
            levels (int): Truncation per transmon
            bounds (CollisionBounds): Zone widths; defaults to the doubled type 1-3 bounds

        Returns:
            ChipZZStats: Per-edge rows, median and spread of |ZZ| and the detuning histogram
        """
        bounds = bounds or replace(CollisionBounds(), enabled=(1, 2, 3)).scaled(2.0)
        rows = []
        for control, target in chip.edges:
            for qubit_id in (control, target):
                if freqs.get(qubit_id) is None:
                    raise ParameterError(f"Missing frequency for qubit {qubit_id}")
            qc, qt = chip.qubit(control), chip.qubit(target)
            pair = TransmonPair(freqs[control], freqs[target], qc.anharmonicity, qt.anharmonicity, j_coupling, levels)
            zz = GateModel.static_zz(pair)
            zone = bool(CollisionDetector.pair_collisions(pair.f_c, pair.f_t, pair.delta_c, pair.delta_t, bounds))
            rows.append(EdgeZZ(control, target, pair.detuning, zz.zz_khz, zz.flagged, zone))

        magnitudes = np.abs([r.zz_khz for r in rows])
        bins, counts = GateModel.detuning_histogram(chip, freqs)
        stats = ChipZZStats(
            edges=rows,
            median_khz=float(np.median(magnitudes)) if rows else float("nan"),
            std_khz=float(np.std(magnitudes)) if rows else float("nan"),
            collision_zone_fraction=float(np.mean([r.in_collision_zone for r in rows])) if rows else 0.0,
            detuning_bins=bins,
            detuning_counts=counts,
        )
        logger.info(
            f"ZZ over {len(rows)} edges of {chip.name}: median {stats.median_khz:.1f} kHz, "
            f"{stats.collision_zone_fraction:.0%} in collision zones"
        )
        return stats
