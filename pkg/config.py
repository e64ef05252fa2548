import os

# Runtime
DEBUG = os.environ.get("LASIQ_DEBUG", "False").lower() == "true"
DEFAULT_SEED = int(os.environ.get("LASIQ_SEED", 7))
DEFAULT_THREADS = int(os.environ.get("LASIQ_THREADS", 1))
DEFAULT_TRIALS = int(os.environ.get("LASIQ_TRIALS", 10000))
VERSION = "1.0.0"

# Qubit records (MHz / Ohm)
F01_MIN_MHZ = float(os.environ.get("LASIQ_F01_MIN_MHZ", 3000.0))
F01_MAX_MHZ = float(os.environ.get("LASIQ_F01_MAX_MHZ", 7000.0))
DEFAULT_ANHARMONICITY_MHZ = -330.0

# Nearest-neighbor collision bounds (Delta_c); planning doubles them
COLLISION_BOUNDS = {
    "d1_mhz": 17.0,
    "d2_mhz": 4.0,
    "d3_mhz": 30.0,
    "d4_max_detuning_mhz": 330.0,
    "multiplier": 1.0,
}
PLAN_BOUNDS_MULTIPLIER = 2.0

# Tuning plan constraints
F_PURCELL_MAX_MHZ = 5200.0
MAX_DR_REL = 0.14
SPACING_WINDOW_MHZ = (50.0, 250.0)
PREFERRED_DR_BAND = (0.01, 0.10)
LEVEL_SPACING_MHZ = 100.0

# Anneal loop
ANNEAL_CONFIG = {
    "band_rel": 0.003,
    "step_fraction": 0.5,
    "step_sigma_rel": 0.25,
    "saturation_mean_rel": 0.14,
    "saturation_sigma_rel": 0.02,
    "max_exposures": 100,
    "min_step_rel": 0.0055,
    "first_step_fraction": 0.35,
    "first_step_min_rel": 0.006,
    "first_step_noise_gain": 1.6,
}
PLANNED_DR_MEAN = 0.072
PLANNED_DR_SIGMA = 0.035

# Two-transmon gate model
DEFAULT_LEVELS = 4
DEFAULT_J_MHZ = 1.75
DEFAULT_GATE_TIME_NS = 400.0
DEFAULT_RISE_FALL_NS = 40.0
DEFAULT_SOLVER_TOL = 1e-8
MAX_DRIVE_AMPLITUDE_MHZ = 150.0
# Amplitude search grows with |D (D + d_c)| relative to a pair detuned by this much, up to MAX_DRIVE_SCALE times
DRIVE_REFERENCE_DETUNING_MHZ = 100.0
MAX_DRIVE_SCALE = 8.0

# Pipeline exit codes
EXIT_CODES = {
    "ok": 0,
    "parameter_error": 2,
    "missing_input": 3,
    "unknown_stage": 4,
    "computation_error": 5,
}

# Reference power law for synthetic chips: f01 = a * r_n**p (MHz, Ohm)
REFERENCE_MODEL = {"a": 510000.0, "p": -0.5, "sigma_f_mhz": 5.0}
DEFAULT_R_SPREAD_REL = 0.04
