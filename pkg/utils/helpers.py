import hashlib
import logging
from typing import Any, Dict, List, Sequence

import numpy as np

logger = logging.getLogger(__name__)


def derive_seed(seed: int, *keys: Any) -> np.random.SeedSequence:
    """
    Derive an independent, schedule-free RNG stream from a top-level seed

    Args:
        seed (int): Top-level seed
        *keys: Named derivation path (stage name, index, qubit id ...)

    Returns:
        np.random.SeedSequence: Child seed sequence; identical keys give identical streams
    """
    entropy = [int(seed) & 0xFFFFFFFF]
    for key in keys:
        if isinstance(key, (int, np.integer)):
            entropy.append(int(key) & 0xFFFFFFFF)
        else:
            digest = hashlib.sha256(str(key).encode("utf-8")).digest()
            entropy.append(int.from_bytes(digest[:4], "little"))
    return np.random.SeedSequence(entropy)


def make_rng(seed: int, *keys: Any) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *keys))


def file_digest(path: str) -> str:
    """sha256 of a file's bytes"""
    sha = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(65536), b""):
            sha.update(block)
    return sha.hexdigest()


def parse_grid(spec: str) -> List[float]:
    """
    Parse a 'start:stop:step' grid (inclusive stop) or a comma-separated list

    Args:
        spec (str): e.g. '0:40:2' or '0,5,10'

    Returns:
        List[float]: Grid values in ascending order
    """
    if not spec:
        raise ValueError("Empty grid specification")

    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"Invalid grid '{spec}'. Expected start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ValueError(f"Invalid grid '{spec}': step must be positive and stop >= start")
        count = int(round((stop - start) / step)) + 1
        return [round(start + i * step, 9) for i in range(count)]

    return [float(p) for p in spec.split(",") if p.strip()]


def is_ascending(values: Sequence[float]) -> bool:
    return all(b > a for a, b in zip(values, values[1:]))


def log_command_info(command: str, inputs: Dict[str, Any] = None):
    """
    Log command invocation for reproducibility

    Args:
        command (str): Subcommand name
        inputs (Dict[str, Any]): Inputs and options
    """
    log_data = {"command": command}
    if inputs:
        log_data.update(inputs)

    logger.info(f"Running command: {log_data}")
