import json
import logging
import os
from dataclasses import asdict, dataclass, field
from functools import wraps
from typing import Dict, List, Optional

import click

from config import EXIT_CODES, VERSION
from services.errors import LasiqError
from utils.helpers import file_digest

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def tool_versions() -> Dict[str, str]:
    import networkx
    import numpy
    import pandas
    import scipy

    return {
        "lasiq": VERSION,
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "networkx": networkx.__version__,
        "pandas": pandas.__version__,
    }


@dataclass
class RunManifest:
    """Provenance record written next to every set of results"""

    command: str
    seed: int
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)
    versions: Dict[str, str] = field(default_factory=tool_versions)
    status: str = "ok"
    error: Optional[str] = None
    stages: List[Dict] = field(default_factory=list)

    def add_input(self, path: str):
        if path and os.path.exists(path) and path not in self.inputs:
            self.inputs[path] = file_digest(path)

    def add_outputs(self, paths: List[str]):
        for path in paths:
            if path not in self.outputs:
                self.outputs.append(path)

    def write(self, out_dir: str) -> str:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, MANIFEST_NAME)
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(asdict(self), handle, indent=2, sort_keys=True)
            handle.write("\n")
        logger.info(f"Manifest written to {path}")
        return path


def exit_code_for(error: BaseException) -> int:
    if isinstance(error, LasiqError):
        return error.exit_code
    if isinstance(error, FileNotFoundError):
        return EXIT_CODES["missing_input"]
    if isinstance(error, (ValueError, KeyError)):
        return EXIT_CODES["parameter_error"]
    return EXIT_CODES["computation_error"]


def require_inputs(*option_names):
    """
    Decorator to fail fast, with the missing-input exit code, when an input file option does not exist

    Args:
        option_names: Names of path-valued keyword arguments
    """
    def decorator(f):
        @wraps(f)
        def decorated_function(*args, **kwargs):
            missing = [kwargs[name] for name in option_names if kwargs.get(name) and not os.path.exists(kwargs[name])]
            if missing:
                logger.error(f"Missing input files: {', '.join(missing)}")
                click.echo(f"Error: input file not found: {', '.join(missing)}", err=True)
                raise SystemExit(EXIT_CODES["missing_input"])
            return f(*args, **kwargs)

        return decorated_function
    return decorator


def run_options(f):
    """
    Decorator adding per-subcommand --seed and --out, overriding the group-level values

    An --out with a file suffix (chip.json, sweep.csv) names the main artifact; the manifest
    and any secondary artifacts go to its directory.
    """
    @wraps(f)
    def decorated_function(obj, *args, seed=None, out=None, **kwargs):
        obj = dict(obj)
        if seed is not None:
            obj["seed"] = seed
        if out:
            if os.path.splitext(out)[1]:
                obj["out"] = os.path.dirname(out) or "."
                obj["primary"] = os.path.basename(out)
            else:
                obj["out"] = out
        return f(obj, *args, **kwargs)

    decorated_function = click.option("--out", default=None, help="Output directory, or main artifact file")(decorated_function)
    decorated_function = click.option("--seed", type=int, default=None, help="Seed for this command")(decorated_function)
    return decorated_function


def record_manifest(command: str, inputs=()):
    """
    Decorator that writes a RunManifest for a subcommand, including a partial one on failure

    The wrapped function receives the click context object first and returns the list of files it wrote.
    Domain errors become distinct exit codes.

    Args:
        command (str): Subcommand name recorded in the manifest
        inputs: Names of path-valued keyword arguments whose digests are recorded
    """
    def decorator(f):
        @wraps(f)
        def decorated_function(obj, *args, **kwargs):
            manifest = RunManifest(command=command, seed=obj["seed"])
            for name in inputs:
                manifest.add_input(kwargs.get(name))
            try:
                manifest.add_outputs(f(obj, *args, **kwargs) or [])
            except Exception as e:
                code = exit_code_for(e)
                logger.error(f"{command} failed: {e}")
                manifest.status = "failed"
                manifest.error = str(e)
                manifest.write(obj["out"])
                click.echo(f"Error: {e}", err=True)
                raise SystemExit(code)
            manifest.write(obj["out"])
            for path in manifest.outputs:
                click.echo(path)
            return manifest

        return decorated_function
    return decorator
