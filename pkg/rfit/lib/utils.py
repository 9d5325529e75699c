"""Shared helpers for the command modules and the library."""

import contextlib
import json
import logging
import math
import os
import shutil
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional

import numpy as np

from .errors import ConfigError

__all__ = [
    "DEFAULT_SEED",
    "PRESETS_DIR",
    "configure_logging",
    "resolve_threads",
    "seed_sequence",
    "parse_list",
    "load_json",
    "load_preset",
    "merge_config",
    "write_json",
    "atomic_output_dir",
    "atomic_output_file",
    "layered_config",
]

DEFAULT_SEED = 20190101

# presets/ sits next to the package, as in a source checkout
PRESETS_DIR = Path(__file__).resolve().parents[2] / "presets"

_LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


def configure_logging(verbosity: int = 0) -> None:
    """Map -v counts onto log levels: 0 WARNING, 1 INFO, 2+ DEBUG."""
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format=_LOG_FORMAT)
    logging.getLogger("rfit").setLevel(level)


def resolve_threads(threads: Optional[int] = None) -> int:
    """Worker count for joblib: explicit flag, then RFIT_THREADS, then all cores (-1)."""
    if threads is None:
        env = os.environ.get("RFIT_THREADS", "").strip()
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise ConfigError(f"RFIT_THREADS must be an integer, got {env!r}")
    if threads is None or threads == 0:
        return -1
    if threads < -1:
        raise ConfigError(f"threads must be positive (or -1 for all cores), got {threads}")
    return threads


def seed_sequence(seed: int, *key: int) -> np.random.SeedSequence:
    """Deterministic stream for (seed, key...); independent of execution order."""
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))


def parse_list(raw, cast=str) -> List[Any]:
    """Parse "a,b,c" (or an already-split list from a config file) into a typed list."""
    if raw is None:
        return []
    if isinstance(raw, (list, tuple)):
        items = list(raw)
    else:
        items = [chunk.strip() for chunk in str(raw).split(",")]
    out = []
    for item in items:
        if isinstance(item, str) and not item:
            continue
        try:
            out.append(cast(item))
        except (TypeError, ValueError):
            raise ConfigError(f"Could not parse {item!r} in list {raw!r}")
    return out


def load_json(path) -> Dict[str, Any]:
    path = Path(path).expanduser()
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    try:
        with path.open("r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON in {path}: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must hold a JSON object")
    return data


def load_preset(name: str) -> Dict[str, Any]:
    """Load presets/<name>.json."""
    path = PRESETS_DIR / f"{name}.json"
    if not path.exists():
        available = sorted(p.stem for p in PRESETS_DIR.glob("*.json")) if PRESETS_DIR.exists() else []
        raise ConfigError(f"Unknown preset {name!r}; available: {', '.join(available) or 'none'}")
    return load_json(path)


def merge_config(*layers: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    """Later layers win; None values in a layer mean "not given" and never override."""
    merged: Dict[str, Any] = {}
    for layer in layers:
        if not layer:
            continue
        for key, value in layer.items():
            if value is not None:
                merged[key] = value
    return merged


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        # JSON has no inf/nan
        return value if math.isfinite(value) else None
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(path, payload) -> None:
    """Write JSON with stable key order so reruns are byte-identical."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as f:
        json.dump(_jsonable(payload), f, indent=2, sort_keys=True)
        f.write("\n")


@contextlib.contextmanager
def atomic_output_dir(path) -> Iterator[Path]:
    """Yield a staging directory that replaces ``path`` only if the block succeeds.

    Nothing is left behind on failure: the staging directory is removed and any
    previous content of ``path`` stays untouched.
    """
    final = Path(path).expanduser().resolve()
    staging = final.with_name(final.name + ".partial")
    if staging.exists():
        shutil.rmtree(staging)
    staging.mkdir(parents=True)
    try:
        yield staging
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    if final.exists():
        if final.is_dir():
            for child in staging.iterdir():
                target = final / child.name
                if target.is_dir():
                    shutil.rmtree(target)
                elif target.exists():
                    target.unlink()
                child.replace(target)
            staging.rmdir()
            return
        final.unlink()
    staging.replace(final)


@contextlib.contextmanager
def atomic_output_file(path) -> Iterator[Path]:
    """Yield a temporary sibling of ``path`` that is moved into place only if the block succeeds."""
    final = Path(path).expanduser().resolve()
    final.parent.mkdir(parents=True, exist_ok=True)
    staging = final.with_name(final.name + ".partial")
    try:
        yield staging
    except BaseException:
        if staging.exists():
            staging.unlink()
        raise
    staging.replace(final)


def layered_config(args, keys, *extra: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    """--preset < --config < ``extra`` layers < explicit flags, restricted to ``keys``.

    Flags left at None count as not given. A "description" entry in a preset
    or config file is ignored; any other unknown key is an error.
    """
    preset = load_preset(args.preset) if getattr(args, "preset", None) else None
    config = load_json(args.config) if getattr(args, "config", None) else None
    flags = {k: getattr(args, k, None) for k in keys}
    merged = merge_config(preset, config, *extra, flags)
    merged.pop("description", None)
    unknown = sorted(set(merged) - set(keys))
    if unknown:
        raise ConfigError(f"Unknown config key(s): {', '.join(unknown)}")
    return merged
