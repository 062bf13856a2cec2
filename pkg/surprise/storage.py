import hashlib
import json
import logging
import os
from dataclasses import asdict, fields, is_dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError
from .models import RunConfig, RunManifest

logger = logging.getLogger(__name__)

APP_DIR_NAME = "surprise_sampler"
CACHE_FILE_NAME = "targets.json"
MANIFEST_FILE_NAME = "manifest.json"
ENV_CACHE_DIR = "SURPRISE_SAMPLER_CACHE_DIR"


def _cache_dir() -> Path:
    override = os.environ.get(ENV_CACHE_DIR)
    if override:
        return Path(override).expanduser()
    base = os.environ.get("XDG_CACHE_HOME")
    if base:
        return Path(base) / APP_DIR_NAME
    return Path.home() / ".cache" / APP_DIR_NAME


def _cache_path() -> Path:
    return _cache_dir() / CACHE_FILE_NAME


def load_run_config(default: RunConfig, path: str | Path) -> RunConfig:
    """Merge a JSON run configuration onto ``default``.

    Keys may use the command-line spelling (``pilot-size``) or the field
    name (``pilot_size``); unknown keys are logged and skipped.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"Cannot read config file {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Config file {path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must hold a JSON object.")
    known = {f.name for f in fields(RunConfig)}
    merged: dict[str, Any] = {}
    for key, value in data.items():
        name = str(key).replace("-", "_")
        if name not in known:
            logger.warning("Ignoring unknown config key %r in %s", key, path)
            continue
        merged[name] = value
    return replace(default, **merged)


def load_cached_target(section: str) -> dict[str, Any] | None:
    path = _cache_path()
    if not path.exists():
        return None
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except Exception:
        logger.warning("Ignoring unreadable target cache %s", path)
        return None
    payload = _select_section(data, section)
    return payload or None


def save_cached_target(section: str, payload: dict[str, Any]) -> Path:
    """Store one oracle result under ``section``, keeping the other sections."""
    path = _cache_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    existing: dict[str, Any] = {}
    if path.exists():
        try:
            existing_data = json.loads(path.read_text(encoding="utf-8"))
            if isinstance(existing_data, dict):
                existing = existing_data
        except Exception:
            existing = {}
    existing[section] = to_jsonable(payload)
    path.write_text(json.dumps(existing, indent=2, sort_keys=True), encoding="utf-8")
    return path


def _select_section(data: Any, section: str) -> dict[str, Any]:
    if isinstance(data, dict) and isinstance(data.get(section), dict):
        return data[section]
    return {}


def fingerprint(payload: dict[str, Any]) -> str:
    text = json.dumps(to_jsonable(payload), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:20]


def file_digest(path: str | Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def write_manifest(out_dir: str | Path, manifest: RunManifest, outputs: list[Path]) -> Path:
    """Write ``manifest.json`` with a SHA-256 digest of every emitted file."""
    out_dir = Path(out_dir)
    manifest.outputs = {p.name: file_digest(p) for p in outputs}
    path = out_dir / MANIFEST_FILE_NAME
    path.write_text(json.dumps(to_jsonable(manifest), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def to_jsonable(value: Any) -> Any:
    if is_dataclass(value) and not isinstance(value, type):
        return to_jsonable(asdict(value))
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    return value
