# ruff: noqa: S101
import json
from pathlib import Path

import numpy as np
import pytest

from surprise.config import DEFAULT_RUN
from surprise.errors import ConfigError
from surprise.models import Family, ObjectiveKind, RunManifest
from surprise.storage import (
    _cache_path,
    file_digest,
    fingerprint,
    load_cached_target,
    load_run_config,
    save_cached_target,
    to_jsonable,
    write_manifest,
)


def test_load_returns_none_when_cache_missing(tmp_cache_dir):
    assert load_cached_target("abc") is None


def test_save_and_load_roundtrip(tmp_cache_dir):
    save_cached_target("first", {"theta": np.array([0.5, -1.25]), "size": 10})
    save_cached_target("second", {"theta": [1.0], "size": 3})
    loaded = load_cached_target("first")
    assert loaded["theta"] == [0.5, -1.25]
    assert loaded["size"] == 10
    assert load_cached_target("second")["size"] == 3  # other sections preserved


def test_load_handles_broken_json(tmp_cache_dir):
    path = _cache_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("{broken", encoding="utf-8")
    assert load_cached_target("first") is None
    save_cached_target("first", {"size": 1})
    assert load_cached_target("first") == {"size": 1}


def test_fingerprint_is_stable_and_sensitive():
    a = fingerprint({"family": Family.LOGISTIC, "slopes": (1.0, 0.5)})
    assert a == fingerprint({"slopes": [1.0, 0.5], "family": "logistic"})
    assert a != fingerprint({"family": Family.LOGISTIC, "slopes": (1.0, 0.25)})
    assert len(a) == 20


def test_load_run_config_merges_onto_defaults(tmp_path, caplog):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"rate": 0.2, "pilot-size": 300, "objective": "mse", "colour": "red"}), encoding="utf-8")
    cfg = load_run_config(DEFAULT_RUN, path)
    assert cfg.rate == 0.2
    assert cfg.pilot_size == 300
    assert cfg.objective == ObjectiveKind.MSE
    assert cfg.level == DEFAULT_RUN.level
    assert "colour" in caplog.text
    assert DEFAULT_RUN.rate == 0.1


@pytest.mark.parametrize("text", ["{broken", "[1, 2]"])
def test_load_run_config_rejects_bad_files(tmp_path, text):
    path = tmp_path / "run.json"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(ConfigError, match="run.json"):
        load_run_config(DEFAULT_RUN, path)


def test_load_run_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="Cannot read"):
        load_run_config(DEFAULT_RUN, tmp_path / "absent.json")


def test_write_manifest_digests_outputs(tmp_path):
    out = tmp_path / "a.csv"
    out.write_text("x\n1\n", encoding="utf-8")
    manifest = RunManifest(config={"seed": 1}, version="0.1.0", seed=1, started="s", finished="f", wall_seconds=0.5)
    path = write_manifest(tmp_path, manifest, [out])
    stored = json.loads(path.read_text(encoding="utf-8"))
    assert stored["outputs"] == {"a.csv": file_digest(out)}
    assert stored["seed"] == 1
    assert path.name == "manifest.json"


def test_to_jsonable_handles_numpy_enums_and_paths():
    value = {"a": np.float64(1.5), "b": np.arange(2), "c": Family.POISSON, "d": Path("x/y"), "e": (1, 2)}
    assert to_jsonable(value) == {"a": 1.5, "b": [0, 1], "c": "poisson", "d": "x/y", "e": [1, 2]}
