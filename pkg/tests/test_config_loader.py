from __future__ import annotations

from typing import TYPE_CHECKING

import pytest

from src.core.exceptions import ConfigError
from src.data.config_loader import load_experiment_config, normalize_keys

if TYPE_CHECKING:
    from pathlib import Path


def _write(tmp_path: Path, name: str, content: str) -> Path:
    path = tmp_path / name
    path.write_text(content, encoding="utf-8")
    return path


class TestNormalizeKeys:
    def test_aliases(self) -> None:
        normalized = normalize_keys({"M": 100, "ε": 0.1, "N": 3, "a": 2.0, "σ": 0.4})
        assert normalized == {
            "reps": 100,
            "eps": 0.1,
            "levels": 3,
            "threshold": 2.0,
            "sigma": 0.4,
        }

    def test_scalar_grid_promoted(self) -> None:
        normalized = normalize_keys({"n": 50, "lambda": 0.5})
        assert normalized == {"n_grid": [50], "lambda_grid": [0.5]}

    def test_unknown_key(self) -> None:
        with pytest.raises(ConfigError):
            normalize_keys({"colour": "blue"})

    def test_duplicate_field(self) -> None:
        with pytest.raises(ConfigError):
            normalize_keys({"M": 100, "reps": 200})

    def test_nested_table_rejected(self) -> None:
        with pytest.raises(ConfigError):
            normalize_keys({"n": {"start": 10}})


class TestLoadExperimentConfig:
    def test_toml(self, tmp_path: Path) -> None:
        path = _write(
            tmp_path,
            "ldp.toml",
            'kind = "ldp-slope"\nn = [20, 40, 80]\nk = 2\np = 0.3\neps = 0.2\nM = 5000\n',
        )
        config = load_experiment_config(path)
        assert config.kind == "ldp-slope"
        assert config.n_grid == [20, 40, 80]
        assert config.k == 2
        assert config.reps == 5000

    def test_json(self, tmp_path: Path) -> None:
        path = _write(tmp_path, "clt.json", '{"kind": "clt", "n": 100, "p": 0.1}')
        config = load_experiment_config(path)
        assert config.n_grid == [100]

    def test_overrides_take_precedence(self, tmp_path: Path) -> None:
        path = _write(tmp_path, "clt.toml", 'kind = "clt"\np = 0.1\nreps = 10\n')
        config = load_experiment_config(path, {"reps": 99, "seed": None, "kind": "clt"})
        assert config.reps == 99
        assert config.p == 0.1

    def test_none_override_keeps_file_value(self, tmp_path: Path) -> None:
        path = _write(tmp_path, "clt.toml", 'kind = "clt"\np = 0.1\nseed = 5\n')
        assert load_experiment_config(path, {"seed": None}).seed == 5

    def test_overrides_only(self) -> None:
        config = load_experiment_config(None, {"kind": "compare", "p": 0.2})
        assert config.kind == "compare"

    def test_bad_suffix(self, tmp_path: Path) -> None:
        path = _write(tmp_path, "clt.yaml", "kind: clt\n")
        with pytest.raises(ConfigError):
            load_experiment_config(path)

    def test_syntax_error(self, tmp_path: Path) -> None:
        path = _write(tmp_path, "broken.toml", "kind = \n")
        with pytest.raises(ConfigError):
            load_experiment_config(path)

    def test_missing_file(self, tmp_path: Path) -> None:
        with pytest.raises(ConfigError):
            load_experiment_config(tmp_path / "absent.toml")

    def test_top_level_must_be_table(self, tmp_path: Path) -> None:
        path = _write(tmp_path, "list.json", "[1, 2]")
        with pytest.raises(ConfigError):
            load_experiment_config(path)

    def test_validation_wrapped(self) -> None:
        with pytest.raises(ConfigError, match="p = 1"):
            load_experiment_config(None, {"kind": "clt", "p": 1.0})
