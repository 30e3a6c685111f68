"""Config parsing, validation, and round-trip stability."""

import json

import pytest

from taskdenoise.config import load_config, parse_config, save_config, serialize_config
from taskdenoise.errors import ConfigError

MINIMAL = """
{
  "seed": 42,
  "output_dir": "runs/demo",
  "dataset": {"task": "segmentation", "height": 64, "width": 64, "num_classes": 4,
              "train_count": 20, "test_count": 5},
  "application": {"kind": "nonewnet2d", "base_channels": 8},
  "denoiser": {"kind": "redcnn", "base_channels": 8},
  "train_noise": {"kind": "gaussian", "sigma": 70.0},
  "test_noises": [{"kind": "gaussian", "sigma": 70.0}, {"kind": "gaussian", "sigma": 50.0}]
}
"""


class TestParsing:
    def test_minimal_config_parses(self):
        cfg = parse_config(MINIMAL)
        assert cfg.seed == 42
        assert cfg.dataset.num_classes == 4
        assert cfg.application.num_classes == 4  # inherited from the dataset
        assert cfg.application.height == 64
        assert cfg.schemes == ["tc", "td", "hv", "nnv"]
        assert cfg.train.epochs_application == 30

    def test_derived_seeds_are_deterministic_and_distinct(self):
        a = parse_config(MINIMAL)
        b = parse_config(MINIMAL)
        assert a.dataset.seed == b.dataset.seed
        seeds = {a.dataset.seed, a.application.seed, a.denoiser.seed, a.train_noise.seed}
        assert len(seeds) == 4

    def test_explicit_seed_respected(self):
        raw = json.loads(MINIMAL)
        raw["dataset"]["seed"] = 777
        cfg = parse_config(json.dumps(raw))
        assert cfg.dataset.seed == 777

    def test_seed_change_changes_derived_seeds(self):
        raw = json.loads(MINIMAL)
        raw["seed"] = 43
        assert parse_config(json.dumps(raw)).dataset.seed != parse_config(MINIMAL).dataset.seed

    def test_not_json_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("not json at all {")

    def test_unknown_key_rejected(self):
        raw = json.loads(MINIMAL)
        raw["dataset"]["sizee"] = 3
        with pytest.raises(ConfigError, match="sizee"):
            parse_config(json.dumps(raw))

    def test_missing_required_key_rejected(self):
        raw = json.loads(MINIMAL)
        del raw["output_dir"]
        with pytest.raises(ConfigError, match="output_dir"):
            parse_config(json.dumps(raw))

    def test_task_application_mismatch_rejected(self):
        raw = json.loads(MINIMAL)
        raw["application"]["kind"] = "ccnn"
        with pytest.raises(ConfigError):
            parse_config(json.dumps(raw))

    def test_hv_without_denoiser_rejected(self):
        raw = json.loads(MINIMAL)
        raw["denoiser"] = None
        raw["schemes"] = ["tc", "hv"]
        with pytest.raises(ConfigError):
            parse_config(json.dumps(raw))

    def test_duplicate_schemes_rejected(self):
        raw = json.loads(MINIMAL)
        raw["schemes"] = ["tc", "tc"]
        with pytest.raises(ConfigError):
            parse_config(json.dumps(raw))

    def test_bad_override_key_rejected(self):
        raw = json.loads(MINIMAL)
        raw["checkpoint_overrides"] = {"tc": {"app": "x"}}
        with pytest.raises(ConfigError):
            parse_config(json.dumps(raw))

    def test_classification_defaults(self):
        raw = json.loads(MINIMAL)
        raw["dataset"] = {"task": "classification", "train_count": 10, "test_count": 5}
        raw["application"] = {"kind": "ccnn", "base_channels": 8}
        cfg = parse_config(json.dumps(raw))
        assert cfg.dataset.num_classes == 3
        assert cfg.application.num_classes == 3


class TestRoundTrip:
    def test_parse_serialize_parse_is_fixed_point(self):
        cfg1 = parse_config(MINIMAL)
        text1 = serialize_config(cfg1)
        cfg2 = parse_config(text1)
        text2 = serialize_config(cfg2)
        assert text1 == text2
        assert cfg1 == cfg2

    def test_file_round_trip(self, tmp_path):
        cfg = parse_config(MINIMAL)
        save_config(cfg, tmp_path / "c.json")
        assert load_config(tmp_path / "c.json") == cfg

    def test_missing_file_raises(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.json")
