import pytest
import yaml

from outbreak_onset.config import ExperimentConfig
from outbreak_onset.exceptions import ConfigError
from outbreak_onset.volumes import CANONICAL_DISEASES


def test_defaults_match_protocol():
    cfg = ExperimentConfig().validate()
    assert [d.id for d in cfg.diseases] == ["D1", "D2", "D3", "D4", "D5"]
    assert cfg.novel_disease == "D5" and cfg.known_diseases == ["D1", "D2", "D3", "D4"]
    assert cfg.cohort.cases_per_disease == 200
    assert cfg.detector.w_s == (30, 50, 90)
    assert cfg.detector.s == 2.576
    assert cfg.detector.R == (1.1, 1.15, 1.2, 1.25, 1.3)
    assert cfg.detector.n_replicates == 100


def test_dump_load_roundtrip(tmp_path):
    cfg = ExperimentConfig()
    cfg.detector.R = (1.2,)
    path = tmp_path / "c.yaml"
    path.write_text(cfg.dump())
    again = ExperimentConfig.load(path)
    assert again.to_dict() == cfg.to_dict()
    assert again.diseases == list(CANONICAL_DISEASES)


@pytest.mark.parametrize(
    "raw",
    [
        {"master_sead": 1},
        {"detector": {"w_size": [30]}},
        {"diseases": [{"id": "D1", "fragmentation": "low", "location": "random", "colour": 1}]},
        {"detector": {"R": []}},
        {"detector": {"R": [1.0]}},
        {"detector": {"w_s": [1]}},
        {"novel_disease": "D9"},
        {"cohort": {"volume_shape": [4, 32, 32]}},
        {"autoencoder": {"compression": "log"}},
        {"stream": {"onset_day": 150}},
        {"detector": "fast"},
    ],
)
def test_invalid_configs_rejected(raw):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(raw)


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("- a\n- b\n")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(bad)
    empty = tmp_path / "empty.yaml"
    empty.write_text("")
    assert ExperimentConfig.load(empty).to_dict() == ExperimentConfig().to_dict()


def test_dump_is_plain_yaml():
    raw = yaml.safe_load(ExperimentConfig().dump())
    assert raw["detector"]["w_s"] == [30, 50, 90]
    assert raw["diseases"][2] == {
        "id": "D3",
        "fragmentation": "high",
        "location": "front",
        "lesion_fraction": 0.08,
        "intensity_range": [0.3, 1.0],
    }
