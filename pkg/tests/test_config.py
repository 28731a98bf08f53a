import pytest

from ise_lab.config import Config, Mode, load_config, parse_pairs
from ise_lab.errors import ConfigError
from ise_lab.pli import ScheduleKind


def test_defaults_validate():
    cfg = load_config()
    assert cfg.train.mode is Mode.ISE and cfg.train.batch_size == 64 and cfg.train.instances == 4


def test_file_and_overrides(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text("seed = 3\ntrain.lr = 0.05\n[pli]\nschedule = \"linear\"  # comment\nk = 2\n")
    cfg = load_config(p, ["pli.k=3", "train.lr_decay_epochs=[5, 9]"])
    assert cfg.seed == 3 and cfg.pli.schedule is ScheduleKind.LINEAR and cfg.pli.k == 3
    assert cfg.train.lr_decay_epochs == [5, 9] and cfg.train.lr == 0.05


def test_section_prefix_applies():
    assert parse_pairs("[train]\nlr = 1\n") == [("train.lr", "1")]


def test_round_trip_text(tmp_path):
    cfg = load_config(overrides=["pli.direction=FARTHEST", "train.dump_embeddings=yes", "loss.beta=0.25"])
    p = tmp_path / "echo.toml"
    p.write_text(cfg.to_text())
    assert load_config(p).flat() == cfg.flat()


def test_scenario_takes_top_level_seed():
    assert load_config(overrides=["seed=9"]).scenario().seed == 9


@pytest.mark.parametrize("item", [
    "nope=1", "train.nope=1", "train=1", "train.lr=abc", "train.lr=-1", "train.batch_size=10",
    "pli.schedule=CUBIC", "train.dump_embeddings=maybe", "justtext", "train.train_on=query",
])
def test_bad_overrides(item):
    with pytest.raises(ConfigError):
        load_config(overrides=[item])


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.toml")


def test_bad_line_reports_location(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text("seed = 1\nwhat\n")
    with pytest.raises(ConfigError, match=":2:"):
        load_config(p)
