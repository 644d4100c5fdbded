import json

import numpy as np
import pytest

from cmcwave.cli import main
from cmcwave.harness import DEFAULTS, ConfigError, RunConfig, replay, run
from cmcwave.streams import stream


def write_config(tmp_path, command, **params):
    path = tmp_path / f"{command}.json"
    path.write_text(json.dumps({"command": command, "params": params}))
    return path


def load(path):
    return json.loads(path.read_text())


class TestStreams:
    def test_reproducible_and_distinct(self):
        a = stream(7, 3).normal(size=5)
        assert np.array_equal(a, stream(7, 3).normal(size=5))
        assert not np.array_equal(a, stream(7, 4).normal(size=5))
        assert not np.array_equal(a, stream(8, 3).normal(size=5))

    def test_large_seed_and_negative(self):
        stream(2**64 - 1, 2**40).random()
        with pytest.raises(ValueError):
            stream(-1)


class TestConfig:
    def test_defaults_and_seed(self):
        cfg = RunConfig.build({}, "verify-kernel")
        assert cfg.seed == 0 and cfg.params == DEFAULTS["verify-kernel"]
        assert RunConfig.build({}, "schedule").seed is None
        assert RunConfig.build({"seed": 5}, "simulate", seed=9).seed == 9

    def test_field_level_errors(self):
        with pytest.raises(ConfigError) as exc:
            RunConfig.build({"params": {"n": 7, "K": -1}, "bogus": 1}, "simulate")
        text = "\n".join(exc.value.errors)
        assert "params.n" in text and "params.K" in text and "bogus" in text

    def test_command_conflict(self):
        with pytest.raises(ConfigError):
            RunConfig.build({"command": "simulate"}, "schedule")
        with pytest.raises(ConfigError):
            RunConfig.build({}, "fly")


class TestCli:
    def test_schedule_and_replay(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "schedule", K=1.0, C=1.0)
        assert main(["schedule", "--config", str(cfg), "--out", str(tmp_path / "s")]) == 0
        rep = load(tmp_path / "s" / "report.json")
        sched = rep["results"]["schedule"]
        assert sched["A"] == 4.0 and sched["T"] == pytest.approx(5.968e-3, abs=1e-6)
        assert rep["config"]["command"] == "schedule" and "numpy" in rep["versions"]
        assert main(["replay", str(tmp_path / "s" / "report.json")]) == 0
        again = load(tmp_path / "s" / "replay" / "report.json")
        assert again["results"] == rep["results"] and again["replay"]["matches"]

    def test_replay_with_other_seed_flags_mismatch(self, tmp_path):
        cfg = write_config(tmp_path, "verify-kernel", samples=2000, lattice=6, top=3)
        out = tmp_path / "k"
        assert main(["verify-kernel", "--config", str(cfg), "--out", str(out), "--seed", "3"]) == 0
        assert main(["replay", str(out / "report.json")]) == 0
        assert main(["replay", str(out / "report.json"), "--seed", "4", "--out", str(tmp_path / "r")]) == 1
        rep = load(tmp_path / "r" / "report.json")
        assert rep["replay"]["config_mismatch"] and not rep["replay"]["matches"]
        assert (out / "kernel_extremes.csv").exists()

    def test_usage_errors(self, tmp_path, capsys):
        bad = write_config(tmp_path, "simulate", n=12.5)
        assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2
        assert "params.n" in capsys.readouterr().err
        assert main(["replay"]) == 2
        assert main(["replay", str(tmp_path / "missing.json")]) == 2
        assert main(["schedule", "--threads", "0"]) == 2
        with pytest.raises(SystemExit):
            main(["explode"])

    def test_simulate_zero_data(self, tmp_path):
        cfg = write_config(tmp_path, "simulate", n=16, M=8, zero_data=True)
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "z")]) == 0
        rep = load(tmp_path / "z" / "report.json")
        assert rep["results"]["iterations"] == 1 and rep["passed"]
        for name in rep["artifacts"]:
            assert (tmp_path / "z" / name).exists()


def test_thread_count_does_not_change_results(tmp_path):
    cfg = RunConfig.build({"params": {"n": 32, "M": 16, "K": 0.1}}, "simulate", seed=2)
    a = run(cfg, tmp_path / "a", threads=1)
    b = run(cfg, tmp_path / "b", threads=2)
    assert a.results == b.results and a.passed


def test_small_runs_of_every_command(tmp_path):
    specs = {
        "estimate-constant": {"trials": 2, "n": 16, "T_w": 2.0},
        "selfsimilar-search": {"seeds": 2, "nr": 20, "ntheta": 12, "max_iter": 5},
        "continuity": {"n": 16, "M": 8, "K": 0.1, "eps": [1e-2, 5e-3]},
    }
    for command, params in specs.items():
        rep = run(RunConfig.build({"params": params}, command, seed=1), tmp_path / command)
        assert (tmp_path / command / "report.json").exists()
        for c in rep.checks:
            assert {"name", "value", "threshold", "op", "passed"} <= set(c)
        again = replay(tmp_path / command / "report.json")
        assert again.replay["matches"], again.replay["mismatches"]
