import csv
import json

import pytest

from axlab.cli import main, parse_params, parse_seeds
from axlab.harness import ConfigError, ExperimentConfig, build_env, run_experiment, sample_ratio_ok, sweep_eps


def chain_cfg(**kw):
    base = dict(env="chain", env_params={"n": 3}, algo="lasd", L=3, eps=0.3, delta=0.1, seeds=[0, 1],
                budget=10**10)
    base.update(kw)
    return ExperimentConfig(**base)


def strip_wall(doc):
    for s in doc["seeds"]:
        s.pop("wall_time")
    return doc


# ----------------------------------------------------------------- validation
@pytest.mark.parametrize(
    "change",
    [{"seeds": []}, {"eps": 0.0}, {"eps": 1.5}, {"delta": 1.0}, {"L": 0.5}, {"algo": "ucb"}, {"seeds": [1, 1]},
     {"budget": 0}, {"preset": "huge"}, {"overrides": {"nope": 1}}, {"jobs": 0}, {"lae_discovery": "x"}],
)
def test_config_validation(change):
    with pytest.raises(ConfigError):
        chain_cfg(**change).validate()


def test_build_env_named_and_file(tmp_path, chain3):
    assert build_env("chain", {"n": 3}) == chain3
    path = tmp_path / "m.json"
    chain3.save(path)
    assert build_env(str(path)) == chain3
    with pytest.raises(ConfigError):
        build_env("nowhere")
    with pytest.raises(ConfigError):
        build_env("chain", {"width": 3})
    with pytest.raises(ConfigError):
        build_env(str(path), {"n": 3})


# ---------------------------------------------------------------- experiments
def test_run_experiment_writes_outputs(tmp_path):
    s = run_experiment(chain_cfg(out=str(tmp_path)))
    assert s.ok and s.pass_rate == 1.0 and s.required_rate == pytest.approx(0.8)
    doc = json.loads((tmp_path / "summary.json").read_text())
    assert doc["seeds"][0]["K"] == [0, 1, 2]
    assert set(doc["seeds"][0]["ax"]) == {"AX_L", "AX_star", "AX_plus"}
    oracle = json.loads((tmp_path / "oracle.json").read_text())
    assert oracle["layers"] == [[0], [0, 1], [0, 1, 2]]
    rows = list(csv.DictReader((tmp_path / "seed-0" / "rounds.csv").open()))
    assert rows[-1]["kind"] == "terminate"
    # per-round samples add up to the seed total
    assert sum(int(r["samples_used"]) for r in rows) == doc["seeds"][0]["samples"]


def test_run_experiment_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_experiment(chain_cfg(out=str(a)))
    run_experiment(chain_cfg(out=str(b), jobs=2))
    for seed in (0, 1):
        assert (a / f"seed-{seed}" / "rounds.csv").read_bytes() == (b / f"seed-{seed}" / "rounds.csv").read_bytes()
    da = strip_wall(json.loads((a / "summary.json").read_text()))
    db = strip_wall(json.loads((b / "summary.json").read_text()))
    da["config"].pop("jobs", None)
    db["config"].pop("jobs", None)
    assert da == db


def test_budget_exhaustion_is_a_seed_failure():
    s = run_experiment(chain_cfg(budget=1000, seeds=[0]))
    assert not s.ok
    assert s.seeds[0].error.startswith("BudgetExceeded")


@pytest.mark.parametrize("algo", ["lasd+", "pc", "lae"])
def test_other_algorithms(algo):
    s = run_experiment(chain_cfg(algo=algo, seeds=[0], overrides={"c2": 8.0}))
    assert s.pass_rate == 1.0


def test_sweep_monotone_and_ratio(tmp_path):
    rows = sweep_eps(chain_cfg(seeds=[0, 1]), [0.6, 0.3, 0.15], out=tmp_path / "sweep.csv")
    assert sample_ratio_ok(rows)
    for a, b in zip(rows, rows[1:]):
        assert 1 < b["mean_samples"] / a["mean_samples"] <= 16
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0] == "eps,mean_samples,pass_rate" and len(lines) == 4


def test_sweep_single_eps_matches_run():
    cfg = chain_cfg(seeds=[3])
    rows = sweep_eps(cfg, [0.3])
    assert rows[0]["mean_samples"] == run_experiment(cfg).mean_samples


# ------------------------------------------------------------------------ cli
def test_parse_helpers():
    assert parse_seeds("0..3") == [0, 1, 2, 3]
    assert parse_seeds("1,4..5") == [1, 4, 5]
    assert parse_params(["n=3", "slip=0.1", "name=x"]) == {"n": 3, "slip": 0.1, "name": "x"}


def test_cli_run(tmp_path, capsys):
    code = main(["run", "--env", "chain", "--param", "n=3", "--L", "3", "--seeds", "0..1",
                 "--budget", str(10**10), "--out", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "seed 0: pass" in out and "pass rate 1.000" in out
    assert (tmp_path / "seed-1" / "rounds.csv").exists()


def test_cli_oracle(capsys):
    assert main(["oracle", "--env", "chain", "--param", "n=3", "--L", "3", "--eps", "0.3"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["controllable_set"] == [0, 1, 2] and info["identifiable"] is True


def test_cli_bad_config_exit_code(capsys):
    assert main(["run", "--env", "chain", "--param", "n=3", "--L", "3", "--eps", "2"]) == 2
    assert "error" in capsys.readouterr().err


def test_cli_failing_run_exit_code(capsys):
    assert main(["run", "--env", "chain", "--param", "n=3", "--L", "3", "--budget", "100"]) == 1


def test_cli_sweep(capsys):
    assert main(["sweep", "--env", "chain", "--param", "n=3", "--L", "3", "--eps-list", "0.6,0.3",
                 "--budget", str(10**10)]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "eps,mean_samples,pass_rate"
