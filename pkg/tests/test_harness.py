import copy
import json
import math
import os

import pytest

from nestchase import cli
from nestchase.config import ConfigError, EpisodeConfig, parse_config
from nestchase.harness import (
    RATIO_FLOOR,
    REPORT_SCHEMA,
    TRACE_SCHEMA,
    expand_sweep,
    opt_cost,
    run_and_report,
    run_episode,
    run_sweep,
    sweep_csv,
)

HERE = os.path.dirname(__file__)
SAMPLE = os.path.join(HERE, "..", "scripts", "sample_config.json")

SMALL = {
    "dim": 2,
    "norm": 2,
    "chaser": {"kind": "steiner", "params": {"n_dirs": 1000}},
    "adversary": {"kind": "random_nested", "params": {"T": 5, "cut_fraction": 0.3, "cloud_size": 64}},
    "seeds": {"chaser": 1, "adversary": 2},
    "diagnostics": {"n_dirs": 400, "hausdorff_dirs": 200, "budget_dirs": 400},
}

REPORT_FIELDS = {"schema_version", "T", "total_cost", "total_cost_l2", "opt_cost", "opt_cost_l2",
                 "competitive_ratio", "competitive_ratio_l2", "hausdorff", "memoryless_ratio",
                 "normalized", "checks", "all_passed", "diagnostics", "runtime"}


def cfg(**over):
    data = copy.deepcopy(SMALL)
    data.update(over)
    return parse_config(data)


# ---------------------------------------------------------------------------
# configuration


def test_config_round_trip():
    c = cfg()
    assert parse_config(c.to_dict()).to_dict() == c.to_dict()
    assert c.seeds == (1, 2)


def test_config_seeds_mandatory():
    data = copy.deepcopy(SMALL)
    del data["seeds"]
    with pytest.raises(ConfigError) as exc:
        parse_config(data)
    assert any("seeds" in e for e in exc.value.errors)


def test_config_collects_every_error():
    data = copy.deepcopy(SMALL)
    data.update(dim=0, norm=0.5, x0="middle", bogus=1)
    data["chaser"] = {"kind": "nope"}
    with pytest.raises(ConfigError) as exc:
        parse_config(data)
    joined = " ".join(exc.value.errors)
    for key in ("dim", "norm", "x0", "chaser.kind", "bogus"):
        assert key in joined


@pytest.mark.parametrize("adv,msg", [
    ({"kind": "hadamard"}, "power of two"),
    ({"kind": "cap_cutting", "params": {"spacing": 1.5}}, "spacing"),
    ({"kind": "product_slab", "params": {"eps": 0.7, "base": {"kind": "shrinking_balls"}}}, "eps"),
    ({"kind": "random_nested", "params": {"T": -1}}, "T"),
    ({"kind": "warp"}, "unknown adversary"),
])
def test_config_adversary_errors(adv, msg):
    data = copy.deepcopy(SMALL)
    data["dim"] = 3
    data["adversary"] = adv
    with pytest.raises(ConfigError) as exc:
        parse_config(data)
    assert any(msg in e for e in exc.value.errors)


def test_config_x0_length():
    with pytest.raises(ConfigError):
        cfg(x0=[0.0, 0.0, 0.0])


def test_config_load(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(SMALL))
    assert EpisodeConfig.load(p).dim == 2
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        EpisodeConfig.load(p)


# ---------------------------------------------------------------------------
# episodes


def test_trace_totals_and_feasibility():
    trace = run_episode(cfg())
    assert trace.T == 5
    assert trace.total_cost == pytest.approx(sum(s.cost for s in trace.steps), abs=1e-9)
    assert all(s.cost >= 0 and s.cost_l2 >= 0 for s in trace.steps)
    assert all(s.violation <= 1e-6 for s in trace.steps)


def test_trace_csv_layout():
    trace = run_episode(cfg())
    lines = trace.to_csv().splitlines()
    assert lines[0] == f"# schema={TRACE_SCHEMA}"
    header = lines[1].split(",")
    assert header[:3] == ["step", "cost", "cost_l2"] and header[-2:] == ["x0", "x1"]
    assert len(lines) == 2 + 1 + trace.T


def test_same_config_identical_trace():
    a = run_episode(cfg())
    b = run_episode(cfg())
    assert a.to_csv() == b.to_csv() and a.digest() == b.digest()


def test_shrinking_balls_steiner_cost_tiny():
    c = cfg(adversary={"kind": "shrinking_balls", "params": {"T": 4, "ratio": 0.5}})
    trace, rep = run_and_report(c)
    noise = sum(s.steiner_mc_err for s in trace.steps)
    assert trace.total_cost <= 10 * noise + 1e-12
    assert rep.passed


@pytest.mark.parametrize("kind", ["steiner", "lazy_steiner", "toward_steiner", "greedy_projection"])
def test_hadamard_four_steps(kind):
    c = cfg(dim=4, adversary={"kind": "hadamard"}, chaser={"kind": kind, "params": {}}, x0="origin")
    trace = run_episode(c)
    assert trace.T == 4
    for s in trace.steps:
        assert s.cost >= 4 ** (1 / 2 - 1) - 0.01


def test_normed_space_episode_runs():
    c = cfg(chaser={"kind": "normed_space",
                    "params": {"sampler": {"n": 256, "chains": 32, "burn_in": 20, "thinning": 2}}},
            adversary={"kind": "random_nested", "params": {"T": 3, "cut_fraction": 0.5,
                                                           "cloud_size": 64}})
    trace, rep = run_and_report(c)
    assert trace.T == 3
    assert rep.check("feasibility").passed


# ---------------------------------------------------------------------------
# offline optimum and reports


def test_opt_zero_when_start_inside():
    trace = run_episode(cfg(adversary={"kind": "shrinking_balls", "params": {"T": 2}}, x0="origin"))
    assert opt_cost(trace) == 0.0


def test_opt_shrinking_balls_radial():
    c = cfg(adversary={"kind": "shrinking_balls", "params": {"T": 3, "ratio": 0.5}},
            chaser={"kind": "greedy_projection", "params": {}}, x0=[0.9, 0.0])
    trace = run_episode(c)
    assert opt_cost(trace) == pytest.approx(0.9 - 0.125, abs=1e-9)


def test_opt_linf_radial():
    c = cfg(adversary={"kind": "shrinking_balls", "params": {"T": 3, "ratio": 0.5}},
            chaser={"kind": "greedy_projection", "params": {}}, x0=[0.6, 0.6], norm="inf")
    trace = run_episode(c)
    # the l_inf distance from (0.6, 0.6) to the disc of radius 1/8 is 0.6 - 1/(8 sqrt 2)
    assert opt_cost(trace) == pytest.approx(0.6 - 0.125 / math.sqrt(2), abs=1e-4)


def test_ratio_uses_floor():
    c = cfg(adversary={"kind": "shrinking_balls", "params": {"T": 1, "ratio": 0.9}},
            chaser={"kind": "greedy_projection", "params": {}}, x0="origin")
    trace, rep = run_and_report(c)
    assert rep.total_cost == 0.0 and rep.opt_cost == 0.0
    assert rep.competitive_ratio == 0.0 / RATIO_FLOOR


@pytest.mark.parametrize("d", [4, 8, 16])
def test_hadamard_steiner_ratio(d):
    c = cfg(dim=d, adversary={"kind": "hadamard"}, x0="origin",
            chaser={"kind": "steiner", "params": {"n_dirs": 4000}})
    trace, rep = run_and_report(c)
    assert rep.competitive_ratio_l2 >= math.sqrt(d) - 0.2
    assert rep.opt_cost_l2 <= 1.0 + 0.01


def test_cap_cutting_d2_movement():
    c = cfg(adversary={"kind": "cap_cutting", "params": {"spacing": 0.05}},
            chaser={"kind": "steiner", "params": {"n_dirs": 20000}})
    trace, rep = run_and_report(c)
    assert trace.total_cost_l2 >= 0.01
    assert rep.check("cap_origin_kept").passed


def test_report_json_fields():
    _, rep = run_and_report(cfg())
    d = json.loads(rep.to_json())
    assert REPORT_FIELDS <= set(d)
    assert d["schema_version"] == REPORT_SCHEMA
    names = {c["name"] for c in d["checks"]}
    assert {"feasibility", "lambda_budget"} <= names


def test_report_ratio_sanity():
    _, rep = run_and_report(cfg(x0=[1.5, 0.0]))
    assert rep.opt_cost > 0
    assert rep.check("ratio_sanity").passed
    assert rep.competitive_ratio >= 1 - 1e-6


def test_lambda_budget_and_concavity():
    c = cfg(adversary={"kind": "random_nested", "params": {"T": 10, "cut_fraction": 0.3,
                                                           "cloud_size": 64}})
    _, rep = run_and_report(c)
    assert rep.check("lambda_budget").passed
    if rep.normalized:
        assert rep.check("concavity").passed


# ---------------------------------------------------------------------------
# sweeps


def test_sweep_twenty_seeds_distinct_and_repeatable():
    data = copy.deepcopy(SMALL)
    data["adversary"]["params"]["T"] = 3
    data["sweep"] = {"seeds": list(range(1, 21))}
    rows = run_sweep(expand_sweep(data))
    assert len(rows) == 20
    assert len({r["trace_digest"] for r in rows}) == 20
    again = run_sweep(expand_sweep(data))
    assert sweep_csv(rows) == sweep_csv(again)


def test_sweep_requires_block():
    with pytest.raises(ConfigError):
        expand_sweep(SMALL)


# ---------------------------------------------------------------------------
# command line


def test_cli_run_sample_config(tmp_path, capsys):
    code = cli.main(["run", SAMPLE, "--out", str(tmp_path)])
    assert code == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert REPORT_FIELDS <= set(rep)
    assert (tmp_path / "trace.csv").read_text().startswith("# schema=")
    assert json.loads((tmp_path / "bodies.json").read_text())["requests"]


def test_cli_bad_config_exit_2(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"dim": "two"}))
    assert cli.main(["run", str(p)]) == 2
    err = capsys.readouterr().err
    assert "dim" in err and "seeds" in err


def test_cli_missing_file_exit_2(tmp_path):
    assert cli.main(["run", str(tmp_path / "absent.json")]) == 2


def test_cli_net(capsys):
    assert cli.main(["net", "2", "0.05"]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 126
    assert cli.main(["net", "2", "2.0"]) == 2


def test_cli_seed_override_changes_trace(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(SMALL))
    assert cli.main(["run", str(p), "--seed", "5", "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["run", str(p), "--seed", "6", "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "trace.csv").read_text()
    b = (tmp_path / "b" / "trace.csv").read_text()
    assert a != b


def test_cli_replay(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(SMALL))
    assert cli.main(["run", str(p), "--out", str(tmp_path / "a")]) == 0
    bodies = str(tmp_path / "a" / "bodies.json")
    assert cli.main(["replay", bodies, "--chaser", "greedy_projection",
                     "--out", str(tmp_path / "r")]) == 0
    rows = (tmp_path / "r" / "trace.csv").read_text().splitlines()
    assert len(rows) == 2 + 1 + SMALL["adversary"]["params"]["T"]
    (tmp_path / "junk.json").write_text("[]")
    assert cli.main(["replay", str(tmp_path / "junk.json")]) == 2


def test_cli_sweep(tmp_path):
    data = copy.deepcopy(SMALL)
    data["adversary"]["params"]["T"] = 2
    data["sweep"] = {"seeds": [1, 2], "chasers": ["steiner", "greedy_projection"]}
    p = tmp_path / "s.json"
    p.write_text(json.dumps(data))
    assert cli.main(["sweep", str(p), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert len(lines) == 2 + 4


def test_cli_validate_quick(capsys):
    assert cli.main(["validate", "--quick"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out


def test_cli_validate_failure_exit_1(monkeypatch, capsys):
    from nestchase import validation
    from nestchase.validation import CriterionResult

    bad = CriterionResult(2, "stub", False, ["forced failure"], {}, 0.0)
    monkeypatch.setattr(validation, "run_suite", lambda report=print: [bad])
    assert cli.main(["validate"]) == 1
    assert "forced failure" in capsys.readouterr().out
