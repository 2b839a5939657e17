import csv
import io
import json
import math
from pathlib import Path

import pytest

from mpc_bounds import channel as chn
from mpc_bounds import cli
from mpc_bounds.specfn import std_normal_cdf

GOLDEN = Path(__file__).parent / "golden"

CHANNEL = {"noise_variance": 1, "cost_threshold": 1}
MAXIMAL = [{"kind": "positive_part", "budget": 0}]
SQUARE = [{"kind": "square", "budget": 1}]


def write(tmp_path, d, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d) if isinstance(d, dict) else d)
    return p


def run_main(tmp_path, d, *extra):
    cfg = write(tmp_path, d)
    out = tmp_path / "out.txt"
    code = cli.main([str(cfg), "--output", str(out), *extra])
    return code, out.read_text() if out.exists() else ""


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


# -- parsing ----------------------------------------------------------------


def test_minimal_maximal_config(tmp_path):
    cfg = cli.parse_config(write(tmp_path, {"channel": CHANNEL, "constraints": MAXIMAL, "command": "limit", "r": 0}))
    assert cfg.constraints.k == 1
    f, b = cfg.constraints.items[0]
    assert f.kind == "positive_part" and b == 0.0
    assert cfg.channel == chn.ChannelSpec(1.0, 1.0)


@pytest.mark.parametrize(
    "patch,field",
    [
        ({"channel": {"noise_variance": -1, "cost_threshold": 1}}, "noise_variance"),
        ({"channel": {"noise_variance": 1, "cost_threshold": 0}}, "cost_threshold"),
        ({"constraints": [{"kind": "square", "budget": -0.1}]}, "budget"),
        ({"constraints": [{"kind": "cubic", "budget": 1}]}, "kind"),
        ({"constraints": [{"kind": "power_law", "budget": 1, "exponent": 0.5}]}, "constraints[0]"),
        ({"command": "plot"}, "command"),
        ({"bogus": 1}, "unknown keys"),
        ({"channel": {"noise_variance": 1, "cost_threshold": 1, "snr": 3}}, "unknown keys"),
        ({"optimizer": {"restarts": 0}}, "restarts"),
        ({"optimizer": {"speed": 3}}, "optimizer"),
        ({"r_grid": {"start": 0, "stop": 1, "step": 0}}, "step"),
        ({"units": "dB"}, "units"),
        ({"constraints": [{"kind": "step_indicator", "budget": 0.1, "threshold": 0}]}, "grows without bound"),
    ],
)
def test_validation_names_field(tmp_path, patch, field):
    d = {"channel": CHANNEL, "constraints": SQUARE, "command": "limit", "r": 0}
    d.update(patch)
    if "r_grid" in patch:
        d.pop("r")
    with pytest.raises(cli.ConfigError, match=field.replace("[", r"\[").replace("]", r"\]")):
        cli.parse_config(write(tmp_path, d))


def test_budget_error_cites_domain(tmp_path):
    d = {"channel": CHANNEL, "constraints": [{"kind": "square", "budget": -0.1}], "command": "limit", "r": 0}
    with pytest.raises(cli.ConfigError, match=r"\[0, inf\)"):
        cli.parse_config(write(tmp_path, d))


def test_json_syntax_error_has_line(tmp_path):
    p = write(tmp_path, '{\n  "channel": {"noise_variance": 1,\n  "cost_threshold": }\n}')
    with pytest.raises(cli.ConfigError, match="line 3"):
        cli.parse_config(p)


def test_missing_file(tmp_path):
    with pytest.raises(cli.ConfigError, match="cannot read"):
        cli.parse_config(tmp_path / "nope.json")


def test_seed_mandatory_for_mc(tmp_path):
    d = {"channel": CHANNEL, "constraints": SQUARE, "command": "achievability", "r": 0, "n": 400}
    with pytest.raises(cli.ConfigError, match="seed"):
        cli.parse_config(write(tmp_path, d))
    d["estimator"] = "analytic"
    assert cli.parse_config(write(tmp_path, d)).bound == "analytic"


def test_mixture_checked_at_parse(tmp_path):
    d = {
        "channel": CHANNEL, "constraints": SQUARE, "command": "achievability", "r": 0, "n": 400,
        "seed": 1, "mixture": {"atoms": [2.0], "weights": [1.0]},
    }
    with pytest.raises(cli.ConfigError, match="mixture"):
        cli.parse_config(write(tmp_path, d))


def test_r_prime_must_be_below_r(tmp_path):
    d = {"channel": CHANNEL, "constraints": SQUARE, "command": "converse", "r": 0, "n": 400, "r_prime": 0.1}
    with pytest.raises(cli.ConfigError, match="r_prime"):
        cli.parse_config(write(tmp_path, d))


def test_grid_spec_expansion(tmp_path):
    d = {"channel": CHANNEL, "constraints": MAXIMAL, "command": "sweep", "r_grid": {"start": -1.5, "stop": 1.5, "step": 0.1}}
    cfg = cli.parse_config(write(tmp_path, d))
    assert len(cfg.r_values) == 31
    assert cfg.r_values[0] == -1.5 and cfg.r_values[15] == 0.0 and cfg.r_values[-1] == 1.5
    assert cfg.r_values[1] == -1.4


def test_bits_convert_at_boundary(tmp_path):
    d = {"channel": CHANNEL, "constraints": MAXIMAL, "command": "limit", "r": 0.5, "units": "bits"}
    code, text = run_main(tmp_path, d)
    assert code == 0
    (row,) = rows(text)
    assert row["r"] == "0.5" and row["units"] == "bits"
    V = chn.dispersion(chn.ChannelSpec(1, 1))
    assert float(row["value"]) == pytest.approx(float(std_normal_cdf(0.5 * math.log(2) / math.sqrt(V))), abs=1e-9)


# -- running ----------------------------------------------------------------


def test_limit_sweep_rows_and_monotone(tmp_path):
    d = {"channel": CHANNEL, "constraints": MAXIMAL, "command": "sweep", "sweep_kind": "limit",
         "r_grid": {"start": -1.5, "stop": 1.5, "step": 0.1}}
    code, text = run_main(tmp_path, d)
    assert code == 0
    out = rows(text)
    assert len(out) == 31
    vals = [float(r["value"]) for r in out]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert list(out[0]) == cli.COMMON_COLUMNS + cli.KIND_COLUMNS["Limit"]


def test_square_sweep_monotone(tmp_path):
    d = {"channel": CHANNEL, "constraints": SQUARE, "command": "sweep", "r_grid": [-1.0, -0.5, 0.0, 0.5, 1.0]}
    code, text = run_main(tmp_path, d)
    vals = [float(r["value"]) for r in rows(text)]
    assert code == 0 and all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))


def test_rerun_byte_identical(tmp_path):
    d = {"channel": CHANNEL, "constraints": SQUARE, "command": "achievability", "r": 0, "n_grid": [100, 400],
         "mc_samples": 4000, "seed": 7}
    _, a = run_main(tmp_path, d)
    _, b = run_main(tmp_path, d)
    assert a == b and a


def test_threads_do_not_change_output(tmp_path, monkeypatch):
    d = {"channel": CHANNEL, "constraints": SQUARE, "command": "achievability", "r": 0, "n": 200,
         "mc_samples": 4000, "seed": 3}
    _, a = run_main(tmp_path, d, "--threads", "1")
    monkeypatch.setenv("MPC_BOUNDS_THREADS", "3")
    _, b = run_main(tmp_path, d)
    assert a == b


def test_threads_resolution(monkeypatch):
    monkeypatch.delenv("MPC_BOUNDS_THREADS", raising=False)
    assert cli._threads(None) == 1
    monkeypatch.setenv("MPC_BOUNDS_THREADS", "4")
    assert cli._threads(None) == 4
    assert cli._threads(2) == 2
    monkeypatch.setenv("MPC_BOUNDS_THREADS", "many")
    with pytest.raises(cli.ConfigError):
        cli._threads(None)


def test_golden_limit_and_analytic(tmp_path):
    d = {"channel": CHANNEL, "constraints": MAXIMAL, "command": "sweep", "r_grid": [-0.5, 0, 0.5]}
    code, text = run_main(tmp_path, d)
    assert code == 0
    assert text == (GOLDEN / "limit_maximal.csv").read_text()
    d = {"channel": CHANNEL, "constraints": SQUARE, "command": "achievability", "estimator": "analytic",
         "r": 0, "n": 1600, "kappa_prime": 0.5, "mixture": {"atoms": [-1, 1], "weights": [0.5, 0.5]}}
    code, text = run_main(tmp_path, d)
    assert code == 0
    assert text == (GOLDEN / "analytic_two_atom.csv").read_text()


def test_golden_values_match_closed_form():
    V = chn.dispersion(chn.ChannelSpec(1, 1))
    for row in rows((GOLDEN / "limit_maximal.csv").read_text()):
        assert float(row["value"]) == pytest.approx(float(std_normal_cdf(float(row["r"]) / math.sqrt(V))), abs=1e-9)


def test_jsonl_output(tmp_path):
    d = {"channel": CHANNEL, "constraints": SQUARE, "command": "converse", "r": 0, "n": 400, "output_format": "jsonl"}
    code, text = run_main(tmp_path, d)
    assert code == 0
    (rec,) = [json.loads(line) for line in text.splitlines()]
    assert rec["bound_kind"] == "LowerBound" and 0.0 <= rec["value"] <= 1.0
    assert list(rec) == cli.COMMON_COLUMNS + cli.KIND_COLUMNS["LowerBound"]


def test_mc_row_fields(tmp_path):
    d = {"channel": CHANNEL, "constraints": SQUARE, "command": "achievability", "r": 0, "n": 400,
         "mc_samples": 2000, "seed": 11, "theta": "auto"}
    code, text = run_main(tmp_path, d)
    (row,) = rows(text)
    assert code == 0 and row["bound_kind"] == "UpperBoundMC"
    assert float(row["std_error"]) >= 0 and row["seed"] == "11" and row["samples"] == "2000"


def test_wall_time_only_on_request(tmp_path):
    d = {"channel": CHANNEL, "constraints": MAXIMAL, "command": "limit", "r": 0, "record_wall_time": True}
    _, text = run_main(tmp_path, d)
    assert "wall_time" in rows(text)[0]


def test_config_error_exit_code(tmp_path, capsys):
    d = {"channel": {"noise_variance": -1, "cost_threshold": 1}, "constraints": SQUARE, "command": "limit", "r": 0}
    code, _ = run_main(tmp_path, d)
    assert code == 2
    assert "noise_variance" in capsys.readouterr().err


def test_numeric_failure_marker_row(tmp_path):
    # the first n is fine, the second makes a shell cost negative
    d = {"channel": CHANNEL, "constraints": [{"kind": "square", "budget": 100}], "command": "achievability",
         "estimator": "analytic", "r": 0, "n_grid": [4000, 4]}
    code, text = run_main(tmp_path, d)
    assert code == 3
    out = rows(text)
    assert len(out) == 2
    assert out[0]["bound_kind"] == "AnalyticCurve" and out[0]["value"]
    assert out[1]["command"] == "FAILED" and out[1]["status"].startswith("FAILED:")


def test_verify_subset(tmp_path):
    d = {"channel": CHANNEL, "constraints": MAXIMAL, "command": "verify", "seed": 0, "checks": [1, 8], "quick": True}
    code, text = run_main(tmp_path, d)
    out = rows(text)
    assert code == 0
    assert [r["check"] for r in out] == ["1", "8"]
    assert all(r["passed"] == "true" for r in out)


def test_stdout_when_no_output(tmp_path, capsys):
    p = write(tmp_path, {"channel": CHANNEL, "constraints": MAXIMAL, "command": "limit", "r": 0})
    assert cli.main([str(p)]) == 0
    assert capsys.readouterr().out.startswith("command,bound_kind")
