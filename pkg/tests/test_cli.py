import csv
import io
import json
import math
import os

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bioconvect import cli
from bioconvect.config import FIELDS, RunConfig
from bioconvect.errors import ConfigError

DATA = os.path.join(os.path.dirname(__file__), "data")

CLASSICAL = ["--set", "suspension.V_c=0", "--set", "suspension.top=stress_free",
             "--set", "suspension.bottom=stress_free", "--set", "stability.eigen_target=R_T",
             "--set", "stability.n_grid=48", "--set", "stability.k_min=1.5",
             "--set", "stability.k_max=3.0", "--set", "stability.n_k=5",
             "--set", "stability.chunk_size=2"]


def _read(path):
    with open(path, "rb") as fh:
        return fh.read()


def _csv_rows(path):
    with open(path) as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


# ---------------------------------------------------------------- config

def test_defaults_are_flagged():
    cfg = RunConfig()
    assert all(cfg.defaulted(f.key) for f in FIELDS)
    text = cfg.to_text()
    assert "optical.kappa = 1.0  # defaulted" in text
    assert "taxis.G_c = auto  # defaulted" in text


def test_round_trip():
    cfg = RunConfig.from_text("optical.kappa = 0.5\nsuspension.top = rigid\n"
                              "sweep.values = 0, 20, 40\n", ["stability.n_k=9"])
    again = RunConfig.from_text(cfg.to_text())
    assert again == cfg
    for key, value in cfg.items():
        assert again[key] == value and again.defaulted(key) == cfg.defaulted(key)
    assert not again.defaulted("stability.n_k") and again.defaulted("optical.omega")
    assert again["sweep.values"] == (0.0, 20.0, 40.0)


def test_round_trip_through_output_header(tmp_path):
    cfg = RunConfig.from_text("optical.theta_i = 40\ntaxis.G_c = 0.9\n")
    text = "".join(f"# {line}\n" for line in cfg.header_lines()) + "z,n_p\n"
    assert RunConfig.from_header(text) == cfg
    path = tmp_path / "out.csv"
    path.write_text(text)
    assert RunConfig.load(str(path)) == cfg


def test_rerun_from_archived_output(tmp_path):
    first = tmp_path / "first.csv"
    again = tmp_path / "again.csv"
    assert cli.main(["base", *BASE_ARGS, "--out", str(first)]) == 0
    assert cli.main(["base", "--config", str(first), "--out", str(again)]) == 0
    assert _read(first) == _read(again)


def test_flags_win_over_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("optical.omega = 0.2\noptical.kappa = 0.5\n")
    cfg = RunConfig.load(str(path), ["optical.omega=0.9"])
    assert cfg["optical.omega"] == 0.9 and cfg["optical.kappa"] == 0.5


@pytest.mark.parametrize("text", ["optical.theta_i = 100", "optical.omega = 1.5",
                                  "optical.kappa = 0", "stability.n_mu = 7",
                                  "no.such = 1", "optical.kappa", "suspension.top = wet",
                                  "stability.collimated_cos_factor = maybe"])
def test_invalid_config_rejected(text):
    with pytest.raises(ConfigError):
        RunConfig.from_text(text)


def test_invalid_config_exit_code(capsys):
    assert cli.main(["base", "--set", "optical.theta_i=100"]) == cli.EXIT_CONFIG
    assert "theta_i" in capsys.readouterr().err
    assert cli.main(["base", "--config", "/nonexistent/x.cfg"]) == cli.EXIT_CONFIG


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 80.0), st.floats(0.0, 1.0), st.floats(0.01, 5.0), st.booleans())
def test_round_trip_property(theta, omega, kappa, cos_factor):
    cfg = RunConfig({"optical.theta_i": theta, "optical.omega": omega, "optical.kappa": kappa,
                     "stability.collimated_cos_factor": "true" if cos_factor else "false"})
    assert RunConfig.from_text(cfg.to_text()) == cfg


# ---------------------------------------------------------------- base

BASE_ARGS = ["--set", "optical.kappa=0.5", "--set", "taxis.G_c=0.9",
             "--set", "basestate.grid_size=65"]


def test_base_golden(tmp_path):
    out = tmp_path / "base.csv"
    assert cli.main(["base", *BASE_ARGS, "--out", str(out)]) == 0
    assert _read(out) == _read(os.path.join(DATA, "golden_base.csv"))


def test_base_contents(tmp_path, capsys):
    out = tmp_path / "base.csv"
    assert cli.main(["base", *BASE_ARGS, "--out", str(out)]) == 0
    text = out.read_text()
    assert "# optical.kappa = 0.5\n" in text and "# optical.omega = 0.4  # defaulted\n" in text
    assert "# effective.G_c = 0.90000000000000002\n" in text
    rows = _csv_rows(out)
    assert len(rows) == 65 and float(rows[-1]["z"]) == 1.0
    assert "peak: z_max" in capsys.readouterr().out


def test_base_uniform_is_degenerate(tmp_path, capsys):
    out = tmp_path / "flat.csv"
    assert cli.main(["base", "--set", "suspension.V_c=0", "--out", str(out)]) == 0
    assert "degenerate" in capsys.readouterr().out
    assert "# result.degenerate = true\n" in out.read_text()
    assert {r["n_p"] for r in _csv_rows(out)} == {"1"}


def test_base_to_stdout(capsys):
    assert cli.main(["base", *BASE_ARGS]) == 0
    cap = capsys.readouterr()
    assert cap.out.startswith("# optical.kappa") and "peak:" in cap.err


# ---------------------------------------------------------------- neutral / critical

def test_neutral_curve(tmp_path):
    out = tmp_path / "curve.csv"
    assert cli.main(["neutral", *CLASSICAL, "--out", str(out)]) == 0
    rows = _csv_rows(out)
    assert [float(r["k"]) for r in rows] == [1.5, 1.875, 2.25, 2.625, 3.0]
    assert all(r["branch"] == "stationary" and r["status"] == "ok" for r in rows)
    assert min(float(r["R"]) for r in rows) == pytest.approx(657.51, rel=2e-3)


def test_critical_json(tmp_path):
    out = tmp_path / "crit.json"
    assert cli.main(["critical", *CLASSICAL, "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    res = doc["result"]
    assert res["R_c"] == pytest.approx(27 * math.pi ** 4 / 4, rel=2e-3)
    assert res["k_c"] == pytest.approx(math.pi / math.sqrt(2), rel=1e-2)
    assert res["oscillatory"] is False
    assert res["wavelength"] == pytest.approx(2 * math.pi / res["k_c"])
    assert doc["config"]["suspension.V_c"] == {"value": 0.0, "defaulted": False}
    assert doc["config"]["suspension.Pr"] == {"value": 5.0, "defaulted": True}
    assert "run.workers" not in doc["config"]
    # repeated invocation is identical
    out2 = tmp_path / "crit2.json"
    assert cli.main(["critical", *CLASSICAL, "--out", str(out2)]) == 0
    assert _read(out) == _read(out2)


def test_strict_boundary_minimum(tmp_path, capsys):
    args = [*CLASSICAL, "--set", "stability.k_min=3.0", "--set", "stability.k_max=4.0",
            "--set", "stability.n_k=3"]
    assert cli.main(["critical", *args, "--out", str(tmp_path / "a.json")]) == 0
    assert "warning" in capsys.readouterr().err
    assert cli.main(["critical", *args, "--strict", "--out", str(tmp_path / "b.json")]) == 3


# ---------------------------------------------------------------- sweep

def test_sweep_ordering_and_failures(tmp_path):
    out = tmp_path / "sweep.csv"
    # V_c = 400 piles every cell against the lid and the shooting breaks down
    code = cli.main(["sweep", *CLASSICAL, "--set", "stability.n_k=3", "--set", "taxis.G_c=1.3",
                     "--axis", "V_c", "--values", "400,0", "--out", str(out)])
    rows = _csv_rows(out)
    assert [float(r["value"]) for r in rows] == [400.0, 0.0]
    assert code == cli.EXIT_PARTIAL
    assert rows[0]["status"] == "failed" and "StiffnessError" in rows[0]["diagnostic"]
    assert rows[1]["status"] == "ok" and rows[1]["k_c"]


def test_sweep_single_value_equals_critical(tmp_path):
    sweep = tmp_path / "sweep.csv"
    crit = tmp_path / "crit.json"
    assert cli.main(["sweep", *CLASSICAL, "--axis", "Le", "--values", "4",
                     "--out", str(sweep)]) == 0
    assert cli.main(["critical", *CLASSICAL, "--out", str(crit)]) == 0
    row = _csv_rows(sweep)[0]
    res = json.loads(crit.read_text())["result"]
    assert float(row["R_c"]) == res["R_c"] and float(row["k_c"]) == res["k_c"]


def test_sweep_values_kept_in_order(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    assert cli.main(["sweep", *CLASSICAL, "--set", "stability.n_k=3", "--axis", "Le",
                     "--values", "8,2,4", "--out", str(out)]) == 0
    assert [float(r["value"]) for r in _csv_rows(out)] == [8.0, 2.0, 4.0]
    assert "trend R_c" in capsys.readouterr().out


def test_sweep_rejects_bad_axis_value(capsys):
    assert cli.main(["sweep", "--axis", "theta_i", "--values", "0,95"]) == cli.EXIT_CONFIG
    assert cli.main(["sweep", "--axis", "Pr", "--values", "1"]) == cli.EXIT_CONFIG


def test_trend_summary():
    steps, flips = cli.trend_summary([0, 20, 40, 60, 80], [5, 4, 3, 2, 3])
    assert steps == ["down", "down", "down", "up"] and flips == [60]


@pytest.mark.slow
def test_outputs_independent_of_worker_count(tmp_path):
    outputs = {}
    for n in (1, 4, 8):
        a = tmp_path / f"curve{n}.csv"
        b = tmp_path / f"sweep{n}.csv"
        assert cli.main(["neutral", *CLASSICAL, "--threads", str(n), "--out", str(a)]) == 0
        assert cli.main(["sweep", *CLASSICAL, "--set", "stability.n_k=3", "--threads", str(n),
                         "--axis", "Le", "--values", "2,4", "--out", str(b)]) == 0
        outputs[n] = (_read(a), _read(b))
    assert outputs[1] == outputs[4] == outputs[8]


def test_header_has_no_execution_keys():
    cfg = RunConfig.from_text("run.workers = 8\n")
    assert not any(line.startswith("run.workers") for line in cfg.header_lines())
    assert "run.workers = 8" in cfg.to_text()


def test_parser_lists_subcommands():
    buf = io.StringIO()
    cli.build_parser().print_help(buf)
    for name in ("base", "neutral", "critical", "sweep"):
        assert name in buf.getvalue()
