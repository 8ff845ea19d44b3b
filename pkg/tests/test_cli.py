import json

import numpy as np
import pytest

from igfem.cli import (ConvergenceReport, ExperimentConfig, PROBLEMS, emit_report,
                       main, fixed_sci, run_experiment, _parse_levels)


@pytest.mark.parametrize("value,expected", [
    (6.14e-4, "0.614E-03"),
    (0.499e-1, "0.499E-01"),
    (1.0, "0.100E+01"),
    (0.118e-9, "0.118E-09"),
    (123.4, "0.123E+03"),
    (0.0, "0.000E+00"),
    (-6.14e-4, "-0.614E-03"),
    (9.999e-5, "0.100E-03"),   # mantissa rounding carries into the exponent
    (0.1, "0.100E+00"),
])
def test_fixed_sci(value, expected):
    assert fixed_sci(value) == expected


def test_fixed_sci_round_trip_magnitude():
    rng = np.random.default_rng(0)
    for _ in range(200):
        v = 10.0 ** rng.uniform(-12, 3)
        s = fixed_sci(v)
        assert abs(float(s) - v) <= 5.2e-3 * v   # 3 significant digits
        mant = float(s.split("E")[0])
        assert 0.1 <= abs(mant) < 1.0


def test_sine_problem_consistency():
    # f must equal -Lap u; check by finite differences
    pr = PROBLEMS["sine"]
    rng = np.random.default_rng(1)
    for x, y in rng.uniform(0.1, 0.9, size=(10, 2)):
        h = 1e-5
        lap = (pr.u(x + h, y) + pr.u(x - h, y) + pr.u(x, y + h) + pr.u(x, y - h)
               - 4 * pr.u(x, y)) / h ** 2
        assert -lap == pytest.approx(pr.f(x, y), rel=1e-5)
        g = pr.grad(x, y)
        gx = (pr.u(x + h, y) - pr.u(x - h, y)) / (2 * h)
        assert g[0] == pytest.approx(gx, rel=1e-7, abs=1e-9)


def test_parse_levels():
    assert _parse_levels("4..7") == (4, 5, 6, 7)
    assert _parse_levels("3") == (3,)


def test_config_validation():
    cfg = ExperimentConfig(family="p2c_interp", levels=(1, 2))
    cfg.validate()
    assert cfg.degree == 2
    with pytest.raises(ValueError):
        ExperimentConfig(family="p2c_interp", levels=()).validate()
    with pytest.raises(ValueError):
        ExperimentConfig(family="p2c_interp", levels=(3, 2)).validate()
    with pytest.raises(ValueError):
        ExperimentConfig(family="p2c_interp", levels=(1, 10)).validate()
    with pytest.raises(ValueError):
        ExperimentConfig(family="pk_interp", degree=3, levels=(1,)).validate()
    with pytest.raises(ValueError):
        ExperimentConfig(family="p2c_interp", levels=(1,), problem="bogus").validate()
    with pytest.raises(ValueError):
        ExperimentConfig(family="p2nc_std", levels=(1,), compare=True).validate()
    with pytest.raises(ValueError):
        ExperimentConfig(family="p2c_interp", levels=(1,), output_format="xml").validate()


@pytest.fixture(scope="module")
def small_report():
    cfg = ExperimentConfig(family="p3_interp", levels=(1, 2, 3), compare=True)
    return run_experiment(cfg)


def test_report_rows_and_orders(small_report):
    rows = small_report.rows
    assert [r["level"] for r in rows] == [1, 2, 3]
    assert rows[0]["order_l2"] is None
    assert rows[1]["order_l2"] is not None
    assert rows[1]["h"] == 0.5
    assert rows[2]["l2_ih"] < rows[1]["l2_ih"] < rows[0]["l2_ih"]
    # P3 converges at fourth order in L2
    assert rows[2]["order_l2"] == pytest.approx(4.0, abs=0.6)
    assert small_report.baseline_rows is not None


def test_json_round_trip(small_report):
    payload = emit_report(small_report, "json", None)
    parsed = ConvergenceReport.from_dict(json.loads(payload))
    assert parsed == small_report


def test_csv_shape(small_report):
    payload = emit_report(small_report, "csv", None)
    lines = payload.strip().split("\n")
    assert len(lines) == 1 + 2 * 3  # header + (primary + baseline) * levels
    assert lines[0].startswith("family,level,h,")


def test_text_report_shape(small_report):
    text = emit_report(small_report, "text", None)
    assert "0." in text and "E-0" in text
    lines = [l for l in text.split("\n") if l.strip().startswith(("1", "2", "3"))]
    assert len(lines) == 3


def test_empty_rows_report_is_valid():
    cfg = ExperimentConfig(family="p3_interp", levels=(1,))
    cfg.validate()
    rep = ConvergenceReport(config=cfg, rows=[])
    for fmt in ("text", "csv", "json"):
        payload = emit_report(rep, fmt, None)
        assert isinstance(payload, str) and payload


def test_reports_byte_identical_across_runs():
    cfg1 = ExperimentConfig(family="p2nc_interp", levels=(1, 2))
    cfg2 = ExperimentConfig(family="p2nc_interp", levels=(1, 2))
    r1 = emit_report(run_experiment(cfg1), "json", None)
    r2 = emit_report(run_experiment(cfg2), "json", None)
    assert r1 == r2


def test_compare_does_not_change_primary_rows():
    base = run_experiment(ExperimentConfig(family="p3_interp", levels=(1, 2)))
    both = run_experiment(ExperimentConfig(family="p3_interp", levels=(1, 2),
                                           compare=True))
    assert base.rows == both.rows


def test_parallel_matches_serial():
    serial = run_experiment(ExperimentConfig(family="p3_interp", levels=(1, 2)))
    threaded = run_experiment(ExperimentConfig(family="p3_interp", levels=(1, 2),
                                               parallel=True))
    assert serial.rows == threaded.rows


def test_condition_flag_adds_estimates():
    rep = run_experiment(ExperimentConfig(family="p3_interp", levels=(2,),
                                          condition=True))
    row = rep.rows[0]
    assert "cond_est" in row and row["cond_est"] > 1.0
    assert row["lambda_max"] > row["lambda_min"] > 0.0


def test_main_exit_codes(tmp_path):
    out = tmp_path / "report.json"
    code = main(["--family", "p3_interp", "--levels", "1..2",
                 "--format", "json", "--out", str(out)])
    assert code == 0
    data = json.loads(out.read_text())
    assert data["config"]["family"] == "p3_interp"
    assert len(data["rows"]) == 2

    assert main(["--family", "pk_interp", "--levels", "1..2"]) == 2  # no degree
    assert main(["--family", "p3_interp", "--levels", "7..5"]) == 2
    assert main(["--family", "p3_interp", "--levels", "1..2",
                 "--out", "/nonexistent-dir/x/report.txt"]) == 2
