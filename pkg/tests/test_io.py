import math

import numpy as np
import pytest

from seqgini import report
from seqgini.config import RunConfig, build_config, read_config_file
from seqgini.errors import ParameterError


def test_defaults_and_spec():
    cfg = build_config(environ={})
    assert (cfg.alpha, cfg.omega, cfg.delta, cfg.k, cfg.reps) == (0.05, 0.015, 2.0, 2, 500)
    spec = cfg.population_spec()
    assert spec.strata_sizes == (750, 750) and spec.household_range == (50, 150)
    assert spec.law.family == "gamma"


def test_precedence_file_env_flag(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[run]\nalpha = 0.1 ; comment\nworkers = 2\nseed = 5\n"
                   "[population]\ndist = pareto:20000,5\nstrata = 40,60\n"
                   "[output]\nformat = delimited\n")
    vals = read_config_file(ini)
    assert vals == {"alpha": 0.1, "workers": 2, "seed": 5, "dist": "pareto:20000,5",
                    "strata": "40,60", "format": "delimited"}
    assert build_config(vals, environ={}).workers == 2
    assert build_config(vals, environ={"SEQGINI_WORKERS": "4"}).workers == 4
    cfg = build_config(vals, {"workers": 8, "alpha": None, "seed": 6}, environ={"SEQGINI_WORKERS": "4"})
    assert (cfg.workers, cfg.alpha, cfg.seed) == (8, 0.1, 6)


def test_survey_section_maps_households(tmp_path):
    ini = tmp_path / "s.ini"
    ini.write_text("[survey]\nframe = f.csv\nhouseholds = h.csv\n")
    cfg = build_config(read_config_file(ini), environ={})
    assert cfg.uses_survey and cfg.households_file == "h.csv"
    with pytest.raises(ParameterError):
        cfg.population_spec()


@pytest.mark.parametrize("text", [
    "[bogus]\nx = 1\n", "[run]\nbogus = 1\n", "[run]\nalpha = abc\n", "no section\n",
])
def test_bad_config_files(tmp_path, text):
    ini = tmp_path / "bad.ini"
    ini.write_text(text)
    with pytest.raises(ParameterError):
        read_config_file(ini)


def test_config_validation():
    for bad in (dict(procedure="x"), dict(format="json"), dict(alpha=0), dict(omega=-1),
                dict(reps=0), dict(frame="a.csv")):
        with pytest.raises(ParameterError):
            RunConfig(**bad)
    with pytest.raises(ParameterError):
        build_config(environ={"SEQGINI_WORKERS": "many"})
    with pytest.raises(ParameterError):
        build_config({"strata": "10.5,3"}, environ={}).population_spec()


ROWS = [
    dict(alpha=0.05, omega=0.015, delta=2.0, m=41, m_s=(21, 21), realized=42),
    dict(alpha=0.1, omega=1 / 3, delta=0.8, m=7, m_s=(4, 3), realized=7),
]


def test_fmt_value():
    assert report.fmt_value(True) == "1" and report.fmt_value(np.bool_(False)) == "0"
    assert report.fmt_value(np.int64(12)) == "12"
    assert report.fmt_value(1 / 3) == "0.333333"
    assert report.fmt_value(123456789.0) == "1.23457e+08"
    assert report.fmt_value(float("nan")) == "nan"
    assert report.fmt_value((1, 2.5)) == "1;2.5"


def test_delimited_round_trip_at_printed_precision(tmp_path):
    path = report.write_report(report.PILOT_COLUMNS, ROWS, tmp_path / "sub" / "p.csv", "delimited")
    back = report.read_delimited(path)
    assert [list(r) for r in back] == [list(report.PILOT_COLUMNS)] * 2
    for got, want in zip(back, ROWS):
        for c in ("alpha", "omega", "delta"):
            assert float(got[c]) == pytest.approx(want[c], rel=5e-6)
            assert float(got[c]) == float(report.fmt_value(want[c]))
        assert int(got["realized"]) == want["realized"]
        assert tuple(int(v) for v in got["m_s"].split(";")) == want["m_s"]


def test_table_and_delimited_carry_identical_numbers():
    table = report.render(report.PILOT_COLUMNS, ROWS, "table").splitlines()
    delim = report.render(report.PILOT_COLUMNS, ROWS, "delimited").splitlines()
    assert table[0].split() == delim[0].split(",")
    for t, d in zip(table[2:], delim[1:]):
        assert t.split() == d.split(",")
    with pytest.raises(report.ReportError):
        report.render(report.PILOT_COLUMNS, ROWS, "json")


def test_one_row_run_table():
    row = dict(source="x", procedure="two-stage", H=10, final_n=4, pilot=4, g_hat=0.3, se=0.0,
               ci_low=0.3, ci_high=0.3, width=0.0, hit_cap=False)
    lines = report.render(report.RUN_COLUMNS, [row], "table").splitlines()
    assert len(lines) == 3 and lines[2].split()[-1] == "0"


def test_unwritable_report_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(report.ReportError):
        report.write_report(report.PILOT_COLUMNS, ROWS, blocker / "p.csv", "delimited")


def test_mc_row_covers_every_column():
    class R:
        pass
    r = R()
    for c in report.MC_COLUMNS:
        setattr(r, c, math.pi)
    assert list(report.mc_row(r)) == list(report.MC_COLUMNS)
