"""End-to-end checks of the command line: config parsing, exit codes,
output files, and the consistency between the printed summary and the
delimited output."""

import configparser
import csv
import math
import os

import numpy as np
import pytest

from momineq.cli import load_table, main, parse_config, write_config
from momineq.errors import (
    DataError,
    MissingRequired,
    NonNumericCell,
    TooFewRows,
    TypeMismatch,
    UnknownKey,
)


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def csv_dict(path):
    """Single-row CSV as a {column: string} dict."""
    header, data = read_csv(path)
    assert len(data) == 1
    return dict(zip(header, data[0]))


def report_text_values(path):
    """Key/value pairs from the aligned text summary."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("==") or line.startswith("warning:") or not line:
                continue
            key, _, rest = line.partition(" ")
            values[key] = rest.strip()
    return values


# --- config parsing -----------------------------------------------------------


class TestParseConfig:
    def test_density_defaults(self):
        cfg = parse_config("density")
        assert cfg.command == "density"
        assert cfg.dens_rows == 2
        assert cfg.dens_cols == 3
        assert cfg.dens_t is None
        assert cfg.method == "sn"
        assert cfg.alpha == 0.05

    def test_flag_overrides_file(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text(
            "[model]\nfamily = box1d\n[method]\nalpha = 0.05\nb = 77\n"
        )
        cfg = parse_config(
            "test", str(path), {("method", "alpha"): "0.2"}
        )
        assert cfg.alpha == 0.2  # the flag wins
        assert cfg.b_draws == 77  # untouched file value survives
        assert cfg.model_family == "box1d"

    def test_unknown_section(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[model]\nfamily = box1d\n[bogus]\nx = 1\n")
        with pytest.raises(UnknownKey, match="bogus"):
            parse_config("test", str(path))

    def test_unknown_key_names_full_path(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[model]\nfamily = box1d\n[method]\nbogus = 1\n")
        with pytest.raises(UnknownKey, match="method.bogus"):
            parse_config("test", str(path))

    def test_bad_float(self):
        with pytest.raises(TypeMismatch, match="method.alpha"):
            parse_config("density", None, {("method", "alpha"): "lots"})

    def test_bad_int(self):
        with pytest.raises(TypeMismatch, match="method.b"):
            parse_config("density", None, {("method", "b"): "3.5"})

    def test_bad_bool(self):
        with pytest.raises(TypeMismatch, match="run.figures"):
            parse_config("density", None, {("run", "figures"): "maybe"})

    def test_bool_spellings(self):
        for raw, expect in (("yes", True), ("0", False), ("True", True)):
            cfg = parse_config("density", None, {("run", "figures"): raw})
            assert cfg.figures is expect

    def test_free_model_param_is_float(self):
        cfg = parse_config(
            "test",
            None,
            {("model", "family"): "box1d", ("model", "mu"): "1.5"},
        )
        assert cfg.model_params == {"mu": 1.5}

    def test_free_model_param_must_be_numeric(self):
        with pytest.raises(TypeMismatch, match="model.mu"):
            parse_config(
                "test",
                None,
                {("model", "family"): "box1d", ("model", "mu"): "wide"},
            )

    def test_empty_optional_is_none(self):
        cfg = parse_config(
            "test",
            None,
            {("model", "family"): "box1d", ("method", "kappa"): ""},
        )
        assert cfg.kappa is None

    def test_alpha_out_of_range(self):
        with pytest.raises(TypeMismatch, match="method.alpha"):
            parse_config("density", None, {("method", "alpha"): "1.5"})

    def test_test_needs_a_model(self):
        with pytest.raises(MissingRequired, match="model.family"):
            parse_config("test")

    def test_simulate_needs_a_dgp(self):
        with pytest.raises(MissingRequired, match="simulate.dgp"):
            parse_config("simulate")

    def test_cs_rejects_affine_null(self):
        with pytest.raises(TypeMismatch, match="null.type"):
            parse_config(
                "cs",
                None,
                {("model", "family"): "box1d", ("null", "type"): "affine"},
            )

    def test_cs_grid_must_be_ordered(self):
        with pytest.raises(TypeMismatch, match="cs.lo"):
            parse_config(
                "cs",
                None,
                {
                    ("model", "family"): "box1d",
                    ("cs", "lo"): "2",
                    ("cs", "hi"): "-2",
                },
            )

    def test_missing_data_file(self):
        with pytest.raises(DataError, match="data.path"):
            parse_config(
                "test",
                None,
                {("model", "family"): "box1d", ("data", "path"): "no/such.csv"},
            )

    def test_malformed_ini(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("family = box1d\n")  # key before any section
        with pytest.raises(TypeMismatch, match="config file"):
            parse_config("test", str(path))

    def test_missing_config_file(self):
        with pytest.raises(DataError, match="cannot read config file"):
            parse_config("test", "no/such.ini")


class TestConfigRoundTrip:
    def test_echo_parses_back_byte_identical(self, tmp_path):
        cfg = parse_config(
            "cs",
            None,
            {
                ("model", "family"): "box1d",
                ("model", "mu"): "0.25",
                ("data", "n"): "120",
                ("method", "name"): "mr",
                ("method", "kappa"): "3.5",
                ("cs", "lo"): "-0.75",
                ("cs", "hi"): "1.25",
                ("cs", "points"): "7",
                ("run", "seed"): "42",
            },
        )
        first = tmp_path / "echo1.ini"
        second = tmp_path / "echo2.ini"
        write_config(cfg, str(first))
        cfg2 = parse_config("cs", str(first))
        write_config(cfg2, str(second))
        assert first.read_bytes() == second.read_bytes()
        assert cfg2 == cfg

    def test_echo_records_command_and_params(self, tmp_path):
        cfg = parse_config(
            "test",
            None,
            {("model", "family"): "box1d", ("model", "sigma"): "2"},
        )
        path = tmp_path / "echo.ini"
        write_config(cfg, str(path))
        parser = configparser.ConfigParser(interpolation=None)
        parser.read(path)
        assert parser.get("run", "command") == "test"
        assert parser.get("model", "sigma") == "2"
        assert parser.get("method", "kappa") == ""  # unset optional


# --- exit codes ----------------------------------------------------------------


class TestExitCodes:
    def test_no_arguments_prints_usage(self, capsys):
        assert main([]) == 2
        assert "usage" in capsys.readouterr().err

    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0
        assert "momineq" in capsys.readouterr().out

    def test_unknown_flag(self, capsys):
        assert main(["test", "--frobnicate", "1"]) == 2

    def test_config_error_is_2(self, capsys):
        assert main(["test"]) == 2
        assert "config error" in capsys.readouterr().err

    def test_missing_data_is_3(self, capsys, tmp_path):
        code = main(
            [
                "test",
                "--family",
                "box1d",
                "--data",
                str(tmp_path / "absent.csv"),
                "--out",
                str(tmp_path / "r"),
            ]
        )
        assert code == 3
        assert "data error" in capsys.readouterr().err

    def test_runtime_momineq_error_is_2(self, capsys, tmp_path):
        code = main(
            [
                "test",
                "--family",
                "box1d",
                "--method",
                "pr",
                "--kappa",
                "0.5",
                "--n",
                "40",
                "--b",
                "40",
                "--out",
                str(tmp_path / "r"),
                "--no-figures",
            ]
        )
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_unknown_dgp_is_2(self, capsys, tmp_path):
        code = main(
            [
                "simulate",
                "--dgp",
                "mystery",
                "--reps",
                "2",
                "--n",
                "40",
                "--out",
                str(tmp_path / "r"),
                "--no-figures",
            ]
        )
        assert code == 2
        assert "simulate.dgp" in capsys.readouterr().err


# --- test command ----------------------------------------------------------------


class TestTestCommand:
    def run(self, tmp_path, *extra, figures=False):
        out = str(tmp_path / "run")
        args = [
            "test",
            "--family",
            "box1d",
            "--n",
            "80",
            "--method",
            "sn",
            "--alpha",
            "0.1",
            "--b",
            "50",
            "--seed",
            "3",
            "--out",
            out,
        ]
        if not figures:
            args.append("--no-figures")
        args += list(extra)
        assert main(args) == 0
        return out

    def test_outputs_exist(self, tmp_path, capsys):
        out = self.run(tmp_path)
        for suffix in ("_report.csv", "_report.txt", "_config.txt"):
            assert os.path.exists(out + suffix)
        assert not os.path.exists(out + "_stud.png")
        assert "test summary" in capsys.readouterr().out

    def test_report_row(self, tmp_path):
        out = self.run(tmp_path)
        row = csv_dict(out + "_report.csv")
        assert row["method"] == "sn"
        assert float(row["alpha"]) == 0.1
        assert row["n"] == "80"
        assert row["b_draws"] == "50"
        assert row["seed"] == "3"
        stat = float(row["statistic"])
        crit = float(row["critical_value"])
        assert math.isfinite(stat) and crit > 0
        assert row["reject"] == ("1" if stat > crit else "0")
        assert "theta_hat_1" in row and "eta_1" in row
        assert float(row["eta_1"]) == 0.0

    def test_text_matches_csv(self, tmp_path):
        # no display-only numbers: the text block and the CSV row carry
        # exactly the same values, formatted the same way
        out = self.run(tmp_path)
        row = csv_dict(out + "_report.csv")
        text = report_text_values(out + "_report.txt")
        for key, value in text.items():
            if key == "command":
                continue
            assert row[key] == value
        for key, value in row.items():
            assert text[key] == value

    def test_figure_when_enabled(self, tmp_path):
        out = self.run(tmp_path, figures=True)
        assert os.path.getsize(out + "_stud.png") > 0

    def test_seed_changes_bootstrap_methods_only(self, tmp_path):
        a = csv_dict(self.run(tmp_path / "a") + "_report.csv")
        b = csv_dict(self.run(tmp_path / "b") + "_report.csv")
        assert a == b  # same seed, same run

    def test_affine_null(self, tmp_path):
        out = str(tmp_path / "aff")
        code = main(
            [
                "test",
                "--family",
                "failcase",
                "--null-type",
                "affine",
                "--a-matrix",
                "1 0",
                "--rhs",
                "0",
                "--n",
                "60",
                "--method",
                "sn",
                "--b",
                "40",
                "--out",
                out,
                "--no-figures",
            ]
        )
        assert code == 0
        row = csv_dict(out + "_report.csv")
        assert "theta_hat_2" in row  # two-dimensional design


# --- cs command ----------------------------------------------------------------


class TestCsCommand:
    def run_cs(self, out, *extra):
        args = [
            "cs",
            "--family",
            "box1d",
            "--n",
            "60",
            "--method",
            "sn",
            "--alpha",
            "0.1",
            "--b",
            "40",
            "--lo",
            "-1",
            "--hi",
            "1",
            "--points",
            "5",
            "--seed",
            "2",
            "--out",
            out,
            "--no-figures",
        ] + list(extra)
        assert main(args) == 0

    def test_force_accept_covers_grid(self, tmp_path):
        out = str(tmp_path / "cs")
        self.run_cs(out, "--force-critical", "inf")
        header, data = read_csv(out + "_cs.csv")
        assert header == ["eta", "statistic", "critical_value", "accepted", "infeasible"]
        assert len(data) == 5
        assert all(r[3] == "1" for r in data)
        summary = csv_dict(out + "_cs_summary.csv")
        assert float(summary["lower"]) == -1.0
        assert float(summary["upper"]) == 1.0
        assert summary["contiguous"] == "1"
        assert summary["empty"] == "0"

    def test_grid_column_is_the_requested_grid(self, tmp_path):
        out = str(tmp_path / "cs")
        self.run_cs(out)
        _, data = read_csv(out + "_cs.csv")
        eta = [float(r[0]) for r in data]
        assert eta == pytest.approx(list(np.linspace(-1.0, 1.0, 5)))

    def test_threads_do_not_change_bytes(self, tmp_path):
        out1 = str(tmp_path / "one")
        out2 = str(tmp_path / "two")
        self.run_cs(out1, "--threads", "1")
        self.run_cs(out2, "--threads", "2")
        for suffix in ("_cs.csv", "_cs_summary.csv"):
            with open(out1 + suffix, "rb") as fh:
                first = fh.read()
            with open(out2 + suffix, "rb") as fh:
                second = fh.read()
            assert first == second

    def test_figure_when_enabled(self, tmp_path):
        out = str(tmp_path / "cs")
        args = [
            "cs",
            "--family",
            "box1d",
            "--n",
            "60",
            "--method",
            "sn",
            "--b",
            "40",
            "--points",
            "3",
            "--out",
            out,
        ]
        assert main(args) == 0
        assert os.path.getsize(out + "_cs.png") > 0


# --- simulate command ------------------------------------------------------------


class TestSimulateCommand:
    def test_reps_and_summary_agree(self, tmp_path, capsys):
        out = str(tmp_path / "sim")
        code = main(
            [
                "simulate",
                "--dgp",
                "failcase",
                "--method",
                "naive",
                "--n",
                "40",
                "--reps",
                "6",
                "--b",
                "60",
                "--alpha",
                "0.1",
                "--seed",
                "11",
                "--out",
                out,
                "--no-figures",
            ]
        )
        assert code == 0
        header, data = read_csv(out + "_reps.csv")
        assert header == ["rep", "rep_seed", "statistic", "critical_value", "reject"]
        assert len(data) == 6
        assert [r[0] for r in data] == [str(i) for i in range(6)]
        rate = sum(r[4] == "1" for r in data) / 6.0

        summary = csv_dict(out + "_summary.csv")
        assert summary["dgp"] == "failcase"
        assert summary["method"] == "naive"
        assert float(summary["rejection_rate"]) == pytest.approx(rate)
        expect_se = math.sqrt(rate * (1 - rate) / 6.0)
        assert float(summary["mc_stderr"]) == pytest.approx(expect_se)
        stats = sorted(float(r[2]) for r in data)
        assert float(summary["median_statistic"]) == pytest.approx(
            (stats[2] + stats[3]) / 2
        )
        err = capsys.readouterr().err
        assert "NAIVE" in err  # invalid-method warning reaches the console

    def test_eta_flag_moves_the_null(self, tmp_path):
        out = str(tmp_path / "sim")
        code = main(
            [
                "simulate",
                "--family",
                "box1d",
                "--method",
                "sn",
                "--n",
                "50",
                "--reps",
                "3",
                "--b",
                "30",
                "--eta",
                "-0.4",
                "--out",
                out,
                "--no-figures",
            ]
        )
        assert code == 0
        summary = csv_dict(out + "_summary.csv")
        assert float(summary["eta"]) == -0.4
        assert summary["reps"] == "3"


# --- tune command ----------------------------------------------------------------


class TestTuneCommand:
    def test_outputs(self, tmp_path):
        out = str(tmp_path / "tune")
        code = main(
            [
                "tune",
                "--family",
                "box1d",
                "--n",
                "80",
                "--method",
                "mr",
                "--b",
                "50",
                "--wbar-draws",
                "60",
                "--scan-draws",
                "60",
                "--seed",
                "5",
                "--out",
                out,
                "--no-figures",
            ]
        )
        assert code == 0
        row = csv_dict(out + "_tuning.csv")
        n = 80
        assert float(row["wbar"]) >= 0
        assert float(row["m_n"]) == pytest.approx(
            float(row["wbar"]) * math.log(n), rel=1e-12
        )
        assert float(row["delta_floor"]) == pytest.approx(1 / math.sqrt(n))
        assert float(row["diagnostic"]) > 0

        header, data = read_csv(out + "_kappa_scan.csv")
        assert header == ["kappa", "critical_value", "anti_concentration"]
        grid = [float(r[0]) for r in data]
        assert grid[0] == 1.0 and grid == sorted(grid)
        if row["kappa_satisfied"] == "1":
            assert float(row["kappa_n"]) in grid
        else:
            assert float(row["kappa_n"]) == pytest.approx(
                math.sqrt(n) / math.log(n)
            )
        assert not os.path.exists(out + "_kappa.png")


# --- density command -------------------------------------------------------------


class TestDensityCommand:
    def test_point_mode(self, tmp_path, capsys):
        out = str(tmp_path / "dens")
        assert main(["density", "--N", "2", "--p", "3", "--t", "0", "--out", out]) == 0
        assert "0.523611" in capsys.readouterr().out
        row = csv_dict(out + "_density.csv")
        assert float(row["t"]) == 0.0
        assert float(row["F"]) == pytest.approx(0.234375, abs=1e-12)
        bounds = csv_dict(out + "_bounds.csv")
        assert bounds["n_rows"] == "2" and bounds["p_cols"] == "3"
        assert bounds["points"] == "1"
        assert not os.path.exists(out + "_density.png")  # point mode plots nothing

    def test_grid_mode(self, tmp_path):
        out = str(tmp_path / "dens")
        code = main(
            [
                "density",
                "--N",
                "2",
                "--p",
                "3",
                "--t-lo",
                "-3",
                "--t-hi",
                "3",
                "--points",
                "9",
                "--out",
                out,
                "--no-figures",
            ]
        )
        assert code == 0
        header, data = read_csv(out + "_density.csv")
        assert header == ["t", "f", "F"]
        assert len(data) == 9
        big_f = [float(r[2]) for r in data]
        assert big_f == sorted(big_f)  # the CDF column is monotone
        assert not os.path.exists(out + "_density_mc.csv")

    def test_grid_mode_with_mc_overlay(self, tmp_path):
        out = str(tmp_path / "dens")
        code = main(
            [
                "density",
                "--points",
                "9",
                "--mc-draws",
                "500",
                "--seed",
                "4",
                "--out",
                out,
            ]
        )
        assert code == 0
        header, data = read_csv(out + "_density_mc.csv")
        assert header == ["t", "f_mc"]
        assert len(data) == 9
        assert os.path.getsize(out + "_density.png") > 0


# --- tabulated models ------------------------------------------------------------


def write_table(path, thetas=(0.0, 1.0), n=25, seed=0):
    rng = np.random.default_rng(seed)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["point", "theta_1", "m_1", "m_2"])
        for k, theta in enumerate(thetas):
            draws = rng.normal(size=(n, 2))
            for i in range(n):
                writer.writerow(
                    [f"pt{k}", theta, theta + draws[i, 0], draws[i, 1] - theta]
                )
    return str(path)


class TestLoadTable:
    def test_happy_path(self, tmp_path):
        path = write_table(tmp_path / "tab.csv")
        model, sample, grid = load_table(path)
        assert model.d_theta == 1
        assert model.p == 2
        assert sample.n == 25
        assert grid.shape == (2, 1)
        block = model.matrix_fn(sample.rows, np.array([1.0]))
        assert block.shape == (25, 2)
        with pytest.raises(ValueError, match="not a tabulated grid point"):
            model.matrix_fn(sample.rows, np.array([0.5]))

    def test_box_spans_the_grid(self, tmp_path):
        path = write_table(tmp_path / "tab.csv", thetas=(-2.0, 0.5, 3.0))
        model, _, _ = load_table(path)
        assert model.theta_box[0, 0] == -2.0
        assert model.theta_box[0, 1] == 3.0

    def test_missing_point_column(self, tmp_path):
        path = tmp_path / "tab.csv"
        path.write_text("theta_1,m_1\n0,1\n0,2\n")
        with pytest.raises(DataError, match="point"):
            load_table(str(path))

    def test_missing_theta_columns(self, tmp_path):
        path = tmp_path / "tab.csv"
        path.write_text("point,m_1\na,1\na,2\n")
        with pytest.raises(DataError, match="theta_1"):
            load_table(str(path))

    def test_missing_moment_columns(self, tmp_path):
        path = tmp_path / "tab.csv"
        path.write_text("point,theta_1\na,0\na,0\n")
        with pytest.raises(DataError, match="m_1"):
            load_table(str(path))

    def test_ragged_groups(self, tmp_path):
        path = tmp_path / "tab.csv"
        path.write_text(
            "point,theta_1,m_1\na,0,1\na,0,2\na,0,3\nb,1,4\nb,1,5\n"
        )
        with pytest.raises(DataError, match="unequal row counts"):
            load_table(str(path))

    def test_theta_varies_within_a_point(self, tmp_path):
        path = tmp_path / "tab.csv"
        path.write_text("point,theta_1,m_1\na,0,1\na,0.5,2\n")
        with pytest.raises(DataError, match="varying theta"):
            load_table(str(path))

    def test_duplicate_theta_across_points(self, tmp_path):
        path = tmp_path / "tab.csv"
        path.write_text("point,theta_1,m_1\na,0,1\na,0,2\nb,0,3\nb,0,4\n")
        with pytest.raises(DataError, match="repeats"):
            load_table(str(path))

    def test_single_row_per_point(self, tmp_path):
        path = tmp_path / "tab.csv"
        path.write_text("point,theta_1,m_1\na,0,1\nb,1,2\n")
        with pytest.raises(TooFewRows):
            load_table(str(path))

    def test_non_numeric_cell(self, tmp_path):
        path = tmp_path / "tab.csv"
        path.write_text("point,theta_1,m_1\na,0,1\na,0,soup\n")
        with pytest.raises(NonNumericCell, match="m_1"):
            load_table(str(path))

    def test_empty_file(self, tmp_path):
        path = tmp_path / "tab.csv"
        path.write_text("")
        with pytest.raises(TooFewRows):
            load_table(str(path))


class TestTabulatedRuns:
    def test_test_command(self, tmp_path):
        table = write_table(tmp_path / "tab.csv")
        out = str(tmp_path / "run")
        code = main(
            [
                "test",
                "--table",
                table,
                "--eta",
                "0",
                "--method",
                "sn",
                "--b",
                "40",
                "--out",
                out,
                "--no-figures",
            ]
        )
        assert code == 0
        row = csv_dict(out + "_report.csv")
        assert float(row["eta_1"]) == 0.0
        assert float(row["theta_hat_1"]) == 0.0  # snapped to the grid

    def test_eta_off_the_grid_fails(self, tmp_path, capsys):
        table = write_table(tmp_path / "tab.csv")
        out = str(tmp_path / "run")
        code = main(
            [
                "test",
                "--table",
                table,
                "--eta",
                "0.5",
                "--method",
                "sn",
                "--out",
                out,
                "--no-figures",
            ]
        )
        assert code == 2
        assert "no tabulated point" in capsys.readouterr().err

    def test_cs_enumerates_grid_values(self, tmp_path):
        table = write_table(tmp_path / "tab.csv", thetas=(0.0, 0.5, 1.0))
        out = str(tmp_path / "run")
        code = main(
            [
                "cs",
                "--table",
                table,
                "--method",
                "sn",
                "--b",
                "40",
                "--force-critical",
                "inf",
                "--out",
                out,
                "--no-figures",
            ]
        )
        assert code == 0
        _, data = read_csv(out + "_cs.csv")
        assert [float(r[0]) for r in data] == [0.0, 0.5, 1.0]
        summary = csv_dict(out + "_cs_summary.csv")
        assert float(summary["lower"]) == 0.0
        assert float(summary["upper"]) == 1.0
        # degenerate brackets: the grid itself is the resolution
        assert float(summary["lower_bracket_lo"]) == 0.0
        assert float(summary["lower_bracket_hi"]) == 0.0


# --- config echo through the real entry point -------------------------------------


class TestConfigEcho:
    def test_rerun_from_echoed_config(self, tmp_path):
        out1 = str(tmp_path / "first")
        args = [
            "test",
            "--family",
            "box1d",
            "--n",
            "60",
            "--method",
            "dr",
            "--alpha",
            "0.1",
            "--b",
            "60",
            "--seed",
            "9",
            "--out",
            out1,
            "--no-figures",
        ]
        assert main(args) == 0
        out2 = str(tmp_path / "second")
        code = main(
            ["test", "--config", out1 + "_config.txt", "--out", out2]
        )
        assert code == 0
        with open(out1 + "_report.csv", "rb") as fh:
            first = fh.read()
        with open(out2 + "_report.csv", "rb") as fh:
            second = fh.read()
        assert first == second  # bit-identical rerun from the echo
