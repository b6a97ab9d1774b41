import io

import pytest

from rqmcis.cli import RunConfig, diagnose, main, parse_n_grid, run
from rqmcis.estimators import RmseTable


def cfg(**kw):
    defaults = dict(
        problem="synthetic-exp",
        methods=("prioris",),
        n_grid=(32, 64, 128, 256),
        replicates=3,
        seed=11,
        figures=False,
        outdir=".",
    )
    defaults.update(kw)
    return RunConfig(**defaults)


class TestConfig:
    def test_round_trip(self):
        c = cfg(problem="logistic", methods=("odis", "lapis"), rows=100, nu=6.0)
        assert RunConfig.from_text(c.to_text()) == c

    def test_round_trip_none_rows(self):
        c = cfg(rows=None, data_path=None)
        assert RunConfig.from_text(c.to_text()) == c

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown key"):
            RunConfig.from_text("wibble = 3\n")

    def test_validation(self):
        with pytest.raises(ValueError, match="problem"):
            cfg(problem="heat-equation").validate()
        with pytest.raises(ValueError, match="method"):
            cfg(methods=("odis", "mcmc")).validate()
        with pytest.raises(ValueError, match="empty"):
            cfg(methods=()).validate()
        with pytest.raises(ValueError, match="powers of 2"):
            cfg(n_grid=(100, 200)).validate()
        with pytest.raises(ValueError, match="powers of 2"):
            cfg(n_grid=(256, 128)).validate()

    def test_parse_n_grid(self):
        assert parse_n_grid("2^7..2^10") == [128, 256, 512, 1024]
        assert parse_n_grid("128,256,512") == [128, 256, 512]
        assert parse_n_grid("2^5") == [32]


class TestRun:
    def test_writes_csv_and_report(self, tmp_path):
        out, err = io.StringIO(), io.StringIO()
        status = run(cfg(outdir=str(tmp_path)), out=out, err=err)
        assert status == 0
        csv_path = tmp_path / "synthetic-exp_gaussian_rqmc.csv"
        report = tmp_path / "synthetic-exp_gaussian_rqmc_diagnostics.txt"
        assert csv_path.exists() and report.exists()
        table = RmseTable.from_csv(csv_path)
        assert table.methods() == ["prioris"]
        assert "PASS" in report.read_text()

    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        a.mkdir(), b.mkdir()
        run(cfg(outdir=str(a)), out=io.StringIO())
        run(cfg(outdir=str(b)), out=io.StringIO())
        name = "synthetic-exp_gaussian_rqmc.csv"
        assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_zero_variance_method_reported(self, tmp_path):
        out = io.StringIO()
        status = run(cfg(methods=("odis",), outdir=str(tmp_path)), out=out)
        assert status == 0
        table = RmseTable.from_csv(tmp_path / "synthetic-exp_gaussian_rqmc.csv")
        assert all(row.rmse == 0.0 for row in table.rows)

    def test_logistic_run_emits_estimand_rows(self, tmp_path):
        config = cfg(
            problem="logistic",
            methods=("odis",),
            rows=30,
            n_grid=(32, 64),
            replicates=2,
            outdir=str(tmp_path),
        )
        assert run(config, out=io.StringIO()) == 0
        table = RmseTable.from_csv(tmp_path / "logistic30_gaussian_rqmc.csv")
        assert table.methods() == ["odis.num", "odis.den", "odis.ratio"]

    def test_positivization_demo(self, tmp_path):
        config = cfg(problem="positivization-demo", outdir=str(tmp_path))
        assert run(config, out=io.StringIO()) == 0
        text = (tmp_path / "positivization-demo_gaussian_rqmc.csv").read_text()
        assert "soft-pos" in text and "hard-pos" in text

    def test_partial_failure_keeps_other_methods(self, tmp_path):
        # raw-scale covariates underflow the likelihood under the prior, so
        # prioris fails while odis still produces rows; exit is nonzero and
        # the report enumerates the failure
        config = cfg(
            problem="logistic",
            methods=("odis", "prioris"),
            rows=100,
            standardize=False,
            n_grid=(32, 64),
            replicates=2,
            seed=3,  # all prior draws underflow the raw-scale likelihood
            outdir=str(tmp_path),
        )
        err = io.StringIO()
        status = run(config, out=io.StringIO(), err=err)
        assert status == 1
        assert "prioris" in err.getvalue()
        table = RmseTable.from_csv(tmp_path / "logistic100_gaussian_rqmc.csv")
        assert table.methods() == ["odis.num", "odis.den", "odis.ratio"]
        report = (tmp_path / "logistic100_gaussian_rqmc_diagnostics.txt").read_text()
        assert "failed methods" in report


class TestDiagnose:
    def test_bond_lapis_fails_with_scalar_eigenvalue(self):
        out = io.StringIO()
        status = diagnose(cfg(problem="bond", methods=("odis", "lapis")), out=out)
        assert status == 0
        text = out.getvalue()
        assert "FAIL" in text and "PASS" in text
        assert "classification=growth" in text
        assert "classification=decay" in text

    def test_logistic_lapis_fails(self):
        out = io.StringIO()
        config = cfg(problem="logistic", methods=("prioris", "lapis"), rows=30)
        assert diagnose(config, out=out) == 0
        text = out.getvalue()
        assert text.count("PASS") == 1
        assert text.count("FAIL") == 1


class TestMain:
    def test_run_from_argv(self, tmp_path):
        status = main(
            [
                "run", "--problem", "synthetic-exp", "--methods", "prioris",
                "--sampler", "rqmc", "--N", "2^5..2^7", "--R", "2", "--seed", "1",
                "--out", str(tmp_path), "--no-figures",
            ]
        )
        assert status == 0
        assert (tmp_path / "synthetic-exp_gaussian_rqmc.csv").exists()

    def test_config_file_with_flag_override(self, tmp_path):
        config_file = tmp_path / "run.cfg"
        config_file.write_text(cfg(replicates=2, outdir=str(tmp_path)).to_text())
        status = main(
            ["run", "--config", str(config_file), "--N", "2^5..2^6", "--no-figures"]
        )
        assert status == 0

    def test_invalid_config_errors(self, capsys):
        with pytest.raises(SystemExit):
            main(["run", "--problem", "nonsense"])

    def test_diagnose_from_argv(self):
        assert main(["diagnose", "--problem", "bond", "--methods", "lapis"]) == 0
