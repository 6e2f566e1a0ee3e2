import json

import pytest

from advopt.cli import main, parse_config_file
from advopt.harness import ExperimentConfig, run_experiment, sample_seed, splitmix64
from advopt.oracles import SyntheticDataset


class TestSeedSplitting:
    def test_splitmix64_reference_values(self):
        # first outputs of the splitmix64 stream seeded with 0
        assert splitmix64(0) == 0xE220A8397B1DCDAF
        assert splitmix64(0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4

    def test_sample_seeds_distinct_and_stable(self):
        seeds = [sample_seed(7, i) for i in range(1000)]
        assert len(set(seeds)) == 1000
        assert seeds[0] == sample_seed(7, 0)

    def test_wraparound_is_defined(self):
        assert 0 <= sample_seed(2**64 - 1, 5) < 2**64


class TestConfigValidation:
    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="kind"):
            ExperimentConfig(kind="fuzz", out="x.csv")

    def test_unknown_method_names_valid_ones(self):
        with pytest.raises(ValueError, match="valid methods"):
            ExperimentConfig(kind="attack", out="x.csv", methods=["sgd"])

    def test_out_required_for_file_kinds(self):
        with pytest.raises(ValueError, match="output path"):
            ExperimentConfig(kind="attack")

    def test_verify_does_not_need_out(self):
        ExperimentConfig(kind="verify")

    def test_sample_budget_checked(self):
        with pytest.raises(ValueError, match="train_samples"):
            ExperimentConfig(kind="attack", out="x.csv", samples=50, train_samples=10)

    def test_horizons_must_increase(self):
        with pytest.raises(ValueError, match="horizons"):
            ExperimentConfig(kind="convergence", out="x.csv", horizons=[100, 100, 400])


def small_attack_cfg(out, **overrides):
    base = dict(kind="attack", out=str(out), methods=["adami", "pgd"], seed=3,
                epsilon=0.1, steps=5, samples=25, train_samples=150, features=8,
                classes=3)
    base.update(overrides)
    return ExperimentConfig(**base)


class TestAttackExperiments:
    def test_csv_schema_and_json_echo(self, tmp_path, capsys):
        cfg = small_attack_cfg(tmp_path / "res.csv")
        run_experiment(cfg)
        lines = (tmp_path / "res.csv").read_text().splitlines()
        assert lines[0] == ("method,beta,seed,success_rate,ald_inf,final_loss,"
                            "gap_avg_iterate,wall_ms")
        assert len(lines) == 3  # two methods, one row each
        meta = json.loads((tmp_path / "res.json").read_text())
        assert meta["config"]["seed"] == 3
        assert meta["config"]["kind"] == "attack"
        assert "version" in meta
        for row in lines[1:]:
            cells = row.split(",")
            assert float(cells[4]) <= cfg.epsilon + 1e-12  # distortion column

    def test_rerun_bytes_identical(self, tmp_path, capsys):
        cfg = small_attack_cfg(tmp_path / "res.csv")
        run_experiment(cfg)
        first = ((tmp_path / "res.csv").read_bytes(), (tmp_path / "res.json").read_bytes())
        run_experiment(cfg)
        second = ((tmp_path / "res.csv").read_bytes(), (tmp_path / "res.json").read_bytes())
        assert first == second

    def test_parallel_matches_serial(self, tmp_path, capsys, monkeypatch):
        cfg = small_attack_cfg(tmp_path / "res.csv")
        run_experiment(cfg)
        serial = (tmp_path / "res.csv").read_bytes()
        monkeypatch.setenv("ADVOPT_THREADS", "4")
        run_experiment(cfg)
        assert (tmp_path / "res.csv").read_bytes() == serial

    def test_beta_sweep_one_row_per_beta(self, tmp_path, capsys):
        cfg = ExperimentConfig(kind="beta_sweep", out=str(tmp_path / "sweep.csv"),
                               methods=["adami"], seed=1, epsilon=0.1, steps=5,
                               samples=20, train_samples=100, features=6, classes=3,
                               betas=[0.0, 0.5, 0.9])
        run_experiment(cfg)
        lines = (tmp_path / "sweep.csv").read_text().splitlines()
        assert len(lines) == 4
        betas = [float(line.split(",")[1]) for line in lines[1:]]
        assert betas == sorted(betas) == [0.0, 0.5, 0.9]

    def test_transfer_reports_both_rates(self, tmp_path, capsys):
        cfg = ExperimentConfig(kind="transfer", out=str(tmp_path / "tr.csv"),
                               methods=["mifgsm"], seed=2, epsilon=0.1, steps=5,
                               samples=20, train_samples=150, features=8, classes=3)
        summary = run_experiment(cfg)
        entry = summary["metrics"]["mifgsm[beta=0.9]"]
        assert "white_box_success" in entry and "transfer_success" in entry

    def test_trace_request_stores_curves(self, tmp_path, capsys):
        cfg = small_attack_cfg(tmp_path / "res.csv", methods=["adami"], trace=True)
        run_experiment(cfg)
        meta = json.loads((tmp_path / "res.json").read_text())
        curve = meta["metrics"]["adami[beta=0.9]"]["trace"]["mean_loss"]
        assert len(curve) == cfg.steps

    def test_dataset_csv_import(self, tmp_path, capsys):
        ds = SyntheticDataset.blobs(9, 120, 6, 3)
        path = tmp_path / "data.csv"
        ds.to_csv(path)
        cfg = ExperimentConfig(kind="attack", out=str(tmp_path / "res.csv"),
                               methods=["fgsm"], seed=0, epsilon=0.1, steps=3,
                               samples=30, train_samples=120, dataset_csv=str(path))
        summary = run_experiment(cfg)
        assert summary["ok"]


class TestConvergenceExperiment:
    def test_rows_and_fit(self, tmp_path, capsys):
        cfg = ExperimentConfig(kind="convergence", out=str(tmp_path / "conv.csv"),
                               methods=["adami"], seed=0, alpha=0.8, beta=0.3,
                               step_rule="invsqrt", horizons=[50, 100, 200, 400])
        run_experiment(cfg)
        lines = (tmp_path / "conv.csv").read_text().splitlines()
        assert lines[0] == "method,seed,T,gap_avg_iterate,gap_final_iterate,slope,r2"
        assert len(lines) == 5
        horizons = [int(line.split(",")[2]) for line in lines[1:]]
        assert horizons == [50, 100, 200, 400]
        slopes = {line.split(",")[5] for line in lines[1:]}
        assert len(slopes) == 1  # one shared fit per method


class TestCli:
    def test_missing_out_is_usage_error(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["attack", "--method", "adami"])
        assert excinfo.value.code == 2

    def test_unknown_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["attack", "--out", "x.csv", "--frobnicate"])
        assert excinfo.value.code == 2

    def test_unknown_method_lists_valid_ones(self, tmp_path, capsys):
        code = main(["attack", "--method", "nope", "--out", str(tmp_path / "x.csv")])
        assert code == 2
        assert "valid methods" in capsys.readouterr().err

    def test_unwritable_output_path(self, tmp_path, capsys):
        blocker = tmp_path / "blocker"
        blocker.write_text("")
        out = blocker / "res.csv"  # parent is a file
        code = main(["attack", "--seed", "1", "--samples", "5", "--train-samples",
                     "50", "--features", "4", "--classes", "2", "--steps", "2",
                     "--method", "fgsm", "--out", str(out)])
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_gradcheck_roundtrip(self, tmp_path, capsys):
        out = tmp_path / "grad.csv"
        code = main(["gradcheck", "--seed", "1", "--points", "5", "--out", str(out)])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "oracle,points,max_rel_error,tolerance,status"
        assert all(line.endswith("PASS") for line in lines[1:])

    def test_attack_cli_end_to_end(self, tmp_path, capsys):
        out = tmp_path / "res.csv"
        code = main(["attack", "--seed", "5", "--epsilon", "0.1", "--steps", "4",
                     "--samples", "15", "--train-samples", "100", "--features", "6",
                     "--classes", "3", "--method", "fgsm,ifgsm", "--out", str(out)])
        assert code == 0
        assert len(out.read_text().splitlines()) == 3

    def test_config_file_layering(self, tmp_path, capsys):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text(
            "# experiment defaults\n"
            "epsilon = 0.2\n"
            "steps = 4\n"
            "samples = 10\n"
            "train-samples = 80\n"
            "features = 6\n"
            "classes = 3\n"
            "method = fgsm\n")
        out = tmp_path / "res.csv"
        code = main(["attack", "--config", str(cfg_file), "--epsilon", "0.05",
                     "--out", str(out)])
        assert code == 0
        meta = json.loads((tmp_path / "res.json").read_text())
        assert meta["config"]["epsilon"] == 0.05  # flag beats file
        assert meta["config"]["steps"] == 4       # file beats default
        assert meta["config"]["methods"] == ["fgsm"]

    def test_bad_config_key_reported(self, tmp_path, capsys):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text("episilon = 0.2\n")
        code = main(["attack", "--config", str(cfg_file), "--out", str(tmp_path / "x.csv")])
        assert code == 2
        assert "episilon" in capsys.readouterr().err

    def test_config_parser_types(self, tmp_path):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text("lambda = 0.5\nbetas = 0.1,0.2\ntrace = true\n")
        values = parse_config_file(str(cfg_file))
        assert values == {"lam": 0.5, "betas": [0.1, 0.2], "trace": True}


class TestOutputFormatting:
    def test_float_cells_round_trip(self, tmp_path, capsys):
        cfg = small_attack_cfg(tmp_path / "res.csv", methods=["adami"])
        run_experiment(cfg)
        line = (tmp_path / "res.csv").read_text().splitlines()[1]
        ald = line.split(",")[4]
        assert float(ald) == float(repr(float(ald)))

    def test_gap_column_empty_for_model_oracles(self, tmp_path, capsys):
        cfg = small_attack_cfg(tmp_path / "res.csv", methods=["adami"])
        run_experiment(cfg)
        line = (tmp_path / "res.csv").read_text().splitlines()[1]
        assert line.split(",")[6] == ""

    def test_results_sorted_by_method(self, tmp_path, capsys):
        cfg = small_attack_cfg(tmp_path / "res.csv", methods=["pgd", "adami", "fgsm"])
        run_experiment(cfg)
        methods = [line.split(",")[0]
                   for line in (tmp_path / "res.csv").read_text().splitlines()[1:]]
        assert methods == sorted(methods)
