import json
import subprocess
import sys

import numpy as np
import pytest

from epelab import (
    AlgorithmSpec,
    ContractViolation,
    EnsembleSpec,
    ExperimentConfig,
    bound_report,
    read_csv,
    run_experiment,
    summarize,
    write_csv,
)
from epelab.harness import (
    CSV_HEADER,
    count_param,
    eval_param,
    loglog_slope,
    records_to_csv,
    summary_to_csv,
)


def small_config(**overrides):
    base = dict(
        ensembles=(EnsembleSpec(S=12, p=4, alpha=0.5),),
        algorithms=(
            AlgorithmSpec("backward", {"epsilon": 0.2, "n": 5}),
            AlgorithmSpec("forward", {"T": 5, "m": 2}),
        ),
        trials=3,
        master_seed=17,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestParamExpressions:
    def test_numeric_passthrough(self):
        assert eval_param(0.15, 100) == 0.15
        assert count_param(20, 100) == 20

    def test_expressions_in_S(self):
        assert eval_param("10/S", 200) == 0.05
        assert count_param("S", 400) == 400
        assert count_param("1.5*sqrt(S)", 400) == 30
        assert count_param("1.5*sqrt(S)", 200) == 22  # ceiling of 21.21

    def test_float_fuzz_does_not_inflate_counts(self):
        assert count_param("0.05*S", 800) == 40


class TestRunExperiment:
    def test_known_q_baseline_draws_nothing(self):
        config = small_config(algorithms=(AlgorithmSpec("approx_contributions", {"epsilon": 0.2}),), trials=1)
        records = run_experiment(config)
        assert len(records) == 1
        assert records[0].samples_used == 0

    def test_backward_worst_case_budget(self):
        config = small_config(algorithms=(AlgorithmSpec("backward", {"epsilon": 0.15, "n": 20}),), trials=5)
        for rec in run_experiment(config):
            assert rec.samples_used <= 20 * 12

    def test_forward_exact_budget(self):
        config = small_config(algorithms=(AlgorithmSpec("forward", {"T": 5, "m": 3}),), trials=2)
        for rec in run_experiment(config):
            assert rec.samples_used == 12 * 3 * 4

    def test_deterministic_across_thread_counts(self):
        config = small_config(trials=4)
        solo = records_to_csv(run_experiment(config, threads=1))
        pooled = records_to_csv(run_experiment(config, threads=8))
        assert solo == pooled

    def test_record_order_canonical(self):
        config = small_config(trials=2)
        records = run_experiment(config)
        keys = [(r.S, r.algorithm, r.seed) for r in records]
        assert keys == sorted(keys)

    def test_csv_round_trip(self, tmp_path):
        config = small_config(trials=2)
        records = run_experiment(config)
        path = tmp_path / "out.csv"
        write_csv(records, path)
        assert open(path).readline().strip() == CSV_HEADER
        back = read_csv(path)
        assert records_to_csv(back) == records_to_csv(records)

    def test_config_json_round_trip(self, tmp_path):
        config = small_config()
        path = tmp_path / "cfg.json"
        config.save_json(path)
        back = ExperimentConfig.from_json(path)
        assert back == config


class TestSummarize:
    def test_single_record_stats(self):
        config = small_config(algorithms=(AlgorithmSpec("forward", {"T": 5, "m": 2}),), trials=1)
        rows = summarize(run_experiment(config))
        assert len(rows) == 1
        assert rows[0]["samples_std"] == 0.0
        assert rows[0]["trials"] == 1

    def test_ratio_present_only_with_both_algorithms(self):
        both = summarize(run_experiment(small_config(trials=2)))
        backward_rows = [r for r in both if r["algorithm"] == "backward"]
        assert all(r["ratio_backward_over_forward"] is not None for r in backward_rows)

        solo = summarize(run_experiment(small_config(algorithms=(AlgorithmSpec("backward", {"epsilon": 0.2, "n": 5}),), trials=2)))
        assert all(r["ratio_backward_over_forward"] is None for r in solo)

    def test_slope_recovers_power_law(self):
        sizes = [100, 200, 400, 800]
        b = 1.7
        means = [3.5 * S**b for S in sizes]
        assert abs(loglog_slope(sizes, means) - b) < 0.01

    def test_summary_csv_renders(self):
        rows = summarize(run_experiment(small_config(trials=2)))
        text = summary_to_csv(rows)
        assert text.splitlines()[0].startswith("S,algorithm,trials")

    def test_empty_input_rejected(self):
        with pytest.raises(ContractViolation):
            summarize([])


class TestBoundReport:
    def test_binary_bound_formula(self):
        config = ExperimentConfig(
            ensembles=(EnsembleSpec(S=30, p=5, alpha=0.5, cost_model="binary", H=3),),
            algorithms=(AlgorithmSpec("backward", {"epsilon": 0.15, "n": 5}),),
            trials=4,
            master_seed=7,
        )
        records = run_experiment(config)
        rows = bound_report(records, config)
        assert len(rows) == 1
        row = rows[0]
        # Binary model: bound = H * d_bar / (eps (1 - alpha)).
        from epelab import generate_instance

        dbar = np.mean(
            [
                generate_instance(config.ensembles[0], (7, "instance", 30, t)).supergraph.avg_degree
                for t in range(4)
            ]
        )
        assert row["bound"] == pytest.approx(3 * dbar / (0.15 * 0.5))
        assert row["mean_encountered"] <= 30

    def test_requires_backward_records(self):
        config = small_config(algorithms=(AlgorithmSpec("forward", {"T": 5, "m": 2}),), trials=1)
        records = run_experiment(config)
        with pytest.raises(ContractViolation):
            bound_report(records, config)


class TestCli:
    def run_cli(self, *args, env=None):
        import os

        full_env = dict(os.environ)
        if env:
            full_env.update(env)
        return subprocess.run(
            [sys.executable, "-m", "epelab.cli", *args],
            capture_output=True,
            text=True,
            env=full_env,
        )

    def test_generate_and_load(self, tmp_path):
        out = tmp_path / "inst.json"
        res = self.run_cli(
            "generate", "--S", "8", "--p", "3", "--alpha", "0.5", "--seed", "4", "--out", str(out)
        )
        assert res.returncode == 0
        doc = json.loads(out.read_text())
        assert doc["S"] == 8
        assert len(doc["Q"]) == 8

    def test_run_summarize_bounds_pipeline(self, tmp_path):
        cfg = small_config(trials=2).to_dict()
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        csv_path = tmp_path / "out.csv"
        res = self.run_cli("run", "--config", str(cfg_path), "--out", str(csv_path))
        assert res.returncode == 0, res.stderr
        res2 = self.run_cli("summarize", "--csv", str(csv_path))
        assert res2.returncode == 0
        assert res2.stdout.startswith("S,algorithm")
        res3 = self.run_cli("bounds", "--csv", str(csv_path), "--config", str(cfg_path))
        assert res3.returncode == 0
        assert "True" in res3.stdout

    def test_seed_override_changes_output(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(small_config(trials=1).to_dict()))
        a = self.run_cli("run", "--config", str(cfg_path))
        b = self.run_cli("run", "--config", str(cfg_path), "--seed", "999")
        assert a.returncode == b.returncode == 0
        assert a.stdout != b.stdout

    def test_calc_prints_all_sizes(self):
        res = self.run_cli(
            "calc", "--epsilon", "0.1", "--delta", "0.1", "--alpha", "0.5", "--c-inf", "1.0",
            "--S", "10", "--epsilon-rel", "0.5", "--epsilon-abs", "0.1", "--q-min", "0.1",
        )
        assert res.returncode == 0
        assert "1476" in res.stdout
        assert "(6, 355)" in res.stdout
        assert "7765" in res.stdout
        assert "179897" in res.stdout
