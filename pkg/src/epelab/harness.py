"""Experiment runner: ensembles x algorithms x trials -> CSV.

A config names one ensemble cell per size S, a list of algorithms with
parameter blocks, a trial count, and a master seed. Every trial derives
its instance from (master_seed, S, trial) and every algorithm run derives
its own sampler stream from (master_seed, S, trial, algorithm), so the
output is a pure function of the config: the CSV is byte-identical across
repeat runs and across worker counts. Records are sorted canonically
before writing regardless of completion order.

Parameter blocks may scale with S: any parameter value may be a string
expression in S (e.g. "10/S", "ceil(1.5*sqrt(S))"). Count-valued
parameters take the ceiling of fractional results.

Wall time is recorded only when timing is requested; the column is zero
by default so that default output stays deterministic.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .backward import backward_epe
from .baselines import approx_contributions, backward_epe_alternative
from .bidirectional import BidirectionalConfig, bidirectional_epe, plug_in_estimate
from .errors import ContractViolation
from .forward import ForwardConfig, forward_epe
from .instances import EnsembleSpec, generate_instance
from .model import CountingSampler, EstimateReport, ProblemInstance, exact_value

CSV_HEADER = "S,p,algorithm,seed,samples_used,linf_error,mean_relative_error,zero_value_states,encountered_size,iterations,wall_time_ms"

ALGORITHM_NAMES = (
    "forward",
    "backward",
    "bidirectional",
    "approx_contributions",
    "backward_alternative",
    "plug_in",
)

_EXPR_NAMES = {
    "sqrt": math.sqrt,
    "ceil": math.ceil,
    "floor": math.floor,
    "log": math.log,
    "min": min,
    "max": max,
}


def eval_param(value, S: int) -> float:
    """Evaluate a parameter that may be a number or an expression in S."""
    if isinstance(value, str):
        return float(eval(value, {"__builtins__": {}}, dict(_EXPR_NAMES, S=S)))
    return float(value)


def count_param(value, S: int) -> int:
    """Like eval_param but for counts: ceil fractional values, keep exact
    integers (within float fuzz) as they are."""
    v = eval_param(value, S)
    nearest = round(v)
    if abs(v - nearest) < 1e-9:
        return int(nearest)
    return int(math.ceil(v))


@dataclass(frozen=True)
class AlgorithmSpec:
    name: str
    params: dict

    def __post_init__(self):
        if self.name not in ALGORITHM_NAMES:
            raise ContractViolation(f"unknown algorithm {self.name!r}; expected one of {ALGORITHM_NAMES}")


@dataclass(frozen=True)
class ExperimentConfig:
    ensembles: tuple
    algorithms: tuple
    trials: int
    master_seed: int
    output: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ContractViolation(f"trials must be >= 1, got {self.trials}")

    def to_dict(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "trials": self.trials,
            "output": self.output,
            "ensembles": [
                {
                    "S": e.S,
                    "p": e.p,
                    "alpha": e.alpha,
                    "cost_model": e.cost_model,
                    **({"H": e.H} if e.H is not None else {}),
                }
                for e in self.ensembles
            ],
            "algorithms": [{"name": a.name, "params": a.params} for a in self.algorithms],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        return cls(
            ensembles=tuple(
                EnsembleSpec(
                    S=int(e["S"]),
                    p=float(e["p"]),
                    alpha=float(e["alpha"]),
                    cost_model=e.get("cost_model", "mixed"),
                    H=int(e["H"]) if "H" in e and e["H"] is not None else None,
                )
                for e in doc["ensembles"]
            ),
            algorithms=tuple(AlgorithmSpec(a["name"], dict(a.get("params", {}))) for a in doc["algorithms"]),
            trials=int(doc["trials"]),
            master_seed=int(doc["master_seed"]),
            output=doc.get("output"),
        )

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)


@dataclass
class TrialRecord:
    S: int
    p: float
    algorithm: str
    seed: int
    samples_used: int
    linf_error: float
    mean_relative_error: float
    zero_value_states: int
    encountered_size: int | None
    iterations: int
    wall_time_ms: int

    def to_row(self) -> list:
        return [
            str(self.S),
            str(self.p),
            self.algorithm,
            str(self.seed),
            str(self.samples_used),
            repr(self.linf_error),
            repr(self.mean_relative_error),
            str(self.zero_value_states),
            "" if self.encountered_size is None else str(self.encountered_size),
            str(self.iterations),
            str(self.wall_time_ms),
        ]


def run_algorithm(spec: AlgorithmSpec, instance: ProblemInstance, sampler: CountingSampler) -> EstimateReport:
    """Dispatch one algorithm run; all randomness comes from the sampler."""
    S = instance.S
    cost, alpha = instance.cost, instance.alpha
    neighbors = instance.supergraph.in_neighbors
    p = spec.params
    if spec.name == "forward":
        config = ForwardConfig(T=count_param(p["T"], S), m=count_param(p["m"], S))
        return forward_epe(sampler, cost, alpha, config)
    if spec.name == "backward":
        return backward_epe(sampler, cost, alpha, neighbors, eval_param(p["epsilon"], S), count_param(p["n"], S))
    if spec.name == "bidirectional":
        mode = p.get("termination_mode", "fixed")
        eps = eval_param(p["epsilon"], S) if "epsilon" in p and p["epsilon"] is not None else None
        config = BidirectionalConfig(
            epsilon=eps,
            n_B=count_param(p["n_B"], S),
            n_F=count_param(p["n_F"], S),
            termination_mode=mode,
        )
        return bidirectional_epe(sampler, cost, alpha, neighbors, config)
    if spec.name == "approx_contributions":
        return approx_contributions(
            instance.Q, cost, alpha, eval_param(p["epsilon"], S), sampler.derive("tie_break")
        )
    if spec.name == "backward_alternative":
        return backward_epe_alternative(
            sampler, cost, alpha, neighbors, eval_param(p["epsilon"], S), count_param(p["n"], S)
        )
    if spec.name == "plug_in":
        return plug_in_estimate(sampler, count_param(p["n"], S))
    raise ContractViolation(f"unknown algorithm {spec.name!r}")


def _zero_value_threshold(instance: ProblemInstance) -> float:
    return 1e-12 * max(instance.cost_inf, 1.0)


def trial_metrics(estimate: np.ndarray, truth: np.ndarray, threshold: float) -> tuple:
    """(sup-norm error, mean relative error over nonzero-value states, skipped count)."""
    linf = float(np.max(np.abs(estimate - truth))) if truth.size else 0.0
    alive = truth > threshold
    skipped = int(np.size(truth) - np.count_nonzero(alive))
    if alive.any():
        rel = float(np.mean(np.abs(estimate[alive] - truth[alive]) / truth[alive]))
    else:
        rel = 0.0
    return linf, rel, skipped


def _run_cell(config: ExperimentConfig, ensemble: EnsembleSpec, trial: int, timing: bool) -> list:
    instance = generate_instance(ensemble, (config.master_seed, "instance", ensemble.S, trial))
    truth = exact_value(instance)
    threshold = _zero_value_threshold(instance)
    records = []
    for spec in config.algorithms:
        sampler = CountingSampler(instance, (config.master_seed, "run", ensemble.S, trial, spec.name))
        started = time.perf_counter()
        report = run_algorithm(spec, instance, sampler)
        elapsed_ms = int(round((time.perf_counter() - started) * 1000.0)) if timing else 0
        if report.samples_used != sampler.draw_count:
            raise ContractViolation(
                f"{spec.name}: reported samples_used={report.samples_used} but sampler counted {sampler.draw_count}"
            )
        linf, rel, skipped = trial_metrics(report.estimate, truth, threshold)
        records.append(
            TrialRecord(
                S=ensemble.S,
                p=ensemble.p,
                algorithm=spec.name,
                seed=trial,
                samples_used=report.samples_used,
                linf_error=linf,
                mean_relative_error=rel,
                zero_value_states=skipped,
                encountered_size=report.encountered_size,
                iterations=report.iterations,
                wall_time_ms=elapsed_ms,
            )
        )
    return records


def worker_count(threads: int | None = None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("EPE_THREADS")
    if env:
        return max(1, int(env))
    return 1


def run_experiment(config: ExperimentConfig, threads: int | None = None, timing: bool = False) -> list:
    """Run every (ensemble, algorithm, trial) cell; deterministic given config."""
    jobs = [(ens, trial) for ens in config.ensembles for trial in range(config.trials)]
    workers = worker_count(threads)
    if workers == 1:
        results = [_run_cell(config, ens, trial, timing) for ens, trial in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda job: _run_cell(config, job[0], job[1], timing), jobs))
    records = [rec for cell in results for rec in cell]
    records.sort(key=lambda r: (r.S, r.algorithm, r.seed))
    return records


def records_to_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER.split(","))
    for rec in records:
        writer.writerow(rec.to_row())
    return buf.getvalue()


def write_csv(records, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(records_to_csv(records))


def read_csv(path) -> list:
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER.split(","):
            raise ContractViolation(f"unexpected CSV header in {path}")
        for row in reader:
            records.append(
                TrialRecord(
                    S=int(row["S"]),
                    p=float(row["p"]),
                    algorithm=row["algorithm"],
                    seed=int(row["seed"]),
                    samples_used=int(row["samples_used"]),
                    linf_error=float(row["linf_error"]),
                    mean_relative_error=float(row["mean_relative_error"]),
                    zero_value_states=int(row["zero_value_states"]),
                    encountered_size=int(row["encountered_size"]) if row["encountered_size"] else None,
                    iterations=int(row["iterations"]),
                    wall_time_ms=int(row["wall_time_ms"]),
                )
            )
    return records


SUMMARY_HEADER = (
    "S,algorithm,trials,samples_mean,samples_std,linf_mean,linf_std,rel_mean,rel_std,"
    "ratio_backward_over_forward,loglog_slope"
)


def loglog_slope(sizes, means) -> float:
    """Least-squares slope of log(mean) against log(S)."""
    x = np.log(np.asarray(sizes, dtype=float))
    y = np.log(np.asarray(means, dtype=float))
    x = x - x.mean()
    return float((x @ (y - y.mean())) / (x @ x))


def summarize(records) -> list:
    """Aggregate per (S, algorithm); adds backward/forward sample ratios per S
    and a per-algorithm log-log slope of mean samples against S."""
    if not records:
        raise ContractViolation("no records to summarize")
    cells: dict = {}
    for rec in records:
        cells.setdefault((rec.S, rec.algorithm), []).append(rec)

    sample_means = {key: float(np.mean([r.samples_used for r in recs])) for key, recs in cells.items()}
    slopes = {}
    for algorithm in {alg for _, alg in cells}:
        sizes = sorted(S for S, alg in cells if alg == algorithm)
        means = [sample_means[(S, algorithm)] for S in sizes]
        if len(sizes) >= 2 and all(m > 0 for m in means):
            slopes[algorithm] = loglog_slope(sizes, means)

    rows = []
    for (S, algorithm) in sorted(cells):
        recs = cells[(S, algorithm)]
        samples = np.array([r.samples_used for r in recs], dtype=float)
        linf = np.array([r.linf_error for r in recs])
        rel = np.array([r.mean_relative_error for r in recs])
        ratio = None
        if algorithm == "backward" and (S, "forward") in sample_means:
            ratio = sample_means[(S, "backward")] / sample_means[(S, "forward")]
        rows.append(
            {
                "S": S,
                "algorithm": algorithm,
                "trials": len(recs),
                "samples_mean": float(samples.mean()),
                "samples_std": float(samples.std()),
                "linf_mean": float(linf.mean()),
                "linf_std": float(linf.std()),
                "rel_mean": float(rel.mean()),
                "rel_std": float(rel.std()),
                "ratio_backward_over_forward": ratio,
                "loglog_slope": slopes.get(algorithm),
            }
        )
    return rows


def summary_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER.split(","))
    for row in rows:
        writer.writerow(
            [
                str(row["S"]),
                row["algorithm"],
                str(row["trials"]),
                repr(row["samples_mean"]),
                repr(row["samples_std"]),
                repr(row["linf_mean"]),
                repr(row["linf_std"]),
                repr(row["rel_mean"]),
                repr(row["rel_std"]),
                "" if row["ratio_backward_over_forward"] is None else repr(row["ratio_backward_over_forward"]),
                "" if row["loglog_slope"] is None else repr(row["loglog_slope"]),
            ]
        )
    return buf.getvalue()


BOUND_HEADER = "S,p,H,epsilon,alpha,trials,mean_encountered,bound,passed"


def bound_report(records, config: ExperimentConfig) -> list:
    """Check mean encountered-set size against S * c_bar * d_bar / (eps (1-alpha)).

    c_bar is the ensemble's expected per-state cost (H/S binary, 3p/2S
    mixed); d_bar is the realized average in-degree, recovered by
    regenerating each trial's instance from the config seeds.
    """
    backward_specs = [a for a in config.algorithms if a.name == "backward"]
    if not backward_specs:
        raise ContractViolation("bound report needs at least one backward algorithm in the config")
    by_cell: dict = {}
    for rec in records:
        if rec.algorithm == "backward":
            by_cell.setdefault(rec.S, []).append(rec)

    rows = []
    for ensemble in config.ensembles:
        recs = by_cell.get(ensemble.S)
        if not recs:
            continue
        realized_dbar = float(
            np.mean(
                [
                    generate_instance(
                        ensemble, (config.master_seed, "instance", ensemble.S, rec.seed)
                    ).supergraph.avg_degree
                    for rec in recs
                ]
            )
        )
        if ensemble.cost_model == "binary":
            c_bar = ensemble.H / ensemble.S
        else:
            c_bar = 1.5 * ensemble.p / ensemble.S
        epsilon = eval_param(backward_specs[0].params["epsilon"], ensemble.S)
        bound = ensemble.S * c_bar * realized_dbar / (epsilon * (1.0 - ensemble.alpha))
        mean_enc = float(np.mean([r.encountered_size for r in recs]))
        rows.append(
            {
                "S": ensemble.S,
                "p": ensemble.p,
                "H": ensemble.H,
                "epsilon": epsilon,
                "alpha": ensemble.alpha,
                "trials": len(recs),
                "mean_encountered": mean_enc,
                "bound": bound,
                "passed": mean_enc <= bound,
            }
        )
    return rows


def bound_report_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BOUND_HEADER.split(","))
    for row in rows:
        writer.writerow(
            [
                str(row["S"]),
                str(row["p"]),
                "" if row["H"] is None else str(row["H"]),
                repr(row["epsilon"]),
                str(row["alpha"]),
                str(row["trials"]),
                repr(row["mean_encountered"]),
                repr(row["bound"]),
                str(row["passed"]),
            ]
        )
    return buf.getvalue()


DEFAULT_MASTER_SEED = 20260808


def fig1_config(
    S_values=(100, 200, 400),
    alpha: float = 0.1,
    p: float = 10.0,
    trials: int = 100,
    master_seed: int = DEFAULT_MASTER_SEED,
    case: str = "case1",
) -> ExperimentConfig:
    """Relative-complexity sweep: cheap backward pushes against a fixed
    forward budget of 4 length-10 trajectories per state."""
    from .instances import density_for_case

    return ExperimentConfig(
        ensembles=tuple(EnsembleSpec(S=S, p=density_for_case(case, S, p), alpha=alpha) for S in S_values),
        algorithms=(
            AlgorithmSpec("backward", {"epsilon": 0.15, "n": 20}),
            AlgorithmSpec("forward", {"T": 10, "m": 4}),
        ),
        trials=trials,
        master_seed=master_seed,
    )


def fig2_config(
    S_values=(100, 200, 400, 800),
    alpha: float = 0.9,
    p: float = 10.0,
    trials: int = 50,
    master_seed: int = DEFAULT_MASTER_SEED,
) -> ExperimentConfig:
    """Scaling sweep at matched relative error: per-size parameter schedules
    for all three estimators, bidirectional with the dynamic stop."""
    return ExperimentConfig(
        ensembles=tuple(EnsembleSpec(S=S, p=p, alpha=alpha) for S in S_values),
        algorithms=(
            AlgorithmSpec("forward", {"T": 15, "m": "0.05*S"}),
            AlgorithmSpec("backward", {"epsilon": "10/S", "n": "S"}),
            AlgorithmSpec(
                "bidirectional",
                {"n_B": "S", "n_F": "1.5*sqrt(S)", "termination_mode": "dynamic"},
            ),
        ),
        trials=trials,
        master_seed=master_seed,
    )
