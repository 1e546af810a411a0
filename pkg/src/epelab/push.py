"""Shared residual-push kernel.

Three estimators are the same loop with different transition-row sources:
exact rows from a known matrix, empirical rows cached at first encounter,
or fresh empirical rows on every visit. The loop repeatedly selects a
state of maximal residual, moves a (1-alpha) share of its residual into
the estimate, and redistributes an alpha share to its in-neighbors
weighted by the row source's column entries.

Tie-breaking among maximal residuals is uniform over the exact-equality
tie set, drawn from a stream separate from the sampling stream so that
runs with identical residual sequences select identical push states.

Traces record (state, residual, column) per push, which is enough to
replay the run bit-for-bit and to evaluate fixed-point error processes
against any compatible completion matrix.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, IterationLimitExceeded
from .model import CountingSampler, discounted_occupancy


@dataclass
class PushRecord:
    state: int
    residual: float
    column: dict


@dataclass
class PushTrace:
    """Everything needed to replay a push run and audit its invariants."""

    alpha: float
    cost: np.ndarray
    records: list
    final_estimate: np.ndarray
    final_residual: np.ndarray
    encountered: frozenset
    final_rows: dict

    @property
    def iterations(self) -> int:
        return len(self.records)

    def to_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            header = {
                "kind": "push_trace",
                "alpha": self.alpha,
                "cost": self.cost.tolist(),
                "encountered": sorted(self.encountered),
                "final_rows": {str(s): {str(t): p for t, p in row.items()} for s, row in self.final_rows.items()},
            }
            fh.write(json.dumps(header) + "\n")
            for k, rec in enumerate(self.records, start=1):
                fh.write(
                    json.dumps(
                        {
                            "k": k,
                            "s": rec.state,
                            "rho": rec.residual,
                            "col": {str(t): q for t, q in rec.column.items()},
                        }
                    )
                    + "\n"
                )

    @classmethod
    def from_jsonl(cls, path) -> "PushTrace":
        with open(path, "r", encoding="utf-8") as fh:
            header = json.loads(fh.readline())
            if header.get("kind") != "push_trace":
                raise ContractViolation(f"{path} is not a push trace file")
            records = []
            for line in fh:
                doc = json.loads(line)
                records.append(
                    PushRecord(
                        state=int(doc["s"]),
                        residual=float(doc["rho"]),
                        column={int(t): float(q) for t, q in doc["col"].items()},
                    )
                )
        cost = np.array(header["cost"], dtype=float)
        v, r = replay_final_state(float(header["alpha"]), cost, records)
        return cls(
            alpha=float(header["alpha"]),
            cost=cost,
            records=records,
            final_estimate=v,
            final_residual=r,
            encountered=frozenset(int(s) for s in header["encountered"]),
            final_rows={
                int(s): {int(t): float(p) for t, p in row.items()}
                for s, row in header["final_rows"].items()
            },
        )


def apply_push(v_hat: np.ndarray, residual: np.ndarray, alpha: float, s_k: int, column: dict) -> None:
    """One push update, in place. Replay uses the same code path as the run,
    so reconstructed vectors match the originals bit for bit."""
    rho = residual[s_k]
    v_hat[s_k] += (1.0 - alpha) * rho
    residual[s_k] = alpha * column.get(s_k, 0.0) * rho
    for s, q in column.items():
        if s != s_k:
            residual[s] += alpha * q * rho


def replay_states(trace: PushTrace):
    """Yield (k, v_hat_k, residual_k) for k = 0..k*; vectors are live views."""
    v = np.zeros_like(trace.cost)
    r = trace.cost.astype(float).copy()
    yield 0, v, r
    for k, rec in enumerate(trace.records, start=1):
        if r[rec.state] != rec.residual:
            raise ContractViolation(
                f"trace corrupt at k={k}: recorded residual {rec.residual!r}, replay {r[rec.state]!r}"
            )
        apply_push(v, r, trace.alpha, rec.state, rec.column)
        yield k, v, r


def replay_final_state(alpha: float, cost: np.ndarray, records) -> tuple:
    v = np.zeros_like(cost, dtype=float)
    r = cost.astype(float).copy()
    for rec in records:
        apply_push(v, r, alpha, rec.state, rec.column)
    return v, r


def replay_errors(trace: PushTrace, P: np.ndarray) -> np.ndarray:
    """Error process e_k(s) = v_hat_k(s) + nu_s r_k - nu_s c against matrix P.

    Row k of the result is e_k; nu_s comes from a dense solve on P. The
    replay also cross-checks the trace against its recorded final vectors.
    """
    nu = discounted_occupancy(P, trace.alpha)
    target = nu @ trace.cost
    out = np.empty((len(trace.records) + 1, trace.cost.size))
    for k, v, r in replay_states(trace):
        out[k] = v + nu @ r - target
        final_v, final_r = v, r
    if not (np.array_equal(final_v, trace.final_estimate) and np.array_equal(final_r, trace.final_residual)):
        raise ContractViolation("replay does not reproduce the recorded final state")
    return out


class _MaxResidualHeap:
    """Lazy max-heap over residual values.

    Entries are never deleted on update; instead each residual change
    pushes a fresh entry and stale ones are discarded when popped (stale
    means the stored value no longer equals the live residual). The live
    residual of every state always has an entry present, so the first
    valid pop is a true maximizer.
    """

    def __init__(self, residual: np.ndarray):
        self._residual = residual
        self._heap = [(-v, s) for s, v in enumerate(residual) if v > 0.0]
        heapq.heapify(self._heap)

    def notify(self, s: int) -> None:
        v = self._residual[s]
        if v > 0.0:
            heapq.heappush(self._heap, (-v, s))

    def peek_max(self):
        while self._heap:
            neg, s = self._heap[0]
            if self._residual[s] == -neg:
                return -neg
            heapq.heappop(self._heap)
        return None

    def pop_tie_set(self, value: float) -> list:
        ties = set()
        while self._heap and self._heap[0][0] == -value:
            _, s = heapq.heappop(self._heap)
            if self._residual[s] == value:
                ties.add(s)
        out = sorted(ties)
        for s in out:
            heapq.heappush(self._heap, (-value, s))
        return out


class CachedEmpiricalRows:
    """Row source for the sample-once scheme: the first time a state is
    encountered its row is estimated with n draws and kept forever."""

    def __init__(self, sampler: CountingSampler, n: int):
        if n < 1:
            raise ContractViolation(f"per-state sample count must be >= 1, got {n}")
        self.sampler = sampler
        self.n = n
        self.rows: dict[int, dict] = {}
        self.encountered: set[int] = set()

    def column(self, neighbors, s_k: int) -> dict:
        col = {}
        for s in neighbors:
            s = int(s)
            if s not in self.encountered:
                self.rows[s] = self.sampler.sample_empirical_row(s, self.n)
                self.encountered.add(s)
            col[s] = self.rows[s].get(s_k, 0.0)
        return col


class ExactRows:
    """Row source reading a known transition matrix. Draws nothing."""

    def __init__(self, Q: np.ndarray):
        self.Q = Q
        self.rows = None
        self.encountered = None

    def column(self, neighbors, s_k: int) -> dict:
        return {int(s): float(self.Q[int(s), s_k]) for s in neighbors}


class FreshEmpiricalRows:
    """Row source that re-estimates with n fresh draws at every visit."""

    def __init__(self, sampler: CountingSampler, n: int):
        if n < 1:
            raise ContractViolation(f"per-state sample count must be >= 1, got {n}")
        self.sampler = sampler
        self.n = n
        self.rows = None
        self.encountered = None

    def column(self, neighbors, s_k: int) -> dict:
        col = {}
        for s in neighbors:
            row = self.sampler.sample_empirical_row(int(s), self.n)
            col[int(s)] = row.get(s_k, 0.0)
        return col


def default_iteration_cap(cost: np.ndarray, alpha: float, epsilon: float) -> int:
    """Safety cap far above both the typical-case and the sure push bounds."""
    S = cost.size
    c1 = float(np.abs(cost).sum())
    c_inf = float(np.max(cost)) if S else 0.0
    if epsilon <= 0.0 or c_inf == 0.0:
        return 100 * S + 1000
    typical = 10 * math.ceil(c1 / (epsilon * (1.0 - alpha)))
    sure = math.ceil(S * c_inf / (epsilon * (1.0 - alpha))) + 1
    return max(typical, sure)


@dataclass
class PushOutcome:
    estimate: np.ndarray
    residual: np.ndarray
    iterations: int
    encountered: frozenset
    rows: dict
    trace: PushTrace | None
    stop_reason: str
    samples_used: int = 0


def run_push_loop(
    cost: np.ndarray,
    alpha: float,
    in_neighbors,
    epsilon: float,
    row_source,
    tie_rng: np.random.Generator,
    trace: bool = False,
    stop_check=None,
    iteration_cap: int | None = None,
) -> PushOutcome:
    """Run the push loop until the residual max drops to epsilon (or a
    caller-supplied stop_check fires after an iteration completes)."""
    if epsilon < 0.0:
        raise ContractViolation(f"termination threshold must be >= 0, got {epsilon}")
    if not (0.0 < alpha < 1.0):
        raise ContractViolation(f"discount must lie in (0,1), got {alpha}")

    v_hat = np.zeros(cost.size, dtype=float)
    residual = cost.astype(float).copy()
    heap = _MaxResidualHeap(residual)
    records: list[PushRecord] = [] if trace else None
    cap = iteration_cap if iteration_cap is not None else default_iteration_cap(cost, alpha, epsilon)

    k = 0
    stop_reason = "threshold"
    while True:
        top = heap.peek_max()
        if top is None or top <= epsilon:
            stop_reason = "threshold" if top is not None else "exhausted"
            break
        if k >= cap:
            raise IterationLimitExceeded(
                f"push loop exceeded {cap} iterations (epsilon={epsilon}); this indicates a bug or a pathological instance"
            )
        k += 1
        ties = heap.pop_tie_set(top)
        s_k = ties[0] if len(ties) == 1 else ties[int(tie_rng.integers(len(ties)))]
        rho = residual[s_k]
        if trace and rho != residual.max():
            raise ContractViolation("heap selection is not a true residual maximizer")

        neighbors = in_neighbors[s_k]
        column = row_source.column(neighbors, s_k)
        if records is not None:
            records.append(PushRecord(state=s_k, residual=rho, column=dict(column)))
        apply_push(v_hat, residual, alpha, s_k, column)
        heap.notify(s_k)
        for s in column:
            if s != s_k:
                heap.notify(s)

        if stop_check is not None and stop_check(k, row_source.encountered):
            stop_reason = "dynamic"
            break

    encountered = frozenset(row_source.encountered) if row_source.encountered is not None else frozenset()
    rows = dict(row_source.rows) if row_source.rows is not None else {}
    push_trace = None
    if trace:
        push_trace = PushTrace(
            alpha=alpha,
            cost=cost.astype(float).copy(),
            records=records,
            final_estimate=v_hat.copy(),
            final_residual=residual.copy(),
            encountered=encountered,
            final_rows={s: dict(r) for s, r in rows.items()},
        )
    return PushOutcome(
        estimate=v_hat,
        residual=residual,
        iterations=k,
        encountered=encountered,
        rows=rows,
        trace=push_trace,
        stop_reason=stop_reason,
    )
