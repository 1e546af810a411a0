"""Problem instances, the draw-counting access model, and exact value oracles.

A problem instance is a discounted Markov chain: a row-stochastic
transition matrix ``Q``, a nonnegative cost vector, a discount factor in
(0, 1), and a binary supergraph whose edge set contains the support of
``Q``. Estimators never read ``Q`` directly; they see it only through a
:class:`CountingSampler`, which hands out next-state draws and tallies
every one. The tally is the sample-complexity meter that experiments
report.

The exact solvers here (:func:`exact_value`,
:func:`exact_value_power_series`) are the ground truth that every
estimator and test is measured against.

States are 0-based everywhere, including on disk.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation
from .rng import as_entropy, derive_entropy, make_rng

ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class Supergraph:
    """Adjacency structure giving, for each state, who can reach it in one step.

    ``out_edges[s]`` lists the states s may transition to; ``in_neighbors[s]``
    is the exact transpose. Backward exploration iterates ``in_neighbors``,
    so both orientations are precomputed and kept sorted.
    """

    S: int
    out_edges: tuple
    in_neighbors: tuple
    in_degrees: np.ndarray
    avg_degree: float

    @classmethod
    def from_out_edges(cls, S: int, out_edges) -> "Supergraph":
        outs = tuple(np.array(sorted(int(t) for t in row), dtype=np.int64) for row in out_edges)
        if len(outs) != S:
            raise ContractViolation(f"expected {S} out-edge rows, got {len(outs)}")
        incoming = [[] for _ in range(S)]
        for s, row in enumerate(outs):
            for t in row:
                if not 0 <= t < S:
                    raise ContractViolation(f"edge target {t} out of range for S={S}")
                incoming[int(t)].append(s)
        in_neighbors = tuple(np.array(row, dtype=np.int64) for row in incoming)
        in_degrees = np.array([len(row) for row in incoming], dtype=np.int64)
        in_degrees.setflags(write=False)
        return cls(
            S=S,
            out_edges=outs,
            in_neighbors=in_neighbors,
            in_degrees=in_degrees,
            avg_degree=float(in_degrees.mean()),
        )

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "Supergraph":
        mask = np.asarray(mask)
        S = mask.shape[0]
        return cls.from_out_edges(S, [np.flatnonzero(mask[s]).tolist() for s in range(S)])

    def edge_mask(self) -> np.ndarray:
        m = np.zeros((self.S, self.S), dtype=bool)
        for s, row in enumerate(self.out_edges):
            m[s, row] = True
        return m


@dataclass(frozen=True)
class ProblemInstance:
    """Ground truth for one evaluation problem: (S, alpha, cost, Q, supergraph)."""

    S: int
    alpha: float
    cost: np.ndarray
    Q: np.ndarray
    supergraph: Supergraph

    def __post_init__(self):
        self.cost.setflags(write=False)
        self.Q.setflags(write=False)

    @classmethod
    def from_arrays(cls, alpha: float, cost, Q, supergraph: Supergraph | None = None) -> "ProblemInstance":
        Q = np.array(Q, dtype=float)
        cost = np.array(cost, dtype=float)
        S = Q.shape[0]
        if supergraph is None:
            supergraph = Supergraph.from_mask(Q > 0)
        return cls(S=S, alpha=float(alpha), cost=cost, Q=Q, supergraph=supergraph)

    @property
    def cost_inf(self) -> float:
        return float(np.max(self.cost)) if self.S else 0.0

    def min_positive_entry(self) -> float:
        positive = self.Q[self.Q > 0]
        if positive.size == 0:
            raise ContractViolation("transition matrix has no positive entries")
        return float(positive.min())


@dataclass(frozen=True)
class Violation:
    """One failed instance invariant, with the offending location."""

    kind: str
    where: tuple
    detail: str

    def __str__(self):
        return f"{self.kind} at {self.where}: {self.detail}"


def validate_instance(instance: ProblemInstance) -> list:
    """Check every instance invariant; return [] iff all hold.

    Validation never raises: callers get the full list of problems,
    each naming the invariant and the offending index pair.
    """
    out = []
    S, Q, cost, sg = instance.S, instance.Q, instance.cost, instance.supergraph
    if not (0.0 < instance.alpha < 1.0):
        out.append(Violation("discount_domain", (), f"alpha={instance.alpha} not in (0,1)"))
    if Q.shape != (S, S):
        out.append(Violation("shape", Q.shape, f"Q must be {S}x{S}"))
        return out
    if cost.shape != (S,):
        out.append(Violation("shape", cost.shape, f"cost must have length {S}"))
        return out

    row_sums = Q.sum(axis=1)
    for s in np.flatnonzero(np.abs(row_sums - 1.0) > ROW_SUM_TOL):
        out.append(Violation("row_sum", (int(s),), f"row sums to {row_sums[s]!r}"))
    neg_q = np.argwhere(Q < 0)
    for s, t in neg_q:
        out.append(Violation("negative_entry", (int(s), int(t)), f"Q entry {Q[s, t]!r}"))
    for s in np.flatnonzero(cost < 0):
        out.append(Violation("negative_cost", (int(s),), f"cost entry {cost[s]!r}"))

    mask = sg.edge_mask()
    leaked = np.argwhere((~mask) & (Q > 0))
    for s, t in leaked:
        out.append(
            Violation(
                "absolute_continuity",
                (int(s), int(t)),
                f"supergraph has no edge but Q={Q[s, t]!r}",
            )
        )

    # Supergraph internal consistency (transpose, degrees, average).
    incoming = [[] for _ in range(S)]
    for s, row in enumerate(sg.out_edges):
        for t in row:
            incoming[int(t)].append(s)
    for s in range(S):
        if not np.array_equal(np.array(incoming[s], dtype=np.int64), sg.in_neighbors[s]):
            out.append(Violation("in_neighbor_transpose", (s,), "in_neighbors is not the transpose"))
        if sg.in_degrees[s] != len(sg.in_neighbors[s]):
            out.append(Violation("in_degree", (s,), "d_in(s) != |N_in(s)|"))
    if S and abs(sg.avg_degree - float(np.mean(sg.in_degrees))) > 1e-12:
        out.append(Violation("avg_degree", (), "avg_degree is not the mean in-degree"))
    return out


def value_function(Q: np.ndarray, cost: np.ndarray, alpha: float) -> np.ndarray:
    """Discounted value of an arbitrary row-stochastic matrix, by dense solve."""
    S = Q.shape[0]
    return np.linalg.solve(np.eye(S) - alpha * Q, (1.0 - alpha) * cost)


def discounted_occupancy(P: np.ndarray, alpha: float) -> np.ndarray:
    """Row s is the distribution of a geometric-length walk from s under P."""
    S = P.shape[0]
    return (1.0 - alpha) * np.linalg.inv(np.eye(S) - alpha * P)


def exact_value(instance: ProblemInstance) -> np.ndarray:
    """Solve (I - alpha Q) v = (1 - alpha) c directly."""
    return value_function(instance.Q, instance.cost, instance.alpha)


def exact_value_power_series(instance: ProblemInstance, T: int) -> np.ndarray:
    """Truncated series (1-a) * sum_{t<T} a^t Q^t c; bias at most ||c||_inf a^T."""
    if T < 1:
        raise ContractViolation(f"T must be >= 1, got {T}")
    alpha, Q = instance.alpha, instance.Q
    term = instance.cost.copy()
    acc = (1.0 - alpha) * term
    scale = 1.0
    for _ in range(1, T):
        term = Q @ term
        scale *= alpha
        acc = acc + (1.0 - alpha) * scale * term
    return acc


@dataclass
class EstimateReport:
    """What an estimator hands back: the estimate plus its cost accounting.

    ``samples_used`` must equal the sampler's draw-count delta for the run.
    ``iterations`` is the push count for push algorithms and the trajectory
    count for trajectory averaging. ``encountered_size`` is only meaningful
    for backward-style runs.
    """

    estimate: np.ndarray
    samples_used: int
    iterations: int
    encountered_size: int | None = None
    trace: object | None = None
    diagnostics: dict = field(default_factory=dict)


class CountingSampler:
    """The only channel through which estimators observe the chain.

    Wraps one seeded stream. ``sample_next`` draws a successor of ``s``
    distributed as Q(s, .) and bumps ``draw_count`` by exactly 1; the batch
    and row channels bump it by the number of draws they represent. Two
    samplers built with the same seed produce identical draw sequences for
    identical call sequences.

    Single-owner mutable state: give each concurrent run its own sampler
    (or a spawned child) rather than sharing one.
    """

    def __init__(self, instance: ProblemInstance, seed):
        self.instance = instance
        self._entropy = as_entropy(seed)
        self.rng = make_rng(self._entropy)
        self.draw_count = 0
        self._rows: dict[int, tuple] = {}

    def _row(self, s: int):
        cached = self._rows.get(s)
        if cached is None:
            idx = np.flatnonzero(self.instance.Q[s] > 0)
            if idx.size == 0:
                raise ContractViolation(f"state {s} has an all-zero transition row")
            probs = self.instance.Q[s, idx]
            probs = probs / probs.sum()
            cum = np.cumsum(probs)
            cum[-1] = 1.0
            cached = (idx, probs, cum)
            self._rows[s] = cached
        return cached

    def _check_state(self, s: int):
        if not 0 <= s < self.instance.S:
            raise ContractViolation(f"state index {s} out of range [0, {self.instance.S})")

    def sample_next(self, s: int) -> int:
        """One draw from Q(s, .); counts as one sample."""
        self._check_state(int(s))
        idx, _, cum = self._row(int(s))
        u = self.rng.random()
        self.draw_count += 1
        return int(idx[min(np.searchsorted(cum, u, side="right"), idx.size - 1)])

    def sample_next_batch(self, states: np.ndarray) -> np.ndarray:
        """Vectorized successor draws, one per entry; counts len(states) samples.

        Consumes the underlying uniform stream in element order, so the
        result matches a sequence of single-draw calls.
        """
        states = np.asarray(states, dtype=np.int64)
        if states.size and (states.min() < 0 or states.max() >= self.instance.S):
            raise ContractViolation("state index out of range in batch")
        u = self.rng.random(states.size)
        out = np.empty(states.size, dtype=np.int64)
        for s in np.unique(states):
            idx, _, cum = self._row(int(s))
            pos = states == s
            hits = np.minimum(np.searchsorted(cum, u[pos], side="right"), idx.size - 1)
            out[pos] = idx[hits]
        self.draw_count += int(states.size)
        return out

    def sample_empirical_row(self, s: int, n: int) -> dict:
        """Estimate Q(s, .) from n draws; counts n samples.

        Returns the empirical distribution as a sparse {state: frequency}
        map. Uses a multinomial on the row support, so large n costs O(d),
        not O(n).
        """
        if n < 1:
            raise ContractViolation(f"per-state sample count must be >= 1, got {n}")
        self._check_state(int(s))
        idx, probs, _ = self._row(int(s))
        counts = self.rng.multinomial(n, probs)
        self.draw_count += int(n)
        return {int(t): c / n for t, c in zip(idx, counts) if c > 0}

    def derive(self, *labels) -> np.random.Generator:
        """Independent auxiliary stream tied to this sampler's seed."""
        return make_rng(derive_entropy(self._entropy, *labels))

    def spawn(self, *labels) -> "CountingSampler":
        """Child sampler with its own stream and a fresh draw tally."""
        return CountingSampler(self.instance, derive_entropy(self._entropy, *labels))

    def absorb(self, child: "CountingSampler") -> None:
        """Merge a spawned child's draw tally into this sampler's count."""
        self.draw_count += child.draw_count


def instance_to_dict(instance: ProblemInstance) -> dict:
    return {
        "S": instance.S,
        "alpha": instance.alpha,
        "cost": instance.cost.tolist(),
        "Q": [row.tolist() for row in instance.Q],
        "supergraph": [row.tolist() for row in instance.supergraph.out_edges],
    }


def instance_from_dict(doc: dict) -> ProblemInstance:
    S = int(doc["S"])
    sg = Supergraph.from_out_edges(S, doc["supergraph"])
    return ProblemInstance(
        S=S,
        alpha=float(doc["alpha"]),
        cost=np.array(doc["cost"], dtype=float),
        Q=np.array(doc["Q"], dtype=float),
        supergraph=sg,
    )


def save_instance(instance: ProblemInstance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance_to_dict(instance), fh)


def load_instance(path) -> ProblemInstance:
    with open(path, "r", encoding="utf-8") as fh:
        return instance_from_dict(json.load(fh))
