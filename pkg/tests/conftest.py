import numpy as np
import pytest

from epelab import EnsembleSpec, ProblemInstance, generate_instance


def instance_from(alpha, cost, Q, supergraph=None):
    return ProblemInstance.from_arrays(alpha, cost, Q, supergraph)


@pytest.fixture
def point_mass():
    # Single absorbing state: v = c exactly.
    return instance_from(0.5, [1.0], [[1.0]])


@pytest.fixture
def two_cycle():
    # Two states swapping deterministically; v = [2/3, 1/3] at alpha = 0.5.
    return instance_from(0.5, [1.0, 0.0], [[0.0, 1.0], [1.0, 0.0]])


def random_instance(S, p, alpha, seed, cost_model="mixed", H=None):
    spec = EnsembleSpec(S=S, p=p, alpha=alpha, cost_model=cost_model, H=H)
    return generate_instance(spec, seed)


def dense_rows(rows, S):
    out = np.zeros((S, S))
    for s, row in rows.items():
        for t, q in row.items():
            out[s, t] = q
    return out
