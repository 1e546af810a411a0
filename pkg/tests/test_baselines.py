import numpy as np
import pytest

from epelab import (
    ContractViolation,
    CountingSampler,
    approx_contributions,
    backward_epe,
    backward_epe_alternative,
    error_process,
    exact_value,
)
from epelab.rng import make_rng
from conftest import random_instance


class TestApproxContributions:
    def test_single_state_hand_trace(self, point_mass):
        report = approx_contributions(point_mass.Q, point_mass.cost, 0.5, 0.3, make_rng(0), trace=True)
        assert report.iterations == 2
        assert report.estimate == pytest.approx([0.75], abs=0)
        assert report.samples_used == 0

    def test_large_epsilon_zero_vector(self, two_cycle):
        report = approx_contributions(two_cycle.Q, two_cycle.cost, 0.5, 1.5, make_rng(0))
        assert report.iterations == 0
        assert np.all(report.estimate == 0.0)

    def test_fixed_point_identity_every_iteration(self):
        for i in range(5):
            inst = random_instance(S=10, p=4, alpha=0.6, seed=("fp", i))
            report = approx_contributions(inst.Q, inst.cost, inst.alpha, 0.05, make_rng(i), trace=True)
            errors = error_process(report.trace, inst.Q)
            assert np.max(np.abs(errors.values)) <= 1e-10

    def test_error_within_epsilon(self):
        for i in range(5):
            inst = random_instance(S=10, p=4, alpha=0.6, seed=("eps", i))
            report = approx_contributions(inst.Q, inst.cost, inst.alpha, 0.1, make_rng(i))
            assert np.max(np.abs(report.estimate - exact_value(inst))) <= 0.1 + 1e-10

    def test_iteration_bound_by_value_mass(self):
        epsilon, alpha = 0.1, 0.6
        for i in range(5):
            inst = random_instance(S=10, p=4, alpha=alpha, seed=("kb", i))
            report = approx_contributions(inst.Q, inst.cost, alpha, epsilon, make_rng(i))
            bound = np.sum(exact_value(inst)) / (epsilon * (1 - alpha))
            assert report.iterations <= bound + 1e-9


class TestBackwardAlternative:
    def test_point_mass_matches_sampled_variant(self, point_mass):
        # Deterministic rows leave no sampling noise to differ on.
        s1 = CountingSampler(point_mass, 1)
        s2 = CountingSampler(point_mass, 1)
        neighbors = point_mass.supergraph.in_neighbors
        alt = backward_epe_alternative(s1, point_mass.cost, 0.5, neighbors, 0.3, 4)
        plain = backward_epe(s2, point_mass.cost, 0.5, neighbors, 0.3, 4)
        assert np.array_equal(alt.estimate, plain.estimate)
        assert alt.samples_used == 8  # resampled at both pushes
        assert plain.samples_used == 4

    def test_resampling_never_cheaper(self):
        for i in range(10):
            inst = random_instance(S=8, p=3, alpha=0.5, seed=("cost", i))
            neighbors = inst.supergraph.in_neighbors
            alt = backward_epe_alternative(CountingSampler(inst, i), inst.cost, 0.5, neighbors, 0.2, 3)
            plain = backward_epe(CountingSampler(inst, i), inst.cost, 0.5, neighbors, 0.2, 3)
            assert alt.samples_used >= plain.samples_used

    def test_sample_accounting_total_in_degree(self):
        inst = random_instance(S=8, p=3, alpha=0.5, seed="acct")
        sampler = CountingSampler(inst, 0)
        report = backward_epe_alternative(
            sampler, inst.cost, 0.5, inst.supergraph.in_neighbors, 0.2, 3, trace=True
        )
        degrees = inst.supergraph.in_degrees
        expected = 3 * sum(int(degrees[r.state]) for r in report.trace.records)
        assert report.samples_used == expected == sampler.draw_count

    def test_error_process_starts_at_zero(self):
        inst = random_instance(S=6, p=3, alpha=0.5, seed="e0")
        sampler = CountingSampler(inst, 4)
        report = backward_epe_alternative(
            sampler, inst.cost, 0.5, inst.supergraph.in_neighbors, 0.1, 3, trace=True
        )
        errors = error_process(report.trace, inst.Q)
        assert np.all(errors.values[0] == 0.0)

    def test_final_error_mean_near_zero(self):
        # Unbiasedness smoke test; the acceptance suite runs the full version.
        inst = random_instance(S=4, p=2, alpha=0.5, seed="mart")
        finals = []
        for i in range(400):
            sampler = CountingSampler(inst, ("run", i))
            report = backward_epe_alternative(
                sampler, inst.cost, 0.5, inst.supergraph.in_neighbors, 0.1, 3, trace=True
            )
            finals.append(error_process(report.trace, inst.Q).final)
        finals = np.array(finals)
        mean = finals.mean(axis=0)
        stderr = finals.std(axis=0, ddof=1) / np.sqrt(len(finals))
        assert np.all(np.abs(mean) <= 4 * stderr + 1e-12)


class TestErrorProcess:
    def test_martingale_increment_mean_near_zero(self):
        inst = random_instance(S=4, p=2, alpha=0.5, seed="inc")
        first_increments = []
        for i in range(600):
            sampler = CountingSampler(inst, ("inc", i))
            report = backward_epe_alternative(
                sampler, inst.cost, 0.5, inst.supergraph.in_neighbors, 0.15, 2, trace=True
            )
            inc = error_process(report.trace, inst.Q).increments
            if len(inc):
                first_increments.append(inc[0])
        arr = np.array(first_increments)
        mean = arr.mean(axis=0)
        stderr = arr.std(axis=0, ddof=1) / np.sqrt(len(arr))
        assert np.all(np.abs(mean) <= 4 * stderr + 1e-12)

    def test_rejects_bad_epsilon(self, two_cycle):
        with pytest.raises(ContractViolation):
            approx_contributions(two_cycle.Q, two_cycle.cost, 0.5, 0.0, make_rng(0))
        with pytest.raises(ContractViolation):
            backward_epe_alternative(
                CountingSampler(two_cycle, 0), two_cycle.cost, 0.5,
                two_cycle.supergraph.in_neighbors, -0.1, 3,
            )


class TestCoupledTieBreaks:
    def test_identical_tie_streams_couple_push_sequences(self):
        # Equal residuals (binary costs) force ties; a shared tie stream
        # makes the known-matrix run and the exact-row run pick identically.
        inst = random_instance(S=8, p=3, alpha=0.5, seed="ties", cost_model="binary", H=4)
        r1 = approx_contributions(inst.Q, inst.cost, 0.5, 0.2, make_rng("t"), trace=True)
        r2 = approx_contributions(inst.Q, inst.cost, 0.5, 0.2, make_rng("t"), trace=True)
        assert [a.state for a in r1.trace.records] == [b.state for b in r2.trace.records]
