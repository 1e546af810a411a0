import numpy as np
import pytest

from epelab import (
    ContractViolation,
    EnsembleSpec,
    density_for_case,
    generate_binary_cost,
    generate_instance,
    validate_instance,
)


class TestGenerateInstance:
    def test_full_density_complete_supergraph(self):
        spec = EnsembleSpec(S=6, p=6, alpha=0.5)
        inst = generate_instance(spec, 0)
        assert all(len(row) == 6 for row in inst.supergraph.out_edges)
        assert inst.supergraph.avg_degree == 6.0

    def test_every_instance_validates(self):
        for i in range(30):
            spec = EnsembleSpec(S=14, p=4, alpha=0.7)
            assert validate_instance(generate_instance(spec, ("gen", i))) == []

    def test_supergraph_support_equals_chain_support(self):
        spec = EnsembleSpec(S=12, p=4, alpha=0.5)
        inst = generate_instance(spec, 3)
        assert np.array_equal(inst.supergraph.edge_mask(), inst.Q > 0)

    def test_deterministic_in_seed(self):
        spec = EnsembleSpec(S=10, p=3, alpha=0.5)
        a = generate_instance(spec, ("same", 1))
        b = generate_instance(spec, ("same", 1))
        assert np.array_equal(a.Q, b.Q)
        assert np.array_equal(a.cost, b.cost)

    def test_mixed_cost_moments(self):
        # E d_bar = p and E ||c||_1 = 3p/2 at the stated tolerance band.
        spec = EnsembleSpec(S=400, p=10, alpha=0.5)
        dbars, c1s = [], []
        for i in range(100):
            inst = generate_instance(spec, ("mom", i))
            dbars.append(inst.supergraph.avg_degree)
            c1s.append(float(np.sum(inst.cost)))
        assert 9.0 <= np.mean(dbars) <= 11.0
        assert 13.0 <= np.mean(c1s) <= 17.0

    def test_mixed_cost_inf_norm_band(self):
        spec = EnsembleSpec(S=50, p=5, alpha=0.5)
        for i in range(20):
            inst = generate_instance(spec, ("band", i))
            assert 1.0 <= inst.cost_inf <= 2.0

    def test_density_out_of_range_rejected(self):
        with pytest.raises(ContractViolation):
            EnsembleSpec(S=10, p=11, alpha=0.5)
        with pytest.raises(ContractViolation):
            EnsembleSpec(S=10, p=0.5, alpha=0.5)


class TestBinaryCost:
    def test_all_ones_at_full_H(self):
        assert np.array_equal(generate_binary_cost(5, 5, 0), np.ones(5))

    def test_norms(self):
        for i in range(20):
            c = generate_binary_cost(12, 4, ("bin", i))
            assert c.max() == 1.0
            assert c.sum() == 4.0
            assert set(np.unique(c)) <= {0.0, 1.0}

    def test_single_one_uniform_over_positions(self):
        counts = np.zeros(10)
        for i in range(10_000):
            counts += generate_binary_cost(10, 1, ("uni", i))
        freqs = counts / 10_000
        assert np.all(np.abs(freqs - 0.1) < 0.02)

    def test_H_out_of_range(self):
        with pytest.raises(ContractViolation):
            generate_binary_cost(5, 0, 0)
        with pytest.raises(ContractViolation):
            generate_binary_cost(5, 6, 0)

    def test_binary_spec_generates_binary_cost(self):
        spec = EnsembleSpec(S=20, p=5, alpha=0.5, cost_model="binary", H=3)
        inst = generate_instance(spec, 9)
        assert inst.cost.sum() == 3.0
        assert inst.cost_inf == 1.0


class TestDensityCases:
    def test_case_schedules(self):
        assert density_for_case("case1", 400, 10.0) == 10.0
        assert density_for_case("case2", 100) == pytest.approx(10.0)
        assert density_for_case("case3", 100) == pytest.approx(10.0)
        assert density_for_case("case2", 400) == pytest.approx((100 * 400) ** 0.25)
        assert density_for_case("case3", 400) == pytest.approx(20.0)
        with pytest.raises(ContractViolation):
            density_for_case("case4", 100)
