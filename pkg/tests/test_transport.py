"""Optimal-transport kernels: GW distance, coupling rounding, sliced Wasserstein."""

import itertools

import numpy as np
import pytest

from layoutgen.features import pairwise_distances
from layoutgen.graphs import build_graph, structural_equivalence
from layoutgen.transport import (
    Coupling,
    GWConfig,
    coupling_to_permutation,
    gw_distance,
    gw_exact,
    permutation_matrix,
    sen_permutation,
    sliced_wasserstein,
    unit_slices,
)


def brute_force_gw(c1, c2):
    """Test-local oracle: minimum over all permutations by direct enumeration."""
    m = c1.shape[0]
    best = None
    for perm in itertools.permutations(range(m)):
        p = list(perm)
        val = float(np.sum((c1[np.ix_(p, p)] - c2) ** 2)) / (m * m)
        best = val if best is None or val < best else best
    return best


def random_costs(rng, m):
    return pairwise_distances(rng.normal(size=(m, 2)))


class TestGWDistance:
    def test_self_distance_zero(self, rng):
        c = random_costs(rng, 8)
        value, coupling = gw_distance(c, c)
        assert value <= 1e-6
        assert np.allclose(coupling.matrix.sum(axis=0), 1.0 / 8, atol=1e-6)
        assert np.allclose(coupling.matrix.sum(axis=1), 1.0 / 8, atol=1e-6)

    def test_permutation_invariance(self, rng):
        c = random_costs(rng, 7)
        p = rng.permutation(7)
        value, _ = gw_distance(c, c[np.ix_(p, p)])
        assert value <= 1e-6

    def test_equilateral_vs_isoceles(self):
        # distances {1,1,1} vs {1,1,2}: optimum over all 6 permutations
        c1 = np.array([[0, 1, 1], [1, 0, 1], [1, 1, 0]], dtype=float)
        c2 = np.array([[0, 1, 1], [1, 0, 2], [1, 2, 0]], dtype=float)
        value, _ = gw_distance(c1, c2)
        assert np.isclose(value, brute_force_gw(c1, c2), rtol=1e-9)

    def test_symmetric_in_arguments(self, rng):
        for _ in range(5):
            m = int(rng.integers(3, 15))
            c1, c2 = random_costs(rng, m), random_costs(rng, m)
            v1, _ = gw_distance(c1, c2)
            v2, _ = gw_distance(c2, c1)
            assert abs(v1 - v2) <= 1e-5

    def test_swapped_arguments_transpose_coupling(self, rng):
        c1, c2 = random_costs(rng, 5), random_costs(rng, 5)
        _, t12 = gw_distance(c1, c2)
        _, t21 = gw_distance(c2, c1)
        assert np.array_equal(t12.matrix, t21.matrix.T)

    def test_near_oracle_small_m(self, rng):
        for _ in range(25):
            m = int(rng.integers(2, 7))
            c1, c2 = random_costs(rng, m), random_costs(rng, m)
            value, _ = gw_distance(c1, c2)
            oracle = brute_force_gw(c1, c2)
            assert value >= -1e-15
            assert abs(value - oracle) <= 0.05 * max(oracle, 1e-12)

    def test_value_never_negative(self, rng):
        for _ in range(10):
            c = random_costs(rng, 6)
            value, _ = gw_distance(c, c)
            assert value >= 0.0

    def test_shape_mismatch(self, rng):
        with pytest.raises(ValueError, match="square"):
            gw_distance(random_costs(rng, 3), random_costs(rng, 4))

    def test_single_point(self):
        value, coupling = gw_distance(np.zeros((1, 1)), np.zeros((1, 1)))
        assert value == 0.0
        assert coupling.matrix == np.ones((1, 1))


class TestGWExact:
    def test_matches_loop_enumeration(self, rng):
        c1, c2 = random_costs(rng, 5), random_costs(rng, 5)
        value, perm = gw_exact(c1, c2)
        assert np.isclose(value, brute_force_gw(c1, c2), rtol=1e-12)
        m = 5
        applied = float(np.sum((c1[np.ix_(perm, perm)] - c2) ** 2)) / (m * m)
        assert np.isclose(applied, value, rtol=1e-12)

    def test_identity_on_equal_inputs(self, rng):
        c = random_costs(rng, 4)
        value, _ = gw_exact(c, c)
        assert value == 0.0


class TestCouplingToPermutation:
    def test_identity(self):
        perm, mass = coupling_to_permutation(Coupling(np.eye(4) / 4))
        assert np.array_equal(perm, np.arange(4))
        assert np.isclose(mass, 1.0)

    def test_reversal(self):
        perm, _ = coupling_to_permutation(Coupling(np.fliplr(np.eye(3)) / 3))
        assert np.array_equal(perm, [2, 1, 0])

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force_max_mass(self, seed):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(2, 8))
        # random doubly-stochastic-ish matrix via repeated normalization
        t = rng.random((m, m))
        for _ in range(50):
            t /= t.sum(axis=1, keepdims=True)
            t /= t.sum(axis=0, keepdims=True)
        t /= m
        perm, mass = coupling_to_permutation(Coupling(t))
        best = max(itertools.permutations(range(m)),
                   key=lambda p: sum(t[i, p[i]] for i in range(m)))
        assert np.isclose(mass, sum(t[i, best[i]] for i in range(m)), rtol=1e-12)


class TestSlicedWasserstein:
    def test_identical_samples_zero(self, rng):
        p = rng.normal(size=(30, 2))
        assert sliced_wasserstein(p, p) == 0.0

    def test_symmetric(self, rng):
        p, q = rng.normal(size=(20, 2)), rng.normal(size=(20, 2))
        assert sliced_wasserstein(p, q) == sliced_wasserstein(q, p)

    def test_one_dimensional_oracle(self, rng):
        # d=1, L=1: SW is exactly the sorted-matching squared Wasserstein
        p = rng.normal(size=(50, 1))
        q = rng.normal(size=(50, 1))
        got = sliced_wasserstein(p, q, slices=1, seed=0)
        theta = unit_slices(1, 1, np.random.default_rng(0))[0, 0]
        oracle = float(np.mean((np.sort(p[:, 0] * theta) - np.sort(q[:, 0] * theta)) ** 2))
        assert abs(got - oracle) < 1e-9

    def test_translation_increases(self, rng):
        p = rng.normal(size=(40, 2))
        vals = [sliced_wasserstein(p, p + delta, slices=100, seed=1)
                for delta in (0.1, 0.5, 2.0)]
        assert vals[0] < vals[1] < vals[2]

    def test_shape_mismatch(self, rng):
        with pytest.raises(ValueError, match="shapes"):
            sliced_wasserstein(rng.normal(size=(5, 2)), rng.normal(size=(6, 2)))


class TestUnitSlices:
    def test_unit_norm(self, rng):
        v = unit_slices(100, 3, rng)
        assert np.allclose(np.linalg.norm(v, axis=1), 1.0, atol=1e-9)


class TestSENPermutation:
    def test_all_singletons_identity(self, rng):
        g = build_graph(4, [(0, 1), (1, 2), (2, 3)])
        part = structural_equivalence(g)
        assert part.nontrivial_count == 0
        perm = sen_permutation(rng.normal(size=(4, 2)), rng.normal(size=(4, 2)), part)
        assert np.array_equal(perm, np.arange(4))

    def test_swapped_pair_recovered(self, twin_graph, rng):
        part = structural_equivalence(twin_graph)
        pos = rng.normal(size=(6, 2))
        recon = pos.copy()
        recon[[2, 3]] = recon[[3, 2]]  # swap one SEN pair in the reconstruction
        perm = sen_permutation(pos, recon, part)
        aligned = pos[perm]
        # after alignment the within-group geometry matches the recon exactly
        for members in part.nontrivial_classes():
            idx = list(members)
            da = pairwise_distances(aligned[idx])
            dr = pairwise_distances(recon[idx])
            assert np.allclose(da, dr, atol=1e-12)

    def test_never_worse_than_identity(self, rng):
        g = build_graph(5, [(0, i) for i in range(1, 5)])  # star: leaves one class
        part = structural_equivalence(g)
        for _ in range(20):
            pos, recon = rng.normal(size=(5, 2)), rng.normal(size=(5, 2))
            perm = sen_permutation(pos, recon, part)
            for members in part.nontrivial_classes():
                idx = np.array(members)
                ci = pairwise_distances(pos[idx])
                ca = pairwise_distances(pos[perm][idx])
                cr = pairwise_distances(recon[idx])
                assert np.sum((ca - cr) ** 2) <= np.sum((ci - cr) ** 2) + 1e-12

    def test_degenerate_group_warns_identity(self, twin_graph):
        part = structural_equivalence(twin_graph)
        pos = np.zeros((6, 2))
        pos[:, 0] = [0, 1, 2, 2, 3, 4]  # nodes 2 and 3 coincide -> zero within-group spread
        recon = np.random.default_rng(0).normal(size=(6, 2))
        with pytest.warns(UserWarning, match="degenerate"):
            perm = sen_permutation(pos, recon, part)
        assert perm[2] == 2 and perm[3] == 3

    def test_large_class_uses_entropic_path(self, rng):
        # star with 8 leaves: class size above the enumeration threshold
        g = build_graph(9, [(0, i) for i in range(1, 9)])
        part = structural_equivalence(g)
        pos = rng.normal(size=(9, 2))
        recon = pos.copy()
        recon[1:] = recon[np.r_[0, rng.permutation(8) + 1]][1:]
        perm = sen_permutation(pos, recon, part, GWConfig())
        assert sorted(perm) == list(range(9))
        assert perm[0] == 0  # hub is a singleton class

    def test_mismatched_sizes(self, twin_graph, rng):
        part = structural_equivalence(twin_graph)
        with pytest.raises(ValueError, match="same node set"):
            sen_permutation(rng.normal(size=(5, 2)), rng.normal(size=(6, 2)), part)


class TestPermutationMatrix:
    def test_applies_convention(self, rng):
        perm = np.array([2, 0, 1])
        t = permutation_matrix(perm)
        x = rng.normal(size=(3, 2))
        assert np.array_equal(t @ x, x[perm])
