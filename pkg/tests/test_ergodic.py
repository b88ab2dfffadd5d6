import numpy as np
import pytest
from scipy.linalg import null_space, subspace_angles

from slowvec import (
    Compactum,
    InvalidParameterError,
    InvalidSpectrumError,
    NetCardinalityError,
    NoSlowVectorsError,
    NumericalInstabilityError,
    Operator,
    build_norm_context,
    cesaro_mean,
    compute_stable_split,
    eigenspace_dimension,
    ergodic_projection,
    estimate_power_bound,
    flattening_check,
    net_dimension_bound,
    make_cyclic_shift,
    make_split_operator,
    make_stochastic,
    make_swap,
    make_truncated_shift,
    synthesize_slow,
)
from slowvec.ergodic import cesaro_rate_constant, epsilon_net, flattening_value, spectral_projection
from slowvec.scenario import peripheral_compactum

from conftest import diag, random_split, unit

SWAP_P = np.full((2, 2), 0.5)


def hull(*vectors):
    return Compactum(np.array(vectors, dtype=complex))


def families():
    """Named operators whose peripheral eigenvalues are at least 0.05 apart."""
    out = {
        "swap": make_swap(),
        "identity": Operator(np.eye(3)),
        "diag": diag(0.5, 1.0),
        "cyclic5": make_cyclic_shift(5),
        "stochastic": make_stochastic(5, seed=3),
        "doubly_stochastic": make_stochastic(4, seed=1, doubly=True),
        "left_shift": make_truncated_shift(6, "left"),
    }
    for seed in range(12):
        out[f"split{seed}"] = random_split(seed, conditioning=float(10 ** (seed % 3)), with_one=seed % 2 == 0)
    return out


def peripheral_lambdas(T):
    split = compute_stable_split(T)
    lams = {1.0 + 0j}
    if split.codim:
        lams.update(complex(lam / abs(lam)) for lam, _ in split.peripheral_clusters())
    return sorted(lams, key=lambda z: np.angle(z) % (2 * np.pi))


FAMILIES = families()


class TestCesaroMean:
    def test_zero_terms_is_identity(self):
        assert np.array_equal(cesaro_mean(make_cyclic_shift(3), 1.0, 0).matrix, np.eye(3))

    def test_swap_first_mean(self):
        assert np.allclose(cesaro_mean(make_swap(), 1.0, 1).matrix, SWAP_P, atol=1e-15)

    def test_rotation_divided_out(self):
        s = cesaro_mean(diag(1j), 1j, 3).matrix
        assert np.allclose(s, np.eye(1), atol=1e-15)

    def test_preconditions(self):
        with pytest.raises(InvalidSpectrumError):
            cesaro_mean(make_swap(), 0.9, 2)
        with pytest.raises(InvalidParameterError):
            cesaro_mean(make_swap(), 1.0, -1)

    @pytest.mark.parametrize("name", sorted(FAMILIES))
    def test_matches_direct_sum_and_commutes(self, name):
        T = FAMILIES[name]
        c_hat = estimate_power_bound(T).c_hat
        for lam in peripheral_lambdas(T):
            for m in (1, 7, 32):
                s = cesaro_mean(T, lam, m).matrix
                direct = sum(np.linalg.matrix_power(T.entries / lam, i) for i in range(m + 1)) / (m + 1)
                assert np.linalg.norm(s - direct, 2) <= 1e-10
                assert np.linalg.norm(s @ T.entries - T.entries @ s, 2) <= 1e-10
                assert np.linalg.norm(s, 2) <= c_hat * (1 + 1e-6)

    @pytest.mark.parametrize("seed", range(5))
    def test_commutation_at_high_conditioning(self, seed):
        T = random_split(seed, conditioning=100.0, max_interior=20)
        for m in (16, 64):
            s = cesaro_mean(T, 1.0, m).matrix
            assert np.linalg.norm(s @ T.entries - T.entries @ s, 2) <= 1e-10

    @pytest.mark.parametrize("name", sorted(FAMILIES))
    def test_mean_fixes_eigenvectors(self, name):
        T = FAMILIES[name]
        for lam in peripheral_lambdas(T):
            for v in null_space(T.entries - lam * np.eye(T.dim), rcond=1e-10).T:
                # exact eigenvectors: rounding of (T - lam) v is the only error source
                if np.linalg.norm(T.entries @ v - lam * v) > 1e-15:
                    continue
                s = cesaro_mean(T, lam, 16).matrix
                assert np.linalg.norm(s @ v - v) <= 1e-12

    def test_mean_fixes_exact_eigenvectors_of_permutations(self):
        T = make_cyclic_shift(6)
        for k in range(6):
            lam = np.exp(2j * np.pi * k / 6)
            v = np.exp(-2j * np.pi * k * np.arange(6) / 6) / np.sqrt(6)
            if np.linalg.norm(T @ v - lam * v) < 1e-14:
                assert np.linalg.norm(cesaro_mean(T, lam, 16).matrix @ v - v) <= 1e-12


class TestErgodicProjection:
    def test_swap(self):
        proj = ergodic_projection(make_swap(), 1.0)
        assert np.abs(proj.P - SWAP_P).max() <= 1e-12
        assert proj.convergence_history[0][0] <= 1

    def test_identity(self):
        assert np.allclose(ergodic_projection(Operator(np.eye(3)), 1.0).P, np.eye(3), atol=1e-14)

    def test_contracting_coordinate_removed(self):
        proj = ergodic_projection(diag(0.5, 1.0), 1.0)
        assert np.allclose(proj.P, np.diag([0, 1]), atol=1e-12)
        assert proj.converged

    def test_non_eigenvalue_gives_zero(self):
        assert np.linalg.norm(ergodic_projection(diag(0.5, 1.0), 1j).P, 2) <= 1e-12

    def test_disagreement_is_an_error(self):
        T = diag(1.0, 0.999)
        with pytest.raises(NumericalInstabilityError) as info:
            ergodic_projection(T, 1.0, m_cap=16, max_polish=0)
        assert info.value.discrepancy > 1e-8
        assert info.value.cesaro.shape == info.value.spectral.shape == (2, 2)

    def test_history_is_doubling(self):
        proj = ergodic_projection(make_split_operator([1.0, -1.0], 0.8, 3, seed=1), 1.0)
        ms = [m for m, _ in proj.convergence_history]
        assert ms == [2**j - 1 for j in range(len(ms))]

    @pytest.mark.parametrize("name", sorted(FAMILIES))
    def test_projection_laws_and_cross_validation(self, name):
        T = FAMILIES[name]
        a = T.entries
        for lam in peripheral_lambdas(T):
            P = ergodic_projection(T, lam).P
            assert np.linalg.norm(P @ P - P, 2) <= 1e-8
            assert np.linalg.norm(a @ P - lam * P, 2) <= 1e-8
            assert np.linalg.norm(P @ a - lam * P, 2) <= 1e-8
            assert np.linalg.norm(P - spectral_projection(T, lam), 2) <= 1e-8
            ker = null_space(a - lam * np.eye(T.dim), rcond=1e-9)
            rng_p = null_space(P - np.eye(T.dim), rcond=1e-6)
            assert ker.shape[1] == rng_p.shape[1]
            if ker.shape[1]:
                assert np.max(subspace_angles(ker, rng_p)) <= 1e-6

    @pytest.mark.parametrize("name", sorted(FAMILIES))
    def test_cesaro_rate(self, name):
        T = FAMILIES[name]
        c_hat = estimate_power_bound(T).c_hat
        for lam in peripheral_lambdas(T):
            P = ergodic_projection(T, lam).P
            rate = cesaro_rate_constant(T, lam, P, c_hat)
            for m in (4, 16, 64, 256):
                assert np.linalg.norm(cesaro_mean(T, lam, m).matrix - P, 2) <= rate / (m + 1) + 1e-9


class TestNetDimensionBound:
    def test_identity_with_ball_hull(self):
        K = Compactum(np.sqrt(2) * np.array([[1, 0], [0, 1], [1j, 0], [0, 1j]]))
        rep = net_dimension_bound(Operator(np.eye(2)), K, 0.5, 1.0, net_samples=256)
        assert rep.dim_ker == 2 and rep.dim_net_span == 2 and rep.bound_holds

    def test_segment_net_spans_one_dimension(self):
        rep = net_dimension_bound(diag(0.5, 1.0), hull([0, 1]), 0.5, 1.0, net_samples=256)
        assert rep.dim_ker == 1 and rep.dim_net_span == 1 and rep.bound_holds
        # z = e1 is orthogonal to the net span and T^n z leaves the unit distance
        assert rep.witnesses and all(w["distance"] < 1 for w in rep.witnesses)
        assert rep.witnesses_ok

    def test_non_eigenvalue(self):
        rep = net_dimension_bound(diag(0.5, 1.0), hull([0, 1]), 0.5, -1.0, net_samples=64)
        assert rep.dim_ker == 0 and rep.bound_holds

    def test_net_cap(self):
        K = Compactum(np.eye(6, dtype=complex))
        with pytest.raises(NetCardinalityError) as info:
            epsilon_net(K, 0.05, samples=512, cap=8)
        assert info.value.cap == 8

    def test_net_mesh_verified(self):
        net = epsilon_net(Compactum(np.eye(2, dtype=complex)), 0.5, samples=512, slack=0.75)
        assert net.verified and net.mesh <= 0.5

    @pytest.mark.parametrize("seed", range(6))
    def test_split_families(self, seed):
        T = random_split(seed)
        K = peripheral_compactum(T)
        for lam in peripheral_lambdas(T):
            rep = net_dimension_bound(T, K, 0.6, lam, net_samples=256, witness_count=2, seed=seed)
            assert rep.bound_holds
            assert rep.dim_ker == eigenspace_dimension(T, lam)


class TestFlattening:
    def test_swap(self):
        rep = flattening_check(make_swap(), hull([1, 0], [0, 1]), 0.5, 1.0, horizon=64)
        assert rep.passed and rep.m == 1 and rep.value <= 1e-14

    def test_identity(self):
        rep = flattening_check(Operator(np.eye(2)), hull([1, 0]), 0.5, 1.0, horizon=64)
        assert rep.passed and rep.m == 0 and rep.value == 0.0

    def test_closed_form_for_contracting_coordinate(self):
        T = diag(0.9, 1.0)
        horizon = 64
        rep = flattening_check(T, hull([0, 1]), 0.5, 1.0, horizon=horizon)
        assert rep.passed
        s_m = sum(0.9**i for i in range(rep.m + 1)) / (rep.m + 1)
        closed = max(0.9**n * s_m for n in range(horizon // 2, horizon + 1))
        assert abs(rep.value - closed) <= 1e-9
        P = np.diag([0.0, 1.0])
        for n in (0, 5, 40):
            expected = 0.9**n * sum(0.9**i for i in range(4)) / 4
            assert abs(flattening_value(T, P, 1.0, 3, n) - expected) <= 1e-9

    def test_witness_lies_in_kernel_of_projection(self):
        T = make_split_operator([1.0, 1j], 0.9, 4, conditioning=5.0, seed=4)
        rep = flattening_check(T, peripheral_compactum(T), 0.6, 1.0, horizon=64)
        P = ergodic_projection(T, 1.0).P
        assert np.linalg.norm(P @ rep.witness) <= 1e-8
        assert np.linalg.norm(rep.witness) == pytest.approx(1.0)

    def test_failure_reports_best_value(self):
        T = diag(0.999, 1.0)
        rep = flattening_check(T, hull([0, 1]), 0.5, 1.0, bound=1e-6, horizon=16, m_cap=8)
        assert not rep.passed
        assert rep.value == min(v for _, v in rep.history)

    @pytest.mark.parametrize("seed", range(8))
    def test_split_families_flatten(self, seed):
        T = random_split(seed)
        K = peripheral_compactum(T)
        for lam in peripheral_lambdas(T):
            if eigenspace_dimension(T, lam):
                assert flattening_check(T, K, 0.6, lam).passed


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_codim_zero_iff_no_slow_vectors(name):
    T = FAMILIES[name]
    split = compute_stable_split(T)
    ctx = build_norm_context(T)
    try:
        synthesize_slow(T, 0.01, ctx, split)
        has_slow = True
    except NoSlowVectorsError:
        has_slow = False
    assert (split.codim == 0) == (not has_slow)
