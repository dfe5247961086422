import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from airfl.airlink import (
    DELTA_FLOOR,
    GradientStats,
    NoiseParams,
    RisMode,
    RisState,
    Transceiver,
    aggregate_over_the_air,
    aircomp_round,
    approx_ris_output,
    denormalize_gradient,
    effective_channel,
    effective_ris_matrix,
    exact_ris_output,
    gradient_statistics,
    link_mse,
    mse_closed_form,
    normalize_gradient,
    pack_complex,
    recover_global_gradient,
    ris_reflect_power,
    unpack_complex,
)
from airfl.channel import ChannelSet
from airfl.errors import ModeNone, PowerViolation, SingularReflectionLoop
from airfl.expcli.verify import ris_approx_errors

from conftest import desk_instance

NOISELESS = NoiseParams(0.0, 0.0)


def crandn(rng, *shape):
    return (rng.normal(size=shape) + 1j * rng.normal(size=shape)) / np.sqrt(2)


class TestReflection:
    def test_scalar_geometric_series(self):
        ris = RisState(np.array([2.0 + 0j]))
        out = exact_ris_output(ris, np.array([[0.1]]), np.array([1.0]), np.array([0.0]))
        np.testing.assert_allclose(out, [2.5])

    def test_no_self_interference(self, rng):
        phi = crandn(rng, 5)
        x, z = crandn(rng, 5), crandn(rng, 5)
        ris = RisState(phi)
        zero = np.zeros((5, 5))
        np.testing.assert_allclose(exact_ris_output(ris, zero, x, z), phi * (x + z), atol=1e-15)
        np.testing.assert_array_equal(effective_ris_matrix(ris, zero), np.diag(phi))

    def test_psi_expansion(self, rng):
        phi, h = crandn(rng, 3), crandn(rng, 3, 3)
        expect = np.empty((3, 3), complex)
        for r in range(3):
            for c in range(3):
                expect[r, c] = (phi[r] if r == c else 0) + phi[r] * h[r, c] * phi[c]
        np.testing.assert_allclose(effective_ris_matrix(RisState(phi), h), expect, atol=1e-15)

    def test_passive_is_unit_diagonal(self, rng):
        phi = np.exp(1j * rng.uniform(0, 2 * np.pi, 4))
        psi = effective_ris_matrix(RisState(phi, RisMode.PASSIVE), crandn(rng, 4, 4))
        np.testing.assert_allclose(np.abs(np.diag(psi)), 1.0)
        np.testing.assert_array_equal(psi, np.diag(np.diag(psi)))

    def test_mode_none(self):
        with pytest.raises(ModeNone):
            effective_ris_matrix(RisState.none(), np.zeros((2, 2)))

    def test_passive_rejects_amplification(self):
        with pytest.raises(ValueError):
            RisState(np.array([2.0, 1.0]), RisMode.PASSIVE)

    def test_singular_loop(self):
        ris = RisState(np.array([1.0 + 0j]))
        with pytest.raises(SingularReflectionLoop):
            exact_ris_output(ris, np.array([[1.0]]), np.ones(1), np.zeros(1))

    def test_approximation_second_order(self):
        errors = ris_approx_errors(seed=17, num_seeds=3)
        assert np.all(errors[:, :-1] / errors[:, 1:] >= 50)

    def test_approximation_first_order_exact_when_nilpotent(self, rng):
        # strictly upper-triangular H: (ΦH)² ≠ 0 in general, but for N = 2 it vanishes
        phi = crandn(rng, 2)
        h = np.array([[0.0, 0.3], [0.0, 0.0]], complex)
        ris = RisState(phi)
        x = crandn(rng, 2)
        np.testing.assert_allclose(approx_ris_output(ris, h, x, 0 * x), exact_ris_output(ris, h, x, 0 * x))


class TestEffectiveChannel:
    def test_scalar(self):
        h = effective_channel(np.array([1.0]), np.array([[2.0]]), np.array([[3.0]]), np.array([4.0]))
        np.testing.assert_allclose(h, [25.0])

    def test_zero_psi(self, rng):
        hd = crandn(rng, 3)
        np.testing.assert_allclose(effective_channel(hd, crandn(rng, 3, 2), np.zeros((2, 2)), crandn(rng, 2)), hd)

    def test_naive_loop(self, rng):
        u, m, n = 3, 4, 5
        hd, g, psi, hr = crandn(rng, u, m), crandn(rng, m, n), crandn(rng, n, n), crandn(rng, u, n)
        expect = hd.copy()
        for i in range(u):
            for a in range(m):
                for p in range(n):
                    for q in range(n):
                        expect[i, a] += g[a, p] * psi[p, q] * hr[i, q]
        np.testing.assert_allclose(effective_channel(hd, g, psi, hr), expect, atol=1e-12)


class TestNormalization:
    def test_hand_example(self):
        s, mean, std = normalize_gradient([1.0, 2.0, 3.0])
        assert mean == 2.0
        assert std == pytest.approx(np.sqrt(2 / 3))
        np.testing.assert_allclose(s, np.array([-1.0, 0.0, 1.0]) / np.sqrt(2 / 3))

    def test_constant(self):
        s, mean, std = normalize_gradient([5.0, 5.0])
        np.testing.assert_array_equal(s, [0.0, 0.0])
        assert (mean, std) == (5.0, DELTA_FLOOR)

    @given(arrays(float, st.integers(1, 50), elements=st.floats(-1e3, 1e3)))
    def test_round_trip(self, g):
        s, mean, std = normalize_gradient(g)
        np.testing.assert_allclose(denormalize_gradient(s, mean, std), g, atol=1e-12 * max(1.0, np.abs(g).max()))

    def test_unit_moments(self, rng):
        s, _, _ = normalize_gradient(rng.normal(3.0, 7.0, 1000))
        assert abs(s.mean()) < 1e-12 and s.std() == pytest.approx(1.0)


class TestPacking:
    def test_even(self):
        np.testing.assert_array_equal(pack_complex([1, 2, 3, 4]), [1 + 3j, 2 + 4j])

    def test_padding(self):
        np.testing.assert_array_equal(pack_complex([7.0]), [7 + 0j])

    @given(arrays(float, st.integers(1, 40), elements=st.floats(-1e6, 1e6)))
    def test_round_trip(self, s):
        np.testing.assert_array_equal(unpack_complex(pack_complex(s), s.size), s)

    def test_statistics_unit_power(self, rng):
        stats, packed = gradient_statistics(rng.normal(size=(3, 200)), [10, 20, 30])
        np.testing.assert_allclose(np.mean(np.abs(packed) ** 2, axis=1), 1.0, rtol=1e-12)
        np.testing.assert_array_equal(stats.sizes, [10, 20, 30])


def scalar_link(h_e=2.0, target=3.0):
    ch = ChannelSet(np.array([[h_e + 0j]]), np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((1, 1)))
    stats = GradientStats([0.0], [target], [1])
    return ch, stats


class TestAirComp:
    def test_perfect_alignment(self, rng):
        ch, stats = scalar_link(2.0, 3.0)
        tx = Transceiver(m=np.array([1.5]), b=np.array([1.0]), p_node=1.0)
        sig = crandn(rng, 1, 6)
        s_hat = aircomp_round(sig, tx, ch, RisState.none(), NOISELESS, rng)
        np.testing.assert_allclose(s_hat, 3.0 * sig[0])

    def test_zero_transmit(self, rng):
        ch, _ = scalar_link()
        tx = Transceiver(m=np.array([1.0]), b=np.array([0.0]), p_node=1.0)
        np.testing.assert_array_equal(aircomp_round(crandn(rng, 1, 4), tx, ch, RisState.none(), NOISELESS, rng), 0)

    def test_power_violation(self, rng):
        ch, _ = scalar_link()
        tx = Transceiver(m=np.array([1.0]), b=np.array([2.0]), p_node=1.0)
        with pytest.raises(PowerViolation):
            aircomp_round(np.ones((1, 2)), tx, ch, RisState.none(), NOISELESS, rng)

    def test_noiseless_chain_recovers_gradient(self, rng):
        ch, stats_unused = scalar_link(1.0, 1.0)
        grads = rng.normal(size=(1, 9))
        stats, packed = gradient_statistics(grads, [1])
        tx = Transceiver(m=np.array([stats.stds[0]]), b=np.array([1.0]), p_node=1.0)
        g_hat = aggregate_over_the_air(packed, stats, 9, tx, ch, RisState.none(), NOISELESS, rng)
        np.testing.assert_allclose(g_hat, grads[0], atol=1e-12)

    def test_recover_identity(self):
        stats = GradientStats([0.0], [1.0], [1])
        np.testing.assert_array_equal(recover_global_gradient([1.0, -2.0], stats), [1.0, -2.0])

    def test_recover_scaling(self, rng):
        stats = GradientStats(rng.normal(size=3), rng.uniform(0.5, 2, 3), [4, 5, 6])
        s = rng.normal(size=50)
        err = rng.normal(scale=0.1, size=50)
        diff = recover_global_gradient(s + err, stats) - recover_global_gradient(s, stats)
        np.testing.assert_allclose(np.mean(diff**2), np.mean(err**2) / stats.total_size**2)

    def test_montecarlo(self):
        ch, _ = desk_instance(3, num_nodes=3, num_elements=8)
        rng = np.random.default_rng(0)
        stats = GradientStats(np.zeros(3), [1.0, 2.0, 0.5], [2, 3, 4])
        ris = RisState(0.5 * np.exp(1j * rng.uniform(0, 2 * np.pi, 8)))
        m = crandn(rng, 4) * 1e3
        tx = Transceiver(m=m, b=np.exp(1j * rng.uniform(0, 2 * np.pi, 3)), p_node=1.0)
        noise = NoiseParams(1e-9, 1e-9)
        sig = crandn(rng, 3, 20_000)
        s = stats.targets @ sig
        emp = np.mean(np.abs(aircomp_round(sig, tx, ch, ris, noise, rng) - s) ** 2)
        assert emp == pytest.approx(link_mse(tx, ch, ris, stats, noise), rel=0.03)


class TestClosedForms:
    def test_zero_beamformer(self, rng):
        stats = GradientStats(np.zeros(3), [1.0, 2.0, 3.0], [1, 2, 3])
        tx = Transceiver(m=np.zeros(2), b=np.ones(3), p_node=1.0)
        assert mse_closed_form(tx, crandn(rng, 3, 2), None, stats, NoiseParams()) == pytest.approx(1 + 16 + 81)

    def test_perfect_alignment_zero(self):
        ch, stats = scalar_link(2.0, 3.0)
        tx = Transceiver(m=np.array([1.5]), b=np.array([1.0]), p_node=1.0)
        assert link_mse(tx, ch, RisState.none(), stats, NOISELESS) == 0.0

    def test_reflect_power_zero(self, rng):
        tx = Transceiver(m=np.ones(1), b=np.zeros(2), p_node=1.0)
        assert ris_reflect_power(tx, crandn(rng, 3, 3), crandn(rng, 2, 3), 0.0) == 0.0

    def test_reflect_power_identity(self, rng):
        hr = crandn(rng, 1, 4)
        tx = Transceiver(m=np.ones(1), b=np.ones(1), p_node=1.0)
        expect = np.sum(np.abs(hr) ** 2) + 0.3 * 4
        assert ris_reflect_power(tx, np.eye(4), hr, 0.3) == pytest.approx(expect)

    def test_reflect_power_montecarlo(self, rng):
        n, u = 4, 2
        psi, hr = crandn(rng, n, n), crandn(rng, u, n)
        b = np.array([0.7, 0.4j])
        tx = Transceiver(m=np.ones(1), b=b, p_node=1.0)
        draws = 20_000
        x = crandn(rng, u, draws)
        z = crandn(rng, n, draws) * np.sqrt(0.2)
        r = psi @ (hr.T @ (b[:, None] * x) + z)
        emp = np.mean(np.sum(np.abs(r) ** 2, axis=0))
        assert emp == pytest.approx(ris_reflect_power(tx, psi, hr, 0.2), rel=0.03)

    @given(st.integers(0, 2**32 - 1), st.floats(0, 2 * np.pi))
    def test_common_phase_invariance(self, seed, theta):
        ch, stats = desk_instance(seed, num_nodes=3, num_antennas=2, num_elements=4)
        r = np.random.default_rng(seed)
        tx = Transceiver(m=crandn(r, 2), b=crandn(r, 3), p_node=10.0)
        rot = Transceiver(m=tx.m * np.exp(1j * theta), b=tx.b * np.exp(1j * theta), p_node=10.0)
        ris = RisState(crandn(r, 4))
        noise = NoiseParams(1e-8, 1e-8)
        np.testing.assert_allclose(link_mse(rot, ch, ris, stats, noise), link_mse(tx, ch, ris, stats, noise), rtol=1e-10)
