"""Green's kernel layer: the boundary coupling constant, the memoized
boundary integral G, the assembled kernels, and their sharp bounds."""

import math

import numpy as np
import pytest

from fracbvp import FracOrder, Integrand, KernelSet, compute_lambda, gamma


def test_lambda_closed_forms(sublinear):
    # h1 weight t^(alpha1-1) collapses to e^(-t): Lambda_1 = 1.
    assert abs(compute_lambda(sublinear.h1, sublinear.alpha1) - 1.0) < 1e-10
    # h2 weight t^(alpha2-1) collapses to e^(-2t): Lambda_2 = 1/2.
    assert abs(compute_lambda(sublinear.h2, sublinear.alpha2) - 0.5) < 1e-10


def test_build_populates_constants(kernels):
    ks1, ks2 = kernels
    assert abs(ks1.gamma_alpha - gamma(2.5)) < 1e-14
    assert abs(ks2.gamma_alpha - gamma(1.5)) < 1e-14
    assert abs(ks1.denom - (ks1.gamma_alpha - 1.0)) < 1e-10
    assert abs(ks2.denom - (ks2.gamma_alpha - 0.5)) < 1e-10


def test_build_rejects_strong_coupling():
    # Scaling h1 by 1.4 pushes Lambda to 1.4 > Gamma(2.5) ~ 1.329.
    strong = Integrand(lambda t: 1.4 * t**-1.5 * np.exp(-t),
                       endpoint_exponent=-1.5, decay_hint=1.0)
    with pytest.raises(ValueError, match="boundary coupling too strong"):
        KernelSet.build(FracOrder(2.5), strong)


def test_no_boundary_degenerates_cleanly():
    ks = KernelSet.build(FracOrder(2.5), None)
    assert ks.lam == 0.0
    assert ks.g_of(3.0) == 0.0
    assert ks.k(1.0, 0.5) == ks.k1(1.0, 0.5)
    assert ks.kstar(0.5, 1.0) == 1.0
    assert ks.kstar(1.0, 0.5) == 0.0


def test_k1_closed_form(kernels):
    ks1, _ = kernels
    a = ks1.alpha.q
    ga = ks1.gamma_alpha
    # s >= t: the reduced kernel is t^(a-1)/Gamma(a), constant in s.
    assert ks1.k1(2.0, 5.0) == pytest.approx(2.0 ** (a - 1) / ga, rel=1e-14)
    assert ks1.k1(2.0, 2.0) == pytest.approx(2.0 ** (a - 1) / ga, rel=1e-14)
    # s < t subtracts the translated power.
    want = (2.0 ** (a - 1) - 1.0 ** (a - 1)) / ga
    assert ks1.k1(2.0, 1.0) == pytest.approx(want, rel=1e-14)
    assert ks1.k1(2.0, 0.0) == 0.0


def test_scalar_and_grid_paths_agree(kernels, rng):
    ts = rng.uniform(0.05, 20.0, size=12)
    ss = rng.uniform(0.0, 30.0, size=12)
    T, S = np.meshgrid(ts, ss, indexing="ij")
    for ks in kernels:
        K = ks.k_grid(T, S)
        Kst = ks.kstar_grid(T, S)
        K1 = ks.k1_grid(T, S)
        for i in range(ts.size):
            for j in range(ss.size):
                assert K[i, j] == pytest.approx(
                    ks.k(ts[i], ss[j]), rel=1e-13, abs=1e-15)
                assert Kst[i, j] == pytest.approx(
                    ks.kstar(ts[i], ss[j]), rel=1e-13, abs=1e-15)
                assert K1[i, j] == pytest.approx(
                    ks.k1(ts[i], ss[j]), rel=1e-13, abs=1e-15)


def test_g_is_a_saturating_ramp(kernels):
    """G starts at 0, never decreases, and approaches Lambda/Gamma(alpha)."""
    ss = np.concatenate(([0.0], np.geomspace(1e-3, 60.0, 40)))
    for ks in kernels:
        g = ks.g_many(ss)
        cap = ks.lam / ks.gamma_alpha
        assert g[0] == 0.0
        assert np.all(g >= 0.0)
        # Slack: each point carries its own quadrature error (~1e-10 abs).
        assert np.all(np.diff(g) >= -5e-10)
        assert np.all(g <= cap + 5e-10)
        # By s = 60 the boundary weight has fully decayed.
        assert g[-1] == pytest.approx(cap, abs=1e-10)


def test_g_memo_is_stable(kernels):
    ks1, _ = kernels
    first = ks1.g_of(1.2345)
    assert ks1.g_of(1.2345) == first


def test_bounds_are_sharp_but_never_crossed(kernels):
    ts = np.geomspace(1e-3, 100.0, 30)
    ss = np.geomspace(1e-3, 100.0, 30)
    T, S = np.meshgrid(ts, ss, indexing="ij")
    for ks in kernels:
        kb = ks.k_bound(ts)[:, None]
        K = ks.k_grid(T, S)
        assert np.all(K >= 0.0)
        assert np.all(K <= kb * (1.0 + 1e-12))
        # Sharp: at large s the kernel reaches within 1e-6 of the bound.
        assert K[:, -1] == pytest.approx(kb[:, 0], rel=1e-6)
        Kst = ks.kstar_grid(T, S)
        sb = ks.kstar_bound()
        assert np.all(Kst >= 0.0)
        assert np.all(Kst <= sb * (1.0 + 1e-12))
        assert Kst.max() == pytest.approx(sb, rel=1e-6)


def test_k_bound_formula(kernels):
    for ks in kernels:
        a = ks.alpha.q
        for t in (0.1, 1.0, 7.0):
            assert ks.k_bound(t) == pytest.approx(
                t ** (a - 1.0) / ks.denom, rel=1e-13)
        assert ks.kstar_bound() == pytest.approx(
            ks.gamma_alpha / ks.denom, rel=1e-13)
