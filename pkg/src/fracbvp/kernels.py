"""Green-type kernels for the half-line boundary value problem.

One KernelSet captures everything the integral operator for one equation
needs: the order alpha, the boundary weight h, the coupling constant

    Lambda = integral_0^inf h(t) t^(alpha-1) dt,

and the inner boundary integral

    G(s) = integral_0^inf h(tau) K1(tau, s) dtau,

where K1 is the base kernel

    K1(t, s) = [t^(alpha-1) - (t-s)^(alpha-1)] / Gamma(alpha)   for s <= t,
               t^(alpha-1) / Gamma(alpha)                        for t <= s.

The full kernel is K = K1 + K2 with K2(t, s) = t^(alpha-1) G(s) / (Gamma -
Lambda), and the derivative kernel (the kernel of the order alpha-1
fractional derivative of the representation) is

    Kstar(t, s) = step(t <= s) + Gamma(alpha) G(s) / (Gamma - Lambda).

Everything here requires Lambda < Gamma(alpha); the hypothesis checker in
`problem` reports a violation, this module refuses to build on one.

Note on integrability: h itself may fail to be integrable at 0 (the
shipped problems use h ~ t^(-1.5)).  Every integral actually evaluated
pairs h with a factor vanishing like t^(alpha-1), which restores
integrability; h alone is never integrated.

G is evaluated through the equivalent split

    G(s) = [Lambda - integral_0^inf h(s+x) x^(alpha-1) dx] / Gamma(alpha)

(substituting tau = s + x in the part of K1 with tau >= s), which removes
the interior kink at tau = s and is cheap to evaluate accurately.  Values
are memoized per s, so solver grids and dump grids pay for each distinct
s once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .fracops import FracOrder, gamma
from .quad import (DEFAULT_TOL, Integrand, QuadResult, integrate_finite,
                   integrate_halfline, require_converged)

__all__ = ["KernelSet", "compute_lambda", "kernel_representation",
           "derivative_representation"]


def compute_lambda(h: Integrand, alpha: FracOrder,
                   tol: float = DEFAULT_TOL) -> float:
    """Boundary coupling constant Lambda = int_0^inf h(t) t^(alpha-1) dt.

    The combined endpoint exponent (h's own plus alpha-1) keeps the
    integrand admissible even when h alone diverges at 0.
    """
    a = alpha.q

    def weighted(t: np.ndarray) -> np.ndarray:
        return np.asarray(h.fn(t)) * t ** (a - 1.0)

    f = Integrand(weighted, kinks=h.kinks,
                  endpoint_exponent=h.endpoint_exponent + a - 1.0,
                  decay_hint=h.decay_hint)
    res = integrate_halfline(f, tol)
    require_converged(res, f"Lambda integral (alpha={a})")
    return res.value


@dataclass
class KernelSet:
    """Kernels of one equation, with the boundary integral memoized.

    Build with KernelSet.build; the constructor takes precomputed
    constants.  The memo table is filled on demand and is idempotent
    (same s always maps to the same value), so concurrent fills are
    harmless.
    """

    alpha: FracOrder
    h: Integrand | None
    lam: float
    gamma_alpha: float
    tol: float = DEFAULT_TOL
    _g_memo: dict[float, float] = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, alpha: FracOrder, h: Integrand | None,
              tol: float = DEFAULT_TOL) -> "KernelSet":
        lam = 0.0 if h is None else compute_lambda(h, alpha, tol)
        ga = gamma(alpha.q)
        if not lam < ga:
            raise ValueError(
                f"boundary coupling too strong: Lambda={lam!r} must be "
                f"below Gamma(alpha)={ga!r} for the kernels to exist")
        return cls(alpha=alpha, h=h, lam=lam, gamma_alpha=ga, tol=tol)

    @property
    def denom(self) -> float:
        return self.gamma_alpha - self.lam

    # -- base kernel -------------------------------------------------

    def k1(self, t: float, s: float) -> float:
        a = self.alpha.q
        if s >= t:
            return t ** (a - 1.0) / self.gamma_alpha
        return (t ** (a - 1.0) - (t - s) ** (a - 1.0)) / self.gamma_alpha

    def k1_grid(self, t: np.ndarray, s: np.ndarray) -> np.ndarray:
        """Vectorized K1 on broadcastable t, s arrays."""
        a = self.alpha.q
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        tpow = t ** (a - 1.0)
        gap = np.where(s < t, t - s, 0.0)
        return np.where(s >= t, tpow, tpow - gap ** (a - 1.0)) / self.gamma_alpha

    # -- boundary integral --------------------------------------------

    def g_of(self, s: float) -> float:
        """G(s) = int_0^inf h(tau) K1(tau, s) dtau, memoized."""
        if self.h is None:
            return 0.0
        s = float(s)
        if s == 0.0:
            return 0.0  # K1(tau, 0) == 0 identically
        hit = self._g_memo.get(s)
        if hit is not None:
            return hit
        a = self.alpha.q
        h = self.h

        def deficit_fn(x: np.ndarray) -> np.ndarray:
            return np.asarray(h.fn(s + x)) * x ** (a - 1.0)

        # Panel boundary at x = s: when h diverges at 0 the integrand
        # turns over on that scale, and for small s the transition layer
        # starves a cut-free adaptive pass.
        cuts = sorted({s} | {k - s for k in h.kinks if k > s})
        res = integrate_halfline(
            Integrand(deficit_fn, kinks=tuple(cuts),
                      endpoint_exponent=a - 1.0, decay_hint=h.decay_hint),
            self.tol)
        require_converged(res, f"boundary integral G({s})")
        val = (self.lam - res.value) / self.gamma_alpha
        # G is nonnegative by construction; clip quadrature dust at 0.
        if val < 0 and val > -10 * self.tol:
            val = 0.0
        self._g_memo[s] = val
        return val

    def g_many(self, s: np.ndarray) -> np.ndarray:
        return np.array([self.g_of(si) for si in np.asarray(s, dtype=float).ravel()]
                        ).reshape(np.shape(s))

    # -- assembled kernels ---------------------------------------------

    def k2(self, t: float, s: float) -> float:
        if self.h is None:
            return 0.0
        return t ** (self.alpha.q - 1.0) / self.denom * self.g_of(s)

    def k(self, t: float, s: float) -> float:
        return self.k1(t, s) + self.k2(t, s)

    def kstar(self, t: float, s: float) -> float:
        step = 1.0 if t <= s else 0.0
        if self.h is None:
            return step
        return step + self.gamma_alpha / self.denom * self.g_of(s)

    def k_grid(self, t: np.ndarray, s: np.ndarray) -> np.ndarray:
        """Vectorized K = K1 + K2 on broadcastable t, s arrays."""
        out = self.k1_grid(t, s)
        if self.h is None:
            return out
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        return out + t ** (self.alpha.q - 1.0) / self.denom * self.g_many(s)

    def kstar_grid(self, t: np.ndarray, s: np.ndarray) -> np.ndarray:
        """Vectorized Kstar on broadcastable t, s arrays."""
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        step = np.where(t <= s, 1.0, 0.0)
        if self.h is None:
            return step
        return step + self.gamma_alpha / self.denom * self.g_many(s)

    # -- bounds (used by tests and the kernel-dump bound columns) ------

    def k_bound(self, t: float) -> float:
        """Upper envelope t^(alpha-1) / (Gamma(alpha) - Lambda) for K."""
        return t ** (self.alpha.q - 1.0) / self.denom

    def kstar_bound(self) -> float:
        """Upper envelope Gamma(alpha) / (Gamma(alpha) - Lambda) for Kstar."""
        return self.gamma_alpha / self.denom


def _as_callable(y: Integrand | Callable[[np.ndarray], np.ndarray]):
    return y.fn if isinstance(y, Integrand) else y


def kernel_representation(ks: KernelSet, y: Integrand, t: float,
                          tol: float = DEFAULT_TOL) -> float:
    """u(t) = int_0^inf K(t, s) y(s) ds by direct (adaptive) quadrature.

    This is the oracle route: it shares no quadrature plan with the
    solver, so agreement between the two is meaningful evidence.
    """
    a = ks.alpha.q
    yf = _as_callable(y)

    res_a = integrate_halfline(y, tol)
    require_converged(res_a, "kernel representation: total integral")

    def flipped(x: np.ndarray) -> np.ndarray:
        return np.asarray(yf(t - x)) * x ** (a - 1.0)

    res_b = integrate_finite(
        Integrand(flipped, endpoint_exponent=a - 1.0), 0.0, t, tol) \
        if t > 0 else QuadResult(0.0, 0.0, 0.0, 0, True)
    require_converged(res_b, "kernel representation: convolution part")

    k1_part = (t ** (a - 1.0) * res_a.value - res_b.value) / ks.gamma_alpha
    if ks.h is None:
        return k1_part
    c = _boundary_weighted_integral(ks, y, tol)
    return k1_part + t ** (a - 1.0) / ks.denom * c


def derivative_representation(ks: KernelSet, y: Integrand, t: float,
                              tol: float = DEFAULT_TOL) -> float:
    """int_0^inf Kstar(t, s) y(s) ds: the derivative row of the
    representation, i.e. the order alpha-1 fractional derivative of
    kernel_representation as a function of t."""
    yf = _as_callable(y)

    def shifted(x: np.ndarray) -> np.ndarray:
        return np.asarray(yf(t + x))

    res_tail = integrate_halfline(
        Integrand(shifted, kinks=tuple(k - t for k in y.kinks if k > t),
                  decay_hint=y.decay_hint), tol)
    require_converged(res_tail, "derivative representation: tail integral")
    if ks.h is None:
        return res_tail.value
    c = _boundary_weighted_integral(ks, y, tol)
    return res_tail.value + ks.gamma_alpha / ks.denom * c


def _boundary_weighted_integral(ks: KernelSet, y: Integrand,
                                tol: float) -> float:
    """C = int_0^inf G(s) y(s) ds with G evaluated through the memo."""
    yf = _as_callable(y)

    def fn(s: np.ndarray) -> np.ndarray:
        return ks.g_many(s) * np.asarray(yf(s))

    res = integrate_halfline(
        Integrand(fn, kinks=y.kinks, endpoint_exponent=y.endpoint_exponent,
                  decay_hint=y.decay_hint), tol)
    require_converged(res, "boundary-weighted integral of G")
    return res.value
