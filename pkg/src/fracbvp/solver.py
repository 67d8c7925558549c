"""Grid discretization of the fixed-point operator and the iteration schemes.

The continuous problem is equivalent to the fixed-point equation

    u(t) = int_0^inf K_1(t,s) F_1(s) ds,   v(t) = int_0^inf K_2(t,s) F_2(s) ds,

with F_i(s) = f_i(s, u(s), v(s), D^(alpha_1-1)u(s), D^(alpha_2-1)v(s)),
plus the derivative rows through the step-plus-constant kernels.  A
SolutionPair stores the four rows at grid nodes; IntegralOperator maps a
pair to its image under the discretized operator; the two schemes below
iterate that map.

Discretization.  Writing K_1(t,s) = [t^(a-1) - (t-s)^(a-1)]/Gamma(a) for
s <= t (a = the equation's order) and t^(a-1)/Gamma(a) otherwise, the
rows reduce to four reusable pieces per equation,

    A   = int_0^inf F ds
    C   = int_0^inf G(s) F(s) ds          (G the boundary integral)
    Q_j = int_0^(t_j) F ds
    P_j = int_0^(t_j) (t_j - s)^(a-1) F ds

from which  u(t_j)  = [t_j^(a-1) A - P_j]/Gamma(a) + t_j^(a-1) C/(Gamma-Lambda)
and    D^(a-1)u(t_j) = (A - Q_j) + Gamma(a) C/(Gamma-Lambda).

The quadrature plan is fixed per grid, not adaptive: Gauss-Legendre
panels between consecutive nodes, a geometrically graded bundle of
panels on [0, t_1], and a run of doubling panels past t_N covering the
tail to beyond any representable contribution.  P_j uses the same panel
values through precomputed product weights W_i (t_j - S_i)^(a-1), with
the panel touching t_j handled by a Gauss-Jacobi rule so the (t_j-s)^(a-1)
kink never meets a plain panel.  A fixed plan keeps the operator a
deterministic map on node arrays: together with nondecreasing f_i,
nonnegative weights, and linear (order-preserving) interpolation of
states, the discrete operator is then monotone up to rounding, which is
what the ordering checks of the monotone scheme rely on.

Off-node states are interpolated linearly on the weighted rows by
default ("linear"); "pchip" switches to a monotone cubic.  Linear is
the default because interpolating two ordered node arrays linearly
preserves their ordering pointwise, a property shape-preserving cubics
do not share.  Weighted u values take the known anchor u(0) = 0;
derivative rows extend flat on both sides.  Beyond t_N the weighted
state is frozen at its last node value (the weighted rows converge to
finite limits, and every state-dependent tail term is damped by the
integrable forcing envelopes).
"""

from __future__ import annotations

import csv
import io
import json
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import roots_jacobi

from .exprlang import compile_expr
from .fracops import FracOrder
from .kernels import KernelSet
from .problem import (InapplicableError, ProblemSpec, contraction_modulus,
                      radius_R)
from .quad import LOOP_TOL, _gl

__all__ = [
    "Grid", "SolutionPair", "IterationTrace", "IntegralOperator",
    "MonotonicityError", "ContractionRatioWarning", "norm_pair",
    "diff_norm", "apply_T", "monotone_solve", "contract_solve",
]

_ROW_NAMES = ("u_w", "du", "v_w", "dv")


class MonotonicityError(RuntimeError):
    """An iterate broke the scheme's ordering by more than the allowed
    quadrature slack."""


class ContractionRatioWarning(RuntimeWarning):
    """Observed difference ratios persistently exceed the contraction
    modulus estimate."""


@dataclass(frozen=True)
class Grid:
    """Strictly increasing nodes t_1..t_N > 0.

    Nodes are placed by t = theta * x/(1-x) with x running over the
    N-point Gauss-Legendre nodes mapped to (0,1): dense near 0 where
    t^(alpha-1) turns over, sparse in the tail.  Values at t = 0 are
    known analytically (u(0) = 0 for orders above 1) and are not stored.
    """

    nodes: np.ndarray
    theta: float

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 16:
            raise ValueError(f"grid needs at least 16 nodes, got {nodes.size}")
        if nodes[0] <= 0.0 or np.any(np.diff(nodes) <= 0.0):
            raise ValueError("grid nodes must be strictly increasing and > 0")
        nodes = nodes.copy()
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def make(cls, n: int, theta: float = 5.0) -> "Grid":
        x, _ = _gl(n)
        x01 = 0.5 * (x + 1.0)
        return cls(nodes=theta * x01 / (1.0 - x01), theta=float(theta))

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def t_max(self) -> float:
        return float(self.nodes[-1])


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError("solution rows must be finite")
    a = a.copy()
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SolutionPair:
    """The four rows of one iterate at the grid nodes.

    u_w, v_w hold the weighted values u(t)/(1+t^(alpha_1-1)) and
    v(t)/(1+t^(alpha_2-1)); du, dv hold D^(alpha_1-1)u and
    D^(alpha_2-1)v directly (those are what the sup norms see).
    """

    grid: Grid
    alpha1: FracOrder
    alpha2: FracOrder
    u_w: np.ndarray
    v_w: np.ndarray
    du: np.ndarray
    dv: np.ndarray

    def __post_init__(self) -> None:
        for name in ("u_w", "v_w", "du", "dv"):
            a = _frozen(getattr(self, name))
            if a.shape != self.grid.nodes.shape:
                raise ValueError(f"{name} must match the grid "
                                 f"({a.shape} vs {self.grid.nodes.shape})")
            object.__setattr__(self, name, a)

    @classmethod
    def zeros(cls, grid: Grid, alpha1: FracOrder,
              alpha2: FracOrder) -> "SolutionPair":
        z = np.zeros_like(grid.nodes)
        return cls(grid, alpha1, alpha2, z, z, z, z)

    @classmethod
    def upper_start(cls, grid: Grid, alpha1: FracOrder, alpha2: FracOrder,
                    radius: float, gamma_alpha1: float,
                    gamma_alpha2: float) -> "SolutionPair":
        """The dominating start u_0 = R t^(alpha_1-1), v_0 = R t^(alpha_2-1),
        whose fractional derivatives are the constants Gamma(alpha_i) R."""
        t = grid.nodes
        w1 = t ** (alpha1.q - 1.0)
        w2 = t ** (alpha2.q - 1.0)
        return cls(grid, alpha1, alpha2,
                   radius * w1 / (1.0 + w1), radius * w2 / (1.0 + w2),
                   np.full_like(t, gamma_alpha1 * radius),
                   np.full_like(t, gamma_alpha2 * radius))

    @classmethod
    def constant(cls, grid: Grid, alpha1: FracOrder, alpha2: FracOrder,
                 value: float) -> "SolutionPair":
        """All four rows identically `value`; its norm is |value|."""
        c = np.full_like(grid.nodes, value)
        return cls(grid, alpha1, alpha2, c, c, c, c)

    def rows(self) -> tuple[np.ndarray, ...]:
        return self.u_w, self.du, self.v_w, self.dv

    def u(self) -> np.ndarray:
        """Unweighted u values at the nodes."""
        return self.u_w * (1.0 + self.grid.nodes ** (self.alpha1.q - 1.0))

    def v(self) -> np.ndarray:
        return self.v_w * (1.0 + self.grid.nodes ** (self.alpha2.q - 1.0))

    def to_csv(self) -> str:
        """(t, u, v, du, dv) rows at the nodes, unweighted values."""
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["t", "u", "v", "du", "dv"])
        for row in zip(self.grid.nodes, self.u(), self.v(), self.du, self.dv):
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()


def norm_pair(sp: SolutionPair) -> float:
    """Discrete product norm: the largest sup over the four rows."""
    return max(float(np.max(np.abs(r))) for r in sp.rows())


def diff_norm(a: SolutionPair, b: SolutionPair) -> float:
    return max(float(np.max(np.abs(x - y)))
               for x, y in zip(a.rows(), b.rows()))


@dataclass
class IterationTrace:
    """Per-iteration records of one scheme run.

    iterates[0] is the starting pair; diffs[k], violations[k] and
    seconds[k] describe the step producing iterates[k+1].  The
    successive-difference norms d_n drive both stopping rules and the
    after-the-fact error-bound audit.
    """

    scheme: str
    tol: float
    quad_tol: float
    direction: str | None = None
    m: float | None = None
    diffs: list[float] = field(default_factory=list)
    norms: list[float] = field(default_factory=list)
    violations: list[int] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)
    iterates: list[SolutionPair] = field(default_factory=list)
    converged: bool = False
    message: str = ""

    @property
    def n_steps(self) -> int:
        return len(self.diffs)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["iteration", "norm", "diff", "violations", "seconds"])
        w.writerow([0, repr(self.norms[0]), "", "", ""])
        for k in range(self.n_steps):
            w.writerow([k + 1, repr(self.norms[k + 1]), repr(self.diffs[k]),
                        self.violations[k], repr(self.seconds[k])])
        return buf.getvalue()

    def to_json(self, indent: int | None = 2) -> str:
        doc = {
            "scheme": self.scheme, "direction": self.direction,
            "tol": self.tol, "quad_tol": self.quad_tol, "m": self.m,
            "converged": self.converged, "message": self.message,
            "norms": self.norms, "diffs": self.diffs,
            "violations": self.violations, "seconds": self.seconds,
        }
        return json.dumps(doc, indent=indent)


# -- the discretized operator ------------------------------------------


class _EquationPlan:
    """Fixed quadrature data for one equation on one grid."""

    def __init__(self, ks: KernelSet, grid: Grid, geo_panels: int,
                 geo_ratio: float, tail_doublings: int):
        self.ks = ks
        a = ks.alpha.q
        t = grid.nodes
        n = t.size
        k = geo_panels

        # Panel boundaries: graded bundle on [0, t_1] ending exactly at
        # t_1, one panel per internode gap, doubling panels past t_N.
        geo = t[0] * geo_ratio ** np.arange(k - 1, -1, -1, dtype=float)
        tail = t[-1] * 2.0 ** np.arange(1, tail_doublings + 1, dtype=float)
        bounds = np.concatenate(([0.0], geo, t[1:], tail))
        los, his = bounds[:-1], bounds[1:]
        x12, w12 = _gl(12)
        half = 0.5 * (his - los)
        mid = 0.5 * (his + los)
        self.s = (mid[:, None] + half[:, None] * x12[None, :]).ravel()
        self.w = (half[:, None] * w12[None, :]).ravel()
        self.panel_starts = np.arange(los.size) * 12
        self.n_panels = los.size

        # Index bookkeeping for the cumulative pieces: panel K+j-1 is
        # [t_j, t_(j+1)] (1-based j), so everything at or beyond t_j
        # starts at that panel.
        self.first_right_panel = k + np.arange(n)
        self.n_left_points = (k + n - 1) * 12

        # Product weights for P_j over panels strictly left of the
        # panel touching t_j.
        s_left = self.s[:self.n_left_points]
        w_left = self.w[:self.n_left_points]
        sing_lo = np.concatenate(([geo[-2] if k > 1 else 0.0], t[:-1]))
        dist = t[:, None] - s_left[None, :]
        mask = s_left[None, :] < sing_lo[:, None]
        self.kmat = np.where(mask, w_left * np.where(mask, dist, 1.0)
                             ** (a - 1.0), 0.0)

        # Gauss-Jacobi rule for the singular panels [sing_lo_j, t_j]:
        # with s = mid + half*x the factor (t_j - s)^(a-1) becomes
        # half^(a-1) (1-x)^(a-1), absorbed by the rule's weight.
        xj, wj = roots_jacobi(12, a - 1.0, 0.0)
        jhalf = 0.5 * (t - sing_lo)
        jmid = 0.5 * (t + sing_lo)
        self.s_jac = jmid[:, None] + jhalf[:, None] * xj[None, :]
        self.w_jac = wj
        self.jac_factor = jhalf ** a

        self.t_pow = t ** (a - 1.0)
        self.g_at_s = ks.g_many(self.s)

    def assemble(self, f_gl: np.ndarray,
                 f_jac: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Node values (unweighted u row, derivative row) from F samples."""
        ks = self.ks
        wf = self.w * f_gl
        psums = np.add.reduceat(wf, self.panel_starts)
        right = np.cumsum(psums[::-1])[::-1]
        a_total = float(right[0])
        c_total = float(np.dot(wf, self.g_at_s))
        # Tail-inclusive remainder int_(t_j)^inf F, summed panel-by-panel
        # so it is exactly a nonneg-weighted sum of F values.
        remainder = right[self.first_right_panel]

        p = self.kmat @ f_gl[:self.n_left_points]
        p += self.jac_factor * (f_jac @ self.w_jac)

        boundary = c_total / ks.denom
        u = (self.t_pow * a_total - p) / ks.gamma_alpha \
            + self.t_pow * boundary
        du = remainder + ks.gamma_alpha * boundary
        return u, du


class IntegralOperator:
    """The discrete fixed-point operator for one problem on one grid.

    Building one precomputes the panel layout, the product-quadrature
    matrices, and the boundary integrals G at every quadrature point
    (the expensive part); each apply() is then a few vectorized
    evaluations.  The map is deterministic: same input pair, same
    output, bit for bit.
    """

    def __init__(self, p: ProblemSpec, ks1: KernelSet, ks2: KernelSet,
                 grid: Grid, *, quad_tol: float = LOOP_TOL,
                 interp: str = "linear", geo_panels: int = 8,
                 geo_ratio: float = 0.25, tail_doublings: int = 40):
        if interp not in ("linear", "pchip"):
            raise ValueError(f"unknown interpolation mode {interp!r}")
        self.problem = p
        self.grid = grid
        self.quad_tol = float(quad_tol)
        self.interp = interp
        self.f1 = compile_expr(p.f1)
        self.f2 = compile_expr(p.f2)
        self.plan1 = _EquationPlan(ks1, grid, geo_panels, geo_ratio,
                                   tail_doublings)
        self.plan2 = _EquationPlan(ks2, grid, geo_panels, geo_ratio,
                                   tail_doublings)
        self.alpha1 = ks1.alpha
        self.alpha2 = ks2.alpha

    def _interp_weighted(self, values: np.ndarray, s: np.ndarray,
                         anchor_zero: bool) -> np.ndarray:
        """Interpolate one node row at arbitrary points.

        anchor_zero adds the analytic node (0, 0) of the weighted value
        rows; derivative rows instead extend flat below t_1.  Both ends
        extend flat beyond the data, which is exactly the frozen-tail
        rule past t_N.
        """
        t = self.grid.nodes
        if anchor_zero:
            xp = np.concatenate(([0.0], t))
            fp = np.concatenate(([0.0], values))
        else:
            xp, fp = t, values
        if self.interp == "linear":
            return np.interp(s, xp, fp)
        out = PchipInterpolator(xp, fp, extrapolate=False)(s)
        out = np.where(s <= xp[0], fp[0], out)
        return np.where(s >= xp[-1], fp[-1], out)

    def _states(self, sp: SolutionPair, s: np.ndarray) -> tuple[np.ndarray, ...]:
        w1 = 1.0 + s ** (self.alpha1.q - 1.0)
        w2 = 1.0 + s ** (self.alpha2.q - 1.0)
        u = self._interp_weighted(sp.u_w, s, True) * w1
        v = self._interp_weighted(sp.v_w, s, True) * w2
        du = self._interp_weighted(sp.du, s, False)
        dv = self._interp_weighted(sp.dv, s, False)
        return u, v, du, dv

    def _forces(self, sp: SolutionPair, plan: _EquationPlan,
                f) -> tuple[np.ndarray, np.ndarray]:
        s_all = np.concatenate((plan.s, plan.s_jac.ravel()))
        u, v, du, dv = self._states(sp, s_all)
        vals = np.asarray(f(s_all, u, v, du, dv))
        split = plan.s.size
        return vals[:split], vals[split:].reshape(plan.s_jac.shape)

    def apply(self, sp: SolutionPair) -> SolutionPair:
        f1_gl, f1_jac = self._forces(sp, self.plan1, self.f1)
        f2_gl, f2_jac = self._forces(sp, self.plan2, self.f2)
        u, du = self.plan1.assemble(f1_gl, f1_jac)
        v, dv = self.plan2.assemble(f2_gl, f2_jac)
        return SolutionPair(
            self.grid, self.alpha1, self.alpha2,
            u_w=u / (1.0 + self.plan1.t_pow),
            v_w=v / (1.0 + self.plan2.t_pow),
            du=du, dv=dv)


def apply_T(p: ProblemSpec, ks1: KernelSet, ks2: KernelSet,
            sp: SolutionPair) -> SolutionPair:
    """One application of the operator.

    Convenience wrapper that builds a fresh discretization; hold an
    IntegralOperator instead when applying repeatedly.
    """
    return IntegralOperator(p, ks1, ks2, sp.grid).apply(sp)


# -- iteration schemes -------------------------------------------------


def _enforce_ordering(prev: SolutionPair, new: SolutionPair, sign: float,
                      slack: float, step: int) -> tuple[SolutionPair, int]:
    """Project `new` onto the ordering required by the scheme.

    sign +1 demands new >= prev (lower chain), -1 demands new <= prev.
    Deviations within `slack` are clipped to prev and counted; anything
    larger is a genuine ordering break and raises.
    """
    rows = []
    count = 0
    for name, pr, nr in zip(_ROW_NAMES, prev.rows(), new.rows()):
        deficit = sign * (pr - nr)
        worst = float(np.max(deficit))
        if worst > slack:
            j = int(np.argmax(deficit))
            raise MonotonicityError(
                f"iteration {step}: row {name} breaks the chain ordering at "
                f"node {j} (t={prev.grid.nodes[j]!r}) by {worst:.3e}, "
                f"beyond the quadrature slack {slack:.3e}")
        bad = deficit > 0.0
        count += int(np.count_nonzero(bad))
        rows.append(np.where(bad, pr, nr))
    clipped = SolutionPair(prev.grid, prev.alpha1, prev.alpha2,
                           u_w=rows[0], du=rows[1], v_w=rows[2], dv=rows[3])
    return clipped, count


def monotone_solve(p: ProblemSpec, ks1: KernelSet, ks2: KernelSet,
                   grid: Grid, direction: str, tol: float = 1e-5,
                   max_iter: int = 200, *, radius: float | None = None,
                   operator: IntegralOperator | None = None,
                   ) -> tuple[SolutionPair, IterationTrace]:
    """One monotone chain: isotone from zero or antitone from the
    dominating pair.

    direction "lower" starts at (0,0) and must climb; "upper" starts at
    u_0 = R t^(alpha_1-1), v_0 = R t^(alpha_2-1) (derivative rows
    Gamma(alpha_i) R) and must descend.  Each step is one operator
    application followed by an ordering projection: violations within
    10x the quadrature tolerance are treated as integration dust,
    larger ones abort.  Stops when the successive-difference norm
    drops to tol.
    """
    if direction not in ("lower", "upper"):
        raise ValueError(f"direction must be 'lower' or 'upper', "
                         f"got {direction!r}")
    op = operator or IntegralOperator(p, ks1, ks2, grid)
    if direction == "lower":
        sp = SolutionPair.zeros(grid, ks1.alpha, ks2.alpha)
        sign = 1.0
    else:
        if radius is None:
            radius = radius_R(p)
        sp = SolutionPair.upper_start(grid, ks1.alpha, ks2.alpha, radius,
                                      ks1.gamma_alpha, ks2.gamma_alpha)
        sign = -1.0
    slack = 10.0 * op.quad_tol
    trace = IterationTrace(scheme="monotone", tol=tol,
                           quad_tol=op.quad_tol, direction=direction)
    trace.iterates.append(sp)
    trace.norms.append(norm_pair(sp))
    for step in range(1, max_iter + 1):
        t0 = time.perf_counter()
        new = op.apply(sp)
        new, nviol = _enforce_ordering(sp, new, sign, slack, step)
        d = diff_norm(new, sp)
        trace.seconds.append(time.perf_counter() - t0)
        trace.diffs.append(d)
        trace.violations.append(nviol)
        trace.norms.append(norm_pair(new))
        trace.iterates.append(new)
        sp = new
        if d <= tol:
            trace.converged = True
            trace.message = f"difference norm {d:.3e} <= tol after {step} steps"
            return sp, trace
    trace.message = (f"not converged in {max_iter} steps; "
                     f"last difference norm {trace.diffs[-1]:.3e}")
    return sp, trace


def contract_solve(p: ProblemSpec, ks1: KernelSet, ks2: KernelSet,
                   grid: Grid, initial: SolutionPair | None = None,
                   tol: float = 1e-4, max_iter: int = 5000, *,
                   m: float | None = None,
                   operator: IntegralOperator | None = None,
                   ) -> tuple[SolutionPair, IterationTrace]:
    """Picard iteration under the contraction guarantee.

    Stops when the a-posteriori bound d_n m/(1-m) for the distance to
    the fixed point falls to tol, so the returned pair is within tol of
    the discrete fixed point whenever the modulus m really bounds the
    operator's Lipschitz constant.  Ratios d_(n+1)/d_n persistently
    above m + 0.05 trigger a warning instead of an abort: they signal a
    wrong m or quadrature noise, both worth surfacing, neither provably
    fatal.
    """
    if m is None:
        m = contraction_modulus(p)
    if not m < 1.0:
        raise InapplicableError(
            f"contraction modulus m={m:.6g} is not below 1")
    op = operator or IntegralOperator(p, ks1, ks2, grid)
    sp = initial if initial is not None \
        else SolutionPair.zeros(grid, ks1.alpha, ks2.alpha)
    gain = m / (1.0 - m)
    trace = IterationTrace(scheme="contraction", tol=tol,
                           quad_tol=op.quad_tol, m=m)
    trace.iterates.append(sp)
    trace.norms.append(norm_pair(sp))
    high_ratio_streak = 0
    warned = False
    for step in range(1, max_iter + 1):
        t0 = time.perf_counter()
        new = op.apply(sp)
        d = diff_norm(new, sp)
        trace.seconds.append(time.perf_counter() - t0)
        trace.diffs.append(d)
        trace.violations.append(0)
        trace.norms.append(norm_pair(new))
        trace.iterates.append(new)
        sp = new
        if step >= 2 and trace.diffs[-2] > 0.0:
            ratio = d / trace.diffs[-2]
            high_ratio_streak = high_ratio_streak + 1 \
                if ratio > m + 0.05 else 0
            if high_ratio_streak >= 3 and not warned:
                warnings.warn(
                    f"difference ratios exceeded m + 0.05 = {m + 0.05:.4f} "
                    f"for 3 consecutive steps (latest {ratio:.4f}); the "
                    f"contraction modulus may not bound this operator",
                    ContractionRatioWarning, stacklevel=2)
                warned = True
        if d * gain <= tol:
            trace.converged = True
            trace.message = (f"a-posteriori bound d_n*m/(1-m) = "
                             f"{d * gain:.3e} <= tol after {step} steps")
            return sp, trace
    trace.message = (f"not converged in {max_iter} steps; last bound "
                     f"{trace.diffs[-1] * gain:.3e}")
    return sp, trace
