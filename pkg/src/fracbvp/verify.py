"""After-the-fact checks on computed solution pairs.

Nothing here feeds back into the iterations; every function takes
finished artifacts (a solution pair, an iteration trace) and measures how
well they satisfy what the schemes promise: fixed-point consistency, the
integral boundary conditions, the differential equations at spot-check
points, the chain ordering of the monotone scheme, and the geometric
error bound of the contraction scheme.  Results are plain numbers and
small records; callers pick their own thresholds.

Solution rows are reconstructed off the grid through the slowly varying
factor psi(t) = u(t)/t^(alpha-1), interpolated by a shape-preserving
cubic and anchored at its analytic limit psi(0) = D^(alpha-1)u(0)/
Gamma(alpha).  That keeps the t^(alpha-1) turnover exact instead of
asking a polynomial to chase it.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .exprlang import compile_expr
from .fracops import FracOrder, gamma, rl_derivative
from .problem import ProblemSpec
from .quad import Integrand, QuadratureError, integrate_halfline, require_converged
from .solver import (IntegralOperator, IterationTrace, SolutionPair,
                     _ROW_NAMES, diff_norm)

__all__ = [
    "AuditResult", "VerificationReport", "fixed_point_residual",
    "boundary_residual", "ode_residual_spotcheck", "ordering_audit",
    "error_bound_audit", "verify_pair",
]


@dataclass(frozen=True)
class AuditResult:
    """Outcome of one bound audit.

    worst_excess is the largest violation found after subtracting the
    allowed slack, so ok is exactly worst_excess <= 0; negative values
    say how much margin the worst comparison still had.
    """

    name: str
    ok: bool
    worst_excess: float
    checked: int
    slack: float
    message: str

    def to_dict(self) -> dict:
        return {
            "name": self.name, "ok": self.ok,
            "worst_excess": self.worst_excess, "checked": self.checked,
            "slack": self.slack, "message": self.message,
        }


@dataclass
class VerificationReport:
    """Bundle of the measurements run on one returned solution."""

    fixed_point_residual: float
    bc_residual_1: float
    bc_residual_2: float
    ode_residuals: list[dict] = field(default_factory=list)
    ordering: AuditResult | None = None
    error_bound: AuditResult | None = None
    details: dict = field(default_factory=dict)

    def to_json(self, indent: int | None = 2) -> str:
        doc = {
            "fixed_point_residual": self.fixed_point_residual,
            "bc_residual_1": self.bc_residual_1,
            "bc_residual_2": self.bc_residual_2,
            "ode_residuals": self.ode_residuals,
            "ordering": self.ordering.to_dict() if self.ordering else None,
            "error_bound": (self.error_bound.to_dict()
                            if self.error_bound else None),
            "details": self.details,
        }
        return json.dumps(doc, indent=indent)


# -- row reconstruction -------------------------------------------------


def _psi_interpolant(grid_nodes: np.ndarray, row_w: np.ndarray,
                     row_d: np.ndarray, alpha: FracOrder):
    """Callable u(s) on [0, inf) from the weighted row of one equation.

    psi = u/t^(alpha-1) is interpolated over the nodes with the anchor
    psi(0) = D^(alpha-1)u(0)/Gamma(alpha) (the derivative row's own limit
    at 0, correct to O(t_1)); beyond the last node psi is frozen, which
    keeps the t^(alpha-1) growth and drops only the lower-order part.
    """
    a = alpha.q
    psi_nodes = row_w * (1.0 + grid_nodes ** (a - 1.0)) \
        / grid_nodes ** (a - 1.0)
    xs = np.concatenate(([0.0], grid_nodes))
    ys = np.concatenate(([row_d[0] / gamma(a)], psi_nodes))
    pch = PchipInterpolator(xs, ys, extrapolate=False)
    hi = xs[-1]

    def u_fn(s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        psi = np.where(s >= hi, ys[-1], pch(np.minimum(s, hi)))
        return s ** (a - 1.0) * psi

    return u_fn


def _flat_interpolant(grid_nodes: np.ndarray, row: np.ndarray):
    """Callable for a derivative row: cubic inside, flat on both ends."""
    pch = PchipInterpolator(grid_nodes, row, extrapolate=False)
    lo, hi = grid_nodes[0], grid_nodes[-1]

    def fn(s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        out = pch(np.clip(s, lo, hi))
        out = np.where(s <= lo, row[0], out)
        return np.where(s >= hi, row[-1], out)

    return fn


# -- residual measurements ----------------------------------------------


def fixed_point_residual(op: IntegralOperator, sp: SolutionPair) -> float:
    """Distance (in the product sup norm) between sp and its image."""
    return diff_norm(sp, op.apply(sp))


def _bc_one(h: Integrand, alpha: FracOrder, grid_nodes: np.ndarray,
            row_w: np.ndarray, row_d: np.ndarray, tol: float) -> float:
    u_fn = _psi_interpolant(grid_nodes, row_w, row_d, alpha)

    def fn(s: np.ndarray) -> np.ndarray:
        return np.asarray(h.fn(s)) * u_fn(s)

    kinks = sorted(set(h.kinks) | set(float(t) for t in grid_nodes))
    combined = Integrand(fn, kinks=tuple(kinks),
                         endpoint_exponent=h.endpoint_exponent
                         + (alpha.q - 1.0),
                         decay_hint=h.decay_hint)
    res = integrate_halfline(combined, tol)
    require_converged(res, f"boundary integral (alpha={alpha.q})")
    return abs(float(row_d[-1]) - res.value)


def boundary_residual(p: ProblemSpec, sp: SolutionPair, *,
                      tol: float = 1e-7) -> tuple[float, float]:
    """How far each derivative row's value at t_N sits from the boundary
    integral of the reconstructed solution.

    The derivative rows carry the boundary constant through the kernel
    route; the integral here recomputes it from the solution values and
    the weight h directly, so agreement checks the two routes against
    each other.  Returns the pair of absolute residuals.
    """
    t = sp.grid.nodes
    r1 = _bc_one(p.h1, sp.alpha1, t, sp.u_w, sp.du, tol)
    r2 = _bc_one(p.h2, sp.alpha2, t, sp.v_w, sp.dv, tol)
    return r1, r2


def ode_residual_spotcheck(p: ProblemSpec, sp: SolutionPair,
                           points: tuple[float, ...] = (0.5, 1.0, 2.0), *,
                           tol: float = 1e-5,
                           quad_tol: float = 1e-9) -> list[dict]:
    """Residual |D^alpha u + f(t, states)| at a few interior points.

    The fractional derivative is taken numerically from the
    reconstructed rows, entirely outside the solver's quadrature plan.
    Differentiating an interpolant three times is noise-amplifying, so
    each entry carries the refinement's own error estimate and a
    low_confidence flag when that estimate is not small against the
    value; treat flagged entries as order-of-magnitude checks only.
    """
    t_nodes = sp.grid.nodes
    u_fn = _psi_interpolant(t_nodes, sp.u_w, sp.du, sp.alpha1)
    v_fn = _psi_interpolant(t_nodes, sp.v_w, sp.dv, sp.alpha2)
    du_fn = _flat_interpolant(t_nodes, sp.du)
    dv_fn = _flat_interpolant(t_nodes, sp.dv)
    rows = (
        (1, u_fn, compile_expr(p.f1), sp.alpha1),
        (2, v_fn, compile_expr(p.f2), sp.alpha2),
    )
    out: list[dict] = []
    for t_star in points:
        if not 0.0 < t_star < float(t_nodes[-1]):
            raise ValueError(f"spot-check point {t_star} is outside "
                             f"(0, {t_nodes[-1]})")
        states = (float(u_fn(t_star)), float(v_fn(t_star)),
                  float(du_fn(t_star)), float(dv_fn(t_star)))
        for eq, row_fn, f, alpha in rows:
            forcing = float(f(t_star, *states))
            entry = {"equation": eq, "t": t_star, "forcing": forcing}
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    val, est = rl_derivative(
                        row_fn, alpha, t_star, tol=tol,
                        g_exponent=alpha.q - 1.0, quad_tol=quad_tol)
            except QuadratureError as exc:
                entry.update(derivative=math.nan, residual=math.nan,
                             error_estimate=math.inf, low_confidence=True,
                             note=str(exc))
                out.append(entry)
                continue
            entry.update(
                derivative=val,
                residual=abs(val + forcing),
                error_estimate=est,
                low_confidence=bool(est > tol * (1.0 + abs(val))),
            )
            out.append(entry)
    return out


# -- scheme audits ------------------------------------------------------


def _stack(trace: IterationTrace) -> np.ndarray:
    return np.stack([np.stack(it.rows()) for it in trace.iterates])


def _locate(arr: np.ndarray, trace: IterationTrace) -> tuple:
    k, r, j = np.unravel_index(int(np.argmax(arr)), arr.shape)
    t = float(trace.iterates[0].grid.nodes[j])
    return int(k), _ROW_NAMES[r], int(j), t


def ordering_audit(lower: IterationTrace, upper: IterationTrace, *,
                   slack: float | None = None) -> AuditResult:
    """Re-check the full interleaved chain from the stored iterates.

    Three families of comparisons, every iteration, node and row: the
    lower chain never descends, the upper chain never ascends, and no
    lower iterate ever exceeds any upper iterate.  The cross-chain
    family covers all pairs at once through a per-node max/min.  The
    default slack is 10x the larger quadrature tolerance, the same dust
    allowance the schemes themselves use.
    """
    if lower.direction != "lower" or upper.direction != "upper":
        raise ValueError(
            f"need one lower and one upper trace, got directions "
            f"{lower.direction!r} and {upper.direction!r}")
    if slack is None:
        slack = 10.0 * max(lower.quad_tol, upper.quad_tol)
    lo = _stack(lower)
    up = _stack(upper)
    climbs = lo[:-1] - lo[1:]       # positive entry = lower chain dropped
    descents = up[1:] - up[:-1]     # positive entry = upper chain rose
    cross = lo.max(axis=0) - up.min(axis=0)
    candidates = (
        ("lower chain step", climbs.max(initial=-math.inf), climbs, lower),
        ("upper chain step", descents.max(initial=-math.inf), descents,
         upper),
        ("cross-chain gap", cross.max(), cross[None, ...], lower),
    )
    kind, worst, arr, tr = max(candidates, key=lambda c: c[1])
    k, row, j, t = _locate(arr, tr)
    checked = climbs.size + descents.size \
        + lo.shape[0] * up.shape[0] * cross.size
    worst = float(worst)
    ok = worst <= slack
    state = "holds" if ok else "broken"
    message = (f"ordering {state}; tightest at {kind} {k + 1}, row {row}, "
               f"node {j} (t={t:.6g}): excess {worst - slack:.3e}")
    return AuditResult("ordering", ok, float(worst - slack), checked,
                       slack, message)


def error_bound_audit(trace: IterationTrace, *, m: float | None = None,
                      reference: SolutionPair | None = None,
                      slack: float | None = None) -> AuditResult:
    """Check every iterate against the geometric error bound.

    With d_1 the first difference norm, iterate n must sit within
    m^n/(1-m) d_1 of the fixed point, and iterates n < j within
    m^n (1 - m^(j-n))/(1-m) d_1 of each other.  When no external
    reference is given the final iterate stands in for the fixed point
    and its own a-posteriori distance bound is added to the allowance.
    """
    if trace.scheme != "contraction":
        raise ValueError(f"error_bound_audit needs a contraction trace, "
                         f"got scheme {trace.scheme!r}")
    if m is None:
        m = trace.m
    if m is None or not 0.0 < m < 1.0:
        raise ValueError(f"need a contraction modulus in (0, 1), got {m}")
    if trace.n_steps == 0:
        raise ValueError("trace records no iterations")
    if slack is None:
        slack = 10.0 * trace.quad_tol * (1.0 + max(trace.norms))
    its = trace.iterates
    d1 = trace.diffs[0]
    gain = 1.0 / (1.0 - m)
    allowance = slack
    if reference is None:
        reference = its[-1]
        allowance += trace.diffs[-1] * m * gain

    worst = -math.inf
    where = ""
    checked = 0
    for n in range(1, len(its)):
        lhs = diff_norm(its[n], reference)
        excess = lhs - (m ** n * gain * d1 + allowance)
        checked += 1
        if excess > worst:
            worst, where = excess, f"iterate {n} vs reference"
    for n in range(1, len(its)):
        for j in range(n + 1, len(its)):
            lhs = diff_norm(its[j], its[n])
            bound = m ** n * (1.0 - m ** (j - n)) * gain * d1 + slack
            checked += 1
            if lhs - bound > worst:
                worst, where = lhs - bound, f"iterates {n} and {j}"
    ok = worst <= 0.0
    state = "holds" if ok else "broken"
    message = (f"geometric bound {state} over {checked} comparisons; "
               f"tightest at {where}: excess {worst:.3e}")
    return AuditResult("error_bound", ok, float(worst), checked, slack,
                       message)


def verify_pair(p: ProblemSpec, sp: SolutionPair,
                operator: IntegralOperator, *,
                spot_points: tuple[float, ...] = (0.5, 1.0, 2.0),
                bc_tol: float = 1e-7,
                ode_tol: float = 1e-5) -> VerificationReport:
    """Run the scheme-independent measurements on one returned pair.

    The scheme audits need iteration traces and are attached by the
    caller afterwards (see ordering_audit and error_bound_audit).
    """
    r1, r2 = boundary_residual(p, sp, tol=bc_tol)
    return VerificationReport(
        fixed_point_residual=fixed_point_residual(operator, sp),
        bc_residual_1=r1,
        bc_residual_2=r2,
        ode_residuals=ode_residual_spotcheck(p, sp, spot_points,
                                             tol=ode_tol),
        details={"grid_n": sp.grid.n, "t_max": sp.grid.t_max,
                 "spot_points": list(spot_points)},
    )
