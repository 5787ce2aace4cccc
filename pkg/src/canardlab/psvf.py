"""Analysis of planar piecewise-smooth systems on the switching line x = 0:
tangency classification, sewing/sliding partition, the Filippov sliding
field, and numerically integrated half and first return maps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy.optimize import brentq

from .combinations import ContinuousCombination
from .errors import (
    DegenerateTangencyLocus,
    DomainError,
    DomainExit,
    InputError,
    InversionError,
    NoReturn,
    NotFoldFold,
    NotSliding,
    UnsupportedOrder,
)
from .odetools import integrate_until_crossing

# grid cell width for deciding that a first-Lie-derivative zero is isolated
TANGENCY_GRID = 1e-4
SECOND_LIE_TOL = 1e-9
FD_STEP = float(np.finfo(float).eps) ** (1.0 / 3.0)


@dataclass
class PlanarField:
    """A smooth planar vector field with optional analytic Jacobian."""

    eval: Callable[[float, float], tuple[float, float]]
    jac: Callable[[float, float], np.ndarray] | None = None
    name: str = ""

    def __call__(self, x: float, y: float) -> tuple[float, float]:
        return self.eval(x, y)

    def rhs(self, t, v):
        return self.eval(v[0], v[1])

    def jacobian(self, x: float, y: float) -> np.ndarray:
        if self.jac is not None:
            return np.asarray(self.jac(x, y), dtype=float)
        h = FD_STEP * max(1.0, abs(x), abs(y))
        fxp = np.array(self.eval(x + h, y))
        fxm = np.array(self.eval(x - h, y))
        fyp = np.array(self.eval(x, y + h))
        fym = np.array(self.eval(x, y - h))
        return np.column_stack([(fxp - fxm) / (2 * h), (fyp - fym) / (2 * h)])


@dataclass
class PiecewiseSystem:
    """Pair of smooth fields, plus active on x > 0 and minus on x < 0."""

    plus: PlanarField
    minus: PlanarField
    params: dict = field(default_factory=dict)
    name: str = ""

    def side(self, which: str) -> PlanarField:
        if which == "plus":
            return self.plus
        if which == "minus":
            return self.minus
        raise InputError(f"side must be 'plus' or 'minus', got {which!r}")

    @classmethod
    def from_combination(cls, comb: ContinuousCombination, alpha: float = 0.0
                         ) -> "PiecewiseSystem":
        def make(lam):
            def ev(x, y):
                return comb.Z1(lam, x, y, alpha), comb.Z2(lam, x, y, alpha)

            def jac(x, y):
                return np.array([
                    [comb.A_x(lam, x, alpha), 1.0],
                    [comb.B_x(lam, x, y, alpha), comb.B_y(lam, x, y, alpha)],
                ])

            return PlanarField(ev, jac, name=f"{comb.name}@lam={lam:+g}")

        return cls(make(1.0), make(-1.0),
                   params={"alpha": alpha, "mu": comb.mu},
                   name=comb.name)


@dataclass
class TangencyReport:
    side: Literal["plus", "minus"]
    y: float
    kind: Literal["regular", "visible-fold", "invisible-fold",
                  "field-singularity", "higher-order"]
    second_lie: float


@dataclass
class RegionPartition:
    sliding: list[tuple[float, float]]
    sewing: list[tuple[float, float]]
    boundaries: list[float]


def lie_derivative(fld: PlanarField, order: int, y: float) -> float:
    """Lie derivative of the switching function x along the field at (0, y).

    Order 1 is the x-component; order 2 is the field applied to the
    gradient of the first Lie derivative, from the analytic Jacobian when
    available and 4th-order central differences otherwise.
    """
    if order not in (1, 2):
        raise UnsupportedOrder(f"order must be 1 or 2, got {order}")
    v = fld.eval(0.0, y)
    if not all(np.isfinite(v)):
        raise DomainError(f"field not finite at (0, {y})")
    if order == 1:
        return float(v[0])
    if fld.jac is not None:
        J = fld.jacobian(0.0, y)
        grad = (J[0, 0], J[0, 1])
    else:
        h = FD_STEP * max(1.0, abs(y))
        def f1(x, yy):
            return fld.eval(x, yy)[0]
        gx = (-f1(2 * h, y) + 8 * f1(h, y) - 8 * f1(-h, y) + f1(-2 * h, y)) / (12 * h)
        gy = (-f1(0, y + 2 * h) + 8 * f1(0, y + h) - 8 * f1(0, y - h) + f1(0, y - 2 * h)) / (12 * h)
        grad = (gx, gy)
    out = v[0] * grad[0] + v[1] * grad[1]
    if not np.isfinite(out):
        raise DomainError(f"second Lie derivative not finite at (0, {y})")
    return float(out)


def _fold_kind(side: str, second: float) -> str:
    if abs(second) < SECOND_LIE_TOL:
        return "higher-order"
    if side == "plus":
        return "visible-fold" if second > 0 else "invisible-fold"
    return "visible-fold" if second < 0 else "invisible-fold"


def classify_tangencies(system: PiecewiseSystem, window: tuple[float, float],
                        grid: float = TANGENCY_GRID) -> list[TangencyReport]:
    """One report per isolated zero of the first Lie derivative per side."""
    lo, hi = window
    if hi <= lo:
        raise InputError("window must be a nonempty interval")
    n = max(int(np.ceil((hi - lo) / grid)), 8)
    ys = np.linspace(lo, hi, n + 1)
    out: list[TangencyReport] = []
    for side in ("plus", "minus"):
        fld = system.side(side)
        vals = np.array([lie_derivative(fld, 1, y) for y in ys])
        near_zero = np.abs(vals) < 1e-13
        if near_zero.sum() > 2 and np.any(near_zero[:-1] & near_zero[1:]):
            raise DegenerateTangencyLocus(
                f"first Lie derivative of the {side} field vanishes on a "
                "subinterval of the window")
        zeros: list[float] = []
        cells: list[int] = []
        for i in range(n):
            if vals[i] == 0.0:
                # zero exactly on a grid node
                if not zeros or abs(ys[i] - zeros[-1]) > 2 * grid:
                    zeros.append(float(ys[i]))
                    cells.append(i)
                continue
            if vals[i] * vals[i + 1] < 0:
                yr = brentq(lambda y: lie_derivative(fld, 1, y),
                            ys[i], ys[i + 1], xtol=1e-14)
                zeros.append(float(yr))
                cells.append(i)
        if vals[n] == 0.0 and (not zeros or abs(ys[n] - zeros[-1]) > 2 * grid):
            zeros.append(float(ys[n]))
            cells.append(n)
        for k in range(len(cells) - 1):
            if cells[k + 1] - cells[k] == 1:
                raise DegenerateTangencyLocus(
                    f"adjacent sign changes of the {side} first Lie "
                    "derivative; refine the grid or expect degeneracy")
        for yr in zeros:
            second = lie_derivative(fld, 2, yr)
            v = fld.eval(0.0, yr)
            if np.hypot(*v) < SECOND_LIE_TOL:
                kind = "field-singularity"
            else:
                kind = _fold_kind(side, second)
            out.append(TangencyReport(side, float(yr), kind, float(second)))
    return out


def region_partition(system: PiecewiseSystem, window: tuple[float, float]
                     ) -> RegionPartition:
    """Split the window into sewing and sliding y-intervals.

    Interval type follows the sign of the product of the two first Lie
    derivatives at the midpoint: positive sewing, negative sliding.
    """
    reports = classify_tangencies(system, window)
    cuts = sorted({window[0], window[1], *(r.y for r in reports)})
    sliding, sewing = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a < 1e-13:
            continue
        m = 0.5 * (a + b)
        p = lie_derivative(system.plus, 1, m) * lie_derivative(system.minus, 1, m)
        (sewing if p > 0 else sliding).append((a, b))
    return RegionPartition(sliding, sewing, [r.y for r in reports])


def filippov_sliding(system: PiecewiseSystem, y: float) -> float:
    """y-component of the Filippov sliding field at (0, y).

    (X2 * YF - Y2 * XF) / (YF - XF), requiring XF * YF < 0 there.
    """
    xf = lie_derivative(system.plus, 1, y)
    yf = lie_derivative(system.minus, 1, y)
    if xf * yf >= 0:
        raise NotSliding(f"(0, {y}) is not in the sliding region")
    x2 = system.plus.eval(0.0, y)[1]
    y2 = system.minus.eval(0.0, y)[1]
    return (x2 * yf - y2 * xf) / (yf - xf)


# --- half and first return maps ---------------------------------------------

RETURN_BUDGET = 100.0


def _half_return(fld: PlanarField, y: float, forward: bool,
                 rtol: float, atol: float, budget: float) -> float:
    sign = 1.0 if forward else -1.0

    def rhs(t, v):
        vx, vy = fld.eval(v[0], v[1])
        return (sign * vx, sign * vy)

    c = integrate_until_crossing(rhs, (0.0, y), budget, rtol=rtol, atol=atol,
                                 speed=lambda s: fld.eval(s[0], s[1])[0])
    if c is None:
        raise NoReturn(f"no return to the switching line from (0, {y}) "
                       f"within t = {budget}")
    if c.grazing:
        raise NoReturn(f"grazing return from (0, {y}); tangent orbit")
    return float(c.state[1])


def half_return_plus(system: PiecewiseSystem, y: float,
                     rtol: float = 1e-12, atol: float = 1e-14,
                     budget: float = RETURN_BUDGET) -> float:
    """First return to x = 0 of the forward plus-side orbit from (0, y)."""
    return _half_return(system.plus, y, True, rtol, atol, budget)


def half_return_minus(system: PiecewiseSystem, y: float,
                      rtol: float = 1e-12, atol: float = 1e-14,
                      budget: float = RETURN_BUDGET) -> float:
    """Return map of the minus-side field, integrated in backward time."""
    return _half_return(system.minus, y, False, rtol, atol, budget)


def invert_half_return_minus(system: PiecewiseSystem, target: float,
                             bracket: tuple[float, float] | None = None,
                             scan_n: int = 24) -> float:
    """Solve half_return_minus(w) = target by grid bracket + root solve."""
    if bracket is None:
        # the geometric inverse sits above the minus-side fold, hence above
        # target; failed evaluations below it drop out of the scan
        bracket = (target + 1e-9, target + 3.0)
    a, b = bracket

    def value(w):
        try:
            return half_return_minus(system, w, budget=20.0) - target
        except (NoReturn, DomainExit):
            return None

    ws = list(np.linspace(a, b, scan_n))
    prev_w = prev_v = None
    first_valid = last_invalid = None
    for w in ws:
        v = value(w)
        if v is None:
            prev_w = prev_v = None
            last_invalid = w
            continue
        if first_valid is None:
            first_valid = w
        if prev_v is not None and prev_v * v <= 0:
            return float(brentq(
                lambda z: half_return_minus(system, z) - target,
                prev_w, w, xtol=1e-13))
        prev_w, prev_v = w, v
    # the inverse may hide between the map's domain edge (a fold) and the
    # first coarse sample; bisect the edge, then walk in from it
    if first_valid is not None and last_invalid is not None and last_invalid < first_valid:
        lo, hi = last_invalid, first_valid
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if value(mid) is None:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-12:
                break
        prev_w = prev_v = None
        for k in range(46, -1, -1):
            w = hi + (first_valid - hi) / (2.0 ** k)
            v = value(w)
            if v is None:
                prev_w = prev_v = None
                continue
            if prev_v is not None and prev_v * v <= 0:
                return float(brentq(
                    lambda z: half_return_minus(system, z) - target,
                    prev_w, w, xtol=1e-13))
            prev_w, prev_v = w, v
    raise InversionError(
        f"no bracket for inverting the minus half return at target {target}")


def first_return(system: PiecewiseSystem, y: float,
                 inversion_bracket: tuple[float, float] | None = None) -> float:
    """First return map: invert the minus half map after the plus half map."""
    target = half_return_plus(system, y)
    return invert_half_return_minus(system, target, inversion_bracket)


def first_return_expansion(system: PiecewiseSystem, y_star: float,
                           spacing: float = 1e-2, n_side: int = 9,
                           degree: int = 4) -> np.ndarray:
    """Least-squares polynomial fit of first_return(y) - y around y_star.

    Samples one-sidedly above y_star (the composed map only exists above
    the fold pair); returns coefficients of u = y - y_star, constant first.
    """
    us = spacing * np.arange(1, n_side + 1)
    g = np.array([first_return(system, y_star + u) - (y_star + u) for u in us])
    V = np.vander(us, degree + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(V, g, rcond=None)
    return coef


@dataclass
class FoldFoldReport:
    visibility: str                      # 'VV', 'VI', 'IV' or 'II'
    subtype: str                         # focus/center classification
    quadratic_coefficient: float
    y: float


def classify_fold_fold(system: PiecewiseSystem, y_star: float,
                       tol: float = 1e-3, window: float = 0.2
                       ) -> FoldFoldReport:
    """Visibility pair from the tangency reports, subtype from the fitted
    quadratic coefficient of the first return map."""
    reports = classify_tangencies(system, (y_star - window, y_star + window))
    plus = [r for r in reports if r.side == "plus" and abs(r.y - y_star) < window / 2]
    minus = [r for r in reports if r.side == "minus" and abs(r.y - y_star) < window / 2]
    if not plus or not minus:
        raise NotFoldFold(f"both sides must have a tangency near y = {y_star}")
    letters = []
    for r in (plus[0], minus[0]):
        if r.kind == "visible-fold":
            letters.append("V")
        elif r.kind == "invisible-fold":
            letters.append("I")
        else:
            raise NotFoldFold(f"{r.side} tangency at {r.y} is {r.kind}, not a fold")
    vis = "".join(letters)
    if vis != "II":
        # the composed return map only exists for the invisible-invisible
        # pair; visibility alone classifies the other configurations
        return FoldFoldReport(vis, "undetermined", float("nan"), y_star)
    coef = first_return_expansion(system, y_star)
    a = float(coef[2])
    if a < -tol:
        subtype = "attracting-focus"
    elif a > tol:
        subtype = "repelling-focus"
    else:
        subtype = "undetermined"
    return FoldFoldReport(vis, subtype, a, y_star)
