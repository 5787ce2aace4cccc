"""Non-linear regularization of the combination families, the scaling-chart
slow-fast system, critical-curve data with validated assumption windows,
and the slow-fast Hopf (turning point) condition checker.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy.optimize import brentq

from .combinations import ContinuousCombination
from .errors import AssumptionViolated, InputError
from .psvf import PlanarField
from .transition import TransitionFunction

ZERO_TOL = 1e-9        # |value| below this counts as zero in hopf_check
NONZERO_TOL = 1e-6     # |f_xx| above this counts as nonzero
ASSUMPTION_GRID = 10_000
SCAN_LIMIT = 0.995     # derivative representability horizon of the clamp


@dataclass
class RegularizedSystem:
    """The smooth family Z(phi(x/eps^p), x, y) with alpha = eps*alpha_tilde."""

    combination: ContinuousCombination
    phi: TransitionFunction
    eps: float
    alpha_tilde: float = 0.0
    mode: Literal["eps-power-1", "eps-power-2"] = "eps-power-2"

    def __post_init__(self):
        if self.eps <= 0:
            raise InputError("eps must be positive for direct simulation")
        if self.mode not in ("eps-power-1", "eps-power-2"):
            raise InputError(f"unknown regularization mode {self.mode!r}")

    @property
    def stripe_width(self) -> float:
        return self.eps if self.mode == "eps-power-1" else self.eps * self.eps

    @property
    def alpha(self) -> float:
        return self.eps * self.alpha_tilde

    def field(self) -> PlanarField:
        comb, phi = self.combination, self.phi
        w, al = self.stripe_width, self.alpha

        def ev(x, y):
            lam = phi(x / w)
            return comb.Z1(lam, x, y, al), comb.Z2(lam, x, y, al)

        return PlanarField(ev, name=f"reg[{comb.name}]")

    def with_alpha(self, alpha_tilde: float) -> "RegularizedSystem":
        return RegularizedSystem(self.combination, self.phi, self.eps,
                                 alpha_tilde, self.mode)


def regularize(comb: ContinuousCombination, phi: TransitionFunction, eps: float,
               alpha_tilde: float = 0.0,
               mode: str = "eps-power-2") -> RegularizedSystem:
    return RegularizedSystem(comb, phi, eps, alpha_tilde, mode)


@dataclass
class ChartSystem:
    """Scaling-chart system in (x2, y): the x-stripe blown up to order one.

    x = eps^2 * x2; the chart field equals eps^2 times the regularized
    field expressed in (x2, y), so chart time runs 1/eps^2 faster.
    """

    combination: ContinuousCombination
    phi: TransitionFunction
    eps: float
    alpha_tilde: float = 0.0

    @property
    def alpha(self) -> float:
        return self.eps * self.alpha_tilde

    def rhs(self, t, v):
        x2, y = v
        comb, phi = self.combination, self.phi
        e2 = self.eps * self.eps
        al = self.alpha
        lam = phi(x2)
        dx2 = y - lam * lam + comb.A(lam, e2 * x2, al)
        dy = e2 * (al - lam + comb.B(lam, e2 * x2, y, al))
        return (dx2, dy)

    def fast_rhs(self, t, v):
        """The eps = 0 layer system: y frozen."""
        x2, y = v
        lam = self.phi(x2)
        return (y - lam * lam + self.combination.A(lam, 0.0, 0.0), 0.0)


def chart_field(comb: ContinuousCombination, phi: TransitionFunction,
                eps: float, alpha_tilde: float = 0.0) -> ChartSystem:
    if eps < 0:
        raise InputError("eps must be >= 0 in the scaling chart")
    return ChartSystem(comb, phi, eps, alpha_tilde)


# --- critical curve and slow dynamics ----------------------------------------

@dataclass
class CriticalData:
    """F, G on the validated window, the slow flow, and fiber solvers."""

    F: Callable[[float], float]
    Fp: Callable[[float], float]
    G: Callable[[float], float]
    M1: float
    M2: float
    combination: ContinuousCombination = None
    phi: TransitionFunction = None
    checks: dict = field(default_factory=dict)

    def slow_flow(self, x2: float, probe: float = 1e-6,
                  mismatch_tol: float = 1e-4) -> float:
        """G/F' with the removable singularity at 0 taken as a two-sided
        average; a relative mismatch beyond tolerance is flagged."""
        if x2 != 0.0:
            return self.G(x2) / self.Fp(x2)
        vp = self.G(probe) / self.Fp(probe)
        vm = self.G(-probe) / self.Fp(-probe)
        avg = 0.5 * (vp + vm)
        if abs(vp - vm) > mismatch_tol * max(abs(avg), 1e-30):
            raise AssumptionViolated(
                "A3", f"one-sided slow-flow limits differ: {vp} vs {vm}")
        return avg

    @property
    def fiber_ceiling(self) -> float:
        return min(self.F(self.M2), self.F(-self.M1))


def _largest_valid(pred, limit: float, n: int) -> float:
    """Largest m <= limit with pred true on a grid of (0, m], refined."""
    xs = np.linspace(limit / n, limit, n)
    ok = np.array([pred(x) for x in xs])
    if not ok[0]:
        return 0.0
    if ok.all():
        return limit
    i = int(np.argmin(ok))  # first failure
    lo, hi = xs[i - 1], xs[i]
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-8:
            break
    return float(lo)


def critical_data(comb: ContinuousCombination, phi: TransitionFunction,
                  grid_n: int = ASSUMPTION_GRID,
                  scan_limit: float = SCAN_LIMIT) -> CriticalData:
    """Assemble F, G and validate the structural assumptions.

    A0: phi(0) = 0 and phi'(0) > 0.  A1: the higher-order terms keep both
    tangency heights positive.  A2/A3 are scanned on (0, scan_limit] and
    [-scan_limit, 0) with bisection refinement of the failure boundary.
    """
    if abs(phi(0.0)) > 1e-12 or phi.deriv(0.0) <= 0.0:
        raise AssumptionViolated("A0", "phi(0) = 0 and phi'(0) > 0 required")

    def F(x2):
        lam = phi(x2)
        return lam * lam - comb.A(lam, 0.0, 0.0)

    def Fp(x2):
        lam = phi(x2)
        return (2.0 * lam - comb.A_lam(lam, 0.0, 0.0)) * phi.deriv(x2)

    def G(x2):
        lam = phi(x2)
        return comb.B(lam, 0.0, F(x2), 0.0) - lam

    checks = {}
    a1 = {side: comb.A(lam, 0.0, 0.0) for side, lam in (("plus", 1.0), ("minus", -1.0))}
    checks["A1"] = {"A(+1,0)": a1["plus"], "A(-1,0)": a1["minus"],
                    "ok": a1["plus"] < 1.0 and a1["minus"] < 1.0}
    if not checks["A1"]["ok"]:
        raise AssumptionViolated("A1", f"A(+-1, 0) = {a1} must be < 1")

    n_half = grid_n // 2
    m2 = _largest_valid(lambda x: Fp(x) / x > 0 and G(x) / x < 0, scan_limit, n_half)
    m1 = _largest_valid(lambda x: Fp(-x) / (-x) > 0 and G(-x) / (-x) < 0,
                        scan_limit, n_half)
    if m1 <= 0.0 or m2 <= 0.0:
        raise AssumptionViolated("A2/A3", "no validated interval around 0")
    checks["A2_A3"] = {"M1": m1, "M2": m2}

    data = CriticalData(F, Fp, G, m1, m2, comb, phi, checks)
    data.slow_flow(0.0)  # verifies the removable singularity is consistent
    return data


# --- slow-fast Hopf condition checker ----------------------------------------

@dataclass
class HopfReport:
    conditions: dict
    is_hopf: bool


def hopf_check(f: Callable[[float], float], g: Callable[[float], float],
               point: tuple[float, float] = (0.0, 0.0),
               derivatives: dict | None = None,
               h: float = 1e-5) -> HopfReport:
    """Evaluate the five turning-point conditions for x' = f, y' = eps*g.

    f = g = f_x = 0, f_xx != 0 and g_x * f_y < 0 at the point, using
    supplied derivative callables when given and central differences
    otherwise.
    """
    x0, y0 = point
    d = derivatives or {}

    def fx(x, y):
        return d["f_x"](x, y) if "f_x" in d else (f(x + h, y) - f(x - h, y)) / (2 * h)

    def fy(x, y):
        return d["f_y"](x, y) if "f_y" in d else (f(x, y + h) - f(x, y - h)) / (2 * h)

    def fxx(x, y):
        if "f_xx" in d:
            return d["f_xx"](x, y)
        return (f(x + h, y) - 2 * f(x, y) + f(x - h, y)) / (h * h)

    def gx(x, y):
        return d["g_x"](x, y) if "g_x" in d else (g(x + h, y) - g(x - h, y)) / (2 * h)

    vals = {
        "f": f(x0, y0),
        "g": g(x0, y0),
        "f_x": fx(x0, y0),
        "f_xx": fxx(x0, y0),
        "gx_fy": gx(x0, y0) * fy(x0, y0),
    }
    conds = {
        "f=0": abs(vals["f"]) < ZERO_TOL,
        "g=0": abs(vals["g"]) < ZERO_TOL,
        "f_x=0": abs(vals["f_x"]) < ZERO_TOL,
        "f_xx!=0": abs(vals["f_xx"]) > NONZERO_TOL,
        "gx*fy<0": vals["gx_fy"] < -NONZERO_TOL * NONZERO_TOL,
    }
    report = {k: {"ok": ok, "value": vals[src]} for (k, ok), src in
              zip(conds.items(), ["f", "g", "f_x", "f_xx", "gx_fy"])}
    return HopfReport(report, all(conds.values()))


def chart_hopf_check(comb: ContinuousCombination, phi: TransitionFunction
                     ) -> HopfReport:
    """Check the chart system's layer problem at the origin (eps = 0)."""
    def f(x2, y):
        lam = phi(x2)
        return y - lam * lam + comb.A(lam, 0.0, 0.0)

    def g(x2, y):
        lam = phi(x2)
        return -lam + comb.B(lam, 0.0, y, 0.0)

    return hopf_check(f, g, (0.0, 0.0))


def linear_regularization_slowfast(system, phi: TransitionFunction):
    """(f, g) of the slow-fast form induced by a convex (linear-in-lambda)
    regularization of a piecewise system after the x = eps*x rescaling,
    evaluated at eps = 0."""
    def f(x, y):
        xp = system.plus.eval(0.0, y)
        xm = system.minus.eval(0.0, y)
        return 0.5 * (xp[0] + xm[0]) + phi(x) * 0.5 * (xp[0] - xm[0])

    def g(x, y):
        xp = system.plus.eval(0.0, y)
        xm = system.minus.eval(0.0, y)
        return 0.5 * (xp[1] + xm[1]) + phi(x) * 0.5 * (xp[1] - xm[1])

    return f, g
