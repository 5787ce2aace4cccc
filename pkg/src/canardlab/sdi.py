"""Slow divergence integrals along the critical curve, their half-return
composites, the closed-form center-case integral, and zero finding.

All integrals are negative on their domains; cycle predictions come from
zeros of differences of two of them, so the quadrature budget is kept two
orders below the downstream tolerances.  A fixed-grid composite Simpson
rule is provided as the independent oracle for the adaptive results.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import (
    AssumptionViolated,
    FiberOutOfRange,
    InputError,
    NotADodgingLevel,
    QuadratureError,
)
from .psvf import PiecewiseSystem, classify_tangencies, half_return_minus, half_return_plus
from .slowfast import CriticalData
from .transition import TransitionFunction

QUAD_RTOL = 1e-10
QUAD_ATOL = 1e-14


def composite_simpson(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                      n: int = 1_000_000) -> float:
    """Fixed-grid composite Simpson rule (vectorized); the quadrature oracle."""
    if n % 2:
        n += 1
    xs = np.linspace(a, b, n + 1)
    ys = f(xs)
    h = (b - a) / n
    return float(h / 3.0 * (ys[0] + ys[-1] + 4.0 * ys[1:-1:2].sum()
                            + 2.0 * ys[2:-1:2].sum()))


def _integrand(crit: CriticalData):
    def f(s):
        if s == 0.0:
            return 0.0  # removable: F' ~ c s and G ~ -c' s
        return crit.Fp(s) ** 2 / crit.G(s)

    return f


def sdi_branch(crit: CriticalData, x2: float) -> float:
    """I(x2) = -int_{x2}^{0} F'(s)^2 / G(s) ds, negative on both branches."""
    if x2 == 0.0 or not (-crit.M1 <= x2 <= crit.M2):
        raise FiberOutOfRange(
            f"x2 = {x2} outside the validated window [{-crit.M1}, {crit.M2}]")
    g0 = crit.G(0.5 * x2)
    if g0 == 0.0 or np.sign(g0) != np.sign(crit.G(x2)):
        raise AssumptionViolated("A3", f"G vanishes inside (0, {x2})")
    f = _integrand(crit)
    val, err = quad(f, x2, 0.0, epsabs=QUAD_ATOL, epsrel=QUAD_RTOL, limit=300)
    if not np.isfinite(val) or err > max(QUAD_ATOL, 1e-6 * abs(val)) * 1e3:
        raise QuadratureError(f"quadrature did not converge at x2 = {x2}")
    return -val


def sdi_branch_oracle(crit: CriticalData, x2: float, n: int = 1_000_000) -> float:
    """Same integral via the fixed-grid Simpson oracle."""
    f = _integrand(crit)
    fv = np.vectorize(f)
    return -composite_simpson(fv, x2, 0.0, n)


def fiber_endpoint(crit: CriticalData, y: float, branch: str) -> float:
    """Solution of F(x2) = y on one branch, by bracketed root solve."""
    if branch == "plus":
        hi = crit.F(crit.M2)
        if not 0.0 < y <= hi:
            raise FiberOutOfRange(f"fiber height {y} outside (0, {hi}] "
                                  "on the attracting branch")
        return float(brentq(lambda s: crit.F(s) - y, 1e-14, crit.M2, xtol=1e-14))
    hi = crit.F(-crit.M1)
    if not 0.0 < y <= hi:
        raise FiberOutOfRange(f"fiber height {y} outside (0, {hi}] "
                              "on the repelling branch")
    return float(brentq(lambda s: crit.F(s) - y, -crit.M1, -1e-14, xtol=1e-14))


def fiber_endpoints(crit: CriticalData, y: float) -> tuple[float, float]:
    """Both solutions of F(x2) = y, one per branch."""
    if not 0.0 < y <= crit.fiber_ceiling:
        raise FiberOutOfRange(
            f"fiber height {y} outside (0, {crit.fiber_ceiling}]")
    return fiber_endpoint(crit, y, "plus"), fiber_endpoint(crit, y, "minus")


def Ibar_pair(crit: CriticalData, y: float) -> tuple[float, float]:
    """Slow divergence integrals of the two branches cut at the fiber y."""
    xp, xm = fiber_endpoints(crit, y)
    return sdi_branch(crit, xp), sdi_branch(crit, xm)


def small_D(crit: CriticalData, y: float) -> float:
    """Small-cycle predictor: difference of the fiber-parametrized branches."""
    ip, im = Ibar_pair(crit, y)
    return ip - im


def J_pair(crit: CriticalData, system: PiecewiseSystem, y: float
           ) -> tuple[float, float]:
    """Composites through the numeric half return maps of the outer fields."""
    hp = half_return_plus(system, y)
    hm = half_return_minus(system, y)
    xp, _ = fiber_endpoints(crit, hp)
    _, xm = fiber_endpoints(crit, hm)
    return sdi_branch(crit, xp), sdi_branch(crit, xm)


def terminal_J(crit: CriticalData, system: PiecewiseSystem, y: float) -> float:
    jp, jm = J_pair(crit, system, y)
    return jp - jm


def solve_mirror(phi: TransitionFunction, x: float, crit: CriticalData | None = None
                 ) -> float:
    """The negative mirror point where F takes the same value as at x > 0.

    With F = phi^2 this is the L(x) < 0 solving phi(L) = -phi(x); in
    general it is the negative fiber endpoint of F(x).
    """
    if crit is not None:
        return fiber_endpoints(crit, crit.F(x))[1]
    target = -phi(x)
    return brentq(lambda s: phi(s) - target, -1.0 + 1e-14, -1e-15, xtol=1e-15)


def center_closed_form(phi: TransitionFunction, x: float) -> float:
    """4 int_x^{L(x)} phi (phi')^2 ds with phi(L(x)) = -phi(x).

    Closed form of the terminal difference integral for the families whose
    critical curve is phi^2 with unit slow drift.
    """
    if not 0.0 < x < 1.0:
        raise FiberOutOfRange(f"x = {x} outside (0, 1)")
    L = solve_mirror(phi, x)
    val, err = quad(lambda s: phi(s) * phi.deriv(s) ** 2, x, L,
                    epsabs=QUAD_ATOL, epsrel=QUAD_RTOL, limit=300)
    return 4.0 * val


def center_closed_form_oracle(phi: TransitionFunction, x: float,
                              n: int = 1_000_000) -> float:
    L = solve_mirror(phi, x)
    f = np.vectorize(lambda s: phi(s) * phi.deriv(s) ** 2)
    return 4.0 * composite_simpson(f, x, L, n)


def dodging_I(crit: CriticalData, system: PiecewiseSystem, y: float,
              tangency_window: tuple[float, float] = (0.0, 2.0)) -> float:
    """Dodging predictor: attracting-branch integral at the fiber through y
    minus the repelling-branch composite through the minus half map.

    Defined for y strictly between the two tangency heights.
    """
    reports = classify_tangencies(system, tangency_window)
    ys = {r.side: r.y for r in reports}
    if "plus" not in ys or "minus" not in ys:
        raise NotADodgingLevel("no fold pair found in the tangency window")
    lo, hi = sorted((ys["plus"], ys["minus"]))
    if not lo < y < hi:
        raise NotADodgingLevel(
            f"y = {y} not strictly between the tangency heights ({lo}, {hi})")
    ibar_plus = sdi_branch(crit, fiber_endpoint(crit, y, "plus"))
    hm = half_return_minus(system, y)
    j_minus = sdi_branch(crit, fiber_endpoint(crit, hm, "minus"))
    return ibar_plus - j_minus


# --- zero finding -------------------------------------------------------------

@dataclass
class Zero:
    y: float
    residual: float
    derivative: float
    multiplicity: Literal["simple", "suspected-multiple"]


@dataclass
class ZeroSet:
    zeros: list[Zero]
    degenerate: bool = False      # set when the function is identically ~0

    def __iter__(self):
        return iter(self.zeros)

    def __len__(self):
        return len(self.zeros)

    def locations(self) -> list[float]:
        return [z.y for z in self.zeros]


def find_zeros(f: Callable[[float], float], window: tuple[float, float],
               grid_n: int = 2000, refine: bool = True,
               zero_floor: float = 1e-10,
               noise: Callable[[float], float] | None = None) -> ZeroSet:
    """Sign-change scan with bisection refinement and multiplicity flags.

    A zero is flagged suspected-multiple when the local derivative is
    small against the window's derivative scale, or when the function
    touches zero without a sign change on the refined grid.  `noise`
    gives a per-point indistinguishability threshold (defaults to the
    constant zero_floor); sign flips entirely inside it are ignored and a
    window that never exceeds it reports the degenerate flag.
    """
    a, b = window
    ys = np.linspace(a, b, grid_n)
    vals = np.array([f(y) for y in ys])
    floor = (np.array([noise(y) for y in ys]) if noise is not None
             else np.full(grid_n, zero_floor))
    scale = float(np.nanmax(np.abs(vals)))
    if np.all(np.abs(vals) <= floor):
        return ZeroSet([], degenerate=True)
    dscale = float(np.nanmax(np.abs(np.diff(vals)))) / (ys[1] - ys[0])
    out: list[Zero] = []
    for i in range(grid_n - 1):
        v0, v1 = vals[i], vals[i + 1]
        if not (np.isfinite(v0) and np.isfinite(v1)):
            continue
        if v0 == 0.0:
            continue
        if max(abs(v0), abs(v1)) < max(floor[i], floor[i + 1]):
            continue  # sign flips inside quadrature noise are not zeros
        if v0 * v1 < 0:
            yr = brentq(f, ys[i], ys[i + 1], xtol=1e-10) if refine else 0.5 * (ys[i] + ys[i + 1])
            h = max(1e-7, (b - a) * 1e-6)
            d = (f(yr + h) - f(yr - h)) / (2 * h)
            mult = "simple" if abs(d) > 1e-3 * dscale else "suspected-multiple"
            out.append(Zero(float(yr), float(f(yr)), float(d), mult))
    # tangential touches: local minima of |f| that dip below the floor
    # without a sign change
    absv = np.abs(vals)
    for i in range(1, grid_n - 1):
        if (absv[i] < 1e-6 * scale and absv[i] <= absv[i - 1]
                and absv[i] <= absv[i + 1]
                and vals[i - 1] * vals[i + 1] > 0):
            if any(abs(z.y - ys[i]) < 2 * (ys[1] - ys[0]) for z in out):
                continue
            h = max(1e-7, (b - a) * 1e-6)
            d = (f(ys[i] + h) - f(ys[i] - h)) / (2 * h)
            out.append(Zero(float(ys[i]), float(vals[i]), float(d),
                            "suspected-multiple"))
    out.sort(key=lambda z: z.y)
    return ZeroSet(out)


# --- profile assembly ---------------------------------------------------------

@dataclass
class SdiProfile:
    """Tabulated slow divergence integrals over a y-window."""

    kind: Literal["terminal", "small", "dodging"]
    ys: np.ndarray
    columns: dict[str, np.ndarray]
    zeros: ZeroSet


def small_cycle_ceiling(crit: CriticalData, system: PiecewiseSystem,
                        tangency_window: tuple[float, float] = (0.0, 2.0),
                        margin: float = 0.9) -> float:
    """Default ceiling for small-cycle fibers: stay inside the validated
    fiber range and below both tangency heights, with margin."""
    reports = classify_tangencies(system, tangency_window)
    heights = [r.y for r in reports]
    lo = min(heights) if heights else np.inf
    return margin * min(crit.fiber_ceiling, lo)


def sdi_profile(crit: CriticalData, system: PiecewiseSystem,
                kind: str, window: tuple[float, float] | None = None,
                n: int = 200) -> SdiProfile:
    """Tabulate the requested predictor over a window and find its zeros."""
    if kind == "small":
        hi = small_cycle_ceiling(crit, system)
        lo, hi = (window if window is not None else (hi * 1e-3, hi))
        ys = np.linspace(lo, hi, n)
        ip = np.empty(n)
        im = np.empty(n)
        for i, y in enumerate(ys):
            ip[i], im[i] = Ibar_pair(crit, y)
        cols = {"Ibar_plus": ip, "Ibar_minus": im, "small_D": ip - im}
        mag = np.abs(ip) + np.abs(im)

        def noise(y):
            m = float(np.interp(y, ys, mag))
            return max(1e-13, 3.0 * QUAD_RTOL * m)

        zs = find_zeros(lambda y: small_D(crit, y), (lo, hi),
                        grid_n=max(200, n), noise=noise)
        return SdiProfile("small", ys, cols, zs)
    if kind == "terminal":
        if window is None:
            raise InputError("terminal profiles need an explicit y-window")
        lo, hi = window
        ys = np.linspace(lo, hi, n)
        jp = np.empty(n)
        jm = np.empty(n)
        for i, y in enumerate(ys):
            jp[i], jm[i] = J_pair(crit, system, y)
        cols = {"J_plus": jp, "J_minus": jm, "terminal_J": jp - jm}
        zs = find_zeros(lambda y: terminal_J(crit, system, y), (lo, hi),
                        grid_n=min(400, 2 * n))
        return SdiProfile("terminal", ys, cols, zs)
    if kind == "dodging":
        reports = classify_tangencies(system, (0.0, 2.0))
        heights = sorted(r.y for r in reports)
        if len(heights) < 2 or abs(heights[0] - heights[1]) < 1e-12:
            raise NotADodgingLevel("tangency heights do not split")
        pad = 0.02 * (heights[1] - heights[0])
        lo, hi = (window if window is not None
                  else (heights[0] + pad, heights[1] - pad))
        ys = np.linspace(lo, hi, n)
        vals = np.array([dodging_I(crit, system, y) for y in ys])
        zs = find_zeros(lambda y: dodging_I(crit, system, y), (lo, hi),
                        grid_n=max(200, n))
        return SdiProfile("dodging", ys, {"dodging_I": vals}, zs)
    raise InputError(f"unknown profile kind {kind!r}")
