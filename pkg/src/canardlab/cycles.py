"""Direct verification at eps > 0: Poincare returns on the switching line,
breaking-parameter tuning by two-sided canard shooting, cycle location
with multipliers, saddle-node sweeps for the dodging configuration, and
divergence accumulation along computed canard segments.

Exponential contraction and expansion rates of order exp(|I|/eps^2) bound
what double precision can track: structure with |I| beyond roughly
eps^2 * ln(1/atol) drowns in integration noise.  tracking_fiber_ceiling
quantifies the usable fiber heights; scan windows should respect it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import (
    InputError,
    NoConnectionInRange,
    NoReturn,
    NotACanardSegment,
)
from .odetools import (
    Crossing,
    Trajectory,
    find_crossings,
    integrate as _integrate,
    integrate_until_crossing,
)
from .psvf import PiecewiseSystem, PlanarField
from .slowfast import ChartSystem, CriticalData, RegularizedSystem, chart_field

RTOL = 1e-12
ATOL = 1e-14
MULT_RESOLUTION = 2e-4


@dataclass
class EventSpec:
    coord: int = 0
    level: float = 0.0
    direction: int = 0


def integrate(fld: PlanarField, start: Sequence[float], t_budget: float,
              events: Sequence[EventSpec] = (), rtol: float = RTOL,
              atol: float = ATOL) -> Trajectory:
    """Dense-output integration with post-hoc event location."""
    sol = _integrate(lambda t, v: fld.eval(v[0], v[1]), start, (0.0, t_budget),
                     rtol=rtol, atol=atol)
    crossings = []
    for ev in events:
        speed = None
        if ev.coord == 0:
            speed = lambda s: fld.eval(s[0], s[1])[0]
        crossings.extend(find_crossings(sol, coord=ev.coord, level=ev.level,
                                        direction=ev.direction, speed=speed))
    crossings.sort(key=lambda c: c.t)
    return Trajectory(sol, crossings, method=getattr(sol, "_method_used", ""))


@dataclass
class SectionSpec:
    """Poincare section on the switching line with a crossing filter."""

    window: tuple[float, float]
    direction: int = +1

    def accepts(self, y: float) -> bool:
        return self.window[0] < y < self.window[1]


def poincare_return(reg: RegularizedSystem, section: SectionSpec, y: float,
                    budget: float = 60.0, rtol: float = RTOL,
                    atol: float = ATOL) -> tuple[float, float]:
    """First return to the section by one full-orbit integration.

    Returns (y_return, transit_time).  Crossings outside the section
    window (turning-point passages, inner loops) are skipped.
    """
    if not section.accepts(y):
        raise InputError(f"y = {y} outside the section window {section.window}")
    fld = reg.field()
    c = integrate_until_crossing(
        fld.rhs, (0.0, y), budget, direction=section.direction,
        accept=lambda cr: section.accepts(cr.state[1]),
        t_min=1e-9, chunk=8.0, rtol=rtol, atol=atol)
    if c is None:
        raise NoReturn(f"no return to the section from (0, {y}) within "
                       f"t = {budget}")
    return float(c.state[1]), float(c.t)


def displacement(reg: RegularizedSystem, section: SectionSpec, y: float,
                 **kw) -> float:
    return poincare_return(reg, section, y, **kw)[0] - y


# --- breaking-parameter tuning ------------------------------------------------

@dataclass
class TuneResult:
    alpha_tilde: float
    gap: float
    bracket: tuple[float, float]
    expansions: int = 0


def _chart_shot(chart: ChartSystem, anchor_frac: float, forward: bool,
                budget: float, rtol: float, atol: float) -> float | None:
    """y-value of the slow-manifold shot at its first crossing of x2 = 0."""
    crit_m = anchor_frac
    if forward:
        x0 = crit_m
        rhs = chart.rhs
        direction = -1
    else:
        x0 = -crit_m
        rhs = lambda t, v: tuple(-c for c in chart.rhs(t, v))
        direction = +1
    lam = chart.phi(x0)
    y0 = lam * lam - chart.combination.A(lam, 0.0, 0.0)
    c = integrate_until_crossing(rhs, (x0, y0), budget, direction=direction,
                                 t_min=1e-9, chunk=budget / 4,
                                 rtol=rtol, atol=atol)
    return None if c is None else float(c.state[1])


def _gap_fn(comb, phi, eps, crit, anchor_frac, rtol, atol):
    ch_budget = 40.0 / (eps * eps)
    m1 = crit.M1 if crit is not None else 0.985
    m2 = crit.M2 if crit is not None else 0.985

    def gap(at):
        ch = chart_field(comb, phi, eps, at)
        yf = _chart_shot(ch, anchor_frac * m2, True, ch_budget, rtol, atol)
        yb = _chart_shot(ch, anchor_frac * m1, False, ch_budget, rtol, atol)
        if yf is None and yb is None:
            return None, "both"
        if yf is None:
            return None, "forward"
        if yb is None:
            return None, "backward"
        return yf - yb, ""

    return gap


def tune_alpha(comb, phi, eps: float, crit: CriticalData | None = None,
               anchor_frac: float = 0.8, scan_factor: float = 0.5,
               gap_tol: float = 1e-11, max_expand: int = 7,
               rtol: float = RTOL, atol: float = 1e-15) -> TuneResult:
    """Canard-connection shoot: bisect the breaking parameter on the sign
    of the matching gap (never its magnitude).

    Scans [-c*eps, c*eps] first and doubles the interval when the gap
    does not change sign inside it.  A stalled forward shot marks the
    alpha side past the connection where the branch equilibrium blocks
    passage, and is treated as the corresponding gap sign.
    """
    gap = _gap_fn(comb, phi, eps, crit, anchor_frac, rtol, atol)
    c = scan_factor * eps
    expansions = 0
    lo = hi = None
    glo = ghi = None
    for _ in range(max_expand + 1):
        g_minus, s_minus = gap(-c)
        g_plus, s_plus = gap(+c)
        vm = g_minus if g_minus is not None else (
            math.inf if s_minus == "forward" else -math.inf)
        vp = g_plus if g_plus is not None else (
            math.inf if s_plus == "forward" else -math.inf)
        if vm == vp or (vm < 0 < vp) or (vp < 0 < vm):
            if vm * vp < 0 or (math.isinf(vm) and math.isinf(vp) and vm != vp):
                lo, hi = -c, c
                glo, ghi = vm, vp
                break
        c *= 2.0
        expansions += 1
    else:
        raise NoConnectionInRange(
            f"gap does not change sign for |alpha_tilde| <= {c / 2}")
    if lo is None:
        raise NoConnectionInRange("no usable bracket for the connection")
    orient = 1.0 if ghi > glo else -1.0
    best = None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g, stall = gap(mid)
        if g is not None:
            best = (mid, g)
            if abs(g) < gap_tol:
                break
            side = orient * g
        else:
            side = orient * (math.inf if stall == "forward" else -math.inf)
        if side < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-17 * max(1.0, abs(mid)):
            break
    if best is None:
        raise NoConnectionInRange("connection bracket collapsed onto stalls")
    return TuneResult(best[0], best[1], (lo, hi), expansions)


# --- cycle location -----------------------------------------------------------

@dataclass
class CycleRecord:
    y: float
    period: float
    multiplier: float
    classification: Literal["stable", "unstable", "near-neutral"]
    eps: float
    alpha_tilde: float
    residual: float
    hausdorff_proxy: float | None = None


def tracking_fiber_ceiling(eps: float, atol: float = ATOL,
                           contraction_rate: float = 2.0) -> float:
    """Largest fiber height whose canard segment double precision can
    track: the expansion exp(rate*h/eps^2) of the noise floor must stay
    below the fiber scale."""
    h = eps * eps * math.log(1.0 / atol) / contraction_rate
    for _ in range(20):
        h = eps * eps * math.log(max(h, 1e-300) / atol) / contraction_rate
    return h


def find_cycles(reg: RegularizedSystem, section: SectionSpec,
                scan_n: int = 60, refine_xtol: float = 1e-11,
                multiplier_step: float | None = None,
                skeleton: Sequence[tuple[float, float]] | None = None,
                budget: float = 60.0, rtol: float = RTOL, atol: float = ATOL
                ) -> list[CycleRecord]:
    """Scan the displacement map on the section and refine its sign
    changes to fixed points of the return map."""
    lo, hi = section.window
    ys = np.linspace(lo, hi, scan_n + 2)[1:-1]
    scan_n = len(ys)
    disp = np.full(scan_n, np.nan)
    for i, y in enumerate(ys):
        try:
            disp[i] = displacement(reg, section, y, budget=budget,
                                   rtol=rtol, atol=atol)
        except NoReturn:
            continue
    out: list[CycleRecord] = []
    h_mult = multiplier_step if multiplier_step is not None else max(
        1e-6, reg.eps ** 2 * 1e-2)
    for i in range(scan_n - 1):
        if not (np.isfinite(disp[i]) and np.isfinite(disp[i + 1])):
            continue
        if disp[i] == 0.0 or disp[i] * disp[i + 1] >= 0:
            continue
        y_star = brentq(lambda y: displacement(reg, section, y, budget=budget,
                                               rtol=rtol, atol=atol),
                        ys[i], ys[i + 1], xtol=refine_xtol)
        res = displacement(reg, section, y_star, budget=budget,
                           rtol=rtol, atol=atol)
        r_hi, t_hi = poincare_return(reg, section, y_star + h_mult,
                                     budget=budget, rtol=rtol, atol=atol)
        r_lo, _ = poincare_return(reg, section, y_star - h_mult,
                                  budget=budget, rtol=rtol, atol=atol)
        mult = (r_hi - r_lo) / (2 * h_mult)
        if abs(mult) < 1.0 - MULT_RESOLUTION:
            cls = "stable"
        elif abs(mult) > 1.0 + MULT_RESOLUTION:
            cls = "unstable"
        else:
            # displacement slope across the bracketing cell resolves the
            # stability sign when the multiplier sits at 1 within the
            # finite-difference resolution (near-merged pairs)
            cls = "stable" if disp[i] > 0 > disp[i + 1] else "unstable"
        _, period = poincare_return(reg, section, y_star, budget=budget,
                                    rtol=rtol, atol=atol)
        rec = CycleRecord(float(y_star), float(period), float(mult), cls,
                          reg.eps, reg.alpha_tilde, float(res))
        if skeleton is not None:
            rec.hausdorff_proxy = orbit_skeleton_distance(
                reg, y_star, skeleton, budget=budget, rtol=rtol, atol=atol)
        out.append(rec)
    return out


def terminal_skeleton(system: PiecewiseSystem, y0: float,
                      n: int = 400) -> list[tuple[float, float]]:
    """Sampled singular canard cycle through section height y0: the outer
    arcs of both one-sided fields plus the blown-down stripe segment."""
    from .psvf import half_return_plus  # local import; cheap

    pts: list[tuple[float, float]] = []

    def sample_arc(fld, start, forward, budget=60.0):
        sign = 1.0 if forward else -1.0
        rhs = lambda t, v: tuple(sign * c for c in fld.eval(v[0], v[1]))
        c = integrate_until_crossing(rhs, start, budget, t_min=1e-9,
                                     rtol=1e-10, atol=1e-12)
        sol_t = np.linspace(0.0, c.t, n) if c else np.linspace(0.0, budget, n)
        sol = _integrate(rhs, start, (0.0, c.t if c else budget),
                         rtol=1e-10, atol=1e-12)
        return [tuple(sol.sol(t)) for t in sol_t]

    pts.extend(sample_arc(system.plus, (0.0, y0), True))
    h = half_return_plus(system, y0)
    pts.extend(sample_arc(system.minus, (0.0, h), True))
    for y in np.linspace(0.0, h, n // 2):
        pts.append((0.0, y))
    return pts


def orbit_skeleton_distance(reg: RegularizedSystem, y0: float,
                            skeleton: Sequence[tuple[float, float]],
                            budget: float = 60.0, rtol: float = RTOL,
                            atol: float = ATOL) -> float:
    """Max over the located orbit of the distance to the skeleton samples."""
    fld = reg.field()
    c = integrate_until_crossing(fld.rhs, (0.0, y0), budget, direction=+1,
                                 accept=lambda cr: abs(cr.state[1] - y0) < 0.5,
                                 t_min=1e-9, rtol=rtol, atol=atol)
    T = c.t if c else budget
    sol = _integrate(fld.rhs, (0.0, y0), (0.0, T), rtol=rtol, atol=atol)
    ts = np.linspace(0.0, T, 500)
    orbit = sol.sol(ts).T
    sk = np.asarray(skeleton, dtype=float)
    d = 0.0
    for p in orbit:
        d = max(d, float(np.min(np.hypot(sk[:, 0] - p[0], sk[:, 1] - p[1]))))
    return d


# --- two-sided difference map (capture-free cycle detector) --------------------

def turning_difference(reg: RegularizedSystem, y: float, match_level: float,
                       budget: float = 40.0, rtol: float = RTOL,
                       atol: float = 1e-15) -> float | None:
    """x-mismatch, at the level section y = match_level on the repelling
    side, between the forward orbit from (0, y) and the backward orbit
    from the same point.

    Zeros in y are periodic orbits.  Unlike the full-orbit displacement
    this stays defined when interior equilibria capture forward orbits,
    because each shot only ever runs toward its branch's attracting
    side.  Returned in stripe units (x / eps^p).
    """
    fld = reg.field()
    w = reg.stripe_width

    def level_crossing(rhs, start, rising):
        c = integrate_until_crossing(
            rhs, start, budget, coord=1, level=match_level,
            direction=+1 if rising else -1,
            accept=lambda cr: cr.state[0] < 0.0,
            t_min=1e-9, chunk=8.0, rtol=rtol, atol=atol)
        return None if c is None else float(c.state[0])

    xf = level_crossing(fld.rhs, (0.0, y), rising=True)
    bwd = lambda t, v: tuple(-c for c in fld.eval(v[0], v[1]))
    xb = level_crossing(bwd, (-0.0, y), rising=False)
    if xf is None or xb is None:
        return None
    return (xf - xb) / w


def count_difference_zeros(reg: RegularizedSystem, window: tuple[float, float],
                           match_level: float, grid_n: int = 40,
                           **kw) -> tuple[int, list[float]]:
    ys = np.linspace(window[0], window[1], grid_n)
    vals = np.array([v if (v := turning_difference(reg, y, match_level, **kw))
                     is not None else np.nan for y in ys])
    locs = []
    for i in range(grid_n - 1):
        if not (np.isfinite(vals[i]) and np.isfinite(vals[i + 1])):
            continue
        if vals[i] != 0.0 and vals[i] * vals[i + 1] < 0:
            yr = brentq(lambda y: turning_difference(reg, y, match_level, **kw),
                        ys[i], ys[i + 1], xtol=1e-12)
            locs.append(float(yr))
    return len(locs), locs


@dataclass
class SaddleNodeResult:
    alpha_critical: float
    y_critical: float
    multiplier: float
    counts: list[tuple[float, int]] = field(default_factory=list)
    found: bool = True


def detect_saddle_node(comb, phi, eps: float, window: tuple[float, float],
                       alpha_center: float, alpha_span: float,
                       match_level: float, sweep_n: int = 9,
                       grid_n: int = 32, mode: str = "eps-power-2",
                       rtol: float = RTOL, atol: float = 1e-15
                       ) -> SaddleNodeResult | None:
    """Sweep the breaking parameter and look for the fixed-point count
    transition 2 -> 1 -> 0 of the two-sided difference map.

    Returns None when no fold (a 2 -> 0 collapse through tangency) is
    found in the sweep; the recorded counts let the caller distinguish a
    migrating single zero from a genuine pair annihilation.
    """
    kw = dict(rtol=rtol, atol=atol)
    counts: list[tuple[float, int, list[float]]] = []
    for at in np.linspace(alpha_center - alpha_span, alpha_center + alpha_span,
                          sweep_n):
        reg = RegularizedSystem(comb, phi, eps, at, mode)
        n, locs = count_difference_zeros(reg, window, match_level,
                                         grid_n=grid_n, **kw)
        counts.append((float(at), n, locs))
    trace = [(a, n) for a, n, _ in counts]
    # find adjacent sweep points where the count drops from 2 to 0/1
    for (a0, n0, l0), (a1, n1, l1) in zip(counts[:-1], counts[1:]):
        pair = {n0, n1}
        if n0 >= 2 and n1 < n0 or n1 >= 2 and n0 < n1:
            lo, hi = (a0, a1) if n0 >= 2 else (a1, a0)
            locs_pair = l0 if n0 >= 2 else l1
            for _ in range(40):
                mid = 0.5 * (lo + hi)
                reg = RegularizedSystem(comb, phi, eps, mid, mode)
                n, locs = count_difference_zeros(reg, window, match_level,
                                                 grid_n=grid_n, **kw)
                if n >= 2:
                    lo, locs_pair = mid, locs
                else:
                    hi = mid
                if abs(hi - lo) < 1e-12 * max(1.0, abs(mid)):
                    break
            if len(locs_pair) >= 2:
                y_c = 0.5 * (locs_pair[0] + locs_pair[-1])
                if abs(locs_pair[0] - locs_pair[-1]) < 1e-5:
                    pass
                reg = RegularizedSystem(comb, phi, eps, lo, mode)
                m = _difference_multiplier(reg, y_c, match_level, **kw)
                return SaddleNodeResult(float(lo), float(y_c), m, trace)
    return SaddleNodeResult(math.nan, math.nan, math.nan, trace, found=False)


def _difference_multiplier(reg, y_star, match_level, h=None, **kw):
    """Return-map multiplier from the two shot families: the ratio of the
    forward and backward section-arrival derivatives in y."""
    h = h if h is not None else max(1e-7, reg.eps ** 2 * 1e-3)
    fld = reg.field()
    w = reg.stripe_width

    def arrivals(y):
        c_f = integrate_until_crossing(
            fld.rhs, (0.0, y), 40.0, coord=1, level=match_level, direction=+1,
            accept=lambda cr: cr.state[0] < 0, t_min=1e-9, **kw)
        bwd = lambda t, v: tuple(-q for q in fld.eval(v[0], v[1]))
        c_b = integrate_until_crossing(
            bwd, (0.0, y), 40.0, coord=1, level=match_level, direction=-1,
            accept=lambda cr: cr.state[0] < 0, t_min=1e-9, **kw)
        if c_f is None or c_b is None:
            return None
        return c_f.state[0] / w, c_b.state[0] / w

    a_hi = arrivals(y_star + h)
    a_lo = arrivals(y_star - h)
    if a_hi is None or a_lo is None:
        return math.nan
    dxf = (a_hi[0] - a_lo[0]) / (2 * h)
    dxb = (a_hi[1] - a_lo[1]) / (2 * h)
    if dxb == 0:
        return math.inf
    return dxf / dxb


# --- breaking-parameter refinement to the cycle-pair regime --------------------

def refine_alpha_for_pair(comb, phi, eps: float, section: SectionSpec,
                          alpha_start: float, step: float = 1e-7,
                          dip_probe: float | None = None,
                          mode: str = "eps-power-2", scan_n: int = 40,
                          max_iter: int = 40, budget: float = 60.0,
                          sharpen: int = 20,
                          rtol: float = RTOL, atol: float = ATOL
                          ) -> tuple[float, list[CycleRecord]]:
    """Adjust the breaking parameter from the tuned connection into the
    regime where the displacement map has a hyperbolic cycle pair.

    The displacement over the section is a nearly flat baseline plus a
    dip localized at the predicted zero.  The pair exists while the dip
    bottom and the baseline straddle zero.  When the dip location is
    supplied (dip_probe, usually the predictor zero), the whole search
    runs on two probe orbits per parameter value: the baseline sign flip
    is bracketed by a doubling walk, the parameter is pushed toward the
    pair-annihilation edge where the cycles tighten around the predicted
    zero, and only the final location runs a full section scan.
    """
    lo_w, hi_w = section.window
    y_tail = hi_w - 0.02 * (hi_w - lo_w)

    def disp_at(at, y):
        reg = RegularizedSystem(comb, phi, eps, at, mode)
        return displacement(reg, section, y, budget=budget,
                            rtol=rtol, atol=atol)

    def cycles_at(at, window=None, n=None):
        reg = RegularizedSystem(comb, phi, eps, at, mode)
        sec = SectionSpec(window or section.window, section.direction)
        return find_cycles(reg, sec, scan_n=n or scan_n, budget=budget,
                           rtol=rtol, atol=atol)

    if dip_probe is None or not (lo_w < dip_probe < y_tail):
        return _refine_pair_by_scan(cycles_at, disp_at, alpha_start, step,
                                    max_iter)

    span = y_tail - dip_probe
    lo_candidates = [max(lo_w + 1e-4 * (hi_w - lo_w), dip_probe - k * span)
                     for k in (8.0, 4.0, 2.0, 1.0)]

    def flank(at):
        for y in lo_candidates:
            if y >= dip_probe:
                continue
            try:
                return disp_at(at, y)
            except NoReturn:
                continue
        raise NoReturn("no usable flank probe below the dip")

    interior = np.linspace(dip_probe, y_tail, 7)[:-1]

    def probes(at):
        # the dip minimum drifts with the baseline tilt; track it with a
        # handful of interior samples and keep the extreme of each sign
        vals = np.array([disp_at(at, y) for y in interior])
        return (flank(at), float(vals.min()), float(vals.max()),
                disp_at(at, y_tail))

    def has_pair(pr):
        # some interior value must oppose both the flank and the tail
        lo_v, mn, mx, tl = pr
        if lo_v > 0 and tl > 0:
            return mn < 0
        if lo_v < 0 and tl < 0:
            return mx > 0
        return False

    pr0 = probes(alpha_start)
    at_pair = None
    if has_pair(pr0):
        at_pair, pr_pair = alpha_start, pr0
    else:
        # bracket the baseline (tail) sign flip by a doubling walk
        bracket = None
        for direction in (-1.0, +1.0):
            at, st, t_prev = alpha_start, step * direction, pr0[3]
            for _ in range(max_iter):
                at_next = at + st
                pr = probes(at_next)
                if has_pair(pr):
                    at_pair, pr_pair = at_next, pr
                    break
                if t_prev * pr[3] < 0:
                    bracket = tuple(sorted((at, at_next)))
                    break
                at, t_prev = at_next, pr[3]
                st *= 2.0
            if at_pair is not None or bracket:
                break
        if at_pair is None:
            if bracket is None:
                raise NoReturn("displacement baseline never changes sign; "
                               "no cycle-pair regime found in the walk range")
            lo, hi = bracket
            t_lo = disp_at(lo, y_tail)
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                pr = probes(mid)
                if has_pair(pr):
                    at_pair, pr_pair = mid, pr
                    break
                if t_lo * pr[3] <= 0:
                    hi = mid
                else:
                    lo, t_lo = mid, pr[3]
                if hi - lo < 1e-6 * step:
                    break
    if at_pair is None:
        raise NoReturn("no breaking-parameter value with a cycle pair found "
                       "around the baseline flip")

    # locate both edges of the pair band in the breaking parameter and
    # work at its midpoint: at the flip edge the extra near-ceiling cycle
    # degenerates, at the annihilation edge the pair merges; the middle
    # keeps the predictor-anchored member cleanly separated
    def edge_from(a_in, a_out):
        lo_e, hi_e = a_in, a_out
        for _ in range(24):
            mid = 0.5 * (lo_e + hi_e)
            if has_pair(probes(mid)):
                lo_e = mid
            else:
                hi_e = mid
            if abs(hi_e - lo_e) < max(1e-9, 1e-3 * abs(hi_e - lo_e + 1e-30)):
                if abs(hi_e - lo_e) < 1e-2 * abs(at_pair - alpha_start) + 1e-12:
                    break
        return lo_e

    h_step = max(abs(at_pair - alpha_start) * 0.25, 4 * step)
    edges = []
    for d_dir in (+1.0, -1.0):
        a_out, st = at_pair, h_step * d_dir
        for _ in range(14):
            cand = a_out + st
            if has_pair(probes(cand)):
                a_out = cand
                st *= 2.0
            else:
                edges.append(edge_from(a_out, cand))
                break
        else:
            edges.append(a_out)
    at_pair = 0.5 * (edges[0] + edges[1])

    # a small scan around the dip brackets both crossings without paying
    # for a full-section sweep
    at_good = at_pair
    reg = RegularizedSystem(comb, phi, eps, at_good, mode)
    grid = np.concatenate([
        np.linspace(lo_candidates[-2], dip_probe, 6, endpoint=False),
        np.linspace(dip_probe, y_tail, 8),
    ])
    vals = np.array([displacement(reg, section, y, budget=budget,
                                  rtol=rtol, atol=atol) for y in grid])
    recs = []
    for i in range(len(grid) - 1):
        if not (np.isfinite(vals[i]) and np.isfinite(vals[i + 1])):
            continue
        if vals[i] != 0.0 and vals[i] * vals[i + 1] < 0:
            recs.append(_locate_cycle(reg, section, (grid[i], grid[i + 1]),
                                      budget, rtol, atol))
    if len(recs) < 2:
        full = cycles_at(at_good)
        if len(full) >= 2:
            return at_good, full
        raise NoReturn("probe orbits straddle but only one fixed point "
                       "could be bracketed")
    recs.sort(key=lambda r: r.y)
    return at_good, recs


def _locate_cycle(reg: RegularizedSystem, section: SectionSpec,
                  bracket: tuple[float, float], budget: float,
                  rtol: float, atol: float) -> CycleRecord:
    """Refine one displacement sign change to a CycleRecord."""
    f = lambda y: displacement(reg, section, y, budget=budget,
                               rtol=rtol, atol=atol)
    a, b = bracket
    fa = f(a)
    y_star = brentq(f, a, b, xtol=1e-12)
    res = f(y_star)
    h_mult = max(1e-6, reg.eps ** 2 * 1e-2)
    r_hi, _ = poincare_return(reg, section, y_star + h_mult, budget=budget,
                              rtol=rtol, atol=atol)
    r_lo, _ = poincare_return(reg, section, y_star - h_mult, budget=budget,
                              rtol=rtol, atol=atol)
    mult = (r_hi - r_lo) / (2 * h_mult)
    if abs(mult) < 1.0 - MULT_RESOLUTION:
        cls = "stable"
    elif abs(mult) > 1.0 + MULT_RESOLUTION:
        cls = "unstable"
    else:
        cls = "stable" if fa > 0 else "unstable"
    _, period = poincare_return(reg, section, y_star, budget=budget,
                                rtol=rtol, atol=atol)
    return CycleRecord(float(y_star), float(period), float(mult), cls,
                       reg.eps, reg.alpha_tilde, float(res))


def _refine_pair_by_scan(cycles_at, disp_at, alpha_start, step, max_iter):
    base = cycles_at(alpha_start)
    if len(base) >= 2:
        return alpha_start, base
    for direction in (+1.0, -1.0):
        at, st = alpha_start, step * direction
        for _ in range(max_iter):
            at = at + st
            recs = cycles_at(at)
            if len(recs) >= 2:
                return at, recs
            st *= 2.0
    raise NoReturn("no breaking-parameter value with a cycle pair found")


# --- divergence along computed canard segments ---------------------------------

@dataclass
class DivergenceResult:
    raw: float
    scaled: float
    t_span: float
    max_off_manifold: float


def divergence_along_orbit(chart: ChartSystem, crit: CriticalData,
                           x2_from: float, x2_to: float,
                           budget: float | None = None,
                           track_tol: float | None = None,
                           rtol: float = RTOL, atol: float = 1e-15
                           ) -> DivergenceResult:
    """Accumulate the divergence of the chart field along the orbit from
    the critical-curve point at x2_from until x2 reaches x2_to.

    The raw value integrates over chart time; the scaled value multiplies
    by eps^2, the slow-time normalization that makes it comparable to the
    slow divergence integral between the two fibers.  Raises when the
    segment does not track the critical curve.
    """
    if budget is None:
        budget = 80.0 / max(chart.eps, 1e-3) ** 2
    if track_tol is None:
        track_tol = math.sqrt(max(chart.eps, 1e-12))
    h = 1e-6

    def div(x2, y):
        f1p = chart.rhs(0.0, (x2 + h, y))[0]
        f1m = chart.rhs(0.0, (x2 - h, y))[0]
        f2p = chart.rhs(0.0, (x2, y + h))[1]
        f2m = chart.rhs(0.0, (x2, y - h))[1]
        return (f1p - f1m) / (2 * h) + (f2p - f2m) / (2 * h)

    def rhs(t, v):
        dx2, dy = chart.rhs(t, (v[0], v[1]))
        return (dx2, dy, div(v[0], v[1]))

    start = (x2_from, crit.F(x2_from), 0.0)
    direction = -1 if x2_to < x2_from else +1
    c = integrate_until_crossing(rhs, start, budget, coord=0, level=x2_to,
                                 direction=direction, t_min=0.0,
                                 chunk=budget / 4, rtol=rtol, atol=atol)
    if c is None:
        raise NotACanardSegment(
            f"orbit never reached x2 = {x2_to} within the budget")
    sol = _integrate(rhs, start, (0.0, c.t), rtol=rtol, atol=atol)
    ts = np.linspace(0.0, c.t, 200)
    off = max(abs(sol.sol(t)[1] - crit.F(sol.sol(t)[0])) for t in ts)
    if off > track_tol:
        raise NotACanardSegment(
            f"segment left the critical curve (max distance {off:.3g} > "
            f"{track_tol:.3g})")
    raw = float(c.state[2])
    return DivergenceResult(raw, chart.eps ** 2 * raw, float(c.t), float(off))


# --- convergence of located cycles toward the singular predictions -------------

@dataclass
class ConvergenceRow:
    eps: float
    alpha_tilde: float
    cycles: list[CycleRecord]
    distances: list[float]
    flag: str = ""


def convergence_study(comb, phi, eps_list: Sequence[float],
                      section_fn: Callable[[float], SectionSpec],
                      predictions: Sequence[float],
                      crit: CriticalData | None = None,
                      pair_step_fn: Callable[[float], float] | None = None,
                      scan_n: int = 40, mode: str = "eps-power-2"
                      ) -> list[ConvergenceRow]:
    """For each eps: tune the breaking parameter, refine to the cycle-pair
    regime, locate cycles, and record distances to the predicted section
    heights.  Rows that fail to produce cycles are flagged, not fatal.
    """
    if len(eps_list) < 2:
        raise InputError("need at least two eps values to study convergence")
    rows: list[ConvergenceRow] = []
    for eps in eps_list:
        section = section_fn(eps)
        try:
            tuned = tune_alpha(comb, phi, eps, crit=crit)
            step = pair_step_fn(eps) if pair_step_fn else max(
                1e-7, abs(tuned.alpha_tilde) * 1e-3)
            at, recs = refine_alpha_for_pair(comb, phi, eps, section,
                                             tuned.alpha_tilde, step,
                                             mode=mode, scan_n=scan_n)
        except (NoConnectionInRange, NoReturn) as exc:
            rows.append(ConvergenceRow(eps, math.nan, [], [], flag=str(exc)))
            continue
        dists = [min(abs(r.y - p) for p in predictions) for r in recs]
        rows.append(ConvergenceRow(eps, at, recs, dists))
    return rows
