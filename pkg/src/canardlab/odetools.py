"""Shared integration machinery: adaptive solve with stiff fallback and
dense-output section-crossing detection.

Crossing detection deliberately avoids the solver's event interface: each
accepted step is subsampled on the dense output, sign changes with the
requested direction are bracketed and refined by root solving, and
near-tangential crossings are flagged instead of silently accepted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import StiffnessFailure

TIME_TOL = 1e-12          # crossing times refined to this tolerance
GRAZING_SPEED = 1e-9      # |dx/dt| below this at a crossing -> grazing flag

DEFAULT_RTOL = 1e-12
DEFAULT_ATOL = 1e-14


@dataclass
class Crossing:
    t: float
    state: tuple[float, ...]
    direction: int
    grazing: bool = False


@dataclass
class Trajectory:
    sol: object                       # scipy OdeResult with dense output
    crossings: list[Crossing] = field(default_factory=list)
    method: str = ""

    @property
    def t_end(self) -> float:
        return float(self.sol.t[-1])

    def state(self, t: float) -> np.ndarray:
        return self.sol.sol(t)


def integrate(rhs: Callable, start: Sequence[float], t_span: tuple[float, float],
              rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
              method: str = "LSODA", fallback: str = "Radau",
              max_step: float = np.inf) -> object:
    """solve_ivp with dense output; retries once with a stiff method.

    Raises StiffnessFailure when both attempts fail to make progress.
    """
    sol = solve_ivp(rhs, t_span, np.asarray(start, dtype=float),
                    dense_output=True, rtol=rtol, atol=atol,
                    method=method, max_step=max_step)
    if sol.success or sol.status == 1:
        sol._method_used = method
        return sol
    if fallback and fallback != method:
        sol = solve_ivp(rhs, t_span, np.asarray(start, dtype=float),
                        dense_output=True, rtol=rtol, atol=atol,
                        method=fallback, max_step=max_step)
        if sol.success or sol.status == 1:
            sol._method_used = fallback
            return sol
    raise StiffnessFailure(f"integration failed: {sol.message}")


def find_crossings(sol, coord: int = 0, level: float = 0.0, direction: int = 0,
                   t_min: float = 0.0, nsub: int = 8,
                   speed: Callable[[np.ndarray], float] | None = None
                   ) -> list[Crossing]:
    """Locate level-crossings of one coordinate on the dense output.

    direction > 0 keeps rising crossings, < 0 falling, 0 both.  A point
    sitting exactly on the level at a subsample edge is not counted as a
    crossing by itself (the trajectory may start on the section).
    """
    out: list[Crossing] = []
    ts = sol.t
    ends = sol.y[coord] - level
    for i in range(len(ts) - 1):
        a, b = ts[i], ts[i + 1]
        if a == b or b <= t_min:
            continue
        e0, e1 = ends[i], ends[i + 1]
        # cheap prefilter on step endpoints: only steps that change sign or
        # run close to the level (relative to their own swing) are scanned
        # at dense-output resolution
        if e0 * e1 > 0 and min(abs(e0), abs(e1)) > 4.0 * abs(e1 - e0):
            continue
        tt = np.linspace(a, b, nsub + 1)
        vv = sol.sol(tt)[coord] - level
        for j in range(nsub):
            v0, v1 = vv[j], vv[j + 1]
            if v0 == 0.0:
                continue
            rising = v0 < 0.0 <= v1
            falling = v0 > 0.0 >= v1
            if not (rising or falling):
                continue
            if direction > 0 and not rising:
                continue
            if direction < 0 and not falling:
                continue
            tr = brentq(lambda t: sol.sol(t)[coord] - level,
                        tt[j], tt[j + 1], xtol=TIME_TOL, rtol=8.9e-16)
            if tr <= t_min:
                continue
            st = tuple(sol.sol(tr))
            grazing = False
            if speed is not None:
                grazing = abs(speed(np.asarray(st))) < GRAZING_SPEED
            out.append(Crossing(float(tr), st, +1 if rising else -1, grazing))
    return out


def integrate_until_crossing(rhs: Callable, start: Sequence[float], budget: float,
                             coord: int = 0, level: float = 0.0, direction: int = 0,
                             accept=None, t_min: float = 1e-9, chunk: float = 4.0,
                             rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                             method: str = "LSODA",
                             speed: Callable | None = None) -> Crossing | None:
    """Integrate in chunks, returning the first accepted section crossing.

    `accept` filters candidate crossings by state; rejected ones are
    skipped (the orbit continues).  Returns None when the budget runs out.
    """
    t0 = 0.0
    state = np.asarray(start, dtype=float)
    while t0 < budget:
        t1 = min(t0 + chunk, budget)
        sol = integrate(lambda t, v: rhs(t, v), state, (t0, t1),
                        rtol=rtol, atol=atol, method=method)
        for c in find_crossings(sol, coord=coord, level=level,
                                direction=direction, t_min=t_min, speed=speed):
            if accept is None or accept(c):
                return c
        t0 = float(sol.t[-1])
        state = sol.y[:, -1]
        if t0 < t1 - 1e-12:    # solver stopped early without success
            break
    return None


def refine_root(f: Callable[[float], float], a: float, b: float,
                xtol: float = 1e-12) -> float:
    """Bracketed root with a few Newton-like secant polish steps."""
    r = brentq(f, a, b, xtol=xtol, rtol=8.9e-16)
    h = max(abs(r) * 1e-8, 1e-10)
    for _ in range(2):
        f0 = f(r)
        d = (f(r + h) - f(r - h)) / (2 * h)
        if d == 0 or not np.isfinite(d):
            break
        step = f0 / d
        if abs(step) > (b - a):
            break
        r2 = r - step
        if a <= r2 <= b:
            r = r2
    return r
