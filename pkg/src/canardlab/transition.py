"""Transition functions and the monotone phi_k factory.

A transition function is a smooth map that is -1 left of -1 and +1 right
of +1.  The factory below blends a polynomial perturbation of the identity
into the reference function psi so that the resulting monotone transition
function plants k prescribed simple zeros into the slow divergence
integral of the regularized system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidP, NonMonotoneBlend, InputError

# Derivative evaluations closer than this to the clamp boundary underflow
# (sech^2 decays like exp(-2x/(1-x^2))); certification grids stay inside.
CLAMP_INSET = 5.0e-3


def _sech2(u: float) -> float:
    # 4 e^{-2|u|} / (1 + e^{-2|u|})^2, stable for large |u|
    a = math.exp(-2.0 * abs(u))
    return 4.0 * a / (1.0 + a) ** 2


def psi(x: float) -> float:
    """Reference monotone transition function tanh(x/(1-x^2)), clamped."""
    if x <= -1.0:
        return -1.0
    if x >= 1.0:
        return 1.0
    return math.tanh(x / (1.0 - x * x))


def psi_d1(x: float) -> float:
    if abs(x) >= 1.0:
        return 0.0
    q = 1.0 - x * x
    u = x / q
    return _sech2(u) * (1.0 + x * x) / (q * q)


def psi_d2(x: float) -> float:
    if abs(x) >= 1.0:
        return 0.0
    q = 1.0 - x * x
    u = x / q
    du = (1.0 + x * x) / (q * q)
    ddu = 2.0 * x * (3.0 + x * x) / (q * q * q)
    return _sech2(u) * (ddu - 2.0 * math.tanh(u) * du * du)


def bump(x: float, nu: float) -> float:
    """Smooth even plateau: 1 on [-nu, nu], 0 outside (-2 nu, 2 nu)."""
    if nu <= 0:
        raise InputError("bump radius nu must be positive")
    t = abs(x) / nu
    if t <= 1.0:
        return 1.0
    if t >= 2.0:
        return 0.0
    u = t - 1.0
    return math.exp(1.0 - 1.0 / (1.0 - u * u))


def bump_d1(x: float, nu: float) -> float:
    t = abs(x) / nu
    if t <= 1.0 or t >= 2.0:
        return 0.0
    u = t - 1.0
    q = 1.0 - u * u
    g = math.exp(1.0 - 1.0 / q)
    return g * (-2.0 * u / (q * q)) * math.copysign(1.0, x) / nu


def bump_d2(x: float, nu: float) -> float:
    t = abs(x) / nu
    if t <= 1.0 or t >= 2.0:
        return 0.0
    u = t - 1.0
    q = 1.0 - u * u
    g = math.exp(1.0 - 1.0 / q)
    dE = -2.0 * u / (q * q)
    ddE = -2.0 * (1.0 + 3.0 * u * u) / (q * q * q)
    return g * (dE * dE + ddE) / (nu * nu)


# --- odd polynomial P and its even companion phi_e --------------------------

def build_P(zeros: Sequence[float]) -> dict[int, Fraction]:
    """Coefficients of P(x) = x^3 (x^2 - a_1^2) ... (x^2 - a_k^2).

    Exact rational arithmetic; keys are degrees, values coefficients.
    """
    coeffs = {3: Fraction(1)}
    for a in zeros:
        a2 = Fraction(a) ** 2
        nxt: dict[int, Fraction] = {}
        for d, c in coeffs.items():
            nxt[d + 2] = nxt.get(d + 2, Fraction(0)) + c
            nxt[d] = nxt.get(d, Fraction(0)) - c * a2
        coeffs = {d: c for d, c in nxt.items() if c != 0}
    return coeffs


def build_phi_e(p_coeffs: dict[int, Fraction]) -> dict[int, Fraction]:
    """Even polynomial with x phi_e'(x) integrating back to P exactly.

    For P = sum c_j x^{2j+1} (j >= 1) the rule is
    phi_e = sum c_j (2j+1)/(2j) x^{2j}.
    """
    out: dict[int, Fraction] = {}
    for d, c in p_coeffs.items():
        if c == 0:
            continue
        if d % 2 == 0 or d < 3:
            raise InvalidP(f"P must be odd with lowest degree 3; found degree {d}")
        j = (d - 1) // 2
        out[2 * j] = Fraction(c) * Fraction(2 * j + 1, 2 * j)
    return out


def poly_eval(coeffs: dict[int, Fraction], x: float) -> float:
    return float(sum(float(c) * x ** d for d, c in coeffs.items()))


def poly_derivative(coeffs: dict[int, Fraction]) -> dict[int, Fraction]:
    return {d - 1: c * d for d, c in coeffs.items() if d >= 1 and c != 0}


# --- transition function objects --------------------------------------------

@dataclass
class TransitionFunction:
    """Smooth map clamped to sign(x) outside [-1, 1], with two derivatives.

    The callables describe the core on (-1, 1); clamping is applied here.
    `odd` marks exact odd symmetry (used by symmetry-null tests).
    """

    f: Callable[[float], float]
    d1: Callable[[float], float]
    d2: Callable[[float], float]
    name: str = "custom"
    odd: bool = False
    meta: dict = field(default_factory=dict)

    def __call__(self, x: float) -> float:
        if x <= -1.0:
            return -1.0
        if x >= 1.0:
            return 1.0
        return self.f(x)

    def deriv(self, x: float, order: int = 1) -> float:
        if abs(x) >= 1.0:
            return 0.0
        if order == 1:
            return self.d1(x)
        if order == 2:
            return self.d2(x)
        raise InputError(f"derivative order {order} not supported")


def psi_function() -> TransitionFunction:
    return TransitionFunction(psi, psi_d1, psi_d2, name="psi", odd=True)


@dataclass
class PhiKSpec:
    """Recipe for a monotone transition function with k planted zeros.

    zeros: 0 < a_1 < ... < a_k, all below the plateau radius nu < 1/2;
    delta scales the even-polynomial perturbation of the identity core.
    """

    zeros: tuple[float, ...]
    delta: float = 0.01
    nu: float = 0.1

    def __post_init__(self):
        z = tuple(float(a) for a in self.zeros)
        object.__setattr__(self, "zeros", z)
        if any(a <= 0 for a in z):
            raise InputError("all planted zeros must be positive")
        if list(z) != sorted(z) or len(set(z)) != len(z):
            raise InputError("zeros must be strictly increasing")
        if not 0.0 < self.nu < 0.5:
            raise InputError("nu must lie in (0, 1/2)")
        if z and z[-1] >= self.nu:
            raise InputError("zeros must lie inside (0, nu)")
        if self.delta < 0:
            raise InputError("delta must be >= 0")

    @property
    def k(self) -> int:
        return len(self.zeros)

    def p_coeffs(self) -> dict[int, Fraction]:
        return build_P(self.zeros)

    def phi_e_coeffs(self) -> dict[int, Fraction]:
        return build_phi_e(self.p_coeffs())

    def to_dict(self) -> dict:
        return {"zeros": list(self.zeros), "delta": self.delta, "nu": self.nu}

    @classmethod
    def from_dict(cls, d: dict) -> "PhiKSpec":
        return cls(tuple(d.get("zeros", ())), float(d.get("delta", 0.01)),
                   float(d.get("nu", 0.1)))


def default_spec(k: int, delta: float = 0.01, nu: float = 0.1) -> PhiKSpec:
    """Zeros equally spaced in (0.02, 0.08) unless the caller overrides."""
    if k < 0:
        raise InputError("k must be >= 0")
    zeros = tuple(np.linspace(0.02, 0.08, k + 2)[1:-1]) if k > 0 else ()
    return PhiKSpec(zeros, delta, nu)


def build_phi_k(spec: PhiKSpec, certify: bool = True) -> TransitionFunction:
    """Blend x + delta*phi_e into psi across the bump annulus.

    Equals the perturbed identity core on [-nu, nu] and psi outside
    [-2 nu, 2 nu].  Raises NonMonotoneBlend when the numerical derivative
    scan finds a non-positive minimum (shrink delta).
    """
    nu, delta = spec.nu, spec.delta
    ec = spec.phi_e_coeffs()
    ec1 = poly_derivative(ec)
    ec2 = poly_derivative(ec1)

    def core(x):
        return x + delta * poly_eval(ec, x)

    def core_d1(x):
        return 1.0 + delta * poly_eval(ec1, x)

    def core_d2(x):
        return delta * poly_eval(ec2, x)

    def f(x):
        b = bump(x, nu)
        if b == 1.0:
            return core(x)
        if b == 0.0:
            return psi(x)
        return core(x) * b + psi(x) * (1.0 - b)

    def d1(x):
        b = bump(x, nu)
        if b == 1.0:
            return core_d1(x)
        if b == 0.0:
            return psi_d1(x)
        db = bump_d1(x, nu)
        return (core_d1(x) * b + core(x) * db
                + psi_d1(x) * (1.0 - b) - psi(x) * db)

    def d2(x):
        b = bump(x, nu)
        if b == 1.0:
            return core_d2(x)
        if b == 0.0:
            return psi_d2(x)
        db, ddb = bump_d1(x, nu), bump_d2(x, nu)
        return (core_d2(x) * b + 2.0 * core_d1(x) * db + core(x) * ddb
                + psi_d2(x) * (1.0 - b) - 2.0 * psi_d1(x) * db - psi(x) * ddb)

    phi = TransitionFunction(
        f, d1, d2, name=f"phi_k{spec.k}", odd=(spec.delta == 0.0),
        meta={"spec": spec.to_dict()},
    )
    if certify:
        # core positivity inside the plateau is required by the spec'd
        # invariant; the blend annulus is where monotonicity can break
        rep = check_monotone(phi, (-1.0, 1.0), 2000)
        if not rep.monotone:
            raise NonMonotoneBlend(
                f"min phi' = {rep.min_derivative:.3e} at x = {rep.argmin:.4f};"
                " shrink delta")
    return phi


@dataclass
class MonotoneReport:
    min_derivative: float
    argmin: float
    monotone: bool


def check_monotone(phi: TransitionFunction, interval: tuple[float, float],
                   grid_n: int = 2000) -> MonotoneReport:
    """Grid minimum of phi' plus one refinement pass around the minimizer.

    Points are kept CLAMP_INSET away from the clamp boundary, where the
    derivative of any transition function vanishes identically (and its
    tail underflows in double precision).
    """
    if grid_n < 1000:
        raise InputError("grid_n must be >= 1000")
    lo = max(interval[0], -1.0 + CLAMP_INSET)
    hi = min(interval[1], 1.0 - CLAMP_INSET)
    xs = np.linspace(lo, hi, grid_n)
    ds = np.array([phi.deriv(x) for x in xs])
    i = int(np.argmin(ds))
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, grid_n - 1)]
    xr = np.linspace(a, b, 64)
    dr = np.array([phi.deriv(x) for x in xr])
    j = int(np.argmin(dr))
    if dr[j] < ds[i]:
        mn, am = float(dr[j]), float(xr[j])
    else:
        mn, am = float(ds[i]), float(xs[i])
    return MonotoneReport(mn, am, mn > 0.0)
