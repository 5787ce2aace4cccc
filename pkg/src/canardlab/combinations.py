"""Continuous combinations interpolating the two smooth half-plane fields.

The first component is y - lam^2 + A(lam, x), the second alpha - lam +
B(lam, x, y).  A and B carry the structured higher-order terms

    A = sum_{i=0..3} lam^{3-i} x^i A_i(lam, x)
    B = sum_{j=0..2} lam^{2-j} x^j B_j(lam, x)  +  y B_3(lam, x, y)

so that evaluating at lam = +1 / -1 recovers the one-sided fields of the
piecewise-smooth system.  Term factors are sparse polynomials over the
variables (lam, x, y, alpha, mu) with exact rational coefficients, or
arbitrary callables.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .errors import InputError

VARS = ("lam", "x", "y", "alpha", "mu")


class Poly:
    """Sparse polynomial in (lam, x, y, alpha, mu) with Fraction coefficients.

    Terms map exponent tuples to coefficients.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: dict[tuple[int, ...], Fraction] | None = None):
        self.terms = {e: Fraction(c) for e, c in (terms or {}).items() if c != 0}

    @classmethod
    def const(cls, c) -> "Poly":
        return cls({(0, 0, 0, 0, 0): Fraction(c)})

    @classmethod
    def var(cls, name: str) -> "Poly":
        e = [0] * 5
        e[VARS.index(name)] = 1
        return cls({tuple(e): Fraction(1)})

    @classmethod
    def monomial(cls, c, **powers) -> "Poly":
        e = [0] * 5
        for name, p in powers.items():
            e[VARS.index(name)] = int(p)
        return cls({tuple(e): Fraction(c)})

    def __add__(self, other):
        other = other if isinstance(other, Poly) else Poly.const(other)
        t = dict(self.terms)
        for e, c in other.terms.items():
            t[e] = t.get(e, Fraction(0)) + c
        return Poly(t)

    __radd__ = __add__

    def __neg__(self):
        return Poly({e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        other = other if isinstance(other, Poly) else Poly.const(other)
        return self + (-other)

    def __rsub__(self, other):
        return Poly.const(other) + (-self)

    def __mul__(self, other):
        other = other if isinstance(other, Poly) else Poly.const(other)
        t: dict[tuple[int, ...], Fraction] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                t[e] = t.get(e, Fraction(0)) + c1 * c2
        return Poly(t)

    __rmul__ = __mul__

    def diff(self, name: str) -> "Poly":
        i = VARS.index(name)
        t: dict[tuple[int, ...], Fraction] = {}
        for e, c in self.terms.items():
            if e[i] > 0:
                ne = list(e)
                ne[i] -= 1
                t[tuple(ne)] = t.get(tuple(ne), Fraction(0)) + c * e[i]
        return Poly(t)

    def __call__(self, lam=0.0, x=0.0, y=0.0, alpha=0.0, mu=0.0) -> float:
        vals = (lam, x, y, alpha, mu)
        acc = 0.0
        for e, c in self.terms.items():
            m = float(c)
            for v, p in zip(vals, e):
                if p:
                    m *= v ** p
            acc += m
        return acc

    def is_zero(self) -> bool:
        return not self.terms

    def to_json(self) -> list:
        return [{"c": str(c), **{VARS[i]: e[i] for i in range(5) if e[i]}}
                for e, c in sorted(self.terms.items())]

    @classmethod
    def from_json(cls, data: Sequence[dict]) -> "Poly":
        terms = {}
        for mono in data:
            e = [0] * 5
            for k, v in mono.items():
                if k == "c":
                    continue
                if k not in VARS:
                    raise InputError(f"unknown polynomial variable {k!r}")
                e[VARS.index(k)] = int(v)
            terms[tuple(e)] = Fraction(str(mono.get("c", "1")))
        return cls(terms)


ZERO = Poly()


def _as_poly_or_callable(obj):
    if obj is None:
        return ZERO
    if isinstance(obj, Poly) or callable(obj):
        return obj
    if isinstance(obj, (int, float, Fraction, str)):
        return Poly.const(Fraction(str(obj)))
    if isinstance(obj, (list, tuple)):
        return Poly.from_json(obj)
    raise InputError(f"cannot interpret {obj!r} as a polynomial term factor")


@dataclass
class ContinuousCombination:
    """The lambda-family with structured A, B terms and named parameters.

    a_terms: the four factors A_0..A_3; b_terms: B_0..B_3.  mu is the
    extra fixed parameter; the breaking parameter alpha is supplied per
    evaluation (alpha = eps * alpha_tilde in regularizations).
    """

    a_terms: tuple = (ZERO, ZERO, ZERO, ZERO)
    b_terms: tuple = (ZERO, ZERO, ZERO, ZERO)
    mu: float = 0.0
    name: str = "custom"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.a_terms) != 4 or len(self.b_terms) != 4:
            raise InputError("a_terms and b_terms must each have 4 entries")
        object.__setattr__(self, "a_terms",
                           tuple(_as_poly_or_callable(t) for t in self.a_terms))
        object.__setattr__(self, "b_terms",
                           tuple(_as_poly_or_callable(t) for t in self.b_terms))

    # -- assembled higher-order terms ---------------------------------------

    def A(self, lam: float, x: float, alpha: float = 0.0) -> float:
        acc = 0.0
        for i, t in enumerate(self.a_terms):
            if isinstance(t, Poly):
                if t.is_zero():
                    continue
                v = t(lam=lam, x=x, alpha=alpha, mu=self.mu)
            else:
                v = t(lam, x, alpha, self.mu)
            acc += lam ** (3 - i) * x ** i * v
        return acc

    def A_lam(self, lam: float, x: float, alpha: float = 0.0) -> float:
        """Partial of A with respect to lam (exact for polynomial terms)."""
        acc = 0.0
        for i, t in enumerate(self.a_terms):
            if isinstance(t, Poly):
                if t.is_zero():
                    continue
                v = t(lam=lam, x=x, alpha=alpha, mu=self.mu)
                dv = t.diff("lam")(lam=lam, x=x, alpha=alpha, mu=self.mu)
            elif hasattr(t, "d_lam"):
                v = t(lam, x, alpha, self.mu)
                dv = t.d_lam(lam, x, alpha, self.mu)
            else:
                h = 1e-7
                v = t(lam, x, alpha, self.mu)
                dv = (t(lam + h, x, alpha, self.mu) - t(lam - h, x, alpha, self.mu)) / (2 * h)
            p = 3 - i
            acc += (p * lam ** (p - 1) if p else 0.0) * x ** i * v
            acc += lam ** p * x ** i * dv
        return acc

    def A_x(self, lam: float, x: float, alpha: float = 0.0) -> float:
        acc = 0.0
        for i, t in enumerate(self.a_terms):
            if isinstance(t, Poly):
                if t.is_zero():
                    continue
                v = t(lam=lam, x=x, alpha=alpha, mu=self.mu)
                dv = t.diff("x")(lam=lam, x=x, alpha=alpha, mu=self.mu)
            else:
                h = 1e-7
                v = t(lam, x, alpha, self.mu)
                dv = (t(lam, x + h, alpha, self.mu) - t(lam, x - h, alpha, self.mu)) / (2 * h)
            acc += lam ** (3 - i) * (i * x ** (i - 1) if i else 0.0) * v
            acc += lam ** (3 - i) * x ** i * dv
        return acc

    def B(self, lam: float, x: float, y: float, alpha: float = 0.0) -> float:
        acc = 0.0
        for j in range(3):
            t = self.b_terms[j]
            if isinstance(t, Poly):
                if t.is_zero():
                    continue
                v = t(lam=lam, x=x, alpha=alpha, mu=self.mu)
            else:
                v = t(lam, x, alpha, self.mu)
            acc += lam ** (2 - j) * x ** j * v
        t3 = self.b_terms[3]
        if isinstance(t3, Poly):
            if not t3.is_zero():
                acc += y * t3(lam=lam, x=x, y=y, alpha=alpha, mu=self.mu)
        else:
            acc += y * t3(lam, x, y, alpha, self.mu)
        return acc

    def B_x(self, lam: float, x: float, y: float, alpha: float = 0.0) -> float:
        if not all(isinstance(t, Poly) for t in self.b_terms):
            h = 1e-7
            return (self.B(lam, x + h, y, alpha) - self.B(lam, x - h, y, alpha)) / (2 * h)
        acc = 0.0
        for j in range(3):
            t = self.b_terms[j]
            if t.is_zero():
                continue
            v = t(lam=lam, x=x, alpha=alpha, mu=self.mu)
            dv = t.diff("x")(lam=lam, x=x, alpha=alpha, mu=self.mu)
            acc += lam ** (2 - j) * ((j * x ** (j - 1) if j else 0.0) * v + x ** j * dv)
        t3 = self.b_terms[3]
        if not t3.is_zero():
            acc += y * t3.diff("x")(lam=lam, x=x, y=y, alpha=alpha, mu=self.mu)
        return acc

    def B_y(self, lam: float, x: float, y: float, alpha: float = 0.0) -> float:
        t3 = self.b_terms[3]
        if not isinstance(t3, Poly):
            h = 1e-7
            return (self.B(lam, x, y + h, alpha) - self.B(lam, x, y - h, alpha)) / (2 * h)
        if t3.is_zero():
            return 0.0
        return (t3(lam=lam, x=x, y=y, alpha=alpha, mu=self.mu)
                + y * t3.diff("y")(lam=lam, x=x, y=y, alpha=alpha, mu=self.mu))

    # -- the family itself ---------------------------------------------------

    def Z1(self, lam: float, x: float, y: float, alpha: float = 0.0) -> float:
        return y - lam * lam + self.A(lam, x, alpha)

    def Z2(self, lam: float, x: float, y: float, alpha: float = 0.0) -> float:
        return alpha - lam + self.B(lam, x, y, alpha)

    def eval(self, lam, x, y, alpha=0.0):
        return self.Z1(lam, x, y, alpha), self.Z2(lam, x, y, alpha)

    def degree_in_lambda(self) -> int | None:
        """Degree of the family in lam; None when any term is a callable."""
        deg = 2
        for i, t in enumerate(self.a_terms):
            if not isinstance(t, Poly):
                return None
            for e in t.terms:
                deg = max(deg, 3 - i + e[0])
        for j, t in enumerate(self.b_terms[:3]):
            if not isinstance(t, Poly):
                return None
            for e in t.terms:
                deg = max(deg, 2 - j + e[0])
        t3 = self.b_terms[3]
        if not isinstance(t3, Poly):
            return None
        for e in t3.terms:
            deg = max(deg, 1 + e[0])
        return deg

    def to_dict(self) -> dict:
        if not all(isinstance(t, Poly) for t in self.a_terms + self.b_terms):
            raise InputError("only polynomial combinations are serializable")
        return {
            "schema_version": 1,
            "name": self.name,
            "mu": self.mu,
            "A": [t.to_json() for t in self.a_terms],
            "B": [t.to_json() for t in self.b_terms],
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ContinuousCombination":
        if "A" in d or "B" in d:
            a = tuple(Poly.from_json(t) for t in d.get("A", [[], [], [], []]))
            b = tuple(Poly.from_json(t) for t in d.get("B", [[], [], [], []]))
            return cls(a, b, mu=float(d.get("mu", 0.0)),
                       name=d.get("name", "custom"), meta=d.get("meta", {}))
        return builtin_combination(d["name"], **d.get("options", {}))

    @classmethod
    def from_json_file(cls, path) -> "ContinuousCombination":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InputError(f"malformed combination JSON: {exc}") from exc
        return cls.from_dict(data)


# --- builtin examples -------------------------------------------------------

def center_combination() -> ContinuousCombination:
    """Degree-2 family of the piecewise-linear system with a non-smooth center."""
    return ContinuousCombination(name="center")


def ii2_combination(m: int = 4, n: int = 2) -> ContinuousCombination:
    """Degree-m family of the piecewise-linear codimension-1 non-smooth focus.

    m >= 4 and n >= 2 must be even.  The one-sided fields it induces are
    X = (y - 1 - alpha, alpha - 1 - x) and Y = (y - 1 - x, alpha + 1 - x).
    """
    if m < 4 or m % 2 or n < 2 or n % 2:
        raise InputError("need even integers m >= 4 and n >= 2")
    half = Fraction(1, 2)
    # A = -(alpha - x) lam^{m-1}/2 - (alpha + x) lam^m/2 = lam^3 * A_0
    a0 = (Poly.monomial(-half, alpha=1, lam=m - 4) + Poly.monomial(half, x=1, lam=m - 4)
          + Poly.monomial(-half, alpha=1, lam=m - 3) + Poly.monomial(-half, x=1, lam=m - 3))
    # B = -x lam^n = lam^{2-1} x^1 * (-lam^{n-1})
    b1 = Poly.monomial(-1, lam=n - 1)
    return ContinuousCombination((a0, ZERO, ZERO, ZERO), (ZERO, b1, ZERO, ZERO),
                                 name="ii2", meta={"m": m, "n": n})


def dodging_combination(fold_center: float = 0.02, fold_split: float = 0.003,
                        skew2: float = -0.9, skew3: float = -0.5
                        ) -> ContinuousCombination:
    """Asymmetric family whose folds split to heights fold_center +- split/2.

    The first component flattens the critical curve to the low monotone
    profile tanh(lam^2/h)*(h + (split/2) tanh(lam^3/h^{3/2})), keeping the
    stripe-wide monotonicity the dodging geometry needs while holding both
    arms of the slow divergence integral at resolvable size.  Two small
    skew terms in the second component (a constant factor on the lam^2
    term and a y-linear term) rebalance the two branches so the dodging
    predictor acquires a simple interior zero.  Shipped values were fixed
    by a one-dimensional search over skew2 at build time.
    """
    h = float(fold_center)
    s = float(fold_split)
    if not 0 < s < h < 1:
        raise InputError("need 0 < fold_split < fold_center < 1")
    if abs(1.0 + skew2) >= 1.0:
        raise InputError("skew2 must keep 1 + skew2 positive and below 2 "
                         "(fold invisibility)")

    def profile(lam):
        t2 = math.tanh(lam * lam / h)
        t3 = math.tanh(lam ** 3 / h ** 1.5)
        return t2 * (h + 0.5 * s * t3)

    def _sech2(u):
        a = math.exp(-2.0 * abs(u))
        return 4.0 * a / (1.0 + a) ** 2

    def profile_d(lam):
        t2 = math.tanh(lam * lam / h)
        s2 = _sech2(lam * lam / h)
        t3 = math.tanh(lam ** 3 / h ** 1.5)
        s3 = _sech2(lam ** 3 / h ** 1.5)
        return (s2 * (2 * lam / h) * (h + 0.5 * s * t3)
                + t2 * 0.5 * s * s3 * (3 * lam * lam / h ** 1.5))

    def a0(lam, x, alpha, mu):
        # (lam^2 - profile)/lam^3; series guard against cancellation at 0
        if abs(lam) < 1e-2:
            return lam ** 3 / (3 * h * h) - 0.5 * s * lam * lam / h ** 2.5
        return (lam * lam - profile(lam)) / lam ** 3

    def a0_d(lam, x, alpha, mu):
        if abs(lam) < 1e-2:
            return lam * lam / (h * h) - s * lam / h ** 2.5
        return ((2 * lam - profile_d(lam)) / lam ** 3
                - 3 * (lam * lam - profile(lam)) / lam ** 4)

    a0.d_lam = a0_d

    b0 = Poly.const(Fraction(str(skew2)))
    b3 = Poly.const(Fraction(str(skew3)))
    return ContinuousCombination((a0, ZERO, ZERO, ZERO), (b0, ZERO, ZERO, b3),
                                 name="dodging",
                                 meta={"fold_center": h, "fold_split": s,
                                       "skew2": skew2, "skew3": skew3})


BUILTINS: dict[str, Callable[..., ContinuousCombination]] = {
    "center": center_combination,
    "ii2": ii2_combination,
    "dodging": dodging_combination,
}


def builtin_combination(name: str, **options) -> ContinuousCombination:
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise InputError(f"unknown builtin combination {name!r}; "
                         f"choose from {sorted(BUILTINS)}") from None
    return factory(**options)
