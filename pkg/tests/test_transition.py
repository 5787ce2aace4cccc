import math
from fractions import Fraction

import numpy as np
import pytest

from canardlab.errors import InputError, InvalidP, NonMonotoneBlend
from canardlab.transition import (
    PhiKSpec,
    bump,
    bump_d1,
    build_P,
    build_phi_e,
    build_phi_k,
    check_monotone,
    default_spec,
    poly_derivative,
    poly_eval,
    psi,
    psi_d1,
    psi_function,
)


def test_psi_basic_values():
    assert psi(0.0) == 0.0
    assert psi(1.0) == 1.0
    assert psi(1.5) == 1.0
    assert psi(-1.0) == -1.0
    assert math.isclose(psi(0.5), math.tanh(2.0 / 3.0), rel_tol=1e-15)
    assert math.isclose(psi_d1(0.0), 1.0, rel_tol=1e-15)


def test_psi_odd_and_increasing():
    xs = np.linspace(-0.99, 0.99, 501)
    for x in xs:
        assert psi(-x) == -psi(x)
    rep = check_monotone(psi_function(), (-0.99, 0.99), 1000)
    assert rep.monotone and rep.min_derivative > 0


def test_bump_plateau_and_support():
    assert bump(0.0, 0.1) == 1.0
    assert bump(0.05, 0.1) == 1.0
    assert bump(0.25, 0.1) == 0.0
    v = bump(0.15, 0.1)
    # value of the chosen mollifier at 1.5*nu: exp(1 - 1/(1 - 0.25))
    assert math.isclose(v, math.exp(-1.0 / 3.0), rel_tol=1e-15)
    assert 0.0 < v < 1.0
    assert bump(-0.15, 0.1) == v


def test_bump_derivative_matches_fd():
    nu = 0.1
    for x in [0.11, 0.13, 0.17, 0.19, -0.12, -0.18]:
        h = 1e-7
        fd = (bump(x + h, nu) - bump(x - h, nu)) / (2 * h)
        assert math.isclose(bump_d1(x, nu), fd, rel_tol=1e-5, abs_tol=1e-8)


def test_build_P_k1():
    pc = build_P([Fraction(1, 20)])  # a1 = 0.05 as an exact rational
    assert pc[5] == 1
    assert pc[3] == -Fraction(1, 400)
    ec = build_phi_e(pc)
    assert ec[4] == Fraction(5, 4)
    assert ec[2] == Fraction(3, 2) * -Fraction(1, 400)
    # float input uses the exact binary rational of the float
    pcf = build_P([0.05])
    assert pcf[5] == 1
    assert math.isclose(float(pcf[3]), -0.0025, rel_tol=1e-15)


def test_phi_e_single_term_rule():
    assert build_phi_e({3: Fraction(1)}) == {2: Fraction(3, 2)}


def test_phi_e_rejects_bad_P():
    with pytest.raises(InvalidP):
        build_phi_e({1: Fraction(1), 3: Fraction(1)})
    with pytest.raises(InvalidP):
        build_phi_e({2: Fraction(1)})


@pytest.mark.parametrize("zeros", [(0.05,), (0.04, 0.06), (0.035, 0.05, 0.065)])
def test_antiderivative_identity_exact(zeros):
    # int_0^x s phi_e'(s) ds == P(x) coefficient-by-coefficient
    pc = build_P(zeros)
    ec = build_phi_e(pc)
    ec1 = poly_derivative(ec)
    integ = {d + 2: c / (d + 2) for d, c in ec1.items()}  # int s * phi_e'
    assert integ == pc


def test_phi_e_parity_structure():
    pc = build_P((0.04, 0.07))
    assert all(d % 2 == 1 for d in pc)
    ec = build_phi_e(pc)
    assert all(d % 2 == 0 for d in ec)
    # P(a_i) = 0 exactly in rational arithmetic
    for a in (0.04, 0.07):
        assert sum(c * Fraction(a) ** d for d, c in pc.items()) == 0


def test_spec_validation():
    with pytest.raises(InputError):
        PhiKSpec((0.05, 0.04))
    with pytest.raises(InputError):
        PhiKSpec((0.2,), nu=0.1)
    with pytest.raises(InputError):
        PhiKSpec((-0.05,))
    with pytest.raises(InputError):
        PhiKSpec((0.05,), nu=0.6)


def test_phi_k_construction_values():
    spec = PhiKSpec((0.05,), delta=0.01, nu=0.1)
    phi = build_phi_k(spec)
    assert phi(0.0) == 0.0
    assert phi.deriv(0.0) == 1.0
    # plateau region: phi == x + delta*phi_e(x)
    fe = poly_eval(spec.phi_e_coeffs(), 0.05)
    assert math.isclose(phi(0.05), 0.05 + 0.01 * fe, rel_tol=1e-15)
    assert phi(1.0) == 1.0 and phi(-1.0) == -1.0


def test_phi_k_blend_agreement():
    spec = PhiKSpec((0.05,), delta=0.01, nu=0.1)
    phi = build_phi_k(spec)
    ec = spec.phi_e_coeffs()
    for x in np.linspace(-0.1, 0.1, 41):
        assert abs(phi(x) - (x + 0.01 * poly_eval(ec, x))) < 1e-14
    for x in np.concatenate([np.linspace(0.2, 0.999, 41),
                             np.linspace(-0.999, -0.2, 41)]):
        assert abs(phi(x) - psi(x)) < 1e-14


@pytest.mark.parametrize("k", [1, 2, 3])
def test_phi_k_monotone_for_default_specs(k):
    phi = build_phi_k(default_spec(k))
    rep = check_monotone(phi, (-1.0, 1.0), 2000)
    assert rep.monotone


def test_huge_delta_fails_monotonicity():
    spec = PhiKSpec((0.05,), delta=1e6, nu=0.1)
    with pytest.raises(NonMonotoneBlend):
        build_phi_k(spec)
    # the raw core derivative on [-2nu, 2nu] indeed goes negative
    ec1 = poly_derivative(spec.phi_e_coeffs())
    ds = [1 + 1e6 * poly_eval(ec1, x) for x in np.linspace(-0.2, 0.2, 401)]
    assert min(ds) < 0


def test_phi_k_derivative_consistency():
    phi = build_phi_k(PhiKSpec((0.04, 0.07), delta=0.01, nu=0.1))
    xs = np.linspace(-0.95, 0.95, 1000)
    h = 1e-6
    for x in xs:
        fd = (phi(x + h) - phi(x - h)) / (2 * h)
        assert abs(fd - phi.deriv(x)) < 1e-6


def test_phi_k_second_derivative_consistency():
    phi = build_phi_k(PhiKSpec((0.05,), delta=0.01, nu=0.1))
    for x in [0.03, 0.12, 0.15, 0.3, 0.7, -0.16, -0.5]:
        h = 1e-5
        fd = (phi.deriv(x + h) - phi.deriv(x - h)) / (2 * h)
        assert abs(fd - phi.deriv(x, 2)) < 1e-4 * max(1.0, abs(phi.deriv(x, 2)))


def test_k0_degenerates_to_identity_blend():
    phi = build_phi_k(PhiKSpec((), delta=0.0, nu=0.1))
    assert phi.odd
    assert phi(0.05) == 0.05
    assert phi(0.5) == psi(0.5)
    assert phi.deriv(0.05) == 1.0
