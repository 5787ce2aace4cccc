import math

import numpy as np
import pytest

from canardlab.combinations import center_combination, ii2_combination
from canardlab.errors import (
    NoReturn,
    NotSliding,
    UnsupportedOrder,
)
from canardlab.psvf import (
    PiecewiseSystem,
    PlanarField,
    classify_fold_fold,
    classify_tangencies,
    filippov_sliding,
    first_return,
    first_return_expansion,
    half_return_minus,
    half_return_plus,
    lie_derivative,
    region_partition,
)


def center_system(alpha=0.0):
    return PiecewiseSystem.from_combination(center_combination(), alpha)


def ii2_system(alpha=0.0):
    return PiecewiseSystem.from_combination(ii2_combination(), alpha)


def test_combination_induces_expected_fields():
    sys0 = ii2_system(alpha=0.3)
    # X = (y - 1 - alpha, alpha - 1 - x), Y = (y - 1 - x, alpha + 1 - x)
    assert np.allclose(sys0.plus.eval(0.2, 1.5), (1.5 - 1 - 0.3, 0.3 - 1 - 0.2))
    assert np.allclose(sys0.minus.eval(-0.2, 1.5), (1.5 - 1 + 0.2, 0.3 + 1 + 0.2))
    c = center_system(alpha=0.1)
    assert np.allclose(c.plus.eval(0.7, 2.0), (1.0, 0.1 - 1.0))
    assert np.allclose(c.minus.eval(-0.7, 2.0), (1.0, 0.1 + 1.0))


def test_lie_derivative_order1_is_x_component():
    sys0 = center_system()
    for y in [0.0, 0.7, 1.0, 2.3]:
        assert lie_derivative(sys0.plus, 1, y) == pytest.approx(y - 1.0, abs=0)


def test_lie_derivative_zero_x_component():
    fld = PlanarField(lambda x, y: (0.0, 1.0 + x))
    assert lie_derivative(fld, 1, 0.4) == 0.0


def test_lie_derivative_order2_ii2():
    sys0 = ii2_system(alpha=0.0)
    # X2F = alpha - 1 - x at (0, 1)
    assert lie_derivative(sys0.plus, 2, 1.0) == pytest.approx(-1.0, rel=1e-12)


def test_lie_derivative_order2_fd_fallback():
    fld = PlanarField(lambda x, y: (y - 1.0 - x, 1.0 - x))  # no jac supplied
    ref = PlanarField(lambda x, y: (y - 1.0 - x, 1.0 - x),
                      jac=lambda x, y: np.array([[-1.0, 1.0], [-1.0, 0.0]]))
    for y in [0.3, 1.0, 1.7]:
        assert lie_derivative(fld, 2, y) == pytest.approx(
            lie_derivative(ref, 2, y), rel=1e-8, abs=1e-10)


def test_lie_derivative_rejects_order3():
    with pytest.raises(UnsupportedOrder):
        lie_derivative(center_system().plus, 3, 1.0)


def test_classify_tangencies_ii2():
    reps = classify_tangencies(ii2_system(alpha=0.1), (0.5, 1.5))
    got = {(r.side, round(r.y, 10), r.kind) for r in reps}
    assert ("plus", 1.1, "invisible-fold") in got
    assert ("minus", 1.0, "invisible-fold") in got
    assert len(reps) == 2


def test_classify_tangencies_transversal_empty():
    sys0 = PiecewiseSystem(
        PlanarField(lambda x, y: (1.0, 0.0)),
        PlanarField(lambda x, y: (1.0, 0.0)))
    assert classify_tangencies(sys0, (-1.0, 1.0)) == []


def test_classify_tangencies_center_both_invisible():
    reps = classify_tangencies(center_system(), (0.5, 1.5))
    assert len(reps) == 2
    for r in reps:
        assert r.y == pytest.approx(1.0, abs=1e-10)
        assert r.kind == "invisible-fold"
    # sign check: X2F = -1 < 0 and Y2F = +1 > 0
    signs = {r.side: np.sign(r.second_lie) for r in reps}
    assert signs == {"plus": -1.0, "minus": 1.0}


def test_region_partition_ii2():
    part = region_partition(ii2_system(alpha=0.2), (0.5, 1.5))
    assert len(part.sliding) == 1
    lo, hi = part.sliding[0]
    assert lo == pytest.approx(1.0, abs=1e-9)
    assert hi == pytest.approx(1.2, abs=1e-9)


def test_region_partition_center_no_sliding():
    part = region_partition(center_system(), (0.5, 1.5))
    assert part.sliding == []
    assert len(part.sewing) == 2


def test_region_partition_below_tangencies_all_sewing():
    part = region_partition(center_system(), (-0.5, 0.5))
    assert part.sliding == [] and len(part.sewing) == 1


def test_partition_sign_invariant():
    sys0 = ii2_system(alpha=0.2)
    part = region_partition(sys0, (0.5, 1.5))
    for (a, b) in part.sliding:
        for y in np.linspace(a + 1e-6, b - 1e-6, 7):
            assert (lie_derivative(sys0.plus, 1, y)
                    * lie_derivative(sys0.minus, 1, y)) < 0
    for (a, b) in part.sewing:
        for y in np.linspace(a + 1e-6, b - 1e-6, 7):
            assert (lie_derivative(sys0.plus, 1, y)
                    * lie_derivative(sys0.minus, 1, y)) > 0


@pytest.mark.parametrize("alpha", [0.1, 0.2, -0.15])
def test_filippov_sliding_ii2(alpha):
    sys0 = ii2_system(alpha)
    lo, hi = sorted((1.0, 1.0 + alpha))
    y = 0.5 * (lo + hi)
    # paper's displayed numerator over the Filippov denominator YF - XF = alpha
    expected = (alpha**2 + alpha - 2 * y + 2) / alpha
    assert filippov_sliding(sys0, y) == pytest.approx(expected, rel=1e-10)


def test_filippov_equilibrium_and_stability():
    alpha = 0.2
    sys0 = ii2_system(alpha)
    y_eq = (alpha**2 + alpha + 2) / 2
    assert filippov_sliding(sys0, y_eq) == pytest.approx(0.0, abs=1e-12)
    # attracting for alpha > 0: derivative in y is -2/alpha < 0
    h = 1e-6
    d = (filippov_sliding(sys0, y_eq + h) - filippov_sliding(sys0, y_eq - h)) / (2 * h)
    assert d == pytest.approx(-2 / alpha, rel=1e-6)
    sys1 = ii2_system(-0.2)
    y_eq1 = ((-0.2) ** 2 + (-0.2) + 2) / 2
    d1 = (filippov_sliding(sys1, y_eq1 + h) - filippov_sliding(sys1, y_eq1 - h)) / (2 * h)
    assert d1 > 0  # repelling for alpha < 0


def test_filippov_symmetric_reduction():
    # XF = -YF and matching second components: sliding field equals X2
    sys0 = PiecewiseSystem(
        PlanarField(lambda x, y: (-y, 3.0 + y)),
        PlanarField(lambda x, y: (y, 3.0 + y)))
    assert filippov_sliding(sys0, 0.5) == pytest.approx(3.5, rel=1e-12)


def test_filippov_outside_sliding_raises():
    with pytest.raises(NotSliding):
        filippov_sliding(ii2_system(0.2), 1.5)


def test_half_return_center_exact():
    sys0 = center_system()
    for y in np.linspace(1.1, 1.9, 9):
        assert half_return_plus(sys0, y) == pytest.approx(2.0 - y, abs=1e-8)
        assert half_return_minus(sys0, y) == pytest.approx(2.0 - y, abs=1e-8)


def test_half_return_involution():
    # the ii2 plus field is a genuine linear center: its half map is an
    # involution on both sides of the fold
    sys0 = ii2_system()
    for y in np.linspace(1.05, 1.95, 7):
        z = half_return_plus(sys0, y)
        assert abs(half_return_plus(sys0, z) - y) < 1e-8


def test_half_return_ii2_plus_exact():
    sys0 = ii2_system()
    for y in np.linspace(1.1, 1.9, 9):
        assert half_return_plus(sys0, y) == pytest.approx(2.0 - y, abs=1e-8)


def test_half_return_at_tangency_grazing():
    with pytest.raises(NoReturn):
        half_return_plus(center_system(), 1.0, budget=5.0)


def test_first_return_center_identity():
    sys0 = center_system()
    for y in [1.2, 1.5, 1.8]:
        assert first_return(sys0, y) == pytest.approx(y, abs=1e-8)


def test_first_return_smooth_field_identity():
    # plus == minus: same flow forward/backward composes to the identity
    fld = lambda x, y: (y - 1.0, -0.5 - 0.3 * x)
    sys0 = PiecewiseSystem(PlanarField(fld), PlanarField(fld))
    assert first_return(sys0, 1.6) == pytest.approx(1.6, abs=1e-8)


def test_first_return_ii2_quadratic_coefficient():
    # true flow value is -2/3 (the -2 in the source is an order-2
    # truncation artifact; see decisions ledger)
    coef = first_return_expansion(ii2_system(), 1.0)
    assert coef[2] == pytest.approx(-2.0 / 3.0, rel=0.02)


def test_first_return_monotone_in_window():
    sys0 = ii2_system()
    ys = np.linspace(1.05, 1.6, 12)
    vals = [first_return(sys0, y) for y in ys]
    assert all(b > a for a, b in zip(vals[:-1], vals[1:]))


def test_classify_fold_fold_ii2():
    rep = classify_fold_fold(ii2_system(), 1.0)
    assert rep.visibility == "II"
    assert rep.subtype == "attracting-focus"
    assert rep.quadratic_coefficient < 0


def test_classify_fold_fold_center_undetermined():
    rep = classify_fold_fold(center_system(), 1.0)
    assert rep.visibility == "II"
    assert rep.subtype == "undetermined"
    assert abs(rep.quadratic_coefficient) < 1e-3


def test_classify_fold_fold_vv():
    # both folds visible: X2F > 0 on the plus side, Y2F < 0 on the minus side
    sys0 = PiecewiseSystem(
        PlanarField(lambda x, y: (y - 1.0, 1.0 + x), jac=lambda x, y: np.array([[0.0, 1.0], [1.0, 0.0]])),
        PlanarField(lambda x, y: (y - 1.0, -1.0 - x), jac=lambda x, y: np.array([[0.0, 1.0], [-1.0, 0.0]])))
    rep = classify_fold_fold(sys0, 1.0)
    assert rep.visibility == "VV"


def test_fold_fold_stability_under_alpha():
    for alpha in [-0.05, -0.02, 0.02, 0.05]:
        sys0 = ii2_system(alpha)
        reps = classify_tangencies(sys0, (0.5, 1.5))
        kinds = {r.kind for r in reps}
        assert kinds == {"invisible-fold"}
