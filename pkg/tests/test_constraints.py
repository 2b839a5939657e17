import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mpc_bounds.constraints import (
    FUNCTION_KINDS,
    ConstraintSet,
    DiscreteDistribution,
    OneSidedSquare,
    PositivePart,
    PowerLaw,
    SmoothedStep,
    Square,
    StepIndicator,
    UnboundedSupportError,
    check_membership_S,
    check_membership_U,
    evaluate,
    function_from_dict,
    left_support_bound,
    support_bound,
)

ALL_FUNCTIONS = [
    PositivePart(),
    Square(),
    OneSidedSquare(),
    StepIndicator(0.5),
    SmoothedStep(1.0, 0.3),
    PowerLaw(1.5),
]


def test_evaluate_examples():
    assert evaluate(PositivePart(), -3.0) == 0.0
    assert evaluate(Square(), 2.0) == 4.0
    assert evaluate(SmoothedStep(1.0, 0.5), 3.0) == 2.0
    assert evaluate(StepIndicator(1.0), 1.0) == 0.0
    assert evaluate(StepIndicator(1.0), 1.0 + 1e-12) == 1.0
    assert evaluate(OneSidedSquare(), -2.0) == 0.0
    assert evaluate(PowerLaw(3.0), -2.0) == 8.0


@pytest.mark.parametrize("f", ALL_FUNCTIONS, ids=lambda f: f.kind)
@given(u=st.floats(-1e6, 1e6))
def test_nonnegative(f, u):
    assert f(u) >= 0


@pytest.mark.parametrize("f", ALL_FUNCTIONS, ids=lambda f: f.kind)
def test_lower_semicontinuous_on_grid(f):
    # f(u) <= liminf of f along approach sequences from both sides
    for u in (-1.0, 0.0, 0.5, 1.0, 2.0):
        for sign in (-1, 1):
            approach = [f(u + sign * 10.0**-k) for k in range(9, 13)]
            assert f(u) <= min(approach) + 1e-8


def test_condition2_flags():
    assert {k: cls.diverges for k, cls in FUNCTION_KINDS.items()} == {
        "positive_part": True,
        "square": True,
        "one_sided_square": True,
        "step_indicator": False,
        "smoothed_step": True,
        "power_law": True,
    }
    assert not ConstraintSet(1.0, ((StepIndicator(0.0), 0.1),)).condition2_holds
    assert ConstraintSet(1.0, ((StepIndicator(0.0), 0.1), (Square(), 1.0))).condition2_holds


@pytest.mark.parametrize("f", [f for f in ALL_FUNCTIONS if f.diverges], ids=lambda f: f.kind)
def test_divergent_kinds_grow(f):
    u = np.geomspace(10, 1e8, 30)
    vals = f(u)
    assert np.all(np.diff(vals) >= 0) and vals[-1] > 1e5


def test_constructor_validation():
    with pytest.raises(ValueError):
        SmoothedStep(0.0, 0.0)
    with pytest.raises(ValueError):
        PowerLaw(0.5)
    with pytest.raises(ValueError):
        ConstraintSet(0.0, ())
    with pytest.raises(ValueError, match="budget"):
        ConstraintSet(1.0, ((Square(), -0.1),))
    with pytest.raises(TypeError):
        ConstraintSet(1.0, ((lambda u: u, 1.0),))


def test_serialization_round_trip():
    cs = ConstraintSet(2.0, tuple((f, 0.5 + i) for i, f in enumerate(ALL_FUNCTIONS)))
    again = ConstraintSet.from_dict(cs.to_dict())
    assert again == cs
    with pytest.raises(ValueError):
        function_from_dict({"kind": "cubic"})


def test_distribution_validation():
    with pytest.raises(ValueError):
        DiscreteDistribution([0.0, 1.0], [0.5, 0.6])
    with pytest.raises(ValueError):
        DiscreteDistribution([0.0, 1.0], [1.2, -0.2])
    with pytest.raises(ValueError):
        DiscreteDistribution([0.0, 1.0, 2.0], [0.2, 0.3, 0.5], max_atoms=2)


def test_membership_U_examples():
    sq = ConstraintSet(1.0, ((Square(), 1.0),))
    assert check_membership_U(DiscreteDistribution([0.0], [1.0]), sq)
    assert not check_membership_U(DiscreteDistribution([1.0], [1.0]), ConstraintSet(1.0, ()))
    assert check_membership_U(DiscreteDistribution([-1.0, 1.0], [0.5, 0.5]), sq)


def test_membership_S_examples():
    cs = ConstraintSet(1.0, ((Square(), 1.0),))
    assert check_membership_S(DiscreteDistribution([1.0], [1.0]), cs, 100)
    assert not check_membership_S(DiscreteDistribution([-0.1, 1.5], [0.5, 0.5]), cs, 100)
    P_U = DiscreteDistribution([-1.0, 1.0], [0.5, 0.5])
    n = 100
    P_S = P_U.map(lambda u: 1.0 + u / math.sqrt(n))
    assert check_membership_S(P_S, cs, n)


def test_maximal_membership_needs_nonpositive_atoms():
    cs = ConstraintSet(1.0, ((PositivePart(), 0.0),))
    assert check_membership_U(DiscreteDistribution([-2.0, 0.0], [0.5, 0.5]), cs)
    assert not check_membership_U(DiscreteDistribution([-2.0, 0.01], [0.5, 0.5]), cs, tol=1e-9)


@given(
    atoms=st.lists(st.floats(-5, 5), min_size=1, max_size=4),
    raw=st.lists(st.floats(0.01, 1), min_size=4, max_size=4),
    budget=st.floats(0, 10),
    extra=st.floats(0, 10),
)
def test_membership_monotone_in_budget(atoms, raw, budget, extra):
    w = np.array(raw[: len(atoms)])
    w = w / w.sum()
    w[-1] = 1.0 - w[:-1].sum()
    if w[-1] < 0:
        return
    P = DiscreteDistribution(atoms, w)
    cs = ConstraintSet(1.0, ((Square(), budget), (PositivePart(), budget)))
    if check_membership_U(P, cs):
        assert check_membership_U(P, cs.with_budget(0, budget + extra).with_budget(1, budget + extra))


def test_support_bound_examples():
    assert support_bound(ConstraintSet(1.0, ((Square(), 1.0),)), 1e-4) == pytest.approx(100.0)
    d, thr, a, floor = 0.1, 1.0, 1e-2, 1e-6
    got = support_bound(ConstraintSet(1.0, ((SmoothedStep(thr, a), d),)), floor)
    assert got == pytest.approx(thr + (d / floor - 1) / a)
    assert support_bound(ConstraintSet(1.0, ((PositivePart(), 0.0),)), 1e-4) == 0.0


@given(st.floats(0.01, 100), st.floats(1e-8, 1e-2))
def test_support_bound_is_binding(budget, floor):
    cs = ConstraintSet(1.0, ((Square(), budget), (PowerLaw(1.5), 3 * budget)))
    ub = support_bound(cs, floor)
    u = ub * (1 + 1e-6) + 1e-9
    assert any(f(u) * floor > b for f, b in cs.items)


def test_support_bound_requires_condition2():
    with pytest.raises(UnboundedSupportError):
        support_bound(ConstraintSet(1.0, ((StepIndicator(0.0), 0.2),)), 1e-4)
    with pytest.raises(UnboundedSupportError):
        support_bound(ConstraintSet(1.0, ()), 1e-4)


def test_left_support_bound():
    assert left_support_bound(ConstraintSet(1.0, ((PositivePart(), 0.0),)), 1e-4) is None
    assert left_support_bound(ConstraintSet(1.0, ((Square(), 1.0),)), 1e-4) == pytest.approx(-100.0)
