import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from filippov_consensus.nonlinear import (
    AsymmetricQuantizer,
    Linear,
    LogarithmicQuantizer,
    MonotoneFn,
    PiecewiseConstant,
    QuadratureFallbackWarning,
    Reflected,
    Scaled,
    Sign,
    StepPhi,
    SymmetricQuantizer,
    UnsupportedFamily,
    antiderivative,
    check_odd,
    evaluate,
    filippov_interval,
    from_descriptor,
    left_limit,
    parse_number,
    right_limit,
)

FAMILIES = [
    SymmetricQuantizer(1),
    SymmetricQuantizer(0.5),
    AsymmetricQuantizer(1),
    AsymmetricQuantizer(2),
    LogarithmicQuantizer(1.0),
    LogarithmicQuantizer(0.4),
    Sign(),
    StepPhi(),
    Linear(2, 0),
    Linear(0.5, -1),
    PiecewiseConstant((-1.0, 0.5, 2.0), (-2, 0, 0, 3)),
    PiecewiseConstant((0.0,), (-1, 1), "left"),
    Scaled(3, SymmetricQuantizer(1)),
    Reflected(AsymmetricQuantizer(1)),
    Reflected(StepPhi()),
]


def quadrature_oracle(f, x):
    """Independent integral of ``f`` from 0 to ``x`` split at the jump points."""
    lo, hi = sorted((0.0, float(x)))
    pts = [lo] + [float(b) for b in f.breakpoints(lo, hi)] + [hi]
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if b > a:
            total += quad(lambda t: float(f.value(t)), a, b, epsabs=1e-13, epsrel=1e-13)[0]
    return total if x >= 0 else -total


# frozen oracle values (scipy quad on the jump-split integrand)
FROZEN = {
    ("sym", 0.7): 0.2,
    ("sym", -0.7): 0.2,
    ("sym", 2.25): 2.5,
    ("asym", 2.5): 2.0,
    ("asym", -0.5): 0.5,
}


def test_eval_examples():
    assert evaluate(SymmetricQuantizer(1), 0.6) == 1
    assert evaluate(AsymmetricQuantizer(1), -0.2) == -1
    assert evaluate(LogarithmicQuantizer(1), 0) == 0


def test_limits_examples():
    q = SymmetricQuantizer(1)
    assert left_limit(q, 0.5) == 0 and right_limit(q, 0.5) == 1
    assert left_limit(Sign(), 0) == -1 and right_limit(Sign(), 0) == 1
    lin = Linear(2, 0)
    assert left_limit(lin, 3) == 6 == right_limit(lin, 3) == evaluate(lin, 3)


def test_filippov_interval_examples():
    assert filippov_interval(SymmetricQuantizer(1), 0.5) == (0, 1)
    assert filippov_interval(StepPhi(), 0) == (0, 1)
    assert filippov_interval(AsymmetricQuantizer(1), 0.3) == (0, 0)


def test_exact_arithmetic_on_rationals():
    q = SymmetricQuantizer(Fraction(1, 3))
    assert q.value(Fraction(1, 6)) == Fraction(1, 3)
    assert q.interval(Fraction(1, 6)) == (0, Fraction(1, 3))
    assert q.value(Fraction(-1, 6)) == Fraction(-1, 3)
    assert SymmetricQuantizer(1).value(Fraction(2, 3)) == 1
    assert isinstance(SymmetricQuantizer(1).value(Fraction(2, 3)), int)


def test_float_boundary_resolved_exactly():
    # floats are compared as the dyadic rationals they denote: 0.15 / 0.1 rounds
    # to 1.5 in floating point, but the float 0.15 lies strictly below 1.5 * 0.1
    q = SymmetricQuantizer(0.1)
    assert q.interval(0.15).degenerate and q.value(0.15) == pytest.approx(0.1)
    assert SymmetricQuantizer(0.5).interval(0.25) == (0, 0.5)
    a = AsymmetricQuantizer(0.1)
    assert a.value(0.3) == pytest.approx(0.2)  # 0.3 < 3 * 0.1 as rationals
    assert a.interval(0.3).degenerate


@pytest.mark.parametrize(
    "f, expected",
    [
        (SymmetricQuantizer(1), True),
        (AsymmetricQuantizer(1), False),
        (StepPhi(), False),
        (LogarithmicQuantizer(1), True),
        (Sign(), True),
        (Linear(1, 0), True),
        (Linear(1, 1), False),
        (Reflected(SymmetricQuantizer(1)), True),
    ],
)
def test_check_odd(f, expected):
    assert check_odd(f) is expected


def test_check_odd_witness_for_asym():
    a = AsymmetricQuantizer(1)
    assert a.value(0.6) == 0 and -a.value(-0.6) == 1


def test_check_odd_rejects_zero_samples():
    with pytest.raises(ValueError):
        check_odd(Sign(), samples=0)


def test_antiderivative_examples():
    q = SymmetricQuantizer(1)
    assert antiderivative(q, 0.7) == pytest.approx(0.2, abs=1e-15)
    assert antiderivative(q, Fraction(7, 10)) == Fraction(1, 5)
    for f in FAMILIES:
        assert antiderivative(f, 0) == 0
    assert antiderivative(Linear(1, 0), 2) == 2


@pytest.mark.parametrize("key", sorted(FROZEN))
def test_antiderivative_frozen_oracle(key):
    fam, x = key
    f = SymmetricQuantizer(1) if fam == "sym" else AsymmetricQuantizer(1)
    assert quadrature_oracle(f, x) == pytest.approx(FROZEN[key], abs=1e-10)
    assert antiderivative(f, x) == pytest.approx(FROZEN[key], abs=1e-12)


@pytest.mark.parametrize("f", FAMILIES, ids=lambda f: repr(f)[:40])
def test_antiderivative_matches_quadrature(f):
    for x in [-5.3, -2.0, -0.7, -0.01, 0.3, 1.0, 2.6, 7.9]:
        assert antiderivative(f, x) == pytest.approx(quadrature_oracle(f, x), abs=1e-9)


class _Cube(MonotoneFn):
    kind = "cube"
    piecewise_constant = False

    def value(self, x):
        return x**3

    left_limit = right_limit = value

    def next_breakpoint(self, x, direction):
        return math.inf if direction > 0 else -math.inf

    def descriptor(self):
        return {"kind": self.kind}


def test_antiderivative_quadrature_fallback_warns():
    with pytest.raises(UnsupportedFamily):
        antiderivative(_Cube(), 2.0, fallback=False)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        val = antiderivative(_Cube(), 2.0)
    assert val == pytest.approx(4.0, abs=1e-10)
    assert any(issubclass(w.category, QuadratureFallbackWarning) for w in rec)


def test_properness_flags():
    assert SymmetricQuantizer(1).proper and LogarithmicQuantizer(1).proper
    assert not Sign().proper and not StepPhi().proper
    assert Linear(1).proper and not Linear(0, 1).proper
    assert Scaled(2, Sign()).proper is False


@pytest.mark.parametrize(
    "ctor",
    [
        lambda: SymmetricQuantizer(0),
        lambda: AsymmetricQuantizer(-1),
        lambda: LogarithmicQuantizer(0),
        lambda: Linear(-1),
        lambda: Scaled(0, Sign()),
        lambda: Scaled(-2, Sign()),
        lambda: PiecewiseConstant((1, 0), (0, 1, 2)),
        lambda: PiecewiseConstant((0,), (1, 0)),
        lambda: PiecewiseConstant((0,), (0,)),
        lambda: PiecewiseConstant((0,), (0, 1), "middle"),
    ],
)
def test_invalid_construction(ctor):
    with pytest.raises(ValueError):
        ctor()


def test_breakpoints_enumeration():
    assert SymmetricQuantizer(1).breakpoints(-2, 2) == [Fraction(-3, 2), Fraction(-1, 2), Fraction(1, 2), Fraction(3, 2)]
    assert AsymmetricQuantizer(1).breakpoints(-1, 1) == [-1, 0, 1]
    assert Sign().breakpoints(-1, 1) == [0]
    assert Sign().breakpoints(0, 1) == [0]
    assert Linear(1).breakpoints(-5, 5) == []
    lq = LogarithmicQuantizer(1.0)
    bps = lq.breakpoints(0.1, 10)
    assert bps == pytest.approx([math.exp(k + 0.5) for k in range(-2, 2)])
    assert all(abs(b) >= lq.floor for b in lq.breakpoints(-1, 1))


def test_next_breakpoint_strict():
    q = SymmetricQuantizer(1)
    assert q.next_breakpoint(0.5, 1) == 1.5
    assert q.next_breakpoint(0.5, -1) == -0.5
    pw = PiecewiseConstant((-1, 2), (0, 1, 2))
    assert pw.next_breakpoint(-1, 1) == 2 and pw.next_breakpoint(2, 1) == math.inf
    assert pw.next_breakpoint(-1, -1) == -math.inf
    r = Reflected(AsymmetricQuantizer(1))
    assert r.next_breakpoint(0.5, 1) == 1 and r.next_breakpoint(0, -1) == -1


def test_log_quantizer_cells():
    lq = LogarithmicQuantizer(1.0)
    b = math.exp(0.5)
    assert lq.value(b) == pytest.approx(math.e)  # lower cell boundary belongs to the upper cell
    assert lq.interval(b) == (pytest.approx(1.0), pytest.approx(math.e))
    assert lq.interval(-b) == (pytest.approx(-math.e), pytest.approx(-1.0))
    assert lq.value(1.0) == 1.0
    assert lq.antiderivative(-2.0) == lq.antiderivative(2.0)


def test_descriptor_roundtrip():
    for f in FAMILIES:
        assert from_descriptor(f.descriptor()) == f or isinstance(f, LogarithmicQuantizer)
    q = from_descriptor({"kind": "sym_quantizer", "delta": "1/2"})
    assert q.delta == Fraction(1, 2)
    with pytest.raises(ValueError):
        from_descriptor({"kind": "cosine"})
    assert parse_number("-1/3") == Fraction(-1, 3)
    with pytest.raises(ValueError):
        parse_number(True)


# -- properties ----------------------------------------------------------------

xs = st.floats(-50, 50, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(a=xs, b=xs, k=st.integers(0, len(FAMILIES) - 1))
def test_monotone_interval_order(a, b, k):
    f = FAMILIES[k]
    if a == b:
        return
    x1, x2 = min(a, b), max(a, b)
    assert f.right_limit(x1) <= f.left_limit(x2)
    for x in (x1, x2):
        assert f.left_limit(x) <= f.value(x) <= f.right_limit(x)


@settings(max_examples=300, deadline=None)
@given(x=xs, k=st.integers(0, len(FAMILIES) - 1))
def test_interval_degenerate_off_breakpoints(x, k):
    f = FAMILIES[k]
    if f.breakpoint_near(x, 1e-9 * max(1.0, abs(x))) is None:
        iv = f.interval(x)
        assert iv.lo == iv.hi == f.value(x)


@settings(max_examples=200, deadline=None)
@given(a=xs, b=xs, k=st.integers(0, len(FAMILIES) - 1))
def test_antiderivative_convex(a, b, k):
    f = FAMILIES[k]
    mid = antiderivative(f, (a + b) / 2)
    assert mid <= (antiderivative(f, a) + antiderivative(f, b)) / 2 + 1e-12 * max(1.0, abs(a), abs(b)) ** 2


@settings(max_examples=200, deadline=None)
@given(x=xs)
def test_quantizer_error_bounds(x):
    for d in (0.5, 1.0, 2.0):
        assert abs(SymmetricQuantizer(d).value(x) - x) <= d / 2
        err = x - AsymmetricQuantizer(d).value(x)
        assert 0 <= err <= d
        if x != 0:
            lq = LogarithmicQuantizer(d)
            bound = (math.exp(d / 2) - 1) * abs(x)
            assert abs(lq.value(x) - x) <= bound * (1 + 4e-16) + math.ulp(x)


@settings(max_examples=100, deadline=None)
@given(lo=st.floats(-20, 20), width=st.floats(0, 20))
def test_breakpoints_are_jumps(lo, width):
    for f in (SymmetricQuantizer(1), AsymmetricQuantizer(0.5), PiecewiseConstant((-1, 3), (-1, 0, 2))):
        for b in f.breakpoints(lo, lo + width):
            assert lo <= b <= lo + width
            assert f.left_limit(b) < f.right_limit(b)


def test_numpy_scalar_inputs():
    q = SymmetricQuantizer(1)
    assert q.value(np.float64(0.6)) == 1
    assert Sign().value(np.float64(-2.0)) == -1
