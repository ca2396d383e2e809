"""Scalar nondecreasing maps with exact one-sided limits.

Every family exposes its jump points through :meth:`MonotoneFn.next_breakpoint`,
so discontinuities can be located exactly instead of being sampled.  Integer
and :class:`~fractions.Fraction` inputs are evaluated in exact arithmetic when
the family parameters are rational too; float inputs go through floats, with
cell boundaries resolved exactly (floats are dyadic rationals).
"""

from __future__ import annotations

import math
import warnings
from abc import ABC, abstractmethod
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

HALF = Fraction(1, 2)


class UnsupportedFamily(TypeError):
    """No closed-form antiderivative is available for this function."""


class QuadratureFallbackWarning(UserWarning):
    pass


class FilippovInterval(NamedTuple):
    lo: float
    hi: float

    def contains(self, v, tol=0.0) -> bool:
        return self.lo - tol <= v <= self.hi + tol

    @property
    def degenerate(self) -> bool:
        return self.lo == self.hi

    def scaled(self, c) -> FilippovInterval:
        a, b = c * self.lo, c * self.hi
        return FilippovInterval(min(a, b), max(a, b))


def _exact(*vals) -> bool:
    for v in vals:
        t = type(v)
        if t is not int and t is not Fraction:
            return False
    return True


def _as_float(v) -> float:
    return v.numerator / v.denominator if type(v) is Fraction else float(v)


def _floor(z, delta, half: int = 0):
    """``floor(z / delta + half / 2)``, resolved exactly near cell boundaries."""
    if _exact(z, delta):
        return math.floor(Fraction(z) / Fraction(delta) + Fraction(half, 2))
    r = _as_float(z) / _as_float(delta) + 0.5 * half
    k = math.floor(r)
    slack = 1e-9 * max(1.0, abs(r))
    if r - k < slack or k + 1 - r < slack:
        k = math.floor(Fraction(float(z)) / Fraction(float(delta)) + Fraction(half, 2))
    return k


def _ceil(z, delta, half: int = 0):
    """``ceil(z / delta + half / 2)``."""
    if _exact(z, delta):
        return math.ceil(Fraction(z) / Fraction(delta) + Fraction(half, 2))
    r = _as_float(z) / _as_float(delta) + 0.5 * half
    k = math.ceil(r)
    slack = 1e-9 * max(1.0, abs(r))
    if k - r < slack or r - (k - 1) < slack:
        k = math.ceil(Fraction(float(z)) / Fraction(float(delta)) + Fraction(half, 2))
    return k


def _times(k: int, delta):
    if _exact(delta):
        return k * delta
    return k * float(delta)


class MonotoneFn(ABC):
    """Nondecreasing ``R -> R`` map with queryable one-sided limits."""

    kind: str = "abstract"
    proper: bool = False
    # Constant between consecutive breakpoints.
    piecewise_constant: bool = True

    @abstractmethod
    def value(self, x): ...

    @abstractmethod
    def left_limit(self, x): ...

    @abstractmethod
    def right_limit(self, x): ...

    @abstractmethod
    def next_breakpoint(self, x, direction: int):
        """First jump point strictly beyond ``x`` in ``direction`` (+1/-1), or +-inf."""

    def antiderivative(self, x):
        raise UnsupportedFamily(f"{type(self).__name__} has no closed-form antiderivative")

    @abstractmethod
    def descriptor(self) -> dict: ...

    def __call__(self, x):
        return self.value(x)

    def interval(self, x) -> FilippovInterval:
        return FilippovInterval(self.left_limit(x), self.right_limit(x))

    def breakpoints(self, lo, hi, limit: int = 100_000) -> list:
        """Jump points in ``[lo, hi]``."""
        out = [lo] if self.left_limit(lo) != self.right_limit(lo) else []
        b = self.next_breakpoint(lo, +1)
        while b <= hi:
            out.append(b)
            if len(out) >= limit:
                raise ValueError(f"more than {limit} breakpoints in [{lo}, {hi}]")
            b = self.next_breakpoint(b, +1)
        return out

    def breakpoint_near(self, x, tol):
        """The jump point within ``tol`` of ``x``, if any."""
        b = self.next_breakpoint(x - tol, +1)
        if b <= x + tol:
            return b
        return None


@dataclass(frozen=True)
class SymmetricQuantizer(MonotoneFn):
    """Rounds to the nearest multiple of ``delta``; ties go away from zero."""

    delta: float
    kind = "sym_quantizer"
    proper = True

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("quantizer step must be positive")

    def right_limit(self, x):
        return _times(_floor(x, self.delta, 1), self.delta)

    def left_limit(self, x):
        return _times(_ceil(x, self.delta, -1), self.delta)

    def value(self, x):
        if x > 0:
            return self.right_limit(x)
        if x < 0:
            return self.left_limit(x)
        return 0 * self.delta

    def next_breakpoint(self, x, direction):
        if math.isinf(x):
            return x if (x > 0) == (direction > 0) else -x
        if direction > 0:
            k = _floor(x, self.delta, -1) + 1
        else:
            k = _ceil(x, self.delta, -1) - 1
        return _times(k, self.delta) + self.delta * HALF if _exact(self.delta) else (k + 0.5) * self.delta

    def antiderivative(self, x):
        return _floor_antiderivative(x + self.delta * (HALF if _exact(self.delta) else 0.5), self.delta)

    def descriptor(self):
        return {"kind": self.kind, "delta": _num(self.delta)}


def _floor_antiderivative(u, delta):
    """Integral from 0 to ``u`` of ``floor(t / delta) * delta``."""
    k = _floor(u, delta)
    return delta * delta * (k * (k - 1) // 2) + k * delta * (u - k * delta)


@dataclass(frozen=True)
class AsymmetricQuantizer(MonotoneFn):
    """``floor(z / delta) * delta`` (right-continuous)."""

    delta: float
    kind = "asym_quantizer"
    proper = True

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("quantizer step must be positive")

    def value(self, x):
        return _times(_floor(x, self.delta), self.delta)

    right_limit = value

    def left_limit(self, x):
        return _times(_ceil(x, self.delta) - 1, self.delta)

    def next_breakpoint(self, x, direction):
        if math.isinf(x):
            return x if (x > 0) == (direction > 0) else -x
        if direction > 0:
            return _times(_floor(x, self.delta) + 1, self.delta)
        return _times(_ceil(x, self.delta) - 1, self.delta)

    def antiderivative(self, x):
        return _floor_antiderivative(x, self.delta)

    def descriptor(self):
        return {"kind": self.kind, "delta": _num(self.delta)}


@dataclass(frozen=True)
class LogarithmicQuantizer(MonotoneFn):
    """``sign(z) * exp(q(ln|z|))`` with ``q`` the symmetric quantizer of step ``delta``.

    Jump points accumulate at zero; those with magnitude below ``floor`` are
    not reported by :meth:`next_breakpoint` (the map is continuous at 0).
    """

    delta: float
    floor: float = 1e-9
    kind = "log_quantizer"
    proper = True

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("quantizer step must be positive")

    def _bp(self, k: int) -> float:
        return math.exp((k + 0.5) * float(self.delta))

    def _level(self, k: int) -> float:
        return math.exp(k * float(self.delta))

    def _cell(self, m: float) -> int:
        # cell k is [bp(k-1), bp(k))
        k = math.floor(math.log(m) / float(self.delta) + 0.5)
        while self._bp(k) <= m:
            k += 1
        while self._bp(k - 1) > m:
            k -= 1
        return k

    def _k_min(self) -> int:
        k = math.ceil(math.log(self.floor) / float(self.delta) - 0.5)
        while self._bp(k - 1) >= self.floor:
            k -= 1
        while self._bp(k) < self.floor:
            k += 1
        return k

    def value(self, x):
        if x == 0:
            return 0.0
        m = abs(float(x))
        return math.copysign(self._level(self._cell(m)), x)

    def _lower_mag(self, m):
        """Limit of the magnitude map from below at ``m > 0``."""
        k = self._cell(m)
        return self._level(k - 1) if self._bp(k - 1) == m else self._level(k)

    def right_limit(self, x):
        if x > 0:
            return self.value(x)
        if x < 0:
            return -self._lower_mag(abs(float(x)))
        return 0.0

    def left_limit(self, x):
        if x > 0:
            return self._lower_mag(float(x))
        if x < 0:
            return self.value(x)
        return 0.0

    def next_breakpoint(self, x, direction):
        if math.isinf(x):
            return x if (x > 0) == (direction > 0) else -x
        if x < 0 or (x == 0 and direction < 0):
            return -self.next_breakpoint(-x, -direction)
        x = float(x)
        kmin = self._k_min()
        if direction > 0:
            if x < self.floor:
                return self._bp(kmin)
            return self._bp(max(self._cell(x), kmin))
        # x > 0, moving down
        k = self._cell(x)
        b = self._bp(k - 1) if self._bp(k - 1) < x else self._bp(k - 2)
        if b < self.floor:
            return -self._bp(kmin)
        return b

    def antiderivative(self, x):
        m = abs(float(x))
        if m == 0:
            return 0.0
        d = float(self.delta)
        k = self._cell(m)
        # integral over all cells below bp(k-1)
        below = (math.exp(d / 2) - math.exp(-d / 2)) * math.exp(2 * (k - 1) * d) / (1 - math.exp(-2 * d))
        return below + self._level(k) * (m - self._bp(k - 1))

    def descriptor(self):
        return {"kind": self.kind, "delta": _num(self.delta)}


@dataclass(frozen=True)
class Sign(MonotoneFn):
    kind = "sign"

    def value(self, x):
        return int(x > 0) - int(x < 0)

    def left_limit(self, x):
        return 1 if x > 0 else -1

    def right_limit(self, x):
        return 1 if x >= 0 else -1

    def next_breakpoint(self, x, direction):
        if direction > 0:
            return 0 if x < 0 else math.inf
        return 0 if x > 0 else -math.inf

    def antiderivative(self, x):
        return abs(x)

    def descriptor(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class StepPhi(MonotoneFn):
    """1 for positive arguments, 0 otherwise."""

    kind = "step_phi"

    def value(self, x):
        return 1 if x > 0 else 0

    left_limit = value

    def right_limit(self, x):
        return 1 if x >= 0 else 0

    def next_breakpoint(self, x, direction):
        if direction > 0:
            return 0 if x < 0 else math.inf
        return 0 if x > 0 else -math.inf

    def antiderivative(self, x):
        return max(x, 0 * x)

    def descriptor(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class Linear(MonotoneFn):
    slope: float = 1
    intercept: float = 0
    kind = "linear"

    def __post_init__(self):
        if self.slope < 0:
            raise ValueError("slope must be nonnegative")

    @property
    def proper(self):
        return self.slope > 0

    @property
    def piecewise_constant(self):
        return self.slope == 0

    def value(self, x):
        return self.slope * x + self.intercept

    left_limit = right_limit = value

    def next_breakpoint(self, x, direction):
        return math.inf if direction > 0 else -math.inf

    def antiderivative(self, x):
        return self.slope * x * x / 2 + self.intercept * x

    def descriptor(self):
        return {"kind": self.kind, "slope": _num(self.slope), "intercept": _num(self.intercept)}


@dataclass(frozen=True)
class PiecewiseConstant(MonotoneFn):
    """Step function: ``values[k]`` between ``breakpoints[k-1]`` and ``breakpoints[k]``.

    ``side`` picks which neighbouring piece supplies the value at a breakpoint.
    """

    breakpoints_: tuple
    values: tuple
    side: str = "right"
    kind = "piecewise_constant"

    def __post_init__(self):
        object.__setattr__(self, "breakpoints_", tuple(self.breakpoints_))
        object.__setattr__(self, "values", tuple(self.values))
        b, v = self.breakpoints_, self.values
        if len(v) != len(b) + 1:
            raise ValueError("need exactly one more value than breakpoints")
        if any(b[k] >= b[k + 1] for k in range(len(b) - 1)):
            raise ValueError("breakpoints must be strictly increasing")
        if any(v[k] > v[k + 1] for k in range(len(v) - 1)):
            raise ValueError("values must be nondecreasing")
        if self.side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")

    def right_limit(self, x):
        return self.values[bisect_right(self.breakpoints_, x)]

    def left_limit(self, x):
        return self.values[bisect_left(self.breakpoints_, x)]

    def value(self, x):
        return self.right_limit(x) if self.side == "right" else self.left_limit(x)

    def next_breakpoint(self, x, direction):
        b = self.breakpoints_
        if direction > 0:
            k = bisect_right(b, x)
            return b[k] if k < len(b) else math.inf
        k = bisect_left(b, x) - 1
        return b[k] if k >= 0 else -math.inf

    def _integral(self, a, c):
        # a <= c
        b, v = self.breakpoints_, self.values
        total = 0 * a
        edges = [-math.inf, *b, math.inf]
        for k in range(len(v)):
            lo, hi = max(a, edges[k]), min(c, edges[k + 1])
            if hi > lo:
                total += v[k] * (hi - lo)
        return total

    def antiderivative(self, x):
        if x >= 0:
            return self._integral(0 * x, x)
        return -self._integral(x, 0 * x)

    def descriptor(self):
        return {
            "kind": self.kind,
            "breakpoints": [_num(b) for b in self.breakpoints_],
            "values": [_num(v) for v in self.values],
            "side": self.side,
        }


@dataclass(frozen=True)
class Scaled(MonotoneFn):
    """``scale * inner(x)`` with ``scale > 0``."""

    scale: float
    inner: MonotoneFn
    kind = "scaled"

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    @property
    def proper(self):
        return self.inner.proper

    @property
    def piecewise_constant(self):
        return self.inner.piecewise_constant

    def value(self, x):
        return self.scale * self.inner.value(x)

    def left_limit(self, x):
        return self.scale * self.inner.left_limit(x)

    def right_limit(self, x):
        return self.scale * self.inner.right_limit(x)

    def next_breakpoint(self, x, direction):
        return self.inner.next_breakpoint(x, direction)

    def antiderivative(self, x):
        return self.scale * self.inner.antiderivative(x)

    def descriptor(self):
        return {"kind": self.kind, "scale": _num(self.scale), "of": self.inner.descriptor()}


@dataclass(frozen=True)
class Reflected(MonotoneFn):
    """``-inner(-x)``: turns ``xdot_i = g(x_j - x_i)`` into ``xdot_i = -g'(x_i - x_j)``."""

    inner: MonotoneFn
    kind = "reflected"

    @property
    def proper(self):
        return self.inner.proper

    @property
    def piecewise_constant(self):
        return self.inner.piecewise_constant

    def value(self, x):
        return -self.inner.value(-x)

    def left_limit(self, x):
        return -self.inner.right_limit(-x)

    def right_limit(self, x):
        return -self.inner.left_limit(-x)

    def next_breakpoint(self, x, direction):
        return -self.inner.next_breakpoint(-x, -direction)

    def antiderivative(self, x):
        return self.inner.antiderivative(-x)

    def descriptor(self):
        return {"kind": self.kind, "of": self.inner.descriptor()}


# -- functional API ------------------------------------------------------------


def evaluate(f: MonotoneFn, x):
    return f.value(x)


def left_limit(f: MonotoneFn, x):
    return f.left_limit(x)


def right_limit(f: MonotoneFn, x):
    return f.right_limit(x)


def filippov_interval(f: MonotoneFn, x) -> FilippovInterval:
    return f.interval(x)


def antiderivative(f: MonotoneFn, x, *, fallback: bool = True):
    """``F(x) = integral_0^x f``; quadrature (tol 1e-10, warned) when no closed form exists."""
    try:
        return f.antiderivative(x)
    except UnsupportedFamily:
        if not fallback:
            raise
    from scipy.integrate import quad

    warnings.warn(f"quadrature used for {type(f).__name__}", QuadratureFallbackWarning, stacklevel=2)
    lo, hi = sorted((0.0, float(x)))
    pts = [float(b) for b in f.breakpoints(lo, hi)] if hi > lo else []
    val, _ = quad(lambda t: float(f.value(t)), lo, hi, points=pts or None, epsabs=1e-10, epsrel=1e-10, limit=500)
    return val if x >= 0 else -val


def check_odd(f: MonotoneFn, samples: int = 201, span: float = 10.0) -> bool:
    """Exact oddness test on a grid plus every jump point in ``[-span, span]``."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    pts = [float(t) for t in np.linspace(-span, span, samples)] + [0.0]
    bps = f.breakpoints(-span, span)
    pts += bps + [-b for b in bps]
    for x in pts:
        if f.value(x) != -f.value(-x):
            return False
        if f.right_limit(x) != -f.left_limit(-x):
            return False
    return True


# -- descriptors ---------------------------------------------------------------


def _num(v):
    if isinstance(v, Fraction):
        return int(v) if v.denominator == 1 else str(v)
    return v


def parse_number(v):
    """JSON number or rational string such as ``"-1/3"``."""
    if isinstance(v, bool):
        raise ValueError(f"not a number: {v!r}")
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, (int, float, Fraction)):
        return v
    raise ValueError(f"not a number: {v!r}")


def from_descriptor(desc: dict) -> MonotoneFn:
    kind = desc.get("kind")
    if kind == "sym_quantizer":
        return SymmetricQuantizer(parse_number(desc["delta"]))
    if kind == "asym_quantizer":
        return AsymmetricQuantizer(parse_number(desc["delta"]))
    if kind == "log_quantizer":
        return LogarithmicQuantizer(float(parse_number(desc["delta"])))
    if kind == "sign":
        return Sign()
    if kind == "step_phi":
        return StepPhi()
    if kind == "linear":
        return Linear(parse_number(desc.get("slope", 1)), parse_number(desc.get("intercept", 0)))
    if kind == "piecewise_constant":
        return PiecewiseConstant(
            tuple(parse_number(b) for b in desc["breakpoints"]),
            tuple(parse_number(v) for v in desc["values"]),
            desc.get("side", "right"),
        )
    if kind == "scaled":
        return Scaled(parse_number(desc["scale"]), from_descriptor(desc["of"]))
    if kind == "reflected":
        return Reflected(from_descriptor(desc["of"]))
    raise ValueError(f"unknown function kind {kind!r}")
