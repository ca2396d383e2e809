"""Convergence-set membership, Lyapunov traces and hypothesis checks.

Set identifiers (external interface): ``D1`` node-function agreement,
``D2`` the same with one shared node function, ``H1`` every edge function
admits 0, ``H2`` the ring version of ``H1``, ``H3`` a shared root value for a
tree with one edge function, and ``band`` one quantizer cell band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .dynamics import COMMUNICATION, MEASUREMENT, ProtocolSpec
from .graph import classify, left_null_vector
from .integrator import Trajectory
from .nonlinear import (
    FilippovInterval,
    MonotoneFn,
    SymmetricQuantizer,
    UnsupportedFamily,
    check_odd,
)


class BindingMismatch(ValueError):
    pass


class AntiderivativeUnavailable(ValueError):
    pass


class SetId(str, Enum):
    NODE_AGREEMENT = "D1"
    SHARED_NODE_AGREEMENT = "D2"
    EDGE_ZERO = "H1"
    RING_EDGE_ZERO = "H2"
    TREE_SHARED_EDGE = "H3"
    BAND = "band"


@dataclass(frozen=True)
class ConvergenceSet:
    set_id: SetId
    protocol: ProtocolSpec | None = None
    delta: object = None  # band width for SetId.BAND

    def __post_init__(self):
        sid = SetId(self.set_id)
        object.__setattr__(self, "set_id", sid)
        p = self.protocol
        if sid is SetId.BAND:
            if self.delta is None or not self.delta > 0:
                raise BindingMismatch("band set needs a positive delta")
            return
        if p is None:
            raise BindingMismatch(f"set {sid.value} needs a protocol binding")
        if sid in (SetId.NODE_AGREEMENT, SetId.SHARED_NODE_AGREEMENT) and p.family != MEASUREMENT:
            raise BindingMismatch(f"set {sid.value} is defined for measurement protocols")
        if sid is SetId.SHARED_NODE_AGREEMENT and p.common_function is None:
            raise BindingMismatch("set D2 needs one node function shared by all nodes")
        if sid in (SetId.EDGE_ZERO, SetId.RING_EDGE_ZERO, SetId.TREE_SHARED_EDGE) and p.family != COMMUNICATION:
            raise BindingMismatch(f"set {sid.value} is defined for communication protocols")
        if sid is SetId.RING_EDGE_ZERO and not classify(p.graph).directed_ring:
            raise BindingMismatch("set H2 needs a directed ring")
        if sid is SetId.TREE_SHARED_EDGE and p.common_function is None:
            raise BindingMismatch("set H3 needs one edge function shared by all edges")

    @property
    def id(self) -> str:
        return self.set_id.value

    @property
    def n(self) -> int | None:
        return self.protocol.n if self.protocol is not None else None


@dataclass(frozen=True)
class Membership:
    holds: bool
    witness: object = None

    def __bool__(self):
        return self.holds


def _intersect(intervals: Sequence[FilippovInterval]):
    lo = max(iv.lo for iv in intervals)
    hi = min(iv.hi for iv in intervals)
    return lo, hi


def _mid(lo, hi):
    if lo == hi:
        return lo
    if isinstance(lo, (int, Fraction)) and isinstance(hi, (int, Fraction)):
        return Fraction(lo + hi) / 2
    return (lo + hi) / 2


def _exact_state(x) -> bool:
    return all(isinstance(v, (int, Fraction)) for v in x)


def snapped_interval(f: MonotoneFn, y, tol) -> FilippovInterval:
    """Filippov interval at ``y``, taken at a jump point when ``y`` is within ``tol`` of it."""
    if tol:
        b = f.breakpoint_near(y, tol * max(1.0, abs(float(y))))
        if b is not None:
            return f.interval(b)
    return f.interval(y)


def member(s: ConvergenceSet, x, tol: float | None = None) -> Membership:
    """Membership of ``x``; float states use ``tol`` (default 1e-9) for jump snapping and interval slack."""
    sid = s.set_id
    if s.n is not None and len(x) != s.n:
        raise BindingMismatch(f"state has {len(x)} components, set is bound to {s.n} nodes")
    if tol is None:
        tol = 0 if _exact_state(x) else 1e-9
    if sid is SetId.BAND:
        return _band(s.delta, x, tol)
    p = s.protocol
    if sid in (SetId.NODE_AGREEMENT, SetId.SHARED_NODE_AGREEMENT):
        ivs = [snapped_interval(f, x[k], tol) for k, f in enumerate(p.node_functions)]
        lo, hi = _intersect(ivs)
        return Membership(True, _mid(min(lo, hi), max(lo, hi))) if lo <= hi + tol else Membership(False)
    edges = p.effective_edge_functions()
    if sid in (SetId.EDGE_ZERO, SetId.RING_EDGE_ZERO):
        bad = [(j, i) for (j, i), fn in edges.items() if not snapped_interval(fn, x[i] - x[j], tol).contains(0, tol)]
        return Membership(not bad, bad or None)
    # shared root value alpha with alpha in every a_e * F[g](x_i - x_j)
    g = p.common_function
    ivs = [g.interval(0 * x[0])]
    for j, i, w in p.graph.edges:
        ivs.append(snapped_interval(g, x[i] - x[j], tol).scaled(w))
    lo, hi = _intersect(ivs)
    return Membership(True, _mid(min(lo, hi), max(lo, hi))) if lo <= hi + tol else Membership(False)


def _band(delta, x, tol=0) -> Membership:
    """``k`` with every component in ``[(k - 1/2) delta, (k + 1/2) delta]``."""
    hi, lo = max(x), min(x)
    if _exact_state([*x, delta]) and not tol:
        k = math.ceil(Fraction(hi) / Fraction(delta) - Fraction(1, 2))
        ok = Fraction(lo) >= (k - Fraction(1, 2)) * delta
    else:
        slack = tol * max(1.0, abs(float(hi)), abs(float(lo)))
        # smallest k whose band reaches hi - slack, then check lo
        k = SymmetricQuantizer(delta).left_limit(float(hi) - slack)
        k = int(round(float(k) / float(delta)))
        ok = float(lo) >= (k - 0.5) * float(delta) - slack
    return Membership(bool(ok), k if ok else None)


def monitor(s: ConvergenceSet) -> Callable[[np.ndarray], bool]:
    return lambda x: member(s, x).holds


# -- Lyapunov traces -----------------------------------------------------------


@dataclass(frozen=True)
class LyapunovTrace:
    kind: str
    values: np.ndarray
    max_increase: float  # largest single-step increase, 0 if none
    positive_variation: float  # sum of single-step increases
    argsets: list | None = None  # indices attaining max (MaxV) or min (MinW)


def _report(kind, vals, argsets=None):
    vals = np.asarray(vals, dtype=float)
    d = np.diff(vals)
    inc = float(max(0.0, d.max(initial=0.0)))
    pos = float(np.clip(d, 0.0, None).sum())
    return LyapunovTrace(kind, vals, inc, pos, argsets)


def lyapunov_trace(
    traj: Trajectory,
    kind: str,
    *,
    weights: Sequence[float] | None = None,
    functions: Sequence[MonotoneFn] | None = None,
    tie_tol: float = 1e-12,
) -> LyapunovTrace:
    """Per-time values of ``MaxV`` (max x), ``MinW`` (-min x), ``WeightedV1``
    (sum w_i F_i(x_i) with F_i the antiderivative of f_i) or ``Energy`` (|x|^2 / 2)."""
    X = np.array(traj.states, dtype=float).reshape(len(traj.states), -1)
    if kind == "MaxV":
        vals = X.max(axis=1)
        args = [tuple(np.flatnonzero(row >= m - tie_tol)) for row, m in zip(X, vals)]
        return _report(kind, vals, args)
    if kind == "MinW":
        mins = X.min(axis=1)
        args = [tuple(np.flatnonzero(row <= m + tie_tol)) for row, m in zip(X, mins)]
        return _report(kind, -mins, args)
    if kind == "Energy":
        return _report(kind, 0.5 * (X**2).sum(axis=1))
    if kind == "WeightedV1":
        if weights is None or functions is None:
            raise ValueError("WeightedV1 needs weights and node functions")
        if len(weights) != X.shape[1] or len(functions) != X.shape[1]:
            raise BindingMismatch("weights/functions do not match the state dimension")
        vals = []
        for row in X:
            total = 0.0
            for w, f, xi in zip(weights, functions, row):
                try:
                    total += float(w) * float(f.antiderivative(float(xi)))
                except UnsupportedFamily as exc:
                    raise AntiderivativeUnavailable(str(exc)) from exc
            vals.append(total)
        return _report(kind, vals)
    raise ValueError(f"unknown Lyapunov kind {kind!r}")


# -- conformance ---------------------------------------------------------------

NO_CLAIM = "unsupported topology: no claim"
OPEN = "open: heterogeneous node functions on a spanning-tree digraph"


@dataclass(frozen=True)
class Prediction:
    theorem: str  # descriptive name or "none"
    predicted_set: str  # set id or "none"
    hypotheses: dict
    label: str | None = None


def _is_tree(p: ProtocolSpec, topo) -> bool:
    g = p.graph
    if len(topo.roots) != 1 or len(g.edges) != g.n - 1:
        return False
    indeg = [0] * g.n
    for _, i, _ in g.edges:
        indeg[i] += 1
    (r,) = topo.roots
    return all(indeg[k] == (0 if k == r else 1) for k in range(g.n))


def predict(p: ProtocolSpec) -> Prediction:
    """Which proved result applies, checked mechanically from topology and functions."""
    topo = classify(p.graph)
    hyp: dict = {"topology": topo.flags()}
    if p.family == MEASUREMENT:
        fs = p.node_functions
        common = p.common_function
        hyp["proper"] = all(f.proper for f in fs)
        hyp["shared_function"] = common is not None
        if topo.strongly_connected:
            return Prediction("strongly_connected_measurement", "D1", hyp)
        if topo.has_spanning_tree:
            if common is None:
                return Prediction("none", "none", hyp, OPEN)
            if isinstance(common, SymmetricQuantizer):
                hyp["band_delta"] = _json_num(common.delta)
                return Prediction("spanning_tree_quantized_measurement", "D2", hyp)
            return Prediction("spanning_tree_common_measurement", "D2", hyp)
        return Prediction("none", "none", hyp, NO_CLAIM)

    fns = p.effective_edge_functions()
    odd = all(check_odd(f) for f in set(fns.values()))
    zero_at_zero = all(f.value(0) == 0 for f in fns.values())
    some_continuous_at_zero = any(f.interval(0).degenerate and f.value(0) == 0 for f in fns.values())
    hyp.update(odd=odd, zero_at_zero=zero_at_zero, continuous_zero_edge=some_continuous_at_zero)
    hyp["convention"] = p.convention
    if topo.undirected:
        if odd:
            return Prediction("undirected_odd_communication", "H1", hyp)
        return Prediction("none", "none", hyp, "hypotheses not met: edge functions are not odd")
    if topo.directed_ring:
        if p.n == 2 and odd:
            hyp["ring_case"] = "two nodes, odd"
            return Prediction("directed_ring_communication", "H2", hyp)
        if p.n >= 3 and zero_at_zero and some_continuous_at_zero:
            hyp["ring_case"] = "three or more nodes, one edge continuous at 0"
            return Prediction("directed_ring_communication", "H2", hyp)
        return Prediction("none", "none", hyp, "hypotheses not met for the ring result")
    if _is_tree(p, topo):
        common = p.common_function
        hyp["shared_function"] = common is not None
        if common is not None and common.value(0) == 0:
            return Prediction("spanning_tree_communication", "H3", hyp)
        return Prediction("none", "none", hyp, "hypotheses not met for the tree result")
    return Prediction("none", "none", hyp, NO_CLAIM)


def _json_num(v):
    if isinstance(v, Fraction):
        return int(v) if v.denominator == 1 else str(v)
    return v


def convergence_set(p: ProtocolSpec, set_id: str) -> ConvergenceSet:
    if set_id == "band":
        common = p.common_function
        if not isinstance(common, SymmetricQuantizer):
            raise BindingMismatch("band set needs a shared symmetric quantizer")
        return ConvergenceSet(SetId.BAND, p, common.delta)
    return ConvergenceSet(SetId(set_id), p)


def dwell_time(s: ConvergenceSet, traj: Trajectory) -> float:
    """Length of the final stretch of recorded states that all lie in ``s``."""
    if not traj.states:
        return 0.0
    start = None
    for t, x in zip(reversed(traj.times), reversed(traj.states)):
        if not member(s, x).holds:
            break
        start = t
    return 0.0 if start is None else float(traj.times[-1] - start)


def sliding_consensus(traj: Trajectory, tol: float = 1e-9) -> bool:
    """Final state in consensus while still moving along the consensus line."""
    x = np.asarray(traj.final(), dtype=float)
    v = np.asarray(traj.selections[-1], dtype=float)
    if not np.all(np.isfinite(v)):
        return False
    return bool(np.ptp(x) <= tol and np.ptp(v) <= tol and abs(v[0]) > tol)


def conformance_report(p: ProtocolSpec, traj: Trajectory, *, extra_sets: Sequence[str] = ()) -> dict:
    pred = predict(p)
    report: dict = {
        "theorem": pred.theorem,
        "hypotheses": pred.hypotheses,
        "predicted_set": pred.predicted_set,
        "member_final": None,
        "dwell": 0.0,
    }
    if pred.label:
        report["label"] = pred.label
    if pred.predicted_set != "none":
        s = convergence_set(p, pred.predicted_set)
        report["member_final"] = member(s, traj.final()).holds
        report["dwell"] = dwell_time(s, traj)
    checks = {}
    for sid in extra_sets:
        try:
            s = convergence_set(p, sid)
        except BindingMismatch as exc:
            checks[sid] = f"not applicable: {exc}"
            continue
        checks[sid] = member(s, traj.final()).holds
    if "band_delta" in pred.hypotheses:
        checks.setdefault("band", member(convergence_set(p, "band"), traj.final()).holds)
    if checks:
        report["set_checks"] = checks
    lyap = {
        "maxV_increase": lyapunov_trace(traj, "MaxV").max_increase,
        "minW_increase": lyapunov_trace(traj, "MinW").max_increase,
        "V1_increase": None,
    }
    if p.family == MEASUREMENT and classify(p.graph).strongly_connected:
        w = left_null_vector(p.graph)
        try:
            lyap["V1_increase"] = lyapunov_trace(traj, "WeightedV1", weights=w, functions=p.node_functions).max_increase
        except AntiderivativeUnavailable:
            lyap["V1_increase"] = None
    report["lyapunov"] = lyap
    slide = sliding_consensus(traj)
    report["sliding_consensus"] = slide
    report["unbounded_growth"] = slide
    report["termination"] = str(traj.termination)
    return report
