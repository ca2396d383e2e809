"""Measurement and communication protocols as set-valued right-hand sides.

Both families are written in one form: a list of scalar *arguments*
(``x_k`` for measurement, ``x_i - x_j`` for communication), each feeding one
or more *terms* that add ``coef * h(y)`` to one component of the velocity.
At a jump point of an argument the admissible contributions are the convex
combinations ``(1 - lam) * left + lam * right`` with one ``lam in [0, 1]``
per argument.  So the admissible velocities are

    v = v0 + sum_p lam_p * col_p,      lam in [0, 1]^P

where ``v0`` collects every left-side contribution and ``col_p`` the jump of
argument ``p``.  Both directions of a communication pair share one argument;
for odd ``g`` this gives the equal-and-opposite edge values of the incidence
form, and for non-odd ``g`` it gives the segment between the two one-sided
fields rather than their bounding box.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .feasibility import BoxFeasibility, solve_box
from .graph import WeightedDigraph, classify
from .nonlinear import FilippovInterval, MonotoneFn, Reflected, check_odd

MEASUREMENT = "measurement"
COMMUNICATION = "communication"


class DynamicsError(ValueError):
    pass


class DimensionMismatch(DynamicsError):
    pass


class PolicyCoefficientOutOfRange(DynamicsError):
    pass


@dataclass(frozen=True)
class Term:
    fn: MonotoneFn
    flip: bool  # evaluate fn at -y
    node: int
    coef: object  # velocity[node] += coef * fn(+-y)
    edge: tuple[int, int] | None = None  # (source, target) for communication

    def limits(self, y):
        """Function values on the ``y^-`` and ``y^+`` sides of the argument."""
        if self.flip:
            return self.fn.right_limit(-y), self.fn.left_limit(-y)
        return self.fn.left_limit(y), self.fn.right_limit(y)


@dataclass(frozen=True)
class Argument:
    nodes: tuple[int, ...]  # (k,) -> x_k ; (i, j) -> x_i - x_j
    terms: tuple[Term, ...]

    def value(self, x):
        if len(self.nodes) == 1:
            return x[self.nodes[0]]
        return x[self.nodes[0]] - x[self.nodes[1]]

    def rate(self, v):
        """Time derivative of the argument under velocity ``v``."""
        return self.value(v)

    def next_breakpoint(self, y, direction: int):
        """Nearest jump of any term strictly beyond ``y`` along ``direction``."""
        best = np.inf if direction > 0 else -np.inf
        for t in self.terms:
            if t.flip:
                b = -t.fn.next_breakpoint(-y, -direction)
            else:
                b = t.fn.next_breakpoint(y, direction)
            best = min(best, b) if direction > 0 else max(best, b)
        return best

    def breakpoint_near(self, y, tol):
        for t in self.terms:
            if t.flip:
                b = t.fn.breakpoint_near(-y, tol)
                if b is not None:
                    return -b
            else:
                b = t.fn.breakpoint_near(y, tol)
                if b is not None:
                    return b
        return None


@dataclass(frozen=True)
class ProtocolSpec:
    graph: WeightedDigraph
    family: str
    node_functions: tuple[MonotoneFn, ...] | None = None
    edge_functions: Mapping[tuple[int, int], MonotoneFn] | None = None
    # "relative": xdot_i = -sum a_ij g(x_i - x_j); "neighbor": xdot_i = sum a_ij g(x_j - x_i)
    convention: str = "relative"
    arguments: tuple[Argument, ...] = field(init=False, repr=False, compare=False)
    warnings: tuple[str, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        g = self.graph
        notes = []
        if self.family == MEASUREMENT:
            fs = tuple(self.node_functions or ())
            if len(fs) != g.n:
                raise DimensionMismatch(f"measurement protocol needs {g.n} node functions, got {len(fs)}")
            object.__setattr__(self, "node_functions", fs)
            args = _measurement_arguments(g, fs)
            if any(not f.proper for f in fs):
                notes.append("some node functions are not proper (|f(x)| does not grow without bound)")
        elif self.family == COMMUNICATION:
            if self.convention not in ("relative", "neighbor"):
                raise DynamicsError(f"unknown convention {self.convention!r}")
            ef = dict(self.edge_functions or {})
            missing = [(j, i) for j, i, _ in g.edges if (j, i) not in ef]
            if missing:
                raise DynamicsError(f"no function for edges {missing}")
            extra = [e for e in ef if not g.has_edge(*e)]
            if extra:
                raise DynamicsError(f"functions given for non-edges {extra}")
            object.__setattr__(self, "edge_functions", ef)
            args = _communication_arguments(g, self.effective_edge_functions())
            topo = classify(g)
            if topo.undirected and not all(check_odd(fn) for fn in set(self.effective_edge_functions().values())):
                notes.append("undirected communication with non-odd edge functions: no convergence claim")
            if not (topo.undirected or topo.directed_ring or topo.has_spanning_tree):
                notes.append("directed communication without ring or spanning-tree structure: no convergence claim")
        else:
            raise DynamicsError(f"unknown protocol family {self.family!r}")
        object.__setattr__(self, "arguments", args)
        object.__setattr__(self, "warnings", tuple(notes))

    @property
    def n(self) -> int:
        return self.graph.n

    def effective_edge_functions(self) -> dict:
        """Edge functions in the relative convention."""
        if self.family != COMMUNICATION:
            raise DynamicsError("only communication protocols have edge functions")
        if self.convention == "neighbor":
            return {e: Reflected(fn) for e, fn in self.edge_functions.items()}
        return dict(self.edge_functions)

    @property
    def common_function(self) -> MonotoneFn | None:
        """The shared function if every node/edge uses the same one."""
        fns = list(self.node_functions) if self.family == MEASUREMENT else list(self.effective_edge_functions().values())
        if fns and all(f == fns[0] for f in fns):
            return fns[0]
        return None


def measurement(graph: WeightedDigraph, functions: Sequence[MonotoneFn] | MonotoneFn) -> ProtocolSpec:
    if isinstance(functions, MonotoneFn):
        functions = [functions] * graph.n
    return ProtocolSpec(graph, MEASUREMENT, node_functions=tuple(functions))


def communication(
    graph: WeightedDigraph, functions: Mapping | MonotoneFn, convention: str = "relative"
) -> ProtocolSpec:
    if isinstance(functions, MonotoneFn):
        functions = {(j, i): functions for j, i, _ in graph.edges}
    return ProtocolSpec(graph, COMMUNICATION, edge_functions=dict(functions), convention=convention)


def _measurement_arguments(g, fs):
    indeg = [0] * g.n
    out = [[] for _ in range(g.n)]
    for j, i, w in g.edges:
        indeg[i] = indeg[i] + w
        out[j].append((i, w))
    args = []
    for k in range(g.n):
        terms = []
        if out[k] or indeg[k]:
            if indeg[k]:
                terms.append(Term(fs[k], False, k, -indeg[k]))
            for i, w in out[k]:
                terms.append(Term(fs[k], False, i, w))
        args.append(Argument((k,), tuple(terms)))
    return tuple(args)


def _communication_arguments(g, ef):
    pairs: dict[tuple[int, int], list] = {}
    for j, i, w in g.edges:
        lo, hi = min(i, j), max(i, j)
        # edge j -> i acts on node i through g(x_i - x_j); y = x_lo - x_hi
        pairs.setdefault((lo, hi), []).append(Term(ef[(j, i)], i == hi, i, -w, (j, i)))
    return tuple(Argument(key, tuple(terms)) for key, terms in sorted(pairs.items()))


# -- decomposition -------------------------------------------------------------


@dataclass(frozen=True)
class Decomposition:
    """``v = v0 + sum lam_p * cols[p]`` over the arguments in ``cols``."""

    v0: tuple
    cols: dict  # argument index -> tuple (length n)
    y: tuple  # argument values where limits were taken

    def velocity(self, lam: Mapping[int, object]) -> list:
        v = list(self.v0)
        for p, col in self.cols.items():
            c = lam.get(p, 0)
            if c:
                for i, d in enumerate(col):
                    if d:
                        v[i] += c * d
        return v

    def matrix(self) -> tuple[list, list]:
        keys = list(self.cols)
        D = [[self.cols[p][i] for p in keys] for i in range(len(self.v0))]
        return keys, D


def _check_dim(p: ProtocolSpec, x):
    if len(x) != p.n:
        raise DimensionMismatch(f"state has {len(x)} components, protocol has {p.n} nodes")


def decompose(p: ProtocolSpec, x, at: Mapping[int, object] | None = None) -> Decomposition:
    """Left contributions and jump columns at ``x``.

    ``at`` maps argument indices to the point where their limits are taken
    (used by the integrator to snap near-breakpoint arguments onto the jump).
    """
    _check_dim(p, x)
    zero = 0
    v0 = [zero] * p.n
    cols = {}
    ys = []
    for idx, arg in enumerate(p.arguments):
        y = at[idx] if at is not None and idx in at else arg.value(x)
        ys.append(y)
        col = None
        for t in arg.terms:
            lo, hi = t.limits(y)
            v0[t.node] += t.coef * lo
            if hi != lo:
                if col is None:
                    col = [zero] * p.n
                col[t.node] += t.coef * (hi - lo)
        if col is not None and any(col):
            cols[idx] = tuple(col)
    return Decomposition(tuple(v0), cols, tuple(ys))


# -- inclusion box -------------------------------------------------------------


@dataclass(frozen=True)
class InclusionBox:
    family: str
    box: tuple[FilippovInterval, ...]
    node_intervals: tuple[FilippovInterval, ...] | None
    edge_intervals: dict | None  # (source, target) -> interval of g_ij(x_i - x_j)
    decomposition: Decomposition

    def contains(self, v, tol=0.0) -> bool:
        return all(iv.contains(c, tol) for iv, c in zip(self.box, v))


def rhs_decomposition(p: ProtocolSpec, x) -> InclusionBox:
    dec = decompose(p, x)
    lo = list(dec.v0)
    hi = list(dec.v0)
    for col in dec.cols.values():
        for i, d in enumerate(col):
            if d < 0:
                lo[i] += d
            elif d > 0:
                hi[i] += d
    box = tuple(FilippovInterval(a, b) for a, b in zip(lo, hi))
    node_iv = edge_iv = None
    if p.family == MEASUREMENT:
        node_iv = tuple(f.interval(x[k]) for k, f in enumerate(p.node_functions))
    else:
        edge_iv = {(j, i): fn.interval(x[i] - x[j]) for (j, i), fn in p.effective_edge_functions().items()}
    return InclusionBox(p.family, box, node_iv, edge_iv, dec)


# -- selections ----------------------------------------------------------------


class SelectionPolicy:
    def coefficient(self, arg_index: int):
        raise NotImplementedError


@dataclass(frozen=True)
class RightContinuous(SelectionPolicy):
    def coefficient(self, arg_index):
        return 1


@dataclass(frozen=True)
class LeftContinuous(SelectionPolicy):
    def coefficient(self, arg_index):
        return 0


@dataclass(frozen=True)
class Midpoint(SelectionPolicy):
    def coefficient(self, arg_index):
        return Fraction(1, 2)


@dataclass(frozen=True)
class Explicit(SelectionPolicy):
    """``default`` for every jump, overridden per argument index by ``per_argument``."""

    default: object = Fraction(1, 2)
    per_argument: Mapping[int, object] = field(default_factory=dict)

    def __post_init__(self):
        for c in [self.default, *self.per_argument.values()]:
            if not 0 <= c <= 1:
                raise PolicyCoefficientOutOfRange(f"selection coefficient {c} outside [0, 1]")

    def coefficient(self, arg_index):
        return self.per_argument.get(arg_index, self.default)


def select_exact(p: ProtocolSpec, x, policy: SelectionPolicy) -> list:
    dec = decompose(p, x)
    return dec.velocity({k: policy.coefficient(k) for k in dec.cols})


def select(p: ProtocolSpec, x, policy: SelectionPolicy) -> np.ndarray:
    return np.array([float(v) for v in select_exact(p, x, policy)])


# -- equilibria ----------------------------------------------------------------


@dataclass(frozen=True)
class EquilibriumCertificate:
    holds: bool
    lam: dict | None  # argument index -> coefficient
    node_values: tuple | None  # measurement witness u
    edge_values: dict | None  # communication witness nu per (source, target)
    residual: float
    exact: bool

    def __bool__(self):
        return self.holds


def term_value(t: Term, y, lam):
    lo, hi = t.limits(y)
    return lo + lam * (hi - lo) if hi != lo else lo


def is_equilibrium(p: ProtocolSpec, x, *, tol: float = 1e-9, exact: bool | None = None) -> EquilibriumCertificate:
    """Whether ``0`` is an admissible velocity at ``x``, with a witness."""
    dec = decompose(p, x)
    return equilibrium_from(p, dec, tol=tol, exact=exact)


def equilibrium_from(p: ProtocolSpec, dec: Decomposition, *, tol=1e-9, exact=None) -> EquilibriumCertificate:
    keys, D = dec.matrix()
    b = [-v for v in dec.v0]
    sol: BoxFeasibility = solve_box(D, b, exact=exact, tol=tol)
    if not sol.feasible:
        return EquilibriumCertificate(False, None, None, None, sol.residual, sol.exact)
    lam = dict(zip(keys, sol.lam))
    node_values = edge_values = None
    if p.family == MEASUREMENT:
        node_values = tuple(
            term_value(Term(f, False, k, 1), dec.y[k], lam.get(k, 0)) for k, f in enumerate(p.node_functions)
        )
    else:
        edge_values = {}
        for idx, arg in enumerate(p.arguments):
            for t in arg.terms:
                lo, hi = t.limits(dec.y[idx])
                edge_values[t.edge] = lo + lam.get(idx, 0) * (hi - lo)
    v = dec.velocity(lam)
    residual = float(max((abs(c) for c in v), default=0))
    return EquilibriumCertificate(True, lam, node_values, edge_values, residual, sol.exact)
