"""Event-driven Euler integration of Filippov solutions.

Between jump points every piecewise-constant field is constant, so an Euler
step that stops exactly at the next jump is exact.  Arguments sitting on a
jump (within ``sliding_tol``) are resolved by a small box complementarity
problem: each such argument either crosses to one side (coefficient 0 or 1,
with its rate pointing into that side) or slides (interior coefficient, zero
rate).
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .dynamics import (
    Decomposition,
    DimensionMismatch,
    ProtocolSpec,
    SelectionPolicy,
    decompose,
    equilibrium_from,
)
from .feasibility import solve_box

CARATHEODORY = "caratheodory"
SLIDING = "sliding"


class IntegrationError(RuntimeError):
    pass


class StepUnderflow(IntegrationError):
    """No admissible progress: a sliding selection is needed."""


class ChatterUnresolved(IntegrationError):
    def __init__(self, msg, window=None):
        super().__init__(msg)
        self.window = window or []


@dataclass(frozen=True)
class PrescribedSelection:
    """Fixed selection policy, optionally switched over time.

    ``schedule`` is a list of ``(t_start, policy)`` pairs sorted by time.
    """

    schedule: tuple

    @classmethod
    def constant(cls, policy: SelectionPolicy) -> PrescribedSelection:
        return cls(((0.0, policy),))

    def policy_at(self, t: float) -> SelectionPolicy:
        current = self.schedule[0][1]
        for start, pol in self.schedule:
            if t >= start:
                current = pol
        return current


@dataclass(frozen=True)
class IntegratorConfig:
    dt_max: float
    t_end: float
    event_tol: float = 1e-10
    sliding_tol: float = 1e-9
    chatter_window: int = 8
    mode: object = SLIDING  # CARATHEODORY | SLIDING | PrescribedSelection
    dwell: float | None = None  # default max(0.1 * t_end, 10)
    max_steps: int = 2_000_000
    divergence_bound: float = 1e12
    stop_on_dwell: bool = True

    def __post_init__(self):
        if not self.dt_max > 0:
            raise ValueError("dt_max must be positive")
        if not self.t_end >= 0:
            raise ValueError("t_end must be nonnegative")
        if not (self.event_tol > 0 and self.sliding_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.chatter_window < 1:
            raise ValueError("chatter_window must be >= 1")
        if not (self.mode in (CARATHEODORY, SLIDING) or isinstance(self.mode, PrescribedSelection)):
            raise ValueError(f"unknown integration mode {self.mode!r}")

    @property
    def dwell_required(self) -> float:
        if self.dwell is not None:
            return self.dwell
        return max(0.1 * self.t_end, 10.0)


@dataclass(frozen=True)
class Event:
    t: float
    kind: str  # BoundaryCross | SlideEnter | SlideExit | EquilibriumReached
    detail: dict = field(default_factory=dict)

    def to_json(self):
        return {"t": self.t, "kind": self.kind, "detail": self.detail}


@dataclass(frozen=True)
class Termination:
    kind: str  # Horizon | Equilibrium | Converged | Diverged
    set_id: str | None = None

    def __str__(self):
        return f"{self.kind}({self.set_id})" if self.set_id else self.kind


@dataclass
class Trajectory:
    """States at event/step times; ``selections[k]`` is the velocity used on ``[t_k, t_k+1)``.

    The last selection is the velocity at the final state.
    """

    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    selections: list = field(default_factory=list)
    sliding: list = field(default_factory=list)  # argument indices sliding on each step
    events: list = field(default_factory=list)
    termination: Termination | None = None
    dwell: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.states[0]) if self.states else 0

    def state_array(self) -> np.ndarray:
        return np.array(self.states)

    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.n
        w.writerow(["t", *[f"x{i}" for i in range(n)], *[f"v{i}" for i in range(n)]])
        for t, x, v in zip(self.times, self.states, self.selections):
            w.writerow([format(float(t), ".17g"), *[format(float(c), ".17g") for c in x], *[format(float(c), ".17g") for c in v]])
        return buf.getvalue()

    def events_json(self) -> str:
        return json.dumps([e.to_json() for e in self.events], indent=1)


# -- complementarity -----------------------------------------------------------


@dataclass(frozen=True)
class StepPlan:
    velocity: np.ndarray
    lam: dict  # argument index -> coefficient
    rates: dict  # argument index -> rate of the argument
    sliding: frozenset  # jump arguments that stay on their breakpoint


def _rate_matrix(p: ProtocolSpec, dec: Decomposition, keys):
    v0 = np.array([float(c) for c in dec.v0])
    cols = np.array([[float(c) for c in dec.cols[k]] for k in keys]).reshape(len(keys), p.n)
    C = np.zeros((len(keys), p.n))
    for r, k in enumerate(keys):
        nodes = p.arguments[k].nodes
        C[r, nodes[0]] = 1.0
        if len(nodes) == 2:
            C[r, nodes[1]] = -1.0
    M = C @ cols.T
    q = C @ v0
    return v0, cols, M, q


def _lcp_ok(M, q, lam, tol, eps=1e-12):
    w = M @ lam + q
    for lp, wp in zip(lam, w):
        if lp <= eps:
            if wp > tol:
                return False
        elif lp >= 1 - eps:
            if wp < -tol:
                return False
        elif abs(wp) > tol:
            return False
    return True


def _lcp_pattern(M, q, pattern, tol):
    """Solve with ``pattern[p]`` in {0, 1, None (interior)}."""
    m = len(q)
    lam = np.array([0.0 if s is None else float(s) for s in pattern])
    S = [k for k in range(m) if pattern[k] is None]
    if S:
        F = [k for k in range(m) if pattern[k] is not None]
        rhs = -(q[S] + M[np.ix_(S, F)] @ lam[F]) if F else -q[S]
        sol, *_ = np.linalg.lstsq(M[np.ix_(S, S)], rhs, rcond=None)
        if np.any(sol < -1e-9) or np.any(sol > 1 + 1e-9):
            return None
        lam[S] = np.clip(sol, 0.0, 1.0)
    return lam if _lcp_ok(M, q, lam, tol) else None


def solve_box_lcp(M, q, tol, start=None, sweeps=50, enumerate_limit=7):
    """``lam in [0,1]^m`` with ``w = M lam + q`` pointing into the chosen side.

    Projected Gauss-Seidel, then an exact solve on the interior set it found,
    then exhaustive enumeration of side/interior patterns for small ``m``.
    """
    m = len(q)
    if m == 0:
        return np.zeros(0)
    lam = np.full(m, 0.5) if start is None else np.array(start, dtype=float)
    for _ in range(sweeps):
        before = lam.copy()
        for k in range(m):
            wk = M[k] @ lam + q[k]
            if M[k, k] < 0:
                lam[k] = min(1.0, max(0.0, lam[k] - wk / M[k, k]))
            elif wk > tol:
                lam[k] = 1.0
            elif wk < -tol:
                lam[k] = 0.0
        if np.array_equal(lam, before):
            break
    if _lcp_ok(M, q, lam, tol):
        pattern = [0 if v <= 1e-12 else 1 if v >= 1 - 1e-12 else None for v in lam]
        polished = _lcp_pattern(M, q, pattern, tol)
        return polished if polished is not None else lam
    pattern = [0 if v <= 1e-9 else 1 if v >= 1 - 1e-9 else None for v in lam]
    polished = _lcp_pattern(M, q, pattern, tol)
    if polished is not None:
        return polished
    if m > enumerate_limit:
        return None
    for pattern in itertools.product((None, 0, 1), repeat=m):
        sol = _lcp_pattern(M, q, list(pattern), tol)
        if sol is not None:
            return sol
    return None


# -- stratum -------------------------------------------------------------------


def active_arguments(p: ProtocolSpec, x, tol: float) -> dict:
    """Arguments within ``tol`` (relative to magnitude) of a jump, mapped to that jump."""
    out = {}
    for idx, arg in enumerate(p.arguments):
        if not arg.terms:
            continue
        y = arg.value(x)
        b = arg.breakpoint_near(y, tol * max(1.0, abs(float(y))))
        if b is not None:
            out[idx] = b
    return out


@dataclass(frozen=True)
class SlidingResult:
    feasible: bool
    velocity: np.ndarray | None
    lam: dict | None


def sliding_selection(p: ProtocolSpec, x, active: Mapping | None = None, *, tol: float = 1e-9) -> SlidingResult:
    """Coefficients keeping every active argument on its jump, or infeasible.

    Among feasible coefficients the one with the least-norm velocity is returned.
    """
    if active is None:
        active = active_arguments(p, x, tol)
    dec = decompose(p, x, at=active)
    keys = [k for k in dec.cols if k in active]
    v0, cols, M, q = _rate_matrix(p, dec, keys)
    if not keys:
        return SlidingResult(True, v0, {})
    # arguments that are active but without a jump still need zero rate
    still = [k for k in active if k not in dec.cols]
    Cs = np.zeros((len(still), p.n))
    for r, k in enumerate(still):
        nodes = p.arguments[k].nodes
        Cs[r, nodes[0]] = 1.0
        if len(nodes) == 2:
            Cs[r, nodes[1]] = -1.0
    A = np.vstack([M, Cs @ cols.T]) if still else M
    rhs = np.concatenate([-q, -(Cs @ v0)]) if still else -q
    sol = solve_box(A.tolist(), rhs.tolist(), exact=False, tol=tol)
    if not sol.feasible:
        return SlidingResult(False, None, None)
    lam = _least_norm(v0, cols, A, rhs, np.array(sol.lam), tol)
    return SlidingResult(True, v0 + lam @ cols, dict(zip(keys, lam.tolist())))


def _least_norm(v0, cols, A, rhs, lam, tol):
    from scipy.optimize import minimize

    if A.shape[1] <= np.linalg.matrix_rank(A):
        return lam
    out = minimize(
        lambda z: float(np.sum((v0 + z @ cols) ** 2)),
        lam,
        jac=lambda z: 2.0 * cols @ (v0 + z @ cols),
        bounds=[(0.0, 1.0)] * len(lam),
        constraints=[{"type": "eq", "fun": lambda z: A @ z - rhs, "jac": lambda z: A}],
        method="SLSQP",
        options={"ftol": 1e-15, "maxiter": 200},
    )
    z = np.clip(out.x, 0.0, 1.0)
    if np.abs(A @ z - rhs).max(initial=0.0) <= tol * max(1.0, np.abs(rhs).max(initial=0.0)):
        return z
    return lam


# -- single step ---------------------------------------------------------------


@dataclass(frozen=True)
class StepResult:
    x: np.ndarray
    dt: float
    velocity: np.ndarray
    event: Event | None
    plan: StepPlan


def plan_step(p: ProtocolSpec, x, cfg: IntegratorConfig, t: float = 0.0, prev_lam: Mapping | None = None) -> tuple[StepPlan, dict, Decomposition]:
    active = active_arguments(p, x, cfg.sliding_tol)
    dec = decompose(p, x, at=active)
    keys = [k for k in dec.cols]
    v0, cols, M, q = _rate_matrix(p, dec, keys)
    scale = max(1.0, float(np.abs(q).max(initial=0.0)), float(np.abs(M).max(initial=0.0)))
    tolw = 1e-12 * scale
    mode = cfg.mode
    if isinstance(mode, PrescribedSelection):
        policy = mode.policy_at(t)
        lam = np.array([float(policy.coefficient(k)) for k in keys])
        if not _lcp_ok(M, q, lam, tolw):
            raise StepUnderflow(f"prescribed selection leaves the jump set inconsistently at t={t}")
    elif mode == CARATHEODORY:
        lam = _caratheodory_sides(M, q, tolw, cfg.chatter_window)
        if lam is None:
            raise StepUnderflow(f"no consistent side choice at t={t}; sliding motion required")
    else:
        start = [prev_lam.get(k, 0.5) for k in keys] if prev_lam else None
        lam = solve_box_lcp(M, q, tolw, start=start)
        if lam is None:
            raise ChatterUnresolved(f"no admissible selection on the jump set at t={t}", [dict(active)])
    v = v0 + lam @ cols if keys else v0
    rates = dict(zip(keys, (M @ lam + q).tolist())) if keys else {}
    sliding = frozenset(k for k in keys if abs(rates[k]) <= tolw)
    return StepPlan(v, dict(zip(keys, lam.tolist())), rates, sliding), active, dec


def _caratheodory_sides(M, q, tol, window):
    """Search vertex coefficients whose rates agree with the chosen sides."""
    m = len(q)
    if m == 0:
        return np.zeros(0)
    lam = (q > 0).astype(float)
    for _ in range(window):
        if _lcp_ok(M, q, lam, tol):
            return lam
        w = M @ lam + q
        lam = np.where(w > tol, 1.0, np.where(w < -tol, 0.0, lam))
    return lam if _lcp_ok(M, q, lam, tol) else None


def step(p: ProtocolSpec, x, cfg: IntegratorConfig, t: float = 0.0, prev_lam=None, plan: StepPlan | None = None, active=None) -> StepResult:
    """One Euler step with the selected velocity, truncated at the next jump crossing."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise IntegrationError("non-finite state")
    if plan is None:
        plan, active, _ = plan_step(p, x, cfg, t, prev_lam)
    v = plan.velocity
    dt = min(cfg.dt_max, cfg.t_end - t)
    hit = None
    for idx, arg in enumerate(p.arguments):
        if not arg.terms or idx in plan.sliding:
            continue
        r = arg.rate(v)
        y = arg.value(x)
        scale = max(1.0, abs(y))
        if abs(r) <= 1e-15 * scale:
            continue
        direction = 1 if r > 0 else -1
        y0 = active[idx] if active and idx in active else y
        nb = arg.next_breakpoint(y0, direction)
        if not math.isfinite(nb):
            continue
        th = (float(nb) - y) / r
        if th < dt:
            dt, hit = th, (idx, nb, direction)
    if dt <= 1e-14 and cfg.t_end - t > 1e-14:
        raise StepUnderflow(f"step size {dt} at t={t}")
    dt = max(dt, 0.0)
    x_new = x + dt * v
    event = None
    if hit is not None:
        idx, nb, direction = hit
        y_new = p.arguments[idx].value(x_new)
        if abs(y_new - float(nb)) > cfg.event_tol * max(1.0, abs(float(nb))):
            raise IntegrationError(f"event location missed by {abs(y_new - float(nb))}")
        event = Event(t + dt, "BoundaryCross", {"argument": list(p.arguments[idx].nodes), "at": float(nb), "direction": direction})
    return StepResult(x_new, dt, v, event, plan)


# -- driver --------------------------------------------------------------------


Monitor = Callable[[np.ndarray], bool]


def simulate(
    p: ProtocolSpec,
    x0,
    cfg: IntegratorConfig,
    monitor: Monitor | None = None,
    monitor_id: str | None = None,
) -> Trajectory:
    """Integrate from ``x0`` until the horizon, an equilibrium, divergence or dwell in ``monitor``."""
    x = np.array([float(c) for c in x0])
    if len(x) != p.n:
        raise DimensionMismatch(f"x0 has {len(x)} components, protocol has {p.n} nodes")
    traj = Trajectory()
    t = 0.0
    prev_lam: dict = {}
    prev_sliding: frozenset = frozenset()
    inside_since = None
    dwell_req = cfg.dwell_required

    def record_membership(t_now, x_now):
        nonlocal inside_since
        if monitor is None:
            return
        if monitor(x_now):
            if inside_since is None:
                inside_since = t_now
        else:
            inside_since = None

    record_membership(t, x)
    for _ in range(cfg.max_steps):
        if np.abs(x).max(initial=0.0) > cfg.divergence_bound or not np.all(np.isfinite(x)):
            traj.times.append(t)
            traj.states.append(x.copy())
            traj.selections.append(np.full(p.n, np.nan))
            traj.sliding.append(())
            traj.termination = Termination("Diverged")
            break
        try:
            plan, active, dec = plan_step(p, x, cfg, t, prev_lam)
        except StepUnderflow:
            if isinstance(cfg.mode, PrescribedSelection):
                raise
            sliding_cfg = IntegratorConfig(**{**cfg.__dict__, "mode": SLIDING})
            plan, active, dec = plan_step(p, x, sliding_cfg, t, prev_lam)
            traj.notes.append(f"t={t}: promoted to sliding selection")
        for k in sorted(plan.sliding - prev_sliding):
            traj.events.append(Event(t, "SlideEnter", {"argument": list(p.arguments[k].nodes), "lam": plan.lam.get(k)}))
        for k in sorted(prev_sliding - plan.sliding):
            traj.events.append(Event(t, "SlideExit", {"argument": list(p.arguments[k].nodes)}))
        prev_sliding = plan.sliding
        prev_lam = plan.lam

        vscale = max(1.0, float(np.abs(np.array([float(c) for c in dec.v0])).max(initial=0.0)))
        if np.abs(plan.velocity).max(initial=0.0) <= 1e-12 * vscale:
            cert = equilibrium_from(p, dec)
            if cert.holds:
                traj.events.append(Event(t, "EquilibriumReached", {"residual": cert.residual, "selection": "this selection"}))
                traj.times.append(t)
                traj.states.append(x.copy())
                traj.selections.append(np.zeros(p.n))
                traj.sliding.append(tuple(sorted(plan.sliding)))
                if cfg.t_end > t:
                    traj.times.append(cfg.t_end)
                    traj.states.append(x.copy())
                    traj.selections.append(np.zeros(p.n))
                    traj.sliding.append(tuple(sorted(plan.sliding)))
                t_final = max(t, cfg.t_end)
                traj.dwell = (t_final - inside_since) if inside_since is not None else 0.0
                if monitor is not None and inside_since is not None and traj.dwell >= dwell_req:
                    traj.termination = Termination("Converged", monitor_id)
                else:
                    traj.termination = Termination("Equilibrium")
                return traj

        traj.times.append(t)
        traj.states.append(x.copy())
        traj.selections.append(plan.velocity.copy())
        traj.sliding.append(tuple(sorted(plan.sliding)))
        if t >= cfg.t_end:
            break
        res = step(p, x, cfg, t, plan=plan, active=active)
        x = res.x
        t = cfg.t_end if res.dt >= cfg.t_end - t else t + res.dt
        if res.event is not None:
            traj.events.append(Event(t, res.event.kind, res.event.detail))
        record_membership(t, x)
        if (
            cfg.stop_on_dwell
            and monitor is not None
            and inside_since is not None
            and t - inside_since >= dwell_req
        ):
            v_end, _, _ = plan_step(p, x, cfg, t, prev_lam)
            traj.times.append(t)
            traj.states.append(x.copy())
            traj.selections.append(v_end.velocity.copy())
            traj.sliding.append(tuple(sorted(v_end.sliding)))
            traj.dwell = t - inside_since
            traj.termination = Termination("Converged", monitor_id)
            return traj
    else:
        raise IntegrationError(f"step limit {cfg.max_steps} reached at t={t}")

    if traj.termination is None:
        traj.dwell = (t - inside_since) if inside_since is not None else 0.0
        if monitor is not None and inside_since is not None and traj.dwell >= dwell_req:
            traj.termination = Termination("Converged", monitor_id)
        else:
            traj.termination = Termination("Horizon")
    return traj
