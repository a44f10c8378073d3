"""Hybrid simulation loop and trace metrics.

Flow is advanced by fixed-step classical RK4 with the step equal (by
default) to the noise-hold period, so the right-hand side is smooth
inside every step. The held output makes x + e invariant along flow, so
the control input is constant between transmissions; the only state with
nontrivial stage coupling is eta, and the stepper exploits that while
remaining classical RK4 on the full state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, is_weight_balanced, laplacian
from .hybrid import HybridState, HybridTime, JumpEvent, apply_jump
from .signals import ConstantSignal, NoiseSignal

__all__ = [
    "Scenario",
    "SolutionTrace",
    "JumpStormError",
    "simulate",
    "inter_event_stats",
    "lyapunov_series",
    "consensus_metrics",
    "zeno_indicator",
]

TRIGGER_TOL = 1e-12
REFINE_TOL = 1e-9
JUMPS_PER_INSTANT_FACTOR = 10


class JumpStormError(RuntimeError):
    """More jumps at one continuous time than the safety cap allows."""


@dataclass
class Scenario:
    """One simulation setup: plant interconnection, trigger scheme,
    noise, initial condition, and integration controls.

    ``feedback`` defaults to the graph Laplacian (consensus loop); the
    single-plant demo passes its own gain matrix and no graph.
    """

    scheme: object
    noise: NoiseSignal
    x0: np.ndarray
    graph: Graph | None = None
    feedback: np.ndarray | None = None
    e0: np.ndarray | None = None
    what_w0: np.ndarray | None = None
    eta0: np.ndarray | None = None
    tau0: np.ndarray | None = None
    t_final: float = 8.0
    step: float = 1e-4
    detection_refinement: bool = False
    disturbance: ConstantSignal | None = None
    decimation: int = 1
    trigger_tol: float = TRIGGER_TOL

    def __post_init__(self) -> None:
        n = self.scheme.n
        if self.feedback is None:
            if self.graph is None:
                raise ValueError("scenario needs a graph or an explicit feedback matrix")
            self.feedback = laplacian(self.graph)
        self.feedback = np.asarray(self.feedback, dtype=float)
        if self.feedback.shape != (n, n):
            raise ValueError(f"feedback shape {self.feedback.shape} != ({n},{n})")
        if self.step <= 0 or self.t_final <= 0:
            raise ValueError("step and t_final must be positive")
        if self.decimation < 1:
            raise ValueError("decimation must be a positive integer")
        if self.noise.n != n:
            raise ValueError(f"noise channel count {self.noise.n} != n={n}")
        self.x0 = np.asarray(self.x0, dtype=float)
        if self.x0.shape != (n,):
            raise ValueError(f"x0 shape {self.x0.shape} != ({n},)")
        if self.e0 is None:
            self.e0 = np.zeros(n)
        if self.what_w0 is None:
            self.what_w0 = self.noise.sample_vector(0.0)
        if self.eta0 is None:
            self.eta0 = np.zeros(n)
        if self.tau0 is None:
            self.tau0 = np.zeros(n)
        for name in ("e0", "what_w0", "eta0", "tau0"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (n,):
                raise ValueError(f"{name} shape {v.shape} != ({n},)")
            setattr(self, name, v)

    def initial_state(self) -> HybridState:
        return HybridState(
            self.x0.copy(), self.e0.copy(), self.what_w0.copy(),
            self.eta0.copy(), self.tau0.copy(),
        )


@dataclass
class SolutionTrace:
    """Recorded hybrid arc: samples on the hybrid time domain plus the
    full transmission log. Samples at event instants hold the post-jump
    state; pre-jump snapshots live in the events."""

    times: np.ndarray  # (m,) continuous time per sample
    jumps: np.ndarray  # (m,) jump counter per sample
    states: np.ndarray  # (m, 5n) rows: x, e, w_hat, eta, tau
    events: list[JumpEvent]
    run_manifest: dict
    n: int

    def state_at(self, k: int) -> HybridState:
        return HybridState.from_row(self.states[k])

    @property
    def x_series(self) -> np.ndarray:
        return self.states[:, : self.n]

    @property
    def final_state(self) -> HybridState:
        return self.state_at(len(self.times) - 1)


class _Recorder:
    """Growable sample buffer (events force off-grid rows)."""

    def __init__(self, n: int, capacity: int):
        self.t = np.empty(capacity)
        self.j = np.empty(capacity, dtype=np.int64)
        self.rows = np.empty((capacity, 5 * n))
        self.m = 0

    def push(self, t: float, j: int, state: HybridState) -> None:
        if self.m == self.t.shape[0]:
            cap = 2 * self.m
            self.t = np.resize(self.t, cap)
            self.j = np.resize(self.j, cap)
            self.rows = np.resize(self.rows, (cap, self.rows.shape[1]))
        self.t[self.m] = t
        self.j[self.m] = j
        self.rows[self.m, 0:] = state.as_row()
        self.m += 1


def _flow_advance(state: HybridState, u: np.ndarray, v: np.ndarray | None,
                  h: float, w: np.ndarray, scheme) -> None:
    """Advance the state in place by one flow interval of length h with
    frozen noise w. Classical RK4; x, e, tau have exactly linear flow so
    only eta needs stage evaluations."""
    xdot = u if v is None else u + v
    if scheme.mode == "dynamic":
        e_tilde0 = state.e + state.what_w - w
        half = 0.5 * h
        p1 = scheme.psi_vec(u=u, e_tilde=e_tilde0, tau=state.tau, y_tilde=state.x + w)
        # stages 2 and 3 share the midpoint inputs (u is stage-invariant)
        mid_et = e_tilde0 - half * xdot
        mid_y = state.x + half * xdot + w
        p2 = scheme.psi_vec(u=u, e_tilde=mid_et, tau=state.tau + half, y_tilde=mid_y)
        p4 = scheme.psi_vec(u=u, e_tilde=e_tilde0 - h * xdot, tau=state.tau + h,
                            y_tilde=state.x + h * xdot + w)
        eps = scheme.eps_eta
        eta = state.eta
        k1 = p1 - eps * eta
        k2 = p2 - eps * (eta + half * k1)
        k3 = p2 - eps * (eta + half * k2)
        k4 = p4 - eps * (eta + h * k3)
        eta += (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        # discrete detection lets eta undershoot slightly; project back
        np.maximum(eta, 0.0, out=eta)
    state.x += h * xdot
    state.e -= h * xdot
    state.tau += h


def _decisions(scheme, state: HybridState, u: np.ndarray, w: np.ndarray, tol: float) -> np.ndarray:
    # jump only once psi has left the flow set (<= -tol): at psi == 0
    # both flow and jump are admissible and the persistently flowing
    # solution is the one the guarantees speak about. eta is clamped
    # nonnegative, so its condition keeps the +tol side.
    e_tilde = state.e + state.what_w - w
    psi = scheme.psi_vec(u=u, e_tilde=e_tilde, tau=state.tau, y_tilde=state.x + w)
    if scheme.mode == "static":
        return psi <= -tol
    return (state.eta + scheme.theta * psi <= tol) & (psi <= -tol)


def simulate(s: Scenario) -> SolutionTrace:
    scheme = s.scheme
    n = scheme.n
    h = s.step
    fb = s.feedback
    steps = int(round(s.t_final / h))
    v = s.disturbance.sample_vector(0.0) if s.disturbance is not None else None

    n_windows = s.noise.window_index(s.t_final) + 2
    table = s.noise.window_table(n_windows)
    # noise window index at each step boundary
    k_win = np.floor(np.arange(steps + 1) * (h * s.noise.sample_rate) * (1 + 1e-12)).astype(np.int64)

    state = s.initial_state()
    rec = _Recorder(n, steps // s.decimation + 16)
    events: list[JumpEvent] = []
    last_event_t = [None] * n
    j = 0
    storm_cap = n * JUMPS_PER_INSTANT_FACTOR
    tol = s.trigger_tol

    def process_jumps_at(t: float, state: HybridState, w: np.ndarray) -> int:
        """Apply the jumps due at time t: one pass in ascending agent
        order, then one re-evaluation pass (a neighbor's transmission
        changes u and can newly enable a jump). Returns jumps applied."""
        nonlocal j
        u = -fb @ (state.x + state.e + state.what_w)
        if not _decisions(scheme, state, u, w, tol).any():
            return 0
        total = 0
        for _pass in range(2):
            applied = 0
            for i in range(n):
                u = -fb @ (state.x + state.e + state.what_w)
                e_tilde = state.e + state.what_w - w
                psi = scheme.psi_vec(u=u, e_tilde=e_tilde, tau=state.tau,
                                     y_tilde=state.x + w)
                if scheme.mode == "static":
                    due = psi[i] <= -tol
                else:
                    due = state.eta[i] + scheme.theta[i] * psi[i] <= tol and psi[i] <= -tol
                if not due:
                    continue
                pre = state.copy()
                post = apply_jump(state, i, w, scheme)
                state.e[:] = post.e
                state.what_w[:] = post.what_w
                state.eta[:] = post.eta
                state.tau[:] = post.tau
                j += 1
                gap = None if last_event_t[i] is None else t - last_event_t[i]
                last_event_t[i] = t
                events.append(JumpEvent(
                    time=HybridTime(t, j), agent=i, pre_state=pre,
                    post_state=state.copy(), psi_value=float(psi[i]),
                    inter_event_gap=gap,
                ))
                applied += 1
                total += 1
                if total > storm_cap:
                    raise JumpStormError(
                        f"{total} jumps at t={t:.6f} exceed the cap of {storm_cap}"
                    )
            if applied == 0:
                break
        return total

    # jumps may already be due at t=0
    w0 = table[:, k_win[0]]
    process_jumps_at(0.0, state, w0)
    rec.push(0.0, j, state)

    for k in range(steps):
        t_next = (k + 1) * h
        w_step = table[:, k_win[k]]
        w_next = table[:, k_win[k + 1]]
        u = -fb @ (state.x + state.e + state.what_w)

        if s.detection_refinement:
            due_next = _due_after(state, u, v, h, w_step, w_next, scheme, tol)
            if due_next:
                dt = _refine_instant(state, u, v, h, w_step, w_next, scheme, tol)
                t_jump = k * h + dt
                if dt > 0.0:
                    _flow_advance(state, u, v, dt, w_step, scheme)
                w_at = w_next if dt >= h else w_step
                applied = process_jumps_at(t_jump, state, w_at)
                if applied:
                    rec.push(t_jump, j, state)
                rest = h - dt
                if rest > 0.0:
                    u = -fb @ (state.x + state.e + state.what_w)
                    _flow_advance(state, u, v, rest, w_step, scheme)
            else:
                _flow_advance(state, u, v, h, w_step, scheme)
        else:
            _flow_advance(state, u, v, h, w_step, scheme)

        applied = process_jumps_at(t_next, state, w_next)
        if applied or (k + 1) % s.decimation == 0 or k + 1 == steps:
            rec.push(t_next, j, state)

    manifest = {
        "seed": s.noise.seed,
        "step": h,
        "t_final": s.t_final,
        "trigger_tol": tol,
        "detection_refinement": s.detection_refinement,
        "decimation": s.decimation,
        "scheme": type(scheme).__name__,
        "derived": scheme.derived_constants(),
        "event_count": len(events),
    }
    return SolutionTrace(
        times=rec.t[: rec.m].copy(),
        jumps=rec.j[: rec.m].copy(),
        states=rec.rows[: rec.m].copy(),
        events=events,
        run_manifest=manifest,
        n=n,
    )


def _due_after(state, u, v, dt, w_step, w_next, scheme, tol) -> bool:
    """Would any agent be due to jump after flowing dt (noise of the
    step for the interior, the next window exactly at the boundary)?"""
    probe = state.copy()
    if dt > 0.0:
        _flow_advance(probe, u, v, dt, w_step, scheme)
    u_p = u  # u is invariant along flow
    return bool(_decisions(scheme, probe, u_p, w_next, tol).any())


def _refine_instant(state, u, v, h, w_step, w_next, scheme, tol) -> float:
    """Bisect the earliest trigger crossing inside (t_k, t_k + h].

    The predicate uses the frozen step noise in the interior; only the
    right endpoint sees the next window. Returns the absolute offset
    from the step start; the caller adds it to the step-start time."""
    lo, hi = 0.0, h

    def due(dt: float, boundary: bool) -> bool:
        probe = state.copy()
        if dt > 0.0:
            _flow_advance(probe, u, v, dt, w_step, scheme)
        w = w_next if boundary else w_step
        return bool(_decisions(scheme, probe, u, w, tol).any())

    if due(0.0, boundary=False):
        return 0.0
    if not due(h, boundary=True):
        return h
    # the crossing may lie in the interior (same window) or exactly at
    # the boundary where the noise switches
    if not due(h, boundary=False):
        return h
    while hi - lo > REFINE_TOL:
        mid = 0.5 * (lo + hi)
        if due(mid, boundary=False):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# trace metrics


def inter_event_stats(trace: SolutionTrace) -> dict[int, dict]:
    """Per-agent {'min', 'mean', 'count'} over consecutive same-agent
    gaps; min/mean are None with fewer than two events."""
    out = {}
    for i in range(trace.n):
        gaps = [ev.inter_event_gap for ev in trace.events
                if ev.agent == i and ev.inter_event_gap is not None]
        count = sum(1 for ev in trace.events if ev.agent == i)
        out[i] = {
            "min": min(gaps) if gaps else None,
            "mean": (sum(gaps) / len(gaps)) if gaps else None,
            "count": count,
        }
    return out


def lyapunov_series(trace: SolutionTrace, scheme, feedback: np.ndarray | None = None):
    """(V, U) per sample plus per-event ΔU = U(post) - U(pre).

    V is the quadratic part alone; U is the scheme's full certificate.
    """
    m = len(trace.times)
    v_series = np.empty(m)
    u_series = np.empty(m)
    for k in range(m):
        st = trace.state_at(k)
        u_series[k] = scheme.storage(st)
        if feedback is not None:
            v_series[k] = 0.5 * st.x @ feedback @ st.x
        else:
            v_series[k] = u_series[k] - st.eta.sum()
    delta_u = np.array([
        scheme.storage(ev.post_state) - scheme.storage(ev.pre_state)
        for ev in trace.events
    ])
    return v_series, u_series, delta_u


def consensus_metrics(trace: SolutionTrace) -> dict:
    """Distance-to-agreement series and the final worst deviation from
    the initial mean."""
    x = trace.x_series
    mean0 = float(x[0].mean())
    dist = np.linalg.norm(x - x.mean(axis=1, keepdims=True), axis=1)
    final_dev = float(np.abs(x[-1] - mean0).max())
    return {
        "distance_series": dist,
        "final_max_deviation": final_dev,
        "initial_mean": mean0,
    }


def zeno_indicator(trace: SolutionTrace, window: float) -> dict[int, float | None]:
    """Per-agent minimum gap between consecutive events inside the
    trailing window; None with fewer than two events there."""
    t_final = float(trace.times[-1])
    t_lo = t_final - window
    out = {}
    for i in range(trace.n):
        times = [ev.time.t for ev in trace.events if ev.agent == i and ev.time.t >= t_lo]
        if len(times) < 2:
            out[i] = None
        else:
            out[i] = float(min(b - a for a, b in zip(times, times[1:])))
    return out
