"""Event-driven integration of the hybrid gait automaton.

A stride alternates flight and stance domains; touchdown and liftoff guards
are localized on the integrator's dense output and applied as instantaneous,
energy-conserving resets (massless legs carry no impact impulse).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _dynamics as dyn
from . import _kernel as kern
from .model import (ContactMode, ContinuousState, DegenerateGeometryError,
                    LegIndex, ModelParams, N_LEGS, N_STATE)

__all__ = [
    "HybridState", "EventRecord", "Trajectory", "StopCondition",
    "IntegratorConfig", "touchdown_guard", "liftoff_guard",
    "apply_transition", "integrate_stride",
    "HybridIntegrationError", "ZenoError", "OrderingViolationError",
    "FallError", "StepUnderflowError", "InconsistentGuardError",
]

TOUCHDOWN = "touchdown"
LIFTOFF = "liftoff"


class HybridIntegrationError(RuntimeError):
    """Base class for failures while integrating the hybrid system."""


class ZenoError(HybridIntegrationError):
    pass


class OrderingViolationError(HybridIntegrationError):
    pass


class FallError(HybridIntegrationError):
    pass


class StepUnderflowError(HybridIntegrationError):
    pass


class InconsistentGuardError(HybridIntegrationError):
    pass


@dataclass(frozen=True)
class HybridState:
    continuous: ContinuousState
    mode: ContactMode
    time: float = 0.0

    @classmethod
    def flight(cls, state, time: float = 0.0) -> "HybridState":
        if not isinstance(state, ContinuousState):
            state = ContinuousState.from_array(np.asarray(state, dtype=float))
        return cls(state, ContactMode.flight(), time)


@dataclass(frozen=True)
class EventRecord:
    leg: LegIndex
    kind: str  # "touchdown" | "liftoff"
    time: float
    anchor_x: float | None = None

    def to_dict(self) -> dict:
        return {
            "leg": LegIndex(self.leg).name,
            "kind": self.kind,
            "time": self.time,
            "anchor_x": self.anchor_x,
        }


@dataclass(frozen=True)
class StopCondition:
    """When to stop a hybrid run.

    ``apex_return`` stops at the first vertical-velocity apex that occurs in
    full flight after every leg has completed one touchdown and one liftoff;
    ``fixed_horizon`` runs for a duration; ``event_count`` stops once the
    given number of leg events has been recorded.
    """

    kind: str
    horizon: float = 50.0
    max_events: int = 0
    #: enforce the one-touchdown-one-liftoff-per-stride rule; the orbit
    #: machinery relaxes this so Newton probes far from a gait stay usable
    strict: bool = True

    @classmethod
    def apex_return(cls, horizon: float = 50.0,
                    strict: bool = True) -> "StopCondition":
        return cls("apex", horizon=horizon, strict=strict)

    @classmethod
    def apex_any(cls, horizon: float = 50.0) -> "StopCondition":
        """Stop at the first full-flight apex, stride-complete or not."""
        return cls("apex_free", horizon=horizon, strict=False)

    @classmethod
    def fixed_horizon(cls, duration: float) -> "StopCondition":
        return cls("horizon", horizon=duration)

    @classmethod
    def event_count(cls, n: int, horizon: float = 50.0) -> "StopCondition":
        return cls("events", horizon=horizon, max_events=n)


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-11
    atol: float = 1e-11
    h_max: float = 0.08
    h_init: float = 1e-4
    n_sub: int = 8
    simultaneity_tol: float = 1e-9
    guard_tol: float = 1e-7
    zeno_events: int = 16
    zeno_window: float = 1.5
    sample_cap: int = 200_000
    #: when True, a swing foot crossing the ground while the torso still
    #: rises does not trigger touchdown (the leg scuffs through); gait
    #: families are only connected across speeds with this policy
    td_descent_only: bool = True

    def scaled(self, factor: float) -> "IntegratorConfig":
        from dataclasses import replace
        return replace(self, rtol=self.rtol * factor, atol=self.atol * factor)

    def supervised(self) -> "IntegratorConfig":
        """Strict policy: every guard crossing fires, scuffs included."""
        from dataclasses import replace
        return replace(self, td_descent_only=False)


DEFAULT_CONFIG = IntegratorConfig()


@dataclass
class Trajectory:
    """Sampled hybrid trajectory with its event schedule."""

    times: np.ndarray
    states: np.ndarray
    mode_index: np.ndarray
    modes: list[ContactMode]
    events: list[EventRecord]
    t_start: float
    t_end: float
    stop_reason: str
    params: ModelParams
    grid_times: np.ndarray | None = None
    grid_states: np.ndarray | None = None

    @property
    def end_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def end_mode(self) -> ContactMode:
        return self.modes[self.mode_index[-1]]

    def energies(self) -> np.ndarray:
        out = np.empty(len(self.times))
        p = self.params.pack()
        for i, (y, mi) in enumerate(zip(self.states, self.mode_index)):
            m = self.modes[mi]
            out[i] = dyn.energy(y, p, m.stance_mask(), m.anchors())
        return out

    def max_energy_drift(self) -> float:
        e = self.energies()
        return float(np.max(np.abs(e - e[0])) / max(abs(e[0]), 1e-30))

    def to_csv(self, path) -> None:
        cols = ["time", "q_x", "q_z", "q_pitch",
                "a_LH", "a_LF", "a_RF", "a_RH",
                "qd_x", "qd_z", "qd_pitch",
                "ad_LH", "ad_LF", "ad_RF", "ad_RH",
                "c_LH", "c_LF", "c_RF", "c_RH"]
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for t, y, mi in zip(self.times, self.states, self.mode_index):
                mode = self.modes[mi]
                row = [f"{t:.17g}"] + [f"{v:.17g}" for v in y]
                row += [str(int(f)) for f in mode.in_stance]
                fh.write(",".join(row) + "\n")

    def events_to_json(self, path=None):
        payload = {
            "t_start": self.t_start,
            "t_end": self.t_end,
            "stop_reason": self.stop_reason,
            "events": [ev.to_dict() for ev in self.events],
        }
        text = json.dumps(payload, indent=2)
        if path is None:
            return text
        with open(path, "w") as fh:
            fh.write(text)
        return None


def touchdown_guard(params: ModelParams, state: HybridState, leg: int) -> float:
    """Signed foot clearance of a swing leg (event at a down-crossing)."""
    if state.mode.in_stance[leg]:
        raise ValueError(f"leg {LegIndex(leg).name} is not in swing")
    y = state.continuous.to_array()
    g = np.empty(9)
    dyn.guard_values(y, params.pack(), state.mode.stance_mask(),
                     state.mode.anchors(), g)
    return float(g[leg])


def liftoff_guard(params: ModelParams, state: HybridState, leg: int) -> float:
    """Signed leg extension ``l - l_o`` of a stance leg (event at up-crossing)."""
    if not state.mode.in_stance[leg]:
        raise ValueError(f"leg {LegIndex(leg).name} is not in stance")
    # raises DegenerateGeometryError on invalid geometry
    from .model import stance_leg_geometry
    l, _, _, _ = stance_leg_geometry(params, state.continuous, leg,
                                     state.mode.foot_anchor_x[leg])
    return float(l - params.rest_leg_length)


def _apply_event_group(y: np.ndarray, stance: np.ndarray, anchors: np.ndarray,
                       p: np.ndarray, td_legs, lo_legs, guard_tol: float) -> None:
    """Apply simultaneous touchdowns/liftoffs in place."""
    geo = np.empty(4)
    for leg in lo_legs:
        if not stance[leg]:
            raise InconsistentGuardError(f"liftoff of swing leg {leg}")
        ok = dyn.leg_geometry(y, p, leg, anchors[leg], geo)
        if not ok:
            raise FallError(f"degenerate geometry at liftoff of leg {leg}")
        if abs(geo[0] - p[dyn.P_LO]) > guard_tol:
            raise InconsistentGuardError(
                f"liftoff guard residual {geo[0] - p[dyn.P_LO]:.3e}")
        y[3 + leg] = geo[1]
        y[10 + leg] = geo[3]
        stance[leg] = 0
    for leg in td_legs:
        if stance[leg]:
            raise InconsistentGuardError(f"touchdown of stance leg {leg}")
        fx, fz = dyn.foot_position(y, p, leg, False, 0.0)
        if abs(fz) > guard_tol:
            raise InconsistentGuardError(
                f"touchdown guard residual {fz:.3e}")
        anchors[leg] = fx
        stance[leg] = 1
        ok = dyn.leg_geometry(y, p, leg, fx, geo)
        if not ok:
            raise FallError(f"degenerate geometry at touchdown of leg {leg}")
        y[3 + leg] = geo[1]
        y[10 + leg] = geo[3]


def apply_transition(params: ModelParams, state: HybridState,
                     event: EventRecord) -> HybridState:
    """Apply a single touchdown or liftoff reset to a hybrid state."""
    y = state.continuous.to_array()
    stance = state.mode.stance_mask()
    anchors = state.mode.anchors()
    p = params.pack()
    cfg = DEFAULT_CONFIG
    if event.kind == TOUCHDOWN:
        _apply_event_group(y, stance, anchors, p, [int(event.leg)], [],
                           cfg.guard_tol)
    elif event.kind == LIFTOFF:
        _apply_event_group(y, stance, anchors, p, [], [int(event.leg)],
                           cfg.guard_tol)
    else:
        raise ValueError(f"unknown event kind {event.kind!r}")
    mode = ContactMode(tuple(bool(s) for s in stance),
                       tuple(float(a) for a in anchors))
    return HybridState(ContinuousState.from_array(y), mode, event.time)


@dataclass
class _RunResult:
    y: np.ndarray
    t: float
    stance: np.ndarray
    anchors: np.ndarray
    events: list
    stop_reason: str
    samples_t: np.ndarray | None = None
    samples_y: np.ndarray | None = None
    seg_bounds: list | None = None  # list of (n_samples, stance tuple, anchors tuple)
    grid_y: np.ndarray | None = None
    grid_filled: int = 0


_EMPTY_T = np.empty(0, dtype=np.float64)
_EMPTY_Y = np.empty((0, N_STATE), dtype=np.float64)


def _run_hybrid(params: ModelParams, y0: np.ndarray, mode: ContactMode,
                t0: float, stop: StopCondition, config: IntegratorConfig,
                collect: bool, t_grid: np.ndarray | None = None) -> _RunResult:
    p = params.pack()
    y = np.array(y0, dtype=np.float64)
    stance = mode.stance_mask().copy()
    anchors = mode.anchors().copy()
    t = float(t0)
    t_limit = t0 + stop.horizon

    if collect:
        samp_t = np.empty(config.sample_cap, dtype=np.float64)
        samp_y = np.empty((config.sample_cap, N_STATE), dtype=np.float64)
    else:
        samp_t, samp_y = _EMPTY_T, _EMPTY_Y
    n_fill = 0
    seg_bounds = []

    if t_grid is None:
        grid_t = _EMPTY_T
        grid_y = _EMPTY_Y
    else:
        grid_t = np.asarray(t_grid, dtype=np.float64)
        grid_y = np.empty((len(grid_t), N_STATE), dtype=np.float64)
    grid_fill = np.zeros(1, dtype=np.int64)
    # grid points at/before the start evaluate to the initial state
    while grid_fill[0] < len(grid_t) and grid_t[grid_fill[0]] <= t:
        grid_y[grid_fill[0]] = y
        grid_fill[0] += 1

    td_count = [0] * N_LEGS
    lo_count = [0] * N_LEGS
    events: list[EventRecord] = []
    event_times: list[float] = []
    h = config.h_init

    active = np.zeros(9, dtype=np.uint8)
    direction = np.zeros(9, dtype=np.float64)
    ev_mask = np.zeros(9, dtype=np.uint8)
    ev_time = np.zeros(9, dtype=np.float64)

    stop_reason = None
    while True:
        flight = not stance.any()
        complete = (all(c >= 1 for c in td_count)
                    and all(c >= 1 for c in lo_count))
        for leg in range(N_LEGS):
            active[leg] = 1
            direction[leg] = 1.0 if stance[leg] else -1.0
        if stop.kind == "apex":
            watch_apex = flight and complete
        elif stop.kind == "apex_free":
            watch_apex = flight
        else:
            watch_apex = False
        active[kern.APEX] = 1 if watch_apex else 0
        direction[kern.APEX] = -1.0

        off = n_fill
        status, t_end, h, n_new = kern.integrate_domain(
            y, t, t_limit, p, stance, anchors,
            config.rtol, config.atol, h, config.h_max,
            active, direction, config.simultaneity_tol, config.n_sub,
            samp_t[off:], samp_y[off:], grid_t, grid_y, grid_fill,
            ev_mask, ev_time, config.td_descent_only)
        if collect:
            n_fill = off + n_new
            seg_bounds.append((n_fill, tuple(bool(s) for s in stance),
                               tuple(float(a) for a in anchors)))
        t = t_end

        if status == kern.FAIL_INVALID:
            raise FallError(f"fall or degenerate geometry at t = {t:.6f}")
        if status == kern.FAIL_UNDERFLOW:
            raise StepUnderflowError(f"step size underflow at t = {t:.6f}")
        if status in (kern.FAIL_BUFFER, kern.FAIL_STEPS):
            raise HybridIntegrationError(
                f"integration resource limit exceeded at t = {t:.6f}")

        if status == kern.OK_LIMIT:
            stop_reason = "horizon"
            break

        # event set
        if ev_mask[kern.APEX]:
            stop_reason = "apex"
            break

        td_legs = [i for i in range(N_LEGS) if ev_mask[i] and not stance[i]]
        lo_legs = [i for i in range(N_LEGS) if ev_mask[i] and stance[i]]
        for leg in lo_legs:
            events.append(EventRecord(LegIndex(leg), LIFTOFF,
                                      float(ev_time[leg])))
            lo_count[leg] += 1
            event_times.append(float(ev_time[leg]))
        _apply_event_group(y, stance, anchors, p, td_legs, lo_legs,
                           config.guard_tol)
        for leg in td_legs:
            events.append(EventRecord(LegIndex(leg), TOUCHDOWN,
                                      float(ev_time[leg]),
                                      float(anchors[leg])))
            td_count[leg] += 1
            event_times.append(float(ev_time[leg]))

        if stop.kind == "apex" and stop.strict:
            for leg in range(N_LEGS):
                if td_count[leg] > 1 or lo_count[leg] > 1:
                    raise OrderingViolationError(
                        f"leg {LegIndex(leg).name} exceeded one touchdown and "
                        f"one liftoff in a single stride")
        if (len(event_times) >= config.zeno_events
                and t - event_times[-config.zeno_events] < config.zeno_window):
            raise ZenoError(
                f"{config.zeno_events} events within "
                f"{config.zeno_window} time units at t = {t:.6f}")
        if stop.kind == "events" and len(events) >= stop.max_events:
            stop_reason = "events"
            break

    return _RunResult(
        y=y, t=t, stance=stance, anchors=anchors, events=events,
        stop_reason=stop_reason,
        samples_t=samp_t[:n_fill] if collect else None,
        samples_y=samp_y[:n_fill] if collect else None,
        seg_bounds=seg_bounds if collect else None,
        grid_y=grid_y if t_grid is not None else None,
        grid_filled=int(grid_fill[0]),
        )


def integrate_stride(params: ModelParams, initial: HybridState,
                     stop: StopCondition,
                     config: IntegratorConfig = DEFAULT_CONFIG,
                     t_grid=None) -> Trajectory:
    """Integrate the hybrid system from ``initial`` until ``stop`` is met.

    Returns a :class:`Trajectory` sampled at the integrator's accepted steps
    (plus optional dense samples at ``t_grid``), with the event schedule.
    """
    y0 = initial.continuous.to_array()
    res = _run_hybrid(params, y0, initial.mode, initial.time, stop, config,
                      collect=True,
                      t_grid=None if t_grid is None else np.asarray(t_grid))

    n = len(res.samples_t) + 1
    times = np.empty(n)
    states = np.empty((n, N_STATE))
    mode_index = np.empty(n, dtype=np.int64)
    times[0] = initial.time
    states[0] = y0
    modes = [initial.mode]
    mode_index[0] = 0
    pos = 1
    prev = 0
    for count, stance_t, anchors_t in res.seg_bounds:
        m = ContactMode(stance_t, anchors_t)
        if m != modes[-1]:
            modes.append(m)
        mi = len(modes) - 1
        k = count - prev
        times[pos:pos + k] = res.samples_t[prev:count]
        states[pos:pos + k] = res.samples_y[prev:count]
        mode_index[pos:pos + k] = mi
        pos += k
        prev = count

    traj = Trajectory(
        times=times[:pos], states=states[:pos], mode_index=mode_index[:pos],
        modes=modes, events=res.events, t_start=initial.time, t_end=res.t,
        stop_reason=res.stop_reason, params=params)
    if t_grid is not None:
        traj.grid_times = np.asarray(t_grid, dtype=float)[:res.grid_filled]
        traj.grid_states = res.grid_y[:res.grid_filled]
    return traj
