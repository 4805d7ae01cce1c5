"""Poincare section at the flight apex, periodic-orbit shooting, Floquet data.

The section is the set of apex states (zero vertical velocity, descending)
reached in full flight after every leg has completed one touchdown and one
liftoff. Horizontal position is excluded from periodicity, so the section
state has 12 coordinates::

    u = [q_z, q_pitch, a_LH, a_LF, a_RF, a_RH,
         qd_x, qd_pitch, ad_LH, ad_LF, ad_RF, ad_RH]

A gait is a fixed point of the return map on this section; the shooting
system appends the total-energy equation and is solved by Gauss-Newton.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from . import _dynamics as dyn
from .hybrid import (DEFAULT_CONFIG, EventRecord, HybridIntegrationError,
                     HybridState, IntegratorConfig, StopCondition, Trajectory,
                     _run_hybrid, integrate_stride)
from .model import ContactMode, LegIndex, ModelParams

__all__ = [
    "SectionState", "OrbitSolution", "poincare_map", "shoot_orbit",
    "monodromy", "section_energy", "embed_section", "project_section",
    "InvalidSectionState", "NoReturnError", "ShootingError",
]

N_SECTION = 12

#: map from section coordinates to full-state slots
_SECTION_SLOTS = np.array([1, 2, 3, 4, 5, 6, 7, 9, 10, 11, 12, 13])


class InvalidSectionState(ValueError):
    """Section state does not embed to a valid flight configuration."""


class NoReturnError(HybridIntegrationError):
    """No valid section return found within the time horizon."""


class ShootingError(RuntimeError):
    """Newton shooting failed to converge to a periodic orbit."""


@dataclass(frozen=True)
class SectionState:
    """Apex-section coordinates (q_x excluded, qd_z = 0 implicit)."""

    values: tuple

    def __post_init__(self):
        if len(self.values) != N_SECTION:
            raise ValueError(f"section state needs {N_SECTION} coordinates")

    @classmethod
    def from_array(cls, u) -> "SectionState":
        return cls(tuple(float(v) for v in np.asarray(u, dtype=float)))

    def to_array(self) -> np.ndarray:
        return np.array(self.values, dtype=np.float64)

    @property
    def q_z(self):
        return self.values[0]

    @property
    def q_pitch(self):
        return self.values[1]

    @property
    def qd_x(self):
        return self.values[6]

    @property
    def qd_pitch(self):
        return self.values[7]


def embed_section(u: np.ndarray) -> np.ndarray:
    """Lift section coordinates to a full state with q_x = 0, qd_z = 0."""
    y = np.zeros(14)
    y[_SECTION_SLOTS] = u
    return y


def project_section(y: np.ndarray) -> np.ndarray:
    return np.asarray(y, dtype=float)[_SECTION_SLOTS].copy()


def _check_flight_state(params: ModelParams, y: np.ndarray,
                        require_clearance: bool = True) -> None:
    if y[1] <= 0.0:
        raise InvalidSectionState(f"q_z = {y[1]} is not above ground")
    if not require_clearance:
        # scuff-tolerant touchdown policy: swing feet may pass below
        # ground away from their touchdown
        return
    p = params.pack()
    for leg in range(4):
        _, fz = dyn.foot_position(y, p, leg, False, 0.0)
        if fz < -1e-9:
            raise InvalidSectionState(
                f"foot {LegIndex(leg).name} below ground at the section "
                f"(clearance {fz:.3e})")


def section_energy(params: ModelParams, u) -> float:
    """Total energy of the embedded (flight) section state."""
    u = np.asarray(u, dtype=float)
    y = embed_section(u)
    return float(dyn.energy(y, params.pack(), dyn.NO_STANCE,
                            dyn.ZERO_ANCHORS))


def _return_map_raw(params: ModelParams, u: np.ndarray, horizon: float,
                    config: IntegratorConfig):
    """Fast section-to-section map: (u_next, period, events)."""
    y = embed_section(u)
    _check_flight_state(params, y,
                        require_clearance=not config.td_descent_only)
    res = _run_hybrid(params, y, ContactMode.flight(), 0.0,
                      StopCondition.apex_return(horizon, strict=False),
                      config, collect=False)
    if res.stop_reason != "apex":
        raise NoReturnError(
            f"no section return within {horizon} time units "
            f"(stopped: {res.stop_reason})")
    return project_section(res.y), res.t, res.events


def poincare_map(params: ModelParams, x: SectionState | np.ndarray,
                 horizon: float = 50.0,
                 config: IntegratorConfig = DEFAULT_CONFIG
                 ) -> tuple[SectionState, float, Trajectory]:
    """Return-map image, elapsed period, and the connecting trajectory.

    Integrates until the next apex that occurs in full flight with the
    stride complete (each leg has touched down and lifted off exactly once).
    """
    u = x.to_array() if isinstance(x, SectionState) else np.asarray(x, float)
    y = embed_section(u)
    _check_flight_state(params, y,
                        require_clearance=not config.td_descent_only)
    traj = integrate_stride(params, HybridState.flight(y),
                            StopCondition.apex_return(horizon), config)
    if traj.stop_reason != "apex":
        raise NoReturnError(
            f"no section return within {horizon} time units "
            f"(stopped: {traj.stop_reason})")
    return (SectionState.from_array(project_section(traj.end_state)),
            float(traj.t_end), traj)


@dataclass(frozen=True)
class OrbitSolution:
    """A converged periodic gait anchored at the apex section."""

    section_state: SectionState
    period: float
    energy: float
    event_schedule: tuple  # EventRecords with stride-normalized times
    residual_norm: float
    params: ModelParams
    floquet: tuple | None = None  # complex multipliers
    label: object | None = None   # GaitLabel, set by the symmetry module

    def u(self) -> np.ndarray:
        return self.section_state.to_array()

    @property
    def qd_x(self) -> float:
        return self.section_state.qd_x

    @property
    def qd_pitch(self) -> float:
        return self.section_state.qd_pitch

    def with_label(self, label) -> "OrbitSolution":
        return replace(self, label=label)

    def with_floquet(self, multipliers) -> "OrbitSolution":
        return replace(self, floquet=tuple(complex(m) for m in multipliers))

    def to_dict(self) -> dict:
        d = {
            "section_state": [f"{v:.17g}" for v in self.section_state.values],
            "period": f"{self.period:.17g}",
            "energy": f"{self.energy:.17g}",
            "residual_norm": f"{self.residual_norm:.17g}",
            "com_from_hip": f"{self.params.com_from_hip:.17g}",
            "events": [
                {"leg": LegIndex(ev.leg).name, "kind": ev.kind,
                 "phase": f"{ev.time:.17g}",
                 "anchor_x": None if ev.anchor_x is None
                 else f"{ev.anchor_x:.17g}"}
                for ev in self.event_schedule
            ],
        }
        if self.floquet is not None:
            d["floquet"] = [[f"{m.real:.17g}", f"{m.imag:.17g}"]
                            for m in self.floquet]
        if self.label is not None:
            d["label"] = self.label.to_dict()
        return d

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2)
        if path is None:
            return text
        with open(path, "w") as fh:
            fh.write(text)
        return None

    @classmethod
    def from_dict(cls, d: dict, params: ModelParams | None = None
                  ) -> "OrbitSolution":
        from .symmetry import GaitLabel
        if params is None:
            params = ModelParams(com_from_hip=float(d["com_from_hip"]))
        events = tuple(
            EventRecord(LegIndex[ev["leg"]], ev["kind"], float(ev["phase"]),
                        None if ev.get("anchor_x") is None
                        else float(ev["anchor_x"]))
            for ev in d.get("events", ()))
        floquet = None
        if "floquet" in d:
            floquet = tuple(complex(float(re), float(im))
                            for re, im in d["floquet"])
        label = None
        if "label" in d:
            label = GaitLabel.from_dict(d["label"])
        return cls(
            section_state=SectionState.from_array(
                [float(v) for v in d["section_state"]]),
            period=float(d["period"]),
            energy=float(d["energy"]),
            event_schedule=events,
            residual_norm=float(d["residual_norm"]),
            params=params,
            floquet=floquet,
            label=label,
        )


def _normalized_events(events, period: float) -> tuple:
    return tuple(EventRecord(ev.leg, ev.kind, ev.time / period, ev.anchor_x)
                 for ev in events)


def shooting_residual(params: ModelParams, u: np.ndarray,
                      target_energy: float, horizon: float = 50.0,
                      config: IntegratorConfig = DEFAULT_CONFIG):
    """13-vector [P(u) - u; E(u) - E_target] plus (period, events)."""
    u_next, period, events = _return_map_raw(params, u, horizon, config)
    r = np.empty(13)
    r[:12] = u_next - u
    r[12] = section_energy(params, u) - target_energy
    return r, period, events


def shooting_jacobian(params: ModelParams, u: np.ndarray,
                      target_energy: float, fd_step: float = 1e-7,
                      horizon: float = 50.0,
                      config: IntegratorConfig = DEFAULT_CONFIG,
                      scheme: str = "central") -> np.ndarray:
    """Finite-difference Jacobian of the shooting residual, 13 x 12."""
    J = np.empty((13, 12))
    if scheme == "central":
        for j in range(12):
            h = fd_step * max(1.0, abs(u[j]))
            up = u.copy(); up[j] += h
            um = u.copy(); um[j] -= h
            rp, _, _ = shooting_residual(params, up, target_energy, horizon,
                                         config)
            rm, _, _ = shooting_residual(params, um, target_energy, horizon,
                                         config)
            J[:, j] = (rp - rm) / (2.0 * h)
    else:
        r0, _, _ = shooting_residual(params, u, target_energy, horizon,
                                     config)
        for j in range(12):
            h = fd_step * max(1.0, abs(u[j]))
            up = u.copy(); up[j] += h
            rp, _, _ = shooting_residual(params, up, target_energy, horizon,
                                         config)
            J[:, j] = (rp - r0) / h
    return J


def shoot_orbit(params: ModelParams, guess, target_energy: float,
                tol: float = 1e-10, max_iter: int = 50,
                min_period: float = 0.1, horizon: float = 50.0,
                config: IntegratorConfig = DEFAULT_CONFIG,
                fd_step: float = 1e-7,
                compute_floquet: bool = True) -> OrbitSolution:
    """Converge a periodic gait at the requested total energy.

    Gauss-Newton on the 13-equation shooting system in the 12 section
    unknowns (the system is rank-consistent because periodic orbits conserve
    energy). Converges when the residual 2-norm drops below ``tol`` or the
    step below 1e-12.
    """
    if isinstance(guess, SectionState):
        u = guess.to_array()
    else:
        u = np.array(guess, dtype=np.float64)

    r, period, events = shooting_residual(params, u, target_energy, horizon,
                                          config)
    rnorm = float(np.linalg.norm(r))
    for _ in range(max_iter):
        if rnorm < tol:
            break
        J = shooting_jacobian(params, u, target_energy, fd_step, horizon,
                              config)
        delta, *_ = np.linalg.lstsq(J, -r, rcond=None)
        if np.linalg.norm(delta) < 1e-12:
            break
        step = 1.0
        for _ls in range(8):
            u_try = u + step * delta
            try:
                r_try, period_try, events_try = shooting_residual(
                    params, u_try, target_energy, horizon, config)
            except (HybridIntegrationError, InvalidSectionState):
                step *= 0.5
                continue
            if np.linalg.norm(r_try) < rnorm or step < 0.02:
                u, r, period, events = u_try, r_try, period_try, events_try
                rnorm = float(np.linalg.norm(r))
                break
            step *= 0.5
        else:
            raise ShootingError(
                f"line search stalled at residual {rnorm:.3e}")
    if rnorm >= tol:
        raise ShootingError(
            f"no convergence after {max_iter} iterations "
            f"(residual {rnorm:.3e})")
    if period < min_period:
        raise ShootingError(
            f"degenerate orbit rejected (period {period:.3e} < {min_period})")

    orbit = OrbitSolution(
        section_state=SectionState.from_array(u),
        period=float(period),
        energy=section_energy(params, u),
        event_schedule=_normalized_events(events, period),
        residual_norm=rnorm,
        params=params,
    )
    if compute_floquet:
        _, multipliers = monodromy(params, orbit)
        orbit = orbit.with_floquet(multipliers)
    return orbit


def monodromy(params: ModelParams, orbit: OrbitSolution,
              fd_step: float = 1e-5,
              config: IntegratorConfig | None = None
              ) -> tuple[np.ndarray, np.ndarray]:
    """Linearized return map at the fixed point and its Floquet multipliers.

    Central differences at a tighter integrator tolerance than the shooting
    default, so the persistent unit multiplier of the conservative family is
    resolved to ~1e-7.
    """
    if config is None:
        config = DEFAULT_CONFIG.scaled(0.1)
    u0 = orbit.u()
    DP = np.empty((12, 12))
    for j in range(12):
        h = fd_step * max(1.0, abs(u0[j]))
        up = u0.copy(); up[j] += h
        um = u0.copy(); um[j] -= h
        fp, _, _ = _return_map_raw(params, up, 50.0, config)
        fm, _, _ = _return_map_raw(params, um, 50.0, config)
        DP[:, j] = (fp - fm) / (2.0 * h)
    multipliers = np.linalg.eigvals(DP)
    return DP, multipliers
