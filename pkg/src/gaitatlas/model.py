"""Planar quadruped spring-mass model: parameters, kinematics, vector fields.

The torso is a rigid body (mass ``M``, pitch inertia ``I``) moving in the
sagittal plane with four massless springy legs. Hind legs (LH, RH) attach at
the hip, front legs (LF, RF) at the shoulder. All quantities are
dimensionless: lengths in rest leg lengths, masses in total system mass,
time in sqrt(l/g).

State layout used throughout (14 floats)::

    [q_x, q_z, q_pitch, a_LH, a_LF, a_RF, a_RH,
     qd_x, qd_z, qd_pitch, ad_LH, ad_LF, ad_RF, ad_RH]

Leg angles are measured from the torso-down normal, positive toward the
front, so a leg hangs along ``(sin(a + pitch), -cos(a + pitch))`` in world
coordinates.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _dynamics as dyn

__all__ = [
    "LegIndex",
    "ModelParams",
    "ContinuousState",
    "ContactMode",
    "DegenerateGeometryError",
    "joint_position",
    "stance_leg_geometry",
    "flight_field",
    "stance_field",
    "total_energy",
    "flight_closed_form",
]

N_STATE = 14
N_LEGS = 4


class LegIndex(enum.IntEnum):
    """Fixed leg ordering (left hind, left front, right front, right hind)."""

    LH = 0
    LF = 1
    RF = 2
    RH = 3


#: Legs attached at the hip joint (hind pair) and shoulder joint (front pair).
HIND_LEGS = (LegIndex.LH, LegIndex.RH)
FRONT_LEGS = (LegIndex.LF, LegIndex.RF)


class DegenerateGeometryError(ValueError):
    """Stance geometry is invalid (joint at/below ground or leg near horizontal)."""


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless physical parameters of the quadruped.

    Defaults correspond to the symmetric reference model: unit torso mass,
    pitch inertia 2, leg stiffness 10, swing frequency 20, torso length equal
    to the rest leg length, and the COM midway between hip and shoulder.
    """

    torso_mass: float = 1.0
    pitch_inertia: float = 2.0
    leg_stiffness: float = 10.0
    swing_frequency: float = 20.0
    rest_leg_length: float = 1.0
    torso_length: float = 1.0
    com_from_hip: float = 0.5
    gravity: float = 1.0
    swing_neutral: float = 0.0

    def __post_init__(self) -> None:
        for name in ("torso_mass", "pitch_inertia", "leg_stiffness",
                     "swing_frequency", "rest_leg_length", "torso_length",
                     "gravity"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if not 0.0 < self.com_from_hip < 1.0:
            raise ValueError("com_from_hip must lie in (0, 1)")

    @property
    def com_from_shoulder(self) -> float:
        return self.torso_length - self.com_from_hip

    @property
    def hind_offset(self) -> float:
        """Signed body-axis offset of the hip joint from the COM."""
        return -self.com_from_hip

    @property
    def front_offset(self) -> float:
        """Signed body-axis offset of the shoulder joint from the COM."""
        return +self.com_from_shoulder

    def leg_offset(self, leg: int) -> float:
        return self.hind_offset if leg in (0, 3) else self.front_offset

    def pack(self) -> np.ndarray:
        """Pack into the flat parameter vector consumed by the kernels."""
        return np.array(
            [
                self.torso_mass,
                self.pitch_inertia,
                self.leg_stiffness,
                self.swing_frequency ** 2,
                self.rest_leg_length,
                self.hind_offset,
                self.front_offset,
                self.gravity,
                self.swing_neutral,
            ],
            dtype=np.float64,
        )

    def with_com_from_hip(self, value: float) -> "ModelParams":
        return replace(self, com_from_hip=float(value))

    # -- plain-text config round trip ------------------------------------

    _CONFIG_KEYS = (
        "torso_mass", "pitch_inertia", "leg_stiffness", "swing_frequency",
        "rest_leg_length", "torso_length", "com_from_hip", "gravity",
        "swing_neutral",
    )

    def to_config_text(self) -> str:
        """Serialize as ``key = value`` lines (dimensionless units)."""
        lines = ["# quadruped model parameters (dimensionless)"]
        for key in self._CONFIG_KEYS:
            lines.append(f"{key} = {getattr(self, key)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_config_text(cls, text: str) -> "ModelParams":
        values = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"malformed config line: {raw!r}")
            key, _, val = line.partition("=")
            key = key.strip()
            if key not in cls._CONFIG_KEYS:
                raise ValueError(f"unknown model parameter: {key}")
            values[key] = float(val.strip())
        return cls(**values)


@dataclass(frozen=True)
class ContinuousState:
    """Continuous configuration and velocity of the torso and legs."""

    q_x: float
    q_z: float
    q_pitch: float
    alpha: tuple[float, float, float, float]
    qd_x: float
    qd_z: float
    qd_pitch: float
    alphad: tuple[float, float, float, float]

    def __post_init__(self) -> None:
        if not all(map(math.isfinite, self.to_array())):
            raise ValueError("state entries must be finite")

    def to_array(self) -> np.ndarray:
        return np.array(
            [self.q_x, self.q_z, self.q_pitch, *self.alpha,
             self.qd_x, self.qd_z, self.qd_pitch, *self.alphad],
            dtype=np.float64,
        )

    @classmethod
    def from_array(cls, y: np.ndarray) -> "ContinuousState":
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (N_STATE,):
            raise ValueError(f"state vector must have shape ({N_STATE},)")
        return cls(
            q_x=float(y[0]), q_z=float(y[1]), q_pitch=float(y[2]),
            alpha=tuple(float(v) for v in y[3:7]),
            qd_x=float(y[7]), qd_z=float(y[8]), qd_pitch=float(y[9]),
            alphad=tuple(float(v) for v in y[10:14]),
        )


@dataclass(frozen=True)
class ContactMode:
    """Which legs are in stance, and where their feet are anchored."""

    in_stance: tuple[bool, bool, bool, bool] = (False, False, False, False)
    foot_anchor_x: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    @classmethod
    def flight(cls) -> "ContactMode":
        return cls()

    @property
    def is_flight(self) -> bool:
        return not any(self.in_stance)

    def stance_legs(self) -> tuple[LegIndex, ...]:
        return tuple(LegIndex(i) for i in range(N_LEGS) if self.in_stance[i])

    def stance_mask(self) -> np.ndarray:
        return np.array(self.in_stance, dtype=np.uint8)

    def anchors(self) -> np.ndarray:
        return np.array(self.foot_anchor_x, dtype=np.float64)

    def with_touchdown(self, leg: int, anchor_x: float) -> "ContactMode":
        stance = list(self.in_stance)
        anchors = list(self.foot_anchor_x)
        stance[leg] = True
        anchors[leg] = float(anchor_x)
        return ContactMode(tuple(stance), tuple(anchors))

    def with_liftoff(self, leg: int) -> "ContactMode":
        stance = list(self.in_stance)
        stance[leg] = False
        return ContactMode(tuple(stance), self.foot_anchor_x)


def _as_array(state) -> np.ndarray:
    if isinstance(state, ContinuousState):
        return state.to_array()
    y = np.asarray(state, dtype=np.float64)
    if y.shape != (N_STATE,):
        raise ValueError(f"state vector must have shape ({N_STATE},)")
    return y


def joint_position(params: ModelParams, state, side: str) -> tuple[float, float]:
    """World position of the hip (``side='hind'``) or shoulder (``'front'``).

    The hind joint sits at signed offset ``-com_from_hip`` along the body
    axis, the front joint at ``+com_from_shoulder``.
    """
    y = _as_array(state)
    side_l = side.lower()
    if side_l in ("hind", "h", "hip"):
        s = params.hind_offset
    elif side_l in ("front", "f", "shoulder"):
        s = params.front_offset
    else:
        raise ValueError(f"side must be 'hind' or 'front', got {side!r}")
    return (y[0] + s * math.cos(y[2]), y[1] + s * math.sin(y[2]))


def stance_leg_geometry(params: ModelParams, state, leg: int,
                        anchor_x: float) -> tuple[float, float, float, float]:
    """Length, angle, and their rates for a stance leg pinned at ``anchor_x``.

    Returns ``(l, alpha, ldot, alphadot)`` satisfying the contact constraint
    (foot fixed on the ground plane) for the current torso pose and velocity.

    Raises
    ------
    DegenerateGeometryError
        If the joint is at or below the ground, or the leg is within
        ~0.2 rad of horizontal.
    """
    y = _as_array(state)
    out = np.empty(4, dtype=np.float64)
    ok = dyn.leg_geometry(y, params.pack(), int(leg), float(anchor_x), out)
    if not ok:
        raise DegenerateGeometryError(
            f"degenerate stance geometry for leg {LegIndex(leg).name}: "
            f"joint height or leg angle out of range"
        )
    return float(out[0]), float(out[1]), float(out[2]), float(out[3])


def flight_field(params: ModelParams, state) -> np.ndarray:
    """Time derivative of the state in full flight.

    Torso in free fall; each leg held at rest length swings as a torsional
    oscillator about the neutral angle.
    """
    y = _as_array(state)
    out = np.empty(N_STATE, dtype=np.float64)
    dyn.rhs(y, params.pack(), dyn.NO_STANCE, dyn.ZERO_ANCHORS, out)
    return out


def stance_field(params: ModelParams, state, mode: ContactMode
                 ) -> tuple[np.ndarray, dict[LegIndex, tuple[float, float]]]:
    """Time derivative and world-frame leg forces with the given contact set.

    Each stance leg pushes on its joint with an axial spring force of
    magnitude ``k * (1 - l)`` directed from the foot anchor to the joint.
    Swing legs follow the flight oscillator. Stance-leg angle rates come from
    differentiating the contact constraint.
    """
    if mode.is_flight:
        return flight_field(params, state), {}
    y = _as_array(state)
    p = params.pack()
    stance = mode.stance_mask()
    anchors = mode.anchors()
    for leg in mode.stance_legs():
        # validate geometry up front so degeneracy raises rather than NaNs
        stance_leg_geometry(params, y, leg, anchors[leg])
    out = np.empty(N_STATE, dtype=np.float64)
    lam = np.zeros((N_LEGS, 2), dtype=np.float64)
    dyn.rhs_forces(y, p, stance, anchors, out, lam)
    forces = {leg: (float(lam[leg, 0]), float(lam[leg, 1]))
              for leg in mode.stance_legs()}
    return out, forces


def total_energy(params: ModelParams, state, mode: ContactMode | None = None
                 ) -> float:
    """Total mechanical energy: kinetic + gravitational + axial spring.

    The swing oscillators are kinematic steering devices for massless legs
    and carry no energy, so their potential is excluded.
    """
    y = _as_array(state)
    if mode is None:
        mode = ContactMode.flight()
    for leg in mode.stance_legs():
        stance_leg_geometry(params, y, leg, mode.foot_anchor_x[leg])
    return float(dyn.energy(y, params.pack(), mode.stance_mask(),
                            mode.anchors()))


def flight_closed_form(params: ModelParams, state, t: float) -> np.ndarray:
    """Analytic flight solution: ballistic torso plus harmonic leg swing."""
    y0 = _as_array(state)
    y = np.empty_like(y0)
    g = params.gravity
    w = params.swing_frequency
    an = params.swing_neutral
    y[0] = y0[0] + y0[7] * t
    y[1] = y0[1] + y0[8] * t - 0.5 * g * t * t
    y[2] = y0[2] + y0[9] * t
    y[7] = y0[7]
    y[8] = y0[8] - g * t
    y[9] = y0[9]
    c, s = math.cos(w * t), math.sin(w * t)
    for i in range(N_LEGS):
        a0 = y0[3 + i] - an
        ad0 = y0[10 + i]
        y[3 + i] = an + a0 * c + (ad0 / w) * s
        y[10 + i] = -a0 * w * s + ad0 * c
    return y
