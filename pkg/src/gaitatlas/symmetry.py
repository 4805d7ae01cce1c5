"""Symmetry-group elements as executable operators, and gait classification.

Group elements combine a leg permutation (morphological), optional velocity
reversal (time-reversal), an optional heading flip (the planar yaw-pi
spatial map), and a horizontal translation. They act on full 14-float
states; composition and inverses are exact on the representation.

An orbit's fingerprint records which leg permutations fix the orbit and
whether the velocity-reversed image is again a trajectory of the same
model. Footfall classification buckets touchdown phases into beats and
names the gait (pronking, bounding, half-bounding, galloping variants).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .hybrid import (DEFAULT_CONFIG, HybridIntegrationError, HybridState,
                     IntegratorConfig, StopCondition, integrate_stride)
from .model import ContactMode, ModelParams
from .orbits import OrbitSolution, embed_section, _SECTION_SLOTS

__all__ = [
    "SymmetryElement", "GaitLabel", "apply_to_state", "apply_to_mode",
    "orbit_image_residual", "fingerprint", "classify", "classify_schedule",
    "IDENTITY_PERM", "SWAP_FRONT", "SWAP_HIND", "SWAP_BOTH",
    "PAIR_SWAP_PERMS", "ALL_PERMS", "canonical_section_images",
]

IDENTITY_PERM = (0, 1, 2, 3)
SWAP_FRONT = (0, 2, 1, 3)   # (LF RF)
SWAP_HIND = (3, 1, 2, 0)    # (LH RH)
SWAP_BOTH = (3, 2, 1, 0)    # (LF RF)(LH RH)
HIND_FRONT_SWAP = (1, 0, 3, 2)  # (LH LF)(RF RH)

#: left-right swaps are structurally valid for every COM placement
PAIR_SWAP_PERMS = (IDENTITY_PERM, SWAP_FRONT, SWAP_HIND, SWAP_BOTH)

ALL_PERMS = tuple(itertools.permutations(range(4)))

BIG_RESIDUAL = 1e3


@dataclass(frozen=True)
class SymmetryElement:
    """One group element acting as x_shift o spatial o reversal o permutation."""

    perm: tuple = IDENTITY_PERM
    time_reversal: bool = False
    spatial_flip: bool = False
    x_shift: float = 0.0

    def __post_init__(self):
        if sorted(self.perm) != [0, 1, 2, 3]:
            raise ValueError(f"not a leg permutation: {self.perm}")

    @classmethod
    def identity(cls) -> "SymmetryElement":
        return cls()

    @classmethod
    def permutation(cls, perm) -> "SymmetryElement":
        return cls(perm=tuple(perm))

    @classmethod
    def reversal(cls) -> "SymmetryElement":
        return cls(time_reversal=True)

    @classmethod
    def heading_flip(cls) -> "SymmetryElement":
        return cls(spatial_flip=True)

    @classmethod
    def translation(cls, dx: float) -> "SymmetryElement":
        return cls(x_shift=float(dx))

    def __mul__(self, other: "SymmetryElement") -> "SymmetryElement":
        """Composition: ``(g * h)`` applies ``h`` first, then ``g``."""
        perm = tuple(self.perm[other.perm[i]] for i in range(4))
        sign = -1.0 if self.spatial_flip else 1.0
        return SymmetryElement(
            perm=perm,
            time_reversal=self.time_reversal != other.time_reversal,
            spatial_flip=self.spatial_flip != other.spatial_flip,
            x_shift=self.x_shift + sign * other.x_shift,
        )

    def inverse(self) -> "SymmetryElement":
        inv = [0] * 4
        for i in range(4):
            inv[self.perm[i]] = i
        sign = -1.0 if self.spatial_flip else 1.0
        return SymmetryElement(
            perm=tuple(inv),
            time_reversal=self.time_reversal,
            spatial_flip=self.spatial_flip,
            x_shift=-sign * self.x_shift,
        )

    @property
    def is_identity(self) -> bool:
        return (self.perm == IDENTITY_PERM and not self.time_reversal
                and not self.spatial_flip and self.x_shift == 0.0)


def apply_to_state(g: SymmetryElement, state) -> np.ndarray:
    """Image of a full state (14 floats) under the group element."""
    from .model import _as_array
    y = _as_array(state).copy()
    out = y.copy()
    for i in range(4):
        out[3 + g.perm[i]] = y[3 + i]
        out[10 + g.perm[i]] = y[10 + i]
    if g.time_reversal:
        out[7:14] = -out[7:14]
    if g.spatial_flip:
        # heading reversal: negate everything but height and vertical rate
        out[0] = -out[0]
        out[2] = -out[2]
        out[3:7] = -out[3:7]
        out[7] = -out[7]
        out[9] = -out[9]
        out[10:14] = -out[10:14]
    out[0] += g.x_shift
    return out


def apply_to_mode(g: SymmetryElement, mode: ContactMode) -> ContactMode:
    """Image of a contact mode (stance flags and anchors) under the element."""
    stance = [False] * 4
    anchors = [0.0] * 4
    for i in range(4):
        stance[g.perm[i]] = mode.in_stance[i]
        anchors[g.perm[i]] = mode.foot_anchor_x[i]
    if g.spatial_flip:
        anchors = [-a for a in anchors]
    anchors = [a + g.x_shift for a in anchors]
    return ContactMode(tuple(stance), tuple(anchors))


def _sample_phases(params: ModelParams, y0: np.ndarray, period: float,
                   n_phase: int, config: IntegratorConfig) -> np.ndarray:
    grid = np.linspace(0.0, period, n_phase, endpoint=False)
    traj = integrate_stride(params, HybridState.flight(y0),
                            StopCondition.fixed_horizon(period), config,
                            t_grid=grid)
    if traj.grid_states is None or len(traj.grid_states) < n_phase:
        raise HybridIntegrationError("orbit sampling fell short")
    return traj.grid_states


def orbit_image_residual(params: ModelParams, g: SymmetryElement,
                         orbit: OrbitSolution, n_phase: int = 64,
                         config: IntegratorConfig = DEFAULT_CONFIG,
                         _ref_cache: dict | None = None) -> float:
    """How far the g-image of a gait is from being that same gait.

    The image of the section state is embedded and flowed for one period.
    For elements without time reversal the resulting trajectory is compared
    (max-norm over the 12 section-comparable coordinates, minimized over
    stride phase shift) against the original orbit. For time-reversing
    elements it is compared against the g-image of the original traversed
    backward, which is the trajectory the image must follow if the reversed
    motion is a gait of the same model.
    """
    u0 = orbit.u()
    T = orbit.period
    y0 = embed_section(u0)
    key = (id(orbit), n_phase)
    if _ref_cache is not None and key in _ref_cache:
        ref = _ref_cache[key]
    else:
        ref = _sample_phases(params, y0, T, n_phase, config)
        if _ref_cache is not None:
            _ref_cache[key] = ref

    gy0 = apply_to_state(g, y0)
    try:
        img = _sample_phases(params, gy0, T, n_phase, config)
    except HybridIntegrationError:
        return BIG_RESIDUAL

    sl = _SECTION_SLOTS
    if g.time_reversal:
        expected = np.empty_like(img)
        for k in range(n_phase):
            expected[k] = apply_to_state(g, ref[(n_phase - k) % n_phase])
        return float(np.max(np.abs(img[:, sl] - expected[:, sl])))
    best = math.inf
    for shift in range(n_phase):
        rolled = np.roll(ref[:, sl], -shift, axis=0)
        dist = float(np.max(np.abs(img[:, sl] - rolled)))
        if dist < best:
            best = dist
    return best


@dataclass(frozen=True)
class GaitLabel:
    """Gait name, beat count, and the symmetries the orbit retains."""

    label: str
    beats: int
    retained_sigma: tuple
    time_reversible: bool
    marginal: bool = False

    LABEL_BEATS = {"PF": 1, "BG": 2, "BE": 2, "HG": 3, "HE": 3,
                   "FG": 3, "FE": 3, "GG": 4, "GE": 4}

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "beats": self.beats,
            "retained_sigma": [list(p) for p in self.retained_sigma],
            "time_reversible": self.time_reversible,
            "marginal": self.marginal,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GaitLabel":
        return cls(
            label=d["label"], beats=int(d["beats"]),
            retained_sigma=tuple(tuple(p) for p in d["retained_sigma"]),
            time_reversible=bool(d["time_reversible"]),
            marginal=bool(d.get("marginal", False)),
        )


def fingerprint(params: ModelParams, orbit: OrbitSolution,
                threshold: float = 1e-6, marginal_below: float = 1e-3,
                n_phase: int = 64,
                config: IntegratorConfig = DEFAULT_CONFIG):
    """Retained leg permutations and time-reversibility of an orbit.

    Evaluates the image residual for all 24 leg permutations and for the
    velocity reversal; an element is retained below ``threshold``. Returns
    ``(retained_perms, time_reversible, marginal, residual_table)`` where
    the table maps a printable element name to its residual.
    """
    cache: dict = {}
    table: dict[str, float] = {}
    retained = []
    marginal = False
    for perm in ALL_PERMS:
        g = SymmetryElement.permutation(perm)
        r = orbit_image_residual(params, g, orbit, n_phase, config, cache)
        table["sigma" + str(perm)] = r
        if r < threshold:
            retained.append(perm)
        elif r < marginal_below:
            marginal = True
    g = SymmetryElement.reversal()
    r = orbit_image_residual(params, g, orbit, n_phase, config, cache)
    table["psi"] = r
    time_reversible = r < threshold
    if threshold <= r < marginal_below:
        marginal = True
    return tuple(retained), time_reversible, marginal, table


def _cluster_phases(phases: list[float], tol: float) -> list[list[int]]:
    """Group leg indices by touchdown phase within ``tol``."""
    order = sorted(range(len(phases)), key=lambda i: phases[i])
    clusters = [[order[0]]]
    for idx in order[1:]:
        if phases[idx] - phases[clusters[-1][-1]] <= tol:
            clusters[-1].append(idx)
        else:
            clusters.append([idx])
    return clusters


def classify_schedule(orbit: OrbitSolution, tol: float = 1e-6
                      ) -> tuple[str, int]:
    """Label a gait from its touchdown pattern alone (no simulations).

    Touchdown phases are clustered into beats; the label follows the beat
    count, which pair (if any) is synchronized, and whether the hind-side
    contact leads. Returns ``(label, beats)`` with ``"Unknown"`` when the
    pattern fits none of the nine gait families.
    """
    td_phase = {}
    for ev in orbit.event_schedule:
        if ev.kind == "touchdown":
            td_phase[int(ev.leg)] = ev.time % 1.0
    if len(td_phase) != 4:
        return "Unknown", len(set(td_phase.values()))
    phases = [td_phase[i] for i in range(4)]
    clusters = _cluster_phases(phases, tol)
    beats = len(clusters)
    hind_lead = (0.5 * (phases[0] + phases[3])
                 < 0.5 * (phases[1] + phases[2]))
    suffix = "G" if hind_lead else "E"

    if beats == 1:
        return "PF", 1
    cluster_sets = [frozenset(c) for c in clusters]
    hind = frozenset((0, 3))
    front = frozenset((1, 2))
    if beats == 2:
        if hind in cluster_sets and front in cluster_sets:
            return "B" + suffix, 2
        return "Unknown", 2
    if beats == 3:
        if hind in cluster_sets:
            sync = "hind"
        elif front in cluster_sets:
            sync = "front"
        else:
            return "Unknown", 3
        # letter names the pair whose left-right swap survives (the
        # synchronized, bound-like pair)
        letter = "H" if sync == "hind" else "F"
        return letter + suffix, 3
    if beats == 4:
        return "G" + suffix, 4
    return "Unknown", beats


_EXPECTED_SIGMA = {
    "PF": set(ALL_PERMS),
    "BG": set(PAIR_SWAP_PERMS),
    "BE": set(PAIR_SWAP_PERMS),
    "HG": {IDENTITY_PERM, SWAP_HIND},
    "HE": {IDENTITY_PERM, SWAP_HIND},
    "FG": {IDENTITY_PERM, SWAP_FRONT},
    "FE": {IDENTITY_PERM, SWAP_FRONT},
    "GG": {IDENTITY_PERM},
    "GE": {IDENTITY_PERM},
}


def classify(params: ModelParams, orbit: OrbitSolution,
             threshold: float = 1e-6, tol: float = 1e-6,
             n_phase: int = 64,
             config: IntegratorConfig = DEFAULT_CONFIG) -> GaitLabel:
    """Full gait label: footfall pattern cross-checked against symmetries.

    The footfall label's expected retained-permutation set must match the
    measured fingerprint, otherwise the orbit is labeled ``Unknown``.
    """
    label, beats = classify_schedule(orbit, tol)
    retained, time_rev, marginal, _ = fingerprint(
        params, orbit, threshold=threshold, n_phase=n_phase, config=config)
    if label != "Unknown":
        if _EXPECTED_SIGMA[label] != set(retained):
            label = "Unknown"
    return GaitLabel(label=label, beats=beats,
                     retained_sigma=tuple(retained),
                     time_reversible=time_rev, marginal=marginal)


def canonical_section_images(u: np.ndarray) -> list[np.ndarray]:
    """Images of a section state under the structural left-right swaps."""
    out = []
    y = embed_section(np.asarray(u, dtype=float))
    for perm in PAIR_SWAP_PERMS:
        g = SymmetryElement.permutation(perm)
        out.append(apply_to_state(g, y)[_SECTION_SLOTS])
    return out
