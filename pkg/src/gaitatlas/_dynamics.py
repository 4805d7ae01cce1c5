"""Compiled primitives for the quadruped dynamics.

All functions operate on the flat 14-float state vector and the packed
parameter vector (see :mod:`gaitatlas.model`). They are the single source of
truth for the vector fields; the public API and the integration kernel both
call them.
"""

import math

import numpy as np
from numba import njit

# slots of the packed parameter vector
P_M, P_I, P_K, P_W2, P_LO, P_SH, P_SF, P_G, P_AN = range(9)

NO_STANCE = np.zeros(4, dtype=np.uint8)
ZERO_ANCHORS = np.zeros(4, dtype=np.float64)

# fall / degenerate-geometry cutoffs for stance legs; fast gaits sweep the
# legs within ~0.1 rad of horizontal, so the tilt cutoff hugs pi/2
MIN_JOINT_HEIGHT = 0.05
MAX_LEG_TILT = 1.45


@njit(cache=True, nogil=True)
def leg_joint_offset(p, leg):
    # hind pair (LH=0, RH=3) at the hip, front pair (LF=1, RF=2) at the shoulder
    if leg == 0 or leg == 3:
        return p[P_SH]
    return p[P_SF]


@njit(cache=True, nogil=True)
def leg_geometry(y, p, leg, anchor_x, out):
    """Stance leg (l, alpha, ldot, alphadot) from torso pose and anchor.

    Returns False on degenerate geometry (joint too low or leg too tilted).
    """
    s = leg_joint_offset(p, leg)
    c = math.cos(y[2])
    sn = math.sin(y[2])
    jx = y[0] + s * c
    jz = y[1] + s * sn
    jvx = y[7] - s * sn * y[9]
    jvz = y[8] + s * c * y[9]
    dx = jx - anchor_x
    l2 = dx * dx + jz * jz
    l = math.sqrt(l2)
    if jz <= 0.0 or l == 0.0:
        return False
    theta = math.atan2(-dx, jz)
    if abs(theta) >= MAX_LEG_TILT:
        return False
    ldot = (dx * jvx + jz * jvz) / l
    thetadot = (dx * jvz - jz * jvx) / l2
    out[0] = l
    out[1] = theta - y[2]
    out[2] = ldot
    out[3] = thetadot - y[9]
    return True


@njit(cache=True, nogil=True)
def rhs_forces(y, p, stance, anchors, out, lam):
    """State derivative plus per-leg world-frame ground forces.

    Stance legs load the torso through axial spring forces applied at their
    joints; their angle derivatives follow from the contact constraint.
    Swing legs obey the torsional oscillator.
    """
    M = p[P_M]
    inertia = p[P_I]
    k = p[P_K]
    w2 = p[P_W2]
    lo = p[P_LO]
    g = p[P_G]
    an = p[P_AN]
    c = math.cos(y[2])
    sn = math.sin(y[2])
    qdp = y[9]

    fx_tot = 0.0
    fz_tot = 0.0
    tau = 0.0
    for leg in range(4):
        if stance[leg]:
            s = leg_joint_offset(p, leg)
            jx = y[0] + s * c
            jz = y[1] + s * sn
            dx = jx - anchors[leg]
            l = math.sqrt(dx * dx + jz * jz)
            f = k * (lo - l) / l
            fx = f * dx
            fz = f * jz
            lam[leg, 0] = fx
            lam[leg, 1] = fz
            fx_tot += fx
            fz_tot += fz
            tau += s * (c * fz - sn * fx)
        else:
            lam[leg, 0] = 0.0
            lam[leg, 1] = 0.0

    ax = fx_tot / M
    az = fz_tot / M - g
    aphi = tau / inertia

    out[0] = y[7]
    out[1] = y[8]
    out[2] = qdp
    out[7] = ax
    out[8] = az
    out[9] = aphi

    for leg in range(4):
        if stance[leg]:
            s = leg_joint_offset(p, leg)
            jx = y[0] + s * c
            jz = y[1] + s * sn
            jvx = y[7] - s * sn * qdp
            jvz = y[8] + s * c * qdp
            dx = jx - anchors[leg]
            l2 = dx * dx + jz * jz
            l = math.sqrt(l2)
            ldot = (dx * jvx + jz * jvz) / l
            thd = (dx * jvz - jz * jvx) / l2
            jax = ax - s * (sn * aphi + c * qdp * qdp)
            jaz = az + s * (c * aphi - sn * qdp * qdp)
            thdd = (dx * jaz - jz * jax) / l2 - 2.0 * ldot * thd / l
            out[3 + leg] = thd - qdp
            out[10 + leg] = thdd - aphi
        else:
            out[3 + leg] = y[10 + leg]
            out[10 + leg] = -w2 * (y[3 + leg] - an)


@njit(cache=True, nogil=True)
def rhs(y, p, stance, anchors, out):
    lam = np.empty((4, 2), dtype=np.float64)
    rhs_forces(y, p, stance, anchors, out, lam)


@njit(cache=True, nogil=True)
def energy(y, p, stance, anchors):
    M = p[P_M]
    inertia = p[P_I]
    k = p[P_K]
    lo = p[P_LO]
    g = p[P_G]
    e = 0.5 * M * (y[7] * y[7] + y[8] * y[8]) + 0.5 * inertia * y[9] * y[9]
    e += M * g * y[1]
    c = math.cos(y[2])
    sn = math.sin(y[2])
    for leg in range(4):
        if stance[leg]:
            s = leg_joint_offset(p, leg)
            jx = y[0] + s * c
            jz = y[1] + s * sn
            dx = jx - anchors[leg]
            l = math.sqrt(dx * dx + jz * jz)
            e += 0.5 * k * (lo - l) * (lo - l)
    return e


@njit(cache=True, nogil=True)
def guard_values(y, p, stance, anchors, out):
    """Guard functions, one slot per leg plus the apex slot.

    Swing legs: foot height above ground (touchdown fires on a down-crossing).
    Stance legs: leg extension ``l - l_o`` (liftoff fires on an up-crossing).
    Slot 8: vertical COM velocity (apex fires on a down-crossing).
    """
    lo = p[P_LO]
    c = math.cos(y[2])
    sn = math.sin(y[2])
    for leg in range(4):
        s = leg_joint_offset(p, leg)
        jx = y[0] + s * c
        jz = y[1] + s * sn
        if stance[leg]:
            dx = jx - anchors[leg]
            out[leg] = math.sqrt(dx * dx + jz * jz) - lo
        else:
            out[leg] = jz - lo * math.cos(y[3 + leg] + y[2])
    out[8] = y[8]


@njit(cache=True, nogil=True)
def state_invalid(y, p, stance, anchors):
    """Nonzero when the state left the model's validity region."""
    if y[1] < MIN_JOINT_HEIGHT:
        return 1
    c = math.cos(y[2])
    sn = math.sin(y[2])
    for leg in range(4):
        if stance[leg]:
            s = leg_joint_offset(p, leg)
            jx = y[0] + s * c
            jz = y[1] + s * sn
            if jz < MIN_JOINT_HEIGHT:
                return 1
            theta = math.atan2(anchors[leg] - jx, jz)
            if abs(theta) > MAX_LEG_TILT:
                return 2
    return 0


@njit(cache=True, nogil=True)
def foot_position(y, p, leg, stance_flag, anchor_x):
    """World foot position; for stance legs this is the stored anchor."""
    if stance_flag:
        return anchor_x, 0.0
    s = leg_joint_offset(p, leg)
    c = math.cos(y[2])
    sn = math.sin(y[2])
    jx = y[0] + s * c
    jz = y[1] + s * sn
    theta = y[3 + leg] + y[2]
    lo = p[P_LO]
    return jx + lo * math.sin(theta), jz - lo * math.cos(theta)
