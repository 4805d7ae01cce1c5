"""Full differential-algebraic oracle for the stance dynamics.

Independent cross-check of the reduced massless-leg vector field. The legs
get a small regularizing foot mass and explicit length coordinates, stance
feet are pinned to their anchors by algebraic constraints, and the whole
system is solved as one bordered linear problem

    [[M, -J^T], [J, 0]] [qdd; lam] = [-C qd - G; -Jdot qd]

assembled numerically: the mass matrix from foot-position Jacobians, the
Coriolis terms from Christoffel symbols of finite-differenced ``dM/dq``, and
the gravity/spring forces from a finite-differenced potential. Nothing here
reuses the hand-derived formulas of :mod:`gaitatlas.model`, which is the
point: agreement in the massless limit validates those formulas.

Swing legs are modeled as the same torsional oscillators the reduced model
uses (their inertia decoupled from the torso), so the oracle isolates the
contact mechanics rather than re-deriving the swing steering model.
"""

from __future__ import annotations

import numpy as np

from .model import ContactMode, ModelParams, N_LEGS

__all__ = ["dae_oracle_field", "SingularOracleError", "DEFAULT_FOOT_MASS"]

DEFAULT_FOOT_MASS = 1e-6

_NQ = 11  # q_x, q_z, q_pitch, alpha[4], l[4]


class SingularOracleError(RuntimeError):
    """The bordered contact system is rank deficient."""


def _foot_point(params: ModelParams, q: np.ndarray, leg: int) -> np.ndarray:
    s = params.leg_offset(leg)
    pitch = q[2]
    jx = q[0] + s * np.cos(pitch)
    jz = q[1] + s * np.sin(pitch)
    theta = q[3 + leg] + pitch
    l = q[7 + leg]
    return np.array([jx + l * np.sin(theta), jz - l * np.cos(theta)])


def _foot_jacobian(params: ModelParams, q: np.ndarray, leg: int,
                   h: float = 1e-6) -> np.ndarray:
    J = np.empty((2, _NQ))
    for k in range(_NQ):
        qp = q.copy(); qp[k] += h
        qm = q.copy(); qm[k] -= h
        J[:, k] = (_foot_point(params, qp, leg)
                   - _foot_point(params, qm, leg)) / (2.0 * h)
    return J


def _mass_matrix(params: ModelParams, q: np.ndarray, stance_legs, m_o: float
                 ) -> np.ndarray:
    M = np.zeros((_NQ, _NQ))
    M[0, 0] = params.torso_mass
    M[1, 1] = params.torso_mass
    M[2, 2] = params.pitch_inertia
    lo = params.rest_leg_length
    w2 = params.swing_frequency ** 2
    del w2  # stiffness lives in the potential, not the mass matrix
    stance_set = set(int(l) for l in stance_legs)
    for leg in range(N_LEGS):
        if leg in stance_set:
            Jp = _foot_jacobian(params, q, leg)
            M += m_o * (Jp.T @ Jp)
        else:
            M[3 + leg, 3 + leg] += m_o * lo * lo
            M[7 + leg, 7 + leg] += m_o
    return M


def _potential_heavy(params: ModelParams, q: np.ndarray) -> float:
    """Order-one potential terms: torso gravity and axial leg springs."""
    k = params.leg_stiffness
    lo = params.rest_leg_length
    V = params.torso_mass * params.gravity * q[1]
    for leg in range(N_LEGS):
        dl = lo - q[7 + leg]
        V += 0.5 * k * dl * dl
    return V


def _potential_light(params: ModelParams, q: np.ndarray, stance_legs) -> float:
    """Potential per unit foot mass: torsional springs and foot gravity.

    Differenced separately so roundoff is not amplified by 1/m_o in the
    leg equations. The torsional spring engages swing legs only; in stance
    the leg angle is constraint-driven and the reduced model being
    validated transmits no hip torque.
    """
    lo = params.rest_leg_length
    g = params.gravity
    kt_unit = lo * lo * params.swing_frequency ** 2
    an = params.swing_neutral
    V = 0.0
    stance_set = set(int(l) for l in stance_legs)
    for leg in range(N_LEGS):
        if leg in stance_set:
            V += g * _foot_point(params, q, leg)[1]
        else:
            V += 0.5 * kt_unit * (q[3 + leg] - an) ** 2
    return V


def _gravity_spring_forces(params, q, stance_legs, m_o, h=1e-6) -> np.ndarray:
    G = np.empty(_NQ)
    for kidx in range(_NQ):
        qp = q.copy(); qp[kidx] += h
        qm = q.copy(); qm[kidx] -= h
        heavy = (_potential_heavy(params, qp)
                 - _potential_heavy(params, qm)) / (2.0 * h)
        light = (_potential_light(params, qp, stance_legs)
                 - _potential_light(params, qm, stance_legs)) / (2.0 * h)
        G[kidx] = heavy + m_o * light
    return G


def _coriolis(params, q, qd, stance_legs, m_o, h=1e-5) -> np.ndarray:
    dM = np.empty((_NQ, _NQ, _NQ))  # dM[:, :, k] = dM/dq_k
    for kidx in range(_NQ):
        qp = q.copy(); qp[kidx] += h
        qm = q.copy(); qm[kidx] -= h
        dM[:, :, kidx] = (_mass_matrix(params, qp, stance_legs, m_o)
                          - _mass_matrix(params, qm, stance_legs, m_o)
                          ) / (2.0 * h)
    # (C qd)_i = sum_jk Gamma_ijk qd_j qd_k
    out = np.zeros(_NQ)
    for i in range(_NQ):
        acc = 0.0
        for j in range(_NQ):
            if qd[j] == 0.0:
                continue
            for kk in range(_NQ):
                if qd[kk] == 0.0:
                    continue
                gamma = 0.5 * (dM[i, j, kk] + dM[i, kk, j] - dM[j, kk, i])
                acc += gamma * qd[j] * qd[kk]
        out[i] = acc
    return out


def _oracle_coordinates(params: ModelParams, y: np.ndarray, mode: ContactMode
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Lift the reduced 14-state to (q, qd) with explicit leg lengths."""
    from .model import stance_leg_geometry
    q = np.zeros(_NQ)
    qd = np.zeros(_NQ)
    q[:3] = y[:3]
    qd[:3] = y[7:10]
    lo = params.rest_leg_length
    for leg in range(N_LEGS):
        if mode.in_stance[leg]:
            l, a, ldot, adot = stance_leg_geometry(
                params, y, leg, mode.foot_anchor_x[leg])
            q[3 + leg] = a
            q[7 + leg] = l
            qd[3 + leg] = adot
            qd[7 + leg] = ldot
        else:
            q[3 + leg] = y[3 + leg]
            q[7 + leg] = lo
            qd[3 + leg] = y[10 + leg]
            qd[7 + leg] = 0.0
    return q, qd


def dae_oracle_field(params: ModelParams, state, mode: ContactMode,
                     foot_mass: float = DEFAULT_FOOT_MASS):
    """Accelerations and contact forces from the bordered DAE.

    Returns ``(ydot, lambdas)`` in the reduced state layout, where
    ``lambdas`` maps each stance leg to its world-frame ground reaction
    force. With ``foot_mass`` small this converges to the reduced field.
    """
    from .model import _as_array
    y = _as_array(state)
    q, qd = _oracle_coordinates(params, y, mode)
    stance_legs = [int(l) for l in mode.stance_legs()]

    M = _mass_matrix(params, q, stance_legs, foot_mass)
    G = _gravity_spring_forces(params, q, stance_legs, foot_mass)
    Cqd = _coriolis(params, q, qd, stance_legs, foot_mass)

    nc = 2 * len(stance_legs)
    n = _NQ + nc
    A = np.zeros((n, n))
    b = np.zeros(n)
    A[:_NQ, :_NQ] = M
    b[:_NQ] = -Cqd - G

    for row, leg in enumerate(stance_legs):
        Jp = _foot_jacobian(params, q, leg)
        # Jdot @ qd is the second directional derivative of the foot map
        # along qd; a single second difference avoids nested-FD noise
        speed = float(np.linalg.norm(qd))
        if speed > 0.0:
            u = qd / speed
            eps = 3e-4
            jdot_qd = speed * speed * (
                _foot_point(params, q + eps * u, leg)
                - 2.0 * _foot_point(params, q, leg)
                + _foot_point(params, q - eps * u, leg)) / (eps * eps)
        else:
            jdot_qd = np.zeros(2)
        sl = slice(_NQ + 2 * row, _NQ + 2 * row + 2)
        A[:_NQ, sl] = -Jp.T
        A[sl, :_NQ] = Jp
        b[sl] = -jdot_qd

    # row equilibration: the leg rows scale with the tiny foot mass
    scale = np.max(np.abs(A), axis=1)
    if np.any(scale == 0.0):
        raise SingularOracleError("bordered contact system is singular")
    As = A / scale[:, None]
    bs = b / scale
    try:
        sol = np.linalg.solve(As, bs)
    except np.linalg.LinAlgError as exc:
        raise SingularOracleError(str(exc)) from None
    if not np.all(np.isfinite(sol)):
        raise SingularOracleError("non-finite oracle solution")
    resid = np.linalg.norm(As @ sol - bs) / max(1.0, np.linalg.norm(bs))
    if resid > 1e-6:
        raise SingularOracleError(
            f"bordered system solved poorly (residual {resid:.2e})")

    qdd = sol[:_NQ]
    ydot = np.empty(14)
    ydot[0:3] = qd[0:3]
    ydot[7:10] = qdd[0:3]
    for leg in range(N_LEGS):
        ydot[3 + leg] = qd[3 + leg]
        ydot[10 + leg] = qdd[3 + leg]
    lambdas = {}
    for row, leg in enumerate(stance_legs):
        lam = sol[_NQ + 2 * row: _NQ + 2 * row + 2]
        lambdas[leg] = (float(lam[0]), float(lam[1]))
    return ydot, lambdas
