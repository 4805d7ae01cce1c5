"""Seed generators for periodic-gait search.

Pronking is time-reversal symmetric: its orbit crosses two reversal-fixed
configurations, the mid-stance (all legs vertical, torso moving level) and
the flight apex with all legs at the neutral angle. Shooting the half
stride from mid-stance to apex therefore needs only one scalar condition
(the apex leg angle), with total energy fixing the mid-stance speed. This
sidesteps the touchdown-phase sensitivity entirely: the half stride
contains liftoff events only.

At each energy the scalar equation has a ladder of roots, one per
swing-oscillation count in flight; each root is polished into a full
section fixed point.

A bounding analogue (half stride between the two suspension apexes with
one mirrored leg-pair contact) is provided for exploratory searches.
"""

from __future__ import annotations

import math

import numpy as np

from .hybrid import (DEFAULT_CONFIG, HybridIntegrationError, HybridState,
                     IntegratorConfig, StopCondition, _run_hybrid,
                     integrate_stride)
from .model import ContactMode, ContinuousState, ModelParams
from .orbits import (InvalidSectionState, OrbitSolution, ShootingError,
                     embed_section, project_section, shoot_orbit)

__all__ = ["pronk_midstance_residual", "find_reversible_pronks",
           "in_place_hop_state", "bound_half_map", "find_reversible_bounds"]


def in_place_hop_state(params: ModelParams, energy: float) -> np.ndarray:
    """Section state of the exact in-place vertical hop at this energy."""
    u = np.zeros(12)
    u[0] = energy / (params.torso_mass * params.gravity)
    return u


def pronk_midstance_residual(params: ModelParams, l_mid: float, energy: float,
                             config: IntegratorConfig = DEFAULT_CONFIG,
                             horizon: float = 14.0):
    """Apex leg angle reached from the mid-stance mirror configuration.

    Returns ``(alpha_apex, section_state)`` or None when the half stride is
    not a clean four-liftoff flight to an apex (wrong contact sequence, a
    fall, or no apex within the horizon).
    """
    k = params.leg_stiffness
    g = params.gravity
    M = params.torso_mass
    spring = 0.5 * 4.0 * k * (params.rest_leg_length - l_mid) ** 2
    v2 = 2.0 * (energy - M * g * l_mid - spring) / M
    if v2 <= 0.0:
        return None
    v = math.sqrt(v2)
    y = np.zeros(14)
    y[1] = l_mid
    y[7] = v
    y[10:14] = -v / l_mid
    anchors = (params.hind_offset, params.front_offset,
               params.front_offset, params.hind_offset)
    mode = ContactMode((True,) * 4, anchors)
    try:
        traj = integrate_stride(
            params, HybridState(ContinuousState.from_array(y), mode),
            StopCondition.apex_any(horizon=horizon), config)
    except HybridIntegrationError:
        return None
    if traj.stop_reason != "apex":
        return None
    if (len(traj.events) != 4
            or any(ev.kind != "liftoff" for ev in traj.events)):
        return None
    return float(traj.end_state[3]), project_section(traj.end_state)


def find_reversible_pronks(params: ModelParams, energy: float,
                           l_range: tuple = (0.30, 0.995),
                           l_step: float = 0.002,
                           config: IntegratorConfig = DEFAULT_CONFIG,
                           polish: bool = True,
                           shoot_tol: float = 2e-9,
                           max_solutions: int = 32) -> list:
    """All reversible pronking orbits at one energy, fastest first.

    Scans the mid-stance compression for sign changes of the apex leg
    angle, bisects each, and (by default) polishes the resulting section
    states with the full 12-dimensional shooter.
    """
    from .orbits import SectionState

    lgrid = np.arange(l_range[0], l_range[1], l_step)
    vals = [pronk_midstance_residual(params, lm, energy, config)
            for lm in lgrid]
    roots = []
    for i in range(len(lgrid) - 1):
        if vals[i] is None or vals[i + 1] is None:
            continue
        if vals[i][0] * vals[i + 1][0] >= 0.0:
            continue
        a, b = lgrid[i], lgrid[i + 1]
        fa = vals[i][0]
        u_best = None
        for _ in range(60):
            m = 0.5 * (a + b)
            r = pronk_midstance_residual(params, m, energy, config)
            if r is None:
                break
            if fa * r[0] < 0.0:
                b = m
            else:
                a, fa, u_best = m, r[0], r[1]
        if u_best is not None:
            roots.append(u_best)
    # fastest rungs first, so solution caps keep the speed-sweeping family
    roots.sort(key=lambda u: -u[6])

    found = []
    for u_best in roots:
        if not polish:
            found.append(OrbitSolution(
                section_state=SectionState.from_array(u_best),
                period=0.0, energy=energy, event_schedule=tuple(),
                residual_norm=math.inf, params=params))
            if len(found) >= max_solutions:
                break
            continue
        try:
            orb = shoot_orbit(params, u_best, energy, tol=shoot_tol,
                              config=config, compute_floquet=False)
        except (ShootingError, HybridIntegrationError,
                InvalidSectionState):
            continue
        if any(abs(o.qd_x - orb.qd_x) < 1e-8
               and abs(o.section_state.q_z - orb.section_state.q_z) < 1e-8
               for o in found):
            continue
        found.append(orb)
        if len(found) >= max_solutions:
            break
    found.sort(key=lambda o: -o.qd_x)
    return found


def bound_half_map(params: ModelParams, z: float, a: float, p: float,
                   c: float, energy: float,
                   config: IntegratorConfig = DEFAULT_CONFIG,
                   horizon: float = 8.0):
    """Half-stride map between suspension apexes of a candidate bound.

    The start lies on the fixed set of the bounding reversal (hind and
    front legs mirrored, pitch zero). Returns the three mismatch residuals
    against that fixed set at the next apex, the reached section state,
    and which leg pair made contact, or None for an invalid half stride.
    """
    inertia = params.pitch_inertia
    w2 = 2.0 * (energy - params.torso_mass * params.gravity * z
                - 0.5 * inertia * p * p) / params.torso_mass
    if w2 <= 0.0:
        return None
    w = math.sqrt(w2)
    u = np.array([z, 0.0, a, -a, -a, a, w, p, c, c, c, c])
    y = embed_section(u)
    try:
        res = _run_hybrid(params, y, ContactMode.flight(), 0.0,
                          StopCondition.apex_any(horizon=horizon), config,
                          collect=False)
    except HybridIntegrationError:
        return None
    if res.stop_reason != "apex":
        return None
    tds = [int(ev.leg) for ev in res.events if ev.kind == "touchdown"]
    los = [int(ev.leg) for ev in res.events if ev.kind == "liftoff"]
    if len(tds) != 2 or len(los) != 2 or set(tds) != set(los):
        return None
    if set(tds) == {0, 3}:
        pair = "hind"
    elif set(tds) == {1, 2}:
        pair = "front"
    else:
        return None
    uf = project_section(res.y)
    resid = np.array([uf[1], uf[2] + uf[3], uf[8] - uf[9]])
    return resid, uf, pair


def find_reversible_bounds(params: ModelParams, energy: float,
                           config: IntegratorConfig = DEFAULT_CONFIG,
                           z_grid=None, a_grid=None, p_grid=None,
                           c_grid=None, newton_tol: float = 1e-9,
                           max_candidates: int = 60) -> list:
    """Search for reversal-fixed bound half strides at one energy.

    Returns a list of ``(fixed_point_parameters, section_state, pair)``
    for converged half strides; note that a converged half stride does not
    guarantee the full stride is free of swing-leg scuff contacts.
    """
    if z_grid is None:
        z_grid = np.arange(0.9, 1.65, 0.05)
    if a_grid is None:
        a_grid = np.arange(-0.7, 0.71, 0.1)
    if p_grid is None:
        p_grid = np.arange(-1.5, 1.51, 0.5)
    if c_grid is None:
        c_grid = np.arange(-8.0, 8.1, 2.0)

    cands = []
    for z in z_grid:
        for a in a_grid:
            for p in p_grid:
                for c in c_grid:
                    out = bound_half_map(params, z, a, p, c, energy, config)
                    if out is not None:
                        cands.append((float(np.linalg.norm(out[0])),
                                      (z, a, p, c)))
    cands.sort(key=lambda t: t[0])

    def newton(x0):
        x = np.array(x0, float)
        out = bound_half_map(params, *x, energy, config)
        if out is None:
            return None
        r = out[0]
        for _ in range(50):
            if np.linalg.norm(r) < newton_tol:
                return x, bound_half_map(params, *x, energy, config)
            J = np.zeros((3, 4))
            for j in range(4):
                h = 1e-7 * max(1.0, abs(x[j]))
                xp = x.copy(); xp[j] += h
                op = bound_half_map(params, *xp, energy, config)
                if op is None:
                    return None
                J[:, j] = (op[0] - r) / h
            d, *_ = np.linalg.lstsq(J, -r, rcond=None)
            n = float(np.linalg.norm(d))
            if n > 0.2:
                d *= 0.2 / n
            for _bt in range(8):
                xt = x + d
                ot = bound_half_map(params, *xt, energy, config)
                if ot is not None and np.linalg.norm(ot[0]) < np.linalg.norm(r):
                    x, r = xt, ot[0]
                    break
                d *= 0.5
            else:
                return None
        return None

    sols = []
    for _, x0 in cands[:max_candidates]:
        got = newton(x0)
        if got is None:
            continue
        x, out = got
        if any(np.linalg.norm(np.array(x) - np.array(s[0])) < 1e-5
               for s in sols):
            continue
        sols.append((x.tolist(), out[1], out[2]))
    return sols
