"""Pseudo-arclength continuation of gait families and bifurcation handling.

A point on a family is ``y = (u, lam)``: the 12 section coordinates plus the
continued parameter (total energy, or the COM position for morphing between
models). The defining system

    G(y) = [P(u) - u; E(u) - lam]   (13 equations, rank 12 on the family)

is traced by tangent prediction and a Gauss-Newton corrector orthogonal to
the tangent. The corrector's finite-difference Jacobian doubles as the
source of Floquet multipliers, of the singular-value test for
symmetry-breaking bifurcations, and of the branch tangent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .hybrid import (DEFAULT_CONFIG, HybridIntegrationError,
                     IntegratorConfig)
from .model import ModelParams
from .orbits import (InvalidSectionState, OrbitSolution, SectionState,
                     section_energy, shooting_residual,
                     _normalized_events, _return_map_raw)

__all__ = [
    "ContinuationProblem", "StepConfig", "Branch", "BifurcationPoint",
    "BranchPoint", "continue_branch", "detect_bifurcations", "switch_branch",
    "atlas_sweep", "Atlas", "AtlasConfig", "ContinuationError",
]

N_Y = 13

ENERGY = "TotalEnergy"
COM_FROM_HIP = "ComFromHip"
SWING_FREQUENCY = "SwingFrequency"


class ContinuationError(RuntimeError):
    pass


class ContinuationProblem:
    """Shooting system G(y) = 0 with one free parameter.

    ``parameter`` selects what the 13th unknown is: the orbit's total energy
    (model fixed) or the COM-from-hip fraction (energy pinned at
    ``fixed_energy``).
    """

    def __init__(self, params: ModelParams, parameter: str = ENERGY,
                 fixed_energy: float | None = None,
                 config: IntegratorConfig = DEFAULT_CONFIG,
                 horizon: float = 50.0):
        if parameter not in (ENERGY, COM_FROM_HIP, SWING_FREQUENCY):
            raise ValueError(f"unknown continuation parameter {parameter!r}")
        if parameter != ENERGY and fixed_energy is None:
            raise ValueError(f"{parameter} continuation needs fixed_energy")
        self.base_params = params
        self.parameter = parameter
        self.fixed_energy = fixed_energy
        self.config = config
        self.horizon = horizon

    def params_at(self, lam: float) -> ModelParams:
        if self.parameter == COM_FROM_HIP:
            return self.base_params.with_com_from_hip(lam)
        if self.parameter == SWING_FREQUENCY:
            from dataclasses import replace
            return replace(self.base_params, swing_frequency=float(lam))
        return self.base_params

    def lambda_of_orbit(self, orbit: OrbitSolution) -> float:
        if self.parameter == COM_FROM_HIP:
            return orbit.params.com_from_hip
        if self.parameter == SWING_FREQUENCY:
            return orbit.params.swing_frequency
        return orbit.energy

    def residual(self, y: np.ndarray):
        """G(y) plus the stride data of the base map evaluation."""
        u = y[:12]
        lam = y[12]
        params = self.params_at(lam)
        target = lam if self.parameter == ENERGY else self.fixed_energy
        r, period, events = shooting_residual(
            params, u, target, self.horizon, self.config)
        return r, period, events

    def jacobian(self, y: np.ndarray, fd_step: float = 3e-6,
                 r0: np.ndarray | None = None) -> np.ndarray:
        """Central-difference 13 x 13 Jacobian of G.

        Columns whose probe trajectories fail fall back to a one-sided
        difference (the base residual is computed on demand).
        """
        J = np.empty((N_Y, N_Y))

        def col(yj, h):
            nonlocal r0
            yp = yj[0]; ym = yj[1]
            try:
                rp, _, _ = self.residual(yp)
            except (HybridIntegrationError, InvalidSectionState):
                rp = None
            try:
                rm, _, _ = self.residual(ym)
            except (HybridIntegrationError, InvalidSectionState):
                rm = None
            if rp is not None and rm is not None:
                return (rp - rm) / (2.0 * h)
            if rp is None and rm is None:
                raise ContinuationError("Jacobian probes failed on both sides")
            if r0 is None:
                try:
                    r0, _, _ = self.residual(y)
                except (HybridIntegrationError, InvalidSectionState) as exc:
                    raise ContinuationError(
                        f"Jacobian base point failed: {exc}")
            if rp is not None:
                return (rp - r0) / h
            return (r0 - rm) / h

        for j in range(12):
            h = fd_step * max(1.0, abs(y[j]))
            yp = y.copy(); yp[j] += h
            ym = y.copy(); ym[j] -= h
            J[:, j] = col((yp, ym), h)
        if self.parameter == ENERGY:
            J[:, 12] = 0.0
            J[12, 12] = -1.0
        else:
            h = fd_step
            yp = y.copy(); yp[12] += h
            ym = y.copy(); ym[12] -= h
            J[:, 12] = col((yp, ym), h)
        return J

    def make_orbit(self, y: np.ndarray, period: float, events,
                   residual_norm: float) -> OrbitSolution:
        u = y[:12]
        params = self.params_at(y[12])
        return OrbitSolution(
            section_state=SectionState.from_array(u),
            period=float(period),
            energy=section_energy(params, u),
            event_schedule=_normalized_events(events, period),
            residual_norm=float(residual_norm),
            params=params,
        )


@dataclass(frozen=True)
class StepConfig:
    initial_step: float = 0.02
    min_step: float = 1e-5
    max_step: float = 0.2
    grow_factor: float = 1.3
    grow_after: int = 3
    corrector_tol: float = 1e-10
    #: residual the corrector may settle for when evaluation noise stops
    #: further contraction (stays under the orbit-residual invariant)
    corrector_accept: float = 1e-9
    corrector_iters: int = 12
    max_points: int = 500
    fd_step: float = 3e-6
    lambda_range: tuple = (-np.inf, np.inf)
    speed_range: tuple = (-np.inf, np.inf)
    max_fail: int = 24
    max_stale: int = 12


@dataclass
class BranchPoint:
    orbit: OrbitSolution
    y: np.ndarray
    tangent: np.ndarray
    sigma2: float
    det_sign: float
    arclength: float
    schedule_label: str = ""
    #: True when Jacobian probes failed here and tangent/test data were
    #: carried over from the previous point (grazing-fragile zones)
    stale: bool = False


@dataclass
class BifurcationPoint:
    location: OrbitSolution
    y: np.ndarray
    null_direction: np.ndarray  # 13-vector
    kind: str                   # "SymmetryBreaking" | "Fold" | "BranchEnd"
    sigma2: float
    parent_branch: str = ""
    child_branch_names: list = field(default_factory=list)

    @property
    def qd_x(self) -> float:
        return float(self.y[6])


@dataclass
class Branch:
    name: str
    parameter: str
    points: list  # of BranchPoint
    bifurcations: list = field(default_factory=list)
    annotations: list = field(default_factory=list)
    termination: str = ""
    label: str = ""

    @property
    def orbits(self):
        return [pt.orbit for pt in self.points]

    def speeds(self) -> np.ndarray:
        return np.array([pt.y[6] for pt in self.points])

    def lambdas(self) -> np.ndarray:
        return np.array([pt.y[12] for pt in self.points])

    def speed_range(self) -> tuple[float, float]:
        s = self.speeds()
        return float(np.min(s)), float(np.max(s))

    def point_nearest_speed(self, qd_x: float) -> BranchPoint:
        s = self.speeds()
        return self.points[int(np.argmin(np.abs(s - qd_x)))]

    def point_nearest_lambda(self, lam: float) -> BranchPoint:
        lams = self.lambdas()
        return self.points[int(np.argmin(np.abs(lams - lam)))]


MAX_CORRECTOR_STEP = 0.25


def _corrector(problem: ContinuationProblem, y_pred: np.ndarray,
               constraint_dir: np.ndarray, constraint_ref: np.ndarray,
               J: np.ndarray, cfg: StepConfig):
    """Gauss-Newton iteration on [G; dir . (y - ref)] with a frozen Jacobian.

    Steps are capped and backtracked when the residual grows, so a
    near-singular Jacobian (close to a bifurcation) fails cleanly instead
    of launching the iterate out of the model's validity region.
    Returns ``(y, residual_data, rnorm)`` or raises ContinuationError.
    """
    y = y_pred.copy()
    M = np.vstack([J, constraint_dir[None, :]])
    try:
        r, period, events = problem.residual(y)
    except (HybridIntegrationError, InvalidSectionState) as exc:
        raise ContinuationError(f"residual evaluation failed: {exc}")
    rnorm = float(np.linalg.norm(r))
    data = (period, events)
    best = (rnorm, y.copy(), data)
    no_gain = 0
    for _it in range(cfg.corrector_iters):
        if rnorm < cfg.corrector_tol:
            return y, data, rnorm
        rhs = np.empty(N_Y + 1)
        rhs[:N_Y] = -r
        rhs[N_Y] = -(constraint_dir @ (y - constraint_ref))
        delta, *_ = np.linalg.lstsq(M, rhs, rcond=None)
        step_norm = float(np.linalg.norm(delta))
        if step_norm < 1e-13:
            break
        if step_norm > MAX_CORRECTOR_STEP:
            delta *= MAX_CORRECTOR_STEP / step_norm
        scale = 1.0
        for _bt in range(6):
            y_try = y + scale * delta
            try:
                r_t, period_t, events_t = problem.residual(y_try)
            except (HybridIntegrationError, InvalidSectionState):
                scale *= 0.5
                continue
            rnorm_t = float(np.linalg.norm(r_t))
            if rnorm_t < max(rnorm, cfg.corrector_tol) or scale < 0.2:
                y = y_try
                r, rnorm, data = r_t, rnorm_t, (period_t, events_t)
                break
            scale *= 0.5
        else:
            break
        if rnorm < 0.5 * best[0]:
            best = (rnorm, y.copy(), data)
            no_gain = 0
        else:
            if rnorm < best[0]:
                best = (rnorm, y.copy(), data)
            no_gain += 1
            # evaluation noise amplified through near-null directions:
            # stop once iterates bounce instead of contracting
            if no_gain >= 3:
                break
    if rnorm < cfg.corrector_tol:
        return y, data, rnorm
    if best[0] < cfg.corrector_accept:
        return best[1], best[2], best[0]
    raise ContinuationError(f"corrector stalled at residual {best[0]:.3e}")


def _tangent_from_jacobian(J: np.ndarray) -> tuple[np.ndarray, float, np.ndarray]:
    """Unit tangent (smallest singular vector), sigma2, and its vector."""
    _, sv, Vt = np.linalg.svd(J)
    return Vt[-1].copy(), float(sv[-2]), Vt[-2].copy()


def _det_sign(J: np.ndarray, tangent: np.ndarray) -> float:
    B = np.zeros((N_Y + 1, N_Y + 1))
    B[:N_Y, :N_Y] = J
    B[:N_Y, N_Y] = tangent
    B[N_Y, :N_Y] = tangent
    sign, _ = np.linalg.slogdet(B)
    return float(sign)


def _point_in_bounds(y: np.ndarray, cfg: StepConfig) -> bool:
    lam_ok = cfg.lambda_range[0] <= y[12] <= cfg.lambda_range[1]
    spd_ok = cfg.speed_range[0] <= y[6] <= cfg.speed_range[1]
    return lam_ok and spd_ok


def _analyze_point(problem, y, data, rnorm, cfg, prev_tangent, arclength):
    """Build the per-point record: orbit, Floquet data, test functions."""
    J = problem.jacobian(y, cfg.fd_step)
    tangent, sigma2, _ = _tangent_from_jacobian(J)
    if prev_tangent is not None and float(tangent @ prev_tangent) < 0.0:
        tangent = -tangent
    det = _det_sign(J, tangent)
    period, events = data
    orbit = problem.make_orbit(y, period, events, rnorm)
    DP = J[:12, :12] + np.eye(12)
    orbit = orbit.with_floquet(np.linalg.eigvals(DP))
    from .symmetry import classify_schedule
    label, _ = classify_schedule(orbit)
    pt = BranchPoint(orbit=orbit, y=y.copy(), tangent=tangent,
                     sigma2=sigma2, det_sign=det, arclength=arclength,
                     schedule_label=label)
    return pt, J


def continue_branch(problem: ContinuationProblem, seed: OrbitSolution,
                    direction: int = +1, cfg: StepConfig = StepConfig(),
                    name: str = "branch") -> Branch:
    """Trace one family from a converged seed by pseudo-arclength stepping.

    The step halves on corrector failure and grows by ``grow_factor`` after
    ``grow_after`` consecutive easy successes. Terminates at parameter or
    speed bounds, step underflow, repeated failures, or the point budget.
    Event-order changes along the branch are recorded as annotations, not
    treated as failures.
    """
    y0 = np.empty(N_Y)
    y0[:12] = seed.u()
    y0[12] = problem.lambda_of_orbit(seed)
    if seed.residual_norm > 1e-8:
        raise ContinuationError(
            f"seed orbit residual {seed.residual_norm:.2e} not converged")

    branch = Branch(name=name, parameter=problem.parameter, points=[])
    try:
        r0, period0, events0 = problem.residual(y0)
    except (HybridIntegrationError, InvalidSectionState) as exc:
        raise ContinuationError(f"seed residual failed: {exc}")
    pt, J = _analyze_point(problem, y0, (period0, events0),
                           float(np.linalg.norm(r0)), cfg, None, 0.0)
    # orient the first tangent along the requested direction, preferring the
    # parameter component and falling back to the largest entry
    t0 = pt.tangent
    ref = t0[12] if abs(t0[12]) > 1e-6 else t0[int(np.argmax(np.abs(t0)))]
    if ref * direction < 0.0:
        pt.tangent = -t0
        pt.det_sign = _det_sign(J, pt.tangent)
    branch.points.append(pt)

    h = cfg.initial_step
    streak = 0
    fails = 0
    stale_run = 0
    arclength = 0.0
    while len(branch.points) < cfg.max_points:
        last = branch.points[-1]
        y_pred = last.y + h * last.tangent
        try:
            y_new, data, rnorm = _corrector(problem, y_pred, last.tangent,
                                            y_pred, J, cfg)
        except ContinuationError:
            # a stale Jacobian struggles through sharp turns: rebuild at
            # the predictor once before shrinking the step
            retried = False
            try:
                J_fresh = problem.jacobian(y_pred, cfg.fd_step)
                y_new, data, rnorm = _corrector(problem, y_pred,
                                                last.tangent, y_pred,
                                                J_fresh, cfg)
                J = J_fresh
                retried = True
            except (ContinuationError, HybridIntegrationError,
                    InvalidSectionState):
                pass
            if not retried:
                fails += 1
                streak = 0
                h *= 0.5
                if h < cfg.min_step:
                    branch.termination = "step_underflow"
                    break
                if fails >= cfg.max_fail:
                    branch.termination = "corrector_failures"
                    break
                continue
        fails = 0
        arclength += float(np.linalg.norm(y_new - last.y))
        try:
            pt, J = _analyze_point(problem, y_new, data, rnorm, cfg,
                                   last.tangent, arclength)
            stale_run = 0
        except (ContinuationError, HybridIntegrationError,
                InvalidSectionState):
            # probes fall off grazing-fragile zones the family itself
            # threads; carry the previous tangent through, within limits
            stale_run += 1
            if stale_run > cfg.max_stale:
                branch.termination = "analysis_failure"
                break
            period, events = data
            orbit = problem.make_orbit(y_new, period, events, rnorm)
            from .symmetry import classify_schedule
            label, _ = classify_schedule(orbit)
            pt = BranchPoint(orbit=orbit, y=y_new.copy(),
                             tangent=last.tangent.copy(),
                             sigma2=last.sigma2, det_sign=last.det_sign,
                             arclength=arclength, schedule_label=label,
                             stale=True)
        branch.points.append(pt)
        if pt.schedule_label != last.schedule_label:
            branch.annotations.append(
                {"point": len(branch.points) - 1,
                 "change": f"{last.schedule_label}->{pt.schedule_label}",
                 "qd_x": float(pt.y[6])})
        if not _point_in_bounds(y_new, cfg):
            branch.termination = "bounds"
            break
        streak += 1
        if streak >= cfg.grow_after:
            h = min(h * cfg.grow_factor, cfg.max_step)
            streak = 0
    else:
        branch.termination = "point_budget"
    if not branch.termination:
        branch.termination = "point_budget"
    return branch


def detect_bifurcations(problem: ContinuationProblem, branch: Branch,
                        cfg: StepConfig = StepConfig(),
                        sigma_tol: float = 1e-6,
                        sigma_accept: float = 1e-5,
                        sigma_candidate: float = 2e-3,
                        merge_distance: float = 0.04,
                        max_refine: int = 48) -> list:
    """Locate symmetry-breaking and fold points along a traced branch.

    Candidate intervals come from sign changes of the bordered determinant
    (odd-multiplicity crossings) and from local dips of the second-smallest
    singular value of the shooting Jacobian (even-multiplicity crossings,
    which leave the determinant sign unchanged). Each candidate is refined
    by shrinking the interval on the corrected branch until the singular
    value drops below ``sigma_tol``; results above ``sigma_accept`` are
    discarded, and refined points closer than ``merge_distance`` merge into
    the most singular representative. Folds are flagged where the tangent's
    parameter component changes sign.
    """
    found: list[BifurcationPoint] = []
    pts = branch.points
    if len(pts) < 3:
        branch.bifurcations = found
        return found

    intervals: list[tuple[int, int]] = []
    for i in range(len(pts) - 1):
        if pts[i].det_sign * pts[i + 1].det_sign < 0.0:
            intervals.append((i, i + 1))
    for i in range(1, len(pts) - 1):
        if (pts[i].sigma2 < sigma_candidate
                and pts[i].sigma2 <= pts[i - 1].sigma2
                and pts[i].sigma2 <= pts[i + 1].sigma2):
            if not any(a <= i <= b for a, b in intervals):
                intervals.append((i - 1, i + 1))

    refined = []
    for a, b in intervals:
        bif = _refine_singular_point(problem, pts[a], pts[b], cfg,
                                     sigma_tol, sigma_accept, max_refine)
        if bif is not None:
            bif.parent_branch = branch.name
            refined.append(bif)

    refined.sort(key=lambda bf: bf.sigma2)
    for bif in refined:
        if any(np.linalg.norm(bif.y - kept.y) < merge_distance
               for kept in found):
            continue
        found.append(bif)

    for i in range(len(pts) - 1):
        a, b = pts[i], pts[i + 1]
        if a.tangent[12] * b.tangent[12] < 0.0:
            loc = a if abs(a.tangent[12]) < abs(b.tangent[12]) else b
            if any(np.linalg.norm(loc.y - kept.y) < merge_distance
                   for kept in found):
                continue
            found.append(BifurcationPoint(
                location=loc.orbit, y=loc.y.copy(),
                null_direction=loc.tangent.copy(), kind="Fold",
                sigma2=loc.sigma2, parent_branch=branch.name))

    found.sort(key=lambda bf: float(bf.y[12]))
    branch.bifurcations = found
    return found


def _refine_singular_point(problem, pt_a, pt_b, cfg, sigma_tol, sigma_accept,
                           max_refine):
    """Shrink [a, b] on the corrected branch to the sigma2 minimum.

    Golden-section search on the (V-shaped near a crossing) second singular
    value, with every probe re-converged onto the family orthogonally to
    the local secant.
    """
    ya = pt_a.y.copy()
    yb = pt_b.y.copy()
    tangent = pt_b.tangent.copy()
    best = None  # (sigma2, y, null, data, rnorm)

    def probe(s):
        nonlocal best
        ym = (1.0 - s) * ya + s * yb
        secant = yb - ya
        ns = float(np.linalg.norm(secant))
        if ns == 0.0:
            return math.inf
        secant /= ns
        try:
            J_m = problem.jacobian(ym, cfg.fd_step)
            y_c, data, rnorm = _corrector(problem, ym, secant, ym, J_m, cfg)
            J_c = problem.jacobian(y_c, cfg.fd_step)
        except ContinuationError:
            return math.inf
        _, sigma2, null2 = _tangent_from_jacobian(J_c)
        if best is None or sigma2 < best[0]:
            best = (sigma2, y_c.copy(), null2.copy(), data, rnorm)
        return sigma2

    phi = 0.5 * (math.sqrt(5.0) - 1.0)
    lo, hi = 0.0, 1.0
    s1 = hi - phi * (hi - lo)
    s2 = lo + phi * (hi - lo)
    f1, f2 = probe(s1), probe(s2)
    for _ in range(max_refine):
        if best is not None and best[0] < sigma_tol:
            break
        if hi - lo < 1e-9:
            break
        if f1 <= f2:
            hi, s2, f2 = s2, s1, f1
            s1 = hi - phi * (hi - lo)
            f1 = probe(s1)
        else:
            lo, s1, f1 = s1, s2, f2
            s2 = lo + phi * (hi - lo)
            f2 = probe(s2)
    if best is None or best[0] > sigma_accept:
        return None
    sigma2, y_c, null2, data, rnorm = best
    orbit = problem.make_orbit(y_c, data[0], data[1], rnorm)
    return BifurcationPoint(location=orbit, y=y_c, null_direction=null2,
                            kind="SymmetryBreaking", sigma2=sigma2)


def switch_branch(problem: ContinuationProblem, bif: BifurcationPoint,
                  amplitude: float = 1e-3, sign: int = +1,
                  cfg: StepConfig = StepConfig(),
                  max_amplitude: float = 1e-1) -> OrbitSolution:
    """First orbit on a child branch emerging at a symmetry-breaking point.

    Predicts along the null direction and corrects orthogonally to it, so
    the corrector cannot slide back onto the parent family. The amplitude
    escalates (about half a decade per try) up to ``max_amplitude`` before
    giving up.
    """
    if bif.kind != "SymmetryBreaking":
        raise ContinuationError(f"cannot switch at a {bif.kind} point")
    w = bif.null_direction / np.linalg.norm(bif.null_direction)
    amp = amplitude
    last_exc = None
    while amp <= max_amplitude:
        y_pred = bif.y + sign * amp * w
        try:
            J = problem.jacobian(y_pred, cfg.fd_step)
            y_c, data, rnorm = _corrector(problem, y_pred, w, y_pred, J, cfg)
            transverse = abs(float(w @ (y_c - bif.y)))
            if transverse < 0.25 * amp:
                raise ContinuationError(
                    "corrector reconverged onto the parent branch")
            return problem.make_orbit(y_c, data[0], data[1], rnorm)
        except ContinuationError as exc:
            last_exc = exc
            amp *= math.sqrt(10.0)
    raise ContinuationError(
        f"branch switch failed up to amplitude {max_amplitude}: {last_exc}")


# -- atlas ---------------------------------------------------------------


@dataclass(frozen=True)
class AtlasConfig:
    energy_range: tuple = (1.01, 26.0)
    speed_range: tuple = (0.0, 8.0)
    seed_energy: float = 1.05
    #: the seed family is only traced this far; its first symmetry-breaking
    #: point (the onset of the moving gait family) sits just below this
    root_energy_max: float = 1.12
    step: StepConfig = StepConfig()
    max_branches: int = 16
    max_depth: int = 5
    max_points: int = 500
    switch_amplitude: float = 1e-3
    dedup_tol: float = 1e-6
    min_child_points: int = 4
    #: energies at which the pronking family is seeded by mid-stance
    #: mirror shooting (robust at all speeds); None disables
    pf_energy_grid: tuple = tuple(float(e) for e in
                                  list(np.arange(1.3, 4.01, 0.3))
                                  + list(np.arange(4.5, 26.0, 0.75)))

    def step_config(self) -> StepConfig:
        return replace(self.step,
                       lambda_range=self.energy_range,
                       speed_range=(self.speed_range[0] - 0.5,
                                    self.speed_range[1]),
                       max_points=self.max_points)

    def root_step_config(self) -> StepConfig:
        return replace(self.step_config(),
                       lambda_range=(self.energy_range[0],
                                     self.root_energy_max),
                       initial_step=0.005, max_step=0.02)


@dataclass
class Atlas:
    params: ModelParams
    branches: list = field(default_factory=list)
    bifurcations: list = field(default_factory=list)
    exhausted: bool = False
    notes: list = field(default_factory=list)

    def branch_labels(self) -> dict:
        return {b.name: b.label for b in self.branches}

    def labels_present(self) -> set:
        return {b.label for b in self.branches if b.label}

    def branches_with_label(self, label: str) -> list:
        return [b for b in self.branches if b.label == label]


def _hop_seed(params: ModelParams, energy: float,
              config: IntegratorConfig) -> OrbitSolution:
    """The in-place vertical hop: an exact fixed point at any apex height."""
    u = np.zeros(12)
    u[0] = energy / (params.torso_mass * params.gravity)
    u_next, period, events = _return_map_raw(params, u, 50.0, config)
    return OrbitSolution(
        section_state=SectionState.from_array(u),
        period=float(period),
        energy=section_energy(params, u),
        event_schedule=_normalized_events(events, period),
        residual_norm=float(np.linalg.norm(u_next - u)),
        params=params)


def _canonical_distance(u_a: np.ndarray, u_b: np.ndarray) -> float:
    """Section distance up to the structural left-right leg swaps."""
    from .symmetry import canonical_section_images
    return min(float(np.max(np.abs(img - u_b)))
               for img in canonical_section_images(u_a))


def _orbit_on_branch(problem, orbit: OrbitSolution, branch: Branch,
                     cfg: StepConfig, tol: float) -> bool:
    """Does the orbit lie on this branch (compared at matched parameter)?

    Finds a bracketing pair of branch points around the orbit's parameter
    value, re-converges the branch there with the parameter pinned, and
    compares section states up to left-right leg swaps.
    """
    lam = problem.lambda_of_orbit(orbit)
    u = orbit.u()
    pts = branch.points
    pin = np.zeros(N_Y)
    pin[12] = 1.0
    for i in range(len(pts) - 1):
        la, lb = pts[i].y[12], pts[i + 1].y[12]
        if not (min(la, lb) - 1e-12 <= lam <= max(la, lb) + 1e-12):
            continue
        w = 0.5 if la == lb else (lam - la) / (lb - la)
        y_interp = (1.0 - w) * pts[i].y + w * pts[i + 1].y
        y_interp[12] = lam
        # quick reject: interpolation error is at most a few step-lengths
        gap = _canonical_distance(y_interp[:12], u)
        step_len = float(np.linalg.norm(pts[i + 1].y - pts[i].y))
        if gap > max(0.5 * step_len, 0.05):
            continue
        try:
            J = problem.jacobian(y_interp, cfg.fd_step)
            y_c, _, _ = _corrector(problem, y_interp, pin, y_interp, J, cfg)
        except ContinuationError:
            continue
        if _canonical_distance(y_c[:12], u) < max(tol, 1e-5):
            return True
    return False


def _label_branch(branch: Branch) -> str:
    """Majority footfall label over the branch's moving points."""
    from collections import Counter
    labels = [pt.schedule_label for pt in branch.points
              if pt.schedule_label and pt.schedule_label != "Unknown"]
    if not labels:
        return "Unknown"
    return Counter(labels).most_common(1)[0][0]


def atlas_sweep(params: ModelParams, config: AtlasConfig = AtlasConfig(),
                integrator: IntegratorConfig = DEFAULT_CONFIG,
                progress=None) -> Atlas:
    """Build the full gait atlas for one model by recursive branch switching.

    Seeds the in-place hop, traces its energy family, switches at every
    detected symmetry-breaking point (both perturbation signs), deduplicates
    children that are left-right images of known branches, and repeats
    breadth-first until no new branches appear or the budget is exhausted.
    """
    problem = ContinuationProblem(params, ENERGY, config=integrator)
    scfg = config.step_config()
    atlas = Atlas(params=params)

    def report(msg):
        if progress is not None:
            progress(msg)

    try:
        seed = _hop_seed(params, config.seed_energy, integrator)
        root = continue_branch(problem, seed, +1, config.root_step_config(),
                               name="B0")
        root.label = _label_branch(root)
        atlas.branches.append(root)
        report(f"root branch: {len(root.points)} points "
               f"({root.termination})")
    except (ContinuationError, HybridIntegrationError,
            InvalidSectionState) as exc:
        # the in-place hop is only periodic with the COM centered; an
        # asymmetric model proceeds on the other seeding mechanisms
        atlas.notes.append(f"in-place hop seeding unavailable: {exc}")
        report(f"in-place hop seeding unavailable: {exc}")

    if config.pf_energy_grid:
        pf = sampled_pronk_branch(problem, config.pf_energy_grid, scfg,
                                  name="B-PF")
        if pf is not None:
            atlas.branches.append(pf)
            report(f"mirror-seeded pronk family: {len(pf.points)} points, "
                   f"speeds {pf.speed_range()[0]:.2f}.."
                   f"{pf.speed_range()[1]:.2f}")

    queue = [(b, 1) for b in atlas.branches]
    n_named = 0
    budget_hit = False
    while queue and not budget_hit:
        branch, depth = queue.pop(0)
        if depth > config.max_depth:
            atlas.notes.append(f"depth cap at branch {branch.name}")
            continue
        bifs = detect_bifurcations(problem, branch, scfg)
        report(f"{branch.name}: "
               f"{sum(1 for b in bifs if b.kind == 'SymmetryBreaking')} "
               f"symmetry-breaking point(s)")
        for bif in bifs:
            atlas.bifurcations.append(bif)
            if bif.kind != "SymmetryBreaking":
                continue
            accepted_children: list[np.ndarray] = []
            for sign in (+1, -1):
                if len(atlas.branches) >= config.max_branches:
                    atlas.exhausted = True
                    atlas.notes.append("branch budget exhausted")
                    budget_hit = True
                    break
                try:
                    child_seed = switch_branch(problem, bif,
                                               config.switch_amplitude, sign,
                                               scfg)
                except ContinuationError as exc:
                    atlas.notes.append(
                        f"switch at {branch.name} qd_x={bif.qd_x:.3f} "
                        f"sign={sign:+d}: {exc}")
                    continue
                u_child = child_seed.u()
                # backward-moving gaits are heading-flip images of forward ones
                if u_child[6] < -1e-6:
                    continue
                if any(_canonical_distance(prev, u_child) < 1e-5
                       for prev in accepted_children):
                    continue
                if any(_orbit_on_branch(problem, child_seed, b, scfg,
                                        config.dedup_tol)
                       for b in atlas.branches):
                    continue
                accepted_children.append(u_child)
                n_named += 1
                name = f"B{n_named}"
                child = _trace_both_ways(problem, child_seed, scfg, name)
                if len(child.points) < config.min_child_points:
                    atlas.notes.append(f"child {name} too short, dropped")
                    continue
                child.label = _label_branch(child)
                bif.child_branch_names.append(name)
                atlas.branches.append(child)
                queue.append((child, depth + 1))
                report(f"  new branch {name} [{child.label}] "
                       f"{len(child.points)} pts, speeds "
                       f"{child.speed_range()[0]:.2f}.."
                       f"{child.speed_range()[1]:.2f}")
            if budget_hit:
                break
    _assign_gait_names(atlas)
    return atlas


def _trace_both_ways(problem, seed, scfg, name) -> Branch:
    fwd = continue_branch(problem, seed, +1, scfg, name=name)
    bwd = continue_branch(problem, seed, -1, scfg, name=name)
    pts = list(reversed(bwd.points[1:])) + fwd.points
    merged = Branch(name=name, parameter=problem.parameter, points=pts,
                    annotations=fwd.annotations + bwd.annotations,
                    termination=f"{bwd.termination}|{fwd.termination}")
    return merged


def sampled_pronk_branch(problem: ContinuationProblem, energies,
                         cfg: StepConfig = StepConfig(),
                         name: str = "PF") -> Branch | None:
    """Pronking family sampled by mirror shooting along an energy ladder.

    At each energy the fastest reversible pronk is taken (the family the
    speed axis is swept by); each is analyzed like any continuation point,
    so bifurcation detection works on the result unchanged.
    """
    from .seeds import find_reversible_pronks
    branch = Branch(name=name, parameter=problem.parameter, points=[])
    prev_tangent = None
    prev_y = None
    arclength = 0.0
    for E in energies:
        if not (cfg.lambda_range[0] <= E <= cfg.lambda_range[1]):
            continue
        try:
            orbs = find_reversible_pronks(problem.base_params, float(E),
                                          config=problem.config,
                                          max_solutions=4)
        except Exception:
            continue
        if not orbs:
            continue
        orb = orbs[0]
        if not (cfg.speed_range[0] <= orb.qd_x <= cfg.speed_range[1]):
            continue
        y = np.empty(N_Y)
        y[:12] = orb.u()
        y[12] = problem.lambda_of_orbit(orb)
        if prev_y is not None:
            arclength += float(np.linalg.norm(y - prev_y))
        try:
            r, period, events = problem.residual(y)
            pt, _ = _analyze_point(problem, y, (period, events),
                                   float(np.linalg.norm(r)), cfg,
                                   prev_tangent, arclength)
        except (ContinuationError, HybridIntegrationError,
                InvalidSectionState):
            continue
        branch.points.append(pt)
        prev_tangent = pt.tangent
        prev_y = y
    if len(branch.points) < 2:
        return None
    branch.termination = "sampled"
    branch.label = _label_branch(branch)
    return branch


def _assign_gait_names(atlas: Atlas) -> None:
    """Give branches unique names derived from their gait labels.

    When a label covers several branches the one spanning the widest speed
    range gets the bare name (so the moving pronk family is "PF" and the
    in-place hop family its suffixed sibling).
    """
    by_label: dict[str, list] = {}
    for b in atlas.branches:
        by_label.setdefault(b.label if b.label else "Unknown", []).append(b)
    mapping = {}
    for label, group in by_label.items():
        group.sort(key=lambda b: b.speed_range()[0] - b.speed_range()[1])
        for i, b in enumerate(group):
            new = label if i == 0 else f"{label}-{i + 1}"
            mapping[b.name] = new
            b.name = new
    for bif in atlas.bifurcations:
        if bif.parent_branch in mapping:
            bif.parent_branch = mapping[bif.parent_branch]
        bif.child_branch_names = [mapping.get(c, c)
                                  for c in bif.child_branch_names]
