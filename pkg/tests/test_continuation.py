"""Pseudo-arclength tracing, bifurcation detection, branch switching."""

import numpy as np
import pytest

from gaitatlas.continuation import (ContinuationProblem, StepConfig,
                                    _hop_seed, continue_branch,
                                    detect_bifurcations,
                                    sampled_pronk_branch, switch_branch)
from gaitatlas.hybrid import DEFAULT_CONFIG
from gaitatlas.model import ModelParams

PARAMS = ModelParams()
PROBLEM = ContinuationProblem(PARAMS)

ROOT_CFG = StepConfig(lambda_range=(1.01, 1.12), speed_range=(-0.5, 8.0),
                      max_points=120, initial_step=0.005, max_step=0.02)


@pytest.fixture(scope="module")
def hop_branch():
    seed = _hop_seed(PARAMS, 1.05, DEFAULT_CONFIG)
    return continue_branch(PROBLEM, seed, +1, ROOT_CFG, name="hop")


def test_hop_branch_traces_energy_family(hop_branch):
    lams = hop_branch.lambdas()
    assert lams[0] == pytest.approx(1.05, abs=1e-6)
    assert lams[-1] > 1.10
    assert np.all(np.diff(lams) > 0)
    # every point stays an in-place hop
    for pt in hop_branch.points:
        assert abs(pt.y[6]) < 1e-9
        assert pt.orbit.residual_norm < 1e-9
        assert pt.schedule_label == "PF"
        mults = np.array(pt.orbit.floquet)
        assert np.min(np.abs(mults - 1.0)) < 1e-5


def test_hop_branch_has_gait_onset_bifurcation(hop_branch):
    bifs = detect_bifurcations(PROBLEM, hop_branch, ROOT_CFG)
    sym = [b for b in bifs if b.kind == "SymmetryBreaking"]
    assert len(sym) == 1
    bif = sym[0]
    assert bif.y[12] == pytest.approx(1.0775, abs=5e-3)
    assert bif.sigma2 < 1e-5
    # the breaking mode kicks horizontal speed with synchronized legs
    w = bif.null_direction
    assert abs(w[6]) > 1e-3
    assert np.std(w[8:12]) < 1e-6


def test_switch_onto_moving_family(hop_branch):
    bifs = detect_bifurcations(PROBLEM, hop_branch, ROOT_CFG)
    bif = [b for b in bifs if b.kind == "SymmetryBreaking"][0]
    cfg = StepConfig(lambda_range=(1.01, 2.0), speed_range=(-0.5, 8.0),
                     max_points=40)
    child_plus = switch_branch(PROBLEM, bif, 1e-3, +1, cfg)
    child_minus = switch_branch(PROBLEM, bif, 1e-3, -1, cfg)
    speeds = sorted([child_plus.qd_x, child_minus.qd_x])
    # the two signs give the forward- and backward-moving gait onsets
    assert speeds[0] < -1e-6 < 1e-6 < speeds[1]
    moving = child_plus if child_plus.qd_x > 0 else child_minus
    branch = continue_branch(PROBLEM, moving, +1, cfg, name="pf")
    assert len(branch.points) > 5
    assert branch.points[-1].y[6] > 0.05
    for pt in branch.points:
        assert abs(pt.y[7]) < 1e-8  # pronking keeps zero pitch rate


def test_retrace_is_consistent(hop_branch):
    # reversing direction from a mid-branch point retraces the family:
    # the in-place hop family is exactly u = (E, 0, ..., 0)
    mid = hop_branch.points[len(hop_branch.points) // 2]
    back = continue_branch(PROBLEM, mid.orbit, -1, ROOT_CFG, name="back")
    lam_b = back.lambdas()
    assert lam_b[0] == pytest.approx(mid.y[12], abs=1e-9)
    assert np.all(np.diff(lam_b) < 0)
    for pt in back.points:
        assert pt.y[0] == pytest.approx(pt.y[12], abs=1e-9)
        assert np.max(np.abs(pt.y[1:12])) < 1e-9


def test_detect_empty_on_featureless_segment():
    # too-short branches short-circuit
    from gaitatlas.continuation import Branch
    assert detect_bifurcations(PROBLEM, Branch("x", "TotalEnergy", []),
                               ROOT_CFG) == []
    # the racing pronk family is smooth over this window (second singular
    # value stays near 1e-2 with no dips or determinant flips)
    cfg = StepConfig(lambda_range=(1.01, 9.0), speed_range=(-0.5, 8.5))
    br = sampled_pronk_branch(PROBLEM, (4.0, 4.3, 4.6, 5.0), cfg)
    assert br is not None and len(br.points) >= 3
    bifs = detect_bifurcations(PROBLEM, br, cfg)
    assert [b for b in bifs if b.kind == "SymmetryBreaking"] == []


def test_sampled_pronk_branch_speeds():
    cfg = StepConfig(lambda_range=(1.01, 9.0), speed_range=(-0.5, 8.5))
    br = sampled_pronk_branch(PROBLEM, (3.0, 4.0, 5.0, 6.0, 8.0), cfg)
    assert br is not None
    assert br.label == "PF"
    speeds = br.speeds()
    assert speeds[-1] > 3.5
    assert np.all(np.diff(br.lambdas()) > 0)
    for pt in br.points:
        assert abs(pt.y[7]) < 1e-8
        assert pt.orbit.residual_norm < 1e-8


def test_com_morph_deforms_pronk_into_weak_bound():
    # off-center lever arms torque the torso during all-leg stance, so
    # pronking only exists with the COM centered: continuing the family
    # in the COM position immediately splits hind and front touchdowns
    # (a small-amplitude bound) and picks up pitch rate
    from gaitatlas.continuation import COM_FROM_HIP
    from gaitatlas.seeds import find_reversible_pronks
    orbs = find_reversible_pronks(PARAMS, 3.0, l_range=(0.7, 0.9),
                                  l_step=0.004, max_solutions=1)
    assert orbs
    problem = ContinuationProblem(PARAMS, COM_FROM_HIP, fixed_energy=3.0)
    cfg = StepConfig(lambda_range=(0.35, 0.65), speed_range=(-1.0, 8.0),
                     max_points=60, initial_step=0.01, max_step=0.05)
    br = continue_branch(problem, orbs[0], -1, cfg, name="com")
    lams = br.lambdas()
    assert lams.min() < 0.48
    for pt in br.points:
        off = abs(pt.y[12] - 0.5)
        if off < 1e-9:
            assert pt.schedule_label == "PF"
        elif off > 2e-3:
            assert pt.schedule_label in ("BG", "BE")
            assert abs(pt.y[7]) > 1e-6  # pitching at the apex now


def test_swing_frequency_morph_moves():
    # the same family continues smoothly a short way in swing frequency
    from gaitatlas.continuation import SWING_FREQUENCY
    from gaitatlas.seeds import find_reversible_pronks
    orbs = find_reversible_pronks(PARAMS, 3.0, l_range=(0.7, 0.9),
                                  l_step=0.004, max_solutions=1)
    problem = ContinuationProblem(PARAMS, SWING_FREQUENCY,
                                  fixed_energy=3.0)
    cfg = StepConfig(lambda_range=(19.0, 21.0), speed_range=(-1.0, 8.0),
                     max_points=25, initial_step=0.02, max_step=0.2)
    br = continue_branch(problem, orbs[0], -1, cfg, name="omega")
    lams = br.lambdas()
    assert lams.min() < 19.8  # moved meaningfully off omega = 20
    for pt in br.points:
        assert pt.orbit.params.swing_frequency == pytest.approx(pt.y[12])
        assert pt.orbit.residual_norm < 1e-8
