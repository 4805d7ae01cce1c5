"""Group operators, equivariance, fingerprints, classification."""

import numpy as np
import pytest

from gaitatlas.hybrid import EventRecord
from gaitatlas.model import (ContactMode, LegIndex, ModelParams,
                             flight_field, stance_field)
from gaitatlas.orbits import OrbitSolution, SectionState
from gaitatlas.symmetry import (ALL_PERMS, SWAP_BOTH, SWAP_FRONT,
                                SWAP_HIND, SymmetryElement, apply_to_mode,
                                apply_to_state, classify, classify_schedule,
                                fingerprint, orbit_image_residual)

PARAMS = ModelParams()


def random_state(rng):
    y = rng.normal(0, 1, 14)
    y[1] = abs(y[1]) + 0.5
    return y


def random_element(rng, with_shift=False):
    perm = tuple(rng.permutation(4))
    return SymmetryElement(
        perm=perm,
        time_reversal=bool(rng.integers(0, 2)),
        spatial_flip=bool(rng.integers(0, 2)),
        x_shift=float(rng.normal()) if with_shift else 0.0,
    )


def test_identity_and_simple_actions():
    rng = np.random.default_rng(0)
    x = random_state(rng)
    assert np.array_equal(apply_to_state(SymmetryElement.identity(), x), x)

    # velocity reversal leaves the configuration alone
    x = np.zeros(14)
    x[7] = 5.2
    x[9] = 0.3
    rx = apply_to_state(SymmetryElement.reversal(), x)
    assert rx[7] == -5.2 and rx[9] == -0.3
    assert np.array_equal(rx[:7], x[:7])

    # a front-pair swap exchanges the LF and RF slots and is an involution
    x = random_state(rng)
    g = SymmetryElement.permutation(SWAP_FRONT)
    gx = apply_to_state(g, x)
    assert gx[3 + 1] == x[3 + 2] and gx[3 + 2] == x[3 + 1]
    assert np.array_equal(apply_to_state(g, gx), x)


def test_group_axioms_exact():
    rng = np.random.default_rng(1)
    for _ in range(300):
        g = random_element(rng)
        h = random_element(rng)
        x = random_state(rng)
        lhs = apply_to_state(g * h, x)
        rhs = apply_to_state(g, apply_to_state(h, x))
        assert np.array_equal(lhs, rhs)
        assert (g * g.inverse()).is_identity
        assert np.array_equal(
            apply_to_state(g.inverse(), apply_to_state(g, x)), x)


def test_involutions_and_orders():
    psi = SymmetryElement.reversal()
    xi = SymmetryElement.heading_flip()
    assert (psi * psi).is_identity
    assert (xi * xi).is_identity
    for perm in ALL_PERMS:
        g = SymmetryElement.permutation(perm)
        power = SymmetryElement.identity()
        order = 0
        for _ in range(24):
            power = g * power
            order += 1
            if power.is_identity:
                break
        assert power.is_identity
        assert 24 % order == 0


def test_translation_composition():
    t = SymmetryElement.translation(1.5)
    xi = SymmetryElement.heading_flip()
    x = random_state(np.random.default_rng(3))
    lhs = apply_to_state(xi * t, x)
    rhs = apply_to_state(xi, apply_to_state(t, x))
    assert np.allclose(lhs, rhs)
    inv = (xi * t).inverse()
    assert np.allclose(apply_to_state(inv, lhs), x)


def test_flight_field_equivariance():
    rng = np.random.default_rng(5)
    for _ in range(20):
        x = random_state(rng)
        g = random_element(rng)
        if g.time_reversal:
            continue
        gx = apply_to_state(g, x)
        lhs = flight_field(PARAMS, gx)
        g0 = SymmetryElement(g.perm, False, g.spatial_flip, 0.0)
        assert np.allclose(lhs, _tangent_map(g0, flight_field(PARAMS, x)),
                           atol=1e-12)


def _tangent_map(g, v):
    # tangent vectors transform with the linear part (no x shift);
    # both position and velocity blocks see the same signs/permutation
    out = v.copy()
    res = out.copy()
    for i in range(4):
        res[3 + g.perm[i]] = out[3 + i]
        res[10 + g.perm[i]] = out[10 + i]
    if g.spatial_flip:
        res[0] = -res[0]; res[2] = -res[2]; res[3:7] = -res[3:7]
        res[7] = -res[7]; res[9] = -res[9]; res[10:14] = -res[10:14]
    return res


def test_stance_field_equivariance_left_right():
    rng = np.random.default_rng(6)
    g = SymmetryElement.permutation(SWAP_HIND)
    for _ in range(10):
        y = np.zeros(14)
        y[0] = rng.normal(0, 0.2)
        y[1] = rng.uniform(0.85, 1.0)
        y[2] = rng.normal(0, 0.1)
        y[3:7] = rng.normal(0, 0.2, 4)
        y[7:14] = rng.normal(0, 0.7, 7)
        mode = ContactMode((True, False, False, True),
                           (y[0] - 0.4, 0, 0, y[0] - 0.6))
        try:
            f, _ = stance_field(PARAMS, y, mode)
        except Exception:
            continue
        gy = apply_to_state(g, y)
        gmode = apply_to_mode(g, mode)
        gf, _ = stance_field(PARAMS, gy, gmode)
        assert np.allclose(gf, _tangent_map(g, f), atol=1e-12)


def test_reversal_flow_conjugacy():
    # flow(psi x, t) = psi flow(x, -t) within one stance domain
    from scipy.integrate import solve_ivp
    from gaitatlas import _dynamics as dyn
    p = PARAMS.pack()
    y0 = np.zeros(14)
    y0[1] = 0.93
    y0[7] = 0.8
    y0[8] = -0.2
    y0[3:7] = (0.05, -0.03, 0.02, 0.01)
    y0[10:14] = (0.3, -0.2, 0.4, 0.1)
    stance = np.array([1, 0, 0, 1], dtype=np.uint8)
    anchors = np.array([-0.52, 0.0, 0.0, -0.45])

    def f(t, y):
        out = np.empty(14)
        dyn.rhs(y, p, stance, anchors, out)
        return out

    psi = SymmetryElement.reversal()
    y_psi = apply_to_state(psi, y0)
    fwd = solve_ivp(f, (0, 0.05), y_psi, method="DOP853",
                    rtol=1e-12, atol=1e-12)
    bwd = solve_ivp(f, (0, -0.05), y0, method="DOP853",
                    rtol=1e-12, atol=1e-12)
    assert np.allclose(fwd.y[:, -1], apply_to_state(psi, bwd.y[:, -1]),
                       atol=1e-10)


# -- fingerprints and classification on real orbits ------------------------


@pytest.fixture(scope="module")
def pronk():
    from gaitatlas.seeds import find_reversible_pronks
    orbs = find_reversible_pronks(PARAMS, 3.0, l_range=(0.7, 0.9),
                                  l_step=0.004, max_solutions=1)
    assert orbs
    return orbs[0]


def test_pronk_retains_every_permutation(pronk):
    retained, time_rev, marginal, table = fingerprint(PARAMS, pronk)
    assert set(retained) == set(ALL_PERMS)
    assert time_rev
    assert len(table) == 25


def test_pronk_image_residuals(pronk):
    g = SymmetryElement.permutation(SWAP_BOTH)
    assert orbit_image_residual(PARAMS, g, pronk) < 1e-7
    psi = SymmetryElement.reversal()
    assert orbit_image_residual(PARAMS, psi, pronk) < 1e-6


def test_classify_pronk(pronk):
    label = classify(PARAMS, pronk)
    assert label.label == "PF"
    assert label.beats == 1
    assert label.time_reversible


def _schedule_orbit(td_phases, lo_phases):
    events = []
    for leg in range(4):
        events.append(EventRecord(LegIndex(leg), "touchdown",
                                  td_phases[leg]))
        events.append(EventRecord(LegIndex(leg), "liftoff",
                                  lo_phases[leg]))
    u = np.zeros(12)
    u[0] = 1.1
    return OrbitSolution(SectionState.from_array(u), 1.0, 1.1,
                         tuple(events), 0.0, PARAMS)


def test_classify_schedule_patterns():
    # four simultaneous touchdowns: pronking
    orb = _schedule_orbit([0.3] * 4, [0.5] * 4)
    assert classify_schedule(orb) == ("PF", 1)
    # hind pair first: bound with gathered suspension
    orb = _schedule_orbit([0.1, 0.3, 0.3, 0.1], [0.2, 0.45, 0.45, 0.2])
    assert classify_schedule(orb) == ("BG", 2)
    # front pair first: extended suspension
    orb = _schedule_orbit([0.3, 0.1, 0.1, 0.3], [0.45, 0.2, 0.2, 0.45])
    assert classify_schedule(orb) == ("BE", 2)
    # hind synchronized, front split, hind leading: three beats
    orb = _schedule_orbit([0.1, 0.3, 0.4, 0.1], [0.2, 0.42, 0.52, 0.2])
    label, beats = classify_schedule(orb)
    assert beats == 3 and label[0] == "H"
    # all four distinct: galloping
    orb = _schedule_orbit([0.1, 0.3, 0.4, 0.2], [0.25, 0.45, 0.55, 0.35])
    label, beats = classify_schedule(orb)
    assert beats == 4 and label[0] == "G"
    # long-phase-delay diagonal pattern fits no family
    orb = _schedule_orbit([0.1, 0.3, 0.1, 0.3], [0.2, 0.4, 0.2, 0.4])
    assert classify_schedule(orb)[0] == "Unknown"
