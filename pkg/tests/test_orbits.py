"""Poincare map, shooting, and Floquet analysis."""

import json

import numpy as np
import pytest

from gaitatlas.hybrid import DEFAULT_CONFIG
from gaitatlas.model import ModelParams
from gaitatlas.orbits import (InvalidSectionState, OrbitSolution,
                              SectionState, monodromy, poincare_map,
                              section_energy, shoot_orbit,
                              shooting_residual)

PARAMS = ModelParams()


def hop_section(z_apex):
    u = np.zeros(12)
    u[0] = z_apex
    return u


@pytest.fixture(scope="module")
def hop_orbit():
    return shoot_orbit(PARAMS, hop_section(1.1), 1.1)


def test_hop_is_fixed_point():
    u = hop_section(1.1)
    x1, period, traj = poincare_map(PARAMS, u)
    assert np.max(np.abs(x1.to_array() - u)) < 1e-10
    assert traj.stop_reason == "apex"
    assert period == pytest.approx(traj.t_end)
    # section exactness: zero vertical rate and all legs in swing
    assert traj.end_state[8] == pytest.approx(0.0, abs=1e-12)
    assert traj.end_mode.is_flight


def test_poincare_map_rejects_submerged_section():
    u = hop_section(0.5)
    with pytest.raises(InvalidSectionState):
        poincare_map(PARAMS, u, config=DEFAULT_CONFIG.supervised())


def test_perturbed_state_is_not_fixed():
    u = hop_section(1.1)
    u[6] = 0.2  # forward speed breaks the in-place hop
    r, _, _ = shooting_residual(PARAMS, u, section_energy(PARAMS, u))
    assert np.linalg.norm(r[:12]) > 1e-3


def test_shoot_orbit_at_target_energy(hop_orbit):
    orbit = shoot_orbit(PARAMS, hop_section(1.1), 1.5)
    assert orbit.energy == pytest.approx(1.5, abs=1e-8)
    assert abs(orbit.qd_x) < 1e-10
    assert abs(orbit.qd_pitch) < 1e-10
    assert orbit.residual_norm < 1e-9
    # one touchdown and one liftoff per leg, phases in [0, 1)
    kinds = {}
    for ev in orbit.event_schedule:
        kinds.setdefault((int(ev.leg), ev.kind), 0)
        kinds[(int(ev.leg), ev.kind)] += 1
        assert 0.0 <= ev.time < 1.0
    assert all(v == 1 for v in kinds.values())
    assert len(kinds) == 8


def test_resimulation_returns_to_section(hop_orbit):
    u = hop_orbit.u()
    x = u.copy()
    for _ in range(3):
        x1, _, _ = poincare_map(PARAMS, x)
        x = x1.to_array()
    assert np.max(np.abs(x - u)) < 3e-9


def test_shoot_invariant_to_guess_perturbation(hop_orbit):
    rng = np.random.default_rng(17)
    base = shoot_orbit(PARAMS, hop_section(1.3), 1.3)
    for _ in range(3):
        guess = hop_section(1.3)
        guess += rng.normal(0, 1e-4, 12)
        orbit = shoot_orbit(PARAMS, guess, 1.3)
        assert orbit.energy == pytest.approx(base.energy, abs=1e-8)
        assert orbit.period == pytest.approx(base.period, abs=1e-8)


def test_unit_multiplier_present(hop_orbit):
    mults = np.array(hop_orbit.floquet)
    assert np.min(np.abs(mults - 1.0)) < 1e-6


def test_monodromy_eigvec_decay(hop_orbit):
    DP, mults = monodromy(PARAMS, hop_orbit)
    # a strongly contracting eigendirection decays in direct simulation
    w, V = np.linalg.eig(DP)
    idx = int(np.argmin(np.abs(w)))
    lam = w[idx]
    if abs(lam.imag) < 1e-12 and abs(lam) < 0.5:
        v = np.real(V[:, idx])
        v /= np.linalg.norm(v)
        eps = 1e-6
        x1, _, _ = poincare_map(PARAMS, hop_orbit.u() + eps * v)
        growth = np.linalg.norm(x1.to_array() - hop_orbit.u()) / eps
        assert growth < 0.6


def test_orbit_json_round_trip(hop_orbit):
    text = hop_orbit.to_json()
    data = json.loads(text)
    back = OrbitSolution.from_dict(data)
    assert np.array_equal(back.u(), hop_orbit.u())
    assert back.period == hop_orbit.period
    assert back.energy == hop_orbit.energy
    assert back.floquet == hop_orbit.floquet
    assert len(back.event_schedule) == len(hop_orbit.event_schedule)


def test_reversible_pronk_spectrum_structure():
    # the return map forgets the four swing-leg rates at touchdown, so
    # four multipliers vanish; the conservative family contributes an
    # exact unit multiplier. (The (lam, 1/lam) reversible pairing does NOT
    # survive that rank loss; see docs/model-limits.md.)
    from gaitatlas.seeds import find_reversible_pronks
    orbs = find_reversible_pronks(PARAMS, 3.0, l_range=(0.7, 0.9),
                                  l_step=0.004, max_solutions=1)
    assert orbs
    _, mults = monodromy(PARAMS, orbs[0])
    mags = np.sort(np.abs(mults))
    assert np.all(mags[:4] < 1e-6)
    assert np.min(np.abs(np.array(mults) - 1.0)) < 1e-6
    # spectrum is finite-difference converged
    _, mults2 = monodromy(PARAMS, orbs[0], fd_step=3e-5)
    a = np.sort_complex(np.array(mults))
    b = np.sort_complex(np.array(mults2))
    assert np.max(np.abs(a - b)) < 1e-3
