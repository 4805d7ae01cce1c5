"""Acceptance criteria, one test per criterion, verbatim tolerances.

Each test records and prints its own PASS/FAIL line. Several criteria
assert the reference gait structure for this parameter set; the ones the
model dynamics cannot produce are expected to fail red -- the mechanisms
are documented in docs/model-limits.md (test names flag them with
[blocked]).
"""

import itertools
import math

import numpy as np
import pytest

from gaitatlas.hybrid import (DEFAULT_CONFIG, HybridState, StopCondition,
                              HybridIntegrationError, integrate_stride)
from gaitatlas.model import (ContactMode, LegIndex, ModelParams,
                             flight_closed_form, joint_position,
                             stance_field, total_energy)
from gaitatlas.oracle import dae_oracle_field
from gaitatlas.orbits import monodromy, shoot_orbit
from gaitatlas.seeds import find_reversible_pronks
from gaitatlas.symmetry import (ALL_PERMS, SymmetryElement, apply_to_state,
                                fingerprint)

PARAMS = ModelParams()

_RESULTS = []


def record(criterion: str, ok: bool, detail: str):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    _RESULTS.append(line)
    print("\n" + line)


@pytest.fixture(scope="module")
def atlas():
    from gaitatlas.continuation import AtlasConfig, atlas_sweep
    cfg = AtlasConfig(
        energy_range=(1.01, 26.0),
        speed_range=(0.0, 8.0),
        max_branches=12,
        max_points=250,
        pf_energy_grid=tuple(float(e) for e in
                             list(np.arange(1.5, 4.01, 0.5))
                             + list(np.arange(4.5, 26.0, 1.5))),
    )
    return atlas_sweep(PARAMS, cfg, DEFAULT_CONFIG)


def random_stride_state(rng):
    y = np.zeros(14)
    y[1] = rng.uniform(1.05, 1.5)
    y[2] = rng.normal(0, 0.05)
    y[7] = rng.uniform(0, 1.5)
    y[9] = rng.normal(0, 0.2)
    y[3:7] = rng.normal(0, 0.1, 4)
    y[10:14] = rng.normal(0, 0.8, 4)
    return y


def test_criterion_1_energy_conservation():
    rng = np.random.default_rng(101)
    max_drift = 0.0
    max_jump = 0.0
    strides = 0
    attempts = 0
    while strides < 100 and attempts < 400:
        attempts += 1
        y0 = random_stride_state(rng)
        try:
            traj = integrate_stride(PARAMS, HybridState.flight(y0),
                                    StopCondition.fixed_horizon(2.5))
        except HybridIntegrationError:
            continue
        if len(traj.events) < 2:
            continue
        strides += 1
        max_drift = max(max_drift, traj.max_energy_drift())
        # pre/post transition energies from the adjacent samples
        energies = traj.energies()
        for ev in traj.events:
            i = int(np.searchsorted(traj.times, ev.time, side="left"))
            if 0 < i < len(energies) - 1:
                max_jump = max(max_jump,
                               abs(float(energies[i + 1] - energies[i - 1])))
    record("1 energy conservation",
           strides >= 100 and max_drift < 1e-8,
           f"{strides} strides, max relative drift {max_drift:.2e}, "
           f"max transition jump {max_jump:.2e}")
    assert strides >= 100
    assert max_drift < 1e-8

    # transition-level check at exact event states
    from gaitatlas.hybrid import apply_transition, EventRecord
    jumps = []
    for _ in range(40):
        y = np.zeros(14)
        y[1] = 1.0
        y[7] = rng.normal(0, 2)
        y[8] = rng.uniform(-1.5, -0.1)
        y[9] = rng.normal(0, 0.5)
        st = HybridState.flight(y)
        before = total_energy(PARAMS, y, st.mode)
        after_state = apply_transition(
            PARAMS, st, EventRecord(LegIndex.LH, "touchdown", 0.0))
        after = total_energy(PARAMS, after_state.continuous.to_array(),
                             after_state.mode)
        jumps.append(abs(after - before))
    assert max(jumps) < 1e-10


def test_criterion_2_flight_analytic_oracle():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        y0 = np.zeros(14)
        y0[1] = rng.uniform(2.0, 4.0)
        y0[7:10] = rng.normal(0, 1, 3)
        y0[8] = abs(y0[8])
        y0[3:7] = rng.normal(0, 0.3, 4)
        y0[10:14] = rng.normal(0, 2, 4)
        traj = integrate_stride(PARAMS, HybridState.flight(y0),
                                StopCondition.fixed_horizon(1.0))
        expect = flight_closed_form(PARAMS, y0, traj.t_end)
        worst = max(worst, float(np.max(np.abs(traj.end_state - expect))))
    record("2 flight analytic oracle", worst < 1e-8,
           f"max deviation over 1 time unit {worst:.2e}")
    assert worst < 1e-8


def test_criterion_3_stance_oracle_equivalence():
    rng = np.random.default_rng(7)
    subsets = list(itertools.chain.from_iterable(
        itertools.combinations(range(4), r) for r in (1, 2, 3, 4)))
    worst = 0.0
    checked = 0
    while checked < 200:
        subset = subsets[checked % len(subsets)]
        y = np.zeros(14)
        y[0] = rng.normal(0, 0.1)
        y[1] = rng.uniform(0.85, 1.0)
        y[2] = rng.normal(0, 0.12)
        y[7:10] = rng.normal(0, 0.8, 3)
        y[3:7] = rng.normal(0, 0.2, 4)
        y[10:14] = rng.normal(0, 1, 4)
        stance = [False] * 4
        anchors = [0.0] * 4
        for leg in subset:
            side = "hind" if leg in (0, 3) else "front"
            jx, jz = joint_position(PARAMS, y, side)
            anchors[leg] = jx + rng.normal(0, 0.15)
            stance[leg] = True
        mode = ContactMode(tuple(stance), tuple(anchors))
        try:
            ydot_r, _ = stance_field(PARAMS, y, mode)
        except Exception:
            continue
        ydot_o, _ = dae_oracle_field(PARAMS, y, mode, foot_mass=1e-8)
        worst = max(worst, float(np.max(np.abs(ydot_r - ydot_o))))
        checked += 1
    record("3 stance oracle equivalence", worst < 1e-6,
           f"{checked} states, all 15 subsets, worst accel gap {worst:.2e}")
    assert worst < 1e-6


@pytest.fixture(scope="module")
def pf_census():
    """Reversible pronks across the energy ladder (the PF family)."""
    energies = [1.2, 1.35, 1.5, 1.75, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0,
                7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0, 14.0, 14.6, 15.0]
    orbits = []
    for E in energies:
        orbits.extend(find_reversible_pronks(PARAMS, E, max_solutions=6))
    return orbits


def test_criterion_4_pronking_branch(pf_census):
    speeds = sorted(o.qd_x for o in pf_census)
    speeds = [0.0] + speeds  # the in-place hop anchors the zero-speed end
    gaps = np.diff(speeds)
    max_gap = float(gaps.max()) if len(gaps) else math.inf
    top = speeds[-1] if speeds else 0.0
    worst_pitch = max((abs(o.qd_pitch) for o in pf_census), default=1.0)
    near = [o for o in pf_census if abs(o.qd_x - 5.2) < 0.15]
    ok = top >= 5.2 and max_gap < 0.45 and worst_pitch < 1e-8 and near
    record("4 pronking branch",
           ok,
           f"PF family sweeps q̇_x 0..{top:.2f} "
           f"(max speed gap {max_gap:.2f}), |q̇_pitch| <= "
           f"{worst_pitch:.1e}, orbit near 5.2: "
           f"{'yes' if near else 'no'}")
    assert worst_pitch < 1e-8
    assert top >= 5.2
    assert max_gap < 0.45
    assert near, "no pronking orbit near q̇_x = 5.2"


def _sym_breaking(atlas):
    return [b for b in atlas.bifurcations if b.kind == "SymmetryBreaking"]


def test_criterion_5_point_A_blocked(atlas):
    """[blocked] bounding onset on PF at 4.4 +- 0.2 with BG/BE children."""
    pf_branches = [b for b in atlas.branches
                   if (b.label or "").startswith("PF")]
    cands = [bf for bf in _sym_breaking(atlas)
             if any(bf.parent_branch == b.name for b in pf_branches)
             and abs(bf.qd_x - 4.4) <= 0.2]
    children = set()
    for bf in cands:
        children.update(c.split("-")[0] for c in bf.child_branch_names)
    ok = bool(cands) and {"BG", "BE"} <= children
    record("5 bifurcation point A", ok,
           f"candidates at 4.4±0.2 on PF: {len(cands)}, children {children}"
           f" (the model does not produce this point; docs/model-limits.md)")
    assert cands, "no symmetry-breaking point at 4.4 +- 0.2 on PF"
    assert {"BG", "BE"} <= children


def test_criterion_6_points_B_to_G_blocked(atlas):
    """[blocked] half-bound and gallop onsets at the quoted speeds."""
    from gaitatlas.cli import REFERENCE_TABLE
    labels = {b.name: b.label for b in atlas.branches}
    missing = []
    for name in "BCDEFG":
        ref = REFERENCE_TABLE[name]
        hit = [bf for bf in _sym_breaking(atlas)
               if (labels.get(bf.parent_branch, "") or "").split("-")[0]
               == ref["parent"]
               and abs(bf.qd_x - ref["qd_x"]) <= ref["tol"]]
        if not hit:
            missing.append(name)
    record("6 bifurcation points B-G", not missing,
           f"missing points: {missing or 'none'}")
    assert not missing


def test_criterion_7_gait_census_blocked(atlas):
    expected = {"PF", "BG", "BE", "HG", "HE", "FG", "FE", "GG", "GE"}
    labels = {(b.label or "").split("-")[0] for b in atlas.branches}
    labels.discard("")
    record("7 gait census", labels == expected,
           f"labels found: {sorted(labels)}")
    assert labels == expected


def test_criterion_8_symmetry_fingerprints(atlas, pf_census):
    # PF rows are testable on the census; other labels depend on the
    # missing branches
    pronk = pf_census[len(pf_census) // 2]
    retained, time_rev, _, _ = fingerprint(PARAMS, pronk)
    pf_ok = set(retained) == set(ALL_PERMS) and time_rev
    labels_present = {(b.label or "").split("-")[0] for b in atlas.branches}
    others_ok = {"BG", "BE", "HG", "HE", "FG", "FE", "GG", "GE"} <= \
        labels_present
    record("8 symmetry fingerprints", pf_ok and others_ok,
           f"PF retains all 24 permutations and reversal: {pf_ok}; "
           f"non-pronk labels available to test: {others_ok}")
    assert pf_ok
    assert others_ok, "bounding and faster gaits absent; see docs/model-limits.md"


def test_criterion_9_asymmetric_models(pf_census):
    # no pronking with q̇_x > 0.1 for the rear-shifted model: re-shoot the
    # symmetric pronks with l_bH = 0.4 and demand they fail or stop
    # being pronks
    params_a = ModelParams(com_from_hip=0.4)
    survivors = []
    for orb in pf_census[:6]:
        if orb.qd_x < 0.5:
            continue
        try:
            got = shoot_orbit(params_a, orb.u(), orb.energy, tol=1e-9,
                              max_iter=25, compute_floquet=False)
        except Exception:
            continue
        from gaitatlas.symmetry import classify_schedule
        label, _ = classify_schedule(got)
        if label == "PF" and got.qd_x > 0.1 and abs(got.qd_pitch) < 1e-8:
            survivors.append(got.qd_x)
    no_pf = not survivors
    # the bounding clauses need BG/BE orbits, which the model as
    # specified does not produce; report them as failed
    record("9 asymmetric models", False,
           f"no moving PF for l_bH=0.4: {no_pf} (survivors {survivors}); "
           f"BG/BE onset and reversal-breaking clauses untestable: no "
           f"bounding orbits exist (docs/model-limits.md)")
    assert no_pf
    pytest.fail("bounding-branch clauses of criterion 9 are blocked: "
                "no bounding gaits; see docs/model-limits.md")


def test_criterion_10_floquet_structure(pf_census):
    worst_unit = 0.0
    for orb in [pf_census[0], pf_census[len(pf_census) // 2],
                pf_census[-1]]:
        _, mults = monodromy(PARAMS, orb)
        worst_unit = max(worst_unit,
                         float(np.min(np.abs(np.array(mults) - 1.0))))
    unit_ok = worst_unit < 1e-6

    # reversible pairing clause, tested verbatim
    _, mults = monodromy(PARAMS, pf_census[len(pf_census) // 2])
    kept = [m for m in mults if abs(m) > 0.05]
    pair_err = max(min(abs(mm - 1.0 / m) for mm in kept) for m in kept)
    pair_ok = pair_err < 1e-4
    record("10 floquet structure", unit_ok and pair_ok,
           f"unit multiplier within {worst_unit:.1e}; "
           f"(λ,1/λ) pairing error {pair_err:.2e} "
           f"(broken by the touchdown velocity reset; docs/model-limits.md)")
    assert unit_ok
    assert pair_ok, ("reversible multiplier pairing does not hold; "
                     "see docs/model-limits.md")


def test_criterion_11_group_axioms():
    rng = np.random.default_rng(11)
    exact = True
    for _ in range(1000):
        perm_g = tuple(rng.permutation(4))
        perm_h = tuple(rng.permutation(4))
        g = SymmetryElement(perm_g, bool(rng.integers(2)),
                            bool(rng.integers(2)))
        h = SymmetryElement(perm_h, bool(rng.integers(2)),
                            bool(rng.integers(2)))
        x = rng.normal(0, 1, 14)
        if not np.array_equal(apply_to_state(g * h, x),
                              apply_to_state(g, apply_to_state(h, x))):
            exact = False
            break
        if not (g * g.inverse()).is_identity:
            exact = False
            break
        if not np.array_equal(
                apply_to_state(SymmetryElement.identity(), x), x):
            exact = False
            break
    psi = SymmetryElement.reversal()
    xi = SymmetryElement.heading_flip()
    invol = (psi * psi).is_identity and (xi * xi).is_identity
    record("11 group axioms", exact and invol,
           f"1000 triples exact: {exact}; reversal and heading flip "
           f"are involutions: {invol}")
    assert exact and invol


def test_zzz_summary():
    print("\n" + "=" * 72)
    print("acceptance summary")
    print("=" * 72)
    for line in _RESULTS:
        print(line)
    print("=" * 72)
