import math

import pytest

from schurkit import (Kernel, ProfileSet, SparseFunction, ZD,
                      autocorrelation, autocorrelation_kernel, canonicalize,
                      collection_kernel, decompose_sequence, dirac,
                      extract_profiles, norm_convergence_diagnostic,
                      normalized_indicator, profile_distance)
from schurkit.profiles import TestFamily as Family, TestMember as Member
from schurkit.seeding import stream

from test_functions import random_sparse

Z1 = ZD(1)


def folner_seq(n_lo, n_hi, p):
    return [normalized_indicator(Z1, [(i,) for i in range(-n, n + 1)], p)
            for n in range(n_lo, n_hi + 1)]


def two_bump_seq(N, p):
    v = 2.0 ** (-1.0 / p)
    return [SparseFunction(Z1, {(-n,): v, (n,): v}) for n in range(1, N + 1)]


# -- canonicalization ---------------------------------------------------------


def test_canonicalize_examples():
    assert canonicalize(dirac(Z1, (7,)), 1.5).alpha.entries == {(0,): 1.0}
    f = SparseFunction(Z1, {(3,): 0.5, (4,): 0.25})
    assert canonicalize(f, 1.5).alpha.entries == {(0,): 0.5, (1,): 0.25}
    # tie between the peaks at 0 and 5: the order-minimal peak moves to e
    g = SparseFunction(Z1, {(0,): 0.5, (5,): 0.5})
    assert canonicalize(g, 1).alpha.entries == {(0,): 0.5, (5,): 0.5}
    assert canonicalize(SparseFunction(Z1, {}), 2).alpha.entries == {}


def test_canonicalize_idempotent_and_orbit_constant():
    rng = stream(67, 0)
    for _ in range(15):
        f = random_sparse(Z1, rng, n_points=4, radius=5)
        scale = f.lp_norm(1.5)
        f = SparseFunction(Z1, {x: v / max(scale, 1.0) for x, v in f.entries.items()})
        base = canonicalize(f, 1.5)
        assert canonicalize(base.alpha, 1.5).alpha == base.alpha
        for shift in range(-6, 7):
            moved = f.translate_left((shift,))
            assert canonicalize(moved, 1.5).alpha == base.alpha


# -- test family and distance -------------------------------------------------


def test_family_weights():
    fam = Family.default(Z1, radii=(1, 2), heights=(1.0, 0.5))
    assert len(fam) == 4
    assert fam.members[0].weight == 2 ** -1 / (1 + 1.0)
    assert fam.members[1].weight == 2 ** -2 / (1 + 0.5)
    assert set(fam.members[0].table) == set(Z1.ball((0,), 1))


def test_distance_singleton_vs_empty_hand_value():
    # family with the single member h_1 = 1_{e}: the pair statistic of the
    # unit dirac profile is 1, the empty collection gives 0, and the member
    # weight is 2^-1 / (1 + 1) = 1/4
    fam = Family((Member(1, 0, 1.0, {(0,): 1.0}),))
    xi = ProfileSet((canonicalize(dirac(Z1, (0,)), 1.5),), 1.5)
    empty = ProfileSet((), 1.5)
    d = profile_distance(xi, empty, fam)
    assert abs(d - 0.25) < 1e-15


def test_distance_zero_on_self_and_orbits():
    fam = Family.default(Z1)
    p = 1.5
    f = SparseFunction(Z1, {(0,): 0.6, (2,): 0.4})
    xi = ProfileSet((canonicalize(f, p),), p)
    assert profile_distance(xi, xi, fam) == 0.0
    shifted = ProfileSet((canonicalize(f.translate_left((9,)), p),), p)
    assert profile_distance(xi, shifted, fam) < 1e-15


def test_distance_symmetry_triangle_truncation():
    fam = Family.default(Z1)
    p = 1.5
    rng = stream(71, 1)
    sets = []
    for _ in range(3):
        f = random_sparse(Z1, rng, n_points=3, radius=4)
        scale = max(f.lp_norm(p), 1.0)
        f = SparseFunction(Z1, {x: v / scale for x, v in f.entries.items()})
        sets.append(ProfileSet((canonicalize(f, p),), p))
    a, b, c = sets
    assert abs(profile_distance(a, b, fam) - profile_distance(b, a, fam)) < 1e-15
    assert profile_distance(a, c, fam) <= (profile_distance(a, b, fam)
                                           + profile_distance(b, c, fam) + 1e-12)
    # truncation: dropping members changes the value by at most 2^-depth
    full = profile_distance(a, b, fam)
    for depth in (2, 4, 6):
        assert abs(full - profile_distance(a, b, fam, depth)) <= 2.0 ** -depth


def test_distance_requires_matching_exponent():
    fam = Family.default(Z1)
    with pytest.raises(ValueError):
        profile_distance(ProfileSet((), 1.2), ProfileSet((), 1.5), fam)


# -- greedy extraction ----------------------------------------------------------


def test_extract_two_separated_peaks():
    p = 1.5
    v = 2.0 ** (-1.0 / p)
    f = SparseFunction(Z1, {(0,): v, (40,): v})
    comps, resid = extract_profiles(f, p, sep_r=2, ext_R=8, eps=0.25, max_k=16)
    assert len(comps) == 2 and not resid
    supports = [set(c.entries) for _, c in comps]
    assert supports == [{(0,)}, {(40,)}] or supports == [{(40,)}, {(0,)}]


def test_extract_folner_dissipates():
    p = 1.5
    n = 200
    f = normalized_indicator(Z1, [(i,) for i in range(-n, n + 1)], p)
    # ball mass at radius 2 is 5/(2n+1); any eps above it extracts nothing
    eps = 5 / (2 * n + 1) + 0.01
    comps, resid = extract_profiles(f, p, sep_r=2, ext_R=8, eps=eps, max_k=16)
    assert comps == [] and resid == f


def test_extract_dirac():
    comps, resid = extract_profiles(dirac(Z1, (0,)), 2, sep_r=2, ext_R=8,
                                    eps=0.5, max_k=4)
    assert len(comps) == 1 and comps[0][1].entries == {(0,): 1.0} and not resid


def test_extract_mass_bookkeeping_exact():
    rng = stream(73, 2)
    p = 1.5
    for _ in range(60):
        f = random_sparse(Z1, rng, n_points=7, radius=12)
        comps, resid = extract_profiles(f, p, sep_r=1, ext_R=3, eps=1e-3,
                                        max_k=16)
        rebuilt = dict(resid.entries)
        for _, c in comps:
            for x, v in c.entries.items():
                assert x not in rebuilt
                rebuilt[x] = v
        assert rebuilt == f.entries
        total = sum(c.lp_mass(p) for _, c in comps) + resid.lp_mass(p)
        assert abs(total - f.lp_mass(p)) < 1e-12


def test_extract_argument_validation():
    f = dirac(Z1, (0,))
    with pytest.raises(ValueError):
        extract_profiles(f, 2, sep_r=3, ext_R=2, eps=0.1, max_k=4)
    with pytest.raises(ValueError):
        extract_profiles(f, 2, sep_r=1, ext_R=2, eps=0.0, max_k=4)


# -- sequence decomposition -------------------------------------------------------


def test_decompose_two_bump():
    p = 1.5
    report = decompose_sequence(two_bump_seq(20, p), p)
    assert report.stable
    assert len(report.xi) == 2
    v = 2.0 ** (-1.0 / p)
    for pr in report.xi.profiles:
        assert pr.alpha.entries == {(0,): v}
        assert abs(pr.mass() - 0.5) < 1e-12
    assert max(report.residual_pp) == 0.0
    seps = report.min_separation()
    assert all(b > a for a, b in zip(seps, seps[1:]))
    assert report.checks["residual_pp_final_ok"]
    assert report.checks["residual_inf_final_ok"]


def test_decompose_dirac():
    report = decompose_sequence([dirac(Z1, (0,)) for _ in range(6)], 2)
    assert report.stable and len(report.xi) == 1
    assert report.xi.profiles[0].alpha.entries == {(0,): 1.0}
    assert max(report.residual_pp) == 0.0


def test_decompose_folner_dissipates():
    p = 1.5
    report = decompose_sequence(folner_seq(1, 200, p), p, eps=0.05)
    assert report.stable
    assert len(report.xi) == 0
    assert abs(report.residual_pp[-1] - 1.0) < 1e-6
    assert report.checks["residual_inf_final_ok"]
    # sup norm of the residual is nonincreasing past the settle index
    tail = report.residual_inf[report.settle_index:]
    assert all(b <= a + 1e-15 for a, b in zip(tail, tail[1:]))


def test_decompose_orbit_invariance():
    p = 1.5
    fs = two_bump_seq(16, p)
    base = decompose_sequence(fs, p)
    rng = stream(79, 3)
    moved = [f.translate_left((int(rng.integers(-50, 50)),)) for f in fs]
    other = decompose_sequence(moved, p)
    assert other.stable
    assert [pr.alpha.entries for pr in other.xi.profiles] \
        == [pr.alpha.entries for pr in base.xi.profiles]


def test_decompose_reports_unstable():
    p = 1.5
    v = 2.0 ** (-1.0 / p)
    fs = []
    for n in range(1, 13):
        if n % 2:
            fs.append(SparseFunction(Z1, {(-8 * n,): v, (8 * n,): v}))
        else:
            fs.append(SparseFunction(Z1, {(0,): v}))
    report = decompose_sequence(fs, p, eps=0.2)
    assert not report.stable
    assert report.xi is None
    assert "UNSTABLE" in report.diagnostics


def test_decompose_asymptotic_orthogonality_surrogate():
    p = 1.5
    fs = two_bump_seq(20, p)
    report = decompose_sequence(fs, p)
    fN = fs[-1]
    total = autocorrelation(fN, Z1.identity)
    parts = sum(autocorrelation(pr.alpha, Z1.identity)
                for pr in report.xi.profiles)
    resid_l2 = report.residual_pp[-1] ** (2 / p) if report.residual_pp[-1] else 0.0
    assert abs(total - parts - resid_l2) < 1e-12
    # cross terms vanish exactly once the component supports are disjoint
    a, b = report.xi.profiles
    shifted = b.alpha.translate_left((40,))
    cross = sum(a.alpha.value(x) * shifted.value(x) for x in a.alpha.entries)
    assert cross == 0.0


def test_decompose_dp_trajectory_decreases():
    p = 1.5
    fam = Family.default(Z1)
    report = decompose_sequence(two_bump_seq(20, p), p, family=fam)
    traj = report.dp_trajectory
    assert traj is not None
    assert all(b <= a + 1e-12 for a, b in zip(traj, traj[1:]))
    assert traj[-1] < traj[0]
    assert traj[-1] < 1e-12


def test_decompose_validates_input():
    with pytest.raises(ValueError):
        decompose_sequence([dirac(Z1, (0,))], 2)
    big = SparseFunction(Z1, {(0,): 1.0, (1,): 1.0})
    with pytest.raises(ValueError):
        decompose_sequence([big, big], 1.5)


# -- collection kernel and norm convergence ------------------------------------


def test_collection_kernel_examples():
    F = Z1.ball((0,), 3)
    empty = collection_kernel(Z1, ProfileSet((), 1.5), F)
    assert empty.entries == {}
    xi = ProfileSet((canonicalize(dirac(Z1, (0,)), 1.5),), 1.5)
    assert collection_kernel(Z1, xi, F).entries == {(0,): 1.0}


def test_collection_kernel_matches_pointwise_limit():
    p = 1.5
    fs = two_bump_seq(20, p)
    report = decompose_sequence(fs, p)
    F = Z1.ball((0,), 4)
    kxi = collection_kernel(Z1, report.xi, F)
    worst = max(abs(autocorrelation(fs[-1], s) - kxi.value(s)) for s in F)
    assert worst <= 1e-6
    # value at e is the total l^2 mass of the collection
    l2 = sum(pr.alpha.lp_mass(2) for pr in report.xi.profiles)
    assert abs(kxi.value((0,)) - l2) < 1e-14


def test_norm_convergence_single_profile_decays():
    p = 1.5
    fs = []
    for n in range(1, 11):
        w = (1 - 1 / (n + 1)) * 3.0 ** (-1 / p)
        fs.append(SparseFunction(Z1, {(i,): w for i in (-1, 0, 1)}))
    report = decompose_sequence(fs, p, eps=1e-6, tol_match=0.1)
    assert report.stable and len(report.xi) == 1
    diag = norm_convergence_diagnostic(fs, report.xi, radii=(2, 4, 8))
    assert diag["sup_difference"][-1] < diag["sup_difference"][0]
    assert diag["window_norms"][-1][-1] < diag["window_norms"][0][-1]
    assert diag["sup_difference"][-1] < 0.06


def test_norm_convergence_two_profiles_floor():
    p = 1.5
    fs = two_bump_seq(8, p)
    report = decompose_sequence(fs, p)
    assert len(report.xi) == 2
    diag = norm_convergence_diagnostic(fs[3:], report.xi, radii=(2, 4, 8, 16))
    # the interaction term keeps the sup difference at 2^(-2/p)
    floor = 2.0 ** (-2.0 / p)
    assert all(abs(v - floor) < 1e-12 for v in diag["sup_difference"])
    # deep windows see it as long as the bumps fit inside
    assert diag["window_norms"][0][-1] >= floor - 1e-9


def test_profileset_invariants():
    p = 1.5
    small = canonicalize(SparseFunction(Z1, {(0,): 0.3}), p)
    big = canonicalize(SparseFunction(Z1, {(0,): 0.8}), p)
    with pytest.raises(ValueError):
        ProfileSet((small, big), p)  # wrong order
    with pytest.raises(ValueError):
        ProfileSet((big, big, big), p)  # mass above 1
    ProfileSet((big, small), p)
