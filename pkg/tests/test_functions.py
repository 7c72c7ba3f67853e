import math

import pytest

from schurkit import (FreeGroup, SparseFunction, ZD, dirac, lp_distance,
                      normalized_indicator)
from schurkit.seeding import stream


def brute_concentration(f, p, r):
    """Independent oracle: scan every center within distance r of the support."""
    g = f.group
    candidates = set()
    for y in f.entries:
        candidates.update(g.ball(y, r))
    best = (-1.0, None)
    for x in sorted(candidates, key=g.order_key):
        mass = sum(v ** p for z, v in f.entries.items()
                   if g.word_distance(x, z) <= r)
        if mass > best[0] + 1e-15:
            best = (mass, x)
    return best


def random_sparse(group, rng, n_points=6, radius=4, relaxed=False):
    pool = group.ball(group.identity, radius)
    pts = {pool[rng.integers(len(pool))] for _ in range(n_points)}
    vals = rng.uniform(0.05, 1.0, size=len(pts))
    return SparseFunction(group, dict(zip(sorted(pts, key=group.order_key), vals)),
                          relaxed=relaxed)


def test_norm_examples():
    z1 = ZD(1)
    f = SparseFunction(z1, {(0,): 0.5, (5,): 0.5})
    assert f.lp_norm(1) == 1.0
    g = normalized_indicator(z1, [(-1,), (0,), (1,)], 2)
    assert abs(g.lp_norm(2) - 1.0) < 1e-15
    # direct summation oracle for the l^1 norm: 3 * 3^(-1/2) = sqrt(3)
    oracle = sum(v for v in g.entries.values())
    assert abs(g.lp_norm(1) - oracle) < 1e-15
    assert abs(g.lp_norm(1) - math.sqrt(3)) < 1e-12
    assert g.lp_norm(math.inf) == 3 ** -0.5


def test_translates():
    z1 = ZD(1)
    f = dirac(z1, (0,))
    assert f.translate_left((3,)).entries == {(3,): 1.0}
    assert f.translate_right((3,)).entries == {(-3,): 1.0}
    f2 = FreeGroup(2)
    d = dirac(f2, (1,))
    assert d.translate_left((2,)).entries == {(2, 1): 1.0}
    assert d.translate_right((1,)).entries == {(): 1.0}
    assert d.translate_right(f2.identity) == d


def test_translates_preserve_norms():
    z2 = ZD(2)
    rng = stream(2, 0)
    pool = z2.ball(z2.identity, 3)
    for _ in range(20):
        f = random_sparse(z2, rng)
        s = pool[rng.integers(len(pool))]
        for p in (1, 1.5, 2, math.inf):
            assert abs(f.translate_left(s).lp_norm(p) - f.lp_norm(p)) < 1e-14
            assert abs(f.translate_right(s).lp_norm(p) - f.lp_norm(p)) < 1e-14


def test_restrict():
    z1 = ZD(1)
    f = SparseFunction(z1, {(0,): 0.5, (5,): 0.5})
    assert f.restrict((0,), 2).entries == {(0,): 0.5}
    assert f.restrict((0,), 5) == f
    assert f.restrict((100,), 2).entries == {}


def test_concentration_examples():
    z1 = ZD(1)
    f = dirac(z1, (0,))
    for r in (0, 1, 3):
        q, _ = f.concentration(2, r)
        assert q == 1.0
    # Folner indicator: q_f(r) = min(2r+1, 2n+1) / (2n+1)
    n = 10
    g = normalized_indicator(z1, [(i,) for i in range(-n, n + 1)], 2)
    q, center = g.concentration(2, 2)
    oracle_q, oracle_center = brute_concentration(g, 2, 2)
    assert abs(q - oracle_q) < 1e-15
    assert center == oracle_center
    assert abs(q - 5 / 21) < 1e-14
    # two far peaks: both isolated, q = 1/2
    p = 1.5
    h = SparseFunction(z1, {(0,): 2 ** (-1 / p), (40,): 2 ** (-1 / p)})
    q, center = h.concentration(p, 3)
    oq, oc = brute_concentration(h, p, 3)
    assert abs(q - 0.5) < 1e-14 and abs(q - oq) < 1e-15 and center == oc


def test_concentration_matches_oracle_random():
    z2 = ZD(2)
    rng = stream(7, 1)
    for _ in range(15):
        f = random_sparse(z2, rng, n_points=5, radius=3)
        for r in (1, 2):
            got = f.concentration(1.5, r)
            want = brute_concentration(f, 1.5, r)
            assert abs(got[0] - want[0]) < 1e-13
            assert got[1] == want[1]


def test_concentration_monotone_and_saturates():
    z1 = ZD(1)
    rng = stream(9, 2)
    for _ in range(10):
        f = random_sparse(z1, rng, n_points=5, radius=6)
        masses = [f.concentration(2, r)[0] for r in range(0, 14)]
        assert all(b >= a - 1e-15 for a, b in zip(masses, masses[1:]))
        # once r exceeds the support diameter the whole mass is captured
        supp = f.support()
        diam = max(f.group.word_distance(a, b) for a in supp for b in supp)
        assert abs(f.concentration(2, diam)[0] - f.lp_mass(2)) < 1e-14


def test_concentration_translation_invariant():
    z1 = ZD(1)
    rng = stream(13, 3)
    f = random_sparse(z1, rng)
    for s in ((4,), (-7,)):
        g = f.translate_left(s)
        for r in (1, 3):
            assert abs(f.concentration(2, r)[0] - g.concentration(2, r)[0]) < 1e-14


def test_norm_log_convexity():
    z2 = ZD(2)
    rng = stream(17, 4)
    for _ in range(20):
        f = random_sparse(z2, rng)
        for p, q in ((1, 1.5), (1.5, 2), (2, 4)):
            assert f.lp_norm(q) <= f.lp_norm(p) + 1e-12


def test_value_constraints():
    z1 = ZD(1)
    with pytest.raises(ValueError):
        SparseFunction(z1, {(0,): 1.5})
    f = SparseFunction(z1, {(0,): 1.5}, relaxed=True)
    assert f.value((0,)) == 1.5
    with pytest.raises(ValueError):
        SparseFunction(z1, {(0,): -0.1}, relaxed=True)
    assert SparseFunction(z1, {(0,): 0.0}).entries == {}
    with pytest.raises(AttributeError):
        f.group = z1


def test_lp_distance():
    z1 = ZD(1)
    f = SparseFunction(z1, {(0,): 0.5})
    g = SparseFunction(z1, {(1,): 0.5})
    assert abs(lp_distance(f, g, 2) - math.sqrt(0.5)) < 1e-15
    assert lp_distance(f, f, 1.5) == 0.0
