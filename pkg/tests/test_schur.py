import math

import numpy as np
import pytest

from schurkit import (FreeGroup, Kernel, SparseFunction, Window, WindowOperator,
                      ZD, autocorrelation_kernel, ball_window_ladder,
                      cp_norm_check, cutoff, dirac, finite_propagation_bound,
                      identity_operator, l1_multiplier_bound,
                      normalized_indicator, op_norm, schur_product,
                      schur_test_bound, tube_mask)
from schurkit.seeding import stream

from test_functions import random_sparse


def sphere_grid_norm(A, coarse=240, refine=240):
    """Independent oracle for 3x3 spectral norms: maximize ||Av|| over a fine
    spherical grid, then refine locally around the best direction."""
    M = A.T @ A

    def quad(theta, phi):
        st = np.sin(theta)
        v = np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)])
        return np.einsum("i...,ij,j...->...", v, M, v)

    th = np.linspace(0.0, np.pi, coarse)
    ph = np.linspace(0.0, 2 * np.pi, 2 * coarse, endpoint=False)
    T, P = np.meshgrid(th, ph, indexing="ij")
    vals = quad(T, P)
    i, j = np.unravel_index(np.argmax(vals), vals.shape)
    dt = np.pi / coarse
    th2 = np.linspace(T[i, j] - dt, T[i, j] + dt, refine)
    ph2 = np.linspace(P[i, j] - dt, P[i, j] + dt, refine)
    T2, P2 = np.meshgrid(th2, ph2, indexing="ij")
    return math.sqrt(float(quad(T2, P2).max()))


def test_tube_mask_patterns():
    z1 = ZD(1)
    w = Window(z1, z1.ball((0,), 5))
    assert np.array_equal(tube_mask(w, [(0,)]).matrix, np.eye(len(w)))
    tri = tube_mask(w, z1.ball((0,), 1)).matrix
    assert np.array_equal(tri, np.tri(len(w), k=1) - np.tri(len(w), k=-2))
    assert not tube_mask(w, []).matrix.any()


def test_schur_product_examples():
    z1 = ZD(1)
    w = Window(z1, z1.ball((0,), 4))
    delta = Kernel(z1, {(0,): 1.0})
    rng = stream(41, 0)
    T = WindowOperator(w, rng.uniform(-1, 1, (len(w), len(w))))
    diag = schur_product(delta, T)
    assert np.array_equal(diag.matrix, np.diag(np.diag(T.matrix)))
    # constant-one kernel on the tube leaves tube-supported operators alone
    ones = Kernel(z1, {s: 1.0 for s in z1.ball((0,), 1)})
    masked = schur_product(ones, tube_mask(w, z1.ball((0,), 1)))
    assert np.array_equal(masked.matrix, tube_mask(w, z1.ball((0,), 1)).matrix)
    # acf kernel on the identity: diagonal of acf(e)
    f = normalized_indicator(z1, [(-1,), (0,), (1,)], 2)
    k = autocorrelation_kernel(f)
    out = schur_product(k, identity_operator(w))
    assert np.allclose(out.matrix, k.value((0,)) * np.eye(len(w)))


def test_schur_product_linear_and_entrywise_bound():
    z1 = ZD(1)
    w = Window(z1, z1.ball((0,), 3))
    f = normalized_indicator(z1, [(-1,), (0,), (1,)], 2)
    k = autocorrelation_kernel(f)
    rng = stream(43, 1)
    A = WindowOperator(w, rng.uniform(-1, 1, (len(w), len(w))))
    B = WindowOperator(w, rng.uniform(-1, 1, (len(w), len(w))))
    lin = schur_product(k, WindowOperator(w, 2 * A.matrix + B.matrix))
    assert np.allclose(lin.matrix,
                       2 * schur_product(k, A).matrix + schur_product(k, B).matrix)
    kmax = max(abs(v) for v in k.entries.values())
    assert schur_product(k, A).sup_entry() <= kmax * A.sup_entry() + 1e-15


def test_op_norm_examples():
    z1 = ZD(1)
    w5 = Window(z1, z1.ball((0,), 2))
    assert abs(op_norm(identity_operator(w5)) - 1.0) < 1e-12
    n = len(w5)
    assert abs(op_norm(WindowOperator(w5, np.ones((n, n)))) - n) < 1e-10
    assert op_norm(WindowOperator(w5, np.zeros((n, n)))) == 0.0


def test_op_norm_vs_sphere_grid_oracle():
    rng = stream(47, 2)
    for _ in range(12):
        A = rng.uniform(-1, 1, (3, 3))
        assert abs(op_norm(A) - sphere_grid_norm(A)) < 1e-6


def test_op_norm_power_iteration_path():
    # size >= 200 exercises the power iteration branch; compare with numpy
    rng = stream(53, 3)
    A = rng.uniform(-1, 1, (210, 210))
    want = float(np.linalg.svd(A, compute_uv=False)[0])
    assert abs(op_norm(A) - want) < 1e-7 * want


def test_finite_propagation_bound():
    z1 = ZD(1)
    w = Window(z1, z1.ball((0,), 5))
    ident = identity_operator(w)
    assert finite_propagation_bound(ident, [(0,)]) == 1.0
    F = z1.ball((0,), 1)
    tri = tube_mask(w, F)
    bound = finite_propagation_bound(tri, F)
    assert bound == 3.0
    assert op_norm(tri) <= bound + 1e-9
    # tridiagonal ones tend to norm 3 as the window grows
    big = tube_mask(Window(z1, z1.ball((0,), 40)), F)
    assert 2.95 < op_norm(big) < 3.0 + 1e-9
    assert finite_propagation_bound(WindowOperator(w, np.zeros((len(w), len(w)))),
                                    F) == 0.0
    with pytest.raises(ValueError):
        finite_propagation_bound(tri, [(0,)])


def test_schur_test_bound():
    z1 = ZD(1)
    w2 = Window(z1, z1.ball((0,), 0) + ((1,),))
    allones = WindowOperator(w2, np.ones((2, 2)))
    assert abs(schur_test_bound(allones) - 2.0) < 1e-12
    assert abs(op_norm(allones) - 2.0) < 1e-12
    assert abs(schur_test_bound(identity_operator(w2)) - 1.0) < 1e-12
    with pytest.raises(ValueError):
        schur_test_bound(allones, {(0,): 1.0, (1,): 0.0})
    rng = stream(59, 4)
    w5 = Window(z1, z1.ball((0,), 2))
    for _ in range(10):
        T = WindowOperator(w5, rng.uniform(0, 1, (5, 5)))
        norm = op_norm(T)
        assert schur_test_bound(T) >= norm - 1e-9
        row_weights = {x: 1.0 + i for i, x in enumerate(w5.elements)}
        assert schur_test_bound(T, row_weights) >= norm - 1e-9


def test_l1_multiplier_bound():
    z1 = ZD(1)
    w = Window(z1, z1.ball((0,), 3))
    assert l1_multiplier_bound(dirac(z1, (0,)), identity_operator(w)) <= 1.0
    f = normalized_indicator(z1, [(0,), (1,), (2,)], 1)
    ratio = l1_multiplier_bound(f, identity_operator(w))
    assert ratio <= f.lp_norm(1) + 1e-12
    rng = stream(61, 5)
    for _ in range(10):
        g = random_sparse(z1, rng)
        T = WindowOperator(w, rng.uniform(-1, 1, (len(w), len(w))))
        assert l1_multiplier_bound(g, T) <= g.lp_norm(1) + 1e-9


def test_cp_norm_check_examples():
    z1 = ZD(1)
    w = Window(z1, z1.ball((0,), 4))
    f = normalized_indicator(z1, [(-1,), (0,), (1,)], 2)
    res = cp_norm_check(autocorrelation_kernel(f), w, trials=10, seed=3)
    assert res["upper_violations"] == 0
    assert abs(res["witness_ratio"] - 1.0) < 1e-12
    res = cp_norm_check(Kernel(z1, {(0,): 1.0}), w, trials=5, seed=3)
    assert abs(res["witness_ratio"] - 1.0) < 1e-12
    half = SparseFunction(z1, {(0,): 0.5})
    res = cp_norm_check(autocorrelation_kernel(half), w, trials=5, seed=3)
    assert abs(res["witness_ratio"] - 0.25) < 1e-15


def test_cutoff():
    z1 = ZD(1)
    f = normalized_indicator(z1, [(-1,), (0,), (1,)], 2)
    k = autocorrelation_kernel(f)
    assert cutoff(k, [(0,)]).entries == {(0,): k.value((0,))}
    assert cutoff(k, k.support()).entries == k.entries
    assert cutoff(k, []).entries == {}


def test_window_ladder_monotone():
    z1 = ZD(1)
    f = normalized_indicator(z1, [(-1,), (0,), (1,)], 2)
    k = autocorrelation_kernel(f)
    F = k.support()
    norms = []
    for w in ball_window_ladder(z1, radii=(2, 4, 8, 16)):
        norms.append(op_norm(schur_product(k, tube_mask(w, F))))
    assert all(b >= a - 1e-12 for a, b in zip(norms, norms[1:]))


def test_window_order_and_duplicates():
    z1 = ZD(1)
    w = Window(z1, z1.ball((0,), 2))
    assert list(w.elements) == sorted(w.elements, key=z1.order_key)
    with pytest.raises(ValueError):
        Window(z1, ((0,), (0,)))


def test_free_group_window():
    f2 = FreeGroup(2)
    w = Window.ball(f2, 2)
    f = normalized_indicator(f2, f2.ball(f2.identity, 1), 2)
    k = autocorrelation_kernel(f)
    res = cp_norm_check(k, w, trials=5, seed=9)
    assert res["upper_violations"] == 0
    assert abs(res["witness_ratio"] - 1.0) < 1e-12
