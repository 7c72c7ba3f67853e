"""Finite-window realizations of operators and Schur product norm bounds.

Operators on l^2 of the group are truncated to a finite window W (an ordered
finite subset), where they become |W| x |W| real matrices T(x, y).  The Schur
product with a kernel phi multiplies entrywise by phi(x y^-1).  Window norms
only lower-bound the norms on the full space; the module therefore reports
window ladders together with the exact equality ||M_phi|| = phi(e) available
for positive definite kernels.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .functions import SparseFunction
from .groups import Element, Group
from .posdef import Kernel, gram_psd_check
from .seeding import stream

SVD_CUTOFF = 200
POWER_TOL = 1e-10
POWER_MAX_ITER = 10**5


class SchurNormViolation(AssertionError):
    """A certified norm inequality failed; signals a PSD-check or norm bug."""


@dataclass(frozen=True, eq=False)
class Window:
    """An ordered finite subset of the group indexing a finite matrix section."""

    group: Group
    elements: tuple[Element, ...]

    def __post_init__(self):
        if len(set(self.elements)) != len(self.elements):
            raise ValueError("window contains duplicate elements")

    @staticmethod
    def ball(group: Group, radius: int) -> "Window":
        return Window(group, group.ball(group.identity, radius))

    @property
    def index(self) -> dict[Element, int]:
        idx = getattr(self, "_index_cache", None)
        if idx is None:
            idx = {x: i for i, x in enumerate(self.elements)}
            object.__setattr__(self, "_index_cache", idx)
        return idx

    def __len__(self) -> int:
        return len(self.elements)

    def kernel_matrix(self, kernel: Kernel) -> np.ndarray:
        """The matrix [phi(x y^-1)] over the window, built in O(|W| |supp phi|)."""
        g = self.group
        if kernel.group is not g:
            raise ValueError("kernel and window live on different groups")
        n = len(self.elements)
        M = np.zeros((n, n))
        idx = self.index
        for u, v in kernel.entries.items():
            for j, y in enumerate(self.elements):
                i = idx.get(g.mul(u, y))
                if i is not None:
                    M[i, j] = v
        return M

    def tube_matrix(self, F: Iterable[Element]) -> np.ndarray:
        """0/1 matrix of the tube {(x, y): x y^-1 in F} within the window."""
        g = self.group
        n = len(self.elements)
        M = np.zeros((n, n))
        idx = self.index
        for u in set(F):
            for j, y in enumerate(self.elements):
                i = idx.get(g.mul(u, y))
                if i is not None:
                    M[i, j] = 1.0
        return M


@dataclass(frozen=True, eq=False)
class WindowOperator:
    window: Window
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        n = len(self.window)
        if m.shape != (n, n):
            raise ValueError(f"matrix shape {m.shape} does not match window size {n}")
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix has non-finite entries")
        object.__setattr__(self, "matrix", m)

    def sup_entry(self) -> float:
        return float(np.abs(self.matrix).max()) if self.matrix.size else 0.0


def identity_operator(window: Window) -> WindowOperator:
    return WindowOperator(window, np.eye(len(window)))


def tube_mask(window: Window, F: Iterable[Element]) -> WindowOperator:
    return WindowOperator(window, window.tube_matrix(F))


def schur_product(kernel: Kernel, T: WindowOperator) -> WindowOperator:
    """Entrywise product [phi(x y^-1) T(x, y)]; linear in T."""
    K = T.window.kernel_matrix(kernel)
    return WindowOperator(T.window, K * T.matrix)


def op_norm(T: WindowOperator | np.ndarray) -> float:
    """Largest singular value of the finite section.

    Full SVD below size 200; otherwise power iteration on T^t T with the
    normalized all-ones start vector, relative tolerance 1e-10 and an
    iteration cap of 1e5 (non-convergence warns and returns the best
    estimate).
    """
    A = T.matrix if isinstance(T, WindowOperator) else np.asarray(T, dtype=float)
    n = A.shape[0]
    if n == 0:
        return 0.0
    if not A.any():
        return 0.0
    if n < SVD_CUTOFF:
        return float(np.linalg.svd(A, compute_uv=False)[0])
    v = np.full(n, 1.0 / np.sqrt(n))
    est = 0.0
    for _ in range(POWER_MAX_ITER):
        w = A.T @ (A @ v)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        new_est = np.sqrt(float(v @ w))
        v = w / nw
        if est > 0 and abs(new_est - est) <= POWER_TOL * est:
            return float(new_est)
        est = new_est
    warnings.warn("power iteration did not converge; returning best estimate")
    return float(est)


def finite_propagation_bound(T: WindowOperator, F: Iterable[Element]) -> float:
    """The bound |F| . sup|T| for operators supported in the tube of F.

    Raises if the support escapes Tube(F) within the window.  The contract
    op_norm(T) <= bound + 1e-9 holds for every such operator.
    """
    Fs = set(F)
    mask = T.window.tube_matrix(Fs)
    escaped = (T.matrix != 0.0) & (mask == 0.0)
    if escaped.any():
        raise ValueError("operator support escapes Tube(F) within the window")
    return len(Fs) * T.sup_entry()


def schur_test_bound(T: WindowOperator,
                     weights: Mapping[Element, float] | None = None) -> float:
    """The weighted row/column test: sqrt(C1 C2) >= op_norm(T).

    C1 is the smallest constant with sum_z |T(x, z)| p(z) <= C1 p(x) on the
    window, C2 the column analogue; weights default to 1.
    """
    n = len(T.window)
    if weights is None:
        p = np.ones(n)
    else:
        p = np.array([weights[x] for x in T.window.elements], dtype=float)
        if np.any(p <= 0):
            raise ValueError("weights must be strictly positive")
    absT = np.abs(T.matrix)
    c1 = float(((absT @ p) / p).max()) if n else 0.0
    c2 = float(((absT.T @ p) / p).max()) if n else 0.0
    return float(np.sqrt(c1 * c2))


def l1_multiplier_bound(f: SparseFunction, T: WindowOperator) -> float:
    """Checks ||k_f o T|| <= ||f||_1 ||T|| + 1e-9 and returns the achieved ratio."""
    kernel = Kernel(f.group, dict(f.entries), "l1-kernel")
    norm_T = op_norm(T)
    norm_M = op_norm(schur_product(kernel, T))
    if norm_M > f.lp_norm(1) * norm_T + 1e-9:
        raise SchurNormViolation(
            f"l1 multiplier bound violated: {norm_M} > {f.lp_norm(1)} * {norm_T}")
    return norm_M / norm_T if norm_T > 0 else 0.0


def cp_norm_check(kernel: Kernel, window: Window, trials: int,
                  seed: int = 0) -> dict:
    """Random-probe check of the exact multiplier norm of a PSD kernel.

    For a positive definite phi the Schur multiplier has norm phi(e).  Over
    `trials` random window operators the upper bound
    ||phi o T|| <= phi(e) ||T|| + 1e-8 is asserted (any violation raises), and
    the diagonal witness phi o I = phi(e) I realizes the value exactly, so
    witness_ratio == phi(e).
    """
    report = gram_psd_check(kernel, window.elements[: min(len(window), 50)])
    if not report.psd:
        raise ValueError("kernel fails the PSD check on the window prefix")
    K = window.kernel_matrix(kernel)
    ke = kernel.value(kernel.group.identity)
    n = len(window)
    violations = []
    for t in range(trials):
        rng = stream(seed, t)
        T = rng.uniform(-1.0, 1.0, size=(n, n))
        lhs = op_norm(K * T)
        rhs = ke * op_norm(T)
        if lhs > rhs + 1e-8:
            violations.append((t, lhs, rhs))
    if violations:
        raise SchurNormViolation(
            f"{len(violations)} upper-bound violations, first: {violations[0]}")
    witness = op_norm(K * np.eye(n))
    return {"upper_violations": 0, "witness_ratio": witness,
            "trials": trials, "seed": seed}


def cutoff(kernel: Kernel, F: Iterable[Element]) -> Kernel:
    """Restrict the kernel to F (the tube cutoff at the kernel level)."""
    Fs = set(F)
    kept = {s: v for s, v in kernel.entries.items() if s in Fs}
    return Kernel(kernel.group, kept, f"{kernel.label}|cutoff")


def ball_window_ladder(group: Group, radii: Sequence[int] = (2, 4, 8, 16),
                       size_cap: int = 2000) -> list[Window]:
    """Windows B(e, r) for the given radii, stopping once the size cap is hit."""
    out = []
    for r in radii:
        try:
            w = Window.ball(group, r)
        except Exception:
            break
        if len(w) > size_cap:
            break
        out.append(w)
    return out
