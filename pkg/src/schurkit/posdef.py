"""Autocorrelation kernels and positive-definiteness checks.

The central object is the autocorrelation of a finitely supported function,

    acf(f)(s) = sum_t f(t) f(t s) = <f, rho(s) f>,

a positive definite function on the group (it is a matrix coefficient of the
right regular representation).  Kernels store only their nonzero values;
evaluation outside the support returns 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .functions import SparseFunction
from .groups import Element, Group

GRAM_SIZE_CAP = 400


@dataclass(frozen=True, eq=False)
class Kernel:
    """Finitely supported real function phi on a group, inducing the
    two-variable kernel k(x, y) = phi(x y^-1)."""

    group: Group
    entries: dict[Element, float]
    label: str = ""

    def value(self, s: Element) -> float:
        return self.entries.get(s, 0.0)

    def support(self) -> tuple[Element, ...]:
        return tuple(sorted(self.entries, key=self.group.order_key))

    def __eq__(self, other) -> bool:
        return (isinstance(other, Kernel) and self.group is other.group
                and self.entries == other.entries)

    def __repr__(self) -> str:
        tag = f" {self.label!r}" if self.label else ""
        return f"<Kernel{tag} on {self.group.name}, {len(self.entries)} points>"


@dataclass(frozen=True)
class PsdReport:
    psd: bool
    min_eigenvalue: float
    scale: float


def autocorrelation(f: SparseFunction, s: Element) -> float:
    """acf(f)(s) = sum_t f(t) f(t s), an exact finite sum.

    Symmetric in s <-> s^-1 for real f; equals ||f||_2^2 at the identity.
    """
    g = f.group
    entries = f.entries
    total = 0.0
    for t, v in f.items_sorted():
        w = entries.get(g.mul(t, s))
        if w is not None:
            total += v * w
    return total


def autocorrelation_kernel(f: SparseFunction, F: Iterable[Element] | None = None,
                           label: str = "") -> Kernel:
    """The kernel acf(f) evaluated on F, or on its full (finite) support.

    When F is omitted the support is detected exactly: acf(f)(s) != 0 requires
    s = t^-1 u with t, u in supp(f).  For supp(f) inside B(e, R) the result is
    checked to lie inside B(e, 2R).
    """
    g = f.group
    if F is None:
        supp = list(f.entries)
        inv = {t: g.inv(t) for t in supp}
        candidates = {g.mul(inv[t], u) for t in supp for u in supp}
        radius = max((g.word_length(t) for t in supp), default=0)
        out = {}
        for s in candidates:
            v = autocorrelation(f, s)
            if v != 0.0:
                if g.word_length(s) > 2 * radius:
                    raise AssertionError(
                        "autocorrelation support escaped B(e, 2R)")
                out[s] = v
    else:
        out = {}
        for s in F:
            v = autocorrelation(f, s)
            if v != 0.0:
                out[s] = v
    return Kernel(g, out, label or "acf")


def gram_matrix(kernel: Kernel, F: Sequence[Element]) -> np.ndarray:
    """The matrix G[s, t] = phi(s^-1 t) over the ordered finite set F."""
    g = kernel.group
    F = list(F)
    inv = [g.inv(s) for s in F]
    G = np.zeros((len(F), len(F)))
    for i, si in enumerate(inv):
        for j, t in enumerate(F):
            G[i, j] = kernel.value(g.mul(si, t))
    return G


def gram_psd_check(kernel: Kernel, F: Sequence[Element], tol: float = 1e-9,
                   size_cap: int = GRAM_SIZE_CAP) -> PsdReport:
    """Positive-definiteness test of the Gram matrix [phi(s^-1 t)] over F.

    The matrix is symmetrized (a non-symmetric Gram beyond tolerance signals a
    corrupted kernel and raises), its smallest eigenvalue is computed, and the
    verdict is scale-relative: psd iff lambda_min >= -tol * max|G|.
    """
    F = list(F)
    if len(F) > size_cap:
        raise ValueError(f"|F| = {len(F)} exceeds the Gram size cap {size_cap}")
    if not F:
        return PsdReport(True, 0.0, 0.0)
    G = gram_matrix(kernel, F)
    scale = float(np.abs(G).max())
    asym = float(np.abs(G - G.T).max())
    if asym > 1e-9 * max(scale, 1e-300):
        raise ValueError(f"Gram matrix not symmetric (deviation {asym:g})")
    G = (G + G.T) / 2.0
    lam_min = float(np.linalg.eigvalsh(G)[0])
    return PsdReport(lam_min >= -tol * scale, lam_min, scale)


def invariance_residual(f: SparseFunction, s: Element) -> float:
    """Residual of the exact identity ||f - rho(s) f||_2^2 = 2 (1 - acf(f)(s))
    for unit l^2 vectors; the contract is residual <= 1e-10."""
    norm2 = f.lp_norm(2)
    if abs(norm2 - 1.0) > 1e-12:
        raise ValueError(f"f must be a unit l^2 vector, got ||f||_2 = {norm2!r}")
    shifted = f.translate_right(s)
    lhs = 0.0
    for x in sorted(set(f.entries) | set(shifted.entries), key=f.group.order_key):
        lhs += (f.value(x) - shifted.value(x)) ** 2
    rhs = 2.0 * (1.0 - autocorrelation(f, s))
    return abs(lhs - rhs)


def sum_kernels(kernels: Sequence[Kernel], label: str = "") -> Kernel:
    """Pointwise sum; a sum of positive definite kernels is positive definite."""
    if not kernels:
        raise ValueError("need at least one kernel")
    g = kernels[0].group
    out: dict[Element, float] = {}
    for k in kernels:
        if k.group is not g:
            raise ValueError("kernels live on different groups")
        for s, v in k.entries.items():
            out[s] = out.get(s, 0.0) + v
    out = {s: v for s, v in out.items() if v != 0.0}
    return Kernel(g, out, label or "sum")
