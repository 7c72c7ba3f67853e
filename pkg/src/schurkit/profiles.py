"""Profiles, the compactified orbit space and constructive decompositions.

A profile is the orbit-canonical representative of a sub-normalized l^p
function; a ProfileSet is a finite collection with total p-mass at most one
(the empty collection standing for the orbit of zero).  The module provides

* canonicalization of orbits (translate the order-minimal peak to e),
* a pseudometric on profile collections built from a family of diagonally
  invariant two-point test functions,
* a greedy single-function extraction of concentrated components, and
* a sequence decomposition that matches components across the sequence,
  emitting profiles, shifts, residual trajectories and separations.

The sequence decomposition is an operational surrogate for a subsequence
limit: a component chain is accepted when its recentred components are Cauchy
in l^p over the second half of the observed prefix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .functions import SparseFunction, lp_distance
from .groups import Element, Group
from .posdef import Kernel, autocorrelation_kernel, sum_kernels


@dataclass(frozen=True)
class Profile:
    """Orbit-canonical sub-normalized l^p function: the order-minimal peak
    sits at the identity."""

    alpha: SparseFunction
    p: float

    def mass(self) -> float:
        return self.alpha.lp_mass(self.p)


@dataclass(frozen=True)
class ProfileSet:
    """A finite collection of profiles with total p-mass <= 1, sorted by
    nonincreasing p-mass.  The empty collection is the orbit of zero."""

    profiles: tuple[Profile, ...]
    p: float

    def __post_init__(self):
        masses = [pr.mass() for pr in self.profiles]
        if any(pr.p != self.p for pr in self.profiles):
            raise ValueError("profiles carry a different exponent")
        if sum(masses) > 1.0 + 1e-12:
            raise ValueError(f"total p-mass {sum(masses)} exceeds 1")
        if any(m2 > m1 + 1e-12 for m1, m2 in zip(masses, masses[1:])):
            raise ValueError("profiles must be sorted by nonincreasing mass")

    def total_mass(self) -> float:
        return sum(pr.mass() for pr in self.profiles)

    def __len__(self) -> int:
        return len(self.profiles)


def canonicalize(alpha: SparseFunction, p: float) -> Profile:
    """Translate so that the order-minimal point among the maximizers of alpha
    sits at the identity.  Idempotent and constant on orbits; the zero
    function canonicalizes to the empty profile."""
    if alpha.lp_norm(p) > 1.0 + 1e-12:
        raise ValueError("alpha must have l^p norm at most 1")
    if not alpha:
        return Profile(alpha, p)
    g = alpha.group
    peak_value = max(alpha.entries.values())
    peaks = [x for x, v in alpha.entries.items() if v == peak_value]
    center = min(peaks, key=g.order_key)
    return Profile(alpha.translate_left(g.inv(center)), p)


# -- test family and the compactification pseudometric ---------------------------


@dataclass(frozen=True)
class TestMember:
    """One two-point test function f(x, y) = h(x^-1 y), h = height . 1_{B(e, radius)}."""

    index: int          # 1-based position in the family
    radius: int
    height: float
    table: dict[Element, float]

    @property
    def weight(self) -> float:
        return 2.0 ** (-self.index) / (1.0 + self.height)


@dataclass(frozen=True)
class TestFamily:
    """A finite family of diagonally invariant two-point test functions.

    The true compactification metric requires a dense family across all
    arities; with pair functions only, the induced distance is a pseudometric
    surrogate that separates all the desk-scale cases treated here.  The
    truncation error of a depth-R evaluation is at most 2^-R.
    """

    members: tuple[TestMember, ...]

    @staticmethod
    def default(group: Group, radii: Sequence[int] = (1, 2, 4),
                heights: Sequence[float] = (1.0, 0.5, 0.25)) -> "TestFamily":
        members = []
        idx = 1
        for r in radii:
            ball = group.ball(group.identity, r)
            for h in heights:
                members.append(TestMember(idx, r, h, {x: h for x in ball}))
                idx += 1
        return TestFamily(tuple(members))

    def __len__(self) -> int:
        return len(self.members)


def _pair_statistic(alpha: SparseFunction, p: float, member: TestMember) -> float:
    """c(alpha) = sum_{x,y} h(x^-1 y) alpha(x)^p alpha(y)^p."""
    g = alpha.group
    powers = {x: v ** p for x, v in alpha.entries.items()}
    total = 0.0
    for x, vx in powers.items():
        acc = 0.0
        for u, hu in member.table.items():
            vy = powers.get(g.mul(x, u))
            if vy is not None:
                acc += hu * vy
        total += vx * acc
    return total


def profile_distance(xi: ProfileSet, eta: ProfileSet, family: TestFamily,
                     depth: int | None = None) -> float:
    """Truncated compactification distance between two profile collections.

    Sums weight_r |sum_xi c_r - sum_eta c_r| over the first `depth` family
    members; symmetric, orbit-invariant, and within 2^-depth of the untruncated
    value.
    """
    if xi.p != eta.p:
        raise ValueError("profile collections carry different exponents")
    depth = len(family) if depth is None else min(depth, len(family))
    total = 0.0
    for member in family.members[:depth]:
        a = sum(_pair_statistic(pr.alpha, xi.p, member) for pr in xi.profiles)
        b = sum(_pair_statistic(pr.alpha, eta.p, member) for pr in eta.profiles)
        total += member.weight * abs(a - b)
    return total


# -- greedy extraction -------------------------------------------------------------


def extract_profiles(f: SparseFunction, p: float, sep_r: int, ext_R: int,
                     eps: float, max_k: int
                     ) -> tuple[list[tuple[Element, SparseFunction]], SparseFunction]:
    """Greedy extraction of concentrated components from a single function.

    Repeatedly find the center maximizing the p-mass in a ball of radius
    sep_r; stop when that mass drops below eps, otherwise capture the
    restriction to the ball of radius ext_R around the center, remove it and
    continue (at most max_k times).  Components have pairwise disjoint
    supports and the values of components plus residual reassemble f exactly.
    """
    if not (ext_R >= sep_r >= 1):
        raise ValueError("need ext_R >= sep_r >= 1")
    if eps <= 0:
        raise ValueError("eps must be positive")
    components: list[tuple[Element, SparseFunction]] = []
    residual = f
    for _ in range(max_k):
        if not residual:
            break
        mass, center = residual.concentration(p, sep_r)
        if mass < eps:
            break
        component = residual.restrict(center, ext_R)
        residual = residual.drop_support(component.entries)
        components.append((center, component))
    return components, residual


# -- sequence decomposition ---------------------------------------------------------


@dataclass
class DecompositionReport:
    """Outcome of decomposing a finite prefix of a sequence in M_p^<=1.

    When `stable` is true, `xi` holds the limit collection and the chain data
    (shifts, separations) refer to the accepted chains over the stability
    window (the second half of the prefix).  When no stable matching exists
    the report carries diagnostics instead of a collection.
    """

    p: float
    stable: bool
    xi: ProfileSet | None
    counts: list[int]
    shifts: list[list[Element]]                 # per n, per extracted component
    component_masses: list[list[float]]
    residual_pp: list[float]                    # ||w_n||_p^p per n
    residual_inf: list[float]                   # ||w_n||_inf per n
    window_start: int                           # first index of the stability window
    settle_index: int                           # first index of the final count regime
    separation_traj: list[list[list[int]]] = field(default_factory=list)
    dp_trajectory: list[float] | None = None
    checks: dict = field(default_factory=dict)
    diagnostics: str = ""

    def min_separation(self) -> list[int]:
        """Per window index, the smallest pairwise shift distance (accepted
        chains only; empty when fewer than two chains)."""
        out = []
        for mat in self.separation_traj:
            vals = [mat[i][j] for i in range(len(mat)) for j in range(len(mat))
                    if i < j]
            if vals:
                out.append(min(vals))
        return out


def decompose_sequence(fs: Sequence[SparseFunction], p: float, *,
                       sep_r: int = 2, ext_R: int = 8, eps: float | None = None,
                       max_k: int = 16, tol_match: float = 1e-9,
                       family: TestFamily | None = None,
                       family_depth: int | None = None) -> DecompositionReport:
    """Decompose the prefix f_1..f_N and identify its limit profile collection.

    Each f_n is greedily split into concentrated components plus a residual
    with a shared parameter schedule; components are matched across n by
    nonincreasing mass rank.  A chain is accepted when its recentred
    components are Cauchy in l^p within tol_match over the last N/2 indices;
    the limit surrogate of a chain is its final recentred component,
    canonicalized.  The default eps is 1e-3 times the p-mass of each f_n.
    """
    N = len(fs)
    if N < 2:
        raise ValueError("need a prefix of length at least 2")
    group = fs[0].group
    for f in fs:
        if f.group is not group:
            raise ValueError("sequence members live on different groups")
        if f.lp_norm(p) > 1.0 + 1e-12:
            raise ValueError("sequence members must have l^p norm at most 1")

    counts: list[int] = []
    shifts: list[list[Element]] = []
    masses: list[list[float]] = []
    recentred: list[list[SparseFunction]] = []
    residual_pp: list[float] = []
    residual_inf: list[float] = []
    eps_used = []
    for f in fs:
        eps_n = eps if eps is not None else 1e-3 * f.lp_mass(p)
        eps_used.append(eps_n)
        comps, resid = extract_profiles(f, p, sep_r, ext_R, eps_n, max_k)
        order = sorted(range(len(comps)),
                       key=lambda i: (-comps[i][1].lp_mass(p), i))
        comps = [comps[i] for i in order]
        counts.append(len(comps))
        shifts.append([s for s, _ in comps])
        masses.append([c.lp_mass(p) for _, c in comps])
        recentred.append([c.translate_left(group.inv(s)) for s, c in comps])
        residual_pp.append(resid.lp_mass(p))
        residual_inf.append(resid.sup_norm())

    window_start = N // 2
    window = range(window_start, N)
    window_counts = {counts[n] for n in window}

    report = DecompositionReport(
        p=p, stable=False, xi=None, counts=counts, shifts=shifts,
        component_masses=masses, residual_pp=residual_pp,
        residual_inf=residual_inf, window_start=window_start, settle_index=0,
    )

    if len(window_counts) != 1:
        report.diagnostics = (
            f"UNSTABLE: component count varies over the window: "
            f"{sorted(window_counts)}")
        return report
    k = window_counts.pop()

    settle = window_start
    while settle > 0 and counts[settle - 1] == k:
        settle -= 1
    report.settle_index = settle

    for i in range(k):
        final = recentred[N - 1][i]
        dev = max(lp_distance(recentred[n][i], final, p) for n in window)
        if dev > tol_match:
            report.diagnostics = (
                f"UNSTABLE: chain {i} not Cauchy over the window "
                f"(deviation {dev:g} > {tol_match:g})")
            return report

    profiles = [canonicalize(recentred[N - 1][i], p) for i in range(k)]
    profiles.sort(key=lambda pr: -pr.mass())
    xi = ProfileSet(tuple(profiles), p)

    separations = []
    for n in window:
        mat = [[group.word_distance(shifts[n][i], shifts[n][j])
                for j in range(k)] for i in range(k)]
        separations.append(mat)

    report.stable = True
    report.xi = xi
    report.separation_traj = separations
    report.checks = {
        "residual_inf_final": residual_inf[-1],
        "residual_inf_final_ok": residual_inf[-1] <= eps_used[-1] + 1e-12,
        "residual_pp_final": residual_pp[-1],
        "residual_pp_final_ok":
            residual_pp[-1] <= 1.0 - xi.total_mass() + tol_match + 1e-12,
    }

    if family is not None:
        traj = []
        for f in fs:
            single = (ProfileSet((canonicalize(f, p),), p) if f
                      else ProfileSet((), p))
            traj.append(profile_distance(single, xi, family, family_depth))
        report.dp_trajectory = traj
    return report


def norm_convergence_diagnostic(fs: Sequence[SparseFunction], xi: ProfileSet,
                                radii: Sequence[int] = (2, 4, 8, 16),
                                size_cap: int = 2000) -> dict:
    """Report how the multipliers of acf(f_n) approach the collection limit.

    For each n the kernel difference h_n = acf(f_n) - sum_i acf(alpha_i) is
    formed on its full finite support and two diagnostics are recorded: the
    sup norm of h_n (a lower bound for the multiplier norm difference, probed
    by rank-one operators) and the operator norms of [h_n(x y^-1)] on the
    window ladder.  With a single limit profile both decay to zero; with two
    or more profiles the interaction term keeps a positive floor as long as
    the window ladder is deep enough to see the separation.  Reported as
    data, not asserted as a theorem.
    """
    group = fs[0].group
    from .schur import Window, op_norm  # local import to avoid a cycle
    windows = []
    for r in radii:
        elems = group.ball(group.identity, r)
        if len(elems) > size_cap:
            break
        windows.append(Window(group, elems))
    sup_traj = []
    window_traj = []
    for f in fs:
        kf = autocorrelation_kernel(f)
        support = set(kf.entries)
        for pr in xi.profiles:
            support.update(autocorrelation_kernel(pr.alpha).entries)
        kxi = collection_kernel(group, xi, sorted(support, key=group.order_key))
        diff = Kernel(group, {s: kf.value(s) - kxi.value(s) for s in support},
                      "difference")
        sup_traj.append(max((abs(v) for v in diff.entries.values()), default=0.0))
        window_traj.append([op_norm(w.kernel_matrix(diff)) for w in windows])
    return {"sup_difference": sup_traj, "window_norms": window_traj,
            "radii": [len(w) for w in windows]}


def collection_kernel(group: Group, xi: ProfileSet,
                      F: Sequence[Element]) -> Kernel:
    """The kernel sum of the autocorrelations of the profiles, restricted to F.

    Positive definite; its value at the identity is the total l^2 mass of the
    collection.  The empty collection gives the zero kernel.
    """
    Fl = list(F)
    if not xi.profiles:
        return Kernel(group, {}, "collection")
    kernels = [autocorrelation_kernel(pr.alpha, Fl) for pr in xi.profiles]
    return sum_kernels(kernels, label="collection")
