"""Folner machinery and the variational identity-approximation defect.

For a finite set F and exponent p in [1, 2), the defect measures how well a
sub-normalized collection of l^p profiles can push its summed autocorrelation
toward the constant 1 on F.  The optimization objective is the sup distance

    d_F(phi, 1) = max_{s in F} |phi(s) - 1|,

and the exact finite-window operator norm of the cutoff difference is
reported alongside; the bridge between the two is the finite-propagation
bound: window_norm <= |F| . d_F.  On amenable groups the defect decays to
zero along p -> 2 (witnessed by Folner sets); on free groups it stays bounded
away from zero over any search budget, which the report records as an
empirical floor, not a theorem.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .functions import SparseFunction, normalized_indicator
from .groups import Element, Group, ZD
from .posdef import Kernel, autocorrelation
from .profiles import Profile, ProfileSet, canonicalize, collection_kernel
from .schur import op_norm
from .seeding import stream


@dataclass(frozen=True)
class FolnerSet:
    group: Group
    elements: frozenset
    label: int = 0

    def __post_init__(self):
        if not self.elements:
            raise ValueError("Folner set must be nonempty")

    def __len__(self) -> int:
        return len(self.elements)


def folner_boxes(group: ZD, n: int) -> FolnerSet:
    """The box [-n, n]^d in Z^d, the standard right-Folner sequence."""
    if not isinstance(group, ZD):
        raise ValueError("box Folner sets are only generated for Z^d; "
                         "supply an explicit set for other groups")
    ranges = [range(-n, n + 1)] * group.d
    return FolnerSet(group, frozenset(itertools.product(*ranges)), n)


def folner_quality(F: FolnerSet, s: Element) -> float:
    """|F delta Fs| / |F| by direct set arithmetic."""
    g = F.group
    Fs = {g.mul(x, s) for x in F.elements}
    return len(F.elements ^ Fs) / len(F.elements)


def folner_autocorrelation(F: FolnerSet, p: float, s: Element) -> float:
    """acf of the l^p-normalized indicator of F at s, via the exact set law.

    Computed as |F meet F s^-1| / |F|^(2/p) and cross-checked against the
    two-term form |F|^(1-2/p) - |F delta F s^-1| / (2 |F|^(2/p)) to 1e-12.
    """
    g = F.group
    si = g.inv(s)
    Fsi = {g.mul(x, si) for x in F.elements}
    inter = len(F.elements & Fsi)
    size = len(F.elements)
    value = inter / size ** (2.0 / p)
    two_term = size ** (1.0 - 2.0 / p) - len(F.elements ^ Fsi) / (2.0 * size ** (2.0 / p))
    if abs(value - two_term) > 1e-12:
        raise AssertionError(f"set-law forms disagree: {value} vs {two_term}")
    return value


def sup_distance_to_one(kernel: Kernel, F: Iterable[Element]) -> float:
    """d_F(phi, 1) = max over F of |phi(s) - 1|."""
    return max(abs(kernel.value(s) - 1.0) for s in F)


@dataclass
class DefectResult:
    """Outcome of the defect minimization for one (F, p).

    `value` is the achieved sup-distance objective, `minimizer` the profile
    collection attaining it, and `window_norm` the operator norm of the
    cutoff difference (entries 1 - phi(x y^-1) on the tube of F) on a
    stabilized window, which obeys window_norm <= |F| . value + 1e-9.
    """

    F: tuple[Element, ...]
    p: float
    value: float
    minimizer: ProfileSet
    window_norm: float
    search_log: dict = field(default_factory=dict)


def _pair_lists(group: Group, support: Sequence[Element],
                F: Sequence[Element]) -> dict[Element, list[tuple[int, int]]]:
    """For each s in F, the index pairs (i, j) with t_i s = t_j in the support."""
    index = {t: i for i, t in enumerate(support)}
    pairs = {}
    for s in F:
        lst = []
        for i, t in enumerate(support):
            j = index.get(group.mul(t, s))
            if j is not None:
                lst.append((i, j))
        pairs[s] = lst
    return pairs


class _Objective:
    """max_{s in F} |sum_m acf(alpha_m)(s) - 1| over stacked profile values,
    with O(|F|) incremental evaluation along a single coordinate."""

    def __init__(self, group: Group, support: Sequence[Element],
                 F: Sequence[Element], p: float, n_profiles: int):
        self.support = list(support)
        self.F = list(F)
        self.p = p
        self.m = len(self.support)
        self.n_profiles = n_profiles
        self.pairs = _pair_lists(group, self.support, self.F)
        # per coordinate and test point: partner coordinates entering linearly
        self.linear: list[dict[Element, list[int]]] = [
            {s: [] for s in self.F} for _ in range(self.m)]
        self.quad: list[dict[Element, bool]] = [
            {s: False for s in self.F} for _ in range(self.m)]
        for s in self.F:
            for (i, j) in self.pairs[s]:
                if i == j:
                    self.quad[i][s] = True
                else:
                    self.linear[i][s].append(j)
                    self.linear[j][s].append(i)

    def acf_values(self, v: np.ndarray) -> dict[Element, float]:
        out = {}
        for s in self.F:
            total = 0.0
            for m in range(self.n_profiles):
                row = v[m]
                total += sum(row[i] * row[j] for (i, j) in self.pairs[s])
            out[s] = total
        return out

    def value(self, v: np.ndarray) -> float:
        acf = self.acf_values(v)
        return max(abs(acf[s] - 1.0) for s in self.F)

    def coordinate_model(self, v: np.ndarray, profile: int, coord: int,
                         acf: dict[Element, float]):
        """Coefficients so that replacing v[profile, coord] by w gives
        acf'(s) = acf(s) + b_s (w - w0) + a_s (w^2 - w0^2)."""
        row = v[profile]
        w0 = row[coord]
        model = []
        for s in self.F:
            a = 1.0 if self.quad[coord][s] else 0.0
            b = sum(row[j] for j in self.linear[coord][s])
            model.append((s, acf[s], a, b))
        return w0, model

    @staticmethod
    def eval_model(model, w0: float, w: float) -> float:
        dw = w - w0
        dsq = w * w - w0 * w0
        worst = 0.0
        for _, base, a, b in model:
            val = abs(base + b * dw + a * dsq - 1.0)
            if val > worst:
                worst = val
        return worst


def _golden_section(fun, lo: float, hi: float, tol: float = 1e-12,
                    presamples: int = 12) -> tuple[float, float]:
    """Minimize a piecewise-smooth function on [lo, hi]: coarse bracket scan
    followed by golden-section refinement."""
    if hi <= lo:
        return lo, fun(lo)
    xs = np.linspace(lo, hi, presamples)
    vals = [fun(x) for x in xs]
    k = int(np.argmin(vals))
    a = xs[max(0, k - 1)]
    b = xs[min(len(xs) - 1, k + 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    x = (a + b) / 2.0
    return x, fun(x)


def _project(v: np.ndarray, p: float) -> np.ndarray:
    """Clamp to [0, 1], then rescale into the p-mass ball if needed."""
    v = np.clip(v, 0.0, 1.0)
    mass = float((v ** p).sum())
    if mass > 1.0:
        v = v * mass ** (-1.0 / p)
    return v


def _descend(obj: _Objective, v: np.ndarray, max_sweeps: int = 60,
             tol: float = 1e-13) -> tuple[np.ndarray, float, int]:
    """Cyclic projected coordinate descent with golden-section line searches."""
    p = obj.p
    v = v.copy()
    best = obj.value(v)
    sweeps = 0
    for _ in range(max_sweeps):
        sweeps += 1
        improved = 0.0
        acf = obj.acf_values(v)
        for m in range(obj.n_profiles):
            for c in range(obj.m):
                w0, model = obj.coordinate_model(v, m, c, acf)
                mass_rest = float((v ** p).sum()) - w0 ** p
                head = max(0.0, 1.0 - mass_rest)
                wmax = min(1.0, head ** (1.0 / p))
                w, fw = _golden_section(
                    lambda w: obj.eval_model(model, w0, w), 0.0, wmax)
                if fw < best - 1e-15:
                    improved += best - fw
                    best = fw
                    v[m, c] = w
                    dw, dsq = w - w0, w * w - w0 * w0
                    for s, base, a, b in model:
                        acf[s] = base + b * dw + a * dsq
        # guard against incremental drift
        best = obj.value(v)
        if improved < tol:
            break
    return v, best, sweeps


def _grid_oracle(obj: _Objective, p: float, max_support: int = 4,
                 steps: int = 16) -> dict:
    """Independent brute-force baseline: single profile, supports of size at
    most `max_support` inside the search ball, values on the 1/steps grid."""
    m = obj.m
    grid = np.arange(1, steps + 1) / steps
    best_val = math.inf
    best_point = None
    meshes: dict[int, np.ndarray] = {}
    for w in range(1, max_support + 1):
        mesh = np.stack(np.meshgrid(*([grid] * w), indexing="ij"), axis=-1)
        meshes[w] = mesh.reshape(-1, w)
    for w in range(1, max_support + 1):
        V = meshes[w]
        feasible = (V ** p).sum(axis=1) <= 1.0 + 1e-12
        V = V[feasible]
        if V.shape[0] == 0:
            continue
        for supp in itertools.combinations(range(m), w):
            pos = {c: a for a, c in enumerate(supp)}
            worst = None
            for s in obj.F:
                acf = np.zeros(V.shape[0])
                for (i, j) in obj.pairs[s]:
                    if i in pos and j in pos:
                        acf += V[:, pos[i]] * V[:, pos[j]]
                dev = np.abs(acf - 1.0)
                worst = dev if worst is None else np.maximum(worst, dev)
            k = int(np.argmin(worst))
            if worst[k] < best_val:
                best_val = float(worst[k])
                point = np.zeros(m)
                point[list(supp)] = V[k]
                best_point = point
    return {"value": best_val, "point": best_point,
            "max_support": max_support, "steps": steps}


def cutoff_difference_norm(group: Group, kernel: Kernel, F: Sequence[Element],
                           radii: Sequence[int] = (2, 4, 8, 16),
                           size_cap: int = 2000,
                           stall_tol: float = 1e-9) -> tuple[float, list[float]]:
    """Operator norm of the window matrix [(1 - phi(x y^-1)) 1_{x y^-1 in F}].

    Grown over ball windows until the value stabilizes (the matrices are
    nested, so the ladder is nondecreasing); returns the final value and the
    ladder.  By the finite-propagation bound the value is at most
    |F| . max_F |1 - phi|.
    """
    diff = Kernel(group, {s: 1.0 - kernel.value(s) for s in F}, "cutoff-diff")
    ladder = []
    last = 0.0
    for r in radii:
        elems = group.ball(group.identity, r)
        if len(elems) > size_cap:
            break
        from .schur import Window  # local import to avoid a cycle at module load
        W = Window(group, elems)
        val = op_norm(W.kernel_matrix(diff))
        ladder.append(val)
        if ladder[:-1] and abs(val - last) <= stall_tol:
            last = val
            break
        last = val
    return last, ladder


def minimize_defect(group: Group, F: Sequence[Element], p: float, *,
                    support_radius: int, n_profiles: int = 1, restarts: int = 8,
                    seed: int = 0, grid_oracle: bool = False,
                    max_sweeps: int = 60) -> DefectResult:
    """Minimize d_F(sum acf(alpha_m), 1) over profile collections supported in
    B(e, support_radius) under sum ||alpha_m||_p^p <= 1 and 0 <= alpha <= 1.

    Projected cyclic coordinate descent with golden-section line searches and
    deterministic multi-start: the l^p-normalized indicator of F itself, the
    normalized indicators of the balls B(e, j), j <= support_radius, the grid
    oracle point when enabled, then seeded random feasible points.  The
    achieved value therefore never exceeds the Folner-witness objective.
    """
    if not 1.0 <= p < 2.0:
        raise ValueError("p must lie in [1, 2)")
    F = sorted(set(F), key=group.order_key)
    radius_F = max(group.word_length(s) for s in F)
    if support_radius < radius_F:
        raise ValueError("support radius must cover the radius of F")
    support = list(group.ball(group.identity, support_radius))
    obj = _Objective(group, support, F, p, n_profiles)
    m = len(support)
    pos = {t: i for i, t in enumerate(support)}

    def embed(f: SparseFunction) -> np.ndarray:
        v = np.zeros((n_profiles, m))
        for x, val in f.entries.items():
            v[0, pos[x]] = val
        return v

    starts: list[np.ndarray] = [embed(normalized_indicator(group, F, p))]
    for j in range(1, support_radius + 1):
        starts.append(embed(normalized_indicator(
            group, group.ball(group.identity, j), p)))

    oracle = None
    if grid_oracle:
        if n_profiles != 1:
            raise ValueError("the grid oracle covers single-profile search only")
        oracle = _grid_oracle(obj, p)
        starts.append(oracle["point"].reshape(1, m))

    while len(starts) < restarts:
        rng = stream(seed, len(starts))
        raw = rng.uniform(0.0, 1.0, size=(n_profiles, m))
        starts.append(_project(raw, p))

    best_v, best_val, restart_log = None, math.inf, []
    for v0 in starts:
        v0 = _project(v0, p)
        v, val, sweeps = _descend(obj, v0, max_sweeps=max_sweeps)
        restart_log.append({"value": val, "sweeps": sweeps})
        if val < best_val:
            best_val, best_v = val, v

    profiles = []
    for mrow in range(n_profiles):
        entries = {support[i]: best_v[mrow, i] for i in range(m)
                   if best_v[mrow, i] > 0.0}
        if entries:
            profiles.append(canonicalize(SparseFunction(group, entries), p))
    profiles.sort(key=lambda pr: -pr.mass())
    xi = ProfileSet(tuple(profiles), p)

    kernel = collection_kernel(group, xi, F)
    window_norm, ladder = cutoff_difference_norm(group, kernel, F)

    log = {
        "restarts": restart_log,
        "n_starts": len(starts),
        "window_ladder": ladder,
        "seed": seed,
        "multi_profile_active": sum(1 for pr in profiles if pr.alpha) > 1,
    }
    if oracle is not None:
        log["oracle_value"] = oracle["value"]
        log["oracle_steps"] = oracle["steps"]
        log["oracle_max_support"] = oracle["max_support"]
    return DefectResult(tuple(F), p, best_val, xi, window_norm, log)


def amenability_report(group: Group, F_radii: Sequence[int],
                       p_ladder: Sequence[float], *, support_radius: int | None = None,
                       restarts: int = 8, seed: int = 0,
                       max_sweeps: int = 60) -> dict:
    """Defect table over ladders of test sets F = B(e, r) and exponents p.

    Each row reports the achieved defect, the window norm and the minimizer's
    autocorrelation values on F; the summary records monotonicity of the
    defect along p for each F.
    """
    if not F_radii or not p_ladder:
        raise ValueError("ladders must be nonempty")
    rows = []
    summaries = []
    for r in F_radii:
        F = group.ball(group.identity, r)
        K = support_radius if support_radius is not None else max(2 * r, 4)
        values = []
        for p in p_ladder:
            res = minimize_defect(group, F, p, support_radius=K,
                                  restarts=restarts, seed=seed,
                                  max_sweeps=max_sweeps)
            kernel = collection_kernel(group, res.minimizer, F)
            rows.append({
                "F_radius": r, "F_size": len(F), "p": p,
                "defect": res.value, "window_norm": res.window_norm,
                "acf_on_F": {s: kernel.value(s) for s in F},
            })
            values.append(res.value)
        decreasing = all(b < a + 1e-12 for a, b in zip(values, values[1:]))
        summaries.append({"F_radius": r, "defects": values,
                          "decreasing_in_p": decreasing})
    return {"rows": rows, "summaries": summaries,
            "p_ladder": list(p_ladder), "F_radii": list(F_radii)}
