"""Sparse nonnegative functions on a group: l^p norms, translations, concentration.

A SparseFunction is an immutable finitely supported map from group elements to
positive values.  The strict constructor enforces values in (0, 1]; the
relaxed form drops the upper bound (residuals and optimizer iterates may need
it) but values stay positive and finite.  Zero values are never stored.

Floating point policy: 64-bit floats throughout; sums are accumulated in a
deterministic order (descending value, then element order) so results are
reproducible bit for bit.
"""

from __future__ import annotations

import math
from typing import Iterable, Mapping

from .groups import Element, Group


class SparseFunction:
    __slots__ = ("group", "entries", "relaxed", "_sorted_items")

    def __init__(self, group: Group, entries: Mapping[Element, float], *,
                 relaxed: bool = False):
        data: dict[Element, float] = {}
        for x, v in entries.items():
            v = float(v)
            if v == 0.0:
                continue
            if not math.isfinite(v) or v < 0.0:
                raise ValueError(f"value at {x!r} must be finite and >= 0, got {v}")
            if not relaxed and v > 1.0:
                raise ValueError(f"value at {x!r} exceeds 1 (use relaxed=True): {v}")
            group.validate(x)
            data[x] = v
        object.__setattr__(self, "group", group)
        object.__setattr__(self, "entries", data)
        object.__setattr__(self, "relaxed", relaxed)
        object.__setattr__(self, "_sorted_items", None)

    def __setattr__(self, name, value):
        raise AttributeError("SparseFunction is immutable")

    # -- basic queries -------------------------------------------------------

    def __len__(self) -> int:
        return len(self.entries)

    def __bool__(self) -> bool:
        return bool(self.entries)

    def value(self, x: Element) -> float:
        return self.entries.get(x, 0.0)

    def support(self) -> tuple[Element, ...]:
        return tuple(sorted(self.entries, key=self.group.order_key))

    def items_sorted(self) -> tuple[tuple[Element, float], ...]:
        """Entries sorted by descending value, ties by element order (the
        canonical summation order)."""
        cached = self._sorted_items
        if cached is None:
            key = self.group.order_key
            cached = tuple(sorted(self.entries.items(),
                                  key=lambda kv: (-kv[1], key(kv[0]))))
            object.__setattr__(self, "_sorted_items", cached)
        return cached

    def __eq__(self, other) -> bool:
        return (isinstance(other, SparseFunction)
                and self.group is other.group
                and self.entries == other.entries)

    __hash__ = None

    def __repr__(self) -> str:
        return f"<SparseFunction on {self.group.name}, {len(self)} points>"

    # -- norms ---------------------------------------------------------------

    def lp_mass(self, p: float) -> float:
        """The p-th power sum of the values (the l^p norm to the p)."""
        if p < 1:
            raise ValueError("p must be >= 1")
        return sum(v ** p for _, v in self.items_sorted())

    def lp_norm(self, p: float) -> float:
        """l^p norm; p = math.inf gives the sup norm."""
        if p == math.inf:
            return max(self.entries.values(), default=0.0)
        return self.lp_mass(p) ** (1.0 / p)

    def sup_norm(self) -> float:
        return max(self.entries.values(), default=0.0)

    # -- group actions ---------------------------------------------------------

    def translate_left(self, s: Element) -> "SparseFunction":
        """The left translate (delta_s * f)(x) = f(s^-1 x); support moves to s.supp."""
        g = self.group
        return SparseFunction(g, {g.mul(s, x): v for x, v in self.entries.items()},
                              relaxed=self.relaxed)

    def translate_right(self, s: Element) -> "SparseFunction":
        """The right action (rho(s) f)(x) = f(x s); support moves to supp.s^-1."""
        g = self.group
        si = g.inv(s)
        return SparseFunction(g, {g.mul(x, si): v for x, v in self.entries.items()},
                              relaxed=self.relaxed)

    # -- restriction and concentration ----------------------------------------

    def restrict(self, center: Element, r: int) -> "SparseFunction":
        """The product f . 1_{B(center, r)}."""
        g = self.group
        if len(self.entries) * 2 <= _ball_size_guess(g, r):
            kept = {x: v for x, v in self.entries.items()
                    if g.word_distance(center, x) <= r}
        else:
            kept = {}
            for u in g.ball(g.identity, r):
                x = g.mul(center, u)
                v = self.entries.get(x)
                if v is not None:
                    kept[x] = v
        return SparseFunction(g, kept, relaxed=self.relaxed)

    def drop_support(self, elements: Iterable[Element]) -> "SparseFunction":
        """Remove the given support points (exact, no float subtraction)."""
        gone = set(elements)
        return SparseFunction(self.group,
                              {x: v for x, v in self.entries.items() if x not in gone},
                              relaxed=self.relaxed)

    def concentration(self, p: float, r: int) -> tuple[float, Element]:
        """Largest l^p^p mass of f inside a ball of radius r, with its center.

        The supremum over all centers is attained within the r-neighborhood of
        the support (elsewhere the restriction is empty), so scanning those
        candidates is exact.  Ties are broken by element order.
        """
        g = self.group
        if not self.entries:
            return 0.0, g.identity
        ball_e = g.ball(g.identity, r)
        candidates = set()
        for y in self.entries:
            for u in ball_e:
                candidates.add(g.mul(y, u))
        powers = {x: v ** p for x, v in self.entries.items()}
        use_ball = len(ball_e) <= len(powers)
        best_mass = -1.0
        best_center = None
        key = g.order_key
        for x in sorted(candidates, key=key):
            if use_ball:
                mass = 0.0
                for u in ball_e:
                    w = powers.get(g.mul(x, u))
                    if w is not None:
                        mass += w
            else:
                mass = sum(w for y, w in powers.items()
                           if g.word_distance(x, y) <= r)
            if mass > best_mass + 1e-15:
                best_mass = mass
                best_center = x
        return best_mass, best_center


def _ball_size_guess(group: Group, r: int) -> int:
    cached = group._balls.get(r)
    return len(cached) if cached is not None else (2 * r + 1) ** getattr(group, "d", 1)


# -- constructors ---------------------------------------------------------------


def dirac(group: Group, x: Element, value: float = 1.0) -> SparseFunction:
    return SparseFunction(group, {x: value})


def scaled_indicator(group: Group, elements: Iterable[Element],
                     value: float) -> SparseFunction:
    return SparseFunction(group, {x: value for x in elements})


def normalized_indicator(group: Group, elements: Iterable[Element],
                         p: float) -> SparseFunction:
    """The l^p-normalized indicator |A|^(-1/p) 1_A."""
    elems = list(elements)
    if not elems:
        return SparseFunction(group, {})
    v = len(elems) ** (-1.0 / p)
    return SparseFunction(group, {x: v for x in elems})


def lp_distance(f: SparseFunction, g: SparseFunction, p: float) -> float:
    """l^p distance between two sparse functions on the same group."""
    if f.group is not g.group:
        raise ValueError("functions live on different groups")
    total = 0.0
    for x in sorted(set(f.entries) | set(g.entries), key=f.group.order_key):
        total += abs(f.value(x) - g.value(x)) ** p
    return total ** (1.0 / p)
