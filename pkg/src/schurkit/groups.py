"""Exact models of finitely generated groups with word metric and ball enumeration.

Three families are supported: the free abelian groups Z^d, the free groups F_k
and the finite cyclic groups C_m.  Elements are plain hashable Python values in
canonical form (tuples of ints for Z^d, freely reduced letter tuples for F_k,
residues for C_m), so they can be used directly as dictionary keys.

Every group carries a documented total order on elements, used as the
tie-breaker for all downstream argmax and canonicalization steps:

* Z^d: lexicographic order on coordinate tuples,
* F_k: shortlex, with letters ordered a < a^-1 < b < b^-1 < ...,
* C_m: numeric order on residues 0..m-1.

Groups are immutable after construction and all operations are pure; the
internal ball cache is guarded by a lock so instances may be shared across
threads.
"""

from __future__ import annotations

import threading
from typing import Any, Hashable

Element = Hashable

DEFAULT_BALL_CAP = 10**6

_LETTERS = "abcdefghijklmnopqrstuvwxyz"


class BallCapExceeded(RuntimeError):
    """Ball enumeration exceeded the configured cap (resource guard, not a math error)."""


class Group:
    """Common interface for the concrete group models.

    Subclasses define the group law (`mul`, `inv`), the word length of an
    element with respect to the fixed symmetric generating set, element
    validation and the total order key.
    """

    name: str
    generators: tuple[Element, ...]
    identity: Element

    def __init__(self, ball_cap: int = DEFAULT_BALL_CAP):
        self.ball_cap = ball_cap
        self._ball_lock = threading.Lock()
        self._spheres: list[set] = []
        self._seen: set = set()
        self._balls: dict[int, tuple] = {}

    # -- group law ---------------------------------------------------------

    def mul(self, a: Element, b: Element) -> Element:
        raise NotImplementedError

    def inv(self, a: Element) -> Element:
        raise NotImplementedError

    def word_length(self, a: Element) -> int:
        raise NotImplementedError

    def order_key(self, a: Element) -> Any:
        raise NotImplementedError

    def validate(self, a: Element) -> None:
        """Raise ValueError if `a` is not a canonical element of this group."""
        raise NotImplementedError

    # -- metric ------------------------------------------------------------

    def word_distance(self, a: Element, b: Element) -> int:
        """Left-invariant word metric d(a, b) = |a^-1 b|."""
        return self.word_length(self.mul(self.inv(a), b))

    def ball(self, center: Element, r: int) -> tuple[Element, ...]:
        """All elements at word distance <= r from `center`, in element order.

        Enumerated by breadth-first search from the identity (memoized per
        radius) and left-translated; raises BallCapExceeded if more than
        `ball_cap` elements would be visited.
        """
        if r < 0:
            raise ValueError("radius must be >= 0")
        base = self._ball_at_identity(r)
        if center == self.identity:
            return base
        shifted = [self.mul(center, u) for u in base]
        shifted.sort(key=self.order_key)
        return tuple(shifted)

    def _ball_at_identity(self, r: int) -> tuple[Element, ...]:
        with self._ball_lock:
            cached = self._balls.get(r)
            if cached is not None:
                return cached
            if not self._spheres:
                self._spheres.append({self.identity})
                self._seen.add(self.identity)
            while len(self._spheres) - 1 < r:
                frontier = set()
                for x in self._spheres[-1]:
                    for s in self.generators:
                        y = self.mul(x, s)
                        if y not in self._seen:
                            frontier.add(y)
                            self._seen.add(y)
                            if len(self._seen) > self.ball_cap:
                                raise BallCapExceeded(
                                    f"ball of radius {r} in {self.name} exceeds "
                                    f"cap {self.ball_cap}"
                                )
                self._spheres.append(frontier)
            elems = [x for sphere in self._spheres[: r + 1] for x in sphere]
            elems.sort(key=self.order_key)
            out = tuple(elems)
            self._balls[r] = out
            return out

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name}>"


class ZD(Group):
    """The free abelian group Z^d with standard generators +-e_i (l^1 word metric)."""

    def __init__(self, d: int, ball_cap: int = DEFAULT_BALL_CAP):
        if d < 1:
            raise ValueError("d must be a positive integer")
        super().__init__(ball_cap)
        self.d = d
        self.name = f"Z{d}"
        self.identity = (0,) * d
        gens = []
        for i in range(d):
            e = [0] * d
            e[i] = 1
            gens.append(tuple(e))
            e[i] = -1
            gens.append(tuple(e))
        self.generators = tuple(gens)

    def mul(self, a, b):
        return tuple(x + y for x, y in zip(a, b))

    def inv(self, a):
        return tuple(-x for x in a)

    def word_length(self, a):
        return sum(abs(x) for x in a)

    def order_key(self, a):
        return a

    def validate(self, a):
        if not (isinstance(a, tuple) and len(a) == self.d
                and all(isinstance(x, int) for x in a)):
            raise ValueError(f"not a Z{self.d} element: {a!r}")


class FreeGroup(Group):
    """The free group F_k on k generators.

    Elements are freely reduced words stored as tuples of nonzero signed
    integers: letter +i is the i-th generator, -i its inverse (1-based).
    """

    def __init__(self, k: int, ball_cap: int = DEFAULT_BALL_CAP):
        if not 1 <= k <= len(_LETTERS):
            raise ValueError(f"k must be between 1 and {len(_LETTERS)}")
        super().__init__(ball_cap)
        self.k = k
        self.name = f"F{k}"
        self.identity = ()
        self.generators = tuple(
            (ell,) for i in range(1, k + 1) for ell in (i, -i)
        )

    def mul(self, a, b):
        head = list(a)
        i = 0
        n = len(b)
        while head and i < n and head[-1] == -b[i]:
            head.pop()
            i += 1
        return tuple(head) + tuple(b[i:])

    def inv(self, a):
        return tuple(-ell for ell in reversed(a))

    def word_length(self, a):
        return len(a)

    def order_key(self, a):
        # shortlex; letter rank a=0, a^-1=1, b=2, b^-1=3, ...
        return (len(a), tuple(2 * (abs(ell) - 1) + (ell < 0) for ell in a))

    def validate(self, a):
        if not isinstance(a, tuple):
            raise ValueError(f"not an F{self.k} element: {a!r}")
        for ell in a:
            if not isinstance(ell, int) or ell == 0 or abs(ell) > self.k:
                raise ValueError(f"invalid letter {ell!r} in word {a!r}")
        for x, y in zip(a, a[1:]):
            if x == -y:
                raise ValueError(f"word not freely reduced: {a!r}")


class CyclicZ(Group):
    """The finite cyclic group C_m, elements 0..m-1, generators {1, m-1}."""

    def __init__(self, m: int, ball_cap: int = DEFAULT_BALL_CAP):
        if m < 1:
            raise ValueError("m must be a positive integer")
        super().__init__(ball_cap)
        self.m = m
        self.name = f"C{m}"
        self.identity = 0
        gens = {1 % m, (m - 1) % m}
        gens.discard(0)
        self.generators = tuple(sorted(gens))

    def mul(self, a, b):
        return (a + b) % self.m

    def inv(self, a):
        return (-a) % self.m

    def word_length(self, a):
        return min(a, self.m - a) if a else 0

    def order_key(self, a):
        return a

    def validate(self, a):
        if not (isinstance(a, int) and not isinstance(a, bool) and 0 <= a < self.m):
            raise ValueError(f"not a C{self.m} element: {a!r}")


def parse_group(spec: str, ball_cap: int = DEFAULT_BALL_CAP) -> Group:
    """Build a group from a specification string: "Z1", "Z2", "F2", "C12", ...."""
    spec = spec.strip()
    if len(spec) >= 2 and spec[0] in "ZFC" and spec[1:].isdigit():
        n = int(spec[1:])
        if spec[0] == "Z":
            return ZD(n, ball_cap)
        if spec[0] == "F":
            return FreeGroup(n, ball_cap)
        return CyclicZ(n, ball_cap)
    raise ValueError(f"unknown group spec {spec!r} (expected Z<d>, F<k> or C<m>)")
