"""Serialization of groups, elements, sparse functions and kernels.

Wire formats:

* group specs: "Z1", "Z2", "F2", "C12", ...
* elements: JSON arrays of ints for Z^d, reduced-word strings like "a B a"
  (uppercase means inverse) for free groups, plain ints for cyclic groups;
* sparse functions: {"group": spec, "entries": [[element, value], ...]};
* kernels: bare [[element, value], ...] lists (group supplied from context).
"""

from __future__ import annotations

import json
from typing import Any

from .functions import SparseFunction
from .groups import CyclicZ, Element, FreeGroup, Group, ZD, parse_group
from .posdef import Kernel

_LETTERS = "abcdefghijklmnopqrstuvwxyz"


def group_spec(group: Group) -> str:
    return group.name


def element_to_json(group: Group, x: Element) -> Any:
    group.validate(x)
    if isinstance(group, ZD):
        return list(x)
    if isinstance(group, FreeGroup):
        return element_to_str(group, x)
    return x


def element_from_json(group: Group, obj: Any) -> Element:
    if isinstance(group, ZD):
        if not isinstance(obj, (list, tuple)):
            raise ValueError(f"expected a coordinate array, got {obj!r}")
        x = tuple(int(c) for c in obj)
    elif isinstance(group, FreeGroup):
        if not isinstance(obj, str):
            raise ValueError(f"expected a word string, got {obj!r}")
        x = parse_word(group, obj)
    else:
        x = int(obj)
    group.validate(x)
    return x


def element_to_str(group: Group, x: Element) -> str:
    """Human-readable element: "1,-2" for Z^d, "a B a" for free groups,
    "3" for cyclic groups.  The identity word is the empty string."""
    group.validate(x)
    if isinstance(group, ZD):
        return ",".join(str(c) for c in x)
    if isinstance(group, FreeGroup):
        letters = []
        for ell in x:
            ch = _LETTERS[abs(ell) - 1]
            letters.append(ch if ell > 0 else ch.upper())
        return " ".join(letters)
    return str(x)


def parse_word(group: FreeGroup, text: str) -> Element:
    """Parse "a B a" (spaces optional) into a freely reduced word."""
    word = []
    for ch in text.replace(" ", ""):
        if ch == "e":
            continue
        low = ch.lower()
        idx = _LETTERS.find(low)
        if idx < 0 or idx >= group.k:
            raise ValueError(f"unknown generator letter {ch!r} for {group.name}")
        word.append(-(idx + 1) if ch.isupper() else idx + 1)
    # free reduction
    out: list[int] = []
    for ell in word:
        if out and out[-1] == -ell:
            out.pop()
        else:
            out.append(ell)
    return tuple(out)


def parse_element(group: Group, text: str) -> Element:
    """Parse an element from its CLI string form."""
    text = text.strip()
    if isinstance(group, ZD):
        if text.startswith("["):
            return element_from_json(group, json.loads(text))
        parts = [p for p in text.split(",") if p.strip()]
        x = tuple(int(p) for p in parts)
        group.validate(x)
        return x
    if isinstance(group, FreeGroup):
        return parse_word(group, text)
    x = int(text)
    group.validate(x)
    return x


def sparse_to_json(f: SparseFunction) -> dict:
    return {
        "group": group_spec(f.group),
        "entries": [[element_to_json(f.group, x), v] for x, v in
                    sorted(f.entries.items(), key=lambda kv: f.group.order_key(kv[0]))],
    }


def sparse_from_json(obj: dict, group: Group | None = None) -> SparseFunction:
    g = group if group is not None else parse_group(obj["group"])
    if group is not None and obj.get("group") not in (None, group_spec(group)):
        raise ValueError(f"function group tag {obj['group']!r} does not match "
                         f"{group_spec(group)!r}")
    entries = {element_from_json(g, e): float(v) for e, v in obj["entries"]}
    return SparseFunction(g, entries, relaxed=True)


def kernel_to_json(k: Kernel) -> list:
    return [[element_to_json(k.group, s), v] for s, v in
            sorted(k.entries.items(), key=lambda kv: k.group.order_key(kv[0]))]


def kernel_from_json(obj: list, group: Group, label: str = "") -> Kernel:
    entries = {element_from_json(group, e): float(v) for e, v in obj}
    return Kernel(group, entries, label)
