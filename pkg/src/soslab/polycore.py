"""Multilinear monomials and polynomials over 0/1 variables.

Monomials are keyed by sorted tuples of 0-based variable ids; the empty
tuple is the constant monomial. Labeled keys attach one alphabet letter
per variable and are used by the CSP relaxations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping, Sequence, Union

Number = Union[int, float, Fraction]

MonomialKey = tuple  # strictly increasing tuple of ints
EMPTY: MonomialKey = ()


def make_key(vars: Iterable[int]) -> MonomialKey:
    """Build a canonical key, rejecting duplicates and negative ids."""
    vs = tuple(sorted(int(v) for v in vars))
    if any(v < 0 for v in vs):
        raise ValueError(f"negative variable id in {vs}")
    if any(a == b for a, b in zip(vs, vs[1:])):
        raise ValueError(f"duplicate variable id in {vs}")
    return vs


def is_key(key: Sequence[int]) -> bool:
    return all(isinstance(v, int) and v >= 0 for v in key) and all(
        a < b for a, b in zip(key, key[1:])
    )


def canonical_union(a: MonomialKey, b: MonomialKey) -> MonomialKey:
    """Sorted, deduplicated union of two monomial keys."""
    if not a:
        return tuple(b)
    if not b:
        return tuple(a)
    return tuple(sorted(set(a).union(b)))


def subsets_upto(n: int, r: int) -> list[MonomialKey]:
    """All subsets of range(n) of size at most r, in canonical key order.

    Canonical order is by size first, then lexicographic; the empty set
    comes first.
    """
    out: list[MonomialKey] = []
    for size in range(min(r, n) + 1):
        out.extend(combinations(range(n), size))
    return out


@dataclass(frozen=True)
class LabeledKey:
    """A variable subset together with one letter per variable."""

    vars: tuple
    letters: tuple

    def __post_init__(self):
        if len(self.vars) != len(self.letters):
            raise ValueError("vars and letters must have equal length")
        if not is_key(self.vars):
            raise ValueError(f"vars must be strictly increasing: {self.vars}")

    @classmethod
    def from_assignment(cls, assignment: Mapping[int, int]) -> "LabeledKey":
        items = sorted(assignment.items())
        return cls(tuple(v for v, _ in items), tuple(int(a) for _, a in items))

    def as_dict(self) -> dict[int, int]:
        return dict(zip(self.vars, self.letters))

    def check(self, q: int) -> None:
        if any(not 0 <= a < q for a in self.letters):
            raise ValueError(f"letter outside [0, {q}) in {self}")

    def __len__(self) -> int:
        return len(self.vars)

    def __repr__(self) -> str:
        inner = ",".join(f"{v}:{a}" for v, a in zip(self.vars, self.letters))
        return f"L[{inner}]"


def labeled_union(a: LabeledKey, b: LabeledKey) -> LabeledKey | None:
    """Merge two labeled keys; None if they disagree on a shared variable."""
    merged = dict(zip(a.vars, a.letters))
    for v, letter in zip(b.vars, b.letters):
        prev = merged.setdefault(v, letter)
        if prev != letter:
            return None
    return LabeledKey.from_assignment(merged)


def labeled_keys_upto(n: int, q: int, r: int) -> list[LabeledKey]:
    """All (S, alpha) with |S| <= r and alpha in [q]^S, in canonical order."""
    from itertools import product

    out = []
    for vars in subsets_upto(n, r):
        for letters in product(range(q), repeat=len(vars)):
            out.append(LabeledKey(vars, letters))
    return out


class MultilinearPoly:
    """Immutable multilinear polynomial: a map from key to nonzero coefficient."""

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[MonomialKey, Number] | None = None):
        clean: dict[MonomialKey, Number] = {}
        for key, coef in (terms or {}).items():
            key = make_key(key)
            total = clean.get(key, 0) + coef
            clean[key] = total
        self._terms = {k: c for k, c in clean.items() if c != 0}

    @property
    def terms(self) -> dict[MonomialKey, Number]:
        return dict(self._terms)

    @property
    def degree(self) -> int:
        return max((len(k) for k in self._terms), default=0)

    def max_var(self) -> int:
        return max((k[-1] for k in self._terms if k), default=-1)

    def items(self):
        return self._terms.items()

    def __eq__(self, other) -> bool:
        if not isinstance(other, MultilinearPoly):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    def __repr__(self) -> str:
        if not self._terms:
            return "MultilinearPoly(0)"
        parts = [f"{c}*x{list(k)}" if k else f"{c}" for k, c in sorted(self._terms.items())]
        return "MultilinearPoly(" + " + ".join(parts) + ")"

    def __add__(self, other: "MultilinearPoly") -> "MultilinearPoly":
        out = dict(self._terms)
        for k, c in other._terms.items():
            out[k] = out.get(k, 0) + c
        return MultilinearPoly(out)

    def scale(self, a: Number) -> "MultilinearPoly":
        return MultilinearPoly({k: a * c for k, c in self._terms.items()})

    def __mul__(self, other: "MultilinearPoly") -> "MultilinearPoly":
        # product followed by x_i^2 = x_i
        out: dict[MonomialKey, Number] = {}
        for k1, c1 in self._terms.items():
            for k2, c2 in other._terms.items():
                k = canonical_union(k1, k2)
                out[k] = out.get(k, 0) + c1 * c2
        return MultilinearPoly(out)

    def to_json(self) -> dict:
        return {
            "terms": [
                {"vars": list(k), "coef": _coef_to_json(c)}
                for k, c in sorted(self._terms.items(), key=lambda kv: (len(kv[0]), kv[0]))
            ]
        }

    @classmethod
    def from_json(cls, data: dict | str) -> "MultilinearPoly":
        if isinstance(data, str):
            data = json.loads(data)
        terms: dict[MonomialKey, Number] = {}
        for t in data["terms"]:
            key = make_key(t["vars"])
            terms[key] = terms.get(key, 0) + _coef_from_json(t["coef"])
        return cls(terms)


def _coef_to_json(c: Number):
    if isinstance(c, Fraction):
        return f"{c.numerator}/{c.denominator}"
    return c


def _coef_from_json(c) -> Number:
    if isinstance(c, str):
        return Fraction(c)
    return c


def multilinearize(terms: Iterable[tuple[Sequence[int], Number]]) -> MultilinearPoly:
    """Collapse a polynomial given as (exponent vector, coefficient) terms.

    Every positive exponent becomes 1, like terms merge and zeros drop.

    >>> multilinearize([((2, 1), 1)]).terms
    {(0, 1): 1}
    """
    out: dict[MonomialKey, Number] = {}
    for exps, coef in terms:
        if any(e < 0 for e in exps):
            raise ValueError(f"negative exponent in {tuple(exps)}")
        key = tuple(i for i, e in enumerate(exps) if e > 0)
        out[key] = out.get(key, 0) + coef
    return MultilinearPoly(out)


def evaluate_raw(terms: Iterable[tuple[Sequence[int], Number]], assignment: Sequence[Number]):
    """Evaluate a raw (non-multilinear) polynomial at a point."""
    total = 0
    for exps, coef in terms:
        val = coef
        for i, e in enumerate(exps):
            if e:
                val = val * assignment[i] ** e
        total += val
    return total


def evaluate(p: MultilinearPoly, assignment: Sequence[Number]):
    """Sum of coefficient times product of assigned values, per monomial."""
    if len(assignment) < p.max_var() + 1:
        raise ValueError(
            f"assignment has {len(assignment)} entries, polynomial uses variable {p.max_var()}"
        )
    total = 0
    for key, coef in p.items():
        val = coef
        for v in key:
            val = val * assignment[v]
        total += val
    return total


def key_to_str(key) -> str:
    """``[1,3]`` for subset keys, ``[1:0,3:1]`` for labeled keys."""
    if isinstance(key, LabeledKey):
        return "[" + ",".join(f"{v}:{a}" for v, a in zip(key.vars, key.letters)) + "]"
    return "[" + ",".join(str(v) for v in key) + "]"


def key_from_str(text: str):
    body = text.strip()
    if not (body.startswith("[") and body.endswith("]")):
        raise ValueError(f"malformed key {text!r}")
    body = body[1:-1].strip()
    if ":" in body:
        pairs = [item.split(":") for item in body.split(",")]
        return LabeledKey(tuple(int(v) for v, _ in pairs), tuple(int(a) for _, a in pairs))
    return make_key(json.loads(text))
