"""Reachability qualifier algebra.

A qualifier is a finite set of term variables and arena locations, plus an
optional freshness marker (printed ``*``).  This module implements the
operations the rest of the checker is built on: substitution, saturation
(transitive closure through a typing scope), overlap, and the algorithmic
qualifier-subtyping decision procedure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Protocol


class UnboundQualifierVar(Exception):
    """A qualifier mentions a variable with no binding.

    Surface programs cannot trigger this; it signals a bug in a caller that
    built an ill-scoped qualifier.
    """


class QualifierScope(Protocol):
    """What the qualifier algebra needs to know about a typing environment."""

    def declared_qualifier(self, name: str) -> Optional["Qualifier"]:
        """Qualifier recorded at ``name``'s binding, or None if unbound."""
        ...

    def __len__(self) -> int: ...


@dataclass(frozen=True)
class Qualifier:
    """Finite set of variables and locations, with a freshness flag."""

    vars: frozenset = frozenset()
    locs: frozenset = frozenset()
    fresh: bool = False

    @staticmethod
    def of(*names: str, locs: Iterable[int] = (), fresh: bool = False) -> "Qualifier":
        return Qualifier(frozenset(names), frozenset(locs), fresh)

    def union(self, other: "Qualifier") -> "Qualifier":
        return Qualifier(
            self.vars | other.vars, self.locs | other.locs, self.fresh or other.fresh
        )

    def intersection(self, other: "Qualifier") -> "Qualifier":
        return Qualifier(
            self.vars & other.vars, self.locs & other.locs, self.fresh and other.fresh
        )

    def without_var(self, name: str) -> "Qualifier":
        return Qualifier(self.vars - {name}, self.locs, self.fresh)

    def without_fresh(self) -> "Qualifier":
        return Qualifier(self.vars, self.locs, False)

    def with_fresh(self) -> "Qualifier":
        return Qualifier(self.vars, self.locs, True)

    def with_vars(self, *names: str) -> "Qualifier":
        return Qualifier(self.vars | set(names), self.locs, self.fresh)

    def with_locs(self, *locs: int) -> "Qualifier":
        return Qualifier(self.vars, self.locs | set(locs), self.fresh)

    def minus_locs(self, locs: Iterable[int]) -> "Qualifier":
        return Qualifier(self.vars, self.locs - frozenset(locs), self.fresh)

    def is_empty(self) -> bool:
        return not self.vars and not self.locs and not self.fresh

    def subset_of(self, other: "Qualifier") -> bool:
        """Plain element-wise inclusion; fresh only allowed if other has it."""
        return (
            self.vars <= other.vars
            and self.locs <= other.locs
            and (not self.fresh or other.fresh)
        )

    def __str__(self) -> str:
        return format_qualifier(self)


EMPTY = Qualifier()
FRESH = Qualifier(fresh=True)


def observation(*names: str, locs: Iterable[int] = ()) -> Qualifier:
    """An observation filter: a qualifier that never carries the marker."""
    return Qualifier(frozenset(names), frozenset(locs), False)


def format_qualifier(q: Qualifier) -> str:
    parts = sorted(q.vars)
    parts += [f"ℓ{loc}" for loc in sorted(q.locs)]
    if q.fresh:
        parts.append("*")
    return "{" + ", ".join(parts) + "}"


def parse_qualifier(text: str) -> Qualifier:
    """Parse the textual form ``{x, y, ℓ3, *}``; inverse of format_qualifier."""
    body = text.strip()
    if not (body.startswith("{") and body.endswith("}")):
        raise ValueError(f"malformed qualifier: {text!r}")
    body = body[1:-1].strip()
    vars_, locs, fresh = set(), set(), False
    if body:
        for raw in body.split(","):
            item = raw.strip()
            if item == "*":
                fresh = True
            elif item.startswith("ℓ"):
                locs.add(int(item[1:]))
            elif item:
                vars_.add(item)
            else:
                raise ValueError(f"malformed qualifier: {text!r}")
    return Qualifier(frozenset(vars_), frozenset(locs), fresh)


def substitute_var(q: Qualifier, x: str, p: Qualifier) -> Qualifier:
    """q[p/x]: replace the variable x by the qualifier p, if present."""
    if x not in q.vars:
        return q
    return q.without_var(x).union(p)


def substitute_fresh(q: Qualifier, p: Qualifier) -> Qualifier:
    """q[p/*]: the marker is consumed and reintroduced only if p carries it."""
    if not q.fresh:
        return q
    return Qualifier(q.vars | p.vars, q.locs | p.locs, p.fresh)


def substitute_many(q: Qualifier, mapping: dict) -> Qualifier:
    """Simultaneous substitution of several variables by qualifiers."""
    hit = q.vars & mapping.keys()
    if not hit:
        return q
    out = Qualifier(q.vars - hit, q.locs, q.fresh)
    for x in hit:
        out = out.union(mapping[x])
    return out


def saturate(scope: QualifierScope, q: Qualifier) -> Qualifier:
    """Transitive closure: repeatedly unfold variables to their declared
    qualifiers until a fixed point, reached within |scope| iterations.

    Locations never unfold.  The freshness marker propagates through every
    unioned qualifier.
    """
    vars_ = set(q.vars)
    locs = set(q.locs)
    fresh = q.fresh
    for _ in range(len(scope) + 1):
        changed = False
        for x in list(vars_):
            declared = scope.declared_qualifier(x)
            if declared is None:
                raise UnboundQualifierVar(x)
            if not declared.vars <= vars_:
                vars_ |= declared.vars
                changed = True
            if not declared.locs <= locs:
                locs |= declared.locs
                changed = True
            if declared.fresh and not fresh:
                fresh = True
                changed = True
        if not changed:
            break
    return Qualifier(frozenset(vars_), frozenset(locs), fresh)


def overlap(scope: QualifierScope, p: Qualifier, q: Qualifier) -> Qualifier:
    """p ** q: the marked intersection of saturations -- the permitted
    sharing between a function and its argument."""
    return saturate(scope, p).intersection(saturate(scope, q)).with_fresh()


def qual_sub(scope: QualifierScope, p: Qualifier, q: Qualifier) -> bool:
    """Decide qualifier subtyping p <: q.

    Two-sided procedure: the right side q is self-saturated (every element
    whose binding carries a non-fresh qualifier absorbs that qualifier),
    then every element of p must either appear in the saturated set or, for
    a variable with a non-fresh declared qualifier, be expandable to it.
    Unbound variables make the judgement false.
    """
    return _qual_sub(scope, p, q, len(scope) + 1)


def _qual_sub(scope: QualifierScope, p: Qualifier, q: Qualifier, depth: int) -> bool:
    if depth < 0:
        return False
    if p.fresh and not q.fresh:
        return False

    qvars = set(q.vars)
    qlocs = set(q.locs)
    for _ in range(len(scope) + 1):
        changed = False
        for f in list(qvars):
            declared = scope.declared_qualifier(f)
            if declared is None or declared.fresh:
                continue
            if not declared.vars <= qvars:
                qvars |= declared.vars
                changed = True
            if not declared.locs <= qlocs:
                qlocs |= declared.locs
                changed = True
        if not changed:
            break

    if not p.locs <= qlocs:
        return False
    for x in p.vars:
        if x in qvars:
            continue
        declared = scope.declared_qualifier(x)
        if declared is None or declared.fresh:
            return False
        if not _qual_sub(scope, declared, q, depth - 1):
            return False
    return True
