"""Core term AST shared by the checker, the evaluator, and the lowering pass.

Values are the value-shaped subset of terms (constants, unit, lambdas, type
lambdas, and store indices), as in a substitution-based small-step semantics.
Substitution rewrites variables both at term level and inside the qualifier
annotations carried by lambdas, using the qualifier of the substituted value.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Optional, Union

from .qualifiers import EMPTY, Qualifier
from .subtyping import (
    QualifiedType,
    TypeVar,
    fresh_name,
    subst_qtype,
)


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    col: int
    end_line: int
    end_col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


class Term:
    span: Optional[SourceSpan]

    def __str__(self) -> str:
        from .surface import print_core

        return print_core(self)


def _span_field():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Const(Term):
    value: object  # None = unit, int, bool
    span: Optional[SourceSpan] = _span_field()


@dataclass(frozen=True)
class Var(Term):
    name: str
    span: Optional[SourceSpan] = _span_field()


@dataclass(frozen=True)
class Abs(Term):
    self_name: str
    param: str
    domain: QualifiedType
    codomain: QualifiedType
    capture: Qualifier
    body: Term
    span: Optional[SourceSpan] = _span_field()


@dataclass(frozen=True)
class App(Term):
    fn: Term
    arg: Term
    span: Optional[SourceSpan] = _span_field()


@dataclass(frozen=True)
class RefNew(Term):
    init: Term
    span: Optional[SourceSpan] = _span_field()


@dataclass(frozen=True)
class RefAt(Term):
    init: Term
    proxy: Term
    span: Optional[SourceSpan] = _span_field()


@dataclass(frozen=True)
class Deref(Term):
    target: Term
    span: Optional[SourceSpan] = _span_field()


@dataclass(frozen=True)
class Assign(Term):
    target: Term
    value: Term
    span: Optional[SourceSpan] = _span_field()


@dataclass(frozen=True)
class TAbs(Term):
    self_name: str
    tvar: str
    qvar: str
    bound: QualifiedType
    codomain: QualifiedType
    capture: Qualifier
    body: Term
    span: Optional[SourceSpan] = _span_field()


@dataclass(frozen=True)
class TApp(Term):
    fn: Term
    targ: QualifiedType
    span: Optional[SourceSpan] = _span_field()


@dataclass(frozen=True)
class WithR(Term):
    """Scope introduction: with binder = Ref init in body."""

    binder: str
    init: Term
    body: Term
    span: Optional[SourceSpan] = _span_field()


@dataclass(frozen=True)
class WithC(Term):
    """Scope elimination: with<loc>{ body }; never appears in surface programs."""

    loc: int
    body: Term
    span: Optional[SourceSpan] = _span_field()


@dataclass(frozen=True)
class Loc(Term):
    loc: int
    offset: int
    span: Optional[SourceSpan] = _span_field()


@dataclass(frozen=True)
class IntOp(Term):
    """Gated integer extension: '+' or '-'."""

    op: str
    left: Term
    right: Term
    span: Optional[SourceSpan] = _span_field()


@dataclass(frozen=True)
class Ifz(Term):
    """Gated integer extension: branch on zero."""

    cond: Term
    then: Term
    orelse: Term
    span: Optional[SourceSpan] = _span_field()


UNIT_CONST = Const(None)


def is_value(t: Term) -> bool:
    return isinstance(t, (Const, Abs, TAbs, Loc))


def value_qualifier(v: Term) -> Qualifier:
    """Runtime qualifier of a closed value, used when substituting it."""
    if isinstance(v, Const):
        return EMPTY
    if isinstance(v, Loc):
        return Qualifier.of(locs=[v.loc])
    if isinstance(v, (Abs, TAbs)):
        return v.capture
    raise ValueError(f"not a value: {v!r}")


def free_vars(t: Term) -> set:
    """Free term variables, including qualifier-level mentions in annotations."""
    from .subtyping import free_vars_qtype

    if isinstance(t, Const) or isinstance(t, Loc):
        return set()
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, Abs):
        fv = (
            free_vars(t.body)
            | free_vars_qtype(t.domain)
            | free_vars_qtype(t.codomain)
            | set(t.capture.vars)
        )
        return fv - {t.self_name, t.param}
    if isinstance(t, TAbs):
        fv = (
            free_vars(t.body)
            | free_vars_qtype(t.bound)
            | free_vars_qtype(t.codomain)
            | set(t.capture.vars)
        )
        return fv - {t.self_name, t.qvar}
    if isinstance(t, App):
        return free_vars(t.fn) | free_vars(t.arg)
    if isinstance(t, RefNew):
        return free_vars(t.init)
    if isinstance(t, RefAt):
        return free_vars(t.init) | free_vars(t.proxy)
    if isinstance(t, Deref):
        return free_vars(t.target)
    if isinstance(t, Assign):
        return free_vars(t.target) | free_vars(t.value)
    if isinstance(t, TApp):
        return free_vars(t.fn) | free_vars_qtype(t.targ)
    if isinstance(t, WithR):
        return free_vars(t.init) | (free_vars(t.body) - {t.binder})
    if isinstance(t, WithC):
        return free_vars(t.body)
    if isinstance(t, IntOp):
        return free_vars(t.left) | free_vars(t.right)
    if isinstance(t, Ifz):
        return free_vars(t.cond) | free_vars(t.then) | free_vars(t.orelse)
    raise TypeError(t)


def local_locations(t: Term) -> frozenset:
    """LC(t): the locations of every scope-elimination node inside t."""
    if isinstance(t, (Const, Var, Loc)):
        return frozenset()
    if isinstance(t, WithC):
        return frozenset({t.loc}) | local_locations(t.body)
    if isinstance(t, (Abs, TAbs)):
        return local_locations(t.body)
    if isinstance(t, (RefNew, Deref)):
        return local_locations(t.init if isinstance(t, RefNew) else t.target)
    if isinstance(t, TApp):
        return local_locations(t.fn)
    if isinstance(t, App):
        return local_locations(t.fn) | local_locations(t.arg)
    if isinstance(t, RefAt):
        return local_locations(t.init) | local_locations(t.proxy)
    if isinstance(t, Assign):
        return local_locations(t.target) | local_locations(t.value)
    if isinstance(t, WithR):
        return local_locations(t.init) | local_locations(t.body)
    if isinstance(t, IntOp):
        return local_locations(t.left) | local_locations(t.right)
    if isinstance(t, Ifz):
        return (
            local_locations(t.cond)
            | local_locations(t.then)
            | local_locations(t.orelse)
        )
    raise TypeError(t)


def all_names(t: Term) -> set:
    """Every variable name occurring in t, bound or free."""
    names = set()

    def walk(u: Term) -> None:
        if isinstance(u, Var):
            names.add(u.name)
        elif isinstance(u, Abs):
            names.update((u.self_name, u.param))
            walk(u.body)
        elif isinstance(u, TAbs):
            names.update((u.self_name, u.qvar))
            walk(u.body)
        elif isinstance(u, WithR):
            names.add(u.binder)
            walk(u.init)
            walk(u.body)
        else:
            for child in _children(u):
                walk(child)

    walk(t)
    return names


def _children(t: Term):
    if isinstance(t, (Const, Var, Loc)):
        return ()
    if isinstance(t, (Abs, TAbs, WithC)):
        return (t.body,)
    if isinstance(t, App):
        return (t.fn, t.arg)
    if isinstance(t, RefNew):
        return (t.init,)
    if isinstance(t, RefAt):
        return (t.init, t.proxy)
    if isinstance(t, Deref):
        return (t.target,)
    if isinstance(t, Assign):
        return (t.target, t.value)
    if isinstance(t, TApp):
        return (t.fn,)
    if isinstance(t, WithR):
        return (t.init, t.body)
    if isinstance(t, IntOp):
        return (t.left, t.right)
    if isinstance(t, Ifz):
        return (t.cond, t.then, t.orelse)
    raise TypeError(t)


@dataclass(frozen=True)
class Substitution:
    """Simultaneous substitution of variables by closed values.

    Carries the matching qualifier-level substitution so that annotations
    stay consistent with the substituted terms, and optionally a type-level
    substitution for universal instantiation.
    """

    terms: dict
    quals: dict
    types: dict

    @staticmethod
    def of(*pairs) -> "Substitution":
        terms = {x: v for x, v in pairs}
        quals = {x: value_qualifier(v) for x, v in pairs}
        return Substitution(terms, quals, {})


def substitute(t: Term, sub: Substitution) -> Term:
    """Capture-avoiding substitution; binders colliding with names in the
    substituted values are freshened (duplication through self-reference
    substitution would otherwise create duplicate binders on one scope path).
    """
    avoid = set()
    for v in sub.terms.values():
        avoid |= all_names(v)
    return _subst(t, sub, avoid)


def _subst(t: Term, sub: Substitution, avoid: set) -> Term:
    if not sub.terms and not sub.quals and not sub.types:
        return t
    if isinstance(t, Const) or isinstance(t, Loc):
        return t
    if isinstance(t, Var):
        return sub.terms.get(t.name, t)
    if isinstance(t, Abs):
        t, names = _freshen_binders(t, ("self_name", "param"), sub, avoid)
        inner = _shadow(sub, names)
        return replace(
            t,
            domain=subst_qtype(t.domain, inner.quals, inner.types),
            codomain=subst_qtype(t.codomain, inner.quals, inner.types),
            capture=_subst_qual(t.capture, inner),
            body=_subst(t.body, inner, avoid),
        )
    if isinstance(t, TAbs):
        t, names = _freshen_binders(t, ("self_name", "qvar"), sub, avoid)
        inner = _shadow(sub, names | {t.tvar})
        return replace(
            t,
            bound=subst_qtype(t.bound, inner.quals, inner.types),
            codomain=subst_qtype(t.codomain, inner.quals, inner.types),
            capture=_subst_qual(t.capture, inner),
            body=_subst(t.body, inner, avoid),
        )
    if isinstance(t, WithR):
        t, names = _freshen_binders(t, ("binder",), sub, avoid)
        inner = _shadow(sub, names)
        return replace(
            t, init=_subst(t.init, sub, avoid), body=_subst(t.body, inner, avoid)
        )
    if isinstance(t, App):
        return replace(t, fn=_subst(t.fn, sub, avoid), arg=_subst(t.arg, sub, avoid))
    if isinstance(t, RefNew):
        return replace(t, init=_subst(t.init, sub, avoid))
    if isinstance(t, RefAt):
        return replace(
            t, init=_subst(t.init, sub, avoid), proxy=_subst(t.proxy, sub, avoid)
        )
    if isinstance(t, Deref):
        return replace(t, target=_subst(t.target, sub, avoid))
    if isinstance(t, Assign):
        return replace(
            t, target=_subst(t.target, sub, avoid), value=_subst(t.value, sub, avoid)
        )
    if isinstance(t, TApp):
        return replace(
            t,
            fn=_subst(t.fn, sub, avoid),
            targ=subst_qtype(t.targ, sub.quals, sub.types),
        )
    if isinstance(t, WithC):
        return replace(t, body=_subst(t.body, sub, avoid))
    if isinstance(t, IntOp):
        return replace(
            t, left=_subst(t.left, sub, avoid), right=_subst(t.right, sub, avoid)
        )
    if isinstance(t, Ifz):
        return replace(
            t,
            cond=_subst(t.cond, sub, avoid),
            then=_subst(t.then, sub, avoid),
            orelse=_subst(t.orelse, sub, avoid),
        )
    raise TypeError(t)


def _subst_qual(q: Qualifier, sub: Substitution) -> Qualifier:
    from .qualifiers import substitute_many

    return substitute_many(q, sub.quals)


def _shadow(sub: Substitution, names: set) -> Substitution:
    return Substitution(
        {k: v for k, v in sub.terms.items() if k not in names},
        {k: v for k, v in sub.quals.items() if k not in names},
        {k: v for k, v in sub.types.items() if k not in names},
    )


def _freshen_binders(t, attrs, sub: Substitution, avoid: set):
    """Rename binders that collide with names inside the substituted values."""
    renames = {}
    for attr in attrs:
        name = getattr(t, attr)
        if name in avoid:
            renames[name] = fresh_name(name)
    if renames:
        ren = Substitution(
            {old: Var(new) for old, new in renames.items()},
            {old: Qualifier.of(new) for old, new in renames.items()},
            {},
        )
        t = _subst_node_binders(t, attrs, renames)
        t = _subst(t, ren, set())
    names = {getattr(t, attr) for attr in attrs}
    return t, names


def _subst_node_binders(t, attrs, renames):
    updates = {}
    for attr in attrs:
        name = getattr(t, attr)
        if name in renames:
            updates[attr] = renames[name]
    return replace(t, **updates)


def alpha_equal(a: Term, b: Term) -> bool:
    """Structural equality modulo bound names (annotations included)."""
    return _alpha(a, b, {}, {})


def _alpha(a: Term, b: Term, la: dict, lb: dict) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, Const):
        return a.value == b.value
    if isinstance(a, Loc):
        return (a.loc, a.offset) == (b.loc, b.offset)
    if isinstance(a, Var):
        return la.get(a.name, a.name) == lb.get(b.name, b.name)
    if isinstance(a, Abs):
        n1, n2 = fresh_name("a"), fresh_name("a")
        la2 = {**la, a.self_name: n1, a.param: n2}
        lb2 = {**lb, b.self_name: n1, b.param: n2}
        return (
            _alpha_qtype(a.domain, b.domain, la, lb)
            and _alpha_qtype(a.codomain, b.codomain, la2, lb2)
            and _alpha_qual(a.capture, b.capture, la, lb)
            and _alpha(a.body, b.body, la2, lb2)
        )
    if isinstance(a, TAbs):
        n1, n2, n3 = fresh_name("a"), fresh_name("a"), fresh_name("a")
        la2 = {**la, a.self_name: n1, a.tvar: n2, a.qvar: n3}
        lb2 = {**lb, b.self_name: n1, b.tvar: n2, b.qvar: n3}
        return (
            _alpha_qtype(a.bound, b.bound, la, lb)
            and _alpha_qtype(a.codomain, b.codomain, la2, lb2)
            and _alpha_qual(a.capture, b.capture, la, lb)
            and _alpha(a.body, b.body, la2, lb2)
        )
    if isinstance(a, WithR):
        n = fresh_name("a")
        la2 = {**la, a.binder: n}
        lb2 = {**lb, b.binder: n}
        return _alpha(a.init, b.init, la, lb) and _alpha(a.body, b.body, la2, lb2)
    if isinstance(a, WithC):
        return a.loc == b.loc and _alpha(a.body, b.body, la, lb)
    if isinstance(a, TApp):
        return _alpha(a.fn, b.fn, la, lb) and _alpha_qtype(a.targ, b.targ, la, lb)
    if isinstance(a, IntOp) and a.op != b.op:
        return False
    ca, cb = _children(a), _children(b)
    return len(ca) == len(cb) and all(
        _alpha(x, y, la, lb) for x, y in zip(ca, cb)
    )


def _alpha_qual(p: Qualifier, q: Qualifier, la: dict, lb: dict) -> bool:
    ra = {la.get(v, v) for v in p.vars}
    rb = {lb.get(v, v) for v in q.vars}
    return ra == rb and p.locs == q.locs and p.fresh == q.fresh


def _alpha_qtype(p: QualifiedType, q: QualifiedType, la: dict, lb: dict) -> bool:
    from .subtyping import All, Fun, Ref

    if not _alpha_qual(p.qual, q.qual, la, lb):
        return False
    a, b = p.ty, q.ty
    if type(a) is not type(b):
        return False
    if isinstance(a, Ref):
        return _alpha_qtype(a.inner, b.inner, la, lb)
    if isinstance(a, Fun):
        n1, n2 = fresh_name("a"), fresh_name("a")
        la2 = {**la, a.self_name: n1, a.param: n2}
        lb2 = {**lb, b.self_name: n1, b.param: n2}
        return _alpha_qtype(a.domain, b.domain, la2, lb2) and _alpha_qtype(
            a.codomain, b.codomain, la2, lb2
        )
    if isinstance(a, All):
        n1, n2, n3 = fresh_name("a"), fresh_name("a"), fresh_name("a")
        la2 = {**la, a.self_name: n1, a.tvar: n2, a.qvar: n3}
        lb2 = {**lb, b.self_name: n1, b.tvar: n2, b.qvar: n3}
        return _alpha_qtype(a.bound, b.bound, la2, lb2) and _alpha_qtype(
            a.codomain, b.codomain, la2, lb2
        )
    if isinstance(a, TypeVar):
        return la.get(a.name, a.name) == lb.get(b.name, b.name)
    return a == b
