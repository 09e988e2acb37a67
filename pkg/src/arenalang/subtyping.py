"""Types, qualified types, typing environments, and structural subtyping.

The type language is that of a bounded-quantification reference calculus:
base types, references over qualified types, dependent function types with a
self binder, universals with a self binder and a qualifier-variable proxy,
and Top.  Subtyping is decided algorithmically: type variables unfold
through their declared bounds, Top is terminal, references demand equal
inner qualifiers, and arrow/universal types compare contravariantly on the
left and covariantly on the right in a context extended with the function's
own binding at a fresh qualifier.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .qualifiers import EMPTY, FRESH, Qualifier, format_qualifier, qual_sub

_fresh_counter = [0]


def fresh_name(base: str) -> str:
    """A globally unique variant of ``base``; stays lexable as an identifier."""
    base = base.split("'")[0] or "v"
    _fresh_counter[0] += 1
    return f"{base}'{_fresh_counter[0]}"


class Type:
    """Base class of the type AST."""

    def __str__(self) -> str:
        return format_type(self)


@dataclass(frozen=True)
class Base(Type):
    name: str  # "Int" | "Unit" | "Bool"

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class TopType(Type):
    def __str__(self) -> str:
        return "Top"


@dataclass(frozen=True)
class TypeVar(Type):
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Ref(Type):
    inner: "QualifiedType"


@dataclass(frozen=True)
class Fun(Type):
    """Dependent function type f(x: domain) => codomain."""

    self_name: str
    param: str
    domain: "QualifiedType"
    codomain: "QualifiedType"


@dataclass(frozen=True)
class All(Type):
    """Bounded universal forall f[X^x <: bound] => codomain."""

    self_name: str
    tvar: str
    qvar: str
    bound: "QualifiedType"
    codomain: "QualifiedType"


@dataclass(frozen=True)
class QualifiedType:
    ty: Type
    qual: Qualifier

    def __str__(self) -> str:
        return format_qtype(self)


INT = Base("Int")
UNIT = Base("Unit")
BOOL = Base("Bool")
TOP = TopType()


@dataclass(frozen=True)
class TermBinding:
    name: str
    qtype: QualifiedType


@dataclass(frozen=True)
class TypeBinding:
    tvar: str
    qvar: str
    bound: QualifiedType


Binding = Union[TermBinding, TypeBinding]


class EnvError(Exception):
    """Violation of the environment discipline (duplicate binder, or an
    entry mentioning a later binder)."""


@dataclass(frozen=True)
class TypingEnv:
    """Ordered telescope of term and type bindings."""

    entries: tuple = ()

    def binders(self) -> set:
        out = set()
        for e in self.entries:
            out.add(e.name if isinstance(e, TermBinding) else e.qvar)
            if isinstance(e, TypeBinding):
                out.add(e.tvar)
        return out

    def dom(self) -> set:
        """Qualifier-level domain: term binders plus qualifier proxies."""
        return {
            e.name if isinstance(e, TermBinding) else e.qvar for e in self.entries
        }

    def extend_term(self, name: str, qtype: QualifiedType) -> "TypingEnv":
        self._check_entry(name, free_vars_qtype(qtype), free_tvars_qtype(qtype))
        return TypingEnv(self.entries + (TermBinding(name, qtype),))

    def extend_type(self, tvar: str, qvar: str, bound: QualifiedType) -> "TypingEnv":
        self._check_entry(qvar, free_vars_qtype(bound), free_tvars_qtype(bound))
        if tvar in self.binders() or tvar == qvar:
            raise EnvError(f"duplicate binder {tvar}")
        return TypingEnv(self.entries + (TypeBinding(tvar, qvar, bound),))

    def _check_entry(self, name: str, fv: set, ftv: set) -> None:
        binders = self.binders()
        if name in binders:
            raise EnvError(f"duplicate binder {name}")
        loose = (fv | ftv) - binders
        if loose:
            raise EnvError(f"binding {name} mentions later/unbound {sorted(loose)}")

    def lookup_term(self, name: str) -> Optional[QualifiedType]:
        for e in reversed(self.entries):
            if isinstance(e, TermBinding) and e.name == name:
                return e.qtype
        return None

    def lookup_type(self, tvar: str) -> Optional[TypeBinding]:
        for e in reversed(self.entries):
            if isinstance(e, TypeBinding) and e.tvar == tvar:
                return e
        return None

    def declared_qualifier(self, name: str) -> Optional[Qualifier]:
        for e in reversed(self.entries):
            if isinstance(e, TermBinding) and e.name == name:
                return e.qtype.qual
            if isinstance(e, TypeBinding) and e.qvar == name:
                return e.bound.qual
        return None

    def __len__(self) -> int:
        return len(self.entries)


EMPTY_ENV = TypingEnv()


# ---------------------------------------------------------------------------
# free variables and substitution


def free_vars_type(ty: Type) -> set:
    """Free qualifier-level (term) variables of a type."""
    if isinstance(ty, (Base, TopType, TypeVar)):
        return set()
    if isinstance(ty, Ref):
        return free_vars_qtype(ty.inner)
    if isinstance(ty, Fun):
        inner = free_vars_qtype(ty.domain) | free_vars_qtype(ty.codomain)
        return inner - {ty.self_name, ty.param}
    if isinstance(ty, All):
        inner = free_vars_qtype(ty.bound) | free_vars_qtype(ty.codomain)
        return inner - {ty.self_name, ty.qvar}
    raise TypeError(ty)


def free_vars_qtype(q: QualifiedType) -> set:
    return free_vars_type(q.ty) | set(q.qual.vars)


def free_tvars_type(ty: Type) -> set:
    if isinstance(ty, (Base, TopType)):
        return set()
    if isinstance(ty, TypeVar):
        return {ty.name}
    if isinstance(ty, Ref):
        return free_tvars_qtype(ty.inner)
    if isinstance(ty, Fun):
        return free_tvars_qtype(ty.domain) | free_tvars_qtype(ty.codomain)
    if isinstance(ty, All):
        inner = free_tvars_qtype(ty.bound) | free_tvars_qtype(ty.codomain)
        return inner - {ty.tvar}
    raise TypeError(ty)


def free_tvars_qtype(q: QualifiedType) -> set:
    return free_tvars_type(q.ty)


def subst_type(
    ty: Type,
    qual_map: Optional[dict] = None,
    type_map: Optional[dict] = None,
) -> Type:
    """Simultaneous substitution of qualifier variables (by qualifiers) and
    type variables (by types) throughout a type.  Binders are assumed unique,
    so no capture avoidance is needed; binders shadow the maps defensively.
    """
    qual_map = qual_map or {}
    type_map = type_map or {}
    if not qual_map and not type_map:
        return ty
    if isinstance(ty, (Base, TopType)):
        return ty
    if isinstance(ty, TypeVar):
        return type_map.get(ty.name, ty)
    if isinstance(ty, Ref):
        return Ref(subst_qtype(ty.inner, qual_map, type_map))
    if isinstance(ty, Fun):
        inner_q = {k: v for k, v in qual_map.items() if k not in (ty.self_name, ty.param)}
        return Fun(
            ty.self_name,
            ty.param,
            subst_qtype(ty.domain, inner_q, type_map),
            subst_qtype(ty.codomain, inner_q, type_map),
        )
    if isinstance(ty, All):
        inner_q = {k: v for k, v in qual_map.items() if k not in (ty.self_name, ty.qvar)}
        inner_t = {k: v for k, v in type_map.items() if k != ty.tvar}
        return All(
            ty.self_name,
            ty.tvar,
            ty.qvar,
            subst_qtype(ty.bound, inner_q, inner_t),
            subst_qtype(ty.codomain, inner_q, inner_t),
        )
    raise TypeError(ty)


def subst_qtype(
    q: QualifiedType,
    qual_map: Optional[dict] = None,
    type_map: Optional[dict] = None,
) -> QualifiedType:
    from .qualifiers import substitute_many

    qual_map = qual_map or {}
    return QualifiedType(
        subst_type(q.ty, qual_map, type_map), substitute_many(q.qual, qual_map)
    )


def rename_binders(ty: Type, renaming: dict) -> Type:
    """Rename the immediate binders of a Fun/All (used for alpha alignment)."""
    if isinstance(ty, Fun):
        qmap = {old: Qualifier.of(new) for old, new in renaming.items()}
        return Fun(
            renaming.get(ty.self_name, ty.self_name),
            renaming.get(ty.param, ty.param),
            subst_qtype(ty.domain, qmap),
            subst_qtype(ty.codomain, qmap),
        )
    if isinstance(ty, All):
        qmap = {old: Qualifier.of(new) for old, new in renaming.items()}
        tmap = {old: TypeVar(new) for old, new in renaming.items()}
        return All(
            renaming.get(ty.self_name, ty.self_name),
            renaming.get(ty.tvar, ty.tvar),
            renaming.get(ty.qvar, ty.qvar),
            subst_qtype(ty.bound, qmap, tmap),
            subst_qtype(ty.codomain, qmap, tmap),
        )
    return ty


# ---------------------------------------------------------------------------
# subtyping


def type_sub(env: TypingEnv, s: Type, t: Type) -> bool:
    """Structural subtyping s <: t."""
    if s == t:
        return True
    if isinstance(t, TopType):
        return True
    if isinstance(s, TypeVar):
        binding = env.lookup_type(s.name)
        if binding is None:
            return False
        return type_sub(env, binding.bound.ty, t)
    if isinstance(s, Ref) and isinstance(t, Ref):
        # invertible rule: mutual inner subtyping with equal inner qualifier
        p, q = s.inner, t.inner
        if p.qual != q.qual or p.qual.fresh:
            return False
        return type_sub(env, p.ty, q.ty) and type_sub(env, q.ty, p.ty)
    if isinstance(s, Fun) and isinstance(t, Fun):
        f = fresh_name(s.self_name)
        x = fresh_name(s.param)
        s2 = rename_binders(s, {s.self_name: f, s.param: x})
        t2 = rename_binders(t, {t.self_name: f, t.param: x})
        if not qtype_sub(env, t2.domain, s2.domain):
            return False
        try:
            env2 = env.extend_term(
                f, QualifiedType(s2, FRESH)
            ).extend_term(x, t2.domain)
        except EnvError:
            return False
        return qtype_sub(env2, s2.codomain, t2.codomain)
    if isinstance(s, All) and isinstance(t, All):
        f = fresh_name(s.self_name)
        X = fresh_name(s.tvar)
        x = fresh_name(s.qvar)
        s2 = rename_binders(s, {s.self_name: f, s.tvar: X, s.qvar: x})
        t2 = rename_binders(t, {t.self_name: f, t.tvar: X, t.qvar: x})
        if not qtype_sub(env, t2.bound, s2.bound):
            return False
        try:
            env2 = env.extend_term(
                f, QualifiedType(s2, FRESH)
            ).extend_type(X, x, t2.bound)
        except EnvError:
            return False
        return qtype_sub(env2, s2.codomain, t2.codomain)
    return False


def qtype_sub(env: TypingEnv, p: QualifiedType, q: QualifiedType) -> bool:
    """Qualified-type subtyping: carrier subtyping plus qualifier subtyping."""
    return type_sub(env, p.ty, q.ty) and qual_sub(env, p.qual, q.qual)


# ---------------------------------------------------------------------------
# printing


def format_type(ty: Type) -> str:
    if isinstance(ty, (Base, TopType, TypeVar)):
        return getattr(ty, "name", "Top")
    if isinstance(ty, Ref):
        return f"Ref[{format_qtype(ty.inner)}]"
    if isinstance(ty, Fun):
        return (
            f"({ty.self_name}({ty.param}: {format_qtype(ty.domain)})"
            f" => {format_qtype(ty.codomain)})"
        )
    if isinstance(ty, All):
        return (
            f"forall {ty.self_name}[{ty.tvar}^{ty.qvar} <: {format_qtype(ty.bound)}]"
            f" => {format_qtype(ty.codomain)}"
        )
    raise TypeError(ty)


def format_qtype(q: QualifiedType) -> str:
    return f"{format_type(q.ty)}^{format_qualifier(q.qual)}"
