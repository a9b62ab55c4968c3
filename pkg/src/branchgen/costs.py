"""Cost functions scoring how far a probability map's predicted constructor
distribution sits from a target distribution, via the chi-square statistic."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .adt import (
    FAMILY,
    ADTUniverse,
    AdtError,
    resolve_constructor,
    terminal_constructors,
)
from .prediction import predict_constructors


class ConstraintError(AdtError):
    """A constructor/type exclusion that leaves no viable generator."""


def chi_square(observed: Sequence[float], expected: Sequence[float]) -> float:
    """sum((obs - exp)^2 / exp); expected entries must be positive."""
    if len(observed) != len(expected):
        raise AdtError("observed and expected lengths differ")
    total = 0.0
    for o, e in zip(observed, expected):
        if e <= 0.0:
            raise AdtError(f"expected entries must be positive, got {e}")
        d = o - e
        total += d * d / e
    return total


@dataclass(frozen=True, eq=False)
class CostFunction:
    """Pure map (size, probmap) -> nonnegative real.

    ``targets`` lists (constructor, weight) pairs in declaration order; the
    expected count of each is weight * size. ``pinned`` constructors are
    hard-constrained to probability 0 and never contribute to the sum.
    """

    label: str
    universe: ADTUniverse = field(repr=False)
    targets: tuple[tuple[str, float], ...]
    pinned: frozenset[str]

    def __call__(self, size: int, probs: Mapping[str, float]) -> float:
        report = predict_constructors(self.universe, probs, size)
        observed = [report.per_constructor[c].total for c, _ in self.targets]
        expected = [w * size for _, w in self.targets]
        return chi_square(observed, expected)


def _decl_order(u: ADTUniverse, ctors: Iterable[str]) -> tuple[str, ...]:
    wanted = set(ctors)
    return tuple(c for c in u.family_constructors() if c in wanted)


def uniform_cost(u: ADTUniverse) -> CostFunction:
    """Drive every family constructor's expected count toward the size."""
    targets = tuple((c, 1.0) for c in u.family_constructors())
    return CostFunction("uniform", u, targets, frozenset())


def weighted_cost(u: ADTUniverse, weights: Mapping[str, float]) -> CostFunction:
    """Drive listed constructors toward weight * size; unlisted constructors
    do not contribute and are left free."""
    if not weights:
        raise AdtError("weighted cost needs at least one (constructor, weight) pair")
    family = set(u.family_constructors())
    resolved: dict[str, float] = {}
    for name, w in weights.items():
        cid = resolve_constructor(u, name)
        if cid not in family:
            raise ConstraintError(f"{cid} is not in the branching family")
        if w <= 0:
            raise AdtError(f"weight for {cid} must be positive, got {w}")
        resolved[cid] = float(w)
    targets = tuple((c, resolved[c]) for c in _decl_order(u, resolved))
    label = "weighted(" + ",".join(f"{c}={w:g}" for c, w in targets) + ")"
    return CostFunction(label, u, targets, frozenset())


def _resolve_family_ctors(u: ADTUniverse, names: Iterable[str]) -> set[str]:
    family = set(u.family_constructors())
    out = set()
    for name in names:
        cid = resolve_constructor(u, name)
        if cid not in family:
            raise ConstraintError(f"{cid} is not in the branching family")
        out.add(cid)
    return out


def _check_types_survive(u: ADTUniverse, pinned: set[str]) -> None:
    for tid in u.family:
        ctors = u.constructors_of(tid)
        live = [c for c in ctors if c not in pinned]
        if not live:
            raise ConstraintError(f"exclusion removes every constructor of {tid}")
        terms = set(terminal_constructors(tid, u))
        if not any(c in terms for c in live):
            raise ConstraintError(
                f"exclusion removes every terminal constructor of {tid}; "
                "generation could not terminate")


def _excluded_cost(u: ADTUniverse, pinned: set[str], label: str) -> CostFunction:
    _check_types_survive(u, pinned)
    targets = tuple((c, 1.0) for c in u.family_constructors() if c not in pinned)
    return CostFunction(label, u, targets, frozenset(pinned))


def only_cost(u: ADTUniverse, whitelist: Iterable[str]) -> CostFunction:
    """Pin everything outside the whitelist to probability 0; whitelisted
    constructors follow the uniform target."""
    keep = _resolve_family_ctors(u, whitelist)
    pinned = set(u.family_constructors()) - keep
    label = "only(" + ",".join(sorted(keep)) + ")"
    return _excluded_cost(u, pinned, label)


def without_cost(u: ADTUniverse, blacklist: Iterable[str]) -> CostFunction:
    """Pin the blacklisted constructors to probability 0."""
    pinned = _resolve_family_ctors(u, blacklist)
    label = "without(" + ",".join(sorted(pinned)) + ")"
    return _excluded_cost(u, pinned, label)


def _propagate_dead_types(u: ADTUniverse, pinned: set[str]) -> set[str]:
    """Kill constructors that reference a family type with no live
    constructors left, to a fixpoint. Returns the enlarged pinned set."""
    pinned = set(pinned)
    family_ctors = u.family_constructors()
    changed = True
    while changed:
        changed = False
        live_by_type = {
            tid: [c for c in u.constructors_of(tid) if c not in pinned]
            for tid in u.family
        }
        for cid in family_ctors:
            if cid in pinned:
                continue
            decl = u.ctor_decl(cid)
            for f in decl.fields:
                if f.kind == FAMILY and not live_by_type[f.target]:
                    pinned.add(cid)
                    changed = True
                    break
    return pinned


def _types_cost(u: ADTUniverse, excluded: set[str], label: str) -> CostFunction:
    for tid in excluded:
        if tid not in u.decls:
            raise AdtError(f"unknown type: {tid}")
        if not u.is_family(tid):
            raise ConstraintError(f"{tid} is not in the branching family")
    if u.root in excluded:
        raise ConstraintError(f"the root type {u.root} may not be excluded")

    pinned = {c for tid in excluded for c in u.constructors_of(tid)}
    pinned = _propagate_dead_types(u, pinned)

    root_live = [c for c in u.constructors_of(u.root) if c not in pinned]
    if not root_live:
        raise ConstraintError(
            "exclusion disconnects the family: no constructor of the root "
            f"type {u.root} survives")

    # Walk the family along live constructors; every reachable type must
    # still be able to terminate.
    seen = {u.root}
    todo = [u.root]
    while todo:
        tid = todo.pop()
        terms = set(terminal_constructors(tid, u))
        live = [c for c in u.constructors_of(tid) if c not in pinned]
        if not any(c in terms for c in live):
            raise ConstraintError(
                f"exclusion removes every terminal constructor of {tid}; "
                "generation could not terminate")
        for cid in live:
            for f in u.ctor_decl(cid).fields:
                if f.kind == FAMILY and f.target not in seen:
                    seen.add(f.target)
                    todo.append(f.target)

    targets = tuple((c, 1.0) for c in u.family_constructors() if c not in pinned)
    return CostFunction(label, u, targets, frozenset(pinned))


def only_types_cost(u: ADTUniverse, types: Iterable[str]) -> CostFunction:
    keep = set(types)
    excluded = {t for t in u.family if t not in keep}
    for tid in keep:
        if tid not in u.decls:
            raise AdtError(f"unknown type: {tid}")
    label = "onlyTypes(" + ",".join(sorted(keep)) + ")"
    return _types_cost(u, excluded, label)


def without_types_cost(u: ADTUniverse, types: Iterable[str]) -> CostFunction:
    excluded = set(types)
    label = "withoutTypes(" + ",".join(sorted(excluded)) + ")"
    return _types_cost(u, excluded, label)


_COST_RE = re.compile(r"^\s*(\w+)\s*(?:\((.*)\))?\s*$", re.S)


def parse_cost_expression(u: ADTUniverse, text: str) -> CostFunction:
    """Parse the command-line cost syntax: uniform, weighted(C=3,...),
    only(C,...), without(C,...), onlyTypes(T,...), withoutTypes(T,...)."""
    m = _COST_RE.match(text)
    if not m:
        raise AdtError(f"cannot parse cost expression: {text!r}")
    name, body = m.group(1), m.group(2)
    args = [a.strip() for a in body.split(",")] if body and body.strip() else []

    if name == "uniform":
        if args:
            raise AdtError("uniform takes no arguments")
        return uniform_cost(u)
    if name == "weighted":
        weights: dict[str, float] = {}
        for arg in args:
            if "=" not in arg:
                raise AdtError(f"weighted entries look like Ctor=weight, got {arg!r}")
            key, val = arg.split("=", 1)
            try:
                weights[key.strip()] = float(val)
            except ValueError:
                raise AdtError(f"bad weight {val!r} for {key.strip()}") from None
        return weighted_cost(u, weights)
    if name == "only":
        return only_cost(u, args)
    if name == "without":
        return without_cost(u, args)
    if name == "onlyTypes":
        return only_types_cost(u, args)
    if name == "withoutTypes":
        return without_types_cost(u, args)
    raise AdtError(f"unknown cost function: {name!r}")
