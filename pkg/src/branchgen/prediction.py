"""Expected constructor counts for size-bounded generators.

The generator run at size n is modelled as a multi-type branching process
over the root's family: level k of a generated value is the process's k-th
generation. With the offspring mean matrix M and initial vector g0, the
expected generation is g0'·M^k and the expected population up to level k is
the running sum of those terms. Terminal constructors get an extra
last-level term because the final level can only draw terminals, with
probabilities renormalized within each type's terminal set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .adt import (
    FAMILY,
    FOREIGN,
    ADTUniverse,
    AdtError,
    branching_factor,
    qualify,
    reachable_foreign_types,
    terminal_constructors,
    uniform_probmap,
    warn_probability,
)

CONSTRUCTOR = "constructor"
TYPE = "type"

EXTINCTION_TOL = 1e-12
EXTINCTION_MAX_ITER = 10 ** 6


@dataclass(eq=False)
class MeanMatrix:
    """Square matrix of expected offspring per parent, at constructor or
    type granularity. Entry (i, j) is the expected number of j's produced
    directly by one i."""

    granularity: str
    index: tuple[str, ...]
    entries: np.ndarray

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float)
        n = len(self.index)
        if self.entries.shape != (n, n):
            raise AdtError(f"mean matrix shape {self.entries.shape} does not match index size {n}")
        if (self.entries < 0).any():
            raise AdtError("mean matrix entries must be nonnegative")


@dataclass(eq=False)
class PopulationVector:
    """Expected counts keyed by an ordered id list."""

    index: tuple[str, ...]
    values: np.ndarray
    _pos: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.index),):
            raise AdtError("population vector length does not match its index")
        if not np.isfinite(self.values).all() or (self.values < 0).any():
            raise AdtError("population vector entries must be finite and nonnegative")
        self._pos = {name: i for i, name in enumerate(self.index)}

    def get(self, name: str) -> float:
        return float(self.values[self._pos[name]])

    def as_dict(self) -> dict[str, float]:
        return {name: float(v) for name, v in zip(self.index, self.values)}


def _require_probs(probs: Mapping[str, float], ctors: tuple[str, ...]) -> None:
    missing = [c for c in ctors if c not in probs]
    if missing:
        raise AdtError(f"missing probability entries: {missing}")


def mean_matrix_constructors(u: ADTUniverse, probs: Mapping[str, float]) -> MeanMatrix:
    """Offspring means over the family's constructors:
    entry (i, j) = branching_factor(type(j), i) * p(j)."""
    ctors = u.family_constructors()
    _require_probs(probs, ctors)
    n = len(ctors)
    m = np.zeros((n, n))
    for i, ci in enumerate(ctors):
        for j, cj in enumerate(ctors):
            beta = branching_factor(ci, u.ctor_type(cj), u)
            if beta:
                m[i, j] = beta * probs[cj]
    return MeanMatrix(CONSTRUCTOR, ctors, m)


def mean_matrix_types(u: ADTUniverse, probs: Mapping[str, float]) -> MeanMatrix:
    """Offspring means over the family's types:
    entry (u, v) = sum over constructors C of u of branching_factor(v, C) * p(C)."""
    types = u.family
    _require_probs(probs, u.family_constructors())
    n = len(types)
    m = np.zeros((n, n))
    for i, tu in enumerate(types):
        for ctor in u.decls[tu].constructors:
            cid = qualify(tu, ctor.name)
            for j, tv in enumerate(types):
                beta = sum(1 for f in ctor.fields if f.kind == FAMILY and f.target == tv)
                if beta:
                    m[i, j] += beta * probs[cid]
    return MeanMatrix(TYPE, types, m)


def initial_population(u: ADTUniverse, probs: Mapping[str, float],
                       granularity: str = CONSTRUCTOR) -> PopulationVector:
    """Level-0 expectations: the root type's constructor probabilities at
    constructor granularity, or a unit mass at the root type."""
    if granularity == CONSTRUCTOR:
        ctors = u.family_constructors()
        _require_probs(probs, ctors)
        root_ctors = set(u.constructors_of(u.root))
        values = [probs[c] if c in root_ctors else 0.0 for c in ctors]
        return PopulationVector(ctors, np.array(values))
    if granularity == TYPE:
        values = [1.0 if t == u.root else 0.0 for t in u.family]
        return PopulationVector(u.family, np.array(values))
    raise AdtError(f"unknown granularity: {granularity!r}")


def expected_generation(g0: PopulationVector, m: MeanMatrix, n: int) -> PopulationVector:
    """g0'·M^n, computed by n successive vector-matrix products."""
    if g0.index != m.index:
        raise AdtError("population vector and mean matrix are indexed differently")
    if n < 0:
        raise AdtError("generation number must be nonnegative")
    v = g0.values.copy()
    for _ in range(n):
        v = v @ m.entries
    return PopulationVector(g0.index, v)


def expected_population(g0: PopulationVector, m: MeanMatrix, n: int) -> PopulationVector:
    """Cumulative expectation sum(k=0..n) g0'·M^k, accumulated iteratively.

    The geometric closed form with (I - M) inverted is an equivalent
    identity when (I - M) is nonsingular; accumulating the series directly
    needs no special case for the singular/critical situation.
    """
    if g0.index != m.index:
        raise AdtError("population vector and mean matrix are indexed differently")
    if n < 0:
        raise AdtError("generation number must be nonnegative")
    v = g0.values.copy()
    acc = v.copy()
    for _ in range(n):
        v = v @ m.entries
        acc += v
    return PopulationVector(g0.index, acc)


def star_probs(u: ADTUniverse, probs: Mapping[str, float]) -> dict[str, float]:
    """Per-type renormalized terminal probabilities, used when the remaining
    size is zero: p*(C) = p(C) / sum of p over the type's terminals.

    A family type with no terminal constructor cannot terminate and is
    reported as an error. When a live type's terminals all carry zero
    probability the distribution falls back to uniform over its terminals
    (with a warning): the generator must still be able to stop.
    """
    _require_probs(probs, u.family_constructors())
    stars: dict[str, float] = {}
    for tid in u.family:
        terms = terminal_constructors(tid, u)
        if not terms:
            raise AdtError(
                f"family type {tid} has no terminal constructor; generation cannot terminate")
        mass = sum(probs[c] for c in terms)
        if mass > 0.0:
            for c in terms:
                stars[c] = probs[c] / mass
        else:
            type_mass = sum(probs[c] for c in u.constructors_of(tid))
            if type_mass > 0.0:
                warn_probability(
                    f"all terminal constructors of {tid} have probability 0; "
                    "using a uniform terminal distribution at the last level")
            for c in terms:
                stars[c] = 1.0 / len(terms)
    return stars


@dataclass(frozen=True)
class ConstructorExpectation:
    branching: float
    last_level: float

    @property
    def total(self) -> float:
        return self.branching + self.last_level


@dataclass(eq=False)
class PredictionReport:
    """Expected per-constructor counts for one generator configuration."""

    size: int
    per_constructor: dict[str, ConstructorExpectation]
    per_foreign: dict[str, float] = field(default_factory=dict)

    def totals(self) -> dict[str, float]:
        return {cid: e.total for cid, e in self.per_constructor.items()}


def predict_constructors(u: ADTUniverse, probs: Mapping[str, float],
                         size: int) -> PredictionReport:
    """Expected constructor counts for a run at the given size.

    Non-terminal C of type T: population of T-placeholders up to level
    size-1, times p(C). Terminal C adds the last-level fill: p*(C) times
    the placeholders of T spawned into level `size` by the non-terminals
    at level size-1. Constructor expectations are derived from type-level
    quantities; the result agrees with the direct constructor-matrix
    computation.
    """
    if size < 1:
        raise AdtError("size must be a positive integer")
    mt = mean_matrix_types(u, probs)
    g = initial_population(u, probs, TYPE)
    pop = g.values.copy()
    v = g.values
    for _ in range(size - 1):
        v = v @ mt.entries
        pop += v
    last_gen = v  # E[G_{size-1}] per family type

    stars = star_probs(u, probs)
    tpos = {t: i for i, t in enumerate(u.family)}

    # Placeholders of each type at the final level, spawned by the
    # non-terminal constructors present at level size-1.
    fill = np.zeros(len(u.family))
    for tid in u.family:
        for ctor in u.decls[tid].constructors:
            if ctor.family_arity() == 0:
                continue
            cid = qualify(tid, ctor.name)
            weight = last_gen[tpos[tid]] * probs[cid]
            if weight == 0.0:
                continue
            for f in ctor.fields:
                if f.kind == FAMILY:
                    fill[tpos[f.target]] += weight

    report: dict[str, ConstructorExpectation] = {}
    for tid in u.family:
        for ctor in u.decls[tid].constructors:
            cid = qualify(tid, ctor.name)
            branching = pop[tpos[tid]] * probs[cid]
            last = 0.0
            if ctor.family_arity() == 0:
                last = stars[cid] * fill[tpos[tid]]
            report[cid] = ConstructorExpectation(float(branching), float(last))
    return PredictionReport(size, report)


def predict_foreign(u: ADTUniverse, report: PredictionReport,
                    foreign_probs: Mapping[str, float] | None = None) -> dict[str, float]:
    """Expected counts of foreign constructors, propagated through the
    acyclic foreign types: each expected parent contributes its field
    multiplicities, and each value of a foreign type splits among that
    type's constructors by their probabilities.

    The result is also recorded on ``report.per_foreign``.
    """
    order = reachable_foreign_types(u)
    if not order:
        report.per_foreign = {}
        return {}
    if foreign_probs is None:
        foreign_probs = uniform_probmap(u, order)
    _require_probs(foreign_probs, tuple(c for t in order for c in u.constructors_of(t)))

    placeholders = {t: 0.0 for t in order}
    totals = report.totals()
    for tid in u.family:
        for ctor in u.decls[tid].constructors:
            cid = qualify(tid, ctor.name)
            expected = totals[cid]
            for f in ctor.fields:
                if f.kind == FOREIGN:
                    placeholders[f.target] += expected

    out: dict[str, float] = {}
    for tid in order:
        for ctor in u.decls[tid].constructors:
            cid = qualify(tid, ctor.name)
            expected = placeholders[tid] * foreign_probs[cid]
            out[cid] = expected
            for f in ctor.fields:
                if f.kind == FOREIGN:
                    placeholders[f.target] += expected
    report.per_foreign = dict(out)
    return out


def extinction_probability(u: ADTUniverse, probs: Mapping[str, float]) -> PopulationVector:
    """Probability that unbounded generation of each family type terminates.

    Computed as the least fixpoint of q(t) = sum over constructors C of t
    of p(C) * product of q(type(f)) over C's family-typed fields, iterated
    from the zero vector. Foreign and ground fields always terminate and
    contribute factor 1.
    """
    _require_probs(probs, u.family_constructors())
    tpos = {t: i for i, t in enumerate(u.family)}
    q = np.zeros(len(u.family))
    for _ in range(EXTINCTION_MAX_ITER):
        nxt = np.zeros_like(q)
        for tid in u.family:
            acc = 0.0
            for ctor in u.decls[tid].constructors:
                term = probs[qualify(tid, ctor.name)]
                for f in ctor.fields:
                    if f.kind == FAMILY:
                        term *= q[tpos[f.target]]
                acc += term
            nxt[tpos[tid]] = acc
        if np.max(np.abs(nxt - q)) < EXTINCTION_TOL:
            q = nxt
            break
        q = nxt
    return PopulationVector(u.family, np.clip(q, 0.0, 1.0))


def prediction_report_json(u: ADTUniverse, probs: Mapping[str, float], size: int,
                           foreign_probs: Mapping[str, float] | None = None) -> dict:
    """Assemble the full report document: expected totals, last-level terms,
    foreign expectations, and per-type extinction probabilities."""
    report = predict_constructors(u, probs, size)
    foreign = predict_foreign(u, report, foreign_probs)
    extinction = extinction_probability(u, probs)
    return {
        "size": size,
        "expected": {cid: e.total for cid, e in sorted(report.per_constructor.items())},
        "lastLevel": {cid: e.last_level for cid, e in sorted(report.per_constructor.items())},
        "foreign": dict(sorted(foreign.items())),
        "extinction": {tid: extinction.get(tid) for tid in u.family},
    }
