"""Shared oracles and generators for the test suite.

The oracles here deliberately avoid the main library's code paths: the
depth-1 oracle enumerates generator outcomes exhaustively, and the
constructor-matrix route recomputes the report from the constructor-level
mean matrix instead of the type-level one the implementation uses.
"""

import itertools
import random

from branchgen import (
    Value,
    branching_factor,
    expected_generation,
    expected_population,
    initial_population,
    mean_matrix_constructors,
    parse_universe,
    star_probs,
    terminal_constructors,
)
from branchgen.adt import FAMILY


def random_universe(rng: random.Random, max_types: int = 4, max_ctors: int = 8):
    """A random mutually recursive family, returned as (universe, field
    bookkeeping) where the bookkeeping maps constructor id -> list of
    field type ids, independently of the parsed structures."""
    ntypes = rng.randint(1, max_types)
    names = [f"T{i}" for i in range(ntypes)]
    # At least one terminal plus, for multi-type families, one ring
    # constructor per type; spread the remaining constructor budget.
    per_type = [2 if ntypes > 1 else 1] * ntypes
    budget = max_ctors - sum(per_type)
    while budget > 0 and rng.random() < 0.7:
        per_type[rng.randrange(ntypes)] += 1
        budget -= 1

    decls = []
    fields_of = {}
    ctor_n = 0
    for i, tname in enumerate(names):
        alts = []
        for j in range(per_type[i]):
            cname = f"K{ctor_n}"
            ctor_n += 1
            if j == 0:
                fields = []
            elif j == 1 and ntypes > 1:
                fields = [names[(i + 1) % ntypes]]
                while rng.random() < 0.4:
                    fields.append(rng.choice(names))
            else:
                fields = [rng.choice(names) for _ in range(rng.randint(0, 3))]
            fields_of[f"{tname}.{cname}"] = list(fields)
            alts.append(" ".join([cname] + fields))
        decls.append(f"data {tname} = " + " | ".join(alts))
    u = parse_universe("\n".join(decls), names[0])
    return u, fields_of


def random_probmap(rng: random.Random, u) -> dict:
    probs = {}
    for tid in u.family:
        ctors = u.constructors_of(tid)
        raw = [rng.random() + 0.05 for _ in ctors]
        total = sum(raw)
        for cid, w in zip(ctors, raw):
            probs[cid] = w / total
    return probs


def enumerate_depth1(u, probs):
    """Exact expected constructor counts of a size-1 run, by exhaustive
    enumeration: the root picks any constructor, then every family-typed
    field independently picks a terminal with its renormalized probability.
    Renormalization is recomputed here, independent of the library."""
    stars = {}
    for tid in u.family:
        terms = terminal_constructors(tid, u)
        mass = sum(probs[c] for c in terms)
        for c in terms:
            stars[c] = probs[c] / mass if mass > 0 else 1.0 / len(terms)
    expected = {c: 0.0 for c in u.family_constructors()}
    for root_cid in u.constructors_of(u.root):
        p_root = probs[root_cid]
        decl = u.ctor_decl(root_cid)
        family_fields = [f.target for f in decl.fields if f.kind == FAMILY]
        choice_sets = [
            [(t_cid, stars[t_cid]) for t_cid in terminal_constructors(tid, u)]
            for tid in family_fields
        ]
        for combo in itertools.product(*choice_sets):
            p_outcome = p_root
            for _, s in combo:
                p_outcome *= s
            expected[root_cid] += p_outcome
            for t_cid, _ in combo:
                expected[t_cid] += p_outcome
    return expected


def predict_via_constructor_matrix(u, probs, size):
    """Per-constructor totals computed on the constructor-level mean matrix
    (the dual route to the type-level computation the library uses)."""
    mc = mean_matrix_constructors(u, probs)
    g0 = initial_population(u, probs, "constructor")
    pop = expected_population(g0, mc, size - 1)
    gen = expected_generation(g0, mc, size - 1)
    stars = star_probs(u, probs)

    totals = {}
    for cid in u.family_constructors():
        total = pop.get(cid)
        decl = u.ctor_decl(cid)
        if decl.family_arity() == 0:
            tid = u.ctor_type(cid)
            fill = 0.0
            for did in u.family_constructors():
                if u.ctor_decl(did).family_arity() > 0:
                    fill += gen.get(did) * branching_factor(did, tid, u)
            total += stars[cid] * fill
        totals[cid] = total
    return totals


def value_depth(v, u):
    """Longest chain of family constructors from the root of a value."""
    best = 0
    stack = [(v, 0)]
    while stack:
        node, d = stack.pop()
        best = max(best, d)
        for ch in node.children:
            if isinstance(ch, Value) and u.is_family(u.ctor_type(ch.constructor)):
                stack.append((ch, d + 1))
    return best


def typecheck_value(v, u):
    """Assert arity and child types match the declarations."""
    stack = [v]
    while stack:
        node = stack.pop()
        decl = u.ctor_decl(node.constructor)
        assert len(node.children) == len(decl.fields), node.constructor
        for ch, f in zip(node.children, decl.fields):
            if f.kind == "ground":
                if f.target == "Int":
                    assert isinstance(ch, int) and not isinstance(ch, bool)
                elif f.target == "Double":
                    assert isinstance(ch, float)
                elif f.target == "Char":
                    assert isinstance(ch, str) and len(ch) == 1
                else:
                    assert ch is None
            else:
                assert isinstance(ch, Value)
                assert u.ctor_type(ch.constructor) == f.target
                stack.append(ch)
