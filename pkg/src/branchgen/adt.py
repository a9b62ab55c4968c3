"""Algebraic data type declarations: the text DSL, monomorphization of
generic applications, recursive-family analysis, and per-constructor
probability maps.

A universe is built from declarations like

    data Tree = LeafA | LeafB | LeafC | Node Tree Tree

plus a designated generation root. Types are named with an uppercase
initial, type variables with a lowercase one, and generic applications
are parenthesized (``LeafA (Maybe Bool)``). Ground atoms ``Int``,
``Double``, ``Char`` and ``Unit`` are built in and contribute no
constructors of their own.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping

GROUND_ATOMS = ("Int", "Double", "Char", "Unit")

FAMILY = "family"
FOREIGN = "foreign"
GROUND = "ground"

PROB_SUM_TOL = 1e-9

_MAX_INSTANTIATIONS = 4096


class AdtError(ValueError):
    """A semantic problem with declarations, probabilities or constraints."""


class ParseError(AdtError):
    """Syntax error in the declaration DSL, with source position."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


# ---------------------------------------------------------------------------
# Resolved model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Field:
    """One constructor argument: a family type, a foreign type, or a ground atom."""

    kind: str   # FAMILY | FOREIGN | GROUND
    target: str  # type id, or ground atom name


@dataclass(frozen=True)
class ConstructorDecl:
    name: str
    fields: tuple[Field, ...]

    def family_arity(self) -> int:
        return sum(1 for f in self.fields if f.kind == FAMILY)


@dataclass(frozen=True)
class TypeDecl:
    name: str
    params: tuple[str, ...]
    constructors: tuple[ConstructorDecl, ...]
    # (template name, argument type ids) when this decl was produced by
    # instantiating a generic declaration; None for plain declarations.
    origin: tuple[str, tuple[str, ...]] | None = None


@dataclass(frozen=True)
class _FieldSyn:
    """Raw field syntax kept for printing: plain name, tyvar, or application."""

    kind: str  # "name" | "var" | "app"
    name: str
    args: tuple["_FieldSyn", ...] = ()


@dataclass(frozen=True)
class _RawDecl:
    name: str
    params: tuple[str, ...]
    constructors: tuple[tuple[str, tuple[_FieldSyn, ...]], ...]


@dataclass(eq=True)
class ADTUniverse:
    """A monomorphized set of declarations bound to a generation root.

    ``family`` is the strongly connected component of ``root`` in the
    type-reference graph; every other reachable type is foreign and must
    be non-recursive.
    """

    decls: dict[str, TypeDecl]
    root: str
    family: tuple[str, ...]
    type_graph: dict[str, tuple[str, ...]]
    source_decls: tuple[_RawDecl, ...] = field(repr=False, default=())

    def __post_init__(self):
        self._family_set = frozenset(self.family)
        index: dict[str, tuple[str, ConstructorDecl]] = {}
        for tid, decl in self.decls.items():
            for ctor in decl.constructors:
                index[qualify(tid, ctor.name)] = (tid, ctor)
        self._ctor_index = index

    # -- lookups ------------------------------------------------------------

    def is_family(self, type_id: str) -> bool:
        return type_id in self._family_set

    def constructors_of(self, type_id: str) -> tuple[str, ...]:
        decl = self.decls.get(type_id)
        if decl is None:
            raise AdtError(f"unknown type: {type_id}")
        return tuple(qualify(type_id, c.name) for c in decl.constructors)

    def family_constructors(self) -> tuple[str, ...]:
        out = []
        for tid in self.family:
            out.extend(self.constructors_of(tid))
        return tuple(out)

    def ctor_decl(self, ctor_id: str) -> ConstructorDecl:
        try:
            return self._ctor_index[ctor_id][1]
        except KeyError:
            raise AdtError(f"unknown constructor: {ctor_id}") from None

    def ctor_type(self, ctor_id: str) -> str:
        try:
            return self._ctor_index[ctor_id][0]
        except KeyError:
            raise AdtError(f"unknown constructor: {ctor_id}") from None

    def has_ctor(self, ctor_id: str) -> bool:
        return ctor_id in self._ctor_index


def qualify(type_id: str, ctor_name: str) -> str:
    return f"{type_id}.{ctor_name}"


def unqualify(ctor_id: str) -> str:
    return ctor_id.rsplit(".", 1)[-1]


def resolve_constructor(u: ADTUniverse, name: str) -> str:
    """Resolve a possibly-unqualified constructor name to its id."""
    if "." in name:
        if not u.has_ctor(name):
            raise AdtError(f"unknown constructor: {name}")
        return name
    hits = [cid for cid in u._ctor_index if unqualify(cid) == name]
    if not hits:
        raise AdtError(f"unknown constructor: {name}")
    if len(hits) > 1:
        raise AdtError(f"ambiguous constructor name {name}: {sorted(hits)}")
    return hits[0]


# ---------------------------------------------------------------------------
# Tokenizer / parser
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Token:
    text: str
    line: int
    column: int


def _is_ident_start(ch: str) -> bool:
    return ch.isalpha()


def _is_ident_char(ch: str) -> bool:
    return ch.isalnum() or ch in "_'"


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.split("--", 1)[0]
        i = 0
        while i < len(line):
            ch = line[i]
            if ch.isspace():
                i += 1
                continue
            if ch in "=|()":
                tokens.append(_Token(ch, lineno, i + 1))
                i += 1
                continue
            if _is_ident_start(ch):
                j = i + 1
                while j < len(line) and _is_ident_char(line[j]):
                    j += 1
                tokens.append(_Token(line[i:j], lineno, i + 1))
                i = j
                continue
            raise ParseError(f"unexpected character {ch!r}", lineno, i + 1)
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> _Token:
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else _Token("", 1, 1)
            raise ParseError("unexpected end of input", last.line, last.column)
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.next()
        if tok.text != text:
            raise ParseError(f"expected {text!r}, found {tok.text!r}", tok.line, tok.column)
        return tok

    def parse_decls(self) -> tuple[_RawDecl, ...]:
        decls = []
        while self.peek() is not None:
            decls.append(self.parse_decl())
        return tuple(decls)

    def parse_decl(self) -> _RawDecl:
        tok = self.next()
        if tok.text != "data":
            raise ParseError(f"expected 'data', found {tok.text!r}", tok.line, tok.column)
        name_tok = self.next()
        if not name_tok.text[0].isupper():
            raise ParseError(f"type name must start uppercase: {name_tok.text!r}",
                             name_tok.line, name_tok.column)
        if name_tok.text in GROUND_ATOMS:
            raise ParseError(f"cannot redeclare builtin atom {name_tok.text!r}",
                             name_tok.line, name_tok.column)
        params = []
        while True:
            tok = self.peek()
            if tok is not None and tok.text[0].islower() and tok.text != "data":
                params.append(self.next().text)
            else:
                break
        self.expect("=")
        ctors = [self.parse_alternative()]
        while self.peek() is not None and self.peek().text == "|":
            self.next()
            ctors.append(self.parse_alternative())
        return _RawDecl(name_tok.text, tuple(params), tuple(ctors))

    def parse_alternative(self) -> tuple[str, tuple[_FieldSyn, ...]]:
        tok = self.next()
        if not tok.text[0].isupper():
            raise ParseError(f"constructor name must start uppercase: {tok.text!r}",
                             tok.line, tok.column)
        fields = []
        while True:
            nxt = self.peek()
            if nxt is None or nxt.text in ("|", ")", "data"):
                break
            if nxt.text == "=":
                raise ParseError("unexpected '='", nxt.line, nxt.column)
            fields.append(self.parse_field())
        return tok.text, tuple(fields)

    def parse_field(self) -> _FieldSyn:
        tok = self.next()
        if tok.text == "(":
            head = self.next()
            if not head.text[0].isupper():
                raise ParseError(f"generic application must name a type: {head.text!r}",
                                 head.line, head.column)
            args = [self.parse_field()]
            while self.peek() is not None and self.peek().text != ")":
                args.append(self.parse_field())
            self.expect(")")
            return _FieldSyn("app", head.text, tuple(args))
        if tok.text[0].isupper():
            return _FieldSyn("name", tok.text)
        if tok.text == "data":
            raise ParseError("unexpected 'data'", tok.line, tok.column)
        return _FieldSyn("var", tok.text)


# ---------------------------------------------------------------------------
# Monomorphization and universe construction
# ---------------------------------------------------------------------------

# A resolved field target before family classification: ("t", type id) or
# ("g", ground atom name).
_Target = tuple[str, str]


class _Monomorphizer:
    def __init__(self, raw: Mapping[str, _RawDecl]):
        self.raw = raw
        self.templates = {n: d for n, d in raw.items() if d.params}
        self.concrete = {n: d for n, d in raw.items() if not d.params}
        # id -> (origin, [(ctor name, [target])]); insertion order is kept
        # so monomorphized types get a stable position for family ordering.
        self.out: dict[str, tuple[tuple[str, tuple[str, ...]] | None,
                                  list[tuple[str, list[_Target]]]]] = {}

    def run(self) -> None:
        for name in self.concrete:
            self.type_id_for(name)

    def type_id_for(self, name: str) -> str:
        if name in self.out:
            return name
        decl = self.concrete[name]
        self.out[name] = (None, [])
        self._fill(name, decl, {})
        return name

    def instantiate(self, template: str, args: tuple[_Target, ...]) -> str:
        decl = self.templates[template]
        tid = f"{template}<{','.join(self._render(a) for a in args)}>"
        if tid in self.out:
            return tid
        if len(self.out) >= _MAX_INSTANTIATIONS:
            raise AdtError(
                f"too many generic instantiations (>{_MAX_INSTANTIATIONS}); "
                "polymorphic recursion is not supported")
        self.out[tid] = ((template, tuple(self._render(a) for a in args)), [])
        self._fill(tid, decl, dict(zip(decl.params, args)))
        return tid

    @staticmethod
    def _render(target: _Target) -> str:
        return target[1]

    def _fill(self, tid: str, decl: _RawDecl, subst: dict[str, _Target]) -> None:
        ctors = self.out[tid][1]
        for cname, fsyns in decl.constructors:
            ctors.append((cname, [self._resolve(f, subst, decl.name) for f in fsyns]))

    def _resolve(self, syn: _FieldSyn, subst: dict[str, _Target], where: str) -> _Target:
        if syn.kind == "var":
            if syn.name not in subst:
                raise AdtError(f"unbound type variable {syn.name!r} in {where}")
            return subst[syn.name]
        if syn.kind == "name":
            if syn.name in GROUND_ATOMS:
                return ("g", syn.name)
            if syn.name in self.concrete:
                return ("t", self.type_id_for(syn.name))
            if syn.name in self.templates:
                n = len(self.templates[syn.name].params)
                raise AdtError(f"generic type {syn.name} used without its {n} argument(s) in {where}")
            raise AdtError(f"unknown type reference {syn.name!r} in {where}")
        # application
        if syn.name in GROUND_ATOMS or syn.name in self.concrete:
            raise AdtError(f"type {syn.name} is not generic but is applied to arguments in {where}")
        if syn.name not in self.templates:
            raise AdtError(f"unknown type reference {syn.name!r} in {where}")
        template = self.templates[syn.name]
        if len(syn.args) != len(template.params):
            raise AdtError(
                f"{syn.name} expects {len(template.params)} argument(s), "
                f"got {len(syn.args)} in {where}")
        args = tuple(self._resolve(a, subst, where) for a in syn.args)
        return ("t", self.instantiate(syn.name, args))


def strongly_connected_components(
        vertices: Iterable[str],
        edges: Mapping[str, Iterable[str]]) -> list[set[str]]:
    """SCCs of a directed graph, via iterative path-based DFS."""
    identified: set[str] = set()
    stack: list[str] = []
    index: dict[str, int] = {}
    boundaries: list[int] = []
    sccs: list[set[str]] = []

    def dfs(root: str) -> None:
        work = [(root, iter(edges.get(root, ())))]
        index[root] = len(stack)
        stack.append(root)
        boundaries.append(index[root])
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = len(stack)
                    stack.append(w)
                    boundaries.append(index[w])
                    work.append((w, iter(edges.get(w, ()))))
                    advanced = True
                    break
                elif w not in identified:
                    while index[w] < boundaries[-1]:
                        boundaries.pop()
            if not advanced:
                work.pop()
                if boundaries[-1] == index[v]:
                    boundaries.pop()
                    scc = set(stack[index[v]:])
                    del stack[index[v]:]
                    identified.update(scc)
                    sccs.append(scc)

    for v in vertices:
        if v not in index:
            dfs(v)
    return sccs


def _reachable(start: Iterable[str], edges: Mapping[str, Iterable[str]]) -> set[str]:
    seen = set(start)
    todo = list(seen)
    while todo:
        v = todo.pop()
        for w in edges.get(v, ()):
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return seen


def parse_universe(source: str, root: str) -> ADTUniverse:
    """Parse DSL text and build the monomorphized universe rooted at ``root``.

    Raises ParseError for syntax problems (with position) and AdtError for
    semantic ones: unknown references, duplicate constructor names, a
    generic or missing root, or a recursive type component that is
    reachable from the root's family without being part of it.
    """
    raw_decls = _Parser(_tokenize(source)).parse_decls()

    by_name: dict[str, _RawDecl] = {}
    for decl in raw_decls:
        if decl.name in by_name:
            raise AdtError(f"duplicate type declaration: {decl.name}")
        by_name[decl.name] = decl
    seen_ctors: dict[str, str] = {}
    for decl in by_name.values():
        if len(set(decl.params)) != len(decl.params):
            raise AdtError(f"duplicate type variable in {decl.name}")
        for cname, fsyns in decl.constructors:
            if cname in seen_ctors:
                raise AdtError(
                    f"duplicate constructor name {cname} "
                    f"(declared in both {seen_ctors[cname]} and {decl.name})")
            seen_ctors[cname] = decl.name
            for syn in fsyns:
                _check_tyvars(syn, decl)

    if root not in by_name:
        raise AdtError(f"root type {root!r} is not declared")
    if by_name[root].params:
        raise AdtError(f"root type {root} is generic; apply it to concrete arguments first")

    mono = _Monomorphizer(by_name)
    mono.run()

    graph: dict[str, tuple[str, ...]] = {}
    for tid, (_, ctors) in mono.out.items():
        targets = []
        for _, fields in ctors:
            targets.extend(t for kind, t in fields if kind == "t")
        graph[tid] = tuple(dict.fromkeys(targets))

    sccs = strongly_connected_components(list(mono.out), graph)
    family_scc = next(s for s in sccs if root in s)
    reachable = _reachable([root], graph)
    for scc in sccs:
        if scc is family_scc or not (scc & reachable):
            continue
        recursive = len(scc) > 1 or next(iter(scc)) in graph.get(next(iter(scc)), ())
        if recursive:
            raise AdtError(
                "unsupported: recursive type component outside the root's family: "
                + ", ".join(sorted(scc)))

    family = tuple(tid for tid in mono.out if tid in family_scc)

    decls: dict[str, TypeDecl] = {}
    for tid, (origin, ctors) in mono.out.items():
        resolved = []
        for cname, fields in ctors:
            rfields = tuple(
                Field(GROUND, t) if kind == "g"
                else Field(FAMILY if t in family_scc else FOREIGN, t)
                for kind, t in fields)
            resolved.append(ConstructorDecl(cname, rfields))
        decls[tid] = TypeDecl(tid, (), tuple(resolved), origin)

    return ADTUniverse(decls, root, family, graph, raw_decls)


def _check_tyvars(syn: _FieldSyn, decl: _RawDecl) -> None:
    if syn.kind == "var":
        if syn.name not in decl.params:
            raise AdtError(f"unbound type variable {syn.name!r} in {decl.name}")
    elif syn.kind == "app":
        for a in syn.args:
            _check_tyvars(a, decl)


# ---------------------------------------------------------------------------
# Printing and hashing
# ---------------------------------------------------------------------------

def _field_syntax(syn: _FieldSyn) -> str:
    if syn.kind == "app":
        return "(" + " ".join([syn.name] + [_field_syntax(a) for a in syn.args]) + ")"
    return syn.name


def print_universe(u: ADTUniverse) -> str:
    """Render the universe back to DSL text (parse/print round-trips)."""
    lines = []
    for decl in u.source_decls:
        head = " ".join(["data", decl.name, *decl.params])
        alts = []
        for cname, fsyns in decl.constructors:
            alts.append(" ".join([cname] + [_field_syntax(f) for f in fsyns]))
        lines.append(f"{head} = " + " | ".join(alts))
    return "\n".join(lines) + "\n"


def universe_hash(u: ADTUniverse) -> str:
    """Stable hex digest identifying (declarations, root)."""
    payload = print_universe(u) + "\x00root=" + u.root
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Structural queries
# ---------------------------------------------------------------------------

def branching_factor(ctor_id: str, type_id: str, u: ADTUniverse) -> int:
    """Number of fields of ``ctor_id`` whose type is ``type_id``."""
    decl = u.ctor_decl(ctor_id)
    if type_id not in u.decls:
        raise AdtError(f"unknown type: {type_id}")
    return sum(1 for f in decl.fields if f.kind != GROUND and f.target == type_id)


def terminal_constructors(type_id: str, u: ADTUniverse) -> tuple[str, ...]:
    """Constructors of a family type with no family-typed fields, in
    declaration order."""
    if not u.is_family(type_id):
        raise AdtError(f"{type_id} is not in the branching family of {u.root}")
    decl = u.decls[type_id]
    return tuple(qualify(type_id, c.name) for c in decl.constructors
                 if c.family_arity() == 0)


def reachable_foreign_types(u: ADTUniverse) -> tuple[str, ...]:
    """Foreign types reachable from the family, topologically sorted so that
    every referrer precedes what it references. Raises on a cycle."""
    start: set[str] = set()
    for tid in u.family:
        for target in u.type_graph.get(tid, ()):
            if not u.is_family(target):
                start.add(target)
    reach = _reachable(sorted(start), u.type_graph)
    reach = {t for t in reach if not u.is_family(t)}

    indegree = {t: 0 for t in reach}
    for t in reach:
        for w in u.type_graph.get(t, ()):
            if w in indegree:
                indegree[w] += 1
    ready = sorted(t for t, d in indegree.items() if d == 0)
    order: list[str] = []
    while ready:
        t = ready.pop(0)
        order.append(t)
        for w in u.type_graph.get(t, ()):
            if w in indegree:
                indegree[w] -= 1
                if indegree[w] == 0:
                    ready.append(w)
        ready.sort()
    if len(order) != len(reach):
        cyclic = sorted(set(reach) - set(order))
        raise AdtError("cycle detected among foreign types: " + ", ".join(cyclic))
    return tuple(order)


@dataclass(frozen=True)
class CdgEdge:
    """Dependency edge: generating ``parent`` forces ``multiplicity``
    independent choices of ``child``'s type, each picking ``child`` with the
    probability named by ``prob_symbol``."""

    parent: str
    child: str
    multiplicity: int
    prob_symbol: str


@dataclass(frozen=True)
class CDG:
    """Constructor dependency graph from family constructors through the
    acyclic foreign types they reach."""

    nodes: tuple[str, ...]
    edges: tuple[CdgEdge, ...]


def build_cdg(u: ADTUniverse) -> CDG:
    foreign_order = reachable_foreign_types(u)
    nodes = list(u.family_constructors())
    for tid in foreign_order:
        nodes.extend(u.constructors_of(tid))

    edges: list[CdgEdge] = []
    for parent in nodes:
        decl = u.ctor_decl(parent)
        mult: dict[str, int] = {}
        for f in decl.fields:
            if f.kind == FOREIGN:
                mult[f.target] = mult.get(f.target, 0) + 1
        for target, m in mult.items():
            for child in u.constructors_of(target):
                edges.append(CdgEdge(parent, child, m, child))
    return CDG(tuple(nodes), tuple(edges))


# ---------------------------------------------------------------------------
# Probability maps
# ---------------------------------------------------------------------------

def uniform_probmap(u: ADTUniverse, types: Iterable[str] | None = None) -> dict[str, float]:
    """Equal probability for each constructor, per type."""
    probs: dict[str, float] = {}
    for tid in (types if types is not None else u.decls):
        ctors = u.constructors_of(tid)
        p = 1.0 / len(ctors)
        for cid in ctors:
            probs[cid] = p
    return probs


def _entries_by_type(u: ADTUniverse, probs: Mapping[str, float]) -> dict[str, dict[str, float]]:
    grouped: dict[str, dict[str, float]] = {}
    for cid, p in probs.items():
        grouped.setdefault(u.ctor_type(cid), {})[cid] = p
    return grouped


def validate_probmap(u: ADTUniverse, probs: Mapping[str, float]) -> None:
    """Check the per-type distribution invariant.

    Every type with an entry must have all of its constructors present,
    each in [0, 1], summing to 1 within 1e-9. A type whose entries are all
    exactly zero is allowed: it is the dead-type form produced by hard
    constraints, and such a type is never reached during generation.
    """
    for tid, entries in _entries_by_type(u, probs).items():
        ctors = u.constructors_of(tid)
        missing = [c for c in ctors if c not in entries]
        if missing:
            raise AdtError(f"incomplete distribution for {tid}: missing {missing}")
        for cid, p in entries.items():
            if not (0.0 <= p <= 1.0 + PROB_SUM_TOL):
                raise AdtError(f"probability out of range for {cid}: {p}")
        total = sum(entries[c] for c in ctors)
        if total == 0.0:
            continue
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise AdtError(f"probabilities for {tid} sum to {total}, expected 1")


def renormalize_probmap(u: ADTUniverse, probs: Mapping[str, float],
                        pinned: frozenset[str] | set[str] = frozenset()) -> dict[str, float]:
    """Zero the pinned constructors and rescale each type's remaining
    entries to sum to 1. A type with every constructor pinned keeps
    explicit zeros."""
    out: dict[str, float] = {}
    for tid, entries in _entries_by_type(u, probs).items():
        free = {c: p for c, p in entries.items() if c not in pinned}
        total = sum(free.values())
        for cid in entries:
            if cid in pinned:
                out[cid] = 0.0
            elif total > 0.0:
                out[cid] = free[cid] / total
            else:
                out[cid] = 1.0 / len(free)
    return out


def probmap_to_json(probs: Mapping[str, float]) -> dict:
    return {"probabilities": dict(sorted(probs.items()))}


def load_probmap(data, u: ADTUniverse) -> dict[str, float]:
    """Load a probability map from a JSON document (dict or text)."""
    if isinstance(data, str):
        data = json.loads(data)
    if not isinstance(data, dict) or "probabilities" not in data:
        raise AdtError('probability file must be {"probabilities": {...}}')
    entries = data["probabilities"]
    if not isinstance(entries, dict):
        raise AdtError('"probabilities" must be an object')
    probs = {}
    for cid, p in entries.items():
        if not u.has_ctor(cid):
            raise AdtError(f"unknown constructor: {cid}")
        probs[cid] = float(p)
    validate_probmap(u, probs)
    return probs


def warn_probability(message: str) -> None:
    warnings.warn(message, stacklevel=3)
