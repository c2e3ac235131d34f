"""Species systems: AST, parser, normal form, and SCC condensation.

A system is an ordered list of equations ``name = expr`` over the
constructors ``1, Z, +, *, Seq, Set, Cyc``.  The normal form restricts every
right-hand side to a single constructor applied to references, which is what
all downstream algorithms consume.  The condensation orders the strongly
connected components so that every component only refers to earlier ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class One:
    """The empty-structure class (neutral for product)."""

    def __str__(self) -> str:
        return "1"


@dataclass(frozen=True)
class Atom:
    """The atomic class Z."""

    def __str__(self) -> str:
        return "Z"


@dataclass(frozen=True)
class NamedClass:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Sum:
    children: tuple

    def __str__(self) -> str:
        return " + ".join(_paren(c, inside="sum") for c in self.children)


@dataclass(frozen=True)
class Prod:
    children: tuple

    def __str__(self) -> str:
        return "*".join(_paren(c, inside="prod") for c in self.children)


@dataclass(frozen=True)
class Seq:
    arg: "SpeciesExpr"

    def __str__(self) -> str:
        return f"Seq({self.arg})"


@dataclass(frozen=True)
class Set:
    arg: "SpeciesExpr"

    def __str__(self) -> str:
        return f"Set({self.arg})"


@dataclass(frozen=True)
class Cyc:
    arg: "SpeciesExpr"

    def __str__(self) -> str:
        return f"Cyc({self.arg})"


SpeciesExpr = Union[One, Atom, NamedClass, Sum, Prod, Seq, Set, Cyc]

#: shapes allowed as references inside a normal equation
REF_TYPES = (One, Atom, NamedClass)


def _paren(e: SpeciesExpr, inside: str) -> str:
    if isinstance(e, Sum):
        return f"({e})"
    if isinstance(e, Prod) and inside == "prod":
        return str(e)
    return str(e)


def free_names(e: SpeciesExpr) -> Iterator[str]:
    if isinstance(e, NamedClass):
        yield e.name
    elif isinstance(e, (Sum, Prod)):
        for c in e.children:
            yield from free_names(c)
    elif isinstance(e, (Seq, Set, Cyc)):
        yield from free_names(e.arg)


@dataclass(frozen=True)
class Specification:
    """Parsed system: ordered equations ``name = expr`` over one atom sort."""

    equations: tuple  # of (name, SpeciesExpr)

    @property
    def names(self) -> tuple:
        return tuple(n for n, _ in self.equations)

    def rhs(self, name: str) -> SpeciesExpr:
        for n, e in self.equations:
            if n == name:
                return e
        raise KeyError(name)

    def __str__(self) -> str:
        return "\n".join(f"{n} = {e};" for n, e in self.equations)


@dataclass(frozen=True)
class NormalSystem:
    """System in normal form.

    Every right-hand side is one of: ``1``, ``Z``, a reference (alias, only
    produced by zero-coordinate elimination), a sum of references, a product
    of references, or ``Seq/Set/Cyc`` of a reference.
    """

    equations: tuple  # of (name, SpeciesExpr)
    origin: tuple = ()  # names of the pre-normalization coordinates

    @property
    def names(self) -> tuple:
        return tuple(n for n, _ in self.equations)

    def rhs(self, name: str) -> SpeciesExpr:
        for n, e in self.equations:
            if n == name:
                return e
        raise KeyError(name)

    def __len__(self) -> int:
        return len(self.equations)

    def __str__(self) -> str:
        return "\n".join(f"{n} = {e};" for n, e in self.equations)


# ---------------------------------------------------------------------------
# Parser


class SpecError(ValueError):
    """Parse or validation error, annotated with source position."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line, self.col = line, col
        where = f" at line {line}, column {col}" if line else ""
        super().__init__(message + where)


_KEYWORDS = {"Seq", "Set", "Cyc"}
_ONE_ALIASES = {"E", "Epsilon"}


class _Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind, self.text, self.line, self.col = kind, text, line, col


def _tokenize(text: str):
    tokens = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
        elif c in " \t\r":
            i += 1
            col += 1
        elif c == "#":
            while i < n and text[i] != "\n":
                i += 1
        elif c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(_Token("INT", text[i:j], line, col))
            col += j - i
            i = j
        elif c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("IDENT", text[i:j], line, col))
            col += j - i
            i = j
        elif c in "=+*^();":
            tokens.append(_Token(c, c, line, col))
            i += 1
            col += 1
        else:
            raise SpecError(f"unexpected character {c!r}", line, col)
    tokens.append(_Token("EOF", "", line, col))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def expect(self, kind: str) -> _Token:
        t = self.next()
        if t.kind != kind:
            raise SpecError(f"expected {kind!r}, found {t.text!r}", t.line, t.col)
        return t

    def parse(self) -> Specification:
        equations = []
        seen = {}
        while self.peek().kind != "EOF":
            t = self.expect("IDENT")
            name = t.text
            if name in _KEYWORDS or name == "Z" or name in _ONE_ALIASES:
                raise SpecError(f"{name!r} is reserved", t.line, t.col)
            if name in seen:
                raise SpecError(f"duplicate definition of {name!r}", t.line, t.col)
            seen[name] = True
            self.expect("=")
            rhs = self.expr()
            self.expect(";")
            equations.append((name, rhs))
        if not equations:
            raise SpecError("empty specification", 1, 1)
        spec = Specification(tuple(equations))
        defined = set(spec.names)
        for name, rhs in spec.equations:
            for ref in free_names(rhs):
                if ref not in defined:
                    raise SpecError(f"undefined identifier {ref!r} in equation for {name!r}")
        return spec

    def expr(self) -> SpeciesExpr:
        terms = [self.term()]
        while self.peek().kind == "+":
            self.next()
            terms.append(self.term())
        return terms[0] if len(terms) == 1 else Sum(tuple(terms))

    def term(self) -> SpeciesExpr:
        factors = [self.factor()]
        while self.peek().kind == "*":
            self.next()
            factors.append(self.factor())
        if len(factors) == 1:
            return factors[0]
        flat = []
        for f in factors:
            flat.extend(f.children if isinstance(f, Prod) else (f,))
        return Prod(tuple(flat))

    def factor(self) -> SpeciesExpr:
        t = self.next()
        if t.kind == "INT":
            if t.text != "1":
                raise SpecError(f"only the literal 1 is allowed, found {t.text!r}", t.line, t.col)
            base: SpeciesExpr = One()
        elif t.kind == "(":
            base = self.expr()
            self.expect(")")
        elif t.kind == "IDENT":
            if t.text == "Z":
                base = Atom()
            elif t.text in _ONE_ALIASES:
                base = One()
            elif t.text in _KEYWORDS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                base = {"Seq": Seq, "Set": Set, "Cyc": Cyc}[t.text](arg)
            else:
                base = NamedClass(t.text)
        else:
            raise SpecError(f"unexpected token {t.text!r}", t.line, t.col)
        while self.peek().kind == "^":
            self.next()
            e = self.expect("INT")
            k = int(e.text)
            if k < 1:
                raise SpecError("power exponent must be >= 1", e.line, e.col)
            if k > 1:
                parts = []
                for _ in range(k):
                    parts.extend(base.children if isinstance(base, Prod) else (base,))
                base = Prod(tuple(parts))
        return base


def parse_spec(text: str) -> Specification:
    """Parse specification source into an AST; powers are expanded."""
    return _Parser(text).parse()


def parse_expr(text: str) -> SpeciesExpr:
    """Parse a single expression (handy in tests)."""
    p = _Parser(text)
    e = p.expr()
    p.expect("EOF")
    return e


# ---------------------------------------------------------------------------
# Normal form


def _flatten(e: SpeciesExpr) -> SpeciesExpr:
    if isinstance(e, Sum):
        parts = []
        for c in map(_flatten, e.children):
            parts.extend(c.children if isinstance(c, Sum) else (c,))
        return Sum(tuple(parts))
    if isinstance(e, Prod):
        parts = []
        for c in map(_flatten, e.children):
            parts.extend(c.children if isinstance(c, Prod) else (c,))
        return Prod(tuple(parts))
    if isinstance(e, (Seq, Set, Cyc)):
        return type(e)(_flatten(e.arg))
    return e


def normalize(spec: Specification) -> NormalSystem:
    """Rewrite into normal form, introducing auxiliaries ``_N1, _N2, ...``

    Nested sums and products are flattened first, so the coordinate count
    stays minimal.  Auxiliary equations follow the equation that spawned
    them, in creation order, making the output deterministic.
    """
    taken = set(spec.names)
    counter = [0]
    out: list = []

    def fresh() -> str:
        while True:
            counter[0] += 1
            name = f"_N{counter[0]}"
            if name not in taken:
                taken.add(name)
                return name

    def as_ref(e: SpeciesExpr) -> SpeciesExpr:
        if isinstance(e, REF_TYPES):
            return e
        name = fresh()
        slot = len(out)
        out.append(None)
        out[slot] = (name, shape(e))
        return NamedClass(name)

    def shape(e: SpeciesExpr) -> SpeciesExpr:
        if isinstance(e, REF_TYPES):
            return e
        if isinstance(e, Sum):
            return Sum(tuple(as_ref(c) for c in e.children))
        if isinstance(e, Prod):
            return Prod(tuple(as_ref(c) for c in e.children))
        return type(e)(as_ref(e.arg))

    for name, rhs in spec.equations:
        slot = len(out)
        out.append(None)
        out[slot] = (name, shape(_flatten(rhs)))
    return NormalSystem(tuple(out), origin=spec.names)


def is_normal_shape(e: SpeciesExpr) -> bool:
    if isinstance(e, REF_TYPES):
        return True
    if isinstance(e, (Sum, Prod)):
        return all(isinstance(c, REF_TYPES) for c in e.children)
    if isinstance(e, (Seq, Set, Cyc)):
        return isinstance(e.arg, REF_TYPES)
    return False


# ---------------------------------------------------------------------------
# Condensation into components


@dataclass(frozen=True)
class Component:
    coords: tuple  # coordinate names, in system order
    recursive: bool  # False = nonrecursive single equation

    @property
    def kind(self) -> str:
        return "Irreducible" if self.recursive else "NonRecursive"


@dataclass(frozen=True)
class ComponentDAG:
    """Components in dependency order (every reference points backwards)."""

    components: tuple  # of Component
    predecessors: tuple  # per component: tuple of coordinate names referenced outside it

    def __len__(self) -> int:
        return len(self.components)


def dependency_edges(equations) -> dict:
    """name -> set of referenced coordinate names."""
    names = {n for n, _ in equations}
    return {n: {r for r in free_names(e) if r in names} for n, e in equations}


def condense(system) -> ComponentDAG:
    """Tarjan condensation; SCCs emitted dependencies-first.

    Accepts any object with an ``equations`` attribute (Specification or
    NormalSystem).  A component is recursive iff it has more than one
    coordinate or its single coordinate refers to itself.
    """
    equations = system.equations
    deps = dependency_edges(equations)
    order = {n: i for i, (n, _) in enumerate(equations)}

    index: dict = {}
    low: dict = {}
    onstack: dict = {}
    stack: list = []
    counter = [0]
    sccs: list = []

    def strongconnect(v: str) -> None:
        # iterative Tarjan: (node, iterator) frames
        work = [(v, iter(sorted(deps[v], key=order.get)))]
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        onstack[v] = True
        while work:
            node, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter[0]
                    counter[0] += 1
                    stack.append(w)
                    onstack[w] = True
                    work.append((w, iter(sorted(deps[w], key=order.get))))
                    advanced = True
                    break
                elif onstack.get(w):
                    low[node] = min(low[node], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    onstack[w] = False
                    comp.append(w)
                    if w == node:
                        break
                sccs.append(comp)

    for n, _ in equations:
        if n not in index:
            strongconnect(n)

    components = []
    preds = []
    for comp in sccs:
        coords = tuple(sorted(comp, key=order.get))
        inside = set(coords)
        recursive = len(coords) > 1 or coords[0] in deps[coords[0]]
        outside = sorted(
            {r for c in coords for r in deps[c] if r not in inside}, key=order.get
        )
        components.append(Component(coords, recursive))
        preds.append(tuple(outside))
    return ComponentDAG(tuple(components), tuple(preds))


def reachable_components(dag: ComponentDAG) -> list:
    """Per component: set of component indices it (transitively) depends on,
    including itself."""
    where = {}
    for i, comp in enumerate(dag.components):
        for c in comp.coords:
            where[c] = i
    reach = []
    for i, comp in enumerate(dag.components):
        acc = {i}
        for p in dag.predecessors[i]:
            acc |= reach[where[p]]
        reach.append(acc)
    return reach
