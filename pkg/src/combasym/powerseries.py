"""Exact truncated power series over the rationals.

This is the brute-force oracle that every numeric stage of the pipeline is
checked against.  Coefficients are exponential-generating-function
coefficients: the number of structures of size n is ``n! * c_n``.

Two extraction strategies are provided: the fast one computes coefficients
order by order, solving each order along the (acyclic) constant-term
dependency graph with incremental convolutions; the plain fixed-point
iteration of the defining system is kept behind ``method="fixpoint"`` as an
independent second oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

try:
    from gmpy2 import mpq as RAT
except ImportError:  # pragma: no cover - gmpy2 is an optional speedup
    RAT = Fraction

from .specir import Atom, Cyc, NamedClass, NormalSystem, One, Prod, Seq, Set, Sum
from .wellfounded import INF, leading_terms

R0 = RAT(0)
R1 = RAT(1)


@dataclass(frozen=True)
class SeriesTruncation:
    order: int
    coeffs: tuple  # c_0 .. c_order, exact rationals

    def __post_init__(self):
        assert len(self.coeffs) == self.order + 1

    def __getitem__(self, n: int):
        return self.coeffs[n]

    def valuation(self):
        for n, c in enumerate(self.coeffs):
            if c:
                return n
        return INF

    def support(self) -> tuple:
        return tuple(n for n, c in enumerate(self.coeffs) if c)

    def counts(self) -> tuple:
        """Structure counts n! * c_n."""
        out = []
        f = 1
        for n, c in enumerate(self.coeffs):
            if n:
                f *= n
            out.append(c * f)
        return tuple(out)


def eval_truncation(s: SeriesTruncation, a) -> Fraction:
    """Exact partial sum at a >= 0; a lower bound on Y(a) below the radius."""
    a = Fraction(a) if not isinstance(a, Fraction) else a
    assert a >= 0
    acc = Fraction(0)
    for c in reversed(s.coeffs):
        acc = acc * a + Fraction(c.numerator, c.denominator)
    return acc


def empirical_period(s: SeriesTruncation) -> int:
    """gcd of the support gaps after the valuation; 0 for a monomial."""
    sup = s.support()
    if len(sup) <= 1:
        return 0
    v = sup[0]
    g = 0
    for n in sup[1:]:
        g = math.gcd(g, n - v)
    return g


# ---------------------------------------------------------------------------
# fast path: order-by-order extraction


def _ref_val(ref, vals):
    if isinstance(ref, One):
        return 0
    if isinstance(ref, Atom):
        return 1
    v = vals[ref.name]
    return v


def _epsilon_edges(sys: NormalSystem, vals) -> dict:
    """name -> refs whose order-n coefficient enters order n of this one."""
    edges = {}
    for name, rhs in sys.equations:
        deps = set()
        if isinstance(rhs, NamedClass):
            deps.add(rhs.name)
        elif isinstance(rhs, Sum):
            deps.update(c.name for c in rhs.children if isinstance(c, NamedClass))
        elif isinstance(rhs, Prod):
            kids = rhs.children
            for i, c in enumerate(kids):
                if isinstance(c, NamedClass):
                    others = kids[:i] + kids[i + 1 :]
                    if all(_ref_val(o, vals) == 0 for o in others):
                        deps.add(c.name)
        elif isinstance(rhs, (Seq, Set, Cyc)):
            if isinstance(rhs.arg, NamedClass):
                deps.add(rhs.arg.name)
        edges[name] = deps
    return edges


def _topo_order(names, edges):
    state = {n: 0 for n in names}
    out = []

    def visit(n):
        stack = [(n, iter(sorted(edges[n])))]
        state[n] = 1
        while stack:
            node, it = stack[-1]
            for w in it:
                if state[w] == 0:
                    state[w] = 1
                    stack.append((w, iter(sorted(edges[w]))))
                    break
                assert state[w] == 2, "constant-term dependency cycle (system not zero-free?)"
            else:
                state[node] = 2
                out.append(node)
                stack.pop()

    for n in names:
        if state[n] == 0:
            visit(n)
    return out


class _Node:
    """Incremental coefficient computer for one normal equation."""

    def __init__(self, rhs, arrays, vals):
        self.rhs = rhs
        self.arrays = arrays
        self.vals = vals
        if isinstance(rhs, Prod):
            # Put one positive-valuation factor first, if any: the chained
            # convolutions then never read an order-n coefficient of a factor
            # the epsilon-dependency order has not produced yet.
            kids = list(rhs.children)
            kids.sort(key=lambda c: 0 if _ref_val(c, vals) >= 1 else 1)
            self.factors = tuple(kids)
            self.fvals = tuple(
                min(_ref_val(c, vals), 10**9) for c in self.factors
            )
            self.zero = any(_ref_val(c, vals) == INF for c in self.factors)
            # running prefix valuations and partial-product arrays P2..Pk
            self.pvals = [self.fvals[0]]
            for v in self.fvals[1:]:
                self.pvals.append(self.pvals[-1] + v)
            self.partials = [[] for _ in self.factors[1:]]
        if isinstance(rhs, Cyc):
            self.seq = [R1]  # Seq(arg), needed by the log recurrence

    def _ref_coeff(self, ref, n):
        if isinstance(ref, One):
            return R1 if n == 0 else R0
        if isinstance(ref, Atom):
            return R1 if n == 1 else R0
        if n < min(self.vals[ref.name], 10**9):
            return R0
        return self.arrays[ref.name][n]

    def coeff(self, n: int):
        rhs = self.rhs
        if isinstance(rhs, (One, Atom, NamedClass)):
            return self._ref_coeff(rhs, n)
        if isinstance(rhs, Sum):
            return sum((self._ref_coeff(c, n) for c in rhs.children), R0)
        if isinstance(rhs, Prod):
            return self._prod_coeff(n)
        u = rhs.arg
        uval = max(1, min(_ref_val(u, self.vals), n + 1))
        if isinstance(rhs, Seq):
            if n == 0:
                return R1
            mine = self.arrays_self
            return sum(
                (self._ref_coeff(u, k) * mine[n - k] for k in range(uval, n + 1)), R0
            )
        if isinstance(rhs, Set):
            if n == 0:
                return R1
            mine = self.arrays_self
            return (
                sum(
                    (k * self._ref_coeff(u, k) * mine[n - k] for k in range(uval, n + 1)),
                    R0,
                )
                / n
            )
        if isinstance(rhs, Cyc):
            g = self.seq
            if n > 0:
                g.append(
                    sum((self._ref_coeff(u, k) * g[n - k] for k in range(uval, n + 1)), R0)
                )
                return (
                    sum(
                        (k * self._ref_coeff(u, k) * g[n - k] for k in range(uval, n + 1)),
                        R0,
                    )
                    / n
                )
            return R0
        raise TypeError(f"not a normal shape: {rhs}")

    def _prod_coeff(self, n):
        if self.zero:
            return R0
        if len(self.factors) == 1:
            return self._ref_coeff(self.factors[0], n)
        first = self.factors[0]
        for j in range(1, len(self.factors)):
            prev_val = self.pvals[j - 1]
            fac = self.factors[j]
            fval = self.fvals[j]
            acc = R0
            for i in range(prev_val, n - fval + 1):
                p = (
                    self._ref_coeff(first, i)
                    if j == 1
                    else self.partials[j - 2][i]
                )
                if p:
                    ck = self._ref_coeff(fac, n - i)
                    if ck:
                        acc += p * ck
            self.partials[j - 1].append(acc)
        return self.partials[-1][n]


def expand_coefficients(sys: NormalSystem, N: int, method: str = "solve") -> dict:
    """Exact EGF coefficients to order N for every coordinate.

    Rejects systems that fail the well-foundedness test.  ``method`` selects
    the fast order-by-order extraction ("solve") or the plain fixed-point
    iteration of the defining system ("fixpoint").
    """
    lt = leading_terms(sys)  # raises NotWellFounded if it must
    vals = {n: v for n, (c, v) in zip(lt.names, lt.terms)}
    if method == "fixpoint":
        return _expand_fixpoint(sys, N, vals)
    order = _topo_order(list(sys.names), _epsilon_edges(sys, vals))
    arrays = {n: [] for n in sys.names}
    nodes = {}
    for name, rhs in sys.equations:
        node = _Node(rhs, arrays, vals)
        node.arrays_self = arrays[name]
        nodes[name] = node
    for n in range(N + 1):
        for name in order:
            arrays[name].append(nodes[name].coeff(n))
    return {
        name: SeriesTruncation(N, tuple(arrays[name])) for name in sys.names
    }


# ---------------------------------------------------------------------------
# second oracle: plain fixed-point iteration on truncated series


def _s_add(a, b):
    return [x + y for x, y in zip(a, b)]


def _s_mul(a, b, N):
    out = [R0] * (N + 1)
    for i, x in enumerate(a):
        if x:
            for j in range(0, N + 1 - i):
                if b[j]:
                    out[i + j] += x * b[j]
    return out


def _s_seq(u, N):
    g = [R1] + [R0] * N
    for n in range(1, N + 1):
        g[n] = sum((u[k] * g[n - k] for k in range(1, n + 1) if u[k]), R0)
    return g


def _s_exp(u, N):
    e = [R1] + [R0] * N
    for n in range(1, N + 1):
        e[n] = sum((k * u[k] * e[n - k] for k in range(1, n + 1) if u[k]), R0) / n
    return e


def _s_log_geom(u, N):
    g = _s_seq(u, N)
    c = [R0] * (N + 1)
    for n in range(1, N + 1):
        c[n] = sum((k * u[k] * g[n - k] for k in range(1, n + 1) if u[k]), R0) / n
    return c


def _s_of_ref(ref, env, N):
    if isinstance(ref, One):
        return [R1] + [R0] * N
    if isinstance(ref, Atom):
        return ([R0, R1] + [R0] * (N - 1))[: N + 1]
    return env[ref.name]


def _s_eval(rhs, env, N):
    if isinstance(rhs, (One, Atom, NamedClass)):
        return _s_of_ref(rhs, env, N)
    if isinstance(rhs, Sum):
        acc = [R0] * (N + 1)
        for c in rhs.children:
            acc = _s_add(acc, _s_of_ref(c, env, N))
        return acc
    if isinstance(rhs, Prod):
        acc = _s_of_ref(rhs.children[0], env, N)
        for c in rhs.children[1:]:
            acc = _s_mul(acc, _s_of_ref(c, env, N), N)
        return acc
    u = _s_of_ref(rhs.arg, env, N)
    assert not u[0], "Seq/Set/Cyc argument must have positive valuation"
    if isinstance(rhs, Seq):
        return _s_seq(u, N)
    if isinstance(rhs, Set):
        return _s_exp(u, N)
    return _s_log_geom(u, N)


def _expand_fixpoint(sys: NormalSystem, N: int, vals) -> dict:
    # contact with the solution can grow as slowly as one order per
    # dependency cycle, hence the generous sweep cap
    env = {n: [R0] * (N + 1) for n in sys.names}
    for sweep in range((N + 2) * (len(sys.names) + 1) + 5):
        new = {n: _s_eval(rhs, env, N) for n, rhs in sys.equations}
        if new == env:
            return {n: SeriesTruncation(N, tuple(new[n])) for n in sys.names}
        env = new
    raise AssertionError("fixed-point iteration did not stabilize")
