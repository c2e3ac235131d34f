"""Well-foundedness test and leading terms via the (count, valuation) iteration.

The fixed point of the per-shape update rules, reached in at most m+1 sweeps,
gives for every coordinate the number of minimum-size structures (as an
exponential-generating-function coefficient, hence a rational) and that
minimum size.  Failure happens in exactly two ways: a Seq/Set/Cyc argument
acquires valuation 0, or the sweeps do not stabilize.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .specir import (
    Atom,
    Cyc,
    NamedClass,
    NormalSystem,
    One,
    Prod,
    Seq,
    Set,
    Sum,
)

INF = math.inf

#: (count, valuation) of the zero species
ZERO_LT = (Fraction(0), INF)


@dataclass(frozen=True)
class LeadingTermVector:
    names: tuple
    terms: tuple  # per coordinate: (Fraction count, int|inf valuation)
    sweeps: int  # sweeps executed until the fixed point was reached

    def __getitem__(self, name: str):
        return self.terms[self.names.index(name)]

    def as_dict(self) -> dict:
        return dict(zip(self.names, self.terms))

    def zero_coords(self) -> tuple:
        return tuple(n for n, (c, v) in zip(self.names, self.terms) if v == INF)


class NotWellFounded(Exception):
    """Raised when a system is not well founded.

    ``mode`` is ``"guard"`` (a Seq/Set/Cyc argument reached valuation 0,
    ``equation`` names the offender) or ``"divergent"`` (no fixed point after
    m+1 sweeps; the two final vectors are attached).
    """

    def __init__(self, mode: str, equation: str = "", last_two=None):
        self.mode = mode
        self.equation = equation
        self.last_two = last_two
        msg = (
            f"guard failed in equation {equation!r} (Seq/Set/Cyc of a class "
            "containing size-0 structures)"
            if mode == "guard"
            else "leading terms did not stabilize after m+1 sweeps"
        )
        super().__init__(msg)


def _lt_of_ref(ref, env):
    if isinstance(ref, One):
        return (Fraction(1), 0)
    if isinstance(ref, Atom):
        return (Fraction(1), 1)
    return env[ref.name]


def _update(name, rhs, env):
    if isinstance(rhs, One):
        return (Fraction(1), 0)
    if isinstance(rhs, Atom):
        return (Fraction(1), 1)
    if isinstance(rhs, NamedClass):
        return env[rhs.name]
    if isinstance(rhs, (Set, Seq)):
        c, v = _lt_of_ref(rhs.arg, env)
        if v == 0:
            raise NotWellFounded("guard", name)
        return (Fraction(1), 0)
    if isinstance(rhs, Cyc):
        c, v = _lt_of_ref(rhs.arg, env)
        if v == 0:
            raise NotWellFounded("guard", name)
        return (c, v)
    if isinstance(rhs, Prod):
        count, val = Fraction(1), 0
        for ch in rhs.children:
            c, v = _lt_of_ref(ch, env)
            count *= c
            val = val + v if count else INF
        return (count, val) if count else ZERO_LT
    if isinstance(rhs, Sum):
        lts = [_lt_of_ref(ch, env) for ch in rhs.children]
        val = min(v for _, v in lts)
        if val == INF:
            return ZERO_LT
        return (sum(c for c, v in lts if v == val), val)
    raise TypeError(f"not a normal shape: {rhs}")


def leading_terms(sys: NormalSystem) -> LeadingTermVector:
    """Run the leading-term iteration; at most m+1 sweeps.

    Each sweep reads the previous sweep's vector (snapshot semantics, as in
    the colored-forest trace where T_r picks up R's value one sweep late).
    """
    names = sys.names
    m = len(names)
    w = {n: ZERO_LT for n in names}
    for sweep in range(1, m + 2):
        v = dict(w)
        for name, rhs in sys.equations:
            w[name] = _update(name, rhs, v)
        if w == v:
            return LeadingTermVector(names, tuple(w[n] for n in names), sweep)
    raise NotWellFounded(
        "divergent",
        last_two=(tuple(v[n] for n in names), tuple(w[n] for n in names)),
    )


def valuations(sys: NormalSystem) -> dict:
    lt = leading_terms(sys)
    return {n: v for n, (c, v) in zip(lt.names, lt.terms)}


def strip_zero_coords(sys: NormalSystem, lt: LeadingTermVector) -> NormalSystem:
    """Remove coordinates whose solution is the zero species.

    References to removed coordinates are replaced by the zero species and
    the equations re-normalized: ``Seq(0) = Set(0) = 1``, zero summands drop,
    products and ``Cyc(0)`` would be zero themselves, which cannot happen in
    a surviving equation.
    """
    zero = set(lt.zero_coords())
    if not zero:
        return sys

    def is_zero(ref) -> bool:
        return isinstance(ref, NamedClass) and ref.name in zero

    out = []
    for name, rhs in sys.equations:
        if name in zero:
            continue
        if isinstance(rhs, Sum):
            kept = tuple(c for c in rhs.children if not is_zero(c))
            assert kept, f"equation {name} lost all summands"
            rhs = kept[0] if len(kept) == 1 else Sum(kept)
        elif isinstance(rhs, Prod):
            assert not any(is_zero(c) for c in rhs.children), f"zero factor survives in {name}"
        elif isinstance(rhs, (Seq, Set)):
            if is_zero(rhs.arg):
                rhs = One()
        elif isinstance(rhs, Cyc):
            assert not is_zero(rhs.arg), f"Cyc of zero species survives in {name}"
        out.append((name, rhs))
    origin = tuple(n for n in sys.origin if n not in zero)
    return NormalSystem(tuple(out), origin=origin)
