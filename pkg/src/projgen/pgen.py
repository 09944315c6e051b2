"""Exact arithmetic for projection-generation numbers.

The least size of a generating family of mutually unitarily equivalent,
almost mutually orthogonal projections is constrained by K-theory: such a
family forces k * [p] = [1] in K_0.  For Cuntz algebras (K_0 cyclic of
order n-1) and UHF algebras (K_0 a localization of the integers at a
supernatural number) that obstruction is sharp, and the value reduces to
coprimality or divisibility arithmetic computed here exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import PreconditionError

INFINITY = math.inf


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def _factorize(n: int) -> dict:
    """Prime factorization by trial division; fine at desk scale."""
    if n < 1:
        raise PreconditionError("can only factorize a natural number >= 1")
    factors: dict = {}
    for p in (2, 3):
        while n % p == 0:
            factors[p] = factors.get(p, 0) + 1
            n //= p
    f = 5
    while f * f <= n:
        while n % f == 0:
            factors[f] = factors.get(f, 0) + 1
            n //= f
        f += 2
    if n > 1:
        factors[n] = factors.get(n, 0) + 1
    return factors


@dataclass
class SupernaturalNumber:
    """Formal product of primes with exponents in {1, 2, ...} or infinity."""

    factors: dict

    def __post_init__(self):
        clean: dict = {}
        for p, e in self.factors.items():
            if not isinstance(p, int) or not _is_prime(p):
                raise PreconditionError(f"{p!r} is not a prime")
            if e == INFINITY:
                clean[p] = INFINITY
            elif isinstance(e, int) and e >= 0:
                if e > 0:
                    clean[p] = e
            else:
                raise PreconditionError(f"exponent {e!r} must be a natural number or inf")
        self.factors = clean

    @classmethod
    def parse(cls, text: str) -> "SupernaturalNumber":
        """Parse '2^inf*3^2*7' or a plain integer like '12'."""
        text = text.strip()
        if not text:
            raise PreconditionError("empty supernatural number")
        if text.isdigit():
            return cls(_factorize(int(text)))
        factors: dict = {}
        for token in text.split("*"):
            token = token.strip()
            if not token:
                raise PreconditionError(f"malformed supernatural number {text!r}")
            base, _, exp = token.partition("^")
            if not base.isdigit():
                raise PreconditionError(f"malformed prime {base!r}")
            p = int(base)
            if exp == "":
                e: int | float = 1
            elif exp.lower() in ("inf", "infinity"):
                e = INFINITY
            elif exp.isdigit():
                e = int(exp)
            else:
                raise PreconditionError(f"malformed exponent {exp!r}")
            prev = factors.get(p, 0)
            factors[p] = INFINITY if (prev == INFINITY or e == INFINITY) else prev + e
        return cls(factors)

    @property
    def is_finite(self) -> bool:
        return all(e != INFINITY for e in self.factors.values())

    def __str__(self) -> str:
        if not self.factors:
            return "1"
        parts = []
        for p in sorted(self.factors):
            e = self.factors[p]
            if e == 1:
                parts.append(str(p))
            elif e == INFINITY:
                parts.append(f"{p}^inf")
            else:
                parts.append(f"{p}^{e}")
        return "*".join(parts)


@dataclass
class BezoutPair:
    """Natural witness (c, d) of k*c - m*d = 1, with c minimal."""

    c: int
    d: int
    k: int
    m: int

    def __post_init__(self):
        if self.k * self.c - self.m * self.d != 1:
            raise PreconditionError(
                f"{self.k}*{self.c} - {self.m}*{self.d} != 1: not a Bezout pair"
            )


def min_coprime(m: int) -> int:
    """Least k >= 3 coprime to m."""
    if m < 1:
        raise PreconditionError("m must be a natural number >= 1")
    k = 3
    while math.gcd(k, m) != 1:
        k += 1
    return k


def bezout_natural(k: int, m: int) -> BezoutPair:
    """Minimal natural solution of k*c - m*d = 1 for coprime k, m.

    Any integer solution shifts by multiples of (m, k); the representative
    with c in [1, m] is the minimal natural one.  For k >= 2 the matching
    d is automatically >= 1.
    """
    if k < 1 or m < 1:
        raise PreconditionError("k and m must be natural numbers >= 1")
    if math.gcd(k, m) != 1:
        raise PreconditionError(f"gcd({k}, {m}) != 1: no Bezout pair with k*c - m*d = 1")
    s = pow(k, -1, m)  # k*s = 1 mod m, s in [0, m-1]
    c = s if s >= 1 else s + m
    d = (k * c - 1) // m
    return BezoutPair(c=c, d=d, k=k, m=m)


def pgen_cuntz(n):
    """Projection-generation number of the Cuntz family, by torsion order n-1.

    Returns inf for n = inf (K_0 = Z admits no solution of k*a = 1 with
    k >= 2), else the least k >= 3 coprime to n - 1.
    """
    if n == INFINITY:
        return INFINITY
    if not isinstance(n, int) or n <= 1:
        raise PreconditionError("n must be an integer >= 2 or inf")
    return min_coprime(n - 1)


def supernatural_divisible(q: SupernaturalNumber, y: int) -> bool:
    """Whether y divides q: every prime power in y is dominated by q."""
    if y < 1:
        raise PreconditionError("y must be a natural number >= 1")
    if y == 1:
        return True
    return all(q.factors.get(p, 0) >= e for p, e in _factorize(y).items())


def pgen_uhf(q: SupernaturalNumber):
    """Least n >= 3 dividing q, or inf when no such divisor exists.

    Any divisor >= 3 either contains an odd prime of q's support or is a
    power of two at least 4, so the minimum is decided directly from the
    factorization:  min(smallest odd prime of the support, 4 if 2^2 | q).
    """
    if not q.factors:
        raise PreconditionError("q must be nontrivial (at least one prime factor)")
    candidates = []
    odd = [p for p in q.factors if p != 2]
    if odd:
        candidates.append(min(odd))
    if q.factors.get(2, 0) >= 2:
        candidates.append(4)
    if not candidates:
        return INFINITY
    return min(candidates)


@dataclass
class KZeroModel:
    """A K_0 group together with the distinguished class of the unit."""

    kind: str  # "integers" | "cyclic" | "localized"
    m: int | None = None
    q: SupernaturalNumber | None = None
    unit_class: int = 1

    def __post_init__(self):
        if self.kind == "cyclic":
            if self.m is None or self.m < 1:
                raise PreconditionError("cyclic model needs order m >= 1")
        elif self.kind == "localized":
            if self.q is None:
                raise PreconditionError("localized model needs a supernatural number")
        elif self.kind != "integers":
            raise PreconditionError(f"unsupported K0 model kind {self.kind!r}")

    @classmethod
    def integers(cls, unit_class: int = 1) -> "KZeroModel":
        return cls(kind="integers", unit_class=unit_class)

    @classmethod
    def cyclic(cls, m: int, unit_class: int = 1) -> "KZeroModel":
        return cls(kind="cyclic", m=m, unit_class=unit_class)

    @classmethod
    def localized(cls, q: SupernaturalNumber, unit_class: int = 1) -> "KZeroModel":
        return cls(kind="localized", q=q, unit_class=unit_class)


def k_divisibility_obstruction(model: KZeroModel, k: int) -> bool:
    """Whether some class a solves k*a = [1]; necessary for a k-family.

    integers: k must divide the unit class.  cyclic(m): the congruence
    k*a = u (mod m) is solvable iff gcd(k, m) divides u.  localized(q):
    solvable iff k/gcd(k, u) divides q.
    """
    if k < 2:
        raise PreconditionError("k must be >= 2")
    if model.kind == "integers":
        return model.unit_class % k == 0
    if model.kind == "cyclic":
        return model.unit_class % math.gcd(k, model.m) == 0
    if model.kind == "localized":
        reduced = k // math.gcd(k, model.unit_class)
        return reduced == 1 or supernatural_divisible(model.q, reduced)
    raise PreconditionError(f"unsupported K0 model kind {model.kind!r}")


@dataclass
class PgenBoundReport:
    """Lower/upper bounds for a family descriptor, with the formula used."""

    family: str
    parameter: str
    lower: int
    upper: object
    exact: object
    formula: str
    notes: list = field(default_factory=list)


def pgen_bound_report(kind: str, value) -> PgenBoundReport:
    """Aggregate bounds and exact values for cuntz(n) | uhf(q) | torsion(m)."""
    if kind == "cuntz":
        exact = pgen_cuntz(value)
        notes = []
        if exact == INFINITY:
            formula = "K0 = Z: k*a = 1 has no solution for k >= 2"
        else:
            formula = "min{k >= 3 : gcd(k, n-1) = 1}"
            pair = bezout_natural(exact, value - 1)
            notes.append(
                f"witness {pair.k}*{pair.c} - {pair.m}*{pair.d} = 1"
            )
        return PgenBoundReport(
            family="cuntz",
            parameter=str(value),
            lower=3,
            upper=exact,
            exact=exact,
            formula=formula,
            notes=notes,
        )
    if kind == "uhf":
        if not isinstance(value, SupernaturalNumber):
            raise PreconditionError("uhf descriptor needs a supernatural number")
        exact = pgen_uhf(value)
        notes = []
        if exact == INFINITY:
            notes.append(
                "finite factorization with no divisor >= 3; "
                "no generating family of any size k >= 3 exists"
            )
        return PgenBoundReport(
            family="uhf",
            parameter=str(value),
            lower=3,
            upper=exact,
            exact=exact,
            formula="min{n >= 3 : n divides q}",
            notes=notes,
        )
    if kind == "torsion":
        m = value
        if not isinstance(m, int) or m < 1:
            raise PreconditionError("torsion descriptor needs the order m >= 1")
        upper = min_coprime(m)
        exact = 3 if upper == 3 else None
        pair = bezout_natural(upper, m)
        notes = [f"witness {pair.k}*{pair.c} - {pair.m}*{pair.d} = 1"]
        if exact is None:
            notes.append(
                "coprimality gives only the upper bound; "
                "the exact value lies in the reported interval"
            )
        return PgenBoundReport(
            family="torsion",
            parameter=str(m),
            lower=3,
            upper=upper,
            exact=exact,
            formula="min{k >= 3 : gcd(k, m) = 1}",
            notes=notes,
        )
    raise PreconditionError(f"unknown family descriptor {kind!r}")
