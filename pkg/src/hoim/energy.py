"""Higher-order Ising energies built from clauses and truth tables.

Spins are bipolar (s = 2x - 1) and 0-based: spin ``i`` is DIMACS variable
``i + 1``. A :class:`ClauseTerm` is the factored product
``prod_i (1 + c_i s_i) / 2``, which is 1 exactly when ``s`` equals the sign
vector ``c`` on the term's variables and 0 at every other bipolar state.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Iterable, Literal as Lit, Sequence

import numpy as np

from .cnf import Clause, CnfFormula

INVALID = "invalid"
VALID = "valid"

Polarity = Lit["invalid", "valid"]
Scheme = Lit["all-to-all", "hub-node"]


@dataclass(frozen=True)
class ClauseTerm:
    """One factored product term.

    ``signs`` is the bipolar state the term indicates. With polarity
    ``invalid`` the term adds ``weight * prod``; with ``valid`` it adds
    ``-weight * prod`` and the owning energy carries ``+weight`` in its constant.
    """

    variables: tuple[int, ...]
    signs: tuple[int, ...]
    weight: float = 1.0
    polarity: Polarity = INVALID

    def __post_init__(self):
        if len(self.variables) != len(self.signs):
            raise ValueError("signs and variables differ in length")
        if len(set(self.variables)) != len(self.variables):
            raise ValueError("term variables must be distinct")
        if any(c not in (-1, 1) for c in self.signs):
            raise ValueError("signs must be +1 or -1")
        if self.polarity not in (INVALID, VALID):
            raise ValueError(f"unknown polarity {self.polarity!r}")

    @property
    def k(self) -> int:
        return len(self.variables)

    def value(self, s):
        """Product value at state ``s`` (indexed by global spin index)."""
        s = np.asarray(s)
        out = 1
        for v, c in zip(self.variables, self.signs):
            out = out * (1 + c * s[..., v]) / 2
        return out


def clause_term_from_clause(clause: Clause) -> ClauseTerm:
    """Term that equals 1 at the clause's single falsifying assignment."""
    # the falsifying state sets every literal false: x_i = 0 for a positive literal -> s_i = -1
    return ClauseTerm(
        variables=tuple(l.variable - 1 for l in clause.literals),
        signs=tuple(1 if l.negated else -1 for l in clause.literals),
        weight=float(clause.weight),
        polarity=INVALID,
    )


def terms_from_truth_table(states: Iterable[Sequence[int]], polarity: Polarity = INVALID,
                           weight: float = 1.0,
                           variables: Sequence[int] | None = None) -> tuple[list[ClauseTerm], float]:
    """Terms for a constraint given by its invalid or valid bipolar states.

    Returns ``(terms, constant)``. For ``invalid`` the constant is 0; for
    ``valid`` it is ``weight``, so the constraint energy is
    ``weight * (1 - sum of valid-state indicators)``.
    """
    states = [tuple(int(v) for v in st) for st in states]
    if not states:
        raise ValueError("no states given")
    k = len(states[0])
    if any(len(st) != k for st in states):
        raise ValueError("states have inconsistent lengths")
    if len(set(states)) != len(states):
        raise ValueError("duplicate states")
    if variables is None:
        variables = tuple(range(k))
    if len(variables) != k:
        raise ValueError("variables and states differ in length")
    terms = [ClauseTerm(tuple(variables), st, float(weight), polarity) for st in states]
    return terms, (float(weight) if polarity == VALID else 0.0)


@dataclass(frozen=True)
class _TermGroup:
    idx: np.ndarray     # (T, k) spin indices
    c: np.ndarray       # (T, k) signs
    coef: np.ndarray    # (T,) signed weight
    weight: np.ndarray  # (T,) unsigned weight


@dataclass(frozen=True, eq=False)
class HigherOrderEnergy:
    """``E(s) = constant + sum_h weight_h * term_h(s) ** exponent`` (signed by polarity).

    ``exponent`` 2 is only defined for invalid-polarity terms, where each
    term is the whole constraint energy of one clause.
    """

    num_vars: int
    terms: tuple[ClauseTerm, ...]
    constant: float = 0.0
    exponent: int = 1
    _groups: tuple[_TermGroup, ...] = field(init=False, repr=False)
    _occ: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.exponent not in (1, 2):
            raise ValueError("exponent must be 1 or 2")
        if self.exponent == 2 and any(t.polarity != INVALID for t in self.terms):
            raise ValueError("exponent 2 requires invalid-polarity (clause) terms")
        for t in self.terms:
            if t.variables and max(t.variables) >= self.num_vars:
                raise ValueError("term variable out of range")
        object.__setattr__(self, "terms", tuple(self.terms))
        self._compile()

    def _compile(self):
        by_k: dict[int, list[int]] = {}
        for pos, t in enumerate(self.terms):
            by_k.setdefault(t.k, []).append(pos)
        groups = []
        flat_vars = []
        for k in sorted(by_k):
            ts = [self.terms[p] for p in by_k[k]]
            idx = np.array([t.variables for t in ts], dtype=np.intp).reshape(len(ts), k)
            c = np.array([t.signs for t in ts], dtype=float).reshape(len(ts), k)
            w = np.array([t.weight for t in ts], dtype=float)
            sgn = np.array([1.0 if t.polarity == INVALID else -1.0 for t in ts])
            groups.append(_TermGroup(idx, c, w * sgn, w))
            flat_vars.append(idx.ravel())
        flat = np.concatenate(flat_vars) if flat_vars else np.zeros(0, dtype=np.intp)
        # occ[i] lists positions of spin i in the flattened contribution vector;
        # position len(flat) is a zero pad
        counts = np.bincount(flat, minlength=self.num_vars)
        width = int(counts.max()) if counts.size and flat.size else 1
        occ = np.full((self.num_vars, max(width, 1)), flat.size, dtype=np.intp)
        fill = np.zeros(self.num_vars, dtype=np.intp)
        for pos, v in enumerate(flat):
            occ[v, fill[v]] = pos
            fill[v] += 1
        object.__setattr__(self, "_groups", tuple(groups))
        object.__setattr__(self, "_occ", occ)
        # group-major position -> original term position
        object.__setattr__(self, "_order", np.array([p for k in sorted(by_k) for p in by_k[k]], dtype=np.intp))

    @property
    def num_spins(self) -> int:
        return self.num_vars

    def _check(self, z):
        z = np.asarray(z)
        if z.shape[-1:] != (self.num_vars,):
            raise ValueError(f"state has length {z.shape[-1:]} but energy has {self.num_vars} spins")
        return z

    def term_values(self, s) -> np.ndarray:
        """Product values of all terms, ``(..., num_terms)``, in term order."""
        s = self._check(s)
        out = np.zeros(s.shape[:-1] + (len(self.terms),), dtype=np.result_type(s, float))
        parts = [np.prod((1 + g.c * s[..., g.idx]) / 2, axis=-1) for g in self._groups]
        if parts:
            out[..., self._order] = np.concatenate(parts, axis=-1)
        return out

    def evaluate(self, s):
        s = self._check(s)
        total = self.constant
        for g in self._groups:
            prod = np.prod((1 + g.c * s[..., g.idx]) / 2, axis=-1)
            if self.exponent == 1:
                total = total + prod @ g.coef
            else:
                total = total + (prod * prod) @ g.weight
        return total

    def gradient(self, z):
        """Formal derivative dE/dz_i, treating each z_i as an independent complex variable."""
        z = self._check(z)
        parts = []
        for g in self._groups:
            f = (1 + g.c * z[..., g.idx]) / 2
            k = f.shape[-1]
            # exclusive prefix/suffix products give every "hole" product in O(k)
            pre = np.ones_like(f)
            suf = np.ones_like(f)
            if k > 1:
                pre[..., 1:] = np.cumprod(f[..., :-1], axis=-1)
                suf[..., :-1] = np.cumprod(f[..., :0:-1], axis=-1)[..., ::-1]
            d = (g.c / 2) * pre * suf
            if self.exponent == 1:
                d = d * g.coef[:, None]
            else:
                prod = pre[..., -1] * f[..., -1]
                d = d * (2 * g.weight * prod)[..., None]
            parts.append(d.reshape(d.shape[:-2] + (-1,)))
        parts.append(np.zeros(z.shape[:-1] + (1,), dtype=np.result_type(z, float)))
        flat = np.concatenate(parts, axis=-1)
        # C order keeps the summation order per row independent of batch shape
        return np.ascontiguousarray(flat[..., self._occ]).sum(axis=-1)


def build_energy(formula: CnfFormula, exponent: int = 1) -> HigherOrderEnergy:
    """One invalid-polarity term per clause, weighted by the clause weight."""
    terms = tuple(clause_term_from_clause(c) for c in formula.clauses)
    return HigherOrderEnergy(formula.num_vars, terms, 0.0, exponent)


def energy_from_terms(num_vars: int, groups: Iterable[tuple[Sequence[ClauseTerm], float]]) -> HigherOrderEnergy:
    """Combine ``(terms, constant)`` pairs from :func:`terms_from_truth_table`."""
    terms: list[ClauseTerm] = []
    const = 0.0
    for ts, c in groups:
        terms.extend(ts)
        const += c
    return HigherOrderEnergy(num_vars, tuple(terms), const, 1)


def evaluate(energy, state):
    return energy.evaluate(state)


def gradient(energy, z):
    return energy.gradient(z)


class MonomialPoly:
    """Multilinear polynomial in bipolar spins with exact rational coefficients.

    Keys are sorted tuples of spin indices; ``()`` is the constant. Products
    reduce ``s_i**2 = 1``.
    """

    def __init__(self, num_vars: int, monomials: dict[tuple[int, ...], Fraction] | None = None):
        self.num_vars = num_vars
        self.monomials: dict[tuple[int, ...], Fraction] = {}
        for key, coef in (monomials or {}).items():
            self._add(tuple(sorted(set(key))), Fraction(coef))

    def _add(self, key, coef):
        val = self.monomials.get(key, Fraction(0)) + coef
        if val:
            self.monomials[key] = val
        else:
            self.monomials.pop(key, None)

    @classmethod
    def constant(cls, num_vars: int, value) -> "MonomialPoly":
        return cls(num_vars, {(): Fraction(value)})

    @classmethod
    def spin(cls, num_vars: int, i: int, coef=1) -> "MonomialPoly":
        return cls(num_vars, {(i,): Fraction(coef)})

    def __add__(self, other):
        if not isinstance(other, MonomialPoly):
            other = MonomialPoly.constant(self.num_vars, other)
        out = MonomialPoly(max(self.num_vars, other.num_vars), self.monomials)
        for key, coef in other.monomials.items():
            out._add(key, coef)
        return out

    __radd__ = __add__

    def __neg__(self):
        return MonomialPoly(self.num_vars, {k: -v for k, v in self.monomials.items()})

    def __sub__(self, other):
        return self + (-other if isinstance(other, MonomialPoly) else -Fraction(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, MonomialPoly):
            other = Fraction(other)
            return MonomialPoly(self.num_vars, {k: v * other for k, v in self.monomials.items()})
        out = MonomialPoly(max(self.num_vars, other.num_vars))
        for k1, v1 in self.monomials.items():
            for k2, v2 in other.monomials.items():
                out._add(tuple(sorted(set(k1) ^ set(k2))), v1 * v2)
        return out

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, MonomialPoly) and self.monomials == other.monomials

    def __repr__(self):
        return f"MonomialPoly({self.num_vars}, {self.monomials!r})"

    @property
    def degree(self) -> int:
        return max((len(k) for k in self.monomials), default=0)

    def evaluate(self, s):
        s = np.asarray(s)
        total = 0
        for key, coef in self.monomials.items():
            term = float(coef)
            for i in key:
                term = term * s[..., i]
            total = total + term
        return total

    def evaluate_exact(self, s: Sequence[int]) -> Fraction:
        total = Fraction(0)
        for key, coef in self.monomials.items():
            total += coef * math.prod(int(s[i]) for i in key)
        return total


def _term_poly(num_vars: int, term: ClauseTerm) -> MonomialPoly:
    # expand prod (1 + c_i s_i)/2 directly: coefficient of subset S is prod_{i in S} c_i / 2^k
    k = term.k
    scale = Fraction(term.weight) / (1 << k) * (1 if term.polarity == INVALID else -1)
    mons = {}
    for r in range(k + 1):
        for pos in itertools.combinations(range(k), r):
            sign = math.prod(term.signs[p] for p in pos)
            mons[tuple(term.variables[p] for p in pos)] = scale * sign
    return MonomialPoly(num_vars, mons)


def term_monomial_count(term: ClauseTerm) -> int:
    """Monomials in a term's expansion before like terms are collected (2**k)."""
    return 1 << term.k


def expand(energy: HigherOrderEnergy) -> MonomialPoly:
    """Collect the factored energy into monomials, dropping cancelled coefficients."""
    if energy.exponent != 1:
        raise ValueError("expand only supports exponent 1")
    poly = MonomialPoly.constant(energy.num_vars, Fraction(energy.constant))
    for t in energy.terms:
        poly = poly + _term_poly(energy.num_vars, t)
    return poly


@dataclass(frozen=True)
class ResourceReport:
    scheme: str
    num_spins: int
    num_connections: int
    num_parameters: int
    max_coefficient_bits: int

    def to_json(self) -> dict:
        return {"scheme": self.scheme, "spins": self.num_spins, "connections": self.num_connections,
                "parameters": self.num_parameters, "coefficient_bits": self.max_coefficient_bits}


def connections_per_term(k: int, scheme: Scheme) -> int:
    """Connections to realise one k-th order interaction (biases need none)."""
    if k < 2:
        return 0
    if scheme == "all-to-all":
        return k * (k - 1)
    if scheme == "hub-node":
        return 2 * k
    raise ValueError(f"unknown scheme {scheme!r}")


def coefficient_bits(values: Iterable) -> int:
    """Bit width of the largest coefficient after scaling all of them to coprime integers."""
    fr = [abs(Fraction(v)) for v in values if v]
    if not fr:
        return 0
    den = reduce(math.lcm, (f.denominator for f in fr))
    ints = [int(f * den) for f in fr]
    g = reduce(math.gcd, ints)
    return (max(ints) // g).bit_length()


def count_resources(model, scheme: Scheme = "hub-node") -> ResourceReport:
    """Spins, connections, parameters and coefficient precision of a model.

    Factored higher-order terms cost ``k(k-1)`` (all-to-all) or ``2k``
    (hub-node) connections and ``k`` parameters each. A quadratic model's
    pairwise couplings are direct bidirectional links (2 connections each)
    under either scheme.
    """
    connections_per_term(2, scheme)  # validates scheme
    if isinstance(model, HigherOrderEnergy):
        conns = sum(connections_per_term(t.k, scheme) for t in model.terms)
        params = sum(t.k for t in model.terms)
        # sign vectors are +-1; weights only add precision when they are not all equal
        bits = max(1, coefficient_bits(t.weight for t in model.terms))
        return ResourceReport(scheme, model.num_vars, conns, params, bits)
    if hasattr(model, "couplings"):
        nz_bias = [b for b in model.biases_exact if b]
        nz_coup = [j for j in model.couplings.values() if j]
        return ResourceReport(scheme, model.num_spins, 2 * len(nz_coup), len(nz_bias) + len(nz_coup),
                              coefficient_bits(nz_bias + nz_coup))
    raise TypeError(f"cannot count resources of {type(model).__name__}")
