"""Second-order (quadratic) Ising models from 3SAT energies.

Each 3-literal clause penalty ``(1 - y1)(1 - y2)(1 - y3)`` over literal
values ``y`` is rewritten with one Boolean auxiliary ``w`` as

    1 - sum(y) + sum_{i<j} y_i y_j + w (2 - sum(y))

whose minimum over ``w`` equals the cubic penalty, using
``-y1 y2 y3 = min_w w (2 - y1 - y2 - y3)``. Shorter clauses are already at
most quadratic. Coefficients are kept as exact fractions.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .cnf import Clause, CnfFormula
from .energy import INVALID, HigherOrderEnergy, MonomialPoly, build_energy


@dataclass(frozen=True, eq=False)
class QuadraticModel:
    """``offset + sum_i h_i s_i + sum_{i<j} J_ij s_i s_j`` over bipolar spins.

    Spins ``0..n-1`` are the original variables; auxiliaries follow, and
    ``aux_map`` sends a clause index to its auxiliary spin.
    """

    num_spins: int
    biases_exact: tuple[Fraction, ...]
    couplings: dict[tuple[int, int], Fraction]
    offset: Fraction = Fraction(0)
    aux_map: dict[int, int] = field(default_factory=dict)
    num_original: int | None = None

    def __post_init__(self):
        if len(self.biases_exact) != self.num_spins:
            raise ValueError("bias vector length differs from num_spins")
        for (i, j) in self.couplings:
            if not 0 <= i < j < self.num_spins:
                raise ValueError(f"bad coupling key {(i, j)}")
        if self.num_original is None:
            object.__setattr__(self, "num_original", self.num_spins - len(self.aux_map))
        self._compile()

    def _compile(self):
        n = self.num_spins
        keys = sorted(self.couplings)
        ii = np.array([k[0] for k in keys], dtype=np.intp)
        jj = np.array([k[1] for k in keys], dtype=np.intp)
        vals = np.array([float(self.couplings[k]) for k in keys])
        nbrs: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        for i, j, v in zip(ii, jj, vals):
            nbrs[i].append((j, v))
            nbrs[j].append((i, v))
        width = max((len(x) for x in nbrs), default=0) or 1
        nbr_idx = np.zeros((n, width), dtype=np.intp)
        nbr_val = np.zeros((n, width))
        for i, row in enumerate(nbrs):
            for p, (j, v) in enumerate(row):
                nbr_idx[i, p] = j
                nbr_val[i, p] = v
        object.__setattr__(self, "h", np.array([float(b) for b in self.biases_exact]))
        object.__setattr__(self, "_pairs", (ii, jj, vals))
        object.__setattr__(self, "_nbr", (nbr_idx, nbr_val))

    @property
    def biases(self) -> np.ndarray:
        return self.h

    def _check(self, z):
        z = np.asarray(z)
        if z.shape[-1:] != (self.num_spins,):
            raise ValueError(f"state has length {z.shape[-1:]} but model has {self.num_spins} spins")
        return z

    def evaluate(self, s):
        s = self._check(s)
        ii, jj, vals = self._pairs
        return float(self.offset) + s @ self.h + (s[..., ii] * s[..., jj]) @ vals

    def gradient(self, z):
        z = self._check(z)
        nbr_idx, nbr_val = self._nbr
        return self.h + np.ascontiguousarray(nbr_val * z[..., nbr_idx]).sum(axis=-1)

    def evaluate_exact(self, s: Sequence[int]) -> Fraction:
        total = self.offset + sum(b * int(s[i]) for i, b in enumerate(self.biases_exact) if b)
        for (i, j), v in self.couplings.items():
            total += v * int(s[i]) * int(s[j])
        return total

    def min_over_aux(self, s_orig: np.ndarray) -> np.ndarray:
        """Energy minimised over auxiliary spins, for original-spin states ``(..., n_orig)``.

        Auxiliaries never couple to each other, so each one independently
        takes the sign opposite to its local field.
        """
        s_orig = np.asarray(s_orig, dtype=float)
        n0 = self.num_original
        full = np.concatenate([s_orig, np.zeros(s_orig.shape[:-1] + (self.num_spins - n0,))], axis=-1)
        base = self.evaluate(full)
        if self.num_spins == n0:
            return base
        field_ = self.gradient(full)[..., n0:]
        return base - np.abs(field_).sum(axis=-1)

    def to_json(self) -> dict:
        return {
            "spins": self.num_spins,
            "original_spins": self.num_original,
            "offset": float(self.offset),
            "biases": [float(b) for b in self.biases_exact],
            "couplings": [[i, j, float(v)] for (i, j), v in sorted(self.couplings.items())],
            "aux_map": {str(k): v for k, v in sorted(self.aux_map.items())},
        }

    @classmethod
    def from_json(cls, doc: dict | str) -> "QuadraticModel":
        if isinstance(doc, str):
            doc = json.loads(doc)
        return cls(
            num_spins=int(doc["spins"]),
            biases_exact=tuple(Fraction(b) for b in doc["biases"]),
            couplings={(int(i), int(j)): Fraction(v) for i, j, v in doc["couplings"]},
            offset=Fraction(doc.get("offset", 0)),
            aux_map={int(k): int(v) for k, v in doc.get("aux_map", {}).items()},
            num_original=doc.get("original_spins"),
        )

    def to_text(self) -> str:
        """``i j J`` triples, biases as ``i i h``; the offset rides on a comment line."""
        lines = [f"# spins {self.num_spins}", f"# offset {float(self.offset)!r}"]
        for i, b in enumerate(self.biases_exact):
            if b:
                lines.append(f"{i} {i} {float(b)!r}")
        for (i, j), v in sorted(self.couplings.items()):
            lines.append(f"{i} {j} {float(v)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "QuadraticModel":
        n = None
        offset = Fraction(0)
        biases: dict[int, Fraction] = {}
        couplings: dict[tuple[int, int], Fraction] = {}
        for line in text.splitlines():
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "#":
                if parts[1:2] == ["spins"]:
                    n = int(parts[2])
                elif parts[1:2] == ["offset"]:
                    offset = Fraction(parts[2])
                continue
            i, j, v = int(parts[0]), int(parts[1]), Fraction(parts[2])
            if i == j:
                biases[i] = biases.get(i, Fraction(0)) + v
            else:
                key = (min(i, j), max(i, j))
                couplings[key] = couplings.get(key, Fraction(0)) + v
        if n is None:
            n = 1 + max([*biases, *(j for _, j in couplings)], default=-1)
        return cls(n, tuple(biases.get(i, Fraction(0)) for i in range(n)), couplings, offset)


def _literal_value(num_spins: int, var: int, negated: bool) -> MonomialPoly:
    # literal truth y = (1 + sigma s) / 2 with sigma = -1 for a negated literal
    sigma = -1 if negated else 1
    return MonomialPoly(num_spins, {(): Fraction(1, 2), (var,): Fraction(sigma, 2)})


def clause_gadget(clause: Clause, num_spins: int, aux: int | None) -> MonomialPoly:
    """Spin polynomial of one clause's penalty; ``aux`` is required for 3 literals."""
    ys = [_literal_value(num_spins, l.variable - 1, l.negated) for l in clause.literals]
    w = Fraction(clause.weight)
    if len(ys) <= 2:
        poly = MonomialPoly.constant(num_spins, 1)
        for y in ys:
            poly = poly * (1 - y)
        return poly * w
    if len(ys) != 3:
        raise ValueError("clause_gadget handles at most 3 literals")
    if aux is None:
        raise ValueError("3-literal clause needs an auxiliary spin")
    wa = MonomialPoly(num_spins, {(): Fraction(1, 2), (aux,): Fraction(1, 2)})
    sum_y = ys[0] + ys[1] + ys[2]
    pairs = ys[0] * ys[1] + ys[0] * ys[2] + ys[1] * ys[2]
    return (1 - sum_y + pairs + wa * (2 - sum_y)) * w


def _model_from_poly(poly: MonomialPoly, num_spins: int, aux_map: dict[int, int],
                     num_original: int) -> QuadraticModel:
    biases = [Fraction(0)] * num_spins
    couplings: dict[tuple[int, int], Fraction] = {}
    offset = Fraction(0)
    for key, coef in poly.monomials.items():
        if len(key) == 0:
            offset = coef
        elif len(key) == 1:
            biases[key[0]] = coef
        elif len(key) == 2:
            couplings[key] = coef
        else:
            raise AssertionError("gadget produced a term above second order")
    return QuadraticModel(num_spins, tuple(biases), couplings, offset, aux_map, num_original)


def quadratize_3sat(source: CnfFormula | HigherOrderEnergy) -> QuadraticModel:
    """Quadratic model with one auxiliary spin per 3-literal clause.

    Accepts the formula or its exponent-1 clause energy. Spin ``n + a`` is
    the auxiliary of the ``a``-th 3-literal clause.
    """
    if isinstance(source, HigherOrderEnergy):
        formula = formula_from_energy(source)
    else:
        formula = source
    if any(len(c) > 3 for c in formula.clauses):
        raise ValueError("quadratize_3sat needs clauses of at most 3 literals; reduce to 3SAT first")

    n = formula.num_vars
    aux_map = {}
    for idx, c in enumerate(formula.clauses):
        if len(c) == 3:
            aux_map[idx] = n + len(aux_map)
    total = n + len(aux_map)

    acc: dict[tuple[int, ...], Fraction] = {}
    for idx, c in enumerate(formula.clauses):
        for key, coef in clause_gadget(c, total, aux_map.get(idx)).monomials.items():
            acc[key] = acc.get(key, Fraction(0)) + coef
    poly = MonomialPoly(total, {k: v for k, v in acc.items() if v})
    return _model_from_poly(poly, total, aux_map, n)


def formula_from_energy(energy: HigherOrderEnergy) -> CnfFormula:
    """Recover the clause list behind an exponent-1 clause energy."""
    if energy.exponent != 1:
        raise ValueError("quadratization needs exponent 1")
    if energy.constant != 0 or any(t.polarity != INVALID for t in energy.terms):
        raise ValueError("energy is not a plain clause energy")
    clauses = []
    for t in energy.terms:
        # term indicates the falsifying state: sign -1 <=> positive literal
        lits = [(v + 1) if c == -1 else -(v + 1) for v, c in zip(t.variables, t.signs)]
        clauses.append(Clause.from_ints(lits, t.weight))
    return CnfFormula(energy.num_vars, tuple(clauses), weighted=any(t.weight != 1 for t in energy.terms))


@dataclass(frozen=True)
class VerificationReport:
    ok: bool
    marginals_match: bool
    gap: Fraction | None
    mismatches: tuple[tuple[tuple[int, ...], Fraction, Fraction], ...] = ()
    detail: str = ""


def verify_gadget(clause: Clause, model: QuadraticModel) -> VerificationReport:
    """Exhaustively check a single-clause model against the clause penalty.

    For every assignment of the clause's variables the minimum over the
    model's remaining spins must equal the clause's higher-order energy, and
    the lowest unsatisfied energy must sit exactly one clause weight above
    the satisfied minimum.
    """
    if len(clause) > 3:
        return VerificationReport(False, False, None, detail="clause has more than 3 literals")
    cvars = [l.variable - 1 for l in clause.literals]
    others = sorted(set(range(model.num_spins)) - set(cvars))
    if len(others) > 16:
        return VerificationReport(False, False, None, detail="too many free spins to enumerate")
    energy = build_energy(CnfFormula(max(cvars) + 1, (clause,)))
    term = energy.terms[0]

    mismatches = []
    sat_vals, unsat_vals = [], []
    s = [1] * model.num_spins
    for assign in itertools.product((-1, 1), repeat=len(cvars)):
        for v, a in zip(cvars, assign):
            s[v] = a
        best = None
        for rest in itertools.product((-1, 1), repeat=len(others)):
            for v, a in zip(others, rest):
                s[v] = a
            e = model.evaluate_exact(s)
            best = e if best is None or e < best else best
        target = Fraction(clause.weight) * int(all(a == c for a, c in zip(assign, term.signs)))
        if best != target:
            mismatches.append((assign, best, target))
        (unsat_vals if target else sat_vals).append(best)

    gap = min(unsat_vals) - min(sat_vals) if sat_vals and unsat_vals else None
    marginals_ok = not mismatches
    gap_ok = gap == Fraction(clause.weight)
    detail = []
    if not marginals_ok:
        detail.append(f"{len(mismatches)} min-marginal mismatches")
    if not gap_ok:
        detail.append(f"gap {gap} != {clause.weight}")
    return VerificationReport(marginals_ok and gap_ok, marginals_ok, gap, tuple(mismatches), "; ".join(detail))


def quadratic_evaluate(model: QuadraticModel, state):
    return model.evaluate(state)


def quadratic_gradient(model: QuadraticModel, z):
    return model.gradient(z)
