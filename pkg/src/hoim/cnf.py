"""DIMACS CNF/WCNF reading and writing, and the kSAT -> 3SAT reduction."""

from __future__ import annotations

import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union


class DimacsError(ValueError):
    """Malformed DIMACS input. ``line`` is 1-based, or None for document-level errors."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class Literal:
    variable: int
    negated: bool = False

    def __post_init__(self):
        if self.variable < 1:
            raise ValueError(f"variable index must be >= 1, got {self.variable}")

    @classmethod
    def from_int(cls, lit: int) -> "Literal":
        return cls(abs(lit), lit < 0)

    def __int__(self) -> int:
        return -self.variable if self.negated else self.variable

    def __neg__(self) -> "Literal":
        return Literal(self.variable, not self.negated)


@dataclass(frozen=True)
class Clause:
    literals: tuple[Literal, ...]
    weight: float = 1.0

    def __post_init__(self):
        if not self.literals:
            raise ValueError("empty clause")
        if not self.weight > 0:
            raise ValueError(f"clause weight must be positive, got {self.weight}")
        if len({lit.variable for lit in self.literals}) != len(self.literals):
            seen = set()
            for lit in self.literals:
                if lit.variable in seen:
                    raise ValueError(f"variable {lit.variable} occurs twice in one clause")
                seen.add(lit.variable)

    @classmethod
    def _trusted(cls, literals: tuple, weight: float = 1.0) -> "Clause":
        # skips validation; only for clauses that are valid by construction
        clause = object.__new__(cls)
        object.__setattr__(clause, "literals", literals)
        object.__setattr__(clause, "weight", weight)
        return clause

    @classmethod
    def from_ints(cls, lits: Iterable[int], weight: float = 1.0) -> "Clause":
        return cls(tuple(Literal.from_int(int(v)) for v in lits), weight)

    def ints(self) -> list[int]:
        return [int(lit) for lit in self.literals]

    @property
    def variables(self) -> list[int]:
        return [lit.variable for lit in self.literals]

    def __len__(self) -> int:
        return len(self.literals)


@dataclass(frozen=True)
class CnfFormula:
    num_vars: int
    clauses: tuple[Clause, ...]
    weighted: bool = False
    top: float | None = None

    def __post_init__(self):
        if not self.clauses:
            raise ValueError("formula has no clauses")
        top_var = max(lit.variable for clause in self.clauses for lit in clause.literals)
        if top_var > self.num_vars:
            raise ValueError(f"variable {top_var} exceeds num_vars={self.num_vars}")

    @classmethod
    def from_lists(cls, num_vars: int, clauses: Sequence[Sequence[int]],
                   weights: Sequence[float] | None = None) -> "CnfFormula":
        if weights is None:
            return cls(num_vars, tuple(Clause.from_ints(c) for c in clauses))
        return cls(num_vars, tuple(Clause.from_ints(c, w) for c, w in zip(clauses, weights, strict=True)),
                   weighted=True)

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)

    @property
    def unit_weights(self) -> bool:
        return all(c.weight == 1 for c in self.clauses)

    def is_satisfied_by(self, assignment: Sequence[bool]) -> bool:
        """``assignment[i]`` is the truth value of variable ``i + 1``."""
        return all(any(assignment[l.variable - 1] != l.negated for l in c.literals) for c in self.clauses)


@dataclass(frozen=True)
class ReductionMap:
    original_vars: int
    aux_vars: int
    clause_provenance: tuple[int, ...]

    def to_json(self) -> dict:
        return {"original_vars": self.original_vars, "aux_vars": self.aux_vars,
                "clause_provenance": list(self.clause_provenance)}


@dataclass(frozen=True)
class InstanceStats:
    num_vars: int
    num_clauses: int
    k_histogram: dict[int, int] = field(default_factory=dict)
    max_k: int = 0
    num_literals: int = 0


def _parse_number(tok: str, lineno: int, what: str) -> float:
    try:
        return int(tok)
    except ValueError:
        try:
            return float(tok)
        except ValueError:
            raise DimacsError(f"bad {what} {tok!r}", lineno) from None


def parse_dimacs(text: Union[str, bytes]) -> CnfFormula:
    """Parse a DIMACS CNF (``p cnf n m``) or WCNF (``p wcnf n m [top]``) document.

    Clauses may span lines; each is terminated by ``0``. A ``%`` line (SATLIB
    trailer) ends the clause section.
    """
    if isinstance(text, bytes):
        text = text.decode("ascii", errors="replace")

    header = None
    weighted = False
    top = None
    clauses: list[Clause] = []
    current: list[int] = []
    current_weight = None
    clause_start = 0
    interned: dict[int, Literal] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("%"):
            break
        if line.startswith("p"):
            if header is not None:
                raise DimacsError("duplicate problem line", lineno)
            parts = line.split()
            if len(parts) < 4 or parts[1] not in ("cnf", "wcnf"):
                raise DimacsError(f"malformed header {line!r}", lineno)
            weighted = parts[1] == "wcnf"
            if len(parts) > (5 if weighted else 4):
                raise DimacsError(f"malformed header {line!r}", lineno)
            try:
                n, m = int(parts[2]), int(parts[3])
            except ValueError:
                raise DimacsError(f"malformed header {line!r}", lineno) from None
            if n < 0 or m < 0:
                raise DimacsError("negative counts in header", lineno)
            if weighted and len(parts) == 5:
                top = _parse_number(parts[4], lineno, "top weight")
            header = (n, m)
            continue
        if header is None:
            raise DimacsError("clause data before problem line", lineno)

        n = header[0]
        for tok in line.split():
            if weighted and current_weight is None:
                current_weight = _parse_number(tok, lineno, "weight")
                if not current_weight > 0:
                    raise DimacsError(f"non-positive clause weight {tok}", lineno)
                clause_start = lineno
                continue
            try:
                lit = int(tok)
            except ValueError:
                raise DimacsError(f"bad literal {tok!r}", lineno) from None
            if not current:
                clause_start = clause_start if weighted else lineno
            if lit == 0:
                if not current:
                    raise DimacsError("empty clause", lineno)
                vars_ = [abs(v) for v in current]
                if len(set(vars_)) != len(vars_):
                    raise DimacsError("duplicate or complementary literal in clause", clause_start)
                lits = tuple(interned.get(v) or interned.setdefault(v, Literal.from_int(v)) for v in current)
                clauses.append(Clause._trusted(lits, current_weight if weighted else 1.0))
                current = []
                current_weight = None
                continue
            if abs(lit) > n:
                raise DimacsError(f"literal {lit} exceeds declared variable count {n}", lineno)
            current.append(lit)

    if header is None:
        raise DimacsError("missing problem line")
    if current or current_weight is not None:
        raise DimacsError("last clause is not 0-terminated", clause_start)
    n, m = header
    if not clauses:
        raise DimacsError("formula has zero clauses")
    if len(clauses) != m:
        raise DimacsError(f"header declares {m} clauses, found {len(clauses)}")
    return CnfFormula(n, tuple(clauses), weighted=weighted, top=top)


def read_dimacs(path: Union[str, os.PathLike]) -> CnfFormula:
    with open(path, "rb") as fh:
        return parse_dimacs(fh.read())


def _fmt_weight(w: float) -> str:
    return str(int(w)) if float(w).is_integer() else repr(float(w))


def write_dimacs(formula: CnfFormula) -> bytes:
    """Canonical DIMACS text: header, then one 0-terminated clause per line."""
    lines = []
    if formula.weighted:
        head = f"p wcnf {formula.num_vars} {formula.num_clauses}"
        if formula.top is not None:
            head += " " + _fmt_weight(formula.top)
        lines.append(head)
        for c in formula.clauses:
            lines.append(" ".join([_fmt_weight(c.weight), *map(str, c.ints()), "0"]))
    else:
        lines.append(f"p cnf {formula.num_vars} {formula.num_clauses}")
        for c in formula.clauses:
            lines.append(" ".join([*map(str, c.ints()), "0"]))
    return ("\n".join(lines) + "\n").encode("ascii")


def reduce_to_3sat(formula: CnfFormula) -> tuple[CnfFormula, ReductionMap]:
    """Split every clause longer than 3 literals by chaining fresh auxiliaries.

    Each round pairs the clause's literals left to right, emitting
    ``(a or b or not y)`` per pair; the residual clause is the unpaired
    literal (if any) followed by the new ``y``s. Rounds repeat until the
    residual has at most 3 literals. A 5-clause gives 3 clauses / 2
    auxiliaries and a 7-clause gives 6 clauses / 5 auxiliaries.
    """
    if not formula.unit_weights:
        raise ValueError("reduce_to_3sat does not support weighted clauses")

    next_var = formula.num_vars + 1
    out: list[Clause] = []
    provenance: list[int] = []
    for idx, clause in enumerate(formula.clauses):
        lits = list(clause.literals)
        while len(lits) > 3:
            residual: list[Literal] = []
            fresh: list[Literal] = []
            for j in range(0, len(lits) - 1, 2):
                y = Literal(next_var)
                next_var += 1
                out.append(Clause._trusted((lits[j], lits[j + 1], Literal(y.variable, True))))
                provenance.append(idx)
                fresh.append(y)
            if len(lits) % 2:
                residual.append(lits[-1])
            lits = residual + fresh
        out.append(clause if len(lits) == len(clause) else Clause._trusted(tuple(lits)))
        provenance.append(idx)

    total = next_var - 1
    reduced = CnfFormula(total, tuple(out))
    return reduced, ReductionMap(formula.num_vars, total - formula.num_vars, tuple(provenance))


def formula_stats(formula: CnfFormula) -> InstanceStats:
    hist = Counter(len(c) for c in formula.clauses)
    return InstanceStats(
        num_vars=formula.num_vars,
        num_clauses=formula.num_clauses,
        k_histogram=dict(sorted(hist.items())),
        max_k=max(hist),
        num_literals=sum(k * v for k, v in hist.items()),
    )
