import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hoim.benchmarks import family_paths, ksat_path, load_family
from hoim.cnf import (Clause, CnfFormula, DimacsError, formula_stats, parse_dimacs, read_dimacs,
                      reduce_to_3sat, write_dimacs)


def brute_force_sat(formula: CnfFormula) -> bool:
    """Vectorised enumeration of all 2**n assignments."""
    n = formula.num_vars
    bits = ((np.arange(1 << n)[:, None] >> np.arange(n)) & 1).astype(bool)
    ok = np.ones(len(bits), dtype=bool)
    for c in formula.clauses:
        sat = np.zeros(len(bits), dtype=bool)
        for lit in c.literals:
            col = bits[:, lit.variable - 1]
            sat |= ~col if lit.negated else col
        ok &= sat
        if not ok.any():
            return False
    return bool(ok.any())


def random_formula(rng, n, m, kmax):
    clauses = []
    for _ in range(m):
        k = int(rng.integers(1, kmax + 1))
        vs = rng.choice(n, size=min(k, n), replace=False) + 1
        clauses.append([int(v) if rng.random() < 0.5 else -int(v) for v in vs])
    return CnfFormula.from_lists(n, clauses)


class TestParse:
    def test_minimal(self):
        f = parse_dimacs("p cnf 2 1\n1 -2 0")
        assert f.num_vars == 2
        assert [c.ints() for c in f.clauses] == [[1, -2]]
        assert f.clauses[0].weight == 1

    def test_two_clauses_and_comments(self):
        f = parse_dimacs(b"c hello\np cnf 3 2\n1 2 3 0\nc mid\n-1 -2 0\n")
        assert [c.ints() for c in f.clauses] == [[1, 2, 3], [-1, -2]]

    def test_multiline_clause_and_satlib_trailer(self):
        f = parse_dimacs("p cnf 3 2\n1 2\n3 0 -1\n-2 0\n%\n0\n")
        assert [c.ints() for c in f.clauses] == [[1, 2, 3], [-1, -2]]

    def test_wcnf(self):
        f = parse_dimacs("p wcnf 2 2 10\n2 1 -2 0\n1 2 0\n")
        assert f.weighted and f.top == 10
        assert [c.weight for c in f.clauses] == [2, 1]

    @pytest.mark.parametrize("text, line", [
        ("p cnf x 1\n1 0", 1),
        ("p cnf 2 1\n1 3 0", 2),
        ("p cnf 2 1\n1 -2", 2),
        ("p cnf 2 1\n1 -1 0", 2),
        ("p cnf 2 1\n1 1 0", 2),
        ("p cnf 2 1\n1 0 0", 2),
        ("p foo 2 1\n1 0", 1),
    ])
    def test_errors_carry_line_numbers(self, text, line):
        with pytest.raises(DimacsError) as exc:
            parse_dimacs(text)
        assert exc.value.line == line

    def test_zero_clauses(self):
        with pytest.raises(DimacsError):
            parse_dimacs("p cnf 2 0\n")

    def test_clause_count_mismatch(self):
        with pytest.raises(DimacsError):
            parse_dimacs("p cnf 2 2\n1 0\n")

    def test_missing_header(self):
        with pytest.raises(DimacsError):
            parse_dimacs("1 2 0\n")

    def test_uf20_01(self):
        f = read_dimacs(family_paths("uf20-91", 1)[0])
        assert f.num_vars == 20 and f.num_clauses == 91


class TestWrite:
    def test_minimal(self):
        assert write_dimacs(CnfFormula.from_lists(2, [[1, -2]])) == b"p cnf 2 1\n1 -2 0\n"

    def test_weighted(self):
        f = CnfFormula.from_lists(2, [[1, -2], [2]], weights=[2, 1])
        assert write_dimacs(f) == b"p wcnf 2 2\n2 1 -2 0\n1 2 0\n"
        assert parse_dimacs(write_dimacs(f)) == f

    def test_uf20_round_trip(self):
        for _, f in load_family("uf20-91", 16):
            text = write_dimacs(f)
            g = parse_dimacs(text)
            assert g == f
            assert write_dimacs(g) == text

    @given(st.integers(1, 8), st.lists(st.lists(st.integers(-8, 8).filter(bool), min_size=1, max_size=5),
                                       min_size=1, max_size=10),
           st.booleans())
    @settings(max_examples=100, deadline=None)
    def test_round_trip_property(self, n, raw, weighted):
        clauses = []
        for c in raw:
            seen, lits = set(), []
            for v in c:
                v = (abs(v) - 1) % n + 1 if v > 0 else -((abs(v) - 1) % n + 1)
                if abs(v) not in seen:
                    seen.add(abs(v))
                    lits.append(v)
            clauses.append(lits)
        weights = [1 + i % 3 for i in range(len(clauses))] if weighted else None
        f = CnfFormula.from_lists(n, clauses, weights)
        assert parse_dimacs(write_dimacs(f)) == f


class TestReduce:
    def test_five_clause(self):
        out, rmap = reduce_to_3sat(CnfFormula.from_lists(5, [[1, 2, 3, 4, 5]]))
        assert out.num_clauses == 3 and out.num_vars == 7 and rmap.aux_vars == 2
        assert [c.ints() for c in out.clauses] == [[1, 2, -6], [3, 4, -7], [5, 6, 7]]

    def test_seven_clause_matches_worked_example(self):
        out, rmap = reduce_to_3sat(CnfFormula.from_lists(7, [list(range(1, 8))]))
        assert out.num_clauses == 6 and out.num_vars == 12 and rmap.aux_vars == 5
        # y1..y3 = 8..10, l1, l2 = 11, 12
        assert [c.ints() for c in out.clauses] == [
            [1, 2, -8], [3, 4, -9], [5, 6, -10], [7, 8, -11], [9, 10, -12], [11, 12]]

    def test_pass_through(self):
        f = load_family("uf20-91", 1)[0][1]
        out, rmap = reduce_to_3sat(f)
        assert out == f and rmap.aux_vars == 0
        assert rmap.clause_provenance == tuple(range(91))

    @pytest.mark.parametrize("k", range(4, 13))
    def test_outputs_at_most_three(self, k):
        out, rmap = reduce_to_3sat(CnfFormula.from_lists(k, [list(range(1, k + 1))]))
        assert max(len(c) for c in out.clauses) <= 3
        assert out.num_vars == k + rmap.aux_vars
        assert set(rmap.clause_provenance) == {0}
        assert brute_force_sat(out)

    @pytest.mark.parametrize("k", range(4, 9))
    def test_single_clause_semantics(self, k):
        # x satisfies the clause iff some auxiliary completion satisfies the reduction
        out, _ = reduce_to_3sat(CnfFormula.from_lists(k, [list(range(1, k + 1))]))
        for x in itertools.product([False, True], repeat=k):
            fixed = CnfFormula(out.num_vars, out.clauses + tuple(
                Clause.from_ints([i + 1 if v else -(i + 1)]) for i, v in enumerate(x)))
            assert brute_force_sat(fixed) == any(x)

    def test_equisatisfiable_random(self):
        rng = np.random.default_rng(11)
        seen = {True: 0, False: 0}
        for _ in range(40):
            n = int(rng.integers(3, 9))
            f = random_formula(rng, n, int(rng.integers(3, 3 * n)), 7)
            out, rmap = reduce_to_3sat(f)
            if out.num_vars > 20:
                continue
            assert max(len(c) for c in out.clauses) <= 3
            assert len(rmap.clause_provenance) == out.num_clauses
            a = brute_force_sat(f)
            assert a == brute_force_sat(out)
            seen[a] += 1
        assert seen[True] and seen[False]

    def test_rejects_weighted(self):
        with pytest.raises(ValueError):
            reduce_to_3sat(CnfFormula.from_lists(4, [[1, 2, 3, 4]], weights=[2]))

    def test_ksat_inflation(self):
        for k, lo, hi in [(5, 2.5, 3.5), (7, 5, 7)]:
            f = read_dimacs(ksat_path(k))
            out, _ = reduce_to_3sat(f)
            assert lo <= out.num_clauses / f.num_clauses <= hi


class TestStats:
    def test_uf20(self):
        s = formula_stats(load_family("uf20-91", 1)[0][1])
        assert (s.num_vars, s.num_clauses, s.k_histogram, s.max_k, s.num_literals) == (20, 91, {3: 91}, 3, 273)

    def test_mixed(self):
        s = formula_stats(CnfFormula.from_lists(6, [[1, 2, 3, 4, 5], [-1, 6]]))
        assert s.k_histogram == {2: 1, 5: 1} and s.max_k == 5 and s.num_clauses == 2

    def test_reduced_max_k(self):
        out, _ = reduce_to_3sat(read_dimacs(ksat_path(7)))
        assert formula_stats(out).max_k <= 3


def test_brute_force_oracle_agrees_with_pysat():
    pysat = pytest.importorskip("pysat.solvers")
    rng = np.random.default_rng(3)
    for _ in range(20):
        f = random_formula(rng, 10, 45, 3)
        with pysat.Minisat22(bootstrap_with=[c.ints() for c in f.clauses]) as s:
            assert s.solve() == brute_force_sat(f)
