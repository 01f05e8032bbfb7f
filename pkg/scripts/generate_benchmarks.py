"""Regenerate the bundled benchmark instances.

Uniform random 3-SAT families follow the SATLIB uf recipe: each clause has
three distinct variables chosen uniformly, each negated with probability
1/2, and only satisfiable formulas are kept. The 5SAT/7SAT files are
uniform random instances at the sizes and ratios of the 2018 SAT
Competition random track. Needs ``python-sat`` (dev dependency only).

    python scripts/generate_benchmarks.py
"""

from pathlib import Path

import numpy as np
from pysat.solvers import Minisat22

OUT = Path(__file__).resolve().parents[1] / "src" / "hoim" / "data"

FAMILIES = {  # name: (n, m, count, seed)
    "uf20-91": (20, 91, 16, 2091),
    "uf50-218": (50, 218, 16, 50218),
    "uf100-430": (100, 430, 16, 100430),
    "uf250-1065": (250, 1065, 16, 2501065),
}
KSAT = {  # name: (k, n, m, seed)
    "unif-k5-r21.117-v250-c5279": (5, 250, 5279, 5),
    "unif-k7-r87.79-v120-c10535": (7, 120, 10535, 7),
}


def random_ksat(rng, k, n, m):
    clauses = []
    for _ in range(m):
        vars_ = rng.choice(n, size=k, replace=False) + 1
        signs = np.where(rng.random(k) < 0.5, -1, 1)
        clauses.append([int(v) for v in vars_ * signs])
    return clauses


def write(path, n, clauses, comment):
    with open(path, "w") as fh:
        for line in comment:
            fh.write(f"c {line}\n")
        fh.write(f"p cnf {n} {len(clauses)}\n")
        for c in clauses:
            fh.write(" ".join(map(str, c)) + " 0\n")


def main():
    for family, (n, m, count, seed) in FAMILIES.items():
        d = OUT / family
        d.mkdir(parents=True, exist_ok=True)
        rng = np.random.default_rng(seed)
        made = 0
        tried = 0
        while made < count:
            tried += 1
            clauses = random_ksat(rng, 3, n, m)
            with Minisat22(bootstrap_with=clauses) as s:
                if not s.solve():
                    continue
            made += 1
            prefix = family.split("-")[0]
            write(d / f"{prefix}-{made:02d}.cnf", n, clauses,
                  [f"uniform random 3-SAT, n={n}, m={m}, satisfiable (forced by filtering)",
                   f"generator seed {seed}, candidate {tried}"])
        print(family, made, "kept of", tried)

    d = OUT / "ksat"
    d.mkdir(parents=True, exist_ok=True)
    for name, (k, n, m, seed) in KSAT.items():
        clauses = random_ksat(np.random.default_rng(seed), k, n, m)
        write(d / f"{name}.cnf", n, clauses, [f"uniform random {k}-SAT, n={n}, m={m}, seed {seed}"])
        print(name)


if __name__ == "__main__":
    main()
