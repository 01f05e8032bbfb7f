"""Bundled benchmark instances.

The ``uf*`` families are uniform random satisfiable 3-SAT instances
generated with the SATLIB recipe (see ``scripts/generate_benchmarks.py``),
not the SATLIB files themselves. Point ``HOIM_SATLIB_DIR`` at a directory
holding the real ``uf20-91/uf20-01.cnf``-style layout to use those instead.
"""

from __future__ import annotations

import os
from importlib import resources
from pathlib import Path

from .cnf import CnfFormula, read_dimacs

FAMILIES = ("uf20-91", "uf50-218", "uf100-430", "uf250-1065")
KSAT = {5: "unif-k5-r21.117-v250-c5279", 7: "unif-k7-r87.79-v120-c10535"}


def data_dir() -> Path:
    return Path(str(resources.files("hoim") / "data"))


def family_paths(family: str, count: int = 16) -> list[Path]:
    """Paths of the first ``count`` instances of a family, e.g. ``uf20-91``."""
    prefix = family.split("-")[0]
    root = os.environ.get("HOIM_SATLIB_DIR")
    base = Path(root) / family if root else data_dir() / family
    paths = [base / f"{prefix}-{i:02d}.cnf" for i in range(1, count + 1)]
    missing = [p for p in paths if not p.exists()]
    if missing:
        raise FileNotFoundError(f"missing benchmark files, e.g. {missing[0]}")
    return paths


def load_family(family: str, count: int = 16) -> list[tuple[str, CnfFormula]]:
    return [(p.stem, read_dimacs(p)) for p in family_paths(family, count)]


def ksat_path(k: int) -> Path:
    return data_dir() / "ksat" / f"{KSAT[k]}.cnf"
