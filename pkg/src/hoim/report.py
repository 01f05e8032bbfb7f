"""Experiment tables and figures: results versus problem size and versus annealing slope."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .cnf import CnfFormula  # noqa: E402
from .solver import HIGHER, TrialConfig, run_batch  # noqa: E402

SIZE_FIELDS = ("order", "n", "instances", "trials_per_instance", "mean_energy", "std_energy", "mean_frac",
               "std_frac", "all_sat_prob", "mean_tts95", "std_tts95")
SLOPE_FIELDS = ("order", "t_end", "slope", "instances", "trials_per_instance", "mean_frac", "std_frac",
                "all_sat_prob", "mean_tts95", "std_tts95", "tts_reached")


def _agg_row(agg, fields) -> dict:
    doc = agg.to_json()
    return {k: doc[k] for k in fields if k in doc}


def group_by_size(formulas: Sequence[CnfFormula]) -> dict[int, list[CnfFormula]]:
    groups = defaultdict(list)
    for f in formulas:
        groups[f.num_vars].append(f)
    return dict(sorted(groups.items()))


def size_table(formulas: Sequence[CnfFormula], config: TrialConfig, orders: Sequence[str], trials: int,
               workers: int = 1) -> list[dict]:
    """Aggregates per (order, number of variables)."""
    rows = []
    for order in orders:
        cfg = config.replace(machine=order)
        for n, group in group_by_size(formulas).items():
            rep = run_batch(group, cfg, trials, workers)
            rows.append({"order": order, "n": n, "instances": len(group), "trials_per_instance": trials,
                         **_agg_row(rep.overall, SIZE_FIELDS)})
    return rows


def slope_table(formulas: Sequence[CnfFormula], config: TrialConfig, t_ends: Sequence[float], trials: int,
                workers: int = 1) -> list[dict]:
    """Aggregates per annealing duration; slope is ``q_max / t_end``."""
    rows = []
    for t_end in t_ends:
        cfg = config.replace(t_end=float(t_end))
        rep = run_batch(formulas, cfg, trials, workers)
        rows.append({"order": cfg.machine, "t_end": float(t_end), "slope": cfg.params.q_max / float(t_end),
                     "instances": len(formulas), "trials_per_instance": trials,
                     **_agg_row(rep.overall, SLOPE_FIELDS)})
    return rows


def write_csv(path, rows: Sequence[dict], fields: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(fields), extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in fields})


def _num(v):
    return float("nan") if v is None else v


def plot_size(rows: Sequence[dict], path) -> None:
    panels = [("mean_energy", "std_energy", "mean final energy"), ("mean_frac", "std_frac", "fraction satisfied"),
              ("all_sat_prob", None, "all-SAT probability")]
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.6))
    for ax, (key, err, label) in zip(axes, panels):
        for order in dict.fromkeys(r["order"] for r in rows):
            sub = [r for r in rows if r["order"] == order]
            xs = [r["n"] for r in sub]
            ys = [_num(r[key]) for r in sub]
            es = [_num(r[err]) for r in sub] if err else None
            ax.errorbar(xs, ys, yerr=es, marker="o", capsize=3, label=order)
        ax.set_xlabel("variables")
        ax.set_ylabel(label)
    axes[0].legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_slope(rows: Sequence[dict], path) -> None:
    fig, ax = plt.subplots(figsize=(4.5, 3.6))
    rows = sorted(rows, key=lambda r: r["slope"])
    ax.errorbar([r["slope"] for r in rows], [_num(r["mean_tts95"]) for r in rows],
                yerr=[_num(r["std_tts95"]) for r in rows], marker="o", capsize=3)
    ax.set_xscale("log")
    ax.set_xlabel("annealing slope q_max / t_end")
    ax.set_ylabel("TTS95 (cycles)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(out_dir, formulas: Sequence[CnfFormula], config: TrialConfig, trials: int,
                 orders: Sequence[str] = (HIGHER,), t_ends: Sequence[float] = (), workers: int = 1,
                 figures: bool = True) -> list[Path]:
    """Write ``size.csv`` (and ``slope.csv`` when ``t_ends`` is given) plus PNG figures.

    The slope sweep runs on the smallest problem size only.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    rows = size_table(formulas, config, orders, trials, workers)
    write_csv(out / "size.csv", rows, SIZE_FIELDS)
    written.append(out / "size.csv")
    if figures:
        plot_size(rows, out / "size.png")
        written.append(out / "size.png")
    if t_ends:
        smallest = next(iter(group_by_size(formulas).values()))
        srows = slope_table(smallest, config, t_ends, trials, workers)
        write_csv(out / "slope.csv", srows, SLOPE_FIELDS)
        written.append(out / "slope.csv")
        if figures:
            plot_slope(srows, out / "slope.png")
            written.append(out / "slope.png")
    return written
