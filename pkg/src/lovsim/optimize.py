"""Coil-current tuning: coordinate descent with golden-section line search.

The beam divergence washes out the lattice at the camera; retuning each
coil current trades period against decorrelation, so the currents that
maximize visibility or contrast are generally asymmetric.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError

INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0
INV_PHI_SQ = (3.0 - np.sqrt(5.0)) / 2.0

CURRENT_BOUNDS = (0.0, 10.0)


def golden_section_maximize(fn, lo, hi, tol=1e-3, max_evals=60):
    """Golden-section search for the maximum of a unimodal 1D function.

    Returns (x_best, f_best, n_evals).  f_best is the best *evaluated*
    value, so it never regresses even on non-unimodal objectives.
    """
    if hi <= lo:
        raise ConfigurationError(f"invalid bracket [{lo}, {hi}]")
    evals = 0
    best_x, best_f = None, -np.inf

    def probe(x):
        nonlocal evals, best_x, best_f
        f = fn(x)
        evals += 1
        if f > best_f:
            best_x, best_f = x, f
        return f

    a, b = lo, hi
    c = a + INV_PHI_SQ * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = probe(c), probe(d)
    while (b - a) > tol and evals < max_evals:
        if fc > fd:
            b, d, fd = d, c, fc
            c = a + INV_PHI_SQ * (b - a)
            fc = probe(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = probe(d)
    return best_x, best_f, evals


@dataclass
class OptimizationResult:
    """Best currents found, objective value, per-evaluation trace, flatness flag."""

    currents: List[float]
    objective: float
    initial_objective: float
    trace: List[Tuple[List[float], float]] = field(default_factory=list)
    flat: bool = False
    evaluations: int = 0


def optimize_currents(
    objective: Callable[[Sequence[float]], float],
    initial_currents: Sequence[float],
    free_indices: Sequence[int] = None,
    bounds=CURRENT_BOUNDS,
    rel_tol=1e-3,
    line_tol=0.05,
    max_sweeps=4,
    max_line_evals=40,
) -> OptimizationResult:
    """Maximize objective(currents) by cyclic 1D golden-section searches.

    Sweeps over the free coil indices until the relative objective
    improvement of a full sweep drops below rel_tol.  The returned
    objective is always >= the initial one.  A flat objective (no
    evaluated point improves on the start beyond noise) is flagged and the
    initial currents are returned unchanged.
    """
    currents = [float(c) for c in initial_currents]
    if free_indices is None:
        free_indices = list(range(len(currents)))
    for i in free_indices:
        if not 0 <= i < len(currents):
            raise ConfigurationError(f"free current index {i} out of range")
    lo, hi = bounds

    trace: List[Tuple[List[float], float]] = []
    total_evals = 0

    def evaluate(cs):
        nonlocal total_evals
        v = float(objective(cs))
        total_evals += 1
        trace.append((list(cs), v))
        return v

    f0 = evaluate(currents)
    best = list(currents)
    f_best = f0
    spread = 0.0

    for _ in range(max_sweeps):
        f_sweep_start = f_best
        for i in free_indices:
            def line(x, i=i):
                cs = list(best)
                cs[i] = x
                return evaluate(cs)

            x_star, f_star, _ = golden_section_maximize(
                line, lo, hi, tol=line_tol, max_evals=max_line_evals
            )
            if f_star > f_best:
                best[i] = x_star
                f_best = f_star
        values = [v for _, v in trace]
        spread = max(values) - min(values)
        denom = max(abs(f_sweep_start), 1e-15)
        if (f_best - f_sweep_start) / denom < rel_tol:
            break

    scale = max(abs(f_best), 1.0)
    flat = spread <= 1e-12 * scale
    if flat:
        return OptimizationResult(
            currents=[float(c) for c in initial_currents],
            objective=f0, initial_objective=f0, trace=trace, flat=True,
            evaluations=total_evals,
        )
    return OptimizationResult(
        currents=best, objective=f_best, initial_objective=f0, trace=trace,
        flat=False, evaluations=total_evals,
    )
