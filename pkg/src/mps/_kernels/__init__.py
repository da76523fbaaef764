"""Kernel backend selection.

The compiled Cython extension is used when it is importable; otherwise (or
when ``MPS_PURE_PYTHON=1`` is set) the numpy reference implementation takes
over.
Both expose the same operations; see ``benchmarks/bench_kernels.py`` for a
side-by-side comparison.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pyref

_core = None
if os.environ.get("MPS_PURE_PYTHON", "").strip() in ("", "0"):
    try:
        import importlib

        _core = importlib.import_module("._core", __name__)
    except ImportError:
        _core = None

BACKEND = "compiled" if _core is not None else "python"


def _i64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.int64)


def _f64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def ols_scores(x, y, rows, sel, cand):
    x, y = _f64(x), _f64(y)
    rows, sel, cand = _i64(rows), _i64(sel), _i64(cand)
    if _core is not None:
        return _core.ols_scores(x, y, rows, sel, cand)
    return _pyref.ols_scores(x, y, rows, sel, cand)


def logistic_scores(x, y, rows, sel, cand, max_iter, tol):
    x, y = _f64(x), _f64(y)
    rows, sel, cand = _i64(rows), _i64(sel), _i64(cand)
    if _core is not None:
        return _core.logistic_scores(x, y, rows, sel, cand, max_iter, tol)
    return _pyref.logistic_scores(x, y, rows, sel, cand, max_iter, tol)


def ols_node_counts(rng, x, y, sel, cand, m, r):
    x, y = _f64(x), _f64(y)
    sel, cand = _i64(sel), _i64(cand)
    if _core is not None:
        return _core.ols_node_counts(rng.bit_generator, x, y, sel, cand, m, r)
    return _pyref.ols_node_counts(rng, x, y, sel, cand, m, r)


def logistic_node_counts(rng, x, y, sel, cand, m, r, max_iter, tol):
    x, y = _f64(x), _f64(y)
    sel, cand = _i64(sel), _i64(cand)
    if _core is not None:
        return _core.logistic_node_counts(rng.bit_generator, x, y, sel, cand,
                                          m, r, max_iter, tol)
    return _pyref.logistic_node_counts(rng, x, y, sel, cand, m, r, max_iter, tol)


def rule_r_first_cell_counts(rng, M, r, nsim):
    if _core is not None:
        return _core.rule_r_first_cell_counts(rng.bit_generator, M, r, nsim)
    return _pyref.rule_r_first_cell_counts(rng, M, r, nsim)


generic_node_counts = _pyref._generic_node_counts
