"""Greedy binary regression tree (CART) with squared-error splits.

Trees are represented as nested dicts: internal nodes carry
``{"feature", "threshold", "left", "right"}`` (feature is a position within
the model's covariate list) and leaves carry ``{"value"}``.
"""

from __future__ import annotations

import numpy as np

from ._kernels._pyref import EPS, VAR_FLOOR


def build_tree(x: np.ndarray, y: np.ndarray, max_depth: int, min_leaf: int) -> dict:
    """Fit a depth-limited CART regression tree by greedy SSE minimization.

    Splits fall at midpoints between adjacent distinct values; ties are
    broken by lower feature index, then lower threshold, so the fit is
    deterministic.
    """
    if max_depth < 1 or min_leaf < 1:
        raise ValueError("max_depth and min_leaf must be >= 1")

    def grow(rows: np.ndarray, depth: int) -> dict:
        yr = y[rows]
        if depth >= max_depth or len(rows) < 2 * min_leaf or np.ptp(yr) == 0.0:
            return {"value": float(yr.mean())}
        best = None  # (sse, feature, threshold, mask)
        for j in range(x.shape[1]):
            xv = x[rows, j]
            srt = np.argsort(xv, kind="stable")
            xs = xv[srt]
            ys = yr[srt]
            cy = np.cumsum(ys)
            cy2 = np.cumsum(ys * ys)
            tot_y, tot_y2 = cy[-1], cy2[-1]
            k = np.arange(min_leaf, len(rows) - min_leaf + 1)
            if len(k) == 0:
                continue
            valid = xs[k - 1] < xs[k]
            k = k[valid]
            if len(k) == 0:
                continue
            left_sse = cy2[k - 1] - cy[k - 1] ** 2 / k
            right_n = len(rows) - k
            right_sse = (tot_y2 - cy2[k - 1]) - (tot_y - cy[k - 1]) ** 2 / right_n
            sse = left_sse + right_sse
            i = int(np.argmin(sse))
            thr = 0.5 * (xs[k[i] - 1] + xs[k[i]])
            cand = (float(sse[i]), j, float(thr))
            if best is None or cand < best[:3]:
                best = (*cand, xv <= thr)
        if best is None:
            return {"value": float(yr.mean())}
        _, j, thr, mask = best
        return {
            "feature": j,
            "threshold": thr,
            "left": grow(rows[mask], depth + 1),
            "right": grow(rows[~mask], depth + 1),
        }

    return grow(np.arange(x.shape[0]), 0)


def predict_tree(node: dict, x: np.ndarray) -> np.ndarray:
    out = np.empty(x.shape[0])

    def walk(nd: dict, rows: np.ndarray):
        if "value" in nd:
            out[rows] = nd["value"]
            return
        mask = x[rows, nd["feature"]] <= nd["threshold"]
        walk(nd["left"], rows[mask])
        walk(nd["right"], rows[~mask])

    walk(node, np.arange(x.shape[0]))
    return out


def count_leaves(node: dict) -> int:
    if "value" in node:
        return 1
    return count_leaves(node["left"]) + count_leaves(node["right"])


def tree_scores(x, y, rows, sel, cand, max_depth, min_leaf):
    """In-sample MSE of a CART fit on columns sel+[k], per candidate.

    Candidates that are constant on the subsample score infinity, matching
    the linear scorers.
    """
    rows = np.asarray(rows)
    xs = x[rows]
    ys = y[rows]
    m = len(rows)
    out = np.empty(len(cand))
    sel = list(sel)
    for i, k in enumerate(cand):
        col = xs[:, k]
        maxabs = np.abs(col).max() if m else 0.0
        centered = col - col.mean()
        if float(centered @ centered) <= VAR_FLOOR * m * (EPS * maxabs) ** 2:
            out[i] = np.inf
            continue
        cols = sel + [k]
        node = build_tree(xs[:, cols], ys, max_depth, min_leaf)
        resid = ys - predict_tree(node, xs[:, cols])
        out[i] = float(resid @ resid) / m
    return out
