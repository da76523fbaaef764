"""Pure-numpy reference implementations of the compiled kernels.

Every function here mirrors its twin in ``_core.pyx`` step for step: the
same centering, the same dependent-direction drop rule, the same coefficient
clamp, the same first-minimum tie-break.  The two backends are therefore
interchangeable up to floating-point noise and the subsample-drawing
algorithm (both consume a seeded ``numpy.random.Generator``, but not the
same number of raw draws, so forests agree statistically rather than
bit for bit across backends).
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

REL_DROP = 1e-10
VAR_FLOOR = 256.0
EPS = float(np.finfo(np.float64).eps)
COEF_CLAMP = 30.0
MAX_DEGENERATE_STREAK = 1000


def _factor_selected(xs: np.ndarray, yc: np.ndarray):
    """Modified Cholesky (with drops) of the centered selected block.

    Returns (L, z, dropped, sse_sel) where z solves L z = X'y on the kept
    directions and sse_sel is the residual sum of squares of the
    intercept-plus-selected model.
    """
    m, c = xs.shape
    syy = float(yc @ yc)
    L = np.zeros((c, c))
    z = np.zeros(c)
    dropped = np.zeros(c, dtype=bool)
    for j in range(c):
        gjj = float(xs[:, j] @ xs[:, j])
        for i in range(j):
            if dropped[i]:
                L[j, i] = 0.0
                continue
            acc = float(xs[:, j] @ xs[:, i]) - float(L[j, :i] @ L[i, :i])
            L[j, i] = acc / L[i, i]
        d = gjj - float(L[j, :j] @ L[j, :j])
        if gjj <= 0.0 or d <= REL_DROP * gjj:
            dropped[j] = True
            L[j, j] = 1.0
            z[j] = 0.0
        else:
            L[j, j] = np.sqrt(d)
            acc = float(xs[:, j] @ yc) - float(L[j, :j] @ z[:j])
            z[j] = acc / L[j, j]
    sse_sel = syy - float(z @ z)
    return L, z, dropped, sse_sel


def ols_scores(x, y, rows, sel, cand):
    """In-sample MSE of the least-squares model sel+[k] on x[rows], per candidate."""
    xs = x[rows]
    ys = y[rows]
    m = len(rows)
    yc = ys - ys.mean()
    Xs = xs[:, sel] - xs[:, sel].mean(axis=0)
    L, z, dropped, sse_sel = _factor_selected(Xs, yc)

    raw = xs[:, cand]
    maxabs = np.abs(raw).max(axis=0) if m else np.zeros(len(cand))
    Ck = raw - raw.mean(axis=0)
    gkk = (Ck * Ck).sum(axis=0)
    degenerate = gkk <= VAR_FLOOR * m * (EPS * maxabs) ** 2

    c = len(sel)
    K = len(cand)
    # border solve L w = X_sel' c_k, all candidates at once
    W = np.zeros((c, K))
    GSk = Xs.T @ Ck
    for i in range(c):
        if dropped[i]:
            continue
        W[i] = (GSk[i] - L[i, :i] @ W[:i]) / L[i, i]
    d = gkk - (W * W).sum(axis=0)
    gky = Ck.T @ yc
    zk = np.zeros(K)
    dependent = d <= REL_DROP * gkk
    ok = ~dependent
    zk[ok] = (gky[ok] - (W[:, ok] * z[:, None]).sum(axis=0)) / np.sqrt(d[ok])
    mse = np.full(K, sse_sel)
    mse[ok] -= zk[ok] ** 2
    mse /= m
    np.maximum(mse, 0.0, out=mse)
    mse[degenerate] = np.inf
    return mse


def _chol_drop_solve_batch(A: np.ndarray, b: np.ndarray):
    """Batched solve of symmetric PSD systems with dependent-direction drops.

    A has shape (K, q, q), b has shape (K, q); returns x with dropped
    directions set to zero, matching the compiled kernel's behavior.
    """
    K, q, _ = A.shape
    L = np.zeros_like(A)
    drp = np.zeros((K, q), dtype=bool)
    for j in range(q):
        for i in range(j):
            acc = A[:, j, i] - (L[:, j, :i] * L[:, i, :i]).sum(axis=1)
            Lji = np.where(drp[:, i], 0.0, acc / L[:, i, i])
            L[:, j, i] = Lji
        piv = A[:, j, j] - (L[:, j, :j] ** 2).sum(axis=1)
        bad = (A[:, j, j] <= 0.0) | (piv <= REL_DROP * A[:, j, j])
        drp[:, j] = bad
        L[:, j, j] = np.where(bad, 1.0, np.sqrt(np.where(bad, 1.0, piv)))
    sol = np.zeros((K, q))
    for j in range(q):
        acc = b[:, j] - (L[:, j, :j] * sol[:, :j]).sum(axis=1)
        sol[:, j] = np.where(drp[:, j], 0.0, acc / L[:, j, j])
    for j in range(q - 1, -1, -1):
        acc = sol[:, j].copy()
        for t in range(j + 1, q):
            acc -= np.where(drp[:, t], 0.0, L[:, t, j] * sol[:, t])
        sol[:, j] = np.where(drp[:, j], 0.0, acc / L[:, j, j])
    return sol


def logistic_scores(x, y, rows, sel, cand, max_iter, tol):
    """In-sample MSE of clamped-IRLS logistic fits on sel+[k], per candidate.

    All candidates iterate together (batched IRLS); a candidate stops
    updating once its own step drops below tol, which is equivalent to
    running the per-candidate loop of the compiled kernel.
    """
    xs = x[rows]
    ys = y[rows]
    m = len(rows)
    K = len(cand)
    q = len(sel) + 2

    raw = xs[:, cand]
    maxabs = np.abs(raw).max(axis=0) if m else np.zeros(K)
    Ck = raw - raw.mean(axis=0)
    gkk = (Ck * Ck).sum(axis=0)
    degenerate = gkk <= VAR_FLOOR * m * (EPS * maxabs) ** 2

    # design per candidate: (K, m, q) = [1, X_sel, x_k]
    base = np.concatenate([np.ones((m, 1)), xs[:, sel]], axis=1)
    A = np.empty((K, m, q))
    A[:, :, : q - 1] = base[None, :, :]
    A[:, :, q - 1] = raw.T

    beta = np.zeros((K, q))
    active = ~degenerate
    for _ in range(max_iter):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        Ai = A[idx]
        eta = np.einsum("kmq,kq->km", Ai, beta[idx])
        p = 1.0 / (1.0 + np.exp(-eta))
        w = p * (1.0 - p)
        XtWX = np.einsum("km,kma,kmb->kab", w, Ai, Ai)
        Xtr = np.einsum("kma,km->ka", Ai, ys[None, :] - p)
        delta = _chol_drop_solve_batch(XtWX, Xtr)
        newb = np.clip(beta[idx] + delta, -COEF_CLAMP, COEF_CLAMP)
        maxd = np.abs(newb - beta[idx]).max(axis=1)
        beta[idx] = newb
        active[idx[maxd < tol]] = False

    eta = np.einsum("kmq,kq->km", A, beta)
    p = 1.0 / (1.0 + np.exp(-eta))
    mse = ((p - ys[None, :]) ** 2).mean(axis=1)
    mse[degenerate] = np.inf
    return mse


def _generic_node_counts(score_fn, n, m, r, rng):
    """Rule-R sampling loop shared by every pure-Python node expansion."""
    counts = None
    total = 0
    streak = 0
    while True:
        rows = np.arange(n) if m >= n else rng.choice(n, size=m, replace=False)
        scores = score_fn(rows)
        if counts is None:
            counts = np.zeros(len(scores), dtype=np.int64)
        best = int(np.argmin(scores))
        if not np.isfinite(scores[best]):
            streak += 1
            if streak >= MAX_DEGENERATE_STREAK:
                raise RuntimeError(
                    f"no admissible covariate in {MAX_DEGENERATE_STREAK} consecutive "
                    f"subsamples (subsample size {m} may be too small)")
            continue
        streak = 0
        counts[best] += 1
        total += 1
        if counts[best] == r:
            return counts, total


def ols_node_counts(rng, x, y, sel, cand, m, r):
    return _generic_node_counts(
        lambda rows: ols_scores(x, y, rows, sel, cand), x.shape[0], m, r, rng)


def logistic_node_counts(rng, x, y, sel, cand, m, r, max_iter, tol):
    return _generic_node_counts(
        lambda rows: logistic_scores(x, y, rows, sel, cand, max_iter, tol),
        x.shape[0], m, r, rng)


def rule_r_first_cell_counts(rng, M, r, nsim):
    """Final count of cell 0 in nsim independent rule-R experiments (vectorized)."""
    counts = np.zeros((nsim, M), dtype=np.int64)
    out = np.empty(nsim, dtype=np.int64)
    alive = np.arange(nsim)
    while alive.size:
        cells = rng.integers(0, M, size=alive.size)
        counts[alive, cells] += 1
        done = counts[alive, cells] == r
        out[alive[done]] = counts[alive[done], 0]
        alive = alive[~done]
    return out
