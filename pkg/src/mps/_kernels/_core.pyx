# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled inner loops.

Three hot paths live here:

* least-squares scoring of every candidate covariate on a subsample
  (bordered Cholesky on centered cross products),
* the same for logistic regression via IRLS with clamped coefficients,
* the rule-R multinomial sampling experiments used to calibrate the
  selection slack.

Each entry point has a numpy twin in ``_pyref`` implementing the identical
algorithm; ``mps._kernels`` picks whichever is available.
"""

import numpy as np

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport INFINITY, exp, fabs, sqrt
from numpy.random cimport bitgen_t

cdef const char *CAPSULE_NAME = "BitGenerator"

# Shared numeric conventions (mirrored in _pyref):
#   REL_DROP   - Schur pivot below this fraction of the diagonal is treated
#                as a linearly dependent direction and dropped.
#   VAR_FLOOR  - centered sum of squares at or below VAR_FLOOR * m * (eps*maxabs)^2
#                marks a constant column (cancellation noise level).
DEF REL_DROP = 1e-10
DEF VAR_FLOOR = 256.0
DEF EPS = 2.220446049250313e-16
DEF COEF_CLAMP = 30.0
DEF MAX_DEGENERATE_STREAK = 1000

BACKEND = "compiled"


cdef bitgen_t *_bitgen(object bit_generator) except NULL:
    return <bitgen_t *> PyCapsule_GetPointer(bit_generator.capsule, CAPSULE_NAME)


cdef inline unsigned long long _bounded_uint(bitgen_t *rng, unsigned long long b) noexcept nogil:
    # uniform integer in [0, b) by rejection on the top of the 64-bit range
    cdef unsigned long long x, lim
    if b <= 1:
        return 0
    lim = (<unsigned long long> 0xFFFFFFFFFFFFFFFFULL // b) * b
    while True:
        x = rng.next_uint64(rng.state)
        if x < lim:
            return x % b


cdef inline void _draw_rows(bitgen_t *rng, long long *perm, Py_ssize_t n, Py_ssize_t m) noexcept nogil:
    # partial Fisher-Yates; perm is a persistent buffer holding 0..n-1
    cdef Py_ssize_t t, j
    cdef long long tmp
    for t in range(m):
        j = t + <Py_ssize_t> _bounded_uint(rng, <unsigned long long> (n - t))
        tmp = perm[t]
        perm[t] = perm[j]
        perm[j] = tmp


cdef inline double _gather_centered(const double[:, ::1] x, const long long *rows,
                                    Py_ssize_t m, Py_ssize_t col,
                                    double *out, double *maxabs) noexcept nogil:
    cdef Py_ssize_t t
    cdef double s = 0.0, v, ma = 0.0
    for t in range(m):
        v = x[rows[t], col]
        out[t] = v
        s += v
        if fabs(v) > ma:
            ma = fabs(v)
    s /= m
    for t in range(m):
        out[t] -= s
    maxabs[0] = ma
    return s


# ---------------------------------------------------------------------------
# OLS candidate scoring
# ---------------------------------------------------------------------------

cdef void _ols_scores_core(const double[:, ::1] x, const double[::1] y,
                           const long long *rows, Py_ssize_t m,
                           const long long[::1] sel, const long long[::1] cand,
                           double *S, double *yc, double *ck,
                           double *L, double *z, double *w,
                           unsigned char *dropped,
                           double *mse) noexcept nogil:
    # In-sample mean squared error of the intercept-plus-least-squares fit on
    # columns sel + [k], for every candidate k.  INFINITY marks a candidate
    # that is constant on this subsample.
    cdef Py_ssize_t c = sel.shape[0], K = cand.shape[0]
    cdef Py_ssize_t i, j, t, k
    cdef double acc, mean, ma, syy, gkk, gky, d, zk, sse_sel

    acc = 0.0
    for t in range(m):
        acc += y[rows[t]]
    mean = acc / m
    syy = 0.0
    for t in range(m):
        yc[t] = y[rows[t]] - mean
        syy += yc[t] * yc[t]

    for j in range(c):
        _gather_centered(x, rows, m, <Py_ssize_t> sel[j], S + j * m, &ma)

    # modified Cholesky of the selected block; dependent directions dropped
    for j in range(c):
        gkk = 0.0
        for t in range(m):
            gkk += S[j * m + t] * S[j * m + t]
        for i in range(j):
            if dropped[i]:
                L[j * c + i] = 0.0
                continue
            acc = 0.0
            for t in range(m):
                acc += S[j * m + t] * S[i * m + t]
            for t in range(i):
                acc -= L[j * c + t] * L[i * c + t]
            L[j * c + i] = acc / L[i * c + i]
        d = gkk
        for t in range(j):
            d -= L[j * c + t] * L[j * c + t]
        if gkk <= 0.0 or d <= REL_DROP * gkk:
            dropped[j] = 1
            L[j * c + j] = 1.0
            z[j] = 0.0
        else:
            dropped[j] = 0
            L[j * c + j] = sqrt(d)
            acc = 0.0
            for t in range(m):
                acc += S[j * m + t] * yc[t]
            for t in range(j):
                acc -= L[j * c + t] * z[t]
            z[j] = acc / L[j * c + j]

    sse_sel = syy
    for j in range(c):
        sse_sel -= z[j] * z[j]

    for k in range(K):
        _gather_centered(x, rows, m, <Py_ssize_t> cand[k], ck, &ma)
        gkk = 0.0
        for t in range(m):
            gkk += ck[t] * ck[t]
        if gkk <= VAR_FLOOR * m * (EPS * ma) * (EPS * ma):
            mse[k] = INFINITY
            continue
        for i in range(c):
            if dropped[i]:
                w[i] = 0.0
                continue
            acc = 0.0
            for t in range(m):
                acc += S[i * m + t] * ck[t]
            for t in range(i):
                acc -= L[i * c + t] * w[t]
            w[i] = acc / L[i * c + i]
        d = gkk
        for t in range(c):
            d -= w[t] * w[t]
        if d <= REL_DROP * gkk:
            mse[k] = sse_sel / m
        else:
            gky = 0.0
            for t in range(m):
                gky += ck[t] * yc[t]
            acc = gky
            for t in range(c):
                acc -= w[t] * z[t]
            zk = acc / sqrt(d)
            mse[k] = (sse_sel - zk * zk) / m
        if mse[k] < 0.0:
            mse[k] = 0.0


def ols_scores(const double[:, ::1] x, const double[::1] y,
               long long[::1] rows, long long[::1] sel, long long[::1] cand):
    """In-sample MSE of the least-squares model sel+[k] on x[rows], per candidate."""
    cdef Py_ssize_t m = rows.shape[0], c = sel.shape[0], K = cand.shape[0]
    S_arr = np.empty(max(c, 1) * m, dtype=np.float64)
    yc_arr = np.empty(m, dtype=np.float64)
    ck_arr = np.empty(m, dtype=np.float64)
    L_arr = np.empty(max(c * c, 1), dtype=np.float64)
    z_arr = np.empty(max(c, 1), dtype=np.float64)
    w_arr = np.empty(max(c, 1), dtype=np.float64)
    drop_arr = np.zeros(max(c, 1), dtype=np.uint8)
    out = np.empty(K, dtype=np.float64)
    cdef double[::1] S = S_arr, yc = yc_arr, ck = ck_arr, L = L_arr
    cdef double[::1] z = z_arr, w = w_arr, mse = out
    cdef unsigned char[::1] dropped = drop_arr
    with nogil:
        _ols_scores_core(x, y, &rows[0], m, sel, cand,
                         &S[0], &yc[0], &ck[0], &L[0], &z[0], &w[0],
                         &dropped[0], &mse[0])
    return out


def ols_node_counts(object bit_generator, const double[:, ::1] x, const double[::1] y,
                    long long[::1] sel, long long[::1] cand,
                    Py_ssize_t m, long long r):
    """Rule-R sampling loop for one path node under OLS scoring.

    Repeatedly draws a size-m subsample, scores every candidate, and counts
    the winner, until one candidate has been selected r times.  Returns
    (counts, total_draws).
    """
    cdef Py_ssize_t n = x.shape[0], c = sel.shape[0], K = cand.shape[0]
    cdef bitgen_t *rng = _bitgen(bit_generator)

    perm_arr = np.arange(n, dtype=np.int64)
    counts_arr = np.zeros(K, dtype=np.int64)
    S_arr = np.empty(max(c, 1) * m, dtype=np.float64)
    yc_arr = np.empty(m, dtype=np.float64)
    ck_arr = np.empty(m, dtype=np.float64)
    L_arr = np.empty(max(c * c, 1), dtype=np.float64)
    z_arr = np.empty(max(c, 1), dtype=np.float64)
    w_arr = np.empty(max(c, 1), dtype=np.float64)
    drop_arr = np.zeros(max(c, 1), dtype=np.uint8)
    mse_arr = np.empty(K, dtype=np.float64)

    cdef long long[::1] perm = perm_arr, counts = counts_arr
    cdef double[::1] S = S_arr, yc = yc_arr, ck = ck_arr, L = L_arr
    cdef double[::1] z = z_arr, w = w_arr, mse = mse_arr
    cdef unsigned char[::1] dropped = drop_arr

    cdef long long total = 0
    cdef int streak = 0, failed = 0
    cdef Py_ssize_t k, best
    cdef double bestv

    with nogil:
        while True:
            _draw_rows(rng, &perm[0], n, m)
            _ols_scores_core(x, y, &perm[0], m, sel, cand,
                             &S[0], &yc[0], &ck[0], &L[0], &z[0], &w[0],
                             &dropped[0], &mse[0])
            best = -1
            bestv = INFINITY
            for k in range(K):
                if mse[k] < bestv:
                    bestv = mse[k]
                    best = k
            if best < 0:
                streak += 1
                if streak >= MAX_DEGENERATE_STREAK:
                    failed = 1
                    break
                continue
            streak = 0
            counts[best] += 1
            total += 1
            if counts[best] == r:
                break
    if failed:
        raise RuntimeError("no admissible covariate in %d consecutive subsamples "
                           "(subsample size %d may be too small)" % (MAX_DEGENERATE_STREAK, m))
    return counts_arr, int(total)


# ---------------------------------------------------------------------------
# Logistic (IRLS) candidate scoring
# ---------------------------------------------------------------------------

cdef void _chol_drop_solve(const double *A, const double *b, Py_ssize_t q,
                           double *L, double *sol, unsigned char *drp) noexcept nogil:
    # Solve A sol = b for symmetric PSD A; dependent directions get sol = 0.
    cdef Py_ssize_t i, j, t
    cdef double acc, piv
    for j in range(q):
        for i in range(j):
            if drp[i]:
                L[j * q + i] = 0.0
                continue
            acc = A[j * q + i]
            for t in range(i):
                acc -= L[j * q + t] * L[i * q + t]
            L[j * q + i] = acc / L[i * q + i]
        piv = A[j * q + j]
        for t in range(j):
            piv -= L[j * q + t] * L[j * q + t]
        if A[j * q + j] <= 0.0 or piv <= REL_DROP * A[j * q + j]:
            drp[j] = 1
            L[j * q + j] = 1.0
        else:
            drp[j] = 0
            L[j * q + j] = sqrt(piv)
    for j in range(q):
        if drp[j]:
            sol[j] = 0.0
            continue
        acc = b[j]
        for t in range(j):
            acc -= L[j * q + t] * sol[t]
        sol[j] = acc / L[j * q + j]
    for j in range(q - 1, -1, -1):
        if drp[j]:
            sol[j] = 0.0
            continue
        acc = sol[j]
        for t in range(j + 1, q):
            if not drp[t]:
                acc -= L[t * q + j] * sol[t]
        sol[j] = acc / L[j * q + j]


cdef double _logistic_mse_one(const double *A, const double *yv,
                              Py_ssize_t m, Py_ssize_t q,
                              int max_iter, double tol,
                              double *beta, double *eta, double *p,
                              double *XtWX, double *Xtr, double *L,
                              double *delta, unsigned char *drp) noexcept nogil:
    # IRLS on the (q x m) column-major design A (column 0 is the intercept).
    # Coefficients are clamped to |beta_j| <= COEF_CLAMP, which stands in for
    # divergence under separation.  Returns mean squared error of the fitted
    # probabilities.
    cdef Py_ssize_t a, bcol, t, it
    cdef double acc, wt, maxd, v
    for a in range(q):
        beta[a] = 0.0
    for it in range(max_iter):
        for t in range(m):
            acc = 0.0
            for a in range(q):
                acc += beta[a] * A[a * m + t]
            eta[t] = acc
            p[t] = 1.0 / (1.0 + exp(-acc))
        for a in range(q):
            for bcol in range(a + 1):
                acc = 0.0
                for t in range(m):
                    wt = p[t] * (1.0 - p[t])
                    acc += wt * A[a * m + t] * A[bcol * m + t]
                XtWX[a * q + bcol] = acc
                XtWX[bcol * q + a] = acc
            acc = 0.0
            for t in range(m):
                acc += A[a * m + t] * (yv[t] - p[t])
            Xtr[a] = acc
        _chol_drop_solve(XtWX, Xtr, q, L, delta, drp)
        maxd = 0.0
        for a in range(q):
            v = beta[a] + delta[a]
            if v > COEF_CLAMP:
                v = COEF_CLAMP
            elif v < -COEF_CLAMP:
                v = -COEF_CLAMP
            if fabs(v - beta[a]) > maxd:
                maxd = fabs(v - beta[a])
            beta[a] = v
        if maxd < tol:
            break
    acc = 0.0
    for t in range(m):
        v = 0.0
        for a in range(q):
            v += beta[a] * A[a * m + t]
        v = 1.0 / (1.0 + exp(-v))
        v -= yv[t]
        acc += v * v
    return acc / m


cdef void _logistic_scores_core(const double[:, ::1] x, const double[::1] y,
                                const long long *rows, Py_ssize_t m,
                                const long long[::1] sel, const long long[::1] cand,
                                int max_iter, double tol,
                                double *A, double *yv,
                                double *beta, double *eta, double *p,
                                double *XtWX, double *Xtr, double *L,
                                double *delta, unsigned char *drp,
                                double *mse) noexcept nogil:
    cdef Py_ssize_t c = sel.shape[0], K = cand.shape[0], q = c + 2
    cdef Py_ssize_t j, t, k
    cdef double ma, gkk, mean, v

    for t in range(m):
        A[t] = 1.0
        yv[t] = y[rows[t]]
    for j in range(c):
        for t in range(m):
            A[(j + 1) * m + t] = x[rows[t], sel[j]]

    for k in range(K):
        mean = 0.0
        ma = 0.0
        for t in range(m):
            v = x[rows[t], cand[k]]
            A[(q - 1) * m + t] = v
            mean += v
            if fabs(v) > ma:
                ma = fabs(v)
        mean /= m
        gkk = 0.0
        for t in range(m):
            v = A[(q - 1) * m + t] - mean
            gkk += v * v
        if gkk <= VAR_FLOOR * m * (EPS * ma) * (EPS * ma):
            mse[k] = INFINITY
            continue
        mse[k] = _logistic_mse_one(A, yv, m, q, max_iter, tol,
                                   beta, eta, p, XtWX, Xtr, L, delta, drp)


def logistic_scores(const double[:, ::1] x, const double[::1] y,
                    long long[::1] rows, long long[::1] sel, long long[::1] cand,
                    int max_iter, double tol):
    """In-sample MSE of clamped-IRLS logistic fits on sel+[k], per candidate."""
    cdef Py_ssize_t m = rows.shape[0], c = sel.shape[0], K = cand.shape[0], q = c + 2
    A_arr = np.empty(q * m, dtype=np.float64)
    yv_arr = np.empty(m, dtype=np.float64)
    beta_arr = np.empty(q, dtype=np.float64)
    eta_arr = np.empty(m, dtype=np.float64)
    p_arr = np.empty(m, dtype=np.float64)
    XtWX_arr = np.empty(q * q, dtype=np.float64)
    Xtr_arr = np.empty(q, dtype=np.float64)
    L_arr = np.empty(q * q, dtype=np.float64)
    delta_arr = np.empty(q, dtype=np.float64)
    drp_arr = np.zeros(q, dtype=np.uint8)
    out = np.empty(K, dtype=np.float64)
    cdef double[::1] A = A_arr, yv = yv_arr, beta = beta_arr, eta = eta_arr
    cdef double[::1] p = p_arr, XtWX = XtWX_arr, Xtr = Xtr_arr, L = L_arr
    cdef double[::1] delta = delta_arr, mse = out
    cdef unsigned char[::1] drp = drp_arr
    with nogil:
        _logistic_scores_core(x, y, &rows[0], m, sel, cand, max_iter, tol,
                              &A[0], &yv[0], &beta[0], &eta[0], &p[0],
                              &XtWX[0], &Xtr[0], &L[0], &delta[0], &drp[0],
                              &mse[0])
    return out


def logistic_node_counts(object bit_generator, const double[:, ::1] x, const double[::1] y,
                         long long[::1] sel, long long[::1] cand,
                         Py_ssize_t m, long long r, int max_iter, double tol):
    """Rule-R sampling loop for one path node under logistic scoring."""
    cdef Py_ssize_t n = x.shape[0], c = sel.shape[0], K = cand.shape[0], q = c + 2
    cdef bitgen_t *rng = _bitgen(bit_generator)

    perm_arr = np.arange(n, dtype=np.int64)
    counts_arr = np.zeros(K, dtype=np.int64)
    A_arr = np.empty(q * m, dtype=np.float64)
    yv_arr = np.empty(m, dtype=np.float64)
    beta_arr = np.empty(q, dtype=np.float64)
    eta_arr = np.empty(m, dtype=np.float64)
    p_arr = np.empty(m, dtype=np.float64)
    XtWX_arr = np.empty(q * q, dtype=np.float64)
    Xtr_arr = np.empty(q, dtype=np.float64)
    L_arr = np.empty(q * q, dtype=np.float64)
    delta_arr = np.empty(q, dtype=np.float64)
    drp_arr = np.zeros(q, dtype=np.uint8)
    mse_arr = np.empty(K, dtype=np.float64)

    cdef long long[::1] perm = perm_arr, counts = counts_arr
    cdef double[::1] A = A_arr, yv = yv_arr, beta = beta_arr, eta = eta_arr
    cdef double[::1] p = p_arr, XtWX = XtWX_arr, Xtr = Xtr_arr, L = L_arr
    cdef double[::1] delta = delta_arr, mse = mse_arr
    cdef unsigned char[::1] drp = drp_arr

    cdef long long total = 0
    cdef int streak = 0, failed = 0
    cdef Py_ssize_t k, best
    cdef double bestv

    with nogil:
        while True:
            _draw_rows(rng, &perm[0], n, m)
            _logistic_scores_core(x, y, &perm[0], m, sel, cand, max_iter, tol,
                                  &A[0], &yv[0], &beta[0], &eta[0], &p[0],
                                  &XtWX[0], &Xtr[0], &L[0], &delta[0], &drp[0],
                                  &mse[0])
            best = -1
            bestv = INFINITY
            for k in range(K):
                if mse[k] < bestv:
                    bestv = mse[k]
                    best = k
            if best < 0:
                streak += 1
                if streak >= MAX_DEGENERATE_STREAK:
                    failed = 1
                    break
                continue
            streak = 0
            counts[best] += 1
            total += 1
            if counts[best] == r:
                break
    if failed:
        raise RuntimeError("no admissible covariate in %d consecutive subsamples "
                           "(subsample size %d may be too small)" % (MAX_DEGENERATE_STREAK, m))
    return counts_arr, int(total)


# ---------------------------------------------------------------------------
# Rule-R multinomial experiments
# ---------------------------------------------------------------------------

def rule_r_first_cell_counts(object bit_generator, Py_ssize_t M, long long r, Py_ssize_t nsim):
    """Final count of cell 0 in nsim independent rule-R experiments.

    Each experiment samples a uniform M-cell multinomial one draw at a time
    until some cell reaches count r.
    """
    cdef bitgen_t *rng = _bitgen(bit_generator)
    counts_arr = np.zeros(M, dtype=np.int64)
    out_arr = np.empty(nsim, dtype=np.int64)
    cdef long long[::1] counts = counts_arr
    cdef long long[::1] out = out_arr
    cdef Py_ssize_t h, i
    cdef Py_ssize_t cell
    with nogil:
        for h in range(nsim):
            for i in range(M):
                counts[i] = 0
            while True:
                cell = <Py_ssize_t> _bounded_uint(rng, <unsigned long long> M)
                counts[cell] += 1
                if counts[cell] == r:
                    break
            out[h] = counts[0]
    return out_arr
