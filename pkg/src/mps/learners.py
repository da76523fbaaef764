"""Model classes, per-step covariate scoring, and single-model baselines.

Three model classes are supported: ordinary least squares, logistic
regression fit by clamped IRLS, and a greedy CART regression tree.  All
three are scored with squared error (logistic and tree models on the
predicted probability scale), which keeps candidate scoring uniform across
classes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._kernels._pyref import COEF_CLAMP, _chol_drop_solve_batch
from .tree import build_tree, predict_tree, tree_scores

__all__ = [
    "ModelClass",
    "LossKind",
    "FittedModel",
    "fit",
    "loss",
    "score_candidates",
    "best_next_covariate",
    "forward_select",
    "lasso_cv",
    "oracle_fit",
    "cv_forward_depth",
]


@dataclass(frozen=True)
class ModelClass:
    """A model family plus its fitting knobs."""

    kind: str = "ols"
    tree_max_depth: int | None = None  # None: depth = number of covariates in the model
    tree_min_leaf: int = 5
    logistic_max_iter: int = 25
    logistic_tol: float = 1e-8

    def __post_init__(self):
        if self.kind not in ("ols", "logistic", "tree"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.tree_max_depth is not None and self.tree_max_depth < 1:
            raise ValueError("tree_max_depth must be >= 1")
        if self.tree_min_leaf < 1:
            raise ValueError("tree_min_leaf must be >= 1")
        if self.logistic_max_iter < 1:
            raise ValueError("logistic_max_iter must be >= 1")

    def resolved_tree_depth(self, n_covariates: int) -> int:
        return self.tree_max_depth if self.tree_max_depth is not None \
            else max(1, n_covariates)


@dataclass(frozen=True)
class LossKind:
    """Loss used for scoring and reporting; squared error only for now."""

    kind: str = "squared_error"

    def __post_init__(self):
        if self.kind != "squared_error":
            raise ValueError(f"unsupported loss {self.kind!r}")


@dataclass
class FittedModel:
    """A fitted model tagged with its class and covariate indices (0-based).

    Linear kinds carry an intercept and a coefficient per covariate; trees
    carry the nested split structure with features indexed by position in
    ``covariates``.
    """

    model_class: ModelClass
    covariates: tuple[int, ...]
    intercept: float | None = None
    coef: np.ndarray | None = None
    tree: dict | None = None

    def __post_init__(self):
        self.covariates = tuple(int(j) for j in self.covariates)
        if len(set(self.covariates)) != len(self.covariates):
            raise ValueError("covariate indices must be distinct")
        if any(j < 0 for j in self.covariates):
            raise ValueError("covariate indices must be non-negative")
        if self.coef is not None:
            self.coef = np.asarray(self.coef, dtype=np.float64)
            if self.coef.shape != (len(self.covariates),):
                raise ValueError("coefficient length must match covariates")
            if not np.isfinite(self.coef).all() or not np.isfinite(self.intercept):
                raise ValueError("non-finite parameters")

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        cols = list(self.covariates)
        if cols and max(cols) >= x.shape[1]:
            raise IndexError(f"covariate index {max(cols)} out of range "
                             f"for {x.shape[1]} columns")
        if self.model_class.kind == "tree":
            return predict_tree(self.tree, x[:, cols])
        eta = np.full(x.shape[0], self.intercept)
        if cols:
            eta += x[:, cols] @ self.coef
        if self.model_class.kind == "logistic":
            return 1.0 / (1.0 + np.exp(-eta))
        return eta

    def to_json(self, names: list[str] | None = None) -> str:
        label = (lambda j: names[j]) if names is not None else (lambda j: f"x{j + 1}")
        d = {
            "kind": self.model_class.kind,
            "covariates": [label(j) for j in self.covariates],
            "covariate_indices": list(self.covariates),
        }
        if self.model_class.kind == "tree":
            d["tree"] = self.tree
        else:
            d["intercept"] = self.intercept
            d["coef"] = list(map(float, self.coef))
        return json.dumps(d)


def _validate_fit_inputs(data, covariates):
    cov = [int(j) for j in covariates]
    if len(set(cov)) != len(cov):
        raise ValueError("covariates must be distinct")
    if cov and (min(cov) < 0 or max(cov) >= data.p):
        raise ValueError(f"covariate index out of range [0, {data.p})")
    return cov


def _fit_logistic(x: np.ndarray, y: np.ndarray, max_iter: int, tol: float):
    """IRLS with the same drop rule and coefficient clamp as the kernels."""
    if y.min() < 0.0 or y.max() > 1.0:
        raise ValueError("logistic regression needs responses in [0, 1]")
    n, q = x.shape
    beta = np.zeros(q)
    for _ in range(max_iter):
        eta = x @ beta
        p = 1.0 / (1.0 + np.exp(-eta))
        w = p * (1.0 - p)
        xtwx = (x * w[:, None]).T @ x
        xtr = x.T @ (y - p)
        delta = _chol_drop_solve_batch(xtwx[None], xtr[None])[0]
        new = np.clip(beta + delta, -COEF_CLAMP, COEF_CLAMP)
        maxd = np.abs(new - beta).max()
        beta = new
        if maxd < tol:
            break
    return beta


def fit(model_class: ModelClass, data, covariates) -> FittedModel:
    """Fit one model of the given class on the listed covariates.

    An empty covariate list is the intercept-only null model.  OLS uses the
    minimum-norm least-squares solution, so rank-deficient designs (common
    on small subsamples) are handled without failure; logistic separation is
    absorbed by the +/-30 coefficient clamp.
    """
    cov = _validate_fit_inputs(data, covariates)
    xs = data.x[:, cov]
    design = np.concatenate([np.ones((data.n, 1)), xs], axis=1)
    if model_class.kind == "ols":
        theta, *_ = np.linalg.lstsq(design, data.y, rcond=None)
        return FittedModel(model_class, tuple(cov),
                           intercept=float(theta[0]), coef=theta[1:])
    if model_class.kind == "logistic":
        theta = _fit_logistic(design, data.y,
                              model_class.logistic_max_iter,
                              model_class.logistic_tol)
        return FittedModel(model_class, tuple(cov),
                           intercept=float(theta[0]), coef=theta[1:])
    depth = model_class.resolved_tree_depth(len(cov))
    if not cov:
        node = {"value": float(data.y.mean())}
    else:
        node = build_tree(xs, data.y, depth, model_class.tree_min_leaf)
    return FittedModel(model_class, tuple(cov), tree=node)


def loss(model: FittedModel, data) -> float:
    """Mean squared error of the model's predictions on the given data."""
    resid = model.predict(data.x) - data.y
    return float(resid @ resid) / data.n


def score_candidates(model_class: ModelClass, x, y, rows, selected, candidates):
    """Per-candidate in-sample MSE of the model selected+[k] fit on x[rows].

    This is the scoring primitive shared by forward selection and the path
    engine; the linear kinds dispatch to the active kernel backend.
    """
    if rows is None:
        rows = np.arange(x.shape[0])
    if model_class.kind == "ols":
        return _kernels.ols_scores(x, y, rows, selected, candidates)
    if model_class.kind == "logistic":
        return _kernels.logistic_scores(x, y, rows, selected, candidates,
                                        model_class.logistic_max_iter,
                                        model_class.logistic_tol)
    depth = model_class.resolved_tree_depth(len(selected) + 1)
    return tree_scores(x, y, rows, list(selected), list(candidates),
                       depth, model_class.tree_min_leaf)


def best_next_covariate(model_class: ModelClass, data, selected, candidates) -> int:
    """The candidate whose addition minimizes in-sample loss.

    Ties break to the smallest column index; candidates with zero variance
    score infinity, and if every candidate is degenerate a ValueError is
    raised.
    """
    selected = [int(j) for j in selected]
    cands = sorted(int(j) for j in candidates)
    if not cands:
        raise ValueError("candidates must be non-empty")
    if set(cands) & set(selected):
        raise ValueError("candidates must be disjoint from selected")
    if cands[-1] >= data.p or cands[0] < 0:
        raise ValueError("candidate index out of range")
    scores = score_candidates(model_class, data.x, data.y, None, selected, cands)
    k = int(np.argmin(scores))
    if not np.isfinite(scores[k]):
        raise ValueError("no admissible covariate")
    return cands[k]


def forward_select(model_class: ModelClass, data, d: int) -> list[int]:
    """Greedy forward selection of d covariates on the full data."""
    if d > data.p:
        raise ValueError(f"d={d} exceeds p={data.p}")
    selected: list[int] = []
    for _ in range(d):
        cands = [j for j in range(data.p) if j not in selected]
        selected.append(best_next_covariate(model_class, data, selected, cands))
    return selected


def _soft_threshold(z: float, lam: float) -> float:
    if z > lam:
        return z - lam
    if z < -lam:
        return z + lam
    return 0.0


def _coordinate_descent(xc, yc, beta, lam, colsq, max_sweeps, tol):
    n = xc.shape[0]
    resid = yc - xc @ beta
    for sweep in range(max_sweeps):
        maxd = 0.0
        for j in range(xc.shape[1]):
            if colsq[j] <= 0.0:
                continue
            old = beta[j]
            rho = float(xc[:, j] @ resid) / n + colsq[j] * old
            new = _soft_threshold(rho, lam) / colsq[j]
            if new != old:
                resid += xc[:, j] * (old - new)
                beta[j] = new
                delta = abs(new - old)
                if delta > maxd:
                    maxd = delta
        if maxd < tol:
            return beta
    raise RuntimeError(f"lasso coordinate descent did not converge within "
                       f"{max_sweeps} sweeps at lambda={lam:.6g}")


def lasso_cv(data, folds: int = 10, n_lambda: int = 100, seed: int = 0,
             lambda_min_ratio: float = 1e-3, max_sweeps: int = 10_000,
             tol: float = 1e-7) -> FittedModel:
    """Lasso with the penalty chosen by k-fold cross validation.

    Cyclic coordinate descent on (1/2n)||y - Xb||^2 + lambda ||b||_1 over a
    log-spaced grid from lambda_max = max_j |x_j'y| / n (computed on centered
    data) down to lambda_min_ratio * lambda_max, warm-started along the path.
    The intercept is unpenalized.  Returns the model refit on the full data
    at the CV-minimizing lambda, with covariates restricted to its support.
    """
    if folds < 2:
        raise ValueError("folds must be >= 2")
    x, y = data.x, data.y
    n, p = x.shape
    xc = x - x.mean(axis=0)
    yc = y - y.mean()
    lam_max = float(np.abs(xc.T @ yc).max()) / n
    if lam_max <= 0.0:
        return FittedModel(ModelClass("ols"), (), intercept=float(y.mean()),
                           coef=np.zeros(0))
    lambdas = np.geomspace(lam_max, lambda_min_ratio * lam_max, n_lambda)

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    fold_of = np.empty(n, dtype=int)
    for f, chunk in enumerate(np.array_split(perm, folds)):
        fold_of[chunk] = f

    cv_err = np.zeros(n_lambda)
    for f in range(folds):
        tr = fold_of != f
        te = ~tr
        xtr = x[tr]
        mu = xtr.mean(axis=0)
        xtr_c = xtr - mu
        ytr = y[tr]
        ybar = ytr.mean()
        ytr_c = ytr - ybar
        colsq = (xtr_c * xtr_c).sum(axis=0) / tr.sum()
        beta = np.zeros(p)
        xte_c = x[te] - mu
        for li, lam in enumerate(lambdas):
            beta = _coordinate_descent(xtr_c, ytr_c, beta, lam, colsq,
                                       max_sweeps, tol)
            pred = xte_c @ beta + ybar
            cv_err[li] += float(((y[te] - pred) ** 2).sum())
    cv_err /= n
    best = int(np.argmin(cv_err))

    colsq = (xc * xc).sum(axis=0) / n
    beta = np.zeros(p)
    for lam in lambdas[: best + 1]:
        beta = _coordinate_descent(xc, yc, beta, lam, colsq, max_sweeps, tol)
    support = tuple(int(j) for j in np.flatnonzero(beta != 0.0))
    intercept = float(y.mean() - x.mean(axis=0) @ beta)
    return FittedModel(ModelClass("ols"), support, intercept=intercept,
                       coef=beta[list(support)])


def oracle_fit(data, beta_true) -> FittedModel:
    """OLS restricted to the true support (synthetic runs only)."""
    beta_true = np.asarray(beta_true)
    support = [int(j) for j in np.flatnonzero(beta_true != 0.0)]
    return fit(ModelClass("ols"), data, support)


def cv_forward_depth(data, max_depth: int = 10, folds: int = 5, seed: int = 0,
                     model_class: ModelClass | None = None) -> int:
    """Forward-selection depth minimizing k-fold CV error.

    Runs forward selection to max_depth on each training fold, evaluates the
    held-out loss of the first k covariates for every k, and returns the k
    with the smallest mean CV error (smallest k on ties).
    """
    mc = model_class or ModelClass("ols")
    max_depth = min(max_depth, data.p)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(data.n)
    err = np.zeros(max_depth)
    for f, chunk in enumerate(np.array_split(perm, folds)):
        te = np.zeros(data.n, dtype=bool)
        te[chunk] = True
        train = data.take(np.flatnonzero(~te))
        test = data.take(np.flatnonzero(te))
        path = forward_select(mc, train, max_depth)
        for k in range(1, max_depth + 1):
            model = fit(mc, train, path[:k])
            err[k - 1] += loss(model, test)
    return int(np.argmin(err)) + 1
