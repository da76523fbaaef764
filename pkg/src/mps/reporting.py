"""Relative test error metrics, the simulation harness, and persistence.

RTE divides a model's test squared error by that of the true coefficient
vector, so 1.0 is the noise floor.  Set-valued selectors report the minimum
RTE over their selected family after an OLS refit of each covariate set on
the training data.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .datasets import SyntheticSpec, gen_linear
from .engine import MpsConfig, enumerate_models, run_fss, run_mps, run_stability_selection
from .learners import FittedModel, ModelClass, fit, forward_select, lasso_cv, oracle_fit
from .resampling import derive_int_seed

__all__ = [
    "SimSpec",
    "SimResultRow",
    "SETUPS",
    "SNR_GRID",
    "rte",
    "min_rte_over_set",
    "run_simulation",
    "proportion_win",
    "aggregate",
    "write_results_csv",
]

# (n, p, s, r, p_star) for the three named simulation setups
SETUPS = {
    1: (100, 10, 5, 200, 0.95),
    2: (500, 100, 5, 200, 0.75),
    3: (500, 100, 5, 50, 0.50),
}

# five SNR values equally spaced on the log scale from 0.25 to 4
SNR_GRID = (0.25, 0.5, 1.0, 2.0, 4.0)

ALL_METHODS = ("oracle", "stability_selection", "lasso", "forward", "mps", "fss")

RESULT_COLUMNS = ("method", "rep", "rte", "n_models", "n_paths", "beats_all_mps")


@dataclass(frozen=True)
class SimSpec:
    """One simulation cell: setup, sparsity pattern, correlation, SNR, methods."""

    setup: int = 1
    beta_type: int = 2
    rho: float = 0.0
    snr: float = 1.0
    reps: int = 30
    methods: tuple[str, ...] = ("oracle", "forward", "mps")
    seed: int = 0
    n: int | None = None
    p: int | None = None
    s: int | None = None
    r: int | None = None
    p_star: float | None = None
    gamma: float = 0.5
    nsim: int = 10_000
    n_test: int = 10_000
    stability_B: int = 100

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.setup not in SETUPS and self.setup != 0:
            raise ValueError("setup must be 1, 2, 3, or 0 (custom)")
        unknown = set(self.methods) - set(ALL_METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")
        if self.setup == 0:
            for name in ("n", "p", "s", "r", "p_star"):
                if getattr(self, name) is None:
                    raise ValueError(f"custom setup requires {name}")

    def resolved(self) -> tuple[int, int, int, int, float]:
        """(n, p, s, r, p_star) with setup defaults and overrides applied."""
        if self.setup == 0:
            return (self.n, self.p, self.s, self.r, self.p_star)
        n0, p0, s0, r0, ps0 = SETUPS[self.setup]
        return (self.n or n0, self.p or p0, self.s or s0,
                self.r or r0, self.p_star if self.p_star is not None else ps0)

    def to_dict(self) -> dict:
        n, p, s, r, p_star = self.resolved()
        return {"setup": self.setup, "n": n, "p": p, "s": s, "r": r,
                "p_star": p_star, "beta_type": self.beta_type, "rho": self.rho,
                "snr": self.snr, "reps": self.reps, "methods": list(self.methods),
                "seed": self.seed, "gamma": self.gamma, "nsim": self.nsim,
                "n_test": self.n_test, "stability_B": self.stability_B}


@dataclass
class SimResultRow:
    """One (method, replication) record."""

    method: str
    rep: int
    rte: float
    n_models: int = 1
    n_paths: int = 1
    beats_all_mps: bool | None = None
    runtime_ms: float = 0.0
    error: str | None = None

    def __post_init__(self):
        if self.error is None:
            if self.rte <= 0.0:
                raise ValueError("rte must be positive")
            if self.n_models < 1:
                raise ValueError("n_models must be >= 1")


def _linear_prediction(model, test_x: np.ndarray) -> np.ndarray:
    if isinstance(model, FittedModel):
        if model.model_class.kind != "ols":
            raise ValueError("rte requires a linear-form model")
        return model.predict(test_x)
    coef, intercept = model
    coef = np.asarray(coef, dtype=np.float64)
    return test_x @ coef + intercept


def rte(model, test, beta_true) -> float:
    """Relative test error: ||y - yhat||^2 / ||y - X beta_true||^2.

    ``model`` is a linear FittedModel or a (coef, intercept) pair with coef
    indexed over all p columns.
    """
    beta_true = np.asarray(beta_true, dtype=np.float64)
    pred = _linear_prediction(model, test.x)
    num = float(((test.y - pred) ** 2).sum())
    den = float(((test.y - test.x @ beta_true) ** 2).sum())
    assert den > 0.0, "degenerate test set: true-model residual is zero"
    return num / den


def min_rte_over_set(models, train, test, beta_true) -> float:
    """Minimum RTE over covariate sets, each refit by OLS on the training data."""
    models = list(models)
    if not models:
        raise ValueError("need at least one model")
    return min(rte(fit(ModelClass("ols"), train, sorted(cov)), test, beta_true)
               for cov in models)


def _mps_config(spec: SimSpec, s: int, r: int, p_star: float, seed: int) -> MpsConfig:
    return MpsConfig(d=s, r=r, p_star=p_star, gamma=spec.gamma, nsim=spec.nsim,
                     model_class=ModelClass("ols"), seed=seed)


def _run_one_rep(spec: SimSpec, rep: int) -> list[SimResultRow]:
    n, p, s, r, p_star = spec.resolved()
    data_seed = derive_int_seed(spec.seed, "sim-data", rep)
    pair = gen_linear(SyntheticSpec(n=n, p=p, s=s, rho=spec.rho, snr=spec.snr,
                                    beta_type=spec.beta_type, seed=data_seed),
                      spec.n_test)
    train, test, beta_true = pair.train, pair.test, pair.beta_true
    method_seed = derive_int_seed(spec.seed, "sim-method", rep)

    rows: list[SimResultRow] = []
    mps_min_rte = None
    ordered = [m for m in ("mps",) if m in spec.methods] + \
              [m for m in spec.methods if m != "mps"]
    for method in ordered:
        t0 = time.perf_counter()
        try:
            if method == "mps":
                forest = run_mps(train, _mps_config(spec, s, r, p_star, method_seed))
                paths, sets = enumerate_models(forest)
                value = min_rte_over_set(sets, train, test, beta_true)
                mps_min_rte = value
                row = SimResultRow(method, rep, value,
                                   n_models=len(sets), n_paths=len(paths))
            else:
                if method == "oracle":
                    model = oracle_fit(train, beta_true)
                elif method == "lasso":
                    model = lasso_cv(train, seed=method_seed)
                elif method == "forward":
                    sel = forward_select(ModelClass("ols"), train, s)
                    model = fit(ModelClass("ols"), train, sel)
                elif method == "fss":
                    sel = run_fss(train, _mps_config(spec, s, r, p_star, method_seed))
                    model = fit(ModelClass("ols"), train, sel)
                elif method == "stability_selection":
                    res = run_stability_selection(train, spec.stability_B, s,
                                                  ("top_s", s), seed=method_seed)
                    model = fit(ModelClass("ols"), train, list(res.selected))
                else:  # pragma: no cover - SimSpec validates methods
                    raise ValueError(method)
                value = rte(model, test, beta_true)
                beats = None if mps_min_rte is None else bool(value < mps_min_rte)
                row = SimResultRow(method, rep, value, beats_all_mps=beats)
        except Exception as exc:  # noqa: BLE001 - record and continue
            row = SimResultRow(method, rep, float("nan"), error=str(exc))
        row.runtime_ms = 1000.0 * (time.perf_counter() - t0)
        rows.append(row)
    return rows


def run_simulation(spec: SimSpec, out_dir=None, threads: int = 1) -> list[SimResultRow]:
    """Run every method on ``reps`` independently generated datasets.

    Per-rep seeds derive from (spec.seed, rep), so output is identical for
    any thread count.  Method failures are recorded on their row (error
    column) without aborting the run.  When out_dir is given, writes
    results.csv, timings.csv, and manifest.json.
    """
    reps = list(range(spec.reps))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            batches = list(pool.map(lambda rep: _run_one_rep(spec, rep), reps))
    else:
        batches = [_run_one_rep(spec, rep) for rep in reps]
    rows = [row for batch in batches for row in batch]
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_results_csv(rows, out / "results.csv")
        _write_timings_csv(rows, out / "timings.csv")
        manifest = {"spec": spec.to_dict(), "version": __version__}
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_results_csv(rows, path) -> None:
    """Deterministic results CSV (runtime lives in timings.csv, see manifest)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS + ("error",))
        for row in rows:
            w.writerow([row.method, row.rep, _fmt(row.rte), row.n_models,
                        row.n_paths, _fmt(row.beats_all_mps),
                        _fmt(row.error)])


def _write_timings_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("method", "rep", "runtime_ms"))
        for row in rows:
            w.writerow([row.method, row.rep, f"{row.runtime_ms:.3f}"])


def aggregate(rows) -> dict[str, dict[str, float]]:
    """Per-method mean RTE, its standard error, and mean model/path counts."""
    out: dict[str, dict[str, float]] = {}
    methods = sorted({r.method for r in rows})
    for method in methods:
        ok = [r for r in rows if r.method == method and r.error is None]
        if not ok:
            out[method] = {"n": 0}
            continue
        vals = np.array([r.rte for r in ok])
        out[method] = {
            "n": len(ok),
            "mean_rte": float(vals.mean()),
            "se_rte": float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0,
            "mean_n_models": float(np.mean([r.n_models for r in ok])),
            "mean_n_paths": float(np.mean([r.n_paths for r in ok])),
        }
    return out


def proportion_win(rows) -> dict[str, float]:
    """Fraction of reps where each single-model method beats every MPS model.

    "Beats" is a strictly lower RTE than the minimum over the MPS-selected
    family in the same replication.
    """
    mps_by_rep = {r.rep: r.rte for r in rows if r.method == "mps" and r.error is None}
    if not mps_by_rep:
        raise ValueError("no mps rows to compare against")
    out: dict[str, float] = {}
    for method in sorted({r.method for r in rows} - {"mps"}):
        ok = [r for r in rows
              if r.method == method and r.error is None and r.rep in mps_by_rep]
        if not ok:
            continue
        wins = sum(1 for r in ok if r.rte < mps_by_rep[r.rep])
        out[method] = wins / len(ok)
    return out
