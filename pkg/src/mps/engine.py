"""Path-forest construction: MPS, forward stability selection, and the
classical stability-selection baseline.

The engine walks depth levels breadth-first.  Each frontier node draws
subsamples and scores the remaining candidates until one candidate has won
r times (rule R); every candidate within the calibrated slack D of the
winner becomes a child.  Node randomness is keyed by the covariate prefix,
so sibling order, thread count, and scheduling cannot change the output.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .learners import LossKind, ModelClass, score_candidates
from .ranking import find_min_D
from .resampling import derive_int_seed, derive_rng, draw_subsample

__all__ = [
    "MpsConfig",
    "PathNode",
    "PathForest",
    "StabilityResult",
    "run_mps",
    "run_fss",
    "run_stability_selection",
    "enumerate_models",
]


@dataclass(frozen=True)
class MpsConfig:
    """All tuning knobs for one MPS run.

    d is the model size (covariates per path), r the rule-R stopping count,
    p_star the inclusion probability, gamma the subsample-size exponent
    (size floor(n^gamma)), nsim the Monte-Carlo size used to calibrate the
    slack D.  threshold_mode "inclusive" admits counts >= r - D; "strict"
    admits counts > r - D (the argmax is always admitted).  score_holdout
    fits on one half of each subsample and scores on the other instead of
    scoring in sample.
    """

    d: int
    r: int = 100
    p_star: float = 0.95
    gamma: float = 0.5
    nsim: int = 10_000
    model_class: ModelClass = field(default_factory=ModelClass)
    loss: LossKind = field(default_factory=LossKind)
    seed: int = 0
    threshold_mode: str = "inclusive"
    score_holdout: bool = False

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.r < 1:
            raise ValueError("r must be >= 1")
        if not 0.0 < self.p_star <= 1.0:
            raise ValueError("p_star must lie in (0, 1]")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.nsim < 1:
            raise ValueError("nsim must be >= 1")
        if self.threshold_mode not in ("inclusive", "strict"):
            raise ValueError("threshold_mode must be 'inclusive' or 'strict'")

    def to_dict(self) -> dict:
        return {
            "d": self.d, "r": self.r, "p_star": self.p_star,
            "gamma": self.gamma, "nsim": self.nsim,
            "model_class": {
                "kind": self.model_class.kind,
                "tree_max_depth": self.model_class.tree_max_depth,
                "tree_min_leaf": self.model_class.tree_min_leaf,
                "logistic_max_iter": self.model_class.logistic_max_iter,
                "logistic_tol": self.model_class.logistic_tol,
            },
            "loss": self.loss.kind,
            "seed": self.seed,
            "threshold_mode": self.threshold_mode,
            "score_holdout": self.score_holdout,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MpsConfig":
        mc = d.get("model_class", {})
        return cls(
            d=int(d["d"]), r=int(d["r"]), p_star=float(d["p_star"]),
            gamma=float(d["gamma"]), nsim=int(d["nsim"]),
            model_class=ModelClass(
                kind=mc.get("kind", "ols"),
                tree_max_depth=mc.get("tree_max_depth"),
                tree_min_leaf=int(mc.get("tree_min_leaf", 5)),
                logistic_max_iter=int(mc.get("logistic_max_iter", 25)),
                logistic_tol=float(mc.get("logistic_tol", 1e-8)),
            ),
            loss=LossKind(d.get("loss", "squared_error")),
            seed=int(d["seed"]),
            threshold_mode=d.get("threshold_mode", "inclusive"),
            score_holdout=bool(d.get("score_holdout", False)),
        )


@dataclass
class PathNode:
    """One selected covariate: its rule-R count, selection proportion, children."""

    covariate: int
    count: int
    proportion: float
    children: list["PathNode"] = field(default_factory=list)

    def __post_init__(self):
        if not 0.0 < self.proportion <= 1.0:
            raise ValueError("proportion must lie in (0, 1]")


@dataclass
class PathForest:
    """Ordered forest of path nodes; every root-to-leaf path is one model."""

    roots: list[PathNode]
    depth: int
    config: MpsConfig
    names: list[str]

    def paths(self) -> list[tuple[int, ...]]:
        out: list[tuple[int, ...]] = []

        def walk(node: PathNode, prefix: tuple[int, ...]):
            prefix = prefix + (node.covariate,)
            if not node.children:
                out.append(prefix)
            for ch in node.children:
                walk(ch, prefix)

        for root in self.roots:
            walk(root, ())
        return out

    @property
    def n_paths(self) -> int:
        return len(self.paths())


@dataclass
class StabilityResult:
    """Stability-selection output: per-step selection proportions and the final set."""

    theta_by_step: np.ndarray  # (depth, p)
    selected: tuple[int, ...]
    rule: str

    def __post_init__(self):
        t = np.asarray(self.theta_by_step)
        if t.size and (t.min() < 0.0 or t.max() > 1.0):
            raise ValueError("selection proportions must lie in [0, 1]")


def _subsample_size(n: int, gamma: float) -> int:
    return min(n, max(1, int(np.floor(n ** gamma))))


def _admission_threshold(r: int, D: int, mode: str) -> int:
    thr = r - D + (1 if mode == "strict" else 0)
    return max(1, thr)


def _node_counts(config: MpsConfig, x, y, selected, candidates, m, rng):
    mc = config.model_class
    if not config.score_holdout:
        if mc.kind == "ols":
            return _kernels.ols_node_counts(rng, x, y, selected, candidates,
                                            m, config.r)
        if mc.kind == "logistic":
            return _kernels.logistic_node_counts(rng, x, y, selected, candidates,
                                                 m, config.r,
                                                 mc.logistic_max_iter,
                                                 mc.logistic_tol)

    def scorer(rows):
        if config.score_holdout and len(rows) >= 4:
            half = len(rows) // 2
            fit_rows, val_rows = rows[:half], rows[half:]
            return _holdout_scores(mc, x, y, fit_rows, val_rows,
                                   selected, candidates)
        return score_candidates(mc, x, y, rows, selected, candidates)

    return _kernels.generic_node_counts(scorer, x.shape[0], m, config.r, rng)


def _holdout_scores(mc, x, y, fit_rows, val_rows, selected, candidates):
    # fit on one half of the subsample, score squared error on the other
    from .datasets import DataMatrix
    from .learners import fit as fit_model

    out = np.empty(len(candidates))
    train = DataMatrix(x[fit_rows], y[fit_rows],
                       [f"c{j}" for j in range(x.shape[1])])
    for i, k in enumerate(candidates):
        try:
            model = fit_model(mc, train, list(selected) + [int(k)])
        except (ValueError, np.linalg.LinAlgError):
            out[i] = np.inf
            continue
        resid = model.predict(x[val_rows]) - y[val_rows]
        out[i] = float(resid @ resid) / len(val_rows)
    return out


def run_mps(data, config: MpsConfig, threads: int = 1) -> PathForest:
    """Build the MPS path forest for the given data and configuration.

    At each node the remaining candidates are sampled under rule R with
    subsamples of size floor(n^gamma); every candidate whose count clears
    the slack threshold spawns a child.  Children are ordered by descending
    count (ties by ascending index) and carry count / total-draws as their
    selection proportion.  Fully deterministic given config.seed, for any
    thread count.
    """
    p = data.p
    if config.d > p:
        raise ValueError(f"depth d={config.d} exceeds p={p}")
    x = np.ascontiguousarray(data.x)
    y = np.ascontiguousarray(data.y)
    m = _subsample_size(data.n, config.gamma)
    d_seed = derive_int_seed(config.seed, "find-d")

    def expand(prefix: tuple[int, ...], threshold: int):
        in_prefix = set(prefix)
        cands = np.array([j for j in range(p) if j not in in_prefix],
                         dtype=np.int64)
        sel = np.array(prefix, dtype=np.int64)
        rng = derive_rng(config.seed, "node", *prefix)
        counts, total = _node_counts(config, x, y, sel, cands, m, rng)
        admitted = [(int(c), int(cnt)) for c, cnt in zip(cands, counts)
                    if cnt >= threshold]
        admitted.sort(key=lambda t: (-t[1], t[0]))
        return [PathNode(c, cnt, cnt / total) for c, cnt in admitted]

    roots: list[PathNode] = []
    frontier: list[tuple[tuple[int, ...], PathNode | None]] = [((), None)]
    for depth in range(1, config.d + 1):
        n_cand = p - depth + 1
        D = find_min_D(n_cand, config.r, config.p_star, config.nsim, d_seed)
        threshold = _admission_threshold(config.r, D, config.threshold_mode)
        prefixes = [pfx for pfx, _ in frontier]
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                batches = list(pool.map(lambda q: expand(q, threshold), prefixes))
        else:
            batches = [expand(q, threshold) for q in prefixes]
        nxt: list[tuple[tuple[int, ...], PathNode | None]] = []
        for (prefix, parent), children in zip(frontier, batches):
            if parent is None:
                roots.extend(children)
            else:
                parent.children = children
            nxt.extend((prefix + (ch.covariate,), ch) for ch in children)
        frontier = nxt
    return PathForest(roots, config.d, config, list(data.names))


def run_fss(data, config: MpsConfig, B: int | None = None) -> list[int]:
    """Forward stability selection: a single stabilized forward path.

    At each step, exactly B subsamples are drawn and the most frequently
    winning candidate is kept (ties to the smallest index).  When B is None
    it defaults per step to r * n_candidates / 4, capped at 500.
    """
    if B is not None and B < 1:
        raise ValueError("B must be >= 1")
    p = data.p
    if config.d > p:
        raise ValueError(f"depth d={config.d} exceeds p={p}")
    x = np.ascontiguousarray(data.x)
    y = np.ascontiguousarray(data.y)
    m = _subsample_size(data.n, config.gamma)
    selected: list[int] = []
    for step in range(config.d):
        cands = np.array([j for j in range(p) if j not in selected],
                         dtype=np.int64)
        sel = np.array(selected, dtype=np.int64)
        b_step = B if B is not None else min(500, max(1, (config.r * len(cands)) // 4))
        rng = derive_rng(config.seed, "fss", step)
        counts = np.zeros(len(cands), dtype=np.int64)
        for _ in range(b_step):
            rows = draw_subsample(data.n, m, rng)
            scores = score_candidates(config.model_class, x, y, rows, sel, cands)
            k = int(np.argmin(scores))
            if np.isfinite(scores[k]):
                counts[k] += 1
        selected.append(int(cands[np.argmax(counts)]))
    return selected


def run_stability_selection(data, B: int, depth: int, rule,
                            model_class: ModelClass | None = None,
                            seed: int = 0) -> StabilityResult:
    """Classical stability selection with forward selection on half-samples.

    Each of B resamples of size floor(n/2) (without replacement) is run
    through forward selection to ``depth``; theta[step, j] is the fraction
    of resamples in which covariate j appears among the first step+1
    selections.  ``rule`` is ("top_s", s) or ("threshold", pi_thr), applied
    to the final-step proportions.
    """
    if B < 1:
        raise ValueError("B must be >= 1")
    if depth > data.p:
        raise ValueError(f"depth {depth} exceeds p={data.p}")
    mc = model_class or ModelClass("ols")
    x = np.ascontiguousarray(data.x)
    y = np.ascontiguousarray(data.y)
    half = data.n // 2
    p = data.p
    picks = np.zeros((B, depth), dtype=np.int64)
    for b in range(B):
        rng = derive_rng(seed, "stability", b)
        rows = draw_subsample(data.n, half, rng)
        sel: list[int] = []
        for step in range(depth):
            cands = np.array([j for j in range(p) if j not in sel],
                             dtype=np.int64)
            scores = score_candidates(mc, x, y, rows,
                                      np.array(sel, dtype=np.int64), cands)
            k = int(np.argmin(scores))
            if not np.isfinite(scores[k]):
                raise ValueError("no admissible covariate on a resample")
            sel.append(int(cands[k]))
        picks[b] = sel
    theta = np.zeros((depth, p))
    for lam in range(1, depth + 1):
        hit = np.zeros((B, p), dtype=bool)
        for b in range(B):
            hit[b, picks[b, :lam]] = True
        theta[lam - 1] = hit.mean(axis=0)

    final = theta[depth - 1]
    kind, value = rule
    if kind == "top_s":
        s = int(value)
        order = np.lexsort((np.arange(p), -final))
        selected = tuple(sorted(int(j) for j in order[:s]))
        label = f"top_s({s})"
    elif kind == "threshold":
        selected = tuple(int(j) for j in np.flatnonzero(final > float(value)))
        label = f"threshold({float(value)})"
    else:
        raise ValueError(f"unknown stability rule {kind!r}")
    return StabilityResult(theta, selected, label)


def enumerate_models(forest: PathForest):
    """All root-to-leaf covariate sequences plus the set-deduplicated family.

    Two paths visiting the same covariates in different orders collapse to
    one entry in the deduplicated list (first occurrence order).
    """
    paths = forest.paths()
    seen: dict[frozenset, None] = {}
    for path in paths:
        seen.setdefault(frozenset(path))
    return paths, [sorted(fs) for fs in seen]
