"""Gravity model with power-law distance cost, fitted by particle swarm.

The model for the flow between cities i and j is

    I_ij = k * S_i * S_j * d_ij**(-beta)

with latent city sizes S and great-circle distance d in km. For each decay
exponent beta on a grid, a particle swarm searches log-size space for the
size vector maximizing the Pearson correlation between predicted and observed
flows over the observed pairs; the beta with the best correlation wins. The
correlation is invariant under a common scaling of the sizes, so the gauge is
fixed by normalizing fitted sizes to mean 1 and the prefactor k is set
afterwards by least squares through the origin.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .geo import DistanceMatrix
from .ingest import FlowTable

BETA_GRID_DEFAULT: tuple[float, ...] = tuple(round(0.1 * k, 10) for k in range(1, 21))


@dataclass(frozen=True)
class GravityModel:
    """Fitted or hand-built gravity parameters. Sizes are keyed by city id."""

    beta: float
    k: float
    sizes: Mapping[str, float]

    def __post_init__(self) -> None:
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.k > 0:
            raise ValueError(f"k must be positive, got {self.k}")
        for cid, s in self.sizes.items():
            if not s > 0:
                raise ValueError(f"size for {cid!r} must be positive, got {s}")

    def size(self, city_id: str) -> float:
        try:
            return self.sizes[city_id]
        except KeyError:
            raise KeyError(f"no fitted size for city {city_id!r}") from None


def predict(model: GravityModel, dm: DistanceMatrix, pairs: Sequence[tuple[str, str]]) -> np.ndarray:
    """Predicted flow for each (id_i, id_j) pair, aligned with ``pairs``.

    Symmetric in the pair order. Zero distances are rejected: the power-law
    cost diverges there.
    """
    out = np.empty(len(pairs))
    for k, (id_i, id_j) in enumerate(pairs):
        d = dm.distance(id_i, id_j)
        if not d > 0:
            raise ValueError(f"pair ({id_i!r}, {id_j!r}) has non-positive distance {d}")
        out[k] = model.k * model.size(id_i) * model.size(id_j) * d ** (-model.beta)
    return out


@dataclass(frozen=True)
class PsoConfig:
    """Swarm settings.

    The main phase is a constriction-style swarm over log sizes. Because the
    selection between neighboring grid betas rides on objective differences of
    order 1e-4, the main phase is followed by ``refine_phases`` restarts in a
    shrinking Gaussian ball around the incumbent best, which polish the last
    few digits without changing which basin is found.
    """

    swarm_size: int = 50
    iterations: int = 500
    inertia: float = 0.729
    cognitive: float = 1.49445
    social: float = 1.49445
    log_size_bounds: tuple[float, float] = (-6.0, 6.0)
    heuristic_init: bool = True
    refine_phases: int = 3
    refine_iterations: int = 300
    refine_radius: float = 0.1
    refine_shrink: float = 0.1

    def __post_init__(self) -> None:
        if self.swarm_size < 2:
            raise ValueError("swarm_size must be at least 2")
        if self.iterations < 1 or self.refine_iterations < 0:
            raise ValueError("iteration counts must be positive")
        lo, hi = self.log_size_bounds
        if not lo < hi:
            raise ValueError(f"bad log_size_bounds {self.log_size_bounds}")


@dataclass(frozen=True)
class PairResidual:
    city_i: str
    city_j: str
    observed: float
    predicted: float

    @property
    def log_residual(self) -> float:
        return float(np.log(self.observed) - np.log(self.predicted))


@dataclass(frozen=True)
class GravityFit:
    """Result of a grid-plus-swarm fit.

    ``gof`` is the Pearson correlation between final predictions and observed
    flows; ``beta_gof`` holds the best correlation found for every grid beta.
    ``history`` (when tracked) is the swarm's best objective after each
    iteration for the winning beta, a non-decreasing sequence.
    """

    model: GravityModel
    gof: float
    beta_gof: dict[float, float]
    residuals: tuple[PairResidual, ...]
    seed: int
    history: Optional[tuple[float, ...]] = None

    @property
    def n_pairs(self) -> int:
        return len(self.residuals)


def _pearson_rows(pred: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Pearson correlation of each row of ``pred`` with ``w``; -1 on zero variance."""
    pc = pred - pred.mean(axis=1, keepdims=True)
    wc = w - w.mean()
    num = pc @ wc
    den = np.sqrt((pc * pc).sum(axis=1) * float(wc @ wc))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = num / den
    return np.where(den > 0, r, -1.0)


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    return float(_pearson_rows(a[None, :], b)[0])


def _run_phase(objective, x, v, gens, lo, hi, iters, cfg: PsoConfig, vmax, history):
    """One swarm phase; returns (gbest, gbest_val) and appends to history."""
    val = objective(x)
    pbest = x.copy()
    pbest_val = val.copy()
    g_idx = int(np.argmax(val))
    gbest = x[g_idx].copy()
    gbest_val = float(val[g_idx])
    n = x.shape[1]
    for _ in range(iters):
        # Per-particle generators keep the draw sequence independent of any
        # batching, so results cannot depend on execution layout.
        r = np.stack([g.uniform(size=(2, n)) for g in gens])
        v = (
            cfg.inertia * v
            + cfg.cognitive * r[:, 0, :] * (pbest - x)
            + cfg.social * r[:, 1, :] * (gbest[None, :] - x)
        )
        np.clip(v, -vmax, vmax, out=v)
        x = np.clip(x + v, lo, hi)
        val = objective(x)
        better = val > pbest_val
        pbest[better] = x[better]
        pbest_val[better] = val[better]
        b = int(np.argmax(pbest_val))
        if pbest_val[b] > gbest_val:
            gbest_val = float(pbest_val[b])
            gbest = pbest[b].copy()
        history.append(gbest_val)
    return gbest, gbest_val


def _fit_sizes_for_beta(
    w: np.ndarray,
    logd: np.ndarray,
    iu: np.ndarray,
    ju: np.ndarray,
    n_cities: int,
    beta: float,
    seed_seq: np.random.SeedSequence,
    cfg: PsoConfig,
    heuristic: Optional[np.ndarray],
) -> tuple[np.ndarray, float, list[float]]:
    """Swarm search over log sizes for one beta. Returns (log_sizes, gof, history)."""
    lo, hi = cfg.log_size_bounds
    offset = -beta * logd

    def objective(x: np.ndarray) -> np.ndarray:
        pred = np.exp(x[:, iu] + x[:, ju] + offset[None, :])
        return _pearson_rows(pred, w)

    children = seed_seq.spawn(cfg.swarm_size + 1)
    gens = [np.random.default_rng(c) for c in children[: cfg.swarm_size]]
    rng_init = np.random.default_rng(children[cfg.swarm_size])

    x = rng_init.uniform(lo, hi, size=(cfg.swarm_size, n_cities))
    if cfg.heuristic_init and heuristic is not None:
        x[0] = heuristic
        for p in range(1, max(2, cfg.swarm_size // 5)):
            x[p] = heuristic + gens[p].normal(0.0, 0.3, n_cities)
        np.clip(x, lo, hi, out=x)
    v = np.zeros_like(x)

    history: list[float] = []
    gbest, gbest_val = _run_phase(objective, x, v, gens, lo, hi, cfg.iterations, cfg, hi - lo, history)

    radius = cfg.refine_radius
    for _ in range(cfg.refine_phases):
        x = np.stack([gbest + g.normal(0.0, radius, n_cities) for g in gens])
        x[0] = gbest  # incumbent survives, so a phase can only improve
        np.clip(x, lo, hi, out=x)
        v = np.zeros_like(x)
        gbest, gbest_val = _run_phase(
            objective, x, v, gens, lo, hi, cfg.refine_iterations, cfg, radius * 4.0, history
        )
        radius *= cfg.refine_shrink
    return gbest, gbest_val, history


def fit_pso(
    flows: FlowTable,
    dm: DistanceMatrix,
    betas: Optional[Sequence[float]] = None,
    config: Optional[PsoConfig] = None,
    seed: int = 0,
    track_history: bool = False,
) -> GravityFit:
    """Fit the gravity model to observed flows.

    Only observed pairs enter the objective; absent pairs are treated as
    unobserved, not as zero. Sizes are fitted for every city appearing in a
    flow. Deterministic for fixed inputs and seed: every random stream is
    spawned from ``seed`` per beta and per particle.
    """
    cfg = config or PsoConfig()
    beta_grid = tuple(float(b) for b in (betas if betas is not None else BETA_GRID_DEFAULT))
    if len(beta_grid) == 0:
        raise ValueError("empty beta grid")
    if any(not b > 0 for b in beta_grid):
        raise ValueError("all betas must be positive")
    if len(set(beta_grid)) != len(beta_grid):
        raise ValueError("duplicate betas in grid")

    pairs = flows.pairs()
    if len(pairs) < 3:
        raise ValueError(f"need at least 3 observed pairs, got {len(pairs)}")
    city_ids = sorted({cid for pair in pairs for cid in pair})
    cindex = {cid: k for k, cid in enumerate(city_ids)}
    iu = np.array([cindex[i] for i, _ in pairs], dtype=np.intp)
    ju = np.array([cindex[j] for _, j in pairs], dtype=np.intp)
    w = np.array([flows.get(i, j) for i, j in pairs], dtype=float)
    if np.all(w == w[0]):
        raise ValueError("degenerate flows: all observed weights are equal")
    d = np.array([dm.distance(i, j) for i, j in pairs])
    if not np.all(d > 0):
        bad = pairs[int(np.argmin(d))]
        raise ValueError(f"pair {bad} has non-positive distance")
    logd = np.log(d)

    heuristic = None
    if cfg.heuristic_init:
        # Flow strengths are a serviceable size proxy: I_ij ~ S_i S_j, so
        # log strength ~ log S_i up to a shared offset absorbed by the gauge.
        s = np.zeros(len(city_ids))
        np.add.at(s, iu, w)
        np.add.at(s, ju, w)
        logs = np.log(s)
        heuristic = (logs - logs.mean()) / 2.0

    master = np.random.SeedSequence(seed)
    beta_children = master.spawn(len(beta_grid))
    beta_gof: dict[float, float] = {}
    best = None
    for bi, beta in enumerate(beta_grid):
        x_beta, gof_beta, hist = _fit_sizes_for_beta(
            w, logd, iu, ju, len(city_ids), beta, beta_children[bi], cfg, heuristic
        )
        beta_gof[beta] = gof_beta
        if best is None or gof_beta > best[1]:
            best = (beta, gof_beta, x_beta, hist)

    beta_star, _, x_star, hist_star = best
    sizes_raw = np.exp(x_star)
    sizes = sizes_raw / sizes_raw.mean()  # gauge: mean fitted size is 1
    pred0 = sizes[iu] * sizes[ju] * d ** (-beta_star)
    k_hat = float((w @ pred0) / (pred0 @ pred0))  # least squares through origin
    predicted = k_hat * pred0
    gof = _pearson(predicted, w)

    model = GravityModel(beta=beta_star, k=k_hat, sizes={cid: float(sizes[cindex[cid]]) for cid in city_ids})
    residuals = tuple(
        PairResidual(city_i=i, city_j=j, observed=float(flows.get(i, j)), predicted=float(p))
        for (i, j), p in zip(pairs, predicted)
    )
    return GravityFit(
        model=model,
        gof=gof,
        beta_gof=beta_gof,
        residuals=residuals,
        seed=seed,
        history=tuple(hist_star) if track_history else None,
    )


@dataclass(frozen=True)
class ResidualSplit:
    """Mean log residual log(observed/predicted) for intra- and inter-region pairs."""

    intra_mean: float
    inter_mean: float
    n_intra: int
    n_inter: int


def residual_split(fit: GravityFit, cities) -> ResidualSplit:
    """Split fit residuals by whether the pair lies within one region.

    Every city appearing in the residuals must carry a region label, and both
    groups must be non-empty, otherwise the split is meaningless.
    """
    region = {}
    for c in cities:
        region[c.id] = c.region
    intra = []
    inter = []
    for row in fit.residuals:
        for cid in (row.city_i, row.city_j):
            if cid not in region:
                raise ValueError(f"city {cid!r} missing from city list")
            if region[cid] is None:
                raise ValueError(f"city {cid!r} has no region label")
        (intra if region[row.city_i] == region[row.city_j] else inter).append(row.log_residual)
    if not intra or not inter:
        raise ValueError("need both intra-region and inter-region pairs")
    return ResidualSplit(
        intra_mean=float(np.mean(intra)),
        inter_mean=float(np.mean(inter)),
        n_intra=len(intra),
        n_inter=len(inter),
    )
