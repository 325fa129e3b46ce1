"""Complete-cascade (b, h) estimation from sampled-tree statistics.

A complete tree with branching ``b`` and depth ``h`` observed through
independent node sampling at probability ``p`` has closed-form expectations
for the matched statistics:

* nodes:    ``p * N(b, h)``
* edges:    ``p^2 * (N(b, h) - 1)``          (both endpoints sampled)
* isolated: ``p (1-p)^b  +  I * p (1-p)^(b+1)  +  b^h * p (1-p)``
  with ``I`` the internal non-root count — a sampled node is isolated when
  its tree neighbours are all unsampled
* max level: ``sum_{d=0}^{h-1} (1 - (1-p)^{M_d})`` with ``M_d`` the node count
  above level ``d``; the empty sample contributes level 0

Fractional depth interpolates every statistic between ``floor(h)`` and
``ceil(h)``. The fit minimizes the sum of squared relative errors (denominator
floored at 1) over a coarse (b, h) grid followed by one 10x local refinement,
so it is deterministic and needs no gradients.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from cascadekit.model import TreeParams

STATISTIC_NAMES = ("nodes", "edges", "isolated", "max_level")


@dataclass(frozen=True)
class SampledTreeExpectations:
    e_nodes: float
    e_edges: float
    e_isolated: float
    e_maxlevel: float

    def as_vector(self) -> np.ndarray:
        return np.array([self.e_nodes, self.e_edges, self.e_isolated, self.e_maxlevel])


@dataclass(frozen=True)
class SearchSpec:
    """Grid-search domain: coarse sweep plus one local refinement pass."""

    b_range: tuple[float, float] = (1.05, 16.0)
    h_range: tuple[float, float] = (1.0, 24.0)
    b_step: float = 0.05
    h_step: float = 0.25
    refine_factor: int = 10

    def __post_init__(self) -> None:
        if self.b_range[0] < 1.0 or self.b_range[1] <= self.b_range[0]:
            raise ValueError("b_range must be within [1, inf) and nonempty")
        if self.h_range[0] < 0.0 or self.h_range[1] <= self.h_range[0]:
            raise ValueError("h_range must be within [0, inf) and nonempty")
        if self.b_step <= 0 or self.h_step <= 0 or self.refine_factor < 1:
            raise ValueError("steps must be positive")

    def b_grid(self) -> np.ndarray:
        return _inclusive_grid(self.b_range[0], self.b_range[1], self.b_step)

    def h_grid(self) -> np.ndarray:
        return _inclusive_grid(self.h_range[0], self.h_range[1], self.h_step)


def _inclusive_grid(lo: float, hi: float, step: float) -> np.ndarray:
    n = int(round((hi - lo) / step))
    grid = lo + step * np.arange(n + 1)
    return grid[grid <= hi + 1e-12]


@dataclass(frozen=True)
class FitResult:
    params: TreeParams
    objective: float
    residuals: dict[str, float]

    def __post_init__(self) -> None:
        total = math.fsum(r * r for r in self.residuals.values())
        if not math.isclose(total, self.objective, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError("objective must equal the sum of squared residuals")


@dataclass(frozen=True)
class StratumSummary:
    stratum: str
    mu_b: float
    sigma_b: float
    mu_h: float
    sigma_h: float
    n_cascades: int

    def __post_init__(self) -> None:
        if self.sigma_b < 0 or self.sigma_h < 0:
            raise ValueError("standard deviations must be >= 0")
        if self.n_cascades < 1:
            raise ValueError("a stratum summary needs at least one cascade")


def _expectation_columns(p: float, b: np.ndarray, max_levels: int) -> np.ndarray:
    """Expectations for every integer depth 0..max_levels over an array of b.

    Returns an array of shape (4, len(b), max_levels + 1) ordered like
    STATISTIC_NAMES. Uses prefix sums of b^k so b == 1 needs no special case.
    """
    b = np.asarray(b, dtype=float)
    ks = np.arange(max_levels + 1)
    powers = b[:, None] ** ks[None, :]  # b^k
    prefix = np.cumsum(powers, axis=1)  # N(b, k)
    q = 1.0 - p

    out = np.empty((4, b.size, max_levels + 1))
    out[0] = p * prefix
    out[1] = p * p * (prefix - 1.0)
    # isolated: root + internal non-root + bottom level
    iso = np.empty_like(prefix)
    iso[:, 0] = p
    for h in range(1, max_levels + 1):
        internal = prefix[:, h - 1] - 1.0  # sum of b^k for k=1..h-1
        iso[:, h] = (
            p * q**b + internal * p * q ** (b + 1.0) + powers[:, h] * p * q
        )
    out[2] = iso
    # max observed level: sum over d < h of 1 - q^{nodes above level d}
    ml = np.zeros_like(prefix)
    with np.errstate(under="ignore"):
        for h in range(1, max_levels + 1):
            above = prefix[:, h : h + 1] - prefix[:, :h]  # M_d for d = 0..h-1
            ml[:, h] = (1.0 - q**above).sum(axis=1)
    out[3] = ml
    return out


def _interp_depth(columns: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Linear interpolation of the integer-depth expectation columns at h."""
    lo = np.floor(h).astype(int)
    frac = h - lo
    hi = np.minimum(lo + 1, columns.shape[2] - 1)
    base = columns[:, :, lo]
    upper = columns[:, :, hi]
    return base * (1.0 - frac)[None, None, :] + upper * frac[None, None, :]


def expectations(p: float, params: TreeParams) -> SampledTreeExpectations:
    """Analytic expectations of the matched statistics of one sampled tree."""
    if not 0 < p <= 1:
        raise ValueError("sampling probability must be in (0, 1]")
    cols = _expectation_columns(p, np.array([params.branching]), math.ceil(params.depth))
    vec = _interp_depth(cols, np.array([params.depth]))[:, 0, 0]
    return SampledTreeExpectations(*[float(v) for v in vec])


def _objective_grid(
    expect: np.ndarray, observed: np.ndarray, denom: np.ndarray
) -> np.ndarray:
    resid = (expect - observed[:, None, None]) / denom[:, None, None]
    return np.einsum("sij,sij->ij", resid, resid)


class _GridCache:
    """Coarse expectation grids keyed by (p, search); fits share them."""

    def __init__(self) -> None:
        self._cache: dict[tuple, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    def get(self, p: float, search: SearchSpec):
        key = (p, search.b_range, search.h_range, search.b_step, search.h_step)
        if key not in self._cache:
            bs = search.b_grid()
            hs = search.h_grid()
            cols = _expectation_columns(p, bs, math.ceil(search.h_range[1]))
            grid = _interp_depth(cols, hs)
            self._cache[key] = (bs, hs, grid)
        return self._cache[key]


_GRIDS = _GridCache()


def fit_vector(observed, p: float, search: SearchSpec | None = None) -> FitResult:
    """Fit (b, h) to a statistics vector ordered like STATISTIC_NAMES."""
    if not 0 < p <= 1:
        raise ValueError("sampling probability must be in (0, 1]")
    search = search or SearchSpec()
    observed = np.asarray(observed, dtype=float)
    if observed.shape != (4,):
        raise ValueError("observed statistics must be a 4-vector")
    if observed[0] < 2:
        raise ValueError("cascade too small to fit (needs at least 2 observed nodes)")
    denom = np.maximum(observed, 1.0)

    bs, hs, grid = _GRIDS.get(p, search)
    objective = _objective_grid(grid, observed, denom)
    flat = int(np.argmin(objective))
    bi, hi = np.unravel_index(flat, objective.shape)
    best = (float(objective[bi, hi]), float(bs[bi]), float(hs[hi]))

    # one refinement pass at refine_factor x resolution around the coarse optimum
    fine_b_step = search.b_step / search.refine_factor
    fine_h_step = search.h_step / search.refine_factor
    fb = np.clip(
        bs[bi] + fine_b_step * np.arange(-search.refine_factor, search.refine_factor + 1),
        search.b_range[0],
        search.b_range[1],
    )
    fh = np.clip(
        hs[hi] + fine_h_step * np.arange(-search.refine_factor, search.refine_factor + 1),
        search.h_range[0],
        search.h_range[1],
    )
    fb = np.unique(fb)
    fh = np.unique(fh)
    cols = _expectation_columns(p, fb, math.ceil(float(fh[-1])))
    fine_grid = _interp_depth(cols, fh)
    fine_obj = _objective_grid(fine_grid, observed, denom)
    flat = int(np.argmin(fine_obj))
    fbi, fhi = np.unravel_index(flat, fine_obj.shape)
    if float(fine_obj[fbi, fhi]) < best[0]:
        best = (float(fine_obj[fbi, fhi]), float(fb[fbi]), float(fh[fhi]))

    params = TreeParams(best[1], best[2])
    vec = expectations(p, params).as_vector()
    residuals = {
        name: float((vec[i] - observed[i]) / denom[i]) for i, name in enumerate(STATISTIC_NAMES)
    }
    return FitResult(params=params, objective=math.fsum(r * r for r in residuals.values()), residuals=residuals)


def fit(stats, p: float, search: SearchSpec | None = None) -> FitResult:
    """Fit (b, h) to one reconstructed cascade's statistics."""
    return fit_vector(
        [stats.n_nodes, stats.n_edges, stats.n_isolated, stats.max_level], p, search
    )


def fit_mean(stats_list, p: float, search: SearchSpec | None = None) -> FitResult:
    """Fit (b, h) to the mean statistics of a cascade collection."""
    if not stats_list:
        raise ValueError("need at least one cascade to fit")
    mat = np.array(
        [[s.n_nodes, s.n_edges, s.n_isolated, s.max_level] for s in stats_list], dtype=float
    )
    return fit_vector(mat.mean(axis=0), p, search)


@dataclass
class StratifiedFits:
    summaries: list[StratumSummary]
    per_cascade: dict[str, list[tuple[str, FitResult]]] = field(default_factory=dict)


def fit_stratified(
    labelled_stats,
    p: float,
    search: SearchSpec | None = None,
) -> StratifiedFits:
    """Per-cascade fits aggregated to (mean, population std) per stratum.

    ``labelled_stats`` yields (stratum_label, CascadeStats) pairs. Strata where
    no cascade is fittable are omitted with a warning.
    """
    by_stratum: dict[str, list] = {}
    for label, stats in labelled_stats:
        by_stratum.setdefault(label, []).append(stats)

    summaries = []
    per_cascade: dict[str, list[tuple[str, FitResult]]] = {}
    for label in sorted(by_stratum):
        fits = []
        for stats in by_stratum[label]:
            try:
                fits.append((stats.message, fit(stats, p, search)))
            except ValueError:
                continue
        if not fits:
            warnings.warn(f"stratum {label!r} has no fittable cascades; omitted")
            continue
        per_cascade[label] = fits
        bs = np.array([f.params.branching for _, f in fits])
        hs = np.array([f.params.depth for _, f in fits])
        summaries.append(
            StratumSummary(
                stratum=label,
                mu_b=float(bs.mean()),
                sigma_b=float(bs.std()),
                mu_h=float(hs.mean()),
                sigma_h=float(hs.std()),
                n_cascades=len(fits),
            )
        )
    return StratifiedFits(summaries=summaries, per_cascade=per_cascade)


def write_fits_csv(fits: list[tuple[str, FitResult]], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["message_id", "b", "h", "objective"])
        for message, result in fits:
            writer.writerow(
                [message, repr(result.params.branching), repr(result.params.depth), repr(result.objective)]
            )


def write_strata_csv(summaries: list[StratumSummary], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stratum", "mu_b", "sigma_b", "mu_h", "sigma_h", "n"])
        for s in summaries:
            writer.writerow(
                [s.stratum, repr(s.mu_b), repr(s.sigma_b), repr(s.mu_h), repr(s.sigma_h), s.n_cascades]
            )
