"""Hypothesis tests and regressions over per-cascade measurements.

One-sided rank-sum test (midranks for ties; exact subset enumeration up to a
combined-size threshold, tie-corrected normal approximation with continuity
correction above it) and OLS with categorical dummy predictors solved via the
normal equations. Reference levels are forwarding score 0, text modality and
viral-normal content, matching the orientation of the reported tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from itertools import combinations

import numpy as np
from scipy import stats as sps

EXACT_THRESHOLD_DEFAULT = 12


class RankSumMethod(Enum):
    EXACT = "exact"
    NORMAL_APPROX = "normal_approx"


@dataclass(frozen=True)
class RankSumResult:
    statistic: float  # rank-sum of the first sample
    p_value: float
    method: RankSumMethod

    def __post_init__(self) -> None:
        if not 0 <= self.p_value <= 1:
            raise ValueError("p_value must lie in [0, 1]")


def _midranks(values: list[float]) -> list[float]:
    order = sorted(range(len(values)), key=values.__getitem__)
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mid = (i + j) / 2 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        i = j + 1
    return ranks


def rank_sum_test(
    x, y, exact_threshold: int = EXACT_THRESHOLD_DEFAULT
) -> RankSumResult:
    """One-sided rank-sum test of the alternative "x stochastically greater".

    Exact mode enumerates all C(n, |x|) assignments of the pooled midranks and
    counts rank-sums at least as large as the observed one; large samples use
    the normal approximation with tie-corrected variance and a 0.5 continuity
    correction.
    """
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    if not x or not y:
        raise ValueError("both samples must be nonempty")
    n1, n2 = len(x), len(y)
    n = n1 + n2
    ranks = _midranks(x + y)
    statistic = math.fsum(ranks[:n1])

    if n <= exact_threshold:
        # scale by 2 so midranks (.5 steps) become exact integers
        scaled = [int(round(2 * r)) for r in ranks]
        target = int(round(2 * statistic))
        at_least = 0
        total = 0
        for combo in combinations(range(n), n1):
            total += 1
            if sum(scaled[i] for i in combo) >= target:
                at_least += 1
        return RankSumResult(statistic, at_least / total, RankSumMethod.EXACT)

    mean = n1 * (n + 1) / 2.0
    counts = {}
    for r in ranks:
        counts[r] = counts.get(r, 0) + 1
    tie_term = sum(t**3 - t for t in counts.values())
    variance = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if variance <= 0:
        return RankSumResult(statistic, 1.0, RankSumMethod.NORMAL_APPROX)
    z = (statistic - mean - 0.5) / math.sqrt(variance)
    return RankSumResult(statistic, float(sps.norm.sf(z)), RankSumMethod.NORMAL_APPROX)


@dataclass(frozen=True)
class RegressionResult:
    coefficients: dict[str, float]
    standard_errors: dict[str, float]
    p_values: dict[str, float]
    reference_levels: dict[str, str]
    df_residual: int
    used_normal_approx: bool


@dataclass(frozen=True)
class RegressionRow:
    response: float
    forwarding_bucket: str
    modality: str
    content: str


REFERENCE_LEVELS = {
    "forwarding": "0",
    "modality": "text",
    "content": "viral_normal",
}

_FACTOR_ORDERS = {
    "forwarding": ["0", "1", "2", "3", "4", "5+"],
    "modality": ["text", "image", "video"],
    "content": ["viral_normal", "hateful", "misinformation", "propaganda", "unlabeled"],
}


def _term_order(factor: str, level: str) -> tuple:
    known = _FACTOR_ORDERS[factor]
    idx = known.index(level) if level in known else len(known)
    return (idx, level)


def ols_regression(rows: list[RegressionRow], normal_approx_df: int = 200) -> RegressionResult:
    """OLS via the normal equations with classical standard errors.

    Dummy columns are created for every non-reference level present in the
    data, in a fixed term order; rows are canonically sorted first so the
    result is bit-identical under input permutation. Two-sided p-values come
    from the t distribution, switching to the normal tail above
    ``normal_approx_df`` residual degrees of freedom (noted in the result).
    """
    if len(rows) < 2:
        raise ValueError("regression needs at least two rows")
    rows = sorted(
        rows, key=lambda r: (r.response, r.forwarding_bucket, r.modality, r.content)
    )

    levels = {
        "forwarding": sorted(
            {r.forwarding_bucket for r in rows}, key=lambda s: _term_order("forwarding", s)
        ),
        "modality": sorted({r.modality for r in rows}, key=lambda s: _term_order("modality", s)),
        "content": sorted({r.content for r in rows}, key=lambda s: _term_order("content", s)),
    }
    terms = ["(Intercept)"]
    columns = [np.ones(len(rows))]
    accessor = {
        "forwarding": lambda r: r.forwarding_bucket,
        "modality": lambda r: r.modality,
        "content": lambda r: r.content,
    }
    for factor in ("forwarding", "modality", "content"):
        for level in levels[factor]:
            if level == REFERENCE_LEVELS[factor]:
                continue
            terms.append(f"{factor}={level}")
            get = accessor[factor]
            columns.append(np.array([1.0 if get(r) == level else 0.0 for r in rows]))

    design = np.column_stack(columns)
    response = np.array([r.response for r in rows])
    rank = np.linalg.matrix_rank(design)
    if rank < design.shape[1]:
        collinear = _collinear_terms(design, terms)
        raise ValueError(f"rank-deficient design; collinear terms: {', '.join(collinear)}")

    gram = design.T @ design
    beta = np.linalg.solve(gram, design.T @ response)
    residuals = response - design @ beta
    df = len(rows) - design.shape[1]
    if df <= 0:
        raise ValueError("regression needs more rows than terms")
    sigma2 = float(residuals @ residuals) / df
    cov = sigma2 * np.linalg.inv(gram)
    ses = np.sqrt(np.maximum(np.diag(cov), 0.0))

    use_normal = df > normal_approx_df
    p_values = {}
    for term, est, se in zip(terms, beta, ses):
        if se == 0.0:
            p = 1.0 if est == 0.0 else 0.0
        else:
            t = abs(est / se)
            p = float(2 * (sps.norm.sf(t) if use_normal else sps.t.sf(t, df)))
        p_values[term] = p

    return RegressionResult(
        coefficients={t: float(b) for t, b in zip(terms, beta)},
        standard_errors={t: float(s) for t, s in zip(terms, ses)},
        p_values=p_values,
        reference_levels=dict(REFERENCE_LEVELS),
        df_residual=df,
        used_normal_approx=use_normal,
    )


def _collinear_terms(design: np.ndarray, terms: list[str]) -> list[str]:
    offenders = []
    kept = design[:, :1]
    for j in range(1, design.shape[1]):
        candidate = np.column_stack([kept, design[:, j]])
        if np.linalg.matrix_rank(candidate) == kept.shape[1]:
            offenders.append(terms[j])
        else:
            kept = candidate
    return offenders or [t for t in terms[1:]]


QUANTILE_LEVELS = (5, 25, 50, 75, 95)


@dataclass(frozen=True)
class GroupSizeSample:
    stratum: str
    sizes: tuple[int, ...]
    quantiles: dict[int, float]


def _quantile(sorted_values: list[float], level: float) -> float:
    """Linear-interpolation quantile on a pre-sorted sample."""
    if not sorted_values:
        raise ValueError("empty sample")
    pos = (len(sorted_values) - 1) * level / 100.0
    lo = math.floor(pos)
    hi = math.ceil(pos)
    if lo == hi:
        return float(sorted_values[lo])
    frac = pos - lo
    return float(sorted_values[lo] * (1 - frac) + sorted_values[hi] * frac)


def group_size_distribution(cascades, catalog, key: str = "content_type") -> list[GroupSizeSample]:
    """Per-stratum multisets of traversed-group sizes plus summary quantiles.

    Each group contributes once per cascade traversal, so groups visited by
    several cascades count several times.
    """
    missing = sorted({g for c in cascades for g in c.groups if g not in catalog})
    if missing:
        raise ValueError(f"groups missing from catalog: {', '.join(missing)}")
    by_stratum: dict[str, list[int]] = {}
    for cascade in cascades:
        label = cascade.label(key)
        sizes = by_stratum.setdefault(label, [])
        for group in cascade.groups:
            sizes.append(catalog.size(group))
    out = []
    for label in sorted(by_stratum):
        sizes = sorted(by_stratum[label])
        quantiles = {q: _quantile(sizes, q) for q in QUANTILE_LEVELS}
        out.append(GroupSizeSample(stratum=label, sizes=tuple(sizes), quantiles=quantiles))
    return out
