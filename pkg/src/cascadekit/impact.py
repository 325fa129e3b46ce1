"""Population-level reach estimation.

Complete cascades are regenerated from fitted (branching, depth) parameters:
each cascade draws depth ``floor(h) + Bernoulli(h - floor(h))`` and every node
above the bottom level draws ``floor(b) + Bernoulli(b - floor(b))`` children,
so integer parameters reproduce the complete tree exactly and expected node
counts match the interpolated tree-size formula. Every generated node then
draws one group size i.i.d. with replacement from the stratum's empirical
sizes; the reach of a replicate is the summed size. Individuals belonging to
several groups are double-counted on purpose (no membership overlap data).
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field

import numpy as np

from cascadekit.model import TreeParams

QUANTILE_LEVELS = (5, 25, 50, 75, 95)


@dataclass(frozen=True)
class ImpactConfig:
    replicates: int
    seed: int
    size_source: dict[str, tuple[int, ...]]
    params_source: dict[str, TreeParams]

    def __post_init__(self) -> None:
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        for stratum in self.params_source:
            sizes = self.size_source.get(stratum)
            if not sizes:
                raise ValueError(f"stratum {stratum!r} has an empty group-size sample")
            if any(s < 1 for s in sizes):
                raise ValueError(f"stratum {stratum!r} has group sizes < 1")


@dataclass(frozen=True)
class ReachDistribution:
    stratum: str
    samples: tuple[float, ...]
    mean: float

    def __post_init__(self) -> None:
        if abs(self.mean - float(np.mean(self.samples))) > 1e-9:
            raise ValueError("mean must equal the arithmetic mean of the samples")


def generate_tree(params: TreeParams, rng) -> int:
    """Node count of one regenerated complete cascade.

    ``rng`` is a numpy Generator or a seed. Integer parameters make the draw
    deterministic; fractional ones randomize depth once per cascade and child
    counts once per node (level-batched binomials, so big trees stay cheap).
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    b, h = params.branching, params.depth
    base_b = int(np.floor(b))
    frac_b = b - base_b
    base_h = int(np.floor(h))
    frac_h = h - base_h
    depth = base_h + (1 if frac_h > 0 and rng.random() < frac_h else 0)
    total = 1
    width = 1
    for _ in range(depth):
        width = base_b * width + (int(rng.binomial(width, frac_b)) if frac_b > 0 else 0)
        total += width
    return total


def _stratum_rng(seed: int, stratum: str) -> np.random.Generator:
    digest = hashlib.sha256(stratum.encode("utf-8")).digest()
    key = int.from_bytes(digest[:8], "big")
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(key,)))


def estimate_reach(config: ImpactConfig) -> list[ReachDistribution]:
    """Monte-Carlo reach distributions per stratum.

    Each stratum gets an RNG stream keyed by a stable hash of its label, so
    results do not depend on stratum ordering in the config.
    """
    out = []
    for stratum in sorted(config.params_source):
        params = config.params_source[stratum]
        sizes = np.asarray(config.size_source[stratum], dtype=float)
        rng = _stratum_rng(config.seed, stratum)
        samples = np.empty(config.replicates)
        for r in range(config.replicates):
            count = generate_tree(params, rng)
            samples[r] = float(sizes[rng.integers(0, sizes.size, size=count)].sum())
        out.append(
            ReachDistribution(
                stratum=stratum,
                samples=tuple(samples.tolist()),
                mean=float(samples.mean()),
            )
        )
    return out


def reach_quantiles(dist: ReachDistribution) -> dict[int, float]:
    ordered = np.sort(np.asarray(dist.samples))
    return {q: float(np.percentile(ordered, q)) for q in QUANTILE_LEVELS}


def write_reach_csv(distributions: list[ReachDistribution], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stratum", "replicate", "reach"])
        for dist in distributions:
            for index, value in enumerate(dist.samples):
                writer.writerow([dist.stratum, index, repr(value)])


def write_reach_summary_csv(distributions: list[ReachDistribution], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stratum", "mean"] + [f"q{q}" for q in QUANTILE_LEVELS])
        for dist in distributions:
            quantiles = reach_quantiles(dist)
            writer.writerow(
                [dist.stratum, repr(dist.mean)] + [repr(quantiles[q]) for q in QUANTILE_LEVELS]
            )
