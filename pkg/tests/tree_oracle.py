"""Independent oracles for sampled complete-tree statistics.

These build the b-ary tree explicitly and measure the four matched statistics
(nodes, edges, isolated, max level) on sampled subsets, either by Monte Carlo
or by exhaustive enumeration. They deliberately share no code with the
analytic expectation formulas they are used to check.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy import sparse


def build_tree(branching: int, depth: int):
    """Explicit complete tree: (parent index array, level array); root_parent = -1."""
    parents = [-1]
    levels = [0]
    frontier = [0]
    for level in range(1, depth + 1):
        nxt = []
        for node in frontier:
            for _ in range(branching):
                parents.append(node)
                levels.append(level)
                nxt.append(len(parents) - 1)
        frontier = nxt
    return np.array(parents), np.array(levels)


def subset_stats(mask: np.ndarray, parents: np.ndarray, levels: np.ndarray):
    """The four statistics of one sampled subset (batch form: mask is (R, N))."""
    mask = np.atleast_2d(mask).astype(bool)
    n = parents.size
    nonroot = np.where(parents >= 0)[0]

    nodes = mask.sum(axis=1)
    edges = (mask[:, nonroot] & mask[:, parents[nonroot]]).sum(axis=1)

    child_of = sparse.csr_matrix(
        (np.ones(nonroot.size), (nonroot, parents[nonroot])), shape=(n, n)
    )
    sampled_children = np.asarray(mask @ child_of)
    parent_sampled = np.zeros_like(mask)
    parent_sampled[:, nonroot] = mask[:, parents[nonroot]]
    isolated = (mask & ~parent_sampled & (sampled_children == 0)).sum(axis=1)

    max_level = (mask * (levels + 1)).max(axis=1) - 1
    max_level = np.maximum(max_level, 0)  # empty sample counts as level 0
    return nodes, edges, isolated, max_level


def monte_carlo_stats(branching: int, depth: int, p: float, trials: int, seed: int):
    """Mean and standard error of the four statistics over sampled trees."""
    parents, levels = build_tree(branching, depth)
    n = parents.size
    rng = np.random.default_rng(seed)
    sums = np.zeros(4)
    sumsq = np.zeros(4)
    done = 0
    chunk = max(1, min(trials, 20_000_000 // max(n, 1)))
    while done < trials:
        take = min(chunk, trials - done)
        mask = rng.random((take, n)) < p
        cols = np.column_stack(subset_stats(mask, parents, levels)).astype(float)
        sums += cols.sum(axis=0)
        sumsq += (cols**2).sum(axis=0)
        done += take
    mean = sums / trials
    var = np.maximum(sumsq / trials - mean**2, 0.0)
    se = np.sqrt(var / trials)
    return mean, se


def enumerate_stats(branching: int, depth: int, p: float):
    """Exact expectations by enumerating all 2^N sampling outcomes."""
    parents, levels = build_tree(branching, depth)
    n = parents.size
    total = np.zeros(4)
    for bits in itertools.product((0, 1), repeat=n):
        mask = np.array(bits, dtype=bool)
        k = int(mask.sum())
        weight = (p**k) * ((1 - p) ** (n - k))
        stats = subset_stats(mask, parents, levels)
        total += weight * np.array([s[0] for s in stats], dtype=float)
    return total
