"""Diffusion-forest reconstruction from adoption times.

Each adopting group either attaches to the earlier adopter maximizing the
transmission weight ``transmit_prob * exp(-delay / decay_scale)`` or, when
every candidate weight falls below ``external_weight``, to a virtual EXTERNAL
source. Per-cascade maximum-likelihood trees (``mle_tree``) need no shared
network; ``infer_network`` additionally infers a directed group-group network
by greedy marginal-gain edge addition over the whole cascade collection and
restricts attachments to inferred edges.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from cascadekit.ingest import Cascade, GroupOverlapNetwork

EXTERNAL = "EXTERNAL"


@dataclass(frozen=True)
class TransmissionModel:
    decay_scale: float
    transmit_prob: float = 0.5
    external_weight: float = 1e-3

    def __post_init__(self) -> None:
        if not self.decay_scale > 0:
            raise ValueError("decay_scale must be > 0")
        if not 0 < self.transmit_prob < 1:
            raise ValueError("transmit_prob must be in (0, 1)")
        if not 0 < self.external_weight < self.transmit_prob:
            raise ValueError("external_weight must be in (0, transmit_prob)")


def edge_weight(model: TransmissionModel, delay: float) -> float:
    """Transmission weight for a candidate parent ``delay`` time units earlier."""
    if delay <= 0:
        raise ValueError(f"delay must be > 0 (time order violated), got {delay}")
    return model.transmit_prob * math.exp(-delay / model.decay_scale)


def default_model(
    cascades,
    decay_scale: float | None = None,
    transmit_prob: float = 0.5,
    external_weight: float | None = None,
) -> TransmissionModel:
    """Fill unspecified model parameters from the cascade collection.

    decay_scale defaults to the mean inter-adoption delay (scale-free in the
    timestamp unit); external_weight defaults to a tenth of the weight a
    99th-percentile delay would earn, so only outlier gaps go external.
    """
    gaps = [
        b - a
        for c in cascades
        for a, b in zip(c.times, c.times[1:])
        if b > a
    ]
    if decay_scale is None:
        if not gaps:
            raise ValueError("cannot derive decay_scale: no positive inter-adoption delays")
        decay_scale = float(np.mean(gaps))
    if external_weight is None:
        if not gaps:
            raise ValueError("cannot derive external_weight: no positive inter-adoption delays")
        d99 = float(np.quantile(np.array(gaps), 0.99))
        external_weight = 0.1 * transmit_prob * math.exp(-d99 / decay_scale)
        external_weight = max(external_weight, 1e-300)
    return TransmissionModel(decay_scale, transmit_prob, external_weight)


@dataclass
class DiffusionForest:
    """Reconstructed parent links for one cascade; roots point to EXTERNAL."""

    message: str
    parent: dict[str, str]
    attach_loglik: dict[str, float]
    adoption_time: dict[str, float]

    def check(self) -> None:
        for child, par in self.parent.items():
            if par == EXTERNAL:
                continue
            if self.adoption_time[par] >= self.adoption_time[child]:
                raise AssertionError(f"edge {par}->{child} violates time order")
        # acyclicity follows from strict time ordering

    def levels(self) -> dict[str, int]:
        """Level of each group, component roots (EXTERNAL parents) at level 0."""
        memo: dict[str, int] = {}

        def level(g: str) -> int:
            if g not in memo:
                par = self.parent[g]
                memo[g] = 0 if par == EXTERNAL else level(par) + 1
            return memo[g]

        for g in self.parent:
            level(g)
        return memo


@dataclass(frozen=True)
class CascadeStats:
    """Structural statistics of one reconstructed (partial) cascade."""

    message: str
    n_nodes: int
    n_edges: int
    n_isolated: int
    depth: int
    max_breadth: int

    @property
    def max_level(self) -> int:
        # alias: the fitter's "max observed level" statistic
        return self.depth

    def __post_init__(self) -> None:
        if self.n_nodes < 2:
            raise ValueError("stats need at least two observed nodes")
        if self.n_edges > self.n_nodes - 1:
            raise ValueError("a forest has at most n_nodes - 1 edges")
        if self.n_isolated > self.n_nodes:
            raise ValueError("isolated count exceeds node count")
        if self.depth > self.n_nodes - 1 or self.max_breadth > self.n_nodes:
            raise ValueError("depth/breadth exceed node count")


def mle_tree(
    cascade: Cascade,
    model: TransmissionModel,
    allowed_pairs: GroupOverlapNetwork | None = None,
) -> DiffusionForest:
    """Best-parent attachment per node under the exponential transmission model.

    Candidates are strictly earlier adopters (optionally restricted to pairs of
    the overlap network); EXTERNAL wins when every candidate weight is below
    external_weight. Ties prefer a group parent, then the earlier adoption,
    then the lexicographically smaller group id.
    """
    parent: dict[str, str] = {}
    loglik: dict[str, float] = {}
    times = dict(cascade.adoptions)
    adoptions = list(cascade.adoptions)
    log_eps = math.log(model.external_weight)
    for i, (group, time) in enumerate(adoptions):
        best_parent, best_weight = EXTERNAL, model.external_weight
        best_key = (math.inf, "")
        for cand, cand_time in adoptions[:i]:
            if cand_time >= time:
                continue
            if allowed_pairs is not None and not allowed_pairs.connected(cand, group):
                continue
            weight = edge_weight(model, time - cand_time)
            key = (cand_time, cand)
            if weight > best_weight or (weight == best_weight and key < best_key):
                best_parent, best_weight, best_key = cand, weight, key
        parent[group] = best_parent
        loglik[group] = log_eps if best_parent == EXTERNAL else math.log(best_weight)
    return DiffusionForest(cascade.message, parent, loglik, times)


@dataclass
class InferredNetwork:
    """Directed edges added greedily, with the total log-likelihood trace."""

    edges: list[tuple[str, str]] = field(default_factory=list)
    loglik_trace: list[float] = field(default_factory=list)


def _network_loglik(cascade: Cascade, model: TransmissionModel, in_edges) -> float:
    """Best-parent log-likelihood of one cascade given a directed network.

    The chosen parent edge of each node scores log(beta * exp(-delay/alpha)),
    or log(external_weight) when no network parent beats EXTERNAL; every other
    network edge between time-ordered adopters of this cascade carries the
    non-transmission penalty log(1 - beta).
    """
    times = dict(cascade.adoptions)
    present = set(times)
    log_eps = math.log(model.external_weight)
    log_miss = math.log(1.0 - model.transmit_prob)
    total = 0.0
    potential = 0
    used = 0
    for group, time in cascade.adoptions:
        best, best_src = model.external_weight, None
        for source in in_edges.get(group, ()):
            if source in present and times[source] < time:
                potential += 1
                w = edge_weight(model, time - times[source])
                if w > best:
                    best, best_src = w, source
        if best_src is None:
            total += log_eps
        else:
            total += math.log(best)
            used += 1
    total += (potential - used) * log_miss
    return total


def infer_network(
    cascades: list[Cascade],
    model: TransmissionModel,
    edge_budget: int,
    candidate_edges: GroupOverlapNetwork | None = None,
) -> tuple[InferredNetwork, list[DiffusionForest]]:
    """Greedy marginal-gain network inference over the cascade collection.

    Starts from the external-only network and repeatedly adds the directed
    edge with the largest total log-likelihood gain, stopping at the edge
    budget or when no edge improves the likelihood. Ties break
    lexicographically on (source, target) so results are order-independent.
    """
    if edge_budget < 1:
        raise ValueError("edge_budget must be >= 1")
    candidates: set[tuple[str, str]] = set()
    for c in cascades:
        for i, (u, tu) in enumerate(c.adoptions):
            for v, tv in c.adoptions[i + 1 :]:
                if tu < tv:
                    if candidate_edges is None or candidate_edges.connected(u, v):
                        candidates.add((u, v))

    in_edges: dict[str, set[str]] = defaultdict(set)

    def collection_loglik() -> float:
        return sum(_network_loglik(c, model, in_edges) for c in cascades)

    network = InferredNetwork()
    current = collection_loglik()
    network.loglik_trace.append(current)
    remaining = set(candidates)
    while len(network.edges) < edge_budget and remaining:
        best_gain, best_edge, best_total = 0.0, None, current
        for edge in sorted(remaining):
            u, v = edge
            in_edges[v].add(u)
            total = collection_loglik()
            in_edges[v].discard(u)
            gain = total - current
            if gain > best_gain:
                best_gain, best_edge, best_total = gain, edge, total
        if best_edge is None:
            break
        in_edges[best_edge[1]].add(best_edge[0])
        network.edges.append(best_edge)
        remaining.discard(best_edge)
        current = best_total
        network.loglik_trace.append(current)

    forests = [_forest_from_network(c, model, in_edges) for c in cascades]
    return network, forests


def _forest_from_network(cascade, model, in_edges) -> DiffusionForest:
    times = dict(cascade.adoptions)
    present = set(times)
    parent: dict[str, str] = {}
    loglik: dict[str, float] = {}
    log_eps = math.log(model.external_weight)
    for group, time in cascade.adoptions:
        best, best_src = model.external_weight, EXTERNAL
        best_key = (math.inf, "")
        for source in sorted(in_edges.get(group, ())):
            if source in present and times[source] < time:
                w = edge_weight(model, time - times[source])
                key = (times[source], source)
                if w > best or (w == best and key < best_key):
                    best, best_src, best_key = w, source, key
        parent[group] = best_src
        loglik[group] = log_eps if best_src == EXTERNAL else math.log(best)
    return DiffusionForest(cascade.message, parent, loglik, times)


def cascade_stats(forest: DiffusionForest) -> CascadeStats:
    """Structural statistics with component roots at level 0 and levels pooled
    across components."""
    forest.check()
    levels = forest.levels()
    children = defaultdict(list)
    for child, par in forest.parent.items():
        if par != EXTERNAL:
            children[par].append(child)

    n_nodes = len(forest.parent)
    n_edges = sum(1 for p in forest.parent.values() if p != EXTERNAL)
    n_isolated = sum(
        1
        for g, p in forest.parent.items()
        if p == EXTERNAL and not children.get(g)
    )
    depth = max(levels.values())
    by_level = defaultdict(int)
    for lvl in levels.values():
        by_level[lvl] += 1
    max_breadth = max(by_level.values())
    return CascadeStats(
        message=forest.message,
        n_nodes=n_nodes,
        n_edges=n_edges,
        n_isolated=n_isolated,
        depth=depth,
        max_breadth=max_breadth,
    )


def ccdf(values) -> list[tuple[float, float]]:
    """P(X >= x) over the distinct sorted values of the sample."""
    values = list(values)
    if not values:
        raise ValueError("ccdf needs a nonempty sample")
    n = len(values)
    ordered = sorted(values)
    out = []
    for i, x in enumerate(ordered):
        if i > 0 and x == ordered[i - 1]:
            continue
        out.append((float(x), (n - i) / n))
    return out


def write_forests_csv(forests: list[DiffusionForest], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["message_id", "child_group", "parent_group", "level"])
        for forest in forests:
            levels = forest.levels()
            for group in sorted(forest.parent, key=lambda g: (forest.adoption_time[g], g)):
                writer.writerow([forest.message, group, forest.parent[group], levels[group]])


def write_stats_csv(stats: list[CascadeStats], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["message_id", "n_nodes", "n_edges", "n_isolated", "max_level", "depth", "max_breadth"]
        )
        for s in stats:
            writer.writerow(
                [s.message, s.n_nodes, s.n_edges, s.n_isolated, s.max_level, s.depth, s.max_breadth]
            )
