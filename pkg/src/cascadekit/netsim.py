"""Synthetic diffusion on a random contact network.

The validation generator: an Erdos-Renyi contact graph whose edges carry
fixed exponential delays, independent-cascade spreading where an infected
node transmits across an edge with probability
``trans_scale * exp(-delay / trans_decay)``, candidate arrival at
``t_parent + delay``, earliest successful transmitter wins, and a hard
duration cap. Two message types differ only in the cap.

All randomness flows through per-purpose ``numpy`` SeedSequences derived from
the config seed, so runs are reproducible and per-cascade streams are
independent of execution order.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field

import numpy as np

from cascadekit.model import AdoptionEvent, ContentType, Modality, TreeParams


@dataclass(frozen=True)
class SimConfig:
    n_nodes: int = 2000
    edge_prob: float = 0.004
    delay_rate: float = 1.0
    trans_scale: float = 0.7
    trans_decay: float = 2.0
    max_duration: float = 12.0
    n_cascades: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be positive")
        if not 0 < self.edge_prob <= 1:
            raise ValueError("edge_prob must be in (0, 1]")
        if self.delay_rate <= 0 or self.trans_decay <= 0 or self.max_duration <= 0:
            raise ValueError("rates and durations must be positive")
        if not 0 < self.trans_scale <= 1:
            raise ValueError("trans_scale must be in (0, 1]")
        if self.n_cascades < 1:
            raise ValueError("n_cascades must be positive")

    @classmethod
    def from_dict(cls, raw: dict) -> "SimConfig":
        return cls(**{k: raw[k] for k in raw})


@dataclass
class Graph:
    """Undirected weighted graph; each edge carries a fixed transmission delay."""

    n_nodes: int
    adjacency: list[list[tuple[int, float]]]

    @classmethod
    def from_edges(cls, n_nodes: int, edges) -> "Graph":
        adjacency: list[list[tuple[int, float]]] = [[] for _ in range(n_nodes)]
        for u, v, delay in edges:
            if delay <= 0:
                raise ValueError("edge delays must be positive")
            adjacency[u].append((v, delay))
            adjacency[v].append((u, delay))
        for row in adjacency:
            row.sort()
        return cls(n_nodes=n_nodes, adjacency=adjacency)

    def edge_count(self) -> int:
        return sum(len(row) for row in self.adjacency) // 2


@dataclass(frozen=True)
class Infection:
    node: int
    time: float
    parent: int | None  # None marks the root


@dataclass
class TrueCascade:
    root: int
    infections: list[Infection]

    def check(self, graph: Graph | None = None, max_duration: float | None = None) -> None:
        times = {inf.node: inf.time for inf in self.infections}
        n_roots = 0
        for inf in self.infections:
            if inf.parent is None:
                n_roots += 1
                continue
            if times[inf.parent] >= inf.time:
                raise AssertionError("parent must be infected strictly before child")
            if graph is not None and inf.node not in [v for v, _ in graph.adjacency[inf.parent]]:
                raise AssertionError("parent-child pairs must be network edges")
        if n_roots != 1:
            raise AssertionError("a cascade has exactly one root")
        if max_duration is not None and any(inf.time > max_duration for inf in self.infections):
            raise AssertionError("no infection time may exceed the duration cap")

    def size(self) -> int:
        return len(self.infections)

    def depth(self) -> int:
        level = {self.root: 0}
        for inf in sorted(self.infections, key=lambda i: i.time):
            if inf.parent is not None:
                level[inf.node] = level[inf.parent] + 1
        return max(level.values())

    def child_counts(self) -> dict[int, int]:
        counts = {inf.node: 0 for inf in self.infections}
        for inf in self.infections:
            if inf.parent is not None:
                counts[inf.parent] += 1
        return counts


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def generate_network(config: SimConfig) -> Graph:
    """G(n, p) with one Exp(delay_rate) delay per realized edge."""
    rng = _rng(config.seed, 0)
    n = config.n_nodes
    iu, iv = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < config.edge_prob
    delays = rng.exponential(1.0 / config.delay_rate, size=int(keep.sum()))
    edges = zip(iu[keep].tolist(), iv[keep].tolist(), delays.tolist())
    return Graph.from_edges(n, edges)


def simulate_cascade(
    graph: Graph,
    config: SimConfig,
    root: int,
    rng: np.random.Generator | None = None,
) -> TrueCascade:
    """Independent-cascade spread from ``root`` with fixed per-edge delays.

    When an infection fires at node u, each not-yet-infected neighbour v gets
    an independent transmission attempt succeeding with probability
    ``trans_scale * exp(-delay_uv / trans_decay)``; successes schedule a
    candidate infection at ``t_u + delay_uv``. A node's realized time and
    parent come from its earliest successful transmitter; times beyond the
    duration cap are discarded.
    """
    if not 0 <= root < graph.n_nodes:
        raise ValueError("root must be a graph node")
    if rng is None:
        rng = _rng(config.seed, 1, root)
    infected: dict[int, Infection] = {}
    heap: list[tuple[float, int, int | None]] = [(0.0, root, None)]
    while heap:
        time, node, parent = heapq.heappop(heap)
        if node in infected:
            continue
        if time > config.max_duration:
            continue
        infected[node] = Infection(node=node, time=time, parent=parent)
        for neighbor, delay in graph.adjacency[node]:
            if neighbor in infected:
                continue
            success = rng.random() < config.trans_scale * math.exp(-delay / config.trans_decay)
            if success:
                arrival = time + delay
                if arrival <= config.max_duration:
                    heapq.heappush(heap, (arrival, neighbor, node))
    infections = sorted(infected.values(), key=lambda i: (i.time, i.node))
    return TrueCascade(root=root, infections=infections)


def simulate_collection(graph: Graph, config: SimConfig, stream: int = 0) -> list[TrueCascade]:
    """n_cascades independent runs with per-cascade derived seeds and roots.

    ``stream`` separates collections that share a seed (and hence a network),
    e.g. the long- and short-duration message types.
    """
    root_rng = _rng(config.seed, 2, stream)
    roots = root_rng.integers(0, graph.n_nodes, size=config.n_cascades)
    cascades = []
    for index, root in enumerate(roots.tolist()):
        rng = _rng(config.seed, 3, stream, index)
        cascades.append(simulate_cascade(graph, config, root, rng))
    return cascades


def true_params(cascades: list[TrueCascade]) -> TreeParams:
    """Ground-truth (branching, depth): mean child count over internal nodes
    per cascade, and max root-to-leaf edge count, both averaged over cascades."""
    if not cascades:
        raise ValueError("need at least one cascade")
    branchings = []
    depths = []
    for cascade in cascades:
        counts = [c for c in cascade.child_counts().values() if c > 0]
        if counts:
            branchings.append(float(np.mean(counts)))
        depths.append(float(cascade.depth()))
    if not branchings:
        raise ValueError("no internal nodes: every cascade has size 1")
    return TreeParams(float(np.mean(branchings)), float(np.mean(depths)))


def sample_cascade(cascade: TrueCascade, p: float, seed: int) -> list[tuple[int, float]]:
    """Keep each infected node independently with probability p; only
    activation timestamps survive (parents are discarded). May return fewer
    than two nodes; the >= 2 per-message rule is downstream."""
    if not 0 < p <= 1:
        raise ValueError("sampling rate must be in (0, 1]")
    rng = _rng(seed, 4)
    keep = rng.random(len(cascade.infections)) < p
    return [
        (inf.node, inf.time)
        for inf, kept in zip(cascade.infections, keep.tolist())
        if kept
    ]


def cascades_to_events(
    cascades: list[TrueCascade],
    message_prefix: str,
    content: ContentType = ContentType.UNLABELED,
    modality: Modality = Modality.TEXT,
) -> list[AdoptionEvent]:
    """Export complete cascades in the ingest event schema (one message per
    cascade, one adoption event per infection)."""
    events = []
    for index, cascade in enumerate(cascades):
        message = f"{message_prefix}{index:04d}"
        for inf in cascade.infections:
            events.append(
                AdoptionEvent(
                    message=message,
                    group=f"n{inf.node:05d}",
                    time=inf.time,
                    modality=modality,
                    content=content,
                    forwarding_score=0,
                )
            )
    return events


def samples_to_events(
    samples: list[list[tuple[int, float]]],
    message_prefix: str,
    content: ContentType = ContentType.UNLABELED,
    modality: Modality = Modality.TEXT,
) -> list[AdoptionEvent]:
    events = []
    for index, sample in enumerate(samples):
        message = f"{message_prefix}{index:04d}"
        for node, time in sample:
            events.append(
                AdoptionEvent(
                    message=message,
                    group=f"n{node:05d}",
                    time=time,
                    modality=modality,
                    content=content,
                    forwarding_score=0,
                )
            )
    return events


@dataclass
class SimTypeSpec:
    """One message type of the validation setup (differs only in duration)."""

    name: str
    config: SimConfig

    @property
    def message_prefix(self) -> str:
        return f"{self.name}-"


def load_sim_types(path) -> tuple[list[SimTypeSpec], dict]:
    """Read the simulation config file: shared network settings plus one
    duration cap per message type."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    shared = {k: v for k, v in raw.items() if k not in ("types", "rates", "model", "fit")}
    types = []
    for spec in raw["types"]:
        merged = dict(shared)
        merged.update({k: v for k, v in spec.items() if k != "name"})
        types.append(SimTypeSpec(name=spec["name"], config=SimConfig.from_dict(merged)))
    return types, raw
