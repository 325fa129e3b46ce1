"""Shared domain types and the closed-form b-ary tree expectations.

The complete cascade is modelled as a b-ary tree of depth ``h``: every node
above the bottom level has ``b`` children, the root sits at level 0 and the
bottom level is ``h``. Both parameters are real-valued; fractional depth is
resolved by linear interpolation of every statistic between ``floor(h)`` and
``ceil(h)`` (equivalently, the partial top level ``ceil(h)`` carries weight
``h - floor(h)``), which keeps integer cases exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum


class ContentType(Enum):
    MISINFORMATION = "misinformation"
    HATEFUL = "hateful"
    PROPAGANDA = "propaganda"
    VIRAL_NORMAL = "viral_normal"
    UNLABELED = "unlabeled"


class Modality(Enum):
    TEXT = "text"
    IMAGE = "image"
    VIDEO = "video"


_CONTENT_ALIASES = {
    "misinformation": ContentType.MISINFORMATION,
    "misinfo": ContentType.MISINFORMATION,
    "hateful": ContentType.HATEFUL,
    "hate": ContentType.HATEFUL,
    "hate_speech": ContentType.HATEFUL,
    "propaganda": ContentType.PROPAGANDA,
    "propa": ContentType.PROPAGANDA,
    "viral_normal": ContentType.VIRAL_NORMAL,
    "viral-normal": ContentType.VIRAL_NORMAL,
    "viral normal": ContentType.VIRAL_NORMAL,
    "normal": ContentType.VIRAL_NORMAL,
    "unlabeled": ContentType.UNLABELED,
    "unlabelled": ContentType.UNLABELED,
}

_MODALITY_ALIASES = {
    "text": Modality.TEXT,
    "chat": Modality.TEXT,
    "image": Modality.IMAGE,
    "video": Modality.VIDEO,
}


def parse_content_type(raw: str) -> ContentType:
    try:
        return _CONTENT_ALIASES[raw.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown content type {raw!r}") from None


def parse_modality(raw: str) -> Modality:
    try:
        return _MODALITY_ALIASES[raw.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown modality {raw!r}") from None


@dataclass(frozen=True)
class AdoptionEvent:
    """One (message, group, time) observation with its message labels."""

    message: str
    group: str
    time: float
    modality: Modality
    content: ContentType
    forwarding_score: int
    extra: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.message:
            raise ValueError("message id must be non-empty")
        if not self.group:
            raise ValueError("group id must be non-empty")
        if not math.isfinite(self.time):
            raise ValueError("event time must be finite")
        if self.forwarding_score < 0:
            raise ValueError("forwarding_score must be >= 0")


@dataclass(frozen=True)
class TreeParams:
    """Branching factor (breadth) and depth of the complete-cascade tree."""

    branching: float
    depth: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.branching) and math.isfinite(self.depth)):
            raise ValueError("tree parameters must be finite")
        if self.branching < 1.0:
            raise ValueError(f"branching must be >= 1, got {self.branching}")
        if self.depth < 0.0:
            raise ValueError(f"depth must be >= 0, got {self.depth}")


def _size_int_depth(branching: float, levels: int) -> float:
    """Node count of the complete tree with integer depth: sum of b^k, k=0..levels."""
    if abs(branching - 1.0) < 1e-12:
        return float(levels + 1)
    return (branching ** (levels + 1) - 1.0) / (branching - 1.0)


def tree_size(params: TreeParams) -> float:
    """Expected node count N(b, h); strictly increasing in both parameters."""
    b, h = params.branching, params.depth
    lo = math.floor(h)
    frac = h - lo
    if frac == 0.0:
        return _size_int_depth(b, lo)
    return (1.0 - frac) * _size_int_depth(b, lo) + frac * _size_int_depth(b, lo + 1)


def level_count(params: TreeParams, level: int) -> float:
    """Expected node count at ``level``: b^level up to floor(h), the partial
    top level ceil(h) carries weight (h - floor(h)), zero above."""
    if level < 0:
        raise ValueError("level must be >= 0")
    b, h = params.branching, params.depth
    lo = math.floor(h)
    frac = h - lo
    if level <= lo:
        return float(b**level)
    if frac > 0.0 and level == lo + 1:
        return frac * b**level
    return 0.0
