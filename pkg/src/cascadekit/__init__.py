"""Cross-group cascade reconstruction and complete-cascade parameter estimation."""

from cascadekit.model import (
    AdoptionEvent,
    ContentType,
    Modality,
    TreeParams,
    level_count,
    tree_size,
)

__version__ = "0.1.0"

__all__ = [
    "AdoptionEvent",
    "ContentType",
    "Modality",
    "TreeParams",
    "level_count",
    "tree_size",
    "__version__",
]
