"""Synthetic guessing-game pipeline with label-free object embeddings.

The heavy lifting lives in the compiled ``_core`` extension; this package
re-exports its public surface.
"""

from guesslab._core import (  # noqa: F401
    ImaginationModel,
    classify_question,
    evaluate,
    generate,
    grolla,
    mse,
    read_report,
    reconstruction_loss,
    spatial_features,
    train,
)

__all__ = [
    "ImaginationModel",
    "classify_question",
    "evaluate",
    "generate",
    "grolla",
    "mse",
    "read_report",
    "reconstruction_loss",
    "spatial_features",
    "train",
]
