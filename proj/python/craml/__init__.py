"""Python bindings for the craml C++ core."""

from ._craml import (
    CramlError,
    Model,
    RuleSet,
    clean_text,
    extract_chunks,
    f1_score,
    generate_synthetic,
    run_pipeline,
    version,
)

__all__ = [
    "CramlError",
    "Model",
    "RuleSet",
    "clean_text",
    "extract_chunks",
    "f1_score",
    "generate_synthetic",
    "run_pipeline",
    "version",
]
