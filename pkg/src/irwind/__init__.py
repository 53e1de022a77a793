"""Multi-layer wind velocity fields from infrared cloud image sequences."""

from . import (
    atmosphere,
    bemm,
    errors,
    fieldviz,
    imaging,
    layers,
    optflow,
    pipeline,
    regression,
    sampling,
    selection,
    synth,
)

__all__ = [
    "atmosphere",
    "bemm",
    "errors",
    "fieldviz",
    "imaging",
    "layers",
    "optflow",
    "pipeline",
    "regression",
    "sampling",
    "selection",
    "synth",
]

__version__ = "0.1.0"
