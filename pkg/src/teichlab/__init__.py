"""Computational laboratory for Thurston's metric on two exactly computable
model surfaces: the flat torus (upper half-plane coordinates) and the
once-punctured torus (Fricke trace coordinates).

Modules: curves (slopes, foliations, intersection numbers), torus and
fricke (the two models: lengths, metric, horofunctions, boundary data),
mcg (integer mapping classes and spectral limits), cocycle (random and
ergodic products: drift, sandwich bounds, horofunction drift), holo
(nonexpanding self-maps: drift, boundary extraction, orbit dichotomy),
cli (deterministic command line reports).
"""

from __future__ import annotations

__version__ = "0.1.0"

from . import cocycle, curves, errors, fricke, holo, mcg, torus
from .curves import Foliation, Slope, foliation, intersection
from .fricke import FrickePoint
from .mcg import MappingClass
from .torus import TorusPoint

__all__ = [
    "__version__",
    "cocycle",
    "curves",
    "errors",
    "fricke",
    "holo",
    "mcg",
    "torus",
    "Foliation",
    "Slope",
    "foliation",
    "intersection",
    "FrickePoint",
    "MappingClass",
    "TorusPoint",
]
