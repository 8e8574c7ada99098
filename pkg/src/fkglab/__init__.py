"""Exact-arithmetic toolkit for the generalized FKG functionals E_n.

The functionals live on discretized monotone functions of the unit square
(staircase sets), on down-rectangles of the unit cube, and on arbitrary
cell-constant grid functions.  Everything is computed with
:class:`fractions.Fraction`; there is no floating point in the core.
"""

from fkglab.lattice import (
    GridFunction,
    GridIndicator,
    LatticeError,
    RectangleFamily,
    StaircaseSeq,
    staircase_new,
)
from fkglab.oracles import (
    ExpectationOracle,
    GridFunctionOracle,
    IndicatorOracle,
    RectangleOracle,
    StaircaseOracle,
    TableOracle,
)
from fkglab.engine import (
    CapExceeded,
    EnResult,
    en,
    en_naive,
    en_partition,
    en_recursive,
    kappa3,
)

__version__ = "0.1.0"

__all__ = [
    "CapExceeded",
    "EnResult",
    "ExpectationOracle",
    "GridFunction",
    "GridFunctionOracle",
    "GridIndicator",
    "IndicatorOracle",
    "LatticeError",
    "RectangleFamily",
    "RectangleOracle",
    "StaircaseOracle",
    "StaircaseSeq",
    "TableOracle",
    "en",
    "en_naive",
    "en_partition",
    "en_recursive",
    "kappa3",
    "staircase_new",
]
