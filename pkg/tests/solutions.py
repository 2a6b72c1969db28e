"""Known rank-7 schemes for 2x2 matrices used as fixtures.

STRASSEN is the classical scheme; VARIANTS are three further forms of it that
differ by column order and sign changes.
"""

import numpy as np

from fmmcp.tensor import Dims
from fmmcp.verify import FactorMatrices

D222 = Dims(2, 2, 2)


def _f(u, v, w) -> FactorMatrices:
    return FactorMatrices(D222, np.array(u), np.array(v), np.array(w))


STRASSEN = _f(
    [[1, 0, 1, 0, 1, -1, 0],
     [0, 0, 0, 0, 1, 0, 1],
     [0, 1, 0, 0, 0, 1, 0],
     [1, 1, 0, 1, 0, 0, -1]],
    [[1, 1, 0, -1, 0, 1, 0],
     [0, 0, 1, 0, 0, 1, 0],
     [0, 0, 0, 1, 0, 0, 1],
     [1, 0, -1, 0, 1, 0, 1]],
    [[1, 0, 0, 1, -1, 0, 1],
     [0, 0, 1, 0, 1, 0, 0],
     [0, 1, 0, 1, 0, 0, 0],
     [1, -1, 1, 0, 0, 1, 0]],
)

_W2 = [[0, 1, 0, 1, 0, 1, -1],
       [0, 0, 0, 0, 1, 0, 1],
       [0, 1, 1, 0, 0, 0, 0],
       [1, 0, -1, 0, 1, 1, 0]]

VARIANTS = (
    _f(STRASSEN.u, STRASSEN.v,
       [[1, 0, 0, 1, -1, 0, 1],
        [0, 0, 1, 0, 1, 0, 0],
        [0, 1, 0, 1, 0, 0, 0],
        [1, -1, 1, 0, 0, 1, 0]]),
    _f([[-1, 0, 0, 0, 1, 1, 1],
        [0, 0, 0, 1, 0, 0, 1],
        [1, 0, 1, 0, 0, 0, 0],
        [0, 1, 1, -1, 0, 1, 0]],
       [[1, -1, 1, 0, 0, 1, 0],
        [1, 0, 0, 0, 1, 0, 0],
        [0, 1, 0, 1, 0, 0, 0],
        [0, 0, 0, 1, -1, 1, 1]],
       _W2),
    _f([[-1, 0, 0, 0, -1, -1, -1],
        [0, 0, 0, -1, 0, 0, -1],
        [1, 0, -1, 0, 0, 0, 0],
        [0, -1, -1, 1, 0, -1, 0]],
       [[1, 1, -1, 0, 0, -1, 0],
        [1, 0, 0, 0, -1, 0, 0],
        [0, -1, 0, -1, 0, 0, 0],
        [0, 0, 0, -1, 1, -1, -1]],
       _W2),
)
