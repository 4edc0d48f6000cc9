from typing import (
    Callable,
    Sequence,
    Union,
)

import numpy as np

# shape (2, n): the pair (f1, f2) of a matrix field on one sector
PairField = np.ndarray
# shape (channels, 2, n): a pair field spread over several angular channels
ChannelField = np.ndarray

# Dynamics
TimeGrid = Sequence[float]
Forcing = Union[Callable[[float], np.ndarray], np.ndarray]
ScalarForcing = Callable[[float], Sequence[float]]
