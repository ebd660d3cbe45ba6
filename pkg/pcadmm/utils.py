import json

import numpy as np


class NumpyEncoder(json.JSONEncoder):
    def default(self, o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, np.generic):
            return o.item()
        return json.JSONEncoder.default(self, o)


def frozen_array(value, ndim=1) -> np.ndarray:
    """Float copy of `value`, promoted to at least `ndim` dimensions and marked read-only."""
    arr = np.array(value, dtype=np.float64)
    if ndim == 1:
        arr = np.atleast_1d(arr)
    elif ndim == 2:
        arr = np.atleast_2d(arr)
    arr.setflags(write=False)
    return arr
