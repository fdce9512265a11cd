"""Counter-based per-sample random substreams.

Every random draw in the package comes from a Philox stream keyed by
``(seed, tag)`` whose counter starts at the sample index, so sample ``i`` is
reproducible in isolation and independent of how samples are batched or
scheduled.
"""
import numpy as np

DATA = 0
ADVERSARY = 1
AUX = 2

_U64 = 1 << 64


def check_seed(seed):
    if int(seed) != seed or not 0 <= seed < _U64:
        raise ValueError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    return int(seed)


def substream(seed, index, tag=DATA):
    """Generator for sample ``index`` under ``seed`` and purpose ``tag``."""
    seed = check_seed(seed)
    if index < 0:
        raise ValueError("sample index must be nonnegative")
    bitgen = np.random.Philox(key=[seed, int(tag)], counter=[0, 0, int(index), 0])
    return np.random.Generator(bitgen)
