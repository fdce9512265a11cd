"""Pure numpy implementation of the row-wise order-statistic reductions."""
import numpy as np


def partition_sums(z, m_low, m_high):
    """Per row: sum of the ``m_low`` smallest, the middle, and the ``m_high`` largest."""
    z = np.ascontiguousarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise ValueError("expected a 2-d array")
    rows, cols = z.shape
    if m_low < 0 or m_high < 0 or m_low + m_high > cols:
        raise ValueError(f"cannot split {cols} entries into {m_low} low + {m_high} high")
    if rows == 0 or cols == 0:
        return np.zeros(rows), np.zeros(rows), np.zeros(rows)
    split_high = cols - m_high
    kth = sorted({v for v in (m_low, split_high) if 0 < v < cols})
    p = np.partition(z, kth, axis=1) if kth else z
    return (
        p[:, :m_low].sum(axis=1),
        p[:, m_low:split_high].sum(axis=1),
        p[:, split_high:].sum(axis=1),
    )
