# distutils: language = c++
"""Compiled row-wise order-statistic reductions.

Mirrors ``_kernels_py``; see ``l0robust.kernels`` for backend selection.
Small tails (the Monte Carlo case, 2k << d) use bounded heaps, which touch
each entry once with a single comparison in the common case; large tails
fall back to ``nth_element``.
"""
import numpy as np

from libc.stdlib cimport free, malloc
from libc.string cimport memset
from libcpp.algorithm cimport nth_element


cdef inline void _sift_down(double* val, Py_ssize_t* idx, Py_ssize_t n,
                            Py_ssize_t pos, double sign) noexcept nogil:
    # heap ordered by sign*val ascending at the root
    cdef Py_ssize_t child
    cdef double v = val[pos]
    cdef Py_ssize_t vi = idx[pos]
    while True:
        child = 2 * pos + 1
        if child >= n:
            break
        if child + 1 < n and sign * val[child + 1] < sign * val[child]:
            child += 1
        if sign * val[child] < sign * v:
            val[pos] = val[child]
            idx[pos] = idx[child]
            pos = child
        else:
            break
    val[pos] = v
    idx[pos] = vi


cdef void _select_tail(const double* row, Py_ssize_t cols, Py_ssize_t m, double sign,
                       unsigned char* taken, double* hval, Py_ssize_t* hidx) noexcept nogil:
    # marks in `taken` the m entries with the largest sign*value among untaken ones
    cdef Py_ssize_t j, filled = 0, p
    for j in range(cols):
        if taken[j]:
            continue
        if filled < m:
            hval[filled] = row[j]
            hidx[filled] = j
            filled += 1
            if filled == m:
                p = m // 2
                while p > 0:
                    p -= 1
                    _sift_down(hval, hidx, m, p, sign)
        elif sign * row[j] > sign * hval[0]:
            hval[0] = row[j]
            hidx[0] = j
            _sift_down(hval, hidx, m, 0, sign)
    for j in range(filled):
        taken[hidx[j]] = 1


def partition_sums(const double[:, ::1] z, Py_ssize_t m_low, Py_ssize_t m_high):
    """Per row: sum of the ``m_low`` smallest, the middle, and the ``m_high`` largest."""
    cdef Py_ssize_t rows = z.shape[0]
    cdef Py_ssize_t cols = z.shape[1]
    if m_low < 0 or m_high < 0 or m_low + m_high > cols:
        raise ValueError(f"cannot split {cols} entries into {m_low} low + {m_high} high")

    low = np.zeros(rows)
    mid = np.zeros(rows)
    high = np.zeros(rows)
    cdef double[::1] low_v = low
    cdef double[::1] mid_v = mid
    cdef double[::1] high_v = high
    if rows == 0 or cols == 0:
        return low, mid, high

    cdef Py_ssize_t r, j
    cdef Py_ssize_t split_high = cols - m_high
    cdef Py_ssize_t tail = m_low if m_low > m_high else m_high
    cdef bint use_heap = 64 * (m_low + m_high) <= cols
    cdef double s_low, s_mid, s_high
    cdef double* buf = <double*> malloc(cols * sizeof(double))
    cdef unsigned char* taken = <unsigned char*> malloc(cols)
    cdef double* hval = <double*> malloc((tail + 1) * sizeof(double))
    cdef Py_ssize_t* hidx = <Py_ssize_t*> malloc((tail + 1) * sizeof(Py_ssize_t))
    if buf == NULL or taken == NULL or hval == NULL or hidx == NULL:
        free(buf); free(taken); free(hval); free(hidx)
        raise MemoryError()
    try:
        with nogil:
            for r in range(rows):
                if use_heap:
                    memset(taken, 0, cols)
                    if m_high > 0:
                        _select_tail(&z[r, 0], cols, m_high, 1.0, taken, hval, hidx)
                        s_high = 0.0
                        for j in range(m_high):
                            s_high += hval[j]
                    else:
                        s_high = 0.0
                    if m_low > 0:
                        _select_tail(&z[r, 0], cols, m_low, -1.0, taken, hval, hidx)
                        s_low = 0.0
                        for j in range(m_low):
                            s_low += hval[j]
                    else:
                        s_low = 0.0
                    s_mid = 0.0
                    for j in range(cols):
                        if not taken[j]:
                            s_mid += z[r, j]
                else:
                    for j in range(cols):
                        buf[j] = z[r, j]
                    if 0 < m_high < cols:
                        nth_element(buf, buf + split_high, buf + cols)
                    if 0 < m_low < split_high:
                        nth_element(buf, buf + m_low, buf + split_high)
                    s_low = 0.0
                    for j in range(m_low):
                        s_low += buf[j]
                    s_mid = 0.0
                    for j in range(m_low, split_high):
                        s_mid += buf[j]
                    s_high = 0.0
                    for j in range(split_high, cols):
                        s_high += buf[j]
                low_v[r] = s_low
                mid_v[r] = s_mid
                high_v[r] = s_high
    finally:
        free(buf)
        free(taken)
        free(hval)
        free(hidx)
    return low, mid, high
