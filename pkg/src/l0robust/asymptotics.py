"""Budget-exponent curves and the matched finite-d bounds (diagonal regime).

For magnitude-sorted ``nu`` with unit l2 norm, ``lambda_c`` is the shortest
prefix carrying l2 mass ``c`` and ``psi_d(c)`` is the base-d log of that
prefix's l1 mass.  Adversary budgets around ``d ** psi_d(c)`` are where the
optimal robust error moves to ``Phi_bar(sqrt(1 - c^2))``.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import gmm_model as gm
from .filtrun import make_report

PREFIX_TOL = 1e-12
GRID_STEP = 1e-3


def family_uniform(d):
    if d < 2:
        raise ValueError("uniform family needs d >= 2")
    return gm.make_problem(np.full(d, 1.0 / math.sqrt(d)), np.ones(d), normalize=True)


def family_spiked(d):
    """One coordinate at ``d^{-1/3}``, the rest equal and filling the unit norm."""
    if d < 2:
        raise ValueError("spiked family needs d >= 2")
    spike = d ** (-1.0 / 3.0)
    rest = math.sqrt((1.0 - spike * spike) / (d - 1))
    mu = np.full(d, rest)
    mu[0] = spike
    return gm.make_problem(mu, np.ones(d), normalize=True)


def log_block_nu(n):
    """Unit vector split into n blocks of sizes 1, 2, 4, ..., 2^(n-1), equal l2 mass each."""
    if n < 2:
        raise ValueError("log-block family needs n >= 2")
    sizes = 2 ** np.arange(n)
    return np.repeat(math.sqrt(1.0 / n) / np.sqrt(sizes.astype(np.float64)), sizes)


def family_log_block(n):
    nu = log_block_nu(n)
    return gm.make_problem(nu, np.ones(nu.size), normalize=True)


def _uniform_limit(c):
    return np.full_like(np.asarray(c, dtype=np.float64), 0.5)


def _log_block_limit(c):
    return np.asarray(c, dtype=np.float64) ** 2 / 2.0


FAMILIES = {
    "uniform": (family_uniform, _uniform_limit),
    "spiked": (family_spiked, _uniform_limit),
    "log-block": (family_log_block, _log_block_limit),
}


def family_problem(name, d=None, nblocks=None):
    """Problem for a named family; log-block takes ``nblocks`` (or d = 2^n - 1)."""
    if name not in FAMILIES:
        raise ValueError(f"unknown family {name!r}; choose from {sorted(FAMILIES)}")
    if name == "log-block":
        if nblocks is None:
            if d is None or d < 3 or (d + 1) & d:
                raise ValueError("log-block family needs --nblocks n or d = 2^n - 1")
            nblocks = int(d + 1).bit_length() - 1
        elif d is not None and d != 2 ** nblocks - 1:
            raise ValueError(f"log-block with n={nblocks} has d={2 ** nblocks - 1}, not {d}")
        return family_log_block(nblocks)
    if d is None:
        raise ValueError(f"{name} family needs d")
    return FAMILIES[name][0](d)


def family_limit(name):
    """Limit curve of the exponent function for a named family."""
    return FAMILIES[name][1]


def _sorted_nu(nu):
    nu = np.abs(np.asarray(nu, dtype=np.float64))
    if nu.ndim != 1 or nu.size == 0:
        raise ValueError("nu must be a nonempty vector")
    if np.any(np.diff(nu) > 1e-15 * max(1.0, nu[0])):
        raise ValueError("nu must be sorted by decreasing magnitude")
    return nu


def lambda_c(nu_sorted, c):
    """Shortest prefix length whose l2 norm reaches ``c`` (0 for c = 0)."""
    a = _sorted_nu(nu_sorted)
    if c < 0:
        raise ValueError("c must be nonnegative")
    if c == 0:
        return 0
    sq = np.cumsum(a * a)
    if c * c > sq[-1] + 1e-9:
        raise ValueError(f"c={c} exceeds ||nu||_2={math.sqrt(sq[-1]):.6g}")
    hits = np.flatnonzero(sq >= c * c - PREFIX_TOL)
    return int(hits[0]) + 1 if hits.size else a.size


def psi_d(nu_sorted, c):
    """``log(||nu_[1:lambda_c]||_1) / log(d)`` for c in (0, 1]."""
    if not 0 < c <= 1:
        raise ValueError("psi_d is defined for c in (0, 1]")
    a = _sorted_nu(nu_sorted)
    if a.size < 2:
        raise ValueError("psi_d needs d >= 2")
    lam = lambda_c(a, c)
    # same cumulative sums as psi_curve, so both agree bitwise
    return math.log(np.cumsum(a)[lam - 1]) / math.log(a.size)


@dataclass(frozen=True)
class PsiCurve:
    family: str
    d: int
    c: np.ndarray
    psi: np.ndarray
    lam: np.ndarray = None


def psi_curve(nu_sorted, cs, family="custom"):
    """Evaluate ``psi_d`` on a grid, sharing one pass of prefix sums."""
    a = _sorted_nu(nu_sorted)
    cs = np.asarray(cs, dtype=np.float64)
    if np.any(cs <= 0) or np.any(cs > 1):
        raise ValueError("grid values must lie in (0, 1]")
    sq = np.cumsum(a * a)
    l1 = np.cumsum(a)
    lam = np.minimum(np.searchsorted(sq, cs * cs - PREFIX_TOL, side="left") + 1, a.size)
    psi = np.log(l1[lam - 1]) / math.log(a.size)
    return PsiCurve(family, a.size, cs, psi, lam)


def psi_inf_inverse(limit, alpha, grid_step=GRID_STEP):
    """Pseudo-inverse ``inf{Phi_bar(sqrt(1-c^2)) : Psi(c) >= alpha}``, capped at 1/2.

    ``limit`` is a callable on [0, 1] or a :class:`PsiCurve` (or ``(c, psi)``
    pair) of nondecreasing samples.  Samples are linearly interpolated; the
    crossing point inside the first segment reaching ``alpha`` is solved
    exactly on the interpolant.
    """
    if callable(limit):
        c = np.linspace(0.0, 1.0, int(round(1.0 / grid_step)) + 1)
        psi = np.asarray(limit(c), dtype=np.float64) * np.ones_like(c)
    else:
        c, psi = (limit.c, limit.psi) if isinstance(limit, PsiCurve) else limit
        c = np.asarray(c, dtype=np.float64)
        psi = np.asarray(psi, dtype=np.float64)
        if c.shape != psi.shape or c.ndim != 1 or c.size == 0:
            raise ValueError("need matching 1-d arrays of c and psi samples")
        if np.any(np.diff(c) <= 0):
            raise ValueError("c samples must be strictly increasing")
    if np.any(np.diff(psi) < -1e-12):
        raise ValueError("psi samples must be nondecreasing in c")
    ok = np.flatnonzero(psi >= alpha - 1e-12)
    if ok.size == 0:
        return 0.5
    j = int(ok[0])
    cj = c[j]
    if j > 0 and psi[j] > psi[j - 1]:
        t = (alpha - psi[j - 1]) / (psi[j] - psi[j - 1])
        cj = c[j - 1] + min(1.0, max(0.0, t)) * (c[j] - c[j - 1])
    return min(0.5, gm.phi_bar(math.sqrt(max(0.0, 1.0 - cj * cj))))


def matched_bounds(problem, c, part=None):
    """Upper and lower robust-error bounds at the two prefix-l1 budgets for ``c``.

    With ``part=None`` returns ``(upper, lower)``; ``upper`` is None for c = 1
    and ``lower`` is None for c = 0, where the respective statements do not
    apply.  ``part=1`` (upper, c in [0, 1)) or ``part=2`` (lower, c in (0, 1])
    returns that report alone and rejects c outside its range.
    """
    if not problem.is_diagonal:
        raise ValueError("matched bounds need a diagonal covariance")
    if not 0 <= c <= 1:
        raise ValueError("c must lie in [0, 1]")
    if part == 1 and c >= 1:
        raise ValueError("the upper matched bound needs c in [0, 1)")
    if part == 2 and c <= 0:
        raise ValueError("the lower matched bound needs c in (0, 1]")
    if part not in (None, 1, 2):
        raise ValueError("part must be 1, 2 or None")
    d = problem.d
    a = np.sort(np.abs(problem.nu))[::-1]
    lam = lambda_c(a, c)
    l1 = float(a[:lam].sum())
    ld = math.log(d)
    rest = math.sqrt(max(0.0, 1.0 - c * c))
    upper = lower = None
    if c < 1:
        log_term = 1.0 / math.sqrt(2.0 * ld)
        arg = rest - 16.0 * math.sqrt(2.0) / (rest * math.sqrt(ld))
        tail = gm.phi_bar(arg)
        upper = make_report("upper-matched", l1 / ld, log_term + tail, log_term=log_term,
                            phi_bar_term=tail, phi_arg=arg, lambda_c=lam)
    if c > 0:
        tail = gm.phi_bar(rest)
        lower = make_report("lower-matched", l1 * ld, tail - 1.0 / ld, phi_bar_term=tail,
                            phi_arg=rest, log_penalty=1.0 / ld, lambda_c=lam)
    if part == 1:
        return upper
    if part == 2:
        return lower
    return upper, lower
