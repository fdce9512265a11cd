"""The binary Gaussian mixture problem and the linear algebra around it.

A problem is the pair (mu, Sigma) with labels y uniform on {-1, +1} and
inputs x ~ N(y mu, Sigma).  Diagonal covariances are stored as a vector of
variances and keep O(d) paths throughout; dense covariances are factorized
once by a symmetric eigendecomposition.
"""
import json
import math
from typing import NamedTuple

import numpy as np
from scipy import special

from . import rng
from .trunc_stats import as_real_vec

EIG_FLOOR = 1e-12
SYM_TOL = 1e-10
NORM_TOL = 1e-9


def phi_bar(x):
    """Standard normal upper tail 1 - Phi(x), accurate in both tails."""
    return special.ndtr(np.negative(x)) if np.ndim(x) else float(special.ndtr(-x))


def erf(x):
    return special.erf(x) if np.ndim(x) else float(special.erf(x))


class ProblemFileError(ValueError):
    """Raised for malformed problem files; the message names the field."""


class LabeledSample(NamedTuple):
    x: np.ndarray
    y: int


class GmmProblem:
    """Immutable (mu, Sigma) pair with cached whitened mean ``nu``.

    Build through :func:`make_problem`.  Exactly one of ``diag`` (variances)
    and ``dense`` (full matrix) is set.
    """

    __slots__ = ("mu", "diag", "dense", "normalized", "nu", "_evals", "_evecs")

    def __init__(self, mu, diag=None, dense=None, normalized=False):
        mu = as_real_vec(mu, "mu")
        if (diag is None) == (dense is None):
            raise ValueError("give exactly one of diag and dense")
        evals = evecs = None
        if diag is not None:
            diag = as_real_vec(diag, "sigma.diag")
            if diag.shape != mu.shape:
                raise ValueError(f"sigma.diag has length {diag.size}, mu has {mu.size}")
            if np.any(diag <= EIG_FLOOR):
                raise ValueError("covariance is not positive definite (variance <= 1e-12)")
            nu = mu / np.sqrt(diag)
        else:
            dense = np.array(dense, dtype=np.float64)
            d = mu.size
            if dense.shape != (d, d):
                raise ValueError(f"sigma.dense has shape {dense.shape}, expected {(d, d)}")
            if not np.all(np.isfinite(dense)):
                raise ValueError("sigma.dense contains NaN or infinite entries")
            if np.max(np.abs(dense - dense.T)) > SYM_TOL:
                raise ValueError("covariance is not symmetric within 1e-10")
            dense = 0.5 * (dense + dense.T)
            evals, evecs = np.linalg.eigh(dense)
            if evals[0] <= EIG_FLOOR:
                raise ValueError(
                    f"covariance is not positive definite (min eigenvalue {evals[0]:.3e})"
                )
            nu = (evecs / np.sqrt(evals)) @ (evecs.T @ mu)
        for name, value in (("mu", mu), ("diag", diag), ("dense", dense), ("nu", nu)):
            if value is not None:
                value.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "dense", dense)
        object.__setattr__(self, "normalized", bool(normalized))
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "_evals", evals)
        object.__setattr__(self, "_evecs", evecs)

    def __setattr__(self, name, value):
        raise AttributeError("GmmProblem is immutable")

    def __repr__(self):
        kind = "diagonal" if self.is_diagonal else "dense"
        return f"GmmProblem(d={self.d}, {kind}, normalized={self.normalized})"

    @property
    def d(self):
        return self.mu.size

    @property
    def is_diagonal(self):
        return self.diag is not None

    @property
    def sigma(self):
        """Full covariance matrix (materialized for diagonal problems)."""
        return np.diag(self.diag) if self.is_diagonal else self.dense.copy()

    @property
    def sigma_diagonal(self):
        """Diagonal entries of Sigma."""
        return self.diag.copy() if self.is_diagonal else np.diag(self.dense).copy()

    def inv_sqrt_sigma(self):
        if self.is_diagonal:
            return np.diag(1.0 / np.sqrt(self.diag))
        return (self._evecs / np.sqrt(self._evals)) @ self._evecs.T

    def sqrt_sigma(self):
        if self.is_diagonal:
            return np.diag(np.sqrt(self.diag))
        return (self._evecs * np.sqrt(self._evals)) @ self._evecs.T

    def eigenvalues(self):
        if self.is_diagonal:
            return np.sort(self.diag)
        return self._evals.copy()


def make_problem(mu, sigma, normalize=False):
    """Build a problem from ``mu`` and a covariance.

    ``sigma`` may be a 1-d array of variances (diagonal), a 2-d matrix
    (dense), or a mapping ``{"diag": [...]}`` / ``{"dense": [[...]]}``.
    With ``normalize`` the mean is rescaled so that ``||Sigma^{-1/2} mu||_2 = 1``.
    """
    diag = dense = None
    if isinstance(sigma, dict):
        if set(sigma) == {"diag"}:
            diag = sigma["diag"]
        elif set(sigma) == {"dense"}:
            dense = sigma["dense"]
        else:
            raise ValueError("sigma mapping must have exactly one key, 'diag' or 'dense'")
    else:
        arr = np.asarray(sigma, dtype=np.float64)
        if arr.ndim == 1:
            diag = arr
        elif arr.ndim == 2:
            dense = arr
        else:
            raise ValueError(f"sigma must be 1-d or 2-d, got shape {arr.shape}")
    problem = GmmProblem(mu, diag=diag, dense=dense)
    if not normalize:
        return problem
    scale = float(np.linalg.norm(problem.nu))
    if scale == 0.0:
        raise ValueError("cannot normalize: mu is zero so nu is undefined")
    problem = GmmProblem(problem.mu / scale, diag=diag, dense=problem.dense, normalized=True)
    if abs(np.linalg.norm(problem.nu) - 1.0) > NORM_TOL:
        raise ValueError("normalization failed to reach ||nu||_2 = 1 within 1e-9")
    return problem


def as_coord_set(F, d):
    """Validate a coordinate set, returning a strictly increasing int array."""
    idx = np.asarray(F)
    if idx.ndim != 1:
        raise ValueError("coordinate set must be one-dimensional")
    if idx.size and not np.issubdtype(idx.dtype, np.integer):
        if not np.all(np.mod(idx, 1) == 0):
            raise ValueError("coordinate set must contain integers")
    idx = idx.astype(np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= d):
        raise ValueError(f"coordinate indices must lie in [0, {d})")
    out = np.unique(idx)
    if out.size != idx.size:
        raise ValueError("coordinate set contains duplicates")
    return out


def complement(F, d):
    mask = np.ones(d, dtype=bool)
    mask[as_coord_set(F, d)] = False
    return np.flatnonzero(mask)


def restrict(problem, F):
    """Subproblem (mu_F, Sigma_F) on the coordinates ``F``; never normalized."""
    F = as_coord_set(F, problem.d)
    if F.size == 0:
        raise ValueError("cannot restrict to an empty coordinate set")
    if problem.is_diagonal:
        return GmmProblem(problem.mu[F], diag=problem.diag[F])
    return GmmProblem(problem.mu[F], dense=problem.dense[np.ix_(F, F)])


def correlation_matrix(problem):
    """R = diag(Sigma)^{-1/2} Sigma diag(Sigma)^{-1/2}, unit diagonal."""
    if problem.is_diagonal:
        return np.eye(problem.d)
    s = 1.0 / np.sqrt(np.diag(problem.dense))
    R = problem.dense * np.outer(s, s)
    np.fill_diagonal(R, 1.0)
    return R


def u_vector(problem):
    """u_i = mu_i / sqrt(Sigma_ii)."""
    return problem.mu / np.sqrt(problem.sigma_diagonal)


def zeta_min(problem):
    """Smallest eigenvalue of the correlation matrix."""
    if problem.is_diagonal:
        return 1.0
    return float(np.linalg.eigvalsh(correlation_matrix(problem))[0])


def op_norm_inf(M):
    """Operator norm induced by the l-infinity norm: max absolute row sum."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("expected a matrix")
    if M.size == 0:
        return 0.0
    return float(np.abs(M).sum(axis=1).max())


def diag_sqrt_times_inv_sqrt(problem):
    """diag(Sigma)^{1/2} Sigma^{-1/2}; the identity for diagonal problems."""
    if problem.is_diagonal:
        return np.eye(problem.d)
    return np.sqrt(np.diag(problem.dense))[:, None] * problem.inv_sqrt_sigma()


def _draw_standard(seed, start, n, d, tag=rng.DATA):
    y = np.empty(n, dtype=np.int8)
    g = np.empty((n, d))
    for r in range(n):
        gen = rng.substream(seed, start + r, tag)
        y[r] = 1 if gen.random() < 0.5 else -1
        gen.standard_normal(out=g[r])
    return g, y


def sample(problem, n, seed, start=0):
    """Draw samples ``start .. start+n-1``; returns ``(X, y)`` arrays.

    Sample ``i`` depends only on ``(seed, i)``.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    g, y = _draw_standard(seed, start, n, problem.d)
    if problem.is_diagonal:
        g *= np.sqrt(problem.diag)
    else:
        g = g @ problem.sqrt_sigma()
    g += y[:, None] * problem.mu
    return g, y


def sample_one(problem, seed, index):
    X, y = sample(problem, 1, seed, start=index)
    return LabeledSample(X[0], int(y[0]))


def _field_error(path, message):
    return ProblemFileError(f"{path}: {message}")


def _number_list(value, path):
    if not isinstance(value, list) or not value:
        raise _field_error(path, "expected a nonempty list of numbers")
    for i, v in enumerate(value):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise _field_error(f"{path}[{i}]", f"expected a finite number, got {v!r}")
    return value


def problem_from_dict(doc):
    """Validate a decoded problem document and build the problem."""
    if not isinstance(doc, dict):
        raise _field_error("<root>", "expected an object")
    unknown = set(doc) - {"mu", "sigma", "normalize"}
    if unknown:
        raise _field_error(sorted(unknown)[0], "unknown field")
    if "mu" not in doc:
        raise _field_error("mu", "missing required field")
    mu = _number_list(doc["mu"], "mu")
    if "sigma" not in doc:
        raise _field_error("sigma", "missing required field")
    sigma = doc["sigma"]
    if not isinstance(sigma, dict) or len(sigma) != 1 or next(iter(sigma)) not in ("diag", "dense"):
        raise _field_error("sigma", "expected {\"diag\": [...]} or {\"dense\": [[...], ...]}")
    if "diag" in sigma:
        spec = {"diag": _number_list(sigma["diag"], "sigma.diag")}
        if len(spec["diag"]) != len(mu):
            raise _field_error("sigma.diag", f"length {len(spec['diag'])} does not match mu ({len(mu)})")
    else:
        rows = sigma["dense"]
        if not isinstance(rows, list) or len(rows) != len(mu):
            raise _field_error("sigma.dense", f"expected {len(mu)} rows")
        for i, row in enumerate(rows):
            _number_list(row, f"sigma.dense[{i}]")
            if len(row) != len(mu):
                raise _field_error(f"sigma.dense[{i}]", f"expected {len(mu)} entries")
        spec = {"dense": rows}
    normalize = doc.get("normalize", False)
    if not isinstance(normalize, bool):
        raise _field_error("normalize", "expected true or false")
    try:
        return make_problem(mu, spec, normalize=normalize)
    except ValueError as exc:
        raise _field_error("sigma" if "definite" in str(exc) or "symmetric" in str(exc) else "mu",
                           str(exc)) from None


def load_problem(path):
    """Read a problem file (JSON); errors carry the line or field at fault."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return problem_from_dict(doc)


def problem_to_dict(problem):
    sigma = {"diag": problem.diag.tolist()} if problem.is_diagonal else {"dense": problem.dense.tolist()}
    return {"mu": problem.mu.tolist(), "sigma": sigma, "normalize": problem.normalized}
