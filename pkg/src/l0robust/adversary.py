"""Adversaries and lower bounds.

* the exact worst-case l0 attack on a filtration/truncation classifier,
  evaluated as a misclassification predicate from order statistics;
* the randomized erasure strategy Adv(A) for diagonal problems, which makes
  the coordinates in A carry no information about the label;
* the genie classifier that knows A and uses only the untouched coordinates;
* the diagonal and general lower bounds on the optimal robust error.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import gmm_model as gm
from . import kernels, rng
from .filtrun import make_report
from .trunc_stats import as_real_vec

WITNESS_MAGNITUDE = 1e15


def _budget(clf, budget):
    b = clf.k if budget is None else budget
    if int(b) != b or b < 0:
        raise ValueError(f"attack budget must be a nonnegative integer, got {budget!r}")
    return int(b)


def _flags_all_attackable(Z, y, t, b):
    n, m = Z.shape
    if b == 0:
        vals = kernels.partition_sums(Z, t, t)[1]
        return np.where(y > 0, vals <= 0, vals > 0)
    if b > t:
        return np.ones(n, dtype=bool)
    out = np.empty(n, dtype=bool)
    pos = y > 0
    if pos.any():
        # b entries pushed to -inf: drop the b + t largest and t - b smallest
        vals = kernels.partition_sums(np.ascontiguousarray(Z[pos]), t - b, t + b)[1]
        out[pos] = vals <= 0
    if (~pos).any():
        vals = kernels.partition_sums(np.ascontiguousarray(Z[~pos]), t + b, t - b)[1]
        out[~pos] = vals > 0
    return out


def _flag_one_general(z, attackable, y, t, b):
    # y = -1 is the mirror image of y = +1
    z = z if y > 0 else -z
    free = np.sort(z[attackable])
    fixed = z[~attackable]
    r = min(b, free.size)
    if r > t:
        return True
    rest = np.sort(np.concatenate([free[:free.size - r], fixed]))
    kept = rest[t - r:rest.size - t]
    s = kept.sum()
    return bool(s <= 0) if y > 0 else bool(s < 0)


def worst_case_flags(clf, X, y, budget=None):
    """Batch form of :func:`worst_case_misclassified`; returns a bool array."""
    b = _budget(clf, budget)
    y = np.asarray(y)
    Z = clf.products(X)
    if y.shape != (Z.shape[0],):
        raise ValueError("labels must have one entry per row")
    attackable = clf.w != 0
    if attackable.all():
        return _flags_all_attackable(Z, y, clf.k, b)
    return np.array([_flag_one_general(Z[r], attackable, y[r], clf.k, b) for r in range(Z.shape[0])])


def worst_case_misclassified(clf, x, y, budget=None):
    """True iff some x' within l0 distance ``budget`` of x is misclassified.

    ``budget`` defaults to the classifier's truncation level.  For
    label +1 the optimal attack sends the largest products ``w_i x_i`` to
    -infinity (the truncated sum is nondecreasing in every entry), so the
    decision reduces to a sum of order statistics of ``w(F) * x_F``; label -1
    is symmetric.  Coordinates with ``w_i = 0`` cannot be moved.
    """
    x = as_real_vec(x)
    if y not in (-1, 1):
        raise ValueError("label must be +1 or -1")
    return bool(worst_case_flags(clf, x[None, :], np.array([y]), budget)[0])


@dataclass(frozen=True)
class AttackOutcome:
    x_prime: np.ndarray
    changed: np.ndarray
    within_budget: bool
    erased: np.ndarray = None


def attack_witness(clf, x, y, budget=None, magnitude=WITNESS_MAGNITUDE):
    """A finite x' realizing the exact attack, with entries of size ``magnitude``."""
    b = _budget(clf, budget)
    x = as_real_vec(x)
    z = clf.products(x[None, :])[0]
    attackable = np.flatnonzero(clf.w != 0)
    # label +1: hit the largest products; label -1: the smallest
    order = attackable[np.argsort(-y * z[attackable], kind="stable")][:b]
    coords = clf.F[order]
    x_prime = x.copy()
    x_prime[coords] = -y * magnitude * np.sign(clf.w[order])
    return AttackOutcome(x_prime, np.sort(coords), True)


@dataclass(frozen=True)
class AdvAStrategy:
    """Erasure strategy on attack set ``A`` with budget ``||nu_A||_1 log d``.

    ``alpha[j]`` is the probability that coordinate ``A[j]`` gets erased.
    """

    A: np.ndarray
    budget: float
    alpha: np.ndarray


def make_adv_a(problem, A):
    _require_diagonal(problem)
    A = gm.as_coord_set(A, problem.d)
    nuA = np.abs(problem.nu[A])
    return AdvAStrategy(A, float(nuA.sum() * math.log(problem.d)), gm.erf(nuA / math.sqrt(2.0)))


def _require_diagonal(problem):
    if not problem.is_diagonal:
        raise ValueError("Adv(A) is defined for diagonal covariances only")


def _adv_core(problem, strat, XA, y, U):
    # U holds two uniforms per attacked coordinate: Bernoulli draw, then replacement
    m = strat.A.size
    muA = problem.mu[strat.A]
    varA = problem.diag[strat.A]
    ymu = y[:, None] * muA
    same_sign = (np.sign(XA) == np.sign(ymu)) & (ymu != 0)
    with np.errstate(over="ignore"):
        keep_prob = np.exp(-2.0 * XA * ymu / varA)
    erased = same_sign & (U[:, :m] < 1.0 - keep_prob)
    ZA = np.where(erased, 2.0 * U[:, m:] - 1.0, XA)
    count = erased.sum(axis=1)
    within = count <= strat.budget
    return ZA, erased, within


def adv_a_batch(problem, strat, X, y, seed, start=0):
    """Apply Adv(A) to rows ``start..`` of a batch; returns ``(X', erased, within)``.

    Row ``r`` uses the adversary substream of sample ``start + r``, so the
    attack on a sample is the same whatever classifier it is replayed against.
    """
    _require_diagonal(problem)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    n = X.shape[0]
    m = strat.A.size
    Xp = X.copy()
    if m == 0:
        return Xp, np.zeros((n, 0), dtype=bool), np.ones(n, dtype=bool)
    U = np.empty((n, 2 * m))
    for r in range(n):
        rng.substream(seed, start + r, rng.ADVERSARY).random(out=U[r])
    ZA, erased, within = _adv_core(problem, strat, X[:, strat.A], y, U)
    rows = np.flatnonzero(within)
    Xp[np.ix_(rows, strat.A)] = ZA[rows]
    return Xp, erased, within


def adv_a_attack(problem, strat, sample, gen):
    """Adv(A) on one labeled sample using generator ``gen``."""
    _require_diagonal(problem)
    x, y = sample
    x = as_real_vec(x)
    m = strat.A.size
    U = gen.random(2 * m)[None, :]
    ZA, erased, within = _adv_core(problem, strat, x[None, strat.A], np.array([y]), U)
    within = bool(within[0])
    x_prime = x.copy()
    changed = np.empty(0, dtype=np.intp)
    if within:
        x_prime[strat.A] = ZA[0]
        changed = strat.A[erased[0]]
    return AttackOutcome(x_prime, changed, within, erased[0])


class GenieClassifier:
    """Bayes rule on the untouched coordinates ``A^c``; constant +1 if A = [d]."""

    def __init__(self, problem, A):
        _require_diagonal(problem)
        self.problem = problem
        self.A = gm.as_coord_set(A, problem.d)
        self.keep = gm.complement(self.A, problem.d)
        self.weights = problem.mu[self.keep] / problem.diag[self.keep]

    def __repr__(self):
        return f"GenieClassifier(d={self.problem.d}, |A|={self.A.size})"

    @property
    def constant(self):
        return self.keep.size == 0

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        if self.constant:
            return np.ones(X.shape[0], dtype=np.int8)
        return np.where(X[:, self.keep] @ self.weights > 0, 1, -1).astype(np.int8)

    def classify(self, x):
        return int(self.predict(as_real_vec(x)[None, :])[0])


def genie_classifier(problem, A):
    return GenieClassifier(problem, A)


def _lower_report(kind, budget, norm_rest, d):
    ld = math.log(d)
    penalty = 1.0 / ld if ld > 0 else math.inf
    tail = gm.phi_bar(norm_rest)
    return make_report(kind, budget, tail - penalty, phi_bar_term=tail, phi_arg=norm_rest,
                       log_penalty=penalty)


def lower_bound_thm2(problem, A):
    """Diagonal lower bound at budget ``||nu_A||_1 log d``."""
    _require_diagonal(problem)
    A = gm.as_coord_set(A, problem.d)
    rest = gm.complement(A, problem.d)
    budget = float(np.abs(problem.nu[A]).sum() * math.log(problem.d))
    return _lower_report("lower-thm2", budget, float(np.linalg.norm(problem.nu[rest])), problem.d)


def lower_bound_thm3(problem, A):
    """General lower bound at budget ``||u_A||_1 log d / sqrt(zeta_min)``."""
    A = gm.as_coord_set(A, problem.d)
    rest = gm.complement(A, problem.d)
    u = gm.u_vector(problem)
    zeta = gm.zeta_min(problem)
    budget = float(np.abs(u[A]).sum() * math.log(problem.d) / math.sqrt(zeta))
    report = _lower_report("lower-thm3", budget, float(np.linalg.norm(u[rest])), problem.d)
    report.components["zeta_min"] = zeta
    return report


def lower_bound_at_budget(problem, k):
    """Largest lower bound whose attack set is a magnitude-sorted prefix within budget ``k``."""
    if problem.is_diagonal:
        weights, scale, bound = np.abs(problem.nu), 1.0, lower_bound_thm2
    else:
        weights = np.abs(gm.u_vector(problem))
        scale, bound = 1.0 / math.sqrt(gm.zeta_min(problem)), lower_bound_thm3
    order = np.argsort(-weights, kind="stable")
    cost = np.concatenate([[0.0], np.cumsum(weights[order])]) * math.log(problem.d) * scale
    m = int(np.flatnonzero(cost <= k * (1 + 1e-12))[-1])
    return bound(problem, order[:m]), order[:m]
