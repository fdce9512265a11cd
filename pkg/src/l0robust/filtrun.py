"""Filtration + truncation classifier and its robust-error upper bounds."""
import math
from dataclasses import dataclass, field

import numpy as np

from . import gmm_model as gm
from .trunc_stats import as_real_vec, tsum_rows

BOUND_KINDS = (
    "upper-thm1",
    "upper-cor1",
    "lower-thm2",
    "lower-thm3",
    "upper-matched",
    "lower-matched",
)


@dataclass(frozen=True)
class BoundReport:
    """A bound value clamped to [0, 1], with the terms it was built from.

    ``components["raw"]`` is the unclamped value; the other entries are the
    pieces that add up to it.
    """

    value: float
    kind: str
    budget: float
    components: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in BOUND_KINDS:
            raise ValueError(f"unknown bound kind {self.kind!r}")

    @property
    def raw(self):
        return self.components["raw"]

    @property
    def vacuous(self):
        return self.value >= 1.0 if self.kind.startswith("upper") else self.value <= 0.0


def make_report(kind, budget, raw, **components):
    value = min(1.0, max(0.0, raw)) if math.isfinite(raw) else (1.0 if raw > 0 else 0.0)
    return BoundReport(float(value), kind, float(budget), {"raw": float(raw), **components})


def _log_d(d):
    return math.log(d)


def _upper_log_term(d):
    ld = _log_d(d)
    return 1.0 / math.sqrt(2.0 * ld) if ld > 0 else math.inf


class FiltrunClassifier:
    """``sign(<w(F), x'_F>_k)`` with ``w(F) = Sigma_F^{-1} mu_F``; ties map to -1."""

    def __init__(self, problem, F, k, w):
        self.problem = problem
        self.F = F
        self.k = k
        self.w = w
        self.w.setflags(write=False)
        self._full = F.size == problem.d

    def __repr__(self):
        return f"FiltrunClassifier(d={self.problem.d}, |F|={self.F.size}, k={self.k})"

    @property
    def d(self):
        return self.problem.d

    def products(self, X):
        """Elementwise products ``w(F) * x_F`` for a batch (n, d)."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.d:
            raise ValueError(f"expected inputs of shape (n, {self.d}), got {X.shape}")
        XF = X if self._full else X[:, self.F]
        return np.ascontiguousarray(XF * self.w)

    def decision_values(self, X):
        return tsum_rows(self.products(X), self.k)

    def predict(self, X):
        return np.where(self.decision_values(X) > 0, 1, -1).astype(np.int8)

    def classify(self, x):
        x = as_real_vec(x, "x'")
        if x.size != self.d:
            raise ValueError(f"input has length {x.size}, classifier expects {self.d}")
        return int(self.predict(x[None, :])[0])


def build_classifier(problem, F=None, k=0):
    """Build the classifier on surviving set ``F`` (default: all coordinates)."""
    F = np.arange(problem.d) if F is None else gm.as_coord_set(F, problem.d)
    if F.size == 0:
        raise ValueError("filtration set F must be nonempty")
    if int(k) != k or k < 0:
        raise ValueError(f"k must be a nonnegative integer, got {k!r}")
    k = int(k)
    if 2 * k >= F.size:
        raise ValueError(f"need 2k < |F|, got k={k}, |F|={F.size}")
    muF = problem.mu[F]
    if problem.is_diagonal:
        w = muF / problem.diag[F]
    else:
        SF = problem.dense[np.ix_(F, F)]
        try:
            w = np.linalg.solve(SF, muF)
        except np.linalg.LinAlgError:
            raise ValueError("Sigma_F is singular") from None
        resid = np.max(np.abs(SF @ w - muF))
        if resid > 1e-8 * max(1.0, np.max(np.abs(muF))):
            raise ValueError(f"Sigma_F solve is inaccurate (residual {resid:.2e})")
    return FiltrunClassifier(problem, F, k, np.array(w, dtype=np.float64))


def _slack_and_arg(nuF, op, k, d):
    n2 = float(np.linalg.norm(nuF))
    if n2 == 0.0:
        raise ValueError("degenerate filtration: nu(F) = 0")
    ninf = float(np.max(np.abs(nuF)))
    ld = _log_d(d)
    slack = 16.0 * k * math.sqrt(2.0 * ld) * op * ninf / n2
    return n2, ninf, slack, n2 - slack


def _check_bound_args(problem, F, k):
    F = gm.as_coord_set(F, problem.d)
    if F.size == 0:
        raise ValueError("filtration set F must be nonempty")
    # the formulas make sense for any real budget; classifiers need integers
    if not k >= 0 or not math.isfinite(k):
        raise ValueError(f"k must be a finite nonnegative number, got {k!r}")
    if 2 * k >= F.size:
        raise ValueError(f"need 2k < |F|, got k={k}, |F|={F.size}")
    return F, int(k) if int(k) == k else float(k)


def upper_bound_thm1(problem, F, k):
    """Upper bound on the robust error of the classifier on ``F`` at budget ``k``.

    General covariance; logs are natural.
    """
    F, k = _check_bound_args(problem, F, k)
    sub = gm.restrict(problem, F)
    op = 1.0 if sub.is_diagonal else gm.op_norm_inf(gm.diag_sqrt_times_inv_sqrt(sub))
    return _upper_report("upper-thm1", sub.nu, op, k, problem.d, F.size)


def upper_bound_cor1(problem, F, k):
    """Diagonal-covariance form of :func:`upper_bound_thm1`, using ``nu_F`` directly."""
    if not problem.is_diagonal:
        raise ValueError("upper_bound_cor1 needs a diagonal covariance")
    F, k = _check_bound_args(problem, F, k)
    return _upper_report("upper-cor1", problem.nu[F], 1.0, k, problem.d, F.size)


def _upper_report(kind, nuF, op, k, d, f_size):
    n2, ninf, slack, arg = _slack_and_arg(nuF, op, k, d)
    log_term = _upper_log_term(d)
    tail = gm.phi_bar(arg)
    return make_report(
        kind,
        k,
        log_term + tail,
        log_term=log_term,
        phi_bar_term=tail,
        phi_arg=arg,
        slack=slack,
        nu_F_norm2=n2,
        nu_F_norminf=ninf,
        op_norm=op,
        f_size=f_size,
    )


def magnitude_order(problem):
    """Coordinates sorted by decreasing |nu_i| (|u_i| for dense), stable."""
    key = problem.nu if problem.is_diagonal else gm.u_vector(problem)
    return np.argsort(-np.abs(key), kind="stable")


def select_f_diagonal(problem, k):
    """Drop the shortest magnitude-sorted prefix with l1 mass >= k log d.

    Returns ``(F, saturated)``.  ``saturated`` is True when the whole of
    ``nu`` has l1 mass below ``k log d``; F is then the single weakest
    coordinate.
    """
    if not problem.is_diagonal:
        raise ValueError("select_f_diagonal needs a diagonal covariance")
    if k < 0:
        raise ValueError("k must be nonnegative")
    order = magnitude_order(problem)
    if k == 0:
        return np.sort(order), False
    target = k * _log_d(problem.d)
    prefix = np.cumsum(np.abs(problem.nu[order]))
    hits = np.flatnonzero(prefix >= target - 1e-12 * max(1.0, target))
    if hits.size == 0:
        return order[-1:].copy(), True
    r = int(hits[0]) + 1
    return np.sort(order[r - 1:]), False


def select_f_min_bound(problem, k):
    """Best magnitude-sorted suffix for the general upper bound.

    Maximizes the normal-tail argument, which is equivalent to minimizing
    the bound but stays informative when the tail saturates at 1.  Ties go
    to the larger set.
    """
    if int(k) != k or k < 0:
        raise ValueError(f"k must be a nonnegative integer, got {k!r}")
    k = int(k)
    d = problem.d
    n_cand = d - 2 * k
    if n_cand <= 0:
        raise ValueError(f"no suffix supports k={k} in dimension d={d}")
    order = magnitude_order(problem)
    if problem.is_diagonal:
        a = np.abs(problem.nu[order])
        tail_sq = np.cumsum((a * a)[::-1])[::-1][:n_cand]
        n2 = np.sqrt(tail_sq)
        with np.errstate(divide="ignore", invalid="ignore"):
            arg = n2 - 16.0 * k * math.sqrt(2.0 * _log_d(d)) * a[:n_cand] / n2
        arg = np.where(n2 > 0, arg, -np.inf)
    else:
        arg = np.full(n_cand, -np.inf)
        for j in range(n_cand):
            sub = gm.restrict(problem, order[j:])
            op = gm.op_norm_inf(gm.diag_sqrt_times_inv_sqrt(sub))
            try:
                arg[j] = _slack_and_arg(sub.nu, op, k, d)[3]
            except ValueError:
                continue
    j = int(np.argmax(arg))
    return np.sort(order[j:])
