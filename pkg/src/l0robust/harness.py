"""Monte Carlo error estimation, sweeps and brute-force cross-checks."""
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import adversary as adv
from . import asymptotics as asy
from . import filtrun as ft
from . import gmm_model as gm
from . import rng
from .trunc_stats import trunc_inner_product, tsum_k, tsum_rows

Z95 = 1.959963984540054
DEFAULT_CHUNK = 2048


@dataclass(frozen=True)
class ErrorEstimate:
    p_hat: float
    ci_low: float
    ci_high: float
    n: int
    seed: int
    misclassified_count: int

    @property
    def std_error(self):
        """Binomial standard error of ``p_hat``."""
        return math.sqrt(self.p_hat * (1.0 - self.p_hat) / self.n)

    @property
    def ci_width(self):
        return self.ci_high - self.ci_low


def wilson_interval(count, n, z=Z95):
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("n must be positive")
    p = count / n
    z2 = z * z
    centre = (p + z2 / (2 * n)) / (1 + z2 / n)
    half = z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n)
    return max(0.0, min(p, centre - half)), min(1.0, max(p, centre + half))


def estimate(count, n, seed):
    lo, hi = wilson_interval(count, n)
    return ErrorEstimate(count / n, lo, hi, n, seed, int(count))


class ConstantClassifier:
    """Always predicts ``label``; immune to any input perturbation."""

    def __init__(self, label=1):
        self.label = label

    def predict(self, X):
        return np.full(np.asarray(X).shape[0], self.label, dtype=np.int8)


def _chunks(n, chunk):
    return [(s, min(chunk, n - s)) for s in range(0, n, chunk)]


def _run_chunks(problem, n, seed, evaluate, chunk, workers):
    """Sample chunk by chunk and sum ``evaluate(X, y, start)`` over chunks.

    ``evaluate`` returns an integer array of counts; results depend only on
    the sample indices, never on ``workers`` or scheduling.
    """
    chunk = chunk or DEFAULT_CHUNK

    def one(task):
        start, m = task
        X, y = gm.sample(problem, m, seed, start=start)
        return np.asarray(evaluate(X, y, start), dtype=np.int64)

    tasks = _chunks(n, chunk)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, tasks))
    else:
        parts = [one(t) for t in tasks]
    return np.sum(parts, axis=0)


def _attack_flags(clf, X, y, budget):
    if isinstance(clf, ConstantClassifier):
        return y != clf.label
    return adv.worst_case_flags(clf, X, y, budget)


def _check_n(n):
    if n < 100:
        raise ValueError("Monte Carlo estimates need n >= 100")


def mc_robust_errors(problem, classifiers, n, seed, budgets=None, chunk=None, workers=1):
    """Worst-case l0 error for several classifiers on one shared sample stream.

    ``budgets[j]`` is the attack budget for ``classifiers[j]`` (default: its
    truncation level).  Each estimate equals what :func:`mc_robust_error`
    returns for that classifier alone.
    """
    _check_n(n)
    budgets = budgets or [None] * len(classifiers)

    def evaluate(X, y, start):
        return [int(_attack_flags(c, X, y, b).sum()) for c, b in zip(classifiers, budgets)]

    counts = _run_chunks(problem, n, seed, evaluate, chunk, workers)
    return [estimate(int(c), n, seed) for c in counts]


def mc_robust_error(problem, clf, n, seed, budget=None, chunk=None, workers=1):
    """Fraction of samples misclassified under the exact worst-case attack."""
    return mc_robust_errors(problem, [clf], n, seed, [budget], chunk, workers)[0]


def mc_errors_under_adv(problem, classifiers, strat, n, seed, chunk=None, workers=1):
    """Errors of several classifiers on inputs passed through Adv(A) first."""
    _check_n(n)

    def evaluate(X, y, start):
        Xp = adv.adv_a_batch(problem, strat, X, y, seed, start)[0]
        return [int((c.predict(Xp) != y).sum()) for c in classifiers]

    counts = _run_chunks(problem, n, seed, evaluate, chunk, workers)
    return [estimate(int(c), n, seed) for c in counts]


def mc_error_under_adv(problem, classifier, strat, n, seed, chunk=None, workers=1):
    return mc_errors_under_adv(problem, [classifier], strat, n, seed, chunk, workers)[0]


def adv_a_statistics(problem, strat, n, seed, chunk=None):
    """Empirical behaviour of Adv(A): erase rates, gate rate, label-conditional Z moments."""
    m = strat.A.size
    acc = {
        "erased": np.zeros(m),
        "gate_closed": 0,
        "max_changed": 0,
        "budget_violations": 0,
        "count": np.zeros(2),
        "z_sum": np.zeros((2, m)),
        "z_sq": np.zeros((2, m)),
    }

    def evaluate(X, y, start):
        Xp, erased, within = adv.adv_a_batch(problem, strat, X, y, seed, start)
        changed = (Xp != X).sum(axis=1)
        acc["erased"] += erased.sum(axis=0)
        acc["gate_closed"] += int((~within).sum())
        acc["max_changed"] = max(acc["max_changed"], int(changed.max(initial=0)))
        acc["budget_violations"] += int((changed > strat.budget).sum())
        ZA = np.where(erased, Xp[:, strat.A], X[:, strat.A])
        for j, label in enumerate((1, -1)):
            sel = y == label
            acc["count"][j] += sel.sum()
            acc["z_sum"][j] += ZA[sel].sum(axis=0)
            acc["z_sq"][j] += (ZA[sel] ** 2).sum(axis=0)
        return [0]

    _run_chunks(problem, n, seed, evaluate, chunk, 1)
    cnt = acc["count"][:, None]
    mean = acc["z_sum"] / cnt
    var = acc["z_sq"] / cnt - mean ** 2
    se_diff = np.sqrt(var[0] / cnt[0] + var[1] / cnt[1])
    return {
        "erase_rate": acc["erased"] / n,
        "alpha": strat.alpha,
        "gate_rate": acc["gate_closed"] / n,
        "max_changed": acc["max_changed"],
        "budget_violations": acc["budget_violations"],
        "z_mean_pos": mean[0],
        "z_mean_neg": mean[1],
        "z_diff_in_se": np.abs(mean[0] - mean[1]) / se_diff,
        "n": n,
    }


@dataclass(frozen=True)
class SweepRow:
    d: int
    k: int
    f_size: int
    estimate: ErrorEstimate
    upper: ft.BoundReport
    lower: ft.BoundReport
    trivial: bool = False

    def as_record(self):
        e = self.estimate
        return {
            "d": self.d,
            "k": self.k,
            "f_size": self.f_size,
            "p_hat": e.p_hat,
            "ci_low": e.ci_low,
            "ci_high": e.ci_high,
            "upper_bound": self.upper.value,
            "lower_bound": self.lower.value,
            "n": e.n,
            "seed": e.seed,
        }


SWEEP_COLUMNS = ("d", "k", "f_size", "p_hat", "ci_low", "ci_high", "upper_bound", "lower_bound", "n", "seed")
PSI_COLUMNS = ("d", "c", "lambda_c", "psi_d")


def select_filtration(problem, k, policy):
    """Resolve an F-selection policy; returns ``(F, usable)``.

    ``usable`` is False when no classifier with truncation ``k`` exists on
    the selected set (2k >= |F|, or a saturated diagonal selection).
    """
    d = problem.d
    if policy in ("all", None):
        F, usable = np.arange(d), True
    elif policy == "auto-diag":
        F, saturated = ft.select_f_diagonal(problem, k)
        usable = not saturated
    elif policy == "auto-min":
        if d - 2 * k <= 0:
            return np.arange(d), False
        F, usable = ft.select_f_min_bound(problem, k), True
    elif policy.startswith("suffix:"):
        r = int(policy.split(":", 1)[1])
        if not 1 <= r <= d:
            raise ValueError(f"suffix rank must lie in [1, {d}]")
        F, usable = np.sort(ft.magnitude_order(problem)[r - 1:]), True
    else:
        raise ValueError(f"unknown F policy {policy!r}")
    return F, usable and 2 * k < F.size


def classifier_for(problem, k, policy):
    """FilTrun classifier for ``policy``, or a constant rule when none can be built."""
    F, usable = select_filtration(problem, k, policy)
    if not usable:
        return ConstantClassifier(1), F, False
    return ft.build_classifier(problem, F, k), F, True


def upper_bound_for(problem, F, k):
    if problem.is_diagonal:
        return ft.upper_bound_cor1(problem, F, k)
    return ft.upper_bound_thm1(problem, F, k)


def sweep(problem, k_grid, n, seed, selector="auto-diag", chunk=None, workers=1):
    """One row per budget in ``k_grid``; all rows share the sample stream of ``seed``."""
    k_grid = [int(k) for k in k_grid]
    if not k_grid:
        raise ValueError("k grid is empty")
    built = [classifier_for(problem, k, selector) for k in k_grid]
    estimates = mc_robust_errors(problem, [b[0] for b in built], n, seed, chunk=chunk, workers=workers)
    rows = []
    for k, (clf, F, usable), est in zip(k_grid, built, estimates):
        if usable:
            upper = upper_bound_for(problem, F, k)
        else:
            upper = ft.make_report("upper-cor1" if problem.is_diagonal else "upper-thm1", k, 1.0,
                                   trivial_classifier=True)
        lower = adv.lower_bound_at_budget(problem, k)[0]
        rows.append(SweepRow(problem.d, k, int(F.size) if usable else 0, est, upper, lower, not usable))
    return rows


def psi_table(nu_sorted, c_grid, family="custom"):
    curve = asy.psi_curve(nu_sorted, c_grid, family)
    return [
        {"d": curve.d, "c": float(c), "lambda_c": int(lam), "psi_d": float(p)}
        for c, lam, p in zip(curve.c, curve.lam, curve.psi)
    ]


# brute-force oracles ------------------------------------------------------

ORACLE_GRID = (-1e6, -1.0, 0.0, 1.0, 1e6)


def brute_force_attack(clf, x, y, budget, grid=ORACLE_GRID):
    """Search every subset of size <= budget and every grid assignment.

    Returns ``(misclassified, witness)`` where ``witness`` is
    ``(subset, values)`` for the first successful perturbation, else None.
    """
    x = np.asarray(x, dtype=np.float64)
    d = x.size
    cands, meta = [x.copy()], [((), ())]
    for size in range(1, budget + 1):
        for subset in itertools.combinations(range(d), size):
            for values in itertools.product(grid, repeat=size):
                xp = x.copy()
                xp[list(subset)] = values
                cands.append(xp)
                meta.append((subset, values))
    pred = clf.predict(np.array(cands))
    bad = np.flatnonzero(pred != y)
    if bad.size == 0:
        return False, None
    return True, meta[int(bad[0])]


def stability_fuzz(gen, cases, d_range=(5, 200), big=1e9):
    """Check the truncated inner product stability bounds on random perturbations.

    Returns the largest observed ``lhs - bound`` for the 8k, 2kM and 6kM
    inequalities (all must be <= 0) and the first violating case, if any.
    """
    worst = {"eight_k_m": -np.inf, "two_k_m": -np.inf, "six_k_m": -np.inf, "six_k_min": -np.inf}
    witness = None
    for _ in range(cases):
        d = int(gen.integers(d_range[0], d_range[1] + 1))
        k = int(gen.integers(0, (d - 1) // 2 + 1))
        w = gen.normal(size=d) * gen.choice([1e-3, 1.0, 1e3])
        x = gen.normal(size=d) * gen.choice([1e-3, 1.0, 1e3])
        xp = x.copy()
        m = int(gen.integers(0, k + 1))
        idx = gen.choice(d, size=m, replace=False)
        kind = gen.integers(0, 3)
        if kind == 0:
            xp[idx] = gen.choice([-big, big], size=m)
        elif kind == 1:
            xp[idx] = gen.uniform(-big, big, size=m)
        else:
            xp[idx] = gen.normal(size=m) * 10.0 ** gen.integers(-3, 10, size=m)
        z, zp = w * x, w * xp
        M = float(np.abs(z).max())
        margins = {
            "eight_k_m": abs(trunc_inner_product(w, xp, k) - math.fsum(z)) - 8 * k * M,
            "two_k_m": abs(tsum_k(z, k) - math.fsum(z)) - 2 * k * M,
            "six_k_m": abs(tsum_k(z, k) - tsum_k(zp, k)) - 6 * k * M,
            "six_k_min": abs(tsum_k(z, k) - tsum_k(zp, k)) - 6 * k * min(M, float(np.abs(zp).max())),
        }
        for key, val in margins.items():
            worst[key] = max(worst[key], val)
            if val > 0 and witness is None:
                witness = {"check": key, "w": w, "x": x, "x_prime": xp, "k": k, "margin": val}
    return worst, witness


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    witness: object = None


@dataclass
class ValidationReport:
    seed: int
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def lines(self):
        out = []
        for c in self.checks:
            out.append(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
            if not c.passed and c.witness is not None:
                out.append(f"    counterexample: {c.witness!r}")
        return out


def _random_diag_problem(gen, d):
    mu = gen.normal(size=d)
    var = gen.uniform(0.25, 4.0, size=d)
    return gm.make_problem(mu, var, normalize=True)


def check_attack_oracle(gen, samples, dims=range(3, 8), ks=(1, 2), predicate=None):
    """Exact attack predicate against brute force; returns a CheckResult."""
    predicate = predicate or adv.worst_case_misclassified
    total = 0
    for d in dims:
        for k in ks:
            if 2 * k >= d:
                continue
            for s in range(samples):
                problem = _random_diag_problem(gen, d)
                # keep |w_i| away from 0 so the finite grid acts as +-infinity
                mu = problem.mu + 0.3 * np.sign(problem.mu)
                problem = gm.make_problem(mu, problem.diag, normalize=True)
                clf = ft.build_classifier(problem, None, k)
                xs, ys = gm.sample(problem, 1, int(gen.integers(1 << 62)))
                x, y = xs[0], int(ys[0])
                fast = predicate(clf, x, y)
                slow, wit = brute_force_attack(clf, x, y, k)
                total += 1
                if fast != slow:
                    return CheckResult(
                        "attack-oracle", False,
                        f"disagreement at d={d}, k={k} after {total} cases",
                        {"x": x.tolist(), "y": y, "k": k, "predicate": bool(fast),
                         "brute_force": bool(slow), "subset_values": wit},
                    )
    return CheckResult("attack-oracle", True, f"{total} cases agree with brute force")


def _check_trunc(gen, cases):
    from . import kernels
    out = []
    worst, wit = stability_fuzz(gen, cases, d_range=(6, 6))
    out.append(CheckResult("stability-d6", wit is None, f"max margins {_fmt(worst)}", wit))
    worst, wit = stability_fuzz(gen, cases)
    out.append(CheckResult("stability-fuzz", wit is None, f"max margins {_fmt(worst)}", wit))
    Z = gen.normal(size=(200, 33))
    ref = np.array([tsum_k(r, 4) for r in Z])
    fast = tsum_rows(Z, 4)
    err = float(np.max(np.abs(ref - fast)))
    out.append(CheckResult(f"kernel-vs-sort[{kernels.BACKEND}]", err < 1e-10, f"max abs diff {err:.2e}"))
    return out


def _fmt(worst):
    return ", ".join(f"{k}={v:.3g}" for k, v in worst.items())


def _check_adv(seed):
    problem = asy.family_uniform(256)
    strat = adv.make_adv_a(problem, np.arange(64))
    stats = adv_a_statistics(problem, strat, 20000, seed)
    n = stats["n"]
    err = float(np.max(np.abs(stats["erase_rate"].mean() - stats["alpha"].mean())))
    pooled_se = math.sqrt(stats["alpha"].mean() * (1 - stats["alpha"].mean()) / (n * strat.A.size))
    gate_bound = 1.0 / math.log(problem.d) + 3 * math.sqrt(max(stats["gate_rate"], 1e-12) / n)
    return [
        CheckResult("adv-erase-rate", err < 5 * pooled_se, f"|rate - alpha| = {err:.2e} (5 SE = {5 * pooled_se:.2e})"),
        CheckResult("adv-gate-rate", stats["gate_rate"] <= gate_bound, f"gate rate {stats['gate_rate']:.4f}"),
        CheckResult("adv-label-independence", bool(np.all(stats["z_diff_in_se"] < 5)),
                    f"max label mean gap {np.max(stats['z_diff_in_se']):.2f} SE"),
        CheckResult("adv-l0-budget", stats["budget_violations"] == 0,
                    f"max changed {stats['max_changed']} <= budget {strat.budget:.2f}"),
    ]


def _check_bounds(gen):
    worst_12 = worst_32 = 0.0
    for _ in range(50):
        d = int(gen.integers(5, 60))
        problem = _random_diag_problem(gen, d)
        F = np.sort(gen.choice(d, size=int(gen.integers(3, d + 1)), replace=False))
        k = int(gen.integers(0, (F.size - 1) // 2 + 1))
        worst_12 = max(worst_12, abs(ft.upper_bound_thm1(problem, F, k).raw - ft.upper_bound_cor1(problem, F, k).raw))
        A = np.flatnonzero(gen.random(d) < 0.5)
        worst_32 = max(worst_32, abs(adv.lower_bound_thm3(problem, A).raw - adv.lower_bound_thm2(problem, A).raw))
    return [
        CheckResult("upper-bound-diagonal-agreement", worst_12 <= 1e-12, f"max diff {worst_12:.1e}"),
        CheckResult("lower-bound-diagonal-agreement", worst_32 <= 1e-12, f"max diff {worst_32:.1e}"),
    ]


SUITES = ("trunc", "attack", "adv", "bounds")


def validate_oracles(seed, suite="all", attack_predicate=None, cases=10_000, attack_samples=100):
    """Run the brute-force and statistical cross-checks; one CheckResult each.

    ``attack_predicate`` replaces the exact attack predicate in the attack
    suite (used to confirm that a broken predicate is caught).
    """
    suites = SUITES if suite == "all" else (suite,)
    unknown = set(suites) - set(SUITES)
    if unknown:
        raise ValueError(f"unknown suite {sorted(unknown)[0]!r}")
    report = ValidationReport(seed)
    gen = rng.substream(seed, 0, rng.AUX)
    for name in suites:
        if name == "trunc":
            report.checks += _check_trunc(gen, cases)
        elif name == "attack":
            report.checks.append(check_attack_oracle(gen, attack_samples, predicate=attack_predicate))
        elif name == "adv":
            report.checks += _check_adv(seed)
        elif name == "bounds":
            report.checks += _check_bounds(gen)
    return report
