import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from l0robust import adversary as adv
from l0robust import asymptotics as asy
from l0robust import filtrun as ft
from l0robust import gmm_model as gm
from l0robust import harness as h
from l0robust.rng import ADVERSARY, substream

FROZEN_LOWER = [
    # frozen from tests/oracles.py
    ("uniform", 1024, 256, 0.048968611296719992),
    ("log-block", 10, 7, 0.057102004367301503),
    ("spiked", 4096, 1, 0.038904191114038921),
]


def diag_problem(seed, d):
    gen = np.random.default_rng(seed)
    mu = gen.normal(size=d)
    mu += 0.3 * np.sign(mu)
    return gm.make_problem(mu, gen.uniform(0.25, 4, size=d), normalize=True)


# exact attack

def test_k0_no_attack_surface():
    p = diag_problem(0, 6)
    clf = ft.build_classifier(p, None, 0)
    X, y = gm.sample(p, 300, seed=1)
    flags = adv.worst_case_flags(clf, X, y)
    assert np.array_equal(flags, clf.predict(X) != y)


def test_linear_classifier_always_beaten():
    p = diag_problem(1, 8)
    clf = ft.build_classifier(p, None, 0)
    X, y = gm.sample(p, 2000, seed=2)
    assert adv.worst_case_flags(clf, X, y, budget=1).all()
    x, yy = X[0], int(y[0])
    wit = adv.attack_witness(clf, x, yy, budget=1)
    assert clf.classify(wit.x_prime) != yy
    assert wit.changed.size == 1


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 7), st.sampled_from([1, 2]))
def test_predicate_matches_brute_force(seed, d, k):
    if 2 * k >= d:
        k = 1
    p = diag_problem(seed, d)
    clf = ft.build_classifier(p, None, k)
    X, y = gm.sample(p, 4, seed)
    for x, yy in zip(X, y):
        assert adv.worst_case_misclassified(clf, x, int(yy)) == h.brute_force_attack(clf, x, int(yy), k)[0]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_witness_realizes_predicate(seed):
    gen = np.random.default_rng(seed)
    d = int(gen.integers(5, 40))
    p = diag_problem(seed, d)
    k = int(gen.integers(1, (d - 1) // 2 + 1))
    clf = ft.build_classifier(p, None, k)
    X, y = gm.sample(p, 20, seed)
    for x, yy in zip(X, y):
        yy = int(yy)
        wit = adv.attack_witness(clf, x, yy)
        assert np.count_nonzero(wit.x_prime != x) <= k
        assert (clf.classify(wit.x_prime) != yy) == adv.worst_case_misclassified(clf, x, yy)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_monotone_in_budget(seed):
    gen = np.random.default_rng(seed)
    d = int(gen.integers(5, 30))
    p = diag_problem(seed, d)
    X, y = gm.sample(p, 200, seed)
    prev = np.zeros(200, dtype=bool)
    for k in range((d - 1) // 2 + 1):
        flags = adv.worst_case_flags(ft.build_classifier(p, None, k), X, y)
        assert np.all(flags >= prev)
        prev = flags


def test_zero_weights_are_immune():
    p = gm.make_problem([1.0, 0.0, 2.0, 0.0, 1.5], np.ones(5))
    clf = ft.build_classifier(p, None, 1)
    X, y = gm.sample(p, 40, seed=3)
    for x, yy in zip(X, y):
        yy = int(yy)
        assert adv.worst_case_misclassified(clf, x, yy) == h.brute_force_attack(clf, x, yy, 1)[0]
    # budget exceeding the attackable coordinates still cannot touch zero weights
    assert adv.worst_case_misclassified(clf, np.array([1, 50, 1, 50, 1.0]), 1, budget=3)


def test_predicate_on_filtered_classifier():
    p = diag_problem(4, 7)
    clf = ft.build_classifier(p, [0, 2, 3, 5, 6], 1)
    X, y = gm.sample(p, 30, seed=5)
    for x, yy in zip(X, y):
        yy = int(yy)
        assert adv.worst_case_misclassified(clf, x, yy) == h.brute_force_attack(clf, x, yy, 1)[0]


def test_budget_validation():
    clf = ft.build_classifier(diag_problem(0, 5), None, 1)
    with pytest.raises(ValueError):
        adv.worst_case_misclassified(clf, np.zeros(5), 1, budget=-1)
    with pytest.raises(ValueError):
        adv.worst_case_misclassified(clf, np.zeros(5), 0)


# Adv(A)

def test_strategy_fields():
    p = asy.family_uniform(1024)
    A = np.arange(256)
    s = adv.make_adv_a(p, A)
    assert s.budget == pytest.approx(256 / 32 * math.log(1024), rel=1e-14)
    assert np.allclose(s.alpha, math.erf(1 / 32 / math.sqrt(2)), atol=1e-15)
    with pytest.raises(ValueError, match="diagonal"):
        adv.make_adv_a(gm.make_problem([1.0, 1.0], np.eye(2)), [0])


def test_alpha_matches_quadrature():
    from scipy import integrate
    from scipy.stats import norm
    for nu in (0.1, 0.5, 1.0, 2.0):
        # P(erase | y=1) = int_{x>0} (1 - p(x)) phi(x - nu) dx with p(x) = exp(-2 x nu)
        val = integrate.quad(lambda x: (1 - math.exp(-2 * x * nu)) * norm.pdf(x - nu), 0, np.inf)[0]
        assert val == pytest.approx(math.erf(nu / math.sqrt(2)), abs=1e-10)


def test_wrong_sign_and_zero_mean_never_erased():
    p = gm.make_problem([1.0, 0.0, -1.0], np.ones(3))
    s = adv.make_adv_a(p, [0, 1, 2])
    X = np.array([[-2.0, 5.0, 3.0], [-0.1, -5.0, 0.2]])
    y = np.array([1, 1])
    Xp, erased, within = adv.adv_a_batch(p, s, X, y, seed=0)
    assert not erased.any()
    assert np.array_equal(Xp, X)


def test_erase_rate_unit_signal():
    p = gm.make_problem([1.0, 1.0], np.ones(2))  # nu_i = 1 without normalizing
    s = adv.make_adv_a(p, [0])
    stats = h.adv_a_statistics(p, s, 100_000, seed=4)
    assert abs(stats["erase_rate"][0] - 0.6827) < 0.006


def test_adv_single_matches_batch():
    p = asy.family_uniform(64)
    s = adv.make_adv_a(p, np.arange(16))
    X, y = gm.sample(p, 5, seed=8)
    Xp, erased, within = adv.adv_a_batch(p, s, X, y, seed=8)
    for r in range(5):
        out = adv.adv_a_attack(p, s, (X[r], int(y[r])), substream(8, r, ADVERSARY))
        assert np.array_equal(out.x_prime, Xp[r])
        assert np.array_equal(out.erased, erased[r])
        assert out.within_budget == within[r]
        assert np.all(out.x_prime[np.setdiff1d(np.arange(64), out.changed)] == X[r][np.setdiff1d(np.arange(64), out.changed)])
        assert out.changed.size <= s.budget


def test_budget_gate_restores_input():
    # tiny budget: any erasure closes the gate
    p = gm.make_problem(np.full(4, 3.0), np.ones(4))
    s = adv.AdvAStrategy(np.arange(4), 0.5, np.zeros(4))
    X, y = gm.sample(p, 200, seed=1)
    Xp, erased, within = adv.adv_a_batch(p, s, X, y, seed=1)
    assert np.array_equal(within, erased.sum(axis=1) == 0)
    assert np.array_equal(Xp[~within], X[~within])


def test_replacement_values_in_unit_interval():
    p = asy.family_uniform(16)
    s = adv.make_adv_a(p, np.arange(16))
    X, y = gm.sample(p, 3000, seed=2)
    Xp, erased, within = adv.adv_a_batch(p, s, X, y, seed=2)
    vals = Xp[:, s.A][erased & within[:, None]]
    assert vals.size > 100 and np.all(np.abs(vals) <= 1)


# genie and lower bounds

def test_genie_constant_and_full():
    p = asy.family_uniform(32)
    g = adv.genie_classifier(p, np.arange(32))
    assert g.constant and np.all(g.predict(np.zeros((3, 32))) == 1)
    g0 = adv.genie_classifier(p, [])
    X = gm.sample(p, 50, 1)[0]
    assert np.array_equal(g0.predict(X), ft.build_classifier(p).predict(X))


def test_genie_no_attack_error():
    p = asy.family_uniform(64)
    s = adv.make_adv_a(p, [])
    est = h.mc_error_under_adv(p, adv.genie_classifier(p, []), s, 100_000, seed=3)
    assert abs(est.p_hat - gm.phi_bar(1.0)) <= 4 * est.std_error


def test_thm2_examples():
    d = 256
    p = asy.family_uniform(d)
    ld = math.log(d)
    r = adv.lower_bound_thm2(p, [])
    assert r.raw == pytest.approx(gm.phi_bar(1.0) - 1 / ld, abs=1e-14) and r.budget == 0
    r = adv.lower_bound_thm2(p, np.arange(d))
    assert r.raw == pytest.approx(0.5 - 1 / ld, abs=1e-14)
    assert r.budget == pytest.approx(math.sqrt(d) * ld, rel=1e-12)
    for m in (16, 100):
        r = adv.lower_bound_thm2(p, np.arange(m))
        assert r.budget == pytest.approx(m * ld / math.sqrt(d), rel=1e-12)
        assert r.raw == pytest.approx(gm.phi_bar(math.sqrt(1 - m / d)) - 1 / ld, abs=1e-14)


def test_lower_bound_clamps():
    p = asy.family_uniform(4)
    r = adv.lower_bound_thm2(p, [])
    assert r.raw < 0 and r.value == 0.0 and r.vacuous


@pytest.mark.parametrize("name,size,m,raw", FROZEN_LOWER)
def test_frozen_lower_values(name, size, m, raw):
    p = asy.family_problem(name, nblocks=size) if name == "log-block" else asy.family_problem(name, d=size)
    A = ft.magnitude_order(p)[:m]
    assert abs(adv.lower_bound_thm2(p, A).raw - raw) <= 1e-9
    assert abs(adv.lower_bound_thm3(p, A).raw - raw) <= 1e-9


def test_thm3_equicorrelated():
    rho = 0.5
    S = np.array([[1.0, rho], [rho, 1.0]])
    p = gm.make_problem([1.0, 0.5], S)
    r = adv.lower_bound_thm3(p, [0])
    assert r.components["zeta_min"] == pytest.approx(0.5, abs=1e-14)
    assert r.budget == pytest.approx(1.0 * math.log(2) * math.sqrt(2), rel=1e-12)
    r0 = adv.lower_bound_thm3(p, [])
    assert r0.raw == pytest.approx(gm.phi_bar(np.linalg.norm(gm.u_vector(p))) - 1 / math.log(2), abs=1e-14)


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1))
def test_thm3_reduces_to_thm2(seed):
    gen = np.random.default_rng(seed)
    d = int(gen.integers(2, 50))
    p = diag_problem(seed, d)
    A = np.flatnonzero(gen.random(d) < 0.4)
    a, b = adv.lower_bound_thm2(p, A), adv.lower_bound_thm3(p, A)
    assert abs(a.raw - b.raw) <= 1e-12 and abs(a.budget - b.budget) <= 1e-12 * max(1, a.budget)


def test_lower_bound_at_budget_prefix():
    p = asy.family_uniform(4096)
    rep, A = adv.lower_bound_at_budget(p, 64)
    assert rep.budget <= 64 + 1e-9
    assert A.size == int(64 * 64 / math.log(4096))
    rep0, A0 = adv.lower_bound_at_budget(p, 0)
    assert A0.size == 0 and rep0.budget == 0
