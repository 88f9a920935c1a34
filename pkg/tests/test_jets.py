"""Jet arithmetic: ring axioms, composition inverses, FD cross-checks."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acousticgeo import jets
from acousticgeo.jets import (
    DegenerateJetError,
    DomainError,
    Jet,
    MULTI_INDICES,
    N_COEF,
    coordinate_jets,
    fd_oracle,
)


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    a, b = np.asarray(a), np.asarray(b)
    scale = 1.0 + max(np.max(np.abs(a)), np.max(np.abs(b)))
    return float(np.max(np.abs(a - b)) / scale)


def random_jet(rng, shape=(), low=-2.0, high=2.0, order=3) -> Jet:
    return Jet(rng.uniform(low, high, shape + (N_COEF,)), order)


def test_monomial_layout():
    assert N_COEF == 35
    degs = [sum(mi) for mi in MULTI_INDICES]
    assert degs == sorted(degs)
    assert degs.count(0) == 1 and degs.count(1) == 4
    assert degs.count(2) == 10 and degs.count(3) == 20
    assert len(set(MULTI_INDICES)) == 35


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ring_axioms(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_jet(rng) for _ in range(3))
    assert rel_err(((a * b) * c).coef, (a * (b * c)).coef) <= 1e-13
    assert rel_err((a * (b + c)).coef, (a * b + a * c).coef) <= 1e-13
    assert rel_err((a * b).coef, (b * a).coef) <= 1e-13
    one = Jet.constant(np.ones(a.shape))
    assert np.array_equal((a * one).coef, a.coef)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_division_inverts_multiplication(seed):
    rng = np.random.default_rng(seed)
    a = random_jet(rng, shape=(3,))
    b = random_jet(rng, shape=(3,))
    b.coef[..., 0] = rng.uniform(0.5, 2.0, 3) * rng.choice([-1.0, 1.0], 3)
    assert rel_err(((a / b) * b).coef, a.coef) <= 1e-13
    assert rel_err((b / b).coef, Jet.constant(np.ones(3)).coef) <= 1e-13


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ln_exp_inverse_pair(seed):
    rng = np.random.default_rng(seed)
    a = random_jet(rng, shape=(4,), low=-1.0, high=1.0)
    assert rel_err(jets.ln(jets.exp(a)).coef, a.coef) <= 1e-13
    p = random_jet(rng, shape=(4,), low=-1.0, high=1.0)
    p.coef[..., 0] = rng.uniform(0.5, 3.0, 4)
    assert rel_err(jets.exp(jets.ln(p)).coef, p.coef) <= 1e-13


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_sqrt_and_power(seed):
    rng = np.random.default_rng(seed)
    p = random_jet(rng, shape=(4,), low=-1.0, high=1.0)
    p.coef[..., 0] = rng.uniform(0.5, 3.0, 4)
    r = jets.sqrt(p)
    assert rel_err((r * r).coef, p.coef) <= 1e-13
    assert rel_err(jets.power(p, 0.5).coef, r.coef) <= 1e-13
    assert rel_err(jets.power(p, 3).coef, (p * p * p).coef) <= 1e-13
    assert rel_err(jets.power(p, -1.4).coef, (1.0 / jets.power(p, 1.4)).coef) <= 1e-13


def test_tangent_by_division_matches_derivative_table():
    rng = np.random.default_rng(7)
    a = random_jet(rng, shape=(5,), low=-1.0, high=1.0)
    by_division = jets.sin(a) / jets.cos(a)
    T = np.tan(a.value)
    sec2 = 1.0 + T * T
    derivs = [T, sec2, 2.0 * T * sec2, sec2 * (2.0 + 6.0 * T * T)]
    by_table = jets._horner(a, derivs)
    assert rel_err(by_division.coef, by_table.coef) <= 1e-13


def test_trig_identity():
    rng = np.random.default_rng(11)
    a = random_jet(rng, shape=(5,))
    lhs = jets.sin(a) * jets.sin(a) + jets.cos(a) * jets.cos(a)
    assert rel_err(lhs.coef, Jet.constant(np.ones(5)).coef) <= 1e-13


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_partial_product_rule(seed):
    rng = np.random.default_rng(seed)
    a, b = random_jet(rng), random_jet(rng)
    for i in range(4):
        lhs = (a * b).partial(i)
        rhs = a.partial(i) * b + a * b.partial(i)
        assert rel_err(lhs.coef, rhs.coef) <= 1e-13
        assert lhs.order == 2


def test_partial_chain_rule_exp():
    rng = np.random.default_rng(3)
    a = random_jet(rng, shape=(6,), low=-1.0, high=1.0)
    for i in range(4):
        lhs = jets.exp(a).partial(i)
        rhs = jets.exp(a).truncate(2) * a.partial(i)
        assert rel_err(lhs.coef, rhs.coef) <= 1e-13


def test_coordinate_jets_polynomial_extraction():
    # f = t^2 x1 + 3 x2 x3 - x1^3: derivatives are explicit
    t0, x0 = 0.7, np.array([0.3, -1.2, 0.5])
    T, X1, X2, X3 = coordinate_jets(t0, x0)
    f = T * T * X1 + 3.0 * (X2 * X3) - X1 * X1 * X1
    assert np.isclose(f.value, t0**2 * x0[0] + 3 * x0[1] * x0[2] - x0[0] ** 3, atol=1e-15)
    assert np.isclose(f.derivative((1, 0, 0, 0)), 2 * t0 * x0[0], atol=1e-14)
    assert np.isclose(f.derivative((0, 1, 0, 0)), t0**2 - 3 * x0[0] ** 2, atol=1e-14)
    assert np.isclose(f.derivative((0, 0, 1, 1)), 3.0, atol=1e-14)
    assert np.isclose(f.derivative((1, 1, 0, 0)), 2 * t0, atol=1e-14)
    assert np.isclose(f.derivative((0, 3, 0, 0)), -6.0, atol=1e-14)
    assert np.isclose(f.derivative((2, 1, 0, 0)), 2.0, atol=1e-14)


def _sample_field(t, x):
    return (math.exp(0.3 * t) * math.sin(x[0] + 0.5 * x[1]) * (1.0 + 0.1 * x[2] ** 2)
            + math.cos(0.2 * t * x[0]))


def _sample_field_jet(t, x):
    T, X1, X2, X3 = coordinate_jets(t, x)
    return (jets.exp(0.3 * T) * jets.sin(X1 + 0.5 * X2) * (1.0 + 0.1 * (X3 * X3))
            + jets.cos(0.2 * (T * X1)))


@pytest.mark.parametrize("t0,x0", [
    (0.2, (0.3, -0.4, 0.7)),
    (-0.5, (1.1, 0.2, -0.9)),
    (0.0, (0.0, 0.0, 0.0)),
])
def test_fd_oracle_cross_check(t0, x0):
    x0 = np.array(x0)
    f = _sample_field_jet(t0, x0)
    fd = fd_oracle(_sample_field, t0, x0, order=3)
    assert len(fd) == 34
    for mi, est in fd.items():
        exact = f.derivative(mi)
        tol = 1e-4 if sum(mi) == 3 else 1e-6
        assert abs(exact - est) / (1.0 + abs(est)) <= tol, (mi, exact, est)


def test_batched_matches_pointwise():
    rng = np.random.default_rng(23)
    t = rng.uniform(-1, 1, 9)
    x = rng.uniform(-1, 1, (9, 3))
    batched = _sample_field_jet(t, x)
    for n in range(9):
        single = _sample_field_jet(t[n], x[n])
        assert rel_err(batched.coef[n], single.coef) <= 1e-14


def test_order_demotion():
    rng = np.random.default_rng(5)
    a, b = random_jet(rng), random_jet(rng)
    prod = a.truncate(1) * b
    assert prod.order == 1
    assert np.all(prod.coef[..., 5:] == 0.0)
    # low-order coefficients agree with the full product
    assert rel_err(prod.coef[..., :5], (a * b).coef[..., :5]) <= 1e-15
    with pytest.raises(ValueError):
        prod.partial(0).partial(1)


def test_inverse_trig_against_fd_oracle():
    def ac_field(t, x):
        return math.acos(0.8 * math.sin(x[0] + 0.2 * t) * math.cos(x[1]))

    def at2_field(t, x):
        return math.atan2(x[1] + 0.3 * math.sin(t), x[0] + 0.1 * x[2])

    rng = np.random.default_rng(21)
    for _ in range(6):
        t0 = rng.uniform(-1, 1)
        x0 = rng.uniform(-2, 2, 3)
        if math.hypot(x0[0] + 0.1 * x0[2], x0[1] + 0.3 * math.sin(t0)) < 0.3:
            continue
        T, X1, X2, X3 = coordinate_jets(t0, x0)
        ja = jets.arccos(0.8 * jets.sin(X1 + 0.2 * T) * jets.cos(X2))
        jb = jets.arctan2(X2 + 0.3 * jets.sin(T), X1 + 0.1 * X3)
        for f, j, oracle in ((ac_field, ja, fd_oracle(ac_field, t0, x0, order=2)),
                             (at2_field, jb, fd_oracle(at2_field, t0, x0, order=2))):
            for mi, est in oracle.items():
                scale = 1.0 + abs(est)
                assert abs(j.derivative(mi) - est) / scale <= 2e-7, (f, mi)


def test_arctan2_branches_cover_the_plane():
    angles = np.linspace(-math.pi + 0.05, math.pi - 0.05, 40)
    x0 = np.cos(angles)
    y0 = np.sin(angles)
    T, X1, X2, _ = coordinate_jets(np.zeros(40), np.stack([x0, y0, y0], -1))
    phi = jets.arctan2(X2, X1)
    assert np.max(np.abs(phi.value - angles)) <= 1e-14
    # d(atan2)/dx = -y/r^2, d/dy = x/r^2 on the unit circle
    assert np.max(np.abs(phi.derivative((0, 1, 0, 0)) + y0)) <= 1e-13
    assert np.max(np.abs(phi.derivative((0, 0, 1, 0)) - x0)) <= 1e-13
    with pytest.raises(DomainError):
        jets.arccos(Jet.constant(np.array([1.0])))


def test_domain_errors():
    neg = Jet.constant(np.array([-1.0, 2.0]))
    with pytest.raises(DomainError):
        jets.ln(neg)
    with pytest.raises(DomainError):
        jets.sqrt(neg)
    with pytest.raises(DomainError):
        jets.power(neg, 0.5)
    zero = Jet.constant(np.array([0.0, 1.0]))
    with pytest.raises(DegenerateJetError):
        _ = 1.0 / zero
