import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phasechem.errors import DomainViolation, NegativeSigma, OutOfDomain
from phasechem.potentials import (
    AlphaSpec,
    F,
    F_prime,
    ModelParams,
    alpha_eval,
    beta,
    beta_prime,
    check_sqrt_lipschitz,
    fenchel_gap,
    gamma,
    gamma_hat,
)

# high-precision reference values
F_HALF = 0.26162407188227393  # 1.5 ln 1.5 + 0.5 ln 0.5
LN3 = 1.0986122886681098
LN2 = 0.6931471805599453


def test_F_values_and_symmetry():
    assert F(0.0) == 0.0
    assert F(0.0, lam=3.0) == 0.0
    assert F(0.5) == pytest.approx(F_HALF, rel=1e-14)
    rng = np.random.default_rng(0)
    r = rng.uniform(-0.99, 0.99, 200)
    assert np.allclose(F(r), F(-r), rtol=1e-13, atol=1e-15)
    assert F(0.5, lam=2.0) == pytest.approx(F_HALF - 0.25, rel=1e-13)


def test_F_out_of_domain():
    for bad in (1.0, -1.0, 1.5):
        with pytest.raises(OutOfDomain):
            F(bad)
        with pytest.raises(OutOfDomain):
            beta(bad)


def test_beta_values():
    assert beta(0.0) == 0.0
    assert beta(0.5) == pytest.approx(LN3, rel=1e-14)
    assert F_prime(0.5, lam=2.0) == pytest.approx(LN3 - 1.0, rel=1e-13)


@given(st.floats(min_value=-0.999, max_value=0.999))
def test_beta_odd(r):
    assert beta(-r) == pytest.approx(-beta(r), abs=1e-12)


def test_beta_slope_at_least_two():
    rng = np.random.default_rng(1)
    r = rng.uniform(-0.97, 0.97, 300)
    h = 1e-6
    slope = (beta(r + h) - beta(r - h)) / (2 * h)
    assert np.all(slope >= 2.0 - 1e-4)
    assert np.all(beta_prime(r) >= 2.0)


def test_gamma_values():
    assert gamma(2.0) == 0.0
    assert gamma_hat(2.0) == 0.0
    assert gamma(-1.0) == pytest.approx(-LN2, rel=1e-14)
    assert gamma_hat(-1.0) == pytest.approx(2 * LN2 - 1.0, rel=1e-13)
    r = np.linspace(-5, 5, 101)
    assert np.all(gamma(r) <= 0.0)
    assert np.all(gamma_hat(r) >= 0.0)


@given(
    st.floats(min_value=-50.0, max_value=50.0),
    st.floats(min_value=-50.0, max_value=50.0),
)
def test_gamma_one_lipschitz(a, b):
    assert abs(gamma(a) - gamma(b)) <= abs(a - b) + 1e-12


def test_gamma_hat_derivative_matches_gamma():
    # central differences away from the kink at zero
    rng = np.random.default_rng(2)
    r = rng.uniform(-4, 4, 500)
    r = r[np.abs(r) > 1e-3]
    h = 1e-5
    fd = (gamma_hat(r + h) - gamma_hat(r - h)) / (2 * h)
    assert np.max(np.abs(fd - gamma(r))) < 1e-6


def test_alpha_logistic_examples():
    spec = AlphaSpec.logistic(ell=1.0, p=1.0)
    for s in (0.0, 1.0, 7.3):
        assert alpha_eval(spec, -1.0, s) == 0.0
    assert alpha_eval(spec, 1.0, 0.0) == 1.0
    assert alpha_eval(spec, 0.0, 4.0) == pytest.approx(-1.5, rel=1e-14)
    with pytest.raises(NegativeSigma):
        alpha_eval(spec, 0.0, -0.5)


def test_alpha_constant_and_bounds():
    spec = AlphaSpec.constant(-0.7)
    assert spec(0.3, 5.0) == -0.7
    assert spec.bounds() == (-0.7, -0.7)
    log = AlphaSpec.logistic(ell=1.0, p=1.0, sigma_box=10.0)
    lo, hi = log.bounds()
    assert lo == -9.0 and hi == 1.0
    rng = np.random.default_rng(3)
    phi = rng.uniform(-1, 1, 5000)
    sig = rng.uniform(0, 10.0, 5000)
    vals = alpha_eval(log, phi, sig)
    assert np.all(vals >= lo - 1e-12) and np.all(vals <= hi + 1e-12)


def test_alpha_custom_h_table_validation():
    AlphaSpec.logistic(h_table=((-1.0, 0.0, 1.0), (0.0, 0.4, 1.0)))
    with pytest.raises(ValueError):
        AlphaSpec.logistic(h_table=((-1.0, 1.0), (0.2, 1.0)))  # h(-1) != 0
    with pytest.raises(ValueError):
        AlphaSpec.logistic(h_table=((-1.0, 0.5, 1.0), (0.0, 0.9, 0.5)))  # decreasing


def test_sqrt_lipschitz_constant_function():
    rep = check_sqrt_lipschitz(lambda t: np.full_like(t, 2.0), cap=10.0)
    assert rep.lipschitz_estimate == 0.0
    assert rep.all_finite


def test_sqrt_lipschitz_sqrt_is_unit():
    rep = check_sqrt_lipschitz(np.sqrt, cap=10.0)
    assert rep.lipschitz_estimate == pytest.approx(1.0, abs=1e-9)


def test_sqrt_lipschitz_linear_grows_like_2sqrt_cap():
    # (theta - eta)/(sqrt(theta) - sqrt(eta)) = sqrt(theta) + sqrt(eta) <= 2 sqrt(cap)
    cap = 100.0
    rep = check_sqrt_lipschitz(lambda t: t, cap=cap)
    assert rep.lipschitz_estimate <= 2 * math.sqrt(cap) + 1e-9
    assert rep.lipschitz_estimate >= 1.9 * math.sqrt(cap)


def test_sqrt_lipschitz_hypothesis_class_sharp_constant():
    # antiderivative of 1/(1+sqrt(r)); proof constant sup 2 xi/(1+xi)
    cap = 100.0

    def f(r):
        s = np.sqrt(r)
        return 2.0 * (s - np.log1p(s))

    rep = check_sqrt_lipschitz(f, cap=cap, n_pairs=50_000)
    proof = 2.0 * math.sqrt(cap) / (1.0 + math.sqrt(cap))
    assert rep.lipschitz_estimate <= proof + 1e-9
    assert rep.lipschitz_estimate >= 0.95 * proof


def test_fenchel_gap_zero_at_equality():
    assert fenchel_gap(1.0, 0.3, 0.3, 2.0, 2.0) == pytest.approx(0.0, abs=1e-14)


def test_fenchel_gap_reference_value():
    got = fenchel_gap(1.0, 0.5, -0.5, 2.0, 1.0)
    assert got == pytest.approx(4.227411277760218, rel=1e-13)


def test_fenchel_gap_monte_carlo_nonnegative():
    rng = np.random.default_rng(4)
    n = 10**6
    w = rng.uniform(-1, 1, n) * (1 - 1e-12)
    wt = rng.uniform(-1, 1, n) * (1 - 1e-12)
    u = np.exp(rng.normal(0, 1.5, n))
    ut = np.exp(rng.normal(0, 1.5, n))
    gap = fenchel_gap(1.0, w, wt, u, ut)
    assert float(np.min(gap)) >= -1e-12 * float(np.max(1 + u + ut))


def test_fenchel_gap_domain_checks():
    with pytest.raises(DomainViolation):
        fenchel_gap(1.0, 1.0, 0.0, 1.0, 1.0)
    with pytest.raises(DomainViolation):
        fenchel_gap(1.0, 0.0, 0.0, -1.0, 1.0)
    with pytest.raises(DomainViolation):
        fenchel_gap(-2.0, 0.0, 0.0, 1.0, 1.0)


@settings(max_examples=300)
@given(
    st.floats(min_value=-0.99, max_value=0.99),
    st.floats(min_value=-0.99, max_value=0.99),
    st.floats(min_value=-3.0, max_value=3.0),
    st.floats(min_value=-3.0, max_value=3.0),
)
def test_fenchel_gap_property(w, wt, lu, lut):
    gap = fenchel_gap(1.0, w, wt, math.exp(lu), math.exp(lut))
    assert gap >= -1e-11 * (1 + math.exp(lu) + math.exp(lut))


def test_model_params_validation():
    ModelParams(chi=0.0, lam=0.0)
    with pytest.raises(ValueError):
        ModelParams(chi=-1.0)
    with pytest.raises(ValueError):
        ModelParams(chi=1.0, lam=-0.1)
    with pytest.raises(ValueError):
        ModelParams(chi=1.0, delta_safe=0.7)


def test_midpoint_convexity_of_shifted_F():
    rng = np.random.default_rng(5)
    lam = 2.3
    for _ in range(500):
        a, b = rng.uniform(-0.99, 0.99, 2)
        mid = 0.5 * (a + b)
        lhs = F(mid, lam) + 0.5 * lam * mid**2
        rhs = 0.5 * (F(a, lam) + 0.5 * lam * a**2 + F(b, lam) + 0.5 * lam * b**2)
        assert lhs <= rhs + 1e-12
