import math

import numpy as np
import pytest

from recombkin import (
    AlphabetSpec,
    Distribution,
    MutationModel,
    NumericError,
    SiteRateMatrix,
    ValidationError,
    mutation_rhs,
    site_stationary,
    stationary_product_law,
    validate_sites,
)
from recombkin.sampling import random_distribution, random_mutation_model, random_site_matrix

import oracles


def test_validate_pass_symmetric():
    report = validate_sites([SiteRateMatrix.symmetric(2, 1.0)])
    assert report.passed
    assert report.site_problems == ()


def test_validate_fail_disconnected():
    alpha = SiteRateMatrix(np.array([[-1.0, 1.0], [0.0, 0.0]]))
    report = validate_sites([SiteRateMatrix.symmetric(2, 1.0), alpha])
    assert not report.passed
    assert report.site_problems[0][0] == 1
    assert "connected" in report.site_problems[0][1]


def test_validate_fail_row_sum():
    alpha = SiteRateMatrix(np.array([[-1.0 + 1e-3, 1.0], [1.0, -1.0]]))
    report = validate_sites([alpha])
    assert not report.passed
    assert "sums to" in report.site_problems[0][1]


def test_validate_fail_negative_rate():
    alpha = SiteRateMatrix(np.array([[0.5, -0.5], [1.0, -1.0]]))
    report = validate_sites([alpha])
    assert not report.passed


def test_site_stationary_symmetric():
    q = site_stationary(SiteRateMatrix.symmetric(2, 3.7))
    assert np.allclose(q.probs, [0.5, 0.5], atol=1e-14)


def test_site_stationary_detailed_balance():
    alpha = SiteRateMatrix(np.array([[-2.0, 2.0], [1.0, -1.0]]))
    q = site_stationary(alpha)
    assert np.allclose(q.probs, [1 / 3, 2 / 3], atol=1e-14)


def test_site_stationary_matches_null_space_oracle():
    rng = np.random.default_rng(42)
    alpha = random_site_matrix(4, rng)
    q = site_stationary(alpha)
    expected = oracles.null_space_stationary(alpha.rates)
    assert np.abs(q.probs - expected).max() < 1e-10
    assert np.abs(q.probs @ alpha.rates).max() < 1e-12


def test_site_stationary_positive_over_samples(rng):
    for _ in range(25):
        k = int(rng.integers(2, 7))
        alpha = random_site_matrix(k, rng, 0.01, 3.0)
        q = site_stationary(alpha)
        assert q.probs.min() > 0.0
        assert np.abs(q.probs @ alpha.rates).max() < 1e-12


def test_model_construction_validates(binary3):
    bad = SiteRateMatrix(np.array([[-1.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValidationError):
        MutationModel(binary3, [bad] * 3)
    with pytest.raises(ValidationError):
        MutationModel(binary3, [SiteRateMatrix.symmetric(2, 1.0)] * 2)
    with pytest.raises(ValidationError):
        MutationModel(binary3, [SiteRateMatrix.symmetric(3, 1.0)] * 3)


def test_model_replicate(binary3):
    model = MutationModel.replicate(binary3, SiteRateMatrix.symmetric(2, 1.0))
    assert len(model.sites) == 3
    assert model.validate().passed


def test_stationary_product_law_uniform(binary3):
    model = MutationModel.replicate(binary3, SiteRateMatrix.symmetric(2, 0.5))
    q = stationary_product_law(model)
    assert np.allclose(q.probs, 1 / 8, atol=1e-14)


def test_stationary_product_law_two_sites():
    spec = AlphabetSpec(2, 2)
    site1 = SiteRateMatrix(np.array([[-2.0, 2.0], [1.0, -1.0]]))  # (1/3, 2/3)
    site2 = SiteRateMatrix.symmetric(2, 1.0)  # (1/2, 1/2)
    model = MutationModel(spec, [site1, site2])
    q = stationary_product_law(model)
    assert np.allclose(q.probs, [1 / 6, 1 / 6, 1 / 3, 1 / 3], atol=1e-14)


def test_stationary_law_is_rhs_fixed_point():
    spec = AlphabetSpec(2, 3)
    model = random_mutation_model(spec, np.random.default_rng(7))
    q = stationary_product_law(model)
    assert np.abs(mutation_rhs(q, model)).max() < 1e-12
    assert q.probs.min() > 0.0


def test_mutation_rhs_single_site():
    spec = AlphabetSpec(2, 1)
    model = MutationModel.replicate(spec, SiteRateMatrix.symmetric(2, 1.0))
    rhs = mutation_rhs(Distribution(spec, [1.0, 0.0]), model)
    assert np.allclose(rhs, [-1.0, 1.0], atol=1e-15)


def test_mutation_rhs_matches_literal_oracle():
    spec = AlphabetSpec(2, 2)
    rng = np.random.default_rng(11)
    model = random_mutation_model(spec, rng)
    mu = random_distribution(spec, rng)
    got = mutation_rhs(mu, model)
    expected = oracles.literal_mutation_rhs(
        mu.probs, spec.k, spec.n, [s.rates for s in model.sites]
    )
    assert np.abs(got - expected).max() < 1e-12


def test_mutation_rhs_conserves_mass(rng):
    spec = AlphabetSpec(3, 3)
    model = random_mutation_model(spec, rng)
    for _ in range(10):
        mu = random_distribution(spec, rng)
        assert abs(mutation_rhs(mu, model).sum()) < 1e-12


def test_mutation_rhs_linearity(rng):
    spec = AlphabetSpec(2, 3)
    model = random_mutation_model(spec, rng)
    mu = random_distribution(spec, rng)
    nu = random_distribution(spec, rng)
    for a in (0.0, 0.25, 0.7, 1.0):
        mix = Distribution(spec, a * mu.probs + (1 - a) * nu.probs)
        combined = a * mutation_rhs(mu, model) + (1 - a) * mutation_rhs(nu, model)
        assert np.abs(mutation_rhs(mix, model) - combined).max() < 1e-12


def test_site_rate_matrix_shape_checks():
    with pytest.raises(ValidationError):
        SiteRateMatrix(np.zeros((2, 3)))
    with pytest.raises(ValidationError):
        SiteRateMatrix(np.array([[np.nan, 0.0], [0.0, 0.0]]))
    with pytest.raises(ValidationError):
        SiteRateMatrix(np.zeros((1, 1)))
