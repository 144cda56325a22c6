import math

import numpy as np
import pytest
from scipy import stats

from reachset.domains import (BallSet, BetaRadial, RectangleSet, UniformBoundary, UniformVolume,
                              boundary_coverage_constant, boundary_density_constant, input_set_from_dict, sample,
                              sampling_from_dict, sampling_to_dict)
from reachset.errors import DomainError

DISC = BallSet((0.0, 0.0), 1.0)
X0 = RectangleSet((2.5, -0.25), (3.0, 0.25))


@pytest.mark.parametrize("spec", [UniformVolume(3), BetaRadial(5.0, 3)])
def test_ball_support(spec):
    pts = sample(BallSet((1.0, -2.0, 0.5), 2.0), spec, 2000)
    assert pts.shape == (2000, 3)
    assert np.all(np.linalg.norm(pts - [1.0, -2.0, 0.5], axis=1) <= 2.0 + 1e-12)


def test_ball_boundary_norms():
    pts = sample(DISC, UniformBoundary(1), 1000)
    assert np.allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-12)


@pytest.mark.parametrize("rho", [0.3, 0.7])
def test_uniform_disc_radial_cdf(rho):
    M = 100_000
    r = np.linalg.norm(sample(DISC, UniformVolume(11), M), axis=1)
    frac = np.mean(r <= rho)
    assert abs(frac - rho ** 2) <= 3 * math.sqrt(rho ** 2 * (1 - rho ** 2) / M)


def test_reproducible():
    a = sample(DISC, BetaRadial(3.0, 42), 500)
    b = sample(DISC, BetaRadial(3.0, 42), 500)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, sample(DISC, BetaRadial(3.0, 43), 500))


def test_beta_alpha_one_is_uniform():
    r1 = np.linalg.norm(sample(DISC, BetaRadial(1.0, 5), 100_000), axis=1)
    r0 = np.linalg.norm(sample(DISC, UniformVolume(7), 100_000), axis=1)
    assert stats.ks_2samp(r1, r0).pvalue > 1e-3
    # against the exact radial law P(r <= s) = s^2
    assert stats.kstest(r1, lambda s: np.clip(s, 0, 1) ** 2).pvalue > 1e-3


def test_beta_concentrates_near_boundary():
    M = 100_000
    probs = []
    for alpha in (1.0, 2.0, 8.0):
        r = np.linalg.norm(sample(DISC, BetaRadial(alpha, 9), M), axis=1)
        probs.append(np.mean(r > 0.9))
    for p1, p2 in zip(probs, probs[1:]):
        assert p2 - p1 > 3 * math.sqrt(2 * 0.25 / M)


def test_rectangle_volume_and_boundary():
    box = RectangleSet((0.0, 0.0, -1.0), (1.0, 2.0, 1.0))
    inner = sample(box, UniformVolume(1), 1000)
    assert np.all(box.contains(inner))
    edge = sample(box, UniformBoundary(2), 3000)
    lo, hi = np.array(box.lo), np.array(box.hi)
    on_face = np.isclose(edge, lo) | np.isclose(edge, hi)
    assert np.all(on_face.any(axis=1)) and np.all(box.contains(edge))


def test_rectangle_boundary_is_perimeter_uniform():
    # long side 4, short side 1: long faces carry 80% of the mass
    box = RectangleSet((0.0, 0.0), (4.0, 1.0))
    pts = sample(box, UniformBoundary(3), 50_000)
    on_long = np.isclose(pts[:, 1], 0.0) | np.isclose(pts[:, 1], 1.0)
    assert abs(on_long.mean() - 0.8) < 3 * math.sqrt(0.16 / 50_000)


def test_beta_on_rectangle_rejected():
    with pytest.raises(DomainError):
        sample(X0, BetaRadial(2.0), 10)


@pytest.mark.parametrize("bad", [dict(lo=(0, 0), hi=(0, 1)), dict(lo=(0,), hi=(1, 1))])
def test_rectangle_validation(bad):
    with pytest.raises(DomainError):
        RectangleSet(**bad)


def test_ball_validation():
    with pytest.raises(DomainError):
        BallSet((0, 0), 0.0)
    with pytest.raises(DomainError):
        BetaRadial(0.5)


def test_r_convexity_defaults():
    assert DISC.r_convexity == 1.0
    assert X0.r_convexity is None


def test_density_constant():
    assert boundary_density_constant(DISC, BetaRadial(1.0), 0.3) == 1.0
    assert boundary_density_constant(DISC, BetaRadial(2.0), 0.1) == pytest.approx(1.81, rel=1e-12)
    assert boundary_density_constant(DISC, BetaRadial(4.0), 1.0) == 1.0
    with pytest.raises(DomainError):
        boundary_density_constant(DISC, BetaRadial(2.0), 1.5)


def test_density_constant_limit_small_eps():
    # (1 - (1-e)^(p a)) / (1 - (1-e)^p) -> alpha as e -> 0
    assert boundary_density_constant(DISC, BetaRadial(6.0), 1e-12) == pytest.approx(6.0, rel=1e-9)


def test_coverage_constant():
    assert boundary_coverage_constant(X0, 0.02 / 2) == pytest.approx(0.01, rel=1e-14)
    unit = RectangleSet((0.0, 0.0), (1.0, 1.0))
    assert boundary_coverage_constant(unit, 0.1) == pytest.approx(0.05, rel=1e-14)
    with pytest.raises(DomainError):
        boundary_coverage_constant(unit, 2.0)
    with pytest.raises(DomainError):
        boundary_coverage_constant(unit, 0.5)


def test_config_round_trip():
    for s in (DISC, X0):
        assert input_set_from_dict(s.to_dict()) == s
    for spec in (UniformVolume(3), UniformBoundary(4), BetaRadial(2.5, 5)):
        assert sampling_from_dict(sampling_to_dict(spec)) == spec
    with pytest.raises(DomainError):
        input_set_from_dict({"kind": "torus"})
