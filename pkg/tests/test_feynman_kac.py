import math

import numpy as np
import pytest

from pdd.errors import (ConfigurationError, HorizonExhausted, InvalidArgument,
                        UnsupportedConfiguration)
from pdd.feynman_kac import (LinearBvpSpec, PointEstimate, estimate_point, sample_scores,
                             walk_on_spheres)
from pdd.geometry import BoxDomain, FaceKind
from pdd.problems import ManufacturedElliptic, manufactured_u
from pdd.sde import DiffusionCoefficients, RngStream

from conftest import within


def _x(pts):
    return pts[:, 0]


def _linear(pts, t=0.0):
    return pts[:, 0] + 2.0 * pts[:, 1]


def _saddle(pts, t=0.0):
    return pts[:, 0] ** 2 - pts[:, 1] ** 2


def _ones(pts, t=0.0):
    return np.ones(pts.shape[0])


def test_point_estimate_from_scores():
    est = PointEstimate.from_scores([1.0, 2.0, 3.0, 4.0])
    assert est.value == 2.5
    assert est.std_error == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    assert PointEstimate.from_scores([0.7] * 9).std_error == 0.0


def test_heat_equation_closed_form():
    # u_t = u_xx / 2, u(x, 0) = x^2  ->  u = x^2 + t
    spec = LinearBvpSpec(BoxDomain.interval(-50.0, 50.0), DiffusionCoefficients.brownian(),
                         p=lambda pts: pts[:, 0] ** 2,
                         g=lambda pts, s: pts[:, 0] ** 2 + s, horizon=1.0)
    est = estimate_point([0.3], 0.5, spec, 20_000, 0.05, RngStream(1))
    within(est, 0.59)


def test_constant_data_has_zero_variance():
    box = BoxDomain((0.0, 0.0), (1.0, 1.0))
    spec = LinearBvpSpec(box, DiffusionCoefficients.brownian(), p=_ones, g=_ones, horizon=1.0)
    est = estimate_point([0.2, 0.7], 1.0, spec, 500, 0.01, RngStream(2))
    assert est.value == 1.0 and est.std_error == 0.0
    elliptic = LinearBvpSpec(box, DiffusionCoefficients.brownian(), g=_ones)
    est = estimate_point([0.2, 0.7], 0.0, elliptic, 300, 0.01, RngStream(2))
    assert est.value == 1.0 and est.std_error == 0.0


def test_harmonic_linear_data():
    spec = LinearBvpSpec(BoxDomain((0.0, 0.0), (1.0, 1.0)), DiffusionCoefficients.brownian(),
                         g=_linear)
    est = estimate_point([0.3, 0.6], 0.0, spec, 8_000, 1e-4, RngStream(3))
    within(est, 1.5, slack=0.01)


def test_manufactured_point():
    prob = ManufacturedElliptic()
    est = estimate_point([0.4, 0.5], 0.0, prob.linear_bvp_spec(), 4_000, 1e-4, RngStream(4))
    within(est, float(manufactured_u(0.4, 0.5)), slack=0.06)


def test_walk_on_spheres_harmonic():
    box = BoxDomain((0.0, 0.0), (1.0, 1.0))
    est = walk_on_spheres([0.3, 0.6], box, _saddle, 20_000, stream=RngStream(5))
    within(est, 0.09 - 0.36, slack=0.01)
    with pytest.raises(UnsupportedConfiguration):
        walk_on_spheres([0.5], BoxDomain.interval(0, 1, FaceKind.ABSORBING, FaceKind.REFLECTING),
                        _ones, 10)
    with pytest.raises(InvalidArgument):
        walk_on_spheres([1.5, 0.5], box, _saddle, 10)


def test_worker_count_does_not_change_the_estimate():
    spec = LinearBvpSpec(BoxDomain((0.0, 0.0), (1.0, 1.0)), DiffusionCoefficients.brownian(),
                         g=_linear)
    one = estimate_point([0.5, 0.5], 0.0, spec, 3000, 1e-3, RngStream(6), block_size=512)
    many = estimate_point([0.5, 0.5], 0.0, spec, 3000, 1e-3, RngStream(6), block_size=512,
                          workers=4)
    assert one.value == many.value and one.std_error == many.std_error


def test_target_error_tops_up_with_fresh_blocks():
    spec = LinearBvpSpec(BoxDomain((0.0, 0.0), (1.0, 1.0)), DiffusionCoefficients.brownian(),
                         g=_linear)
    x, stream = np.array([0.5, 0.5]), RngStream(7)
    est = estimate_point(x, 0.0, spec, 50, 1e-3, stream, block_size=16, target_se=1e-9,
                         max_samples=100)
    assert est.n_samples == 100
    first = sample_scores(x, 0.0, spec, 50, 1e-3, stream, 16, 0)
    second = sample_scores(x, 0.0, spec, 50, 1e-3, stream, 16, 4)
    assert np.mean(np.concatenate([first, second])) == pytest.approx(est.value, rel=1e-12)
    assert not np.array_equal(first[:16], second[:16])


def test_argument_checks():
    box = BoxDomain((0.0, 0.0), (1.0, 1.0))
    spec = LinearBvpSpec(box, DiffusionCoefficients.brownian(), g=_linear)
    with pytest.raises(InvalidArgument):
        estimate_point([1.0, 0.5], 0.0, spec, 10, 1e-3, RngStream(0))
    with pytest.raises(InvalidArgument):
        estimate_point([0.5, 0.5], 0.0, spec, 1, 1e-3, RngStream(0))
    para = LinearBvpSpec(box, DiffusionCoefficients.brownian(), p=_ones, g=_ones, horizon=1.0)
    with pytest.raises(InvalidArgument):
        estimate_point([0.5, 0.5], 2.0, para, 10, 1e-3, RngStream(0))
    with pytest.raises(HorizonExhausted):
        estimate_point([0.5, 0.5], 0.0, spec, 10, 1e-6, RngStream(0), max_steps=3)


def test_validate_sign_conditions():
    box = BoxDomain((0.0, 0.0), (1.0, 1.0))
    bad_c = LinearBvpSpec(box, DiffusionCoefficients.brownian(), c=_ones, g=_ones)
    with pytest.raises(ConfigurationError):
        bad_c.validate()
    no_g = LinearBvpSpec(box, DiffusionCoefficients.brownian())
    with pytest.raises(ConfigurationError):
        no_g.validate()
    ManufacturedElliptic().linear_bvp_spec().validate()
