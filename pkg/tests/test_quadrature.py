"""Geometric measures, two-route factorizations, sphere transport identity."""

import math

import numpy as np
import pytest

from acousticgeo import catalog, jets, quadrature, regions
from acousticgeo.fluid import IdealGasEOS
from acousticgeo.quadrature import QuadratureGrid, pairwise_sum
from acousticgeo.regions import ConeSpec, RegionSpec, TimeFunction, TubeSpec

EOS = IdealGasEOS(gamma=1.4)
CAT = catalog.default_catalog()


def one(t, x):
    return np.ones(np.asarray(t).shape)


@pytest.fixture(scope="module")
def constant_tube():
    spec = RegionSpec(boundary=TubeSpec(R0=2.0, speed=2.0), T=0.5)
    return regions.build_region(spec, CAT["constant"], EOS)


@pytest.fixture(scope="module")
def constant_cone():
    spec = RegionSpec(boundary=ConeSpec(R0=2.0, degree=12), T=0.4)
    return regions.build_region(spec, CAT["constant"], EOS)


@pytest.fixture(scope="module")
def general_tube():
    timefn = TimeFunction(eps=0.05, center=(0.3, -0.2, 0.1), width=3.0)
    spec = RegionSpec(boundary=TubeSpec(R0=2.0, speed=2.0), timefn=timefn, T=0.4)
    return regions.build_region(spec, CAT["composite"], EOS)


def test_closed_form_measures(constant_tube):
    # R(t) = 2 - 2t with c = 1: every measure has an elementary value
    g = QuadratureGrid(32, 32, 32, 32)
    vol = quadrature.integrate(constant_tube, "bulk", one, g)
    exact = (4.0 * math.pi / 3.0) * (15.0 / 8.0)
    assert abs(vol - exact) <= 1e-8 * exact
    area = quadrature.integrate(constant_tube, "sphere", one, g, tau=0.3)
    assert abs(area - 4.0 * math.pi * 1.4**2) <= 1e-10
    lat = quadrature.integrate(constant_tube, "lateral", one, g)
    assert abs(lat - 4.0 * math.pi * 7.0 / 6.0) <= 1e-10
    ball = quadrature.integrate(constant_tube, "leaf", one, g, tau=0.3)
    assert abs(ball - (4.0 * math.pi / 3.0) * 1.4**3) <= 1e-10


def test_grid_plumbing():
    g = QuadratureGrid(8, 12, 16, 20)
    assert QuadratureGrid.from_dict(g.to_dict()) == g
    assert g.refined(2) == QuadratureGrid(16, 24, 32, 40)
    for n in (3, 8, 17):
        _, w = quadrature._gauss(n, 0.0, 1.0)
        assert np.all(w > 0.0)
    vals = np.array([0.1, -0.7, 0.3, 2.0, -1.1])
    u0, u1, u2 = 0.1 + -0.7, 0.3 + 2.0, -1.1 + 0.0
    assert pairwise_sum(vals) == (u0 + u2) + (u1 + 0.0)


def test_integration_is_deterministic(general_tube):
    def f(t, x):
        return np.exp(-t) * (1.0 + 0.3 * np.sin(x[..., 1]) * np.cos(x[..., 2]))

    g = QuadratureGrid(6, 6, 10, 10)
    a = quadrature.integrate(general_tube, "bulk", f, g)
    b = quadrature.integrate(general_tube, "bulk", f, g)
    assert a == b


def test_bulk_two_routes(general_tube, constant_cone):
    def f(t, x):
        return np.exp(-t) * (1.0 + 0.3 * np.sin(x[..., 1]))

    g = QuadratureGrid(12, 12, 12, 12)
    for region in (general_tube, constant_cone):
        out = quadrature.bulk_two_routes(region, f, g)
        assert out["defect"] <= 1e-7 * (1.0 + abs(out["bulk"]))


def test_lateral_two_routes(general_tube, constant_cone):
    def f(t, x):
        return 1.0 + 0.5 * np.cos(x[..., 2]) * np.exp(-t)

    out = quadrature.lateral_two_routes(general_tube, f, QuadratureGrid(12, 12, 12, 12))
    assert out["defect"] <= 1e-7 * (1.0 + abs(out["sphere_route"]))
    with pytest.raises(ValueError, match="spacelike"):
        quadrature.lateral_two_routes(constant_cone, f)


def test_transport_constant_area_law(constant_tube):
    # f = 1 reduces the identity to the area-transport law
    report = quadrature.leaf_transport_check(
        constant_tube, lambda T, X1, X2, X3: T * 0.0 + 1.0,
        grid=QuadratureGrid(12, 12, 12, 12))
    assert report.max_abs <= 1e-7
    assert report.passed


def test_transport_refinement_on_null_cone(constant_cone):
    # random trig polynomial; the tau direction carries the resolvable error
    rng = np.random.default_rng(17)
    a = rng.uniform(0.5, 1.0, 4)

    def f(T, X1, X2, X3):
        return (a[0] * jets.cos(60.0 * T) * (1.0 + 0.3 * jets.sin(X1 + X2))
                + a[1] * jets.sin(60.0 * T + a[2]) * jets.cos(X3)
                + 0.2 * a[3] * jets.sin(30.0 * T))

    defects = {}
    for n in (16, 32):
        report = quadrature.leaf_transport_check(
            constant_cone, f, grid=QuadratureGrid(n, 8, 12, 12))
        defects[n] = report.max_abs
    assert defects[32] <= 1e-7
    assert defects[16] / defects[32] >= 10.0


def test_transport_without_endpoint_spheres(general_tube):
    # f vanishing on the bottom and top spheres isolates the lateral terms
    tau0, tau1 = 0.05, 0.35

    def f(T, X1, X2, X3):
        # tau = t + eps*chi recovered from the ambient point
        tau = general_tube.tau_jet(T, X1, X2, X3)
        win = (tau - tau0) * (tau1 - tau) * (1.0 / (tau1 - tau0)) ** 2
        return win * (1.0 + 0.4 * jets.sin(X1) * jets.cos(X2))

    # with eps != 0 the angular error no longer cancels between the two
    # sides, so the bump needs to be resolved: 24 nodes reach the floor
    report = quadrature.leaf_transport_check(
        general_tube, f, tau_interval=(tau0, tau1),
        grid=QuadratureGrid(16, 8, 24, 24))
    assert report.max_abs <= 1e-12
    assert report.passed


def test_transport_general_time_function(general_tube):
    def f(T, X1, X2, X3):
        return jets.sin(X1 + 0.5 * X2) * jets.cos(0.3 * X3) + 0.2 * jets.cos(T + X3)

    report = quadrature.leaf_transport_check(
        general_tube, f, grid=QuadratureGrid(16, 8, 24, 24))
    assert report.max_abs <= 1e-12
    assert report.samples == 1
