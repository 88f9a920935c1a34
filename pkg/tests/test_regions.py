"""Region construction, chart accuracy, frame fields, divergence formulas."""

import math

import numpy as np
import pytest

from acousticgeo import catalog, frames, jets, regions, tensors
from acousticgeo.fluid import IdealGasEOS
from acousticgeo.frames import FrameDegeneracyError, TangencyError
from acousticgeo.jets import Jet, coordinate_jets
from acousticgeo.regions import (ConeSpec, RayEscapeError, Region,
                                 RegionAssumptionError, RegionSpec,
                                 TimeFunction, TubeSpec)
from acousticgeo.tensors import dot, quad

EOS = IdealGasEOS(gamma=1.4)
CAT = catalog.default_catalog()


def sup(obj) -> float:
    if isinstance(obj, Jet):
        return float(np.max(np.abs(obj.value)))
    return float(np.max(np.abs(obj)))


def boundary_sample(region, n, seed, order=2, margin=0.02):
    rng = np.random.default_rng(seed)
    tau = rng.uniform(margin, region.T - margin, n)
    theta = np.arccos(rng.uniform(-0.95, 0.95, n))
    phi = rng.uniform(0.0, 2.0 * math.pi, n)
    t, x = region.boundary_point(tau, theta, phi)
    return frames.frame_at(region, t, x, order=order), (tau, theta, phi, t, x)


@pytest.fixture(scope="module")
def tube_composite():
    spec = RegionSpec(boundary=TubeSpec(R0=2.0, speed=2.0), T=0.4)
    return regions.build_region(spec, CAT["composite"], EOS)


@pytest.fixture(scope="module")
def cone_composite():
    spec = RegionSpec(boundary=ConeSpec(R0=2.0), T=0.4)
    return regions.build_region(spec, CAT["composite"], EOS)


@pytest.fixture(scope="module")
def tube_general():
    timefn = TimeFunction(eps=0.05, center=(0.3, -0.2, 0.1), width=3.0)
    spec = RegionSpec(boundary=TubeSpec(R0=2.0, speed=2.0), timefn=timefn, T=0.4)
    return regions.build_region(spec, CAT["composite"], EOS)


@pytest.fixture(scope="module")
def cone_constant():
    spec = RegionSpec(boundary=ConeSpec(R0=2.0), T=0.8)
    return regions.build_region(spec, CAT["constant"], EOS)


# -- construction and charts ---------------------------------------------


def test_constant_cone_matches_analytic(cone_constant):
    # backward cone of the unit-speed constant state: R(t) = 2 - t
    th = np.arccos(np.linspace(-0.9, 0.9, 7))
    ph = np.linspace(0.1, 2.0 * math.pi, 9)
    TH, PH = map(np.ravel, np.meshgrid(th, ph, indexing="ij"))
    for t in (0.25, 0.5, 0.75):
        R = cone_constant._graph.radius(np.full(TH.shape, t), TH, PH)
        assert sup(R - (2.0 - t)) <= 1e-10
    d = cone_constant.diagnostics
    assert d["fit_residual"] <= 1e-10
    assert d["null_residual"] <= 1e-9


def test_tube_ingoing_gate():
    ok = RegionSpec(boundary=TubeSpec(R0=2.0, speed=2.0), T=0.5)
    regions.build_region(ok, CAT["constant"], EOS)
    slow = RegionSpec(boundary=TubeSpec(R0=2.0, speed=0.5), T=0.5)
    with pytest.raises(RegionAssumptionError):
        regions.build_region(slow, CAT["constant"], EOS)


def test_cone_collapse_is_reported():
    spec = RegionSpec(boundary=ConeSpec(R0=2.0, degree=6), T=1.95)
    with pytest.raises(RayEscapeError):
        regions.build_region(spec, CAT["constant"], EOS)


def test_generator_diagnostics(cone_composite):
    d = cone_composite.diagnostics
    assert d["null_residual"] <= 1e-9
    # distance to an independent tighter reintegration, integrator-tolerance scale
    assert d["geodesic_residual"] <= 1e-9
    assert d["fit_residual"] <= 5e-9
    fr, _ = boundary_sample(cone_composite, 100, seed=11)
    assert sup(fr.Hbar[0] - 1.0) == 0.0  # L-bar t = 1 by normalization
    assert sup(fr.gdot(fr.Hbar, fr.Hbar)) <= 1e-12


def test_boundary_points_lie_on_both_surfaces(tube_general, cone_composite):
    for region, tol in ((tube_general, 1e-12), (cone_composite, 1e-10)):
        rng = np.random.default_rng(7)
        tau = rng.uniform(0.02, region.T - 0.02, 200)
        th = np.arccos(rng.uniform(-0.95, 0.95, 200))
        ph = rng.uniform(0.0, 2.0 * math.pi, 200)
        t, x = region.boundary_point(tau, th, ph)
        T, X1, X2, X3 = coordinate_jets(t, x, 2)
        assert sup(region.psi_jet(T, X1, X2, X3)) <= tol
        assert sup(region.tau_jet(T, X1, X2, X3).value - tau) <= 1e-12


def test_sphere_tangents_annihilate_defining_functions(tube_general, cone_composite):
    for region in (tube_general, cone_composite):
        rng = np.random.default_rng(3)
        tau = rng.uniform(0.05, region.T - 0.05, 64)
        th = np.arccos(rng.uniform(-0.9, 0.9, 64))
        ph = rng.uniform(0.0, 2.0 * math.pi, 64)
        sph = region.sphere_tangents(tau, th, ph)
        T, X1, X2, X3 = coordinate_jets(sph["t"], sph["x"], 2)
        dpsi = [region.psi_jet(T, X1, X2, X3).partial(a).value for a in range(4)]
        dtau = [region.tau_jet(T, X1, X2, X3).partial(a).value for a in range(4)]
        for e in (sph["e_theta"], sph["e_phi"]):
            contr_psi = sum(dpsi[a] * e[..., a] for a in range(4))
            contr_tau = sum(dtau[a] * e[..., a] for a in range(4))
            assert sup(contr_psi) <= 1e-9
            assert sup(contr_tau) <= 1e-12

        # finite-difference cross-check of the theta tangent
        h = 1e-4
        tp, xp = region.boundary_point(tau, th + h, ph)
        tm, xm = region.boundary_point(tau, th - h, ph)
        fd = np.concatenate([((tp - tm) / (2 * h))[..., None],
                             (xp - xm) / (2 * h)], axis=-1)
        assert sup(fd - sph["e_theta"]) <= 1e-6


def test_region_spec_round_trip():
    timefn = TimeFunction(eps=0.02, center=(0.1, 0.2, -0.3), width=2.5)
    spec = RegionSpec(boundary=ConeSpec(R0=1.5, degree=8), timefn=timefn, T=0.3)
    again = RegionSpec.from_dict(spec.to_dict())
    assert again == spec
    spec2 = RegionSpec(boundary=TubeSpec(R0=2.0, speed=3.0), T=0.5)
    assert RegionSpec.from_dict(spec2.to_dict()) == spec2


def test_time_function_gate():
    timefn = TimeFunction(eps=2.0, center=(0.0, 0.0, 0.0), width=2.0)
    spec = RegionSpec(boundary=TubeSpec(R0=2.0, speed=3.0), timefn=timefn, T=0.3)
    with pytest.raises(RegionAssumptionError):
        regions.build_region(spec, CAT["constant"], EOS)


# -- frame fields ----------------------------------------------------------


def test_tau_t_specializations(tube_composite, cone_composite):
    for region in (tube_composite, cone_composite):
        fr, _ = boundary_sample(region, 200, seed=2)
        B_low = tensors.mat_vec(fr.state.g, fr.B)
        assert sup(fr.nu - 1.0) <= 1e-12
        assert sup(fr.q - 1.0) <= 1e-12
        assert sup(fr.kappa_bar - 1.0) <= 1e-12
        assert sup(fr.h_bar - 1.0) <= 1e-12
        assert max(sup(k) for k in fr.K) <= 1e-12
        for a in range(4):
            assert sup(fr.Hbreve[a] - fr.Hbar[a]) <= 1e-12
            for b in range(4):
                sigma_t_form = fr.state.g[a][b] + B_low[a] * B_low[b]
                assert sup(fr.gtilde[a][b] - sigma_t_form) <= 1e-12


def test_null_tau_t_identities(cone_composite):
    fr, _ = boundary_sample(cone_composite, 500, seed=4)
    assert sup(fr.z_bar - 1.0) <= 1e-12
    assert max(sup(c) for c in fr.Theta) <= 1e-12
    assert max(sup(fr.B[a] - fr.Hbar[a] - fr.Z[a]) for a in range(4)) <= 1e-12
    L = [fr.Hbar[a] + 2.0 * fr.Z[a] for a in range(4)]
    assert sup(fr.gdot(L, L)) <= 1e-12
    assert sup(fr.gdot(L, fr.B) + 1.0) <= 1e-12
    assert sup(fr.gdot(fr.Hbar, fr.Hbar)) <= 1e-12
    assert sup(fr.nu_bar) == 0.0 and sup(fr.eta_bar) == 0.0
    with pytest.raises(FrameDegeneracyError):
        fr.Nbar_hat


def test_convenient_identities_general_tau(tube_general):
    fr, _ = boundary_sample(tube_general, 500, seed=5, order=3)
    h, e2, n2 = fr.h_bar, fr.eta_bar * fr.eta_bar, fr.nu * fr.nu
    c1, c2 = h / (h + e2), e2 / (h + e2)
    assert max(sup(fr.Nbar[a] - c1 * fr.Hbar[a] - c2 * fr.N[a])
               for a in range(4)) <= 1e-10
    assert sup(fr.gdot(fr.Nbar, fr.N) + (h * h + e2 * n2) / (h + e2)) <= 1e-10
    ratio = fr.nu_bar * fr.nu_bar / (fr.eta_bar * fr.eta_bar)
    assert sup(ratio - (e2 * n2 + h * h) / ((h + e2) * (h + e2))) <= 1e-10
    assert sup(fr.kappa_bar - 1.0 / (fr.h_bar * fr.Btau)) <= 1e-10
    assert sup(quad(fr.gtilde, fr.K, fr.K) - (1.0 - n2)) <= 1e-10
    assert max(sup(fr.B[a] - fr.Hbar[a] / fr.h_bar - fr.Z[a] / fr.z_bar
                   - fr.Theta[a]) for a in range(4)) <= 1e-10
    assert sup(fr.P[0]) <= 1e-12

    # gradient decomposition d_a f = -Nbar_a Bf + P_a Hbar f + ybreve_a^b d_b f
    f = fr.state.rho
    df = [f.partial(a) for a in range(4)]
    Bf, Hf = dot(fr.B, df), dot(fr.Hbar, df)
    for a in range(4):
        y = None
        for b in range(4):
            term = fr.ybreve[a][b] * df[b]
            y = term if y is None else y + term
        assert sup(df[a] + fr.Nbar_low[a] * Bf - fr.P_low[a] * Hf - y) <= 1e-10


def test_frame_invariants_across_catalog():
    cases = [
        ("composite", TubeSpec(R0=2.0, speed=2.0), 0.4),
        ("composite", ConeSpec(R0=2.0, degree=16), 0.3),
        ("vortex", TubeSpec(R0=2.0, speed=4.0), 0.25),
        ("vortex", ConeSpec(R0=2.0, degree=16), 0.25),
    ]
    for name, boundary, T in cases:
        region = regions.build_region(
            RegionSpec(boundary=boundary, T=T), CAT[name], EOS)
        fr, _ = boundary_sample(region, 500, seed=6)
        null = region.kind == "cone"
        assert sup(fr.gdot(fr.Nhat, fr.Nhat) + 1.0) <= 1e-12
        assert sup(fr.gdot(fr.Z, fr.Z) - 1.0) <= 1e-12
        assert sup(fr.gdot(fr.Nhat, fr.Z)) <= 1e-12
        assert sup(fr.gdot(fr.N, fr.B) + 1.0) <= 1e-12
        assert sup(fr.N[0] - 1.0) <= 1e-12
        assert sup(dot(fr.Q, fr.dtau) - 1.0) <= 1e-12
        assert sup(dot(fr.Z, fr.dtau)) <= 1e-12
        # on cones this tracks the null defect of the degree-16 graph fit
        assert sup(dot(fr.Hbar, fr.dpsi)) <= (1e-6 if null else 1e-12)
        assert sup(fr.gdot(fr.Theta, fr.Z)) <= 1e-12
        assert sup(fr.gdot(fr.Theta, fr.N)) <= 1e-12
        assert sup(fr.gdot(fr.E_under, fr.Nbar)) <= 1e-12
        assert sup(fr.gdot(fr.U, fr.Nhat)) <= 1e-12
        assert sup(fr.gdot(fr.U, fr.Z)) <= 1e-12
        assert sup(fr.gdot(fr.Yent, fr.Nhat)) <= 1e-12
        assert sup(fr.gdot(fr.Yent, fr.Z)) <= 1e-12
        # projector algebra
        for a in range(4):
            for b in range(4):
                gg = None
                pp = None
                for k in range(4):
                    t1 = fr.g_slash_inv[a][k] * fr.g_slash[k][b]
                    t2 = fr.Pi_slash[a][k] * fr.Pi_slash[k][b]
                    gg = t1 if gg is None else gg + t1
                    pp = t2 if pp is None else pp + t2
                assert sup(gg - fr.Pi_slash[a][b]) <= 1e-11
                assert sup(pp - fr.Pi_slash[a][b]) <= 1e-11
        if not null:
            assert sup(fr.gdot(fr.Nbar_hat, fr.Nbar_hat) + 1.0) <= 1e-11


def test_degeneration_family_toward_the_cone():
    # spacelike tubes steepening toward the characteristic slope: nu-bar
    # drops toward 0 while ell-bar/eta-bar stays 1 and nu-bar/eta-bar -> 1
    speeds = [2.0, 1.5, 1.2, 1.1, 1.05]
    nu_bars, ratios = [], []
    for a in speeds:
        spec = RegionSpec(boundary=TubeSpec(R0=2.0, speed=a), T=0.05)
        region = regions.build_region(spec, CAT["constant"], EOS)
        fr, _ = boundary_sample(region, 20, seed=8, margin=0.01)
        assert sup(fr.nu_bar - math.sqrt(a * a - 1.0) / a) <= 1e-12
        assert sup(fr.ell_bar / fr.eta_bar - 1.0) <= 1e-10
        nu_bars.append(float(np.mean(fr.nu_bar.value)))
        ratios.append(float(np.mean((fr.nu_bar / fr.eta_bar).value)))
        assert abs(ratios[-1] - 1.0 / a) <= 1e-12
    assert all(b < a for a, b in zip(nu_bars, nu_bars[1:]))
    assert all(b > a for a, b in zip(ratios, ratios[1:]))


def test_interior_leaf_frame_and_misuse_gate(tube_general):
    region = tube_general
    rng = np.random.default_rng(9)
    tau = rng.uniform(0.05, 0.35, 50)
    th = np.arccos(rng.uniform(-0.9, 0.9, 50))
    ph = rng.uniform(0.0, 2.0 * math.pi, 50)
    leaf = region.leaf_tangents(tau, 0.6, th, ph)
    fr = frames.leaf_frame(region, leaf["t"], leaf["x"])
    assert sup(fr.gdot(fr.Nhat, fr.Nhat) + 1.0) <= 1e-12
    assert np.all(fr.Btau.value > 0.0)
    with pytest.raises(ValueError, match="boundary"):
        frames.frame_at(region, leaf["t"], leaf["x"])


# -- divergence formulas ---------------------------------------------------


def test_killing_rotation_has_zero_sphere_divergence():
    spec = RegionSpec(boundary=TubeSpec(R0=2.0, speed=2.0), T=0.4)
    region = regions.build_region(spec, CAT["constant"], EOS)
    fr, _ = boundary_sample(region, 100, seed=10, order=3)
    zero = Jet.constant(np.zeros(fr.state.shape), fr.state.rho.order)
    x_jets = [Jet.variable(xc, d, fr.state.rho.order)
              for d, xc in zip((1, 2, 3), np.moveaxis(fr.x, -1, 0))]
    Y = [zero, -x_jets[1], x_jets[0], zero]  # rigid rotation about x3
    assert sup(frames.div_slash(fr, Y)) <= 1e-10


def _smooth_test_field(T, X1, X2, X3):
    w0 = 0.3 * jets.sin(X2 + 0.2 * T)
    w1 = 0.5 * jets.cos(X3) + 0.1 * X1
    w2 = 0.4 * jets.sin(X1 + X3)
    w3 = 0.2 * jets.cos(X2) * jets.sin(0.5 * X1)
    return [w0, w1, w2, w3]


def test_divergence_formulas_match_chart_oracles(tube_general):
    region = tube_general
    rng = np.random.default_rng(12)
    n = 60
    tau = rng.uniform(0.08, 0.32, n)
    th = np.arccos(rng.uniform(-0.8, 0.8, n))
    ph = rng.uniform(0.3, 2.0 * math.pi - 0.3, n)

    # leaf-tangent field: oracle on the 3D leaf chart at xi = 0.7
    leaf = region.leaf_tangents(tau, 0.7, th, ph)
    fr = frames.leaf_frame(region, leaf["t"], leaf["x"], order=3)
    W = _smooth_test_field(*coordinate_jets(leaf["t"], leaf["x"], 3))
    J = fr.project_tilde(W)
    res = frames.div_tilde(fr, J)

    def field_tilde(t, x):
        f = frames.leaf_frame(region, t, x, order=1)
        proj = f.project_tilde(_smooth_test_field(*coordinate_jets(t, x, 1)))
        return np.stack([c.value for c in proj], axis=-1)

    oracle = frames.fd_div_tilde(region, tau, 0.7, th, ph, field_tilde)
    assert sup(res.value - oracle) <= 1e-8

    # sphere-tangent field: oracle on the 2D sphere chart
    frb, (taub, thb, phb, tb, xb) = boundary_sample(region, n, seed=13, order=3)
    Wb = _smooth_test_field(*coordinate_jets(tb, xb, 3))
    Yb = frb.project_slash(Wb)
    res_slash = frames.div_slash(frb, Yb)

    def field_slash(t, x):
        f = frames.frame_at(region, t, x, order=1)
        proj = f.project_slash(_smooth_test_field(*coordinate_jets(t, x, 1)))
        return np.stack([c.value for c in proj], axis=-1)

    oracle_slash = frames.fd_div_slash(region, taub, thb, phb, field_slash)
    assert sup(res_slash.value - oracle_slash) <= 1e-8

    both = frames.divergence_formulas(frb, Yb)
    assert sup(both["div_slash"] - res_slash) == 0.0

    # div-slash of the projected gradients against the generic formula
    parts = frames.div_slash_partials(frb)
    for k in range(4):
        Vk = [frb.Pi_slash[a][k] for a in range(4)]
        assert sup(parts[k] - frames.div_slash(frb, Vk)) <= 1e-11

    def field_partials(t, x, k=2):
        f = frames.frame_at(region, t, x, order=1)
        return np.stack([f.Pi_slash[a][k].value for a in range(4)], axis=-1)

    oracle_k = frames.fd_div_slash(region, taub, thb, phb, field_partials)
    assert sup(parts[2].value - oracle_k) <= 1e-8


def test_tangency_gates_raise(tube_general):
    fr, _ = boundary_sample(tube_general, 20, seed=14)
    zero = Jet.constant(np.zeros(fr.state.shape), 1)
    one = Jet.constant(np.ones(fr.state.shape), 1)
    with pytest.raises(TangencyError):
        frames.div_tilde(fr, [one, zero, zero, zero])
    with pytest.raises(TangencyError):
        frames.div_slash(fr, fr.Z)
