"""Geometric integration over regions: bulk, leaves, lateral boundary, spheres.

Every measure is the square root of the determinant of the ambient metric
pulled back onto chart tangents, so one code path serves the bulk volume
form, the leaf and lateral induced forms, and the sphere area form.  The
closed-form expressions (c^{-3} dx dt on the bulk, and the q and ell-bar
factorizations between the routes) are exercised by the two-route checks.

Nodes are evaluated in fixed-size chunks: jet arrays are dense, so a full
32^4 lattice held at once would not fit in memory.  Chunking never changes
results; the reduction is a pairwise sum over the full node lattice in a
fixed order.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import frames
from .jets import coordinate_jets
from .pointwise import IdentityReport, build_report
from .tensors import dot

_CHUNK = 4096


@dataclass(frozen=True)
class QuadratureGrid:
    n_tau: int = 16
    n_xi: int = 16
    n_theta: int = 16
    n_phi: int = 16

    def refined(self, factor: int) -> "QuadratureGrid":
        return QuadratureGrid(self.n_tau * factor, self.n_xi * factor,
                              self.n_theta * factor, self.n_phi * factor)

    def to_dict(self) -> dict:
        return {"n_tau": self.n_tau, "n_xi": self.n_xi,
                "n_theta": self.n_theta, "n_phi": self.n_phi}

    @staticmethod
    def from_dict(data: dict) -> "QuadratureGrid":
        return QuadratureGrid(**data)


def pairwise_sum(values) -> float:
    """Reduction with a fixed association order, reproducible run to run."""
    flat = np.ravel(np.asarray(values, dtype=float))
    while flat.size > 1:
        if flat.size % 2:
            flat = np.concatenate([flat, [0.0]])
        flat = flat[0::2] + flat[1::2]
    return float(flat[0]) if flat.size else 0.0


def _chunks(n: int, size: int = _CHUNK):
    for i in range(0, n, size):
        yield slice(i, min(i + size, n))


def _gauss(n: int, lo: float, hi: float):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (lo + hi) + 0.5 * (hi - lo) * x, 0.5 * (hi - lo) * w


def _angles(grid: QuadratureGrid):
    # Gauss-Legendre in cos(theta) (nodes interior, poles excluded),
    # uniform trapezoid in phi (spectral for smooth periodic integrands)
    mu, wmu = _gauss(grid.n_theta, -1.0, 1.0)
    phi = 2.0 * math.pi * np.arange(grid.n_phi) / grid.n_phi
    wphi = np.full(grid.n_phi, 2.0 * math.pi / grid.n_phi)
    return np.arccos(mu), wmu, phi, wphi


def _lattice(*axes):
    mesh = np.meshgrid(*axes, indexing="ij")
    return [m.ravel() for m in mesh]


def _gram_form(region, t, x, tangents) -> np.ndarray:
    """sqrt |det| of the ambient metric pulled back onto chart tangents."""
    state = region.sample_state(t, x, order=1)
    G4 = np.empty(np.asarray(t).shape + (4, 4))
    for a in range(4):
        for b in range(4):
            G4[..., a, b] = np.broadcast_to(state.g[a][b].value, G4.shape[:-2])
    E = np.stack(tangents, axis=-2)
    gram = np.einsum("...ia,...ab,...jb->...ij", E, G4, E)
    return np.sqrt(np.abs(np.linalg.det(gram)))


def _sphere_chunk(region, tau, th, ph):
    sph = region.sphere_tangents(tau, th, ph)
    e_mu = -sph["e_theta"] / np.sin(th)[..., None]
    form = _gram_form(region, sph["t"], sph["x"], [e_mu, sph["e_phi"]])
    return sph["t"], sph["x"], form


def _leaf_chunk(region, tau, xi, th, ph, with_tau: bool):
    leaf = region.leaf_tangents(tau, xi, th, ph)
    e_mu = -leaf["e_theta"] / np.sin(th)[..., None]
    tangents = [leaf["e_xi"], e_mu, leaf["e_phi"]]
    if with_tau:
        tangents = [leaf["e_tau"]] + tangents
    form = _gram_form(region, leaf["t"], leaf["x"], tangents)
    return leaf["t"], leaf["x"], form


def _quad_sum(weights, n, chunk_eval, integrand) -> float:
    vals = np.empty(n)
    for s in _chunks(n):
        t, x, form = chunk_eval(s)
        vals[s] = form * integrand(t, x)
    return pairwise_sum(weights * vals)


def integrate(region, domain, integrand, grid: QuadratureGrid | None = None,
              tau: float | None = None) -> float:
    """Integral of integrand(t, x) over a region domain.

    domain is "bulk", "leaf", "lateral", or "sphere" (or a (name, tau)
    pair); tau defaults to the full region height.  The measure is the
    canonical one of the domain: the spacetime volume form on the bulk,
    the induced leaf volume form, the sphere area form d tau' on the
    lateral boundary (the null-compatible form), and the sphere area form.
    """
    if isinstance(domain, tuple):
        domain, tau = domain
    grid = QuadratureGrid() if grid is None else grid
    tau1 = region.T if tau is None else float(tau)
    th, wmu, ph, wph = _angles(grid)
    if domain == "sphere":
        TH, PH = _lattice(th, ph)
        W = np.outer(wmu, wph).ravel()
        return _quad_sum(W, TH.size,
                         lambda s: _sphere_chunk(region, tau1, TH[s], PH[s]),
                         integrand)
    if domain == "lateral":
        tn, wt = _gauss(grid.n_tau, 0.0, tau1)
        TT, TH, PH = _lattice(tn, th, ph)
        W = (wt[:, None, None] * wmu[None, :, None] * wph).ravel()
        return _quad_sum(W, TT.size,
                         lambda s: _sphere_chunk(region, TT[s], TH[s], PH[s]),
                         integrand)
    xi, wxi = _gauss(grid.n_xi, 0.0, 1.0)
    if domain == "leaf":
        XI, TH, PH = _lattice(xi, th, ph)
        W = (wxi[:, None, None] * wmu[None, :, None] * wph).ravel()
        return _quad_sum(
            W, XI.size,
            lambda s: _leaf_chunk(region, tau1, XI[s], TH[s], PH[s], False),
            integrand)
    if domain == "bulk":
        tn, wt = _gauss(grid.n_tau, 0.0, tau1)
        TT, XI, TH, PH = _lattice(tn, xi, th, ph)
        W = (wt[:, None, None, None] * wxi[None, :, None, None]
             * wmu[None, None, :, None] * wph).ravel()
        return _quad_sum(
            W, TT.size,
            lambda s: _leaf_chunk(region, TT[s], XI[s], TH[s], PH[s], True),
            integrand)
    raise ValueError(f"unknown integration domain {domain!r}")


def bulk_two_routes(region, integrand, grid: QuadratureGrid | None = None,
                    tau: float | None = None) -> dict:
    """Bulk volume-form factorization: direct pullback vs q-weighted leaves."""
    grid = QuadratureGrid() if grid is None else grid
    tau1 = region.T if tau is None else float(tau)
    direct = integrate(region, "bulk", integrand, grid, tau1)

    def q_weighted(t, x):
        fr = frames.leaf_frame(region, t, x, order=1)
        return fr.q.value * integrand(t, x)

    tn, wt = _gauss(grid.n_tau, 0.0, tau1)
    leaves = np.array([integrate(region, "leaf", q_weighted, grid, s)
                       for s in tn])
    routed = pairwise_sum(wt * leaves)
    return {"bulk": direct, "leaf_route": routed,
            "defect": abs(direct - routed)}


def lateral_two_routes(region, integrand, grid: QuadratureGrid | None = None,
                       tau: float | None = None) -> dict:
    """Spacelike lateral factorization: induced volume over ell-bar vs spheres."""
    if region.kind == "cone":
        raise ValueError("the induced-volume route needs a spacelike boundary")
    grid = QuadratureGrid() if grid is None else grid
    tau1 = region.T if tau is None else float(tau)
    sphere_route = integrate(region, "lateral", integrand, grid, tau1)
    tn, wt = _gauss(grid.n_tau, 0.0, tau1)
    th, wmu, ph, wph = _angles(grid)
    TT, TH, PH = _lattice(tn, th, ph)
    W = (wt[:, None, None] * wmu[None, :, None] * wph).ravel()

    def chunk_eval(s):
        sph = region.sphere_tangents(TT[s], TH[s], PH[s])
        e_mu = -sph["e_theta"] / np.sin(TH[s])[..., None]
        form = _gram_form(region, sph["t"], sph["x"],
                          [sph["e_tau"], e_mu, sph["e_phi"]])
        ell = frames.frame_at(region, sph["t"], sph["x"], order=1).ell_bar
        return sph["t"], sph["x"], form / ell.value

    induced = _quad_sum(W, TT.size, chunk_eval, integrand)
    return {"sphere_route": sphere_route, "induced_route": induced,
            "defect": abs(sphere_route - induced)}


def leaf_transport_check(region, f, tau_interval=None,
                         grid: QuadratureGrid | None = None,
                         tolerance: float = 1e-7) -> IdentityReport:
    """Transport identity for sphere integrals dragged along H-breve.

    The lateral integral of H-breve f equals the difference of the top and
    bottom sphere integrals of f minus half the lateral integral of f times
    the traced Lie drag of the sphere form.  f is a scalar built from
    coordinate jets.
    """
    grid = QuadratureGrid() if grid is None else grid
    tau0, tau1 = tau_interval if tau_interval is not None else (0.0, region.T)
    tn, wt = _gauss(grid.n_tau, tau0, tau1)
    th, wmu, ph, wph = _angles(grid)
    TH, PH = _lattice(th, ph)
    W = np.outer(wmu, wph).ravel()
    hf_slices = np.empty(tn.size)
    tr_slices = np.empty(tn.size)
    for i, s in enumerate(tn):
        t, x, form = _sphere_chunk(region, np.full(TH.shape, s), TH, PH)
        fr = frames.frame_at(region, t, x, order=2)
        fj = f(*coordinate_jets(t, x, 2))
        df = [fj.partial(a) for a in range(4)]
        hf_slices[i] = pairwise_sum(W * form * dot(fr.Hbreve, df).value)
        tr_slices[i] = pairwise_sum(
            W * form * (fj * frames.lie_breve_trace(fr)).value)
    lateral_Hf = pairwise_sum(wt * hf_slices)
    lateral_tr = pairwise_sum(wt * tr_slices)

    def values(t, x):
        return f(*coordinate_jets(t, x, 1)).value

    top = integrate(region, "sphere", values, grid, tau1)
    bottom = integrate(region, "sphere", values, grid, tau0)
    defect = lateral_Hf - (-0.5 * lateral_tr + top - bottom)
    scale = max(abs(lateral_Hf), 0.5 * abs(lateral_tr), abs(top), abs(bottom))
    return build_report("sphere-integral transport along H-breve",
                        defect, scale, tolerance)
