"""Foliation and boundary frames built from ambient jets.

Every frame field is assembled algebraically from the fluid-state jets
and the jets of the time function tau and boundary function Psi, so all
first derivatives of frame components are exact to the order carried by
the input jets.  On null boundaries the tangent L-bar is constructed as
the normalized difference of the unit leaf normal and the unit outward
sphere normal, which is null identically rather than to surface accuracy.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from . import jets
from .jets import Jet
from .regions import Region, RegionAssumptionError
from .tensors import dot, mat_vec, quad, scale_vec, sub_vec


class FrameDegeneracyError(ValueError):
    """A spacelike-only quantity was requested on a degenerate frame."""


class TangencyError(ValueError):
    """A divergence formula was applied to a field missing its tangency."""

    def __init__(self, message: str, contraction: float):
        super().__init__(f"{message} (contraction {contraction:.3e})")
        self.contraction = contraction


def _argworst_point(values: np.ndarray, t, x):
    k = int(np.argmin(values))
    idx = np.unravel_index(k, np.shape(values)) if np.ndim(values) else ()
    ti = float(np.broadcast_to(t, np.shape(values))[idx]) if np.ndim(values) else float(t)
    xi = np.broadcast_to(x, np.shape(values) + (3,))[idx]
    return (ti, np.asarray(xi).tolist()), float(values.flat[k] if np.ndim(values) else values)


def _require_positive(values: np.ndarray, name: str, t, x) -> None:
    if np.all(values > 0.0):
        return
    point, val = _argworst_point(values, t, x)
    raise RegionAssumptionError(f"{name} must be positive", worst_point=point, value=val)


class LeafFrame:
    """Geometry of the leaves: normals, lapse-type scalars, leaf metric."""

    def __init__(self, state, tau: Jet, t=None, x=None):
        self.state = state
        self.tau = tau
        self.t = t
        self.x = x
        g, ginv = state.g, state.ginv
        self.dtau = [tau.partial(a) for a in range(4)]
        self.Btau = dot(state.B, self.dtau)
        if np.any(self.Btau.value <= 0.0):
            point, val = _argworst_point(self.Btau.value, t, x)
            raise RegionAssumptionError("B tau must be positive",
                                        worst_point=point, value=val)
        grad_sq = quad(ginv, self.dtau, self.dtau)
        if np.any(grad_sq.value >= 0.0):
            point, val = _argworst_point(-grad_sq.value, t, x)
            raise RegionAssumptionError("d tau must be timelike",
                                        worst_point=point, value=-val)
        inv_Btau = jets.reciprocal(self.Btau)
        self.N = scale_vec(-inv_Btau, mat_vec(ginv, self.dtau))
        self.nu = jets.sqrt(-quad(g, self.N, self.N))
        inv_nu = jets.reciprocal(self.nu)
        self.Nhat = scale_vec(inv_nu, self.N)
        Ntau = dot(self.N, self.dtau)
        self.Q = scale_vec(jets.reciprocal(Ntau), self.N)
        self.q = jets.sqrt(-quad(g, self.Q, self.Q))
        self.K = sub_vec(scale_vec(self.nu, state.B), self.Nhat)
        self.Nhat_low = mat_vec(g, self.Nhat)
        self.gtilde = [[g[a][b] + self.Nhat_low[a] * self.Nhat_low[b]
                        for b in range(4)] for a in range(4)]
        # contravariant leaf metric in the orthogonal-projector convention
        self.gtilde_inv = [[ginv[a][b] + self.Nhat[a] * self.Nhat[b]
                            for b in range(4)] for a in range(4)]
        self.Pi_tilde = [[(1.0 if a == b else 0.0) + self.Nhat[a] * self.Nhat_low[b]
                          for b in range(4)] for a in range(4)]

    @property
    def B(self):
        return self.state.B

    def gdot(self, X, Y) -> Jet:
        return quad(self.state.g, X, Y)

    def lower(self, X):
        return mat_vec(self.state.g, X)

    def project_tilde(self, X):
        """Orthogonal projection onto the leaf tangent space."""
        gXN = self.gdot(X, self.Nhat)
        return [X[a] + gXN * self.Nhat[a] for a in range(4)]

    def d_tilde(self, f: Jet):
        """Covector of leaf-tangential derivatives of a scalar jet."""
        df = [f.partial(b) for b in range(4)]
        return [sum_over(self.Pi_tilde, df, a) for a in range(4)]

    @cached_property
    def dg(self):
        """Metric coefficient derivatives dg[m][a][b] = d_m g_ab."""
        g = self.state.g
        return [[[g[a][b].partial(m) for b in range(4)] for a in range(4)]
                for m in range(4)]


def sum_over(P, w, a):
    """Contraction sum_b P[b][a] w[b] of a mixed projector with a covector."""
    out = P[0][a] * w[0]
    for b in range(1, 4):
        out = out + P[b][a] * w[b]
    return out


class AcousticFrame(LeafFrame):
    """Boundary-adapted frame on the lateral hypersurface and its spheres."""

    def __init__(self, state, tau: Jet, psi: Jet, outward: np.ndarray,
                 null: bool, t=None, x=None):
        super().__init__(state, tau, t=t, x=x)
        self.psi = psi
        self.is_null = bool(null)
        g, ginv = state.g, state.ginv
        order = min(j.order for j in self.N)

        self.dpsi = [psi.partial(a) for a in range(4)]
        W = mat_vec(ginv, self.dpsi)
        Zt = self.project_tilde(W)
        Zt_sq = self.gdot(Zt, Zt)
        if np.any(Zt_sq.value <= 0.0):
            point, val = _argworst_point(Zt_sq.value, t, x)
            raise RegionAssumptionError("boundary gradient degenerate on the leaf",
                                        worst_point=point, value=val)
        self.Z = scale_vec(jets.reciprocal(jets.sqrt(Zt_sq)), Zt)
        radial = sum(self.Z[1 + a].value * outward[..., a] for a in range(3))
        if np.any(radial <= 0.0):
            point, val = _argworst_point(radial, t, x)
            raise RegionAssumptionError("Z is not outward-oriented",
                                        worst_point=point, value=val)

        if null:
            denom = self.Nhat[0] - self.Z[0]
            if np.any(denom.value <= 1e-8):
                raise FrameDegeneracyError(
                    "null tangent normalization (Nhat - Z)^0 is not positive")
            self.Hbar = scale_vec(jets.reciprocal(denom), sub_vec(self.Nhat, self.Z))
            self.Nbar = self.Hbar
            zero = Jet.constant(np.zeros(state.shape), order)
            self.nu_bar = zero
            self.eta_bar = zero
        else:
            W0 = W[0]
            if np.any(W0.value >= 0.0):
                point, val = _argworst_point(-W0.value, t, x)
                raise RegionAssumptionError("B Psi must be positive on the boundary",
                                            worst_point=point, value=-val)
            self.Nbar = scale_vec(jets.reciprocal(W0), W)
            nbar_sq = -quad(g, self.Nbar, self.Nbar)
            if np.any(nbar_sq.value <= 0.0):
                point, val = _argworst_point(nbar_sq.value, t, x)
                raise RegionAssumptionError(
                    "lateral boundary is not spacelike (normal fails to be timelike)",
                    worst_point=point, value=val)
            self.nu_bar = jets.sqrt(nbar_sq)
            Zpsi = dot(self.Z, self.dpsi)
            Npsi = dot(self.Nhat, self.dpsi)
            Hraw = sub_vec(scale_vec(Zpsi, self.Nhat), scale_vec(Npsi, self.Z))
            self.Hbar = scale_vec(jets.reciprocal(Hraw[0]), Hraw)
            self.eta_bar = jets.sqrt(self.gdot(self.Hbar, self.Hbar))

        self.z_bar = -self.gdot(self.Z, self.Nbar)
        _require_positive(self.z_bar.value, "z-bar", t, x)
        self.h_bar = -self.gdot(self.Hbar, self.N)
        _require_positive(self.h_bar.value, "h-bar", t, x)
        self.kappa_bar = jets.reciprocal(dot(self.Hbar, self.dtau))
        self.Hbreve = scale_vec(self.kappa_bar, self.Hbar)
        self.ell_bar = self.kappa_bar * self.eta_bar

        inv_h = jets.reciprocal(self.h_bar)
        inv_z = jets.reciprocal(self.z_bar)
        self.Theta = [state.B[a] - inv_h * self.Hbar[a] - inv_z * self.Z[a]
                      for a in range(4)]
        self.E_under = [state.B[a] - inv_z * self.Z[a] for a in range(4)]
        self.P = scale_vec(inv_h, sub_vec(self.Nbar, self.N))

        self.Z_low = mat_vec(g, self.Z)
        self.Nbar_low = mat_vec(g, self.Nbar)
        self.Hbar_low = mat_vec(g, self.Hbar)
        self.g_slash = [[self.gtilde[a][b] - self.Z_low[a] * self.Z_low[b]
                         for b in range(4)] for a in range(4)]
        self.g_slash_inv = [[self.gtilde_inv[a][b] - self.Z[a] * self.Z[b]
                             for b in range(4)] for a in range(4)]
        self.Pi_slash = [[self.Pi_tilde[a][b] - self.Z[a] * self.Z_low[b]
                          for b in range(4)] for a in range(4)]

        # the mixed tensor of the gradient decomposition along the boundary
        self.P_low = mat_vec(g, self.P)
        self.ybreve = [[(1.0 if a == b else 0.0) + self.Nbar_low[a] * state.B[b]
                        - self.P_low[a] * self.Hbar[b]
                        for b in range(4)] for a in range(4)]

        S4 = [Jet.constant(np.zeros(state.shape), order)] + list(state.S)
        SNbar = self.gdot(S4, self.Nbar)
        SN = self.gdot(S4, self.N)
        coeff = (SNbar - SN) * inv_h
        self.U = [S4[a] + SNbar * state.B[a] - coeff * self.Hbar[a] for a in range(4)]
        self.Yent = [coeff * self.Theta[a] - inv_h * self.U[a] for a in range(4)]

        Om4 = [Jet.constant(np.zeros(state.shape), order)] + list(state.Omega)
        self.Omega_slash = self.project_slash(Om4)
        self.S_slash = self.project_slash(S4)
        self._S4 = S4
        self._Om4 = Om4

    def project_slash(self, X):
        """Projection onto the tangent space of the boundary sphere."""
        gXN = self.gdot(X, self.Nhat)
        gXZ = self.gdot(X, self.Z)
        return [X[a] + gXN * self.Nhat[a] - gXZ * self.Z[a] for a in range(4)]

    def d_slash(self, f: Jet):
        df = [f.partial(b) for b in range(4)]
        return [sum_over(self.Pi_slash, df, a) for a in range(4)]

    @property
    def Nbar_hat(self):
        if self.is_null:
            raise FrameDegeneracyError("Nbar-hat is undefined on a null boundary")
        return scale_vec(jets.reciprocal(self.nu_bar), self.Nbar)

    @property
    def g_bar(self):
        nh = self.Nbar_hat
        low = mat_vec(self.state.g, nh)
        return [[self.state.g[a][b] + low[a] * low[b] for b in range(4)]
                for a in range(4)]

    @property
    def g_bar_inv(self):
        nh = self.Nbar_hat
        return [[self.state.ginv[a][b] + nh[a] * nh[b] for b in range(4)]
                for a in range(4)]

    @cached_property
    def sigma(self) -> np.ndarray:
        """Sign of the key determinant product, with a dead zone at zero."""
        from .tensors import eps4_contract

        SNbar = self.gdot(self._S4, self.Nbar)
        arg = eps4_contract(
            self.E_under, self.Omega_slash, self.Nbar,
            [self._S4[a] + SNbar * self.state.B[a] for a in range(4)])
        val = arg.value
        return np.where(np.abs(val) < 1e-12, 0.0, np.sign(val))


def leaf_frame(region: Region, t, x, sol=None, eos=None, order: int = 2) -> LeafFrame:
    """Leaf-adapted frame at interior points (no boundary quantities)."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    state = _sample(region, t, x, sol, eos, order)
    T, X1, X2, X3 = jets.coordinate_jets(t, x, order)
    tau = region.tau_jet(T, X1, X2, X3)
    return LeafFrame(state, tau, t=t, x=x)


def frame_at(region: Region, t, x, sol=None, eos=None, order: int = 2) -> AcousticFrame:
    """Boundary-adapted frame at points of the lateral hypersurface."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    state = _sample(region, t, x, sol, eos, order)
    T, X1, X2, X3 = jets.coordinate_jets(t, x, order)
    tau = region.tau_jet(T, X1, X2, X3)
    psi = region.psi_jet(T, X1, X2, X3)
    off = float(np.max(np.abs(psi.value)))
    if off > 1e-6:
        raise ValueError(
            f"frame_at expects boundary points; worst |Psi| = {off:.3e}")
    outward = x - np.asarray(region.center)
    return AcousticFrame(state, tau, psi, outward, null=(region.kind == "cone"),
                         t=t, x=x)


def _sample(region, t, x, sol, eos, order):
    from . import catalog

    if sol is None and eos is None:
        return region.sample_state(t, x, order=order)
    return catalog.sample(sol or region.sol, t, x, eos or region.eos, order=order)


# -- divergence formulas --------------------------------------------------


_TAN_TOL = 1e-10


def _tangency(frame, J, normal) -> float:
    c = frame.gdot(J, normal).value
    scale = 1.0 + max(np.max(np.abs(Ji.value)) for Ji in J)
    return float(np.max(np.abs(c))) / scale


def div_tilde(frame: LeafFrame, J) -> Jet:
    """Leaf divergence of a leaf-tangent vector with component jets."""
    worst = _tangency(frame, J, frame.Nhat)
    if worst > _TAN_TOL:
        raise TangencyError("J is not tangent to the leaf", worst)
    out = None
    for a in range(4):
        dJ = [J[a].partial(b) for b in range(4)]
        term = sum_over(frame.Pi_tilde, dJ, a)
        out = term if out is None else out + term
    dg = frame.dg
    for a in range(4):
        for b in range(4):
            Jg = dot(J, [dg[m][a][b] for m in range(4)])
            out = out + 0.5 * frame.gtilde_inv[a][b] * Jg
    return out


def div_slash(frame: AcousticFrame, Y) -> Jet:
    """Sphere divergence of a sphere-tangent vector with component jets."""
    for normal, label in ((frame.Nhat, "the leaf normal"), (frame.Z, "Z")):
        worst = _tangency(frame, Y, normal)
        if worst > _TAN_TOL:
            raise TangencyError(f"Y is not orthogonal to {label}", worst)
    out = None
    for a in range(4):
        dY = [Y[a].partial(b) for b in range(4)]
        term = sum_over(frame.Pi_slash, dY, a)
        out = term if out is None else out + term
    dg = frame.dg
    for a in range(4):
        for b in range(4):
            Yg = dot(Y, [dg[m][a][b] for m in range(4)])
            out = out + 0.5 * frame.g_slash_inv[a][b] * Yg
    return out


def div_slash_partials(frame: AcousticFrame):
    """Covector div-slash of the projected gradient fields, per component."""
    dg = frame.dg
    divN = None
    divZ = None
    for a in range(4):
        dN = [frame.Nhat[a].partial(b) for b in range(4)]
        dZ = [frame.Z[a].partial(b) for b in range(4)]
        tN = sum_over(frame.Pi_slash, dN, a)
        tZ = sum_over(frame.Pi_slash, dZ, a)
        divN = tN if divN is None else divN + tN
        divZ = tZ if divZ is None else divZ + tZ
    out = []
    for k in range(4):
        term = frame.Nhat_low[k] * divN - frame.Z_low[k] * divZ
        for a in range(4):
            for b in range(4):
                dg_k = sum_over(frame.Pi_slash, [dg[m][a][b] for m in range(4)], k)
                term = term + 0.5 * frame.g_slash_inv[a][b] * dg_k
        out.append(term)
    return out


def lie_derivative(X, m):
    """Lie derivative of a covariant 2-tensor along X, all jet-valued."""
    out = []
    for a in range(4):
        row = []
        for b in range(4):
            term = None
            for mu in range(4):
                s = (X[mu] * m[a][b].partial(mu)
                     + m[mu][b] * X[mu].partial(a)
                     + m[a][mu] * X[mu].partial(b))
                term = s if term is None else term + s
            row.append(term)
        out.append(row)
    return out


def lie_breve_trace(frame: AcousticFrame):
    """Trace against the sphere inverse of the sphere form dragged along H-breve."""
    lie = lie_derivative(frame.Hbreve, frame.g_slash)
    out = None
    for a in range(4):
        for b in range(4):
            s = frame.g_slash_inv[a][b] * lie[a][b]
            out = s if out is None else out + s
    return out


def divergence_formulas(frame: AcousticFrame, J) -> dict:
    """Divergences of a tangent field: leaf form, and sphere form if tangent.

    Returns the leaf divergence always (J must be leaf-tangent), the sphere
    divergence when J is additionally orthogonal to Z, and the covector of
    projected-gradient divergences used by the boundary integrands.
    """
    out = {"div_tilde": div_tilde(frame, J)}
    z_contr = _tangency(frame, J, frame.Z)
    out["div_slash"] = div_slash(frame, J) if z_contr <= _TAN_TOL else None
    out["div_slash_partials"] = div_slash_partials(frame)
    return out


# -- chart-based finite-difference oracles --------------------------------


_STENCIL = ((-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0))


def _metric_values(state) -> np.ndarray:
    G = np.empty(state.shape + (4, 4))
    for a in range(4):
        for b in range(4):
            G[..., a, b] = np.broadcast_to(state.g[a][b].value, state.shape)
    return G


def _chart_data(region, field, t, x, tangents):
    state = region.sample_state(t, x, order=1)
    G4 = _metric_values(state)
    E = np.stack(tangents, axis=-2)                       # (..., dim, 4)
    Gij = np.einsum("...ia,...ab,...jb->...ij", E, G4, E)
    Y = np.asarray(field(t, x), dtype=float)
    Y_low = np.einsum("...ia,...ab,...b->...i", E, G4, Y)
    Y_up = np.linalg.solve(Gij, Y_low[..., None])[..., 0]
    root = np.sqrt(np.linalg.det(Gij))
    return root[..., None] * Y_up, root


def fd_div_slash(region, tau, theta, phi, field, h: float = 1e-3) -> np.ndarray:
    """Chart-form sphere divergence (1/sqrt G) d_A (sqrt G Y^A) by central FD.

    `field(t, x)` must return ambient components of a sphere-tangent vector
    at value level with trailing axis 4.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)

    def FA(th, ph):
        sph = region.sphere_tangents(tau, th, ph)
        return _chart_data(region, field, sph["t"], sph["x"],
                           (sph["e_theta"], sph["e_phi"]))

    _, root0 = FA(theta, phi)
    out = np.zeros(root0.shape)
    for axis in range(2):
        for k, w in _STENCIL:
            th = theta + (k * h if axis == 0 else 0.0)
            ph = phi + (k * h if axis == 1 else 0.0)
            F, _ = FA(th, ph)
            out = out + w * F[..., axis] / h
    return out / root0


def fd_div_tilde(region, tau, xi, theta, phi, field, h: float = 1e-3) -> np.ndarray:
    """Chart-form leaf divergence of a leaf-tangent field by central FD."""
    xi = np.asarray(xi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)

    def FA(x1, x2, x3):
        leaf = region.leaf_tangents(tau, x1, x2, x3)
        return _chart_data(region, field, leaf["t"], leaf["x"],
                           (leaf["e_xi"], leaf["e_theta"], leaf["e_phi"]))

    _, root0 = FA(xi, theta, phi)
    out = np.zeros(root0.shape)
    coords = (xi, theta, phi)
    for axis in range(3):
        for k, w in _STENCIL:
            args = [c + (k * h if i == axis else 0.0) for i, c in enumerate(coords)]
            F, _ = FA(*args)
            out = out + w * F[..., axis] / h
    return out / root0
