"""Spacetime regions for the localized identity checks.

A region is bounded below/above by leaves of an acoustical time function
and laterally by an ingoing hypersurface: either an analytic spacelike
tube r = R(t) or a backward sound cone traced along its null generators.
The lateral boundary is carried as a graph r = R(t, omega) over spatial
directions, so every boundary quantity has exact ambient jets through the
graph's fitted derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.integrate import solve_ivp

from . import catalog, jets
from .fluid import HyperbolicityError, IdealGasEOS
from .jets import Jet


class RegionAssumptionError(ValueError):
    """A causal or sign assumption failed at a sampled region point."""

    def __init__(self, message: str, worst_point=None, value=None):
        if worst_point is not None:
            message = f"{message} at (t,x) = {worst_point} (value {value!r})"
        super().__init__(message)
        self.worst_point = worst_point
        self.value = value


class RayEscapeError(RuntimeError):
    """A cone generator left the domain where the flow stays hyperbolic."""


# -- time functions -----------------------------------------------------


def _bump(X1: Jet, X2: Jet, X3: Jet, center, width: float) -> Jet:
    """Smooth compactly supported profile, equal to 1 at the center."""
    c1, c2, c3 = center
    q = ((X1 - c1) ** 2 + (X2 - c2) ** 2 + (X3 - c3) ** 2) * (1.0 / width**2)
    inside = q.value < 0.98  # exp(1 - 1/0.02) ~ 5e-22, below roundoff
    mask = np.broadcast_to(inside[..., None], q.coef.shape)
    safe = Jet(np.where(mask, q.coef, 0.0), q.order)
    chi = jets.exp(1.0 - jets.reciprocal(1.0 - safe))
    return Jet(np.where(mask, chi.coef, 0.0), chi.order)


@dataclass(frozen=True)
class TimeFunction:
    """tau = t + eps * chi(x) with a smooth compactly supported chi."""

    eps: float = 0.0
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    width: float = 3.0

    @property
    def is_time(self) -> bool:
        return self.eps == 0.0

    def chi(self, X1: Jet, X2: Jet, X3: Jet) -> Jet:
        return _bump(X1, X2, X3, self.center, self.width)

    def jet(self, T: Jet, X1: Jet, X2: Jet, X3: Jet) -> Jet:
        if self.eps == 0.0:
            return T + 0.0
        return T + self.eps * self.chi(X1, X2, X3)

    def chi_value_grad(self, x: np.ndarray):
        """chi and its spatial gradient at value level, x shaped (..., 3)."""
        T, X1, X2, X3 = jets.coordinate_jets(np.zeros(x.shape[:-1]), x, order=1)
        c = self.chi(X1, X2, X3)
        grad = np.stack([c.derivative((0, 1, 0, 0)),
                         c.derivative((0, 0, 1, 0)),
                         c.derivative((0, 0, 0, 1))], axis=-1)
        return c.value, grad

    def t_of(self, tau, x: np.ndarray):
        """Coordinate time of the tau-leaf point lying at x."""
        if self.eps == 0.0:
            return np.broadcast_to(np.asarray(tau, dtype=float), x.shape[:-1]).copy()
        val, _ = self.chi_value_grad(x)
        return np.asarray(tau, dtype=float) - self.eps * val

    def to_dict(self) -> dict:
        return {"eps": self.eps, "center": list(self.center), "width": self.width}

    @staticmethod
    def from_dict(d: dict) -> "TimeFunction":
        d = dict(d)
        if "center" in d:
            d["center"] = tuple(d["center"])
        return TimeFunction(**d)


# -- boundary specifications --------------------------------------------


@dataclass(frozen=True)
class TubeSpec:
    """Analytic spacelike tube r = R0 - speed * t around a fixed center."""

    kind = "tube"
    R0: float = 2.0
    speed: float = 2.0
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class ConeSpec:
    """Backward sound cone traced from the sphere of radius R0 at t = 0."""

    kind = "cone"
    R0: float = 2.0
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    degree: int = 20            # spherical-harmonic degree of the radius graph
    n_time: int = 24            # Chebyshev samples of the coefficient curves
    rtol: float = 1e-11


@dataclass(frozen=True)
class RegionSpec:
    boundary: object = field(default_factory=TubeSpec)
    timefn: TimeFunction = field(default_factory=TimeFunction)
    T: float = 0.5

    def to_dict(self) -> dict:
        b = {"kind": self.boundary.kind}
        for name in self.boundary.__dataclass_fields__:
            val = getattr(self.boundary, name)
            b[name] = list(val) if isinstance(val, tuple) else val
        return {"boundary": b, "timefn": self.timefn.to_dict(), "T": self.T}

    @staticmethod
    def from_dict(d: dict) -> "RegionSpec":
        b = dict(d["boundary"])
        kind = b.pop("kind")
        if "center" in b:
            b["center"] = tuple(b["center"])
        boundary = {"tube": TubeSpec, "cone": ConeSpec}[kind](**b)
        timefn = TimeFunction.from_dict(d.get("timefn", {}))
        return RegionSpec(boundary=boundary, timefn=timefn, T=float(d.get("T", 0.5)))


# -- real spherical harmonics with pole-regular derivatives -------------


def _legendre_tables(L: int, x: np.ndarray) -> np.ndarray:
    """Associated Legendre P_l^m(x) (Condon-Shortley) for l, m <= L."""
    P = np.zeros((L + 1, L + 1) + x.shape)
    P[0, 0] = np.ones_like(x)
    sx = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    for m in range(1, L + 1):
        P[m, m] = -(2 * m - 1) * sx * P[m - 1, m - 1]
    for m in range(L):
        P[m + 1, m] = (2 * m + 1) * x * P[m, m]
        for l in range(m + 2, L + 1):
            P[l, m] = ((2 * l - 1) * x * P[l - 1, m] - (l - 1 + m) * P[l - 2, m]) / (l - m)
    return P


def _P(P: np.ndarray, l: int, m: int):
    if l < 0 or abs(m) > l:
        return 0.0
    if m >= 0:
        return P[l, m]
    mm = -m
    fac = (-1.0) ** mm * math.exp(math.lgamma(l - mm + 1) - math.lgamma(l + mm + 1))
    return fac * P[l, mm]


def _dP(P: np.ndarray, l: int, m: int):
    # dP_l^m/dtheta = (P_l^{m+1} - (l+m)(l-m+1) P_l^{m-1}) / 2, pole-regular
    return 0.5 * (_P(P, l, m + 1) - (l + m) * (l - m + 1) * _P(P, l, m - 1))


def _d2P(P: np.ndarray, l: int, m: int):
    return 0.5 * (_dP(P, l, m + 1) - (l + m) * (l - m + 1) * _dP(P, l, m - 1))


class _RealSphericalBasis:
    """Orthonormal real spherical harmonics up to a fixed degree."""

    def __init__(self, L: int):
        self.L = L
        self.index = [(l, 0, 0) for l in range(L + 1)]
        for l in range(1, L + 1):
            for m in range(1, l + 1):
                self.index.append((l, m, 0))
                self.index.append((l, m, 1))
        self.n = len(self.index)
        self._norm = {}
        for l in range(L + 1):
            for m in range(l + 1):
                k = math.sqrt((2 * l + 1) / (4.0 * math.pi)) * math.exp(
                    0.5 * (math.lgamma(l - m + 1) - math.lgamma(l + m + 1)))
                self._norm[(l, m)] = k * (math.sqrt(2.0) if m > 0 else 1.0)

    def design(self, theta: np.ndarray, phi: np.ndarray, dth: int = 0, dph: int = 0):
        """Matrix of basis-function (theta, phi)-derivatives, shape (*pts, n)."""
        theta = np.asarray(theta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        # the m+2 band is referenced by second theta-derivatives
        P = _legendre_tables(self.L + 2, np.cos(theta))
        dfn = (_P, _dP, _d2P)[dth]
        out = np.zeros(theta.shape + (self.n,))
        for col, (l, m, s) in enumerate(self.index):
            pl = dfn(P, l, m)
            mphi = m * phi
            if s == 0:
                trig = (np.cos(mphi), -m * np.sin(mphi), -m * m * np.cos(mphi))[dph]
            else:
                trig = (np.sin(mphi), m * np.cos(mphi), -m * m * np.sin(mphi))[dph]
            out[..., col] = self._norm[(l, m)] * pl * trig
        return out


# -- cone tracing --------------------------------------------------------

_DERIV_KEYS = ((0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1),
               (2, 0, 0), (1, 1, 0), (1, 0, 1), (0, 2, 0), (0, 1, 1), (0, 0, 2))


class _ConeGraph:
    """Radius graph R(t, theta, phi) of a traced backward sound cone."""

    def __init__(self, basis, coefs, t_lo, t_hi, diagnostics):
        self.basis = basis
        self.coefs = coefs              # Chebyshev coefficients, (deg+1, n_basis)
        self.t_lo = t_lo
        self.t_hi = t_hi
        self.diagnostics = diagnostics
        self._dcoefs = {0: coefs}

    def _coef(self, order_t: int) -> np.ndarray:
        if order_t not in self._dcoefs:
            self._dcoefs[order_t] = cheb.chebder(self._coef(order_t - 1), 1)
        return self._dcoefs[order_t]

    def _scaled(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t_lo - 1e-9) or np.any(t > self.t_hi + 1e-9):
            raise RegionAssumptionError(
                f"cone graph queried outside traced window [{self.t_lo}, {self.t_hi}]")
        return 2.0 * (t - self.t_lo) / (self.t_hi - self.t_lo) - 1.0

    def partials(self, t, theta, phi) -> dict:
        """All (t, theta, phi)-partials of R of total order <= 2."""
        s = self._scaled(t)
        jac = 2.0 / (self.t_hi - self.t_lo)
        out = {}
        for key in _DERIV_KEYS:
            it, ith, iph = key
            a = cheb.chebval(s, self._coef(it)) * jac**it     # (n_basis, *pts)
            design = self.basis.design(theta, phi, dth=ith, dph=iph)
            out[key] = np.einsum("...b,b...->...", design, a)
        return out

    def radius(self, t, theta, phi):
        s = self._scaled(t)
        a = cheb.chebval(s, self.coefs)
        return np.einsum("...b,b...->...", self.basis.design(theta, phi), a)


def _gauss_sphere_grid(n_theta: int, n_phi: int):
    nodes, _ = np.polynomial.legendre.leggauss(n_theta)
    theta = np.arccos(nodes)
    phi = (np.arange(n_phi) + 0.5) * (2.0 * math.pi / n_phi)
    TH, PH = np.meshgrid(theta, phi, indexing="ij")
    return TH.ravel(), PH.ravel()


def _trace_cone(spec: ConeSpec, sol, eos, t_lo: float, t_hi: float) -> _ConeGraph:
    L = spec.degree
    n_theta, n_phi = L + 4, 2 * L + 8
    theta0, phi0 = _gauss_sphere_grid(n_theta, n_phi)
    n_gen = theta0.size
    center = np.asarray(spec.center, dtype=float)
    omega0 = np.stack([np.sin(theta0) * np.cos(phi0),
                       np.sin(theta0) * np.sin(phi0),
                       np.cos(theta0)], axis=-1)
    x0 = center + spec.R0 * omega0

    state0 = catalog.sample(sol, np.zeros(n_gen), x0, eos, order=1)
    c0 = state0.c.value
    v0 = np.stack([vi.value for vi in state0.v], axis=-1)
    w0 = np.einsum("pa,pa->p", v0, omega0)
    p0 = np.concatenate([(c0 - w0)[:, None], omega0], axis=-1)

    def rhs(t, y):
        x = y[: 3 * n_gen].reshape(n_gen, 3)
        p = y[3 * n_gen:].reshape(n_gen, 4)
        try:
            state = catalog.sample(sol, np.full(n_gen, t), x, eos, order=1)
        except HyperbolicityError as exc:
            raise RayEscapeError(f"generator left the hyperbolic domain: {exc}")
        gi = state.ginv
        gup = np.empty((n_gen, 4, 4))
        dgup = np.empty((n_gen, 4, 4, 4))
        for a in range(4):
            for b in range(4):
                gup[:, a, b] = np.broadcast_to(gi[a][b].value, (n_gen,))
                for m in range(4):
                    mi = [0, 0, 0, 0]
                    mi[m] = 1
                    dgup[:, m, a, b] = np.broadcast_to(
                        gi[a][b].derivative(tuple(mi)), (n_gen,))
        gp = np.einsum("pab,pb->pa", gup, p)
        G = gp[:, 0]
        if np.any(np.abs(G) < 1e-12):
            raise RayEscapeError("generator tangent became orthogonal to the leaves")
        dx = gp[:, 1:] / G[:, None]
        dp = -0.5 * np.einsum("pmab,pa,pb->pm", dgup, p, p) / G[:, None]
        return np.concatenate([dx.ravel(), dp.ravel()])

    y0 = np.concatenate([x0.ravel(), p0.ravel()])

    def escape(t, y):
        r = np.linalg.norm(y[: 3 * n_gen].reshape(n_gen, 3) - center, axis=-1)
        return float(np.min(1.6 * spec.R0 - r))

    def collapse(t, y):
        r = np.linalg.norm(y[: 3 * n_gen].reshape(n_gen, 3) - center, axis=-1)
        return float(np.min(r - 0.02 * spec.R0))

    escape.terminal = True
    collapse.terminal = True

    def integrate(method: str, rtol: float, atol: float) -> dict:
        out = {}
        for lo, hi in ((0.0, t_hi), (0.0, t_lo)):
            if hi == lo:
                continue
            res = solve_ivp(rhs, (lo, hi), y0, method=method, rtol=rtol,
                            atol=atol, dense_output=True,
                            events=[escape, collapse])
            if res.status == 1:
                which = "escaped outward" if res.t_events[0].size else "collapsed"
                raise RayEscapeError(
                    f"cone generator {which} at t = {res.t[-1]:.6f} before reaching {hi}")
            if res.status != 0:
                raise RayEscapeError(f"generator integration failed: {res.message}")
            # events can be stepped over when the dynamics are trivial, so
            # sweep the dense output for radius-bound violations as well
            ts = np.linspace(lo, hi, 257)
            xs = res.sol(ts)[: 3 * n_gen].reshape(n_gen, 3, ts.size)
            r = np.linalg.norm(xs - center[:, None], axis=1)
            if float(np.min(r)) < 0.02 * spec.R0 or float(np.max(r)) > 1.6 * spec.R0:
                worst = ts[int(np.argmin(np.min(r, axis=0)))]
                raise RayEscapeError(
                    f"cone generator left the radial window near t = {worst:.6f}")
            out[hi > lo] = res
        return out

    sols = integrate("RK45", spec.rtol, spec.rtol * 0.1)

    def states_at(t: float, table=None):
        table = sols if table is None else table
        res = table[t > 0.0] if t != 0.0 else next(iter(table.values()))
        y = res.sol(t)
        x = y[: 3 * n_gen].reshape(n_gen, 3)
        p = y[3 * n_gen:].reshape(n_gen, 4)
        return x, p

    # Chebyshev nodes in time, least-squares harmonic fit per node
    deg = spec.n_time - 1
    s_nodes = np.cos(np.pi * (2 * np.arange(spec.n_time) + 1) / (2.0 * spec.n_time))
    t_nodes = t_lo + (s_nodes + 1.0) * (t_hi - t_lo) / 2.0
    basis = _RealSphericalBasis(L)
    samples = np.empty((spec.n_time, basis.n))
    fit_resid = 0.0
    for k, t in enumerate(t_nodes):
        x, _ = states_at(float(t))
        dx = x - center
        r = np.linalg.norm(dx, axis=-1)
        th = np.arccos(np.clip(dx[:, 2] / r, -1.0, 1.0))
        ph = np.arctan2(dx[:, 1], dx[:, 0])
        A = basis.design(th, ph)
        coef, *_ = np.linalg.lstsq(A, r, rcond=None)
        samples[k] = coef
        fit_resid = max(fit_resid, float(np.max(np.abs(A @ coef - r))))

    # interpolate the coefficient curves; exact on polynomial data
    V = cheb.chebvander(s_nodes, deg)
    coefs = np.linalg.solve(V, samples)

    # diagnostics: null defect of the tangent covector along the rays, and
    # the distance to an independent higher-order reintegration
    ref = integrate("DOP853", 1e-12, 1e-13)
    t_chk = np.linspace(t_lo, t_hi, 9)
    null_resid = 0.0
    geo_resid = 0.0
    for t in t_chk:
        t = float(t)
        x, p = states_at(t)
        state = catalog.sample(sol, np.full(n_gen, t), x, eos, order=1)
        gi = state.ginv
        gup = np.empty((n_gen, 4, 4))
        for a in range(4):
            for b in range(4):
                gup[:, a, b] = np.broadcast_to(gi[a][b].value, (n_gen,))
        gp = np.einsum("pab,pb->pa", gup, p)
        G = gp[:, 0]
        null_resid = max(null_resid, float(np.max(np.abs(
            np.einsum("pa,pa->p", gp, p) / G**2))))
        xr, pr = states_at(t, ref)
        geo_resid = max(geo_resid, float(np.max(np.abs(x - xr))),
                        float(np.max(np.abs(p - pr))))

    diagnostics = {"fit_residual": fit_resid, "null_residual": null_resid,
                   "geodesic_residual": geo_resid, "n_generators": n_gen}
    return _ConeGraph(basis, coefs, t_lo, t_hi, diagnostics)


# -- the region object ---------------------------------------------------


class Region:
    """Immutable bundle of solution, time function, and lateral boundary."""

    def __init__(self, spec: RegionSpec, sol, eos: IdealGasEOS, graph):
        self.spec = spec
        self.sol = sol
        self.eos = eos
        self.kind = spec.boundary.kind
        self.timefn = spec.timefn
        self.center = np.asarray(spec.boundary.center, dtype=float)
        self.T = spec.T
        self._graph = graph             # _ConeGraph for cones, None for tubes

    # ---- scalar surface data

    def tube_radius_jet(self, T: Jet) -> Jet:
        b = self.spec.boundary
        return b.R0 - b.speed * T

    def radius_partials(self, t, theta, phi) -> dict:
        """(t, theta, phi)-partials of the boundary radius, total order <= 2."""
        if self.kind == "tube":
            b = self.spec.boundary
            shape = np.broadcast_shapes(np.shape(t), np.shape(theta), np.shape(phi))
            out = {key: np.zeros(shape) for key in _DERIV_KEYS}
            out[(0, 0, 0)] = np.broadcast_to(b.R0 - b.speed * np.asarray(t, float),
                                             shape).copy()
            out[(1, 0, 0)] = np.full(shape, -b.speed)
            return out
        return self._graph.partials(t, theta, phi)

    def tau_jet(self, T: Jet, X1: Jet, X2: Jet, X3: Jet) -> Jet:
        return self.timefn.jet(T, X1, X2, X3)

    def psi_jet(self, T: Jet, X1: Jet, X2: Jet, X3: Jet) -> Jet:
        """Boundary-defining function Psi = |x - center| - R as an ambient jet."""
        c1, c2, c3 = self.center
        D1, D2, D3 = X1 - c1, X2 - c2, X3 - c3
        r = jets.sqrt(D1 * D1 + D2 * D2 + D3 * D3)
        if self.kind == "tube":
            return r - self.tube_radius_jet(T)
        ct = D3 * jets.reciprocal(r)
        if np.any(np.abs(ct.value) >= 1.0 - 1e-12):
            raise jets.DomainError("cone chart degenerates at the poles")
        theta = jets.arccos(ct)
        phi = jets.arctan2(D2, D1)
        parts = self._graph.partials(T.value, theta.value, phi.value)
        dt = (T - T.value).truncate(2)
        dth = (theta - theta.value).truncate(2)
        dph = (phi - phi.value).truncate(2)
        R = Jet.constant(parts[(0, 0, 0)], 2)
        deltas = {0: dt, 1: dth, 2: dph}
        for key in _DERIV_KEYS[1:]:
            term = Jet.constant(parts[key] / math.prod(math.factorial(k) for k in key), 2)
            for axis, count in enumerate(key):
                for _ in range(count):
                    term = term * deltas[axis]
            R = R + term
        return (r - R).truncate(2)

    # ---- leaf/boundary charts

    def boundary_radius(self, tau, theta, phi) -> np.ndarray:
        """Radius where the tau-leaf meets the lateral boundary, by Newton."""
        tau = np.asarray(tau, dtype=float)
        theta = np.asarray(theta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        shape = np.broadcast_shapes(tau.shape, theta.shape, phi.shape)
        omega = np.stack(np.broadcast_arrays(
            np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi),
            np.broadcast_to(np.cos(theta), shape)), axis=-1)
        eps = self.timefn.eps
        if self.kind == "tube" and eps == 0.0:
            b = self.spec.boundary
            return np.broadcast_to(b.R0 - b.speed * tau, shape).copy()
        r = np.broadcast_to(
            self.radius_partials(np.broadcast_to(tau, shape), theta, phi)[(0, 0, 0)],
            shape).copy()
        for _ in range(60):
            x = self.center + r[..., None] * omega
            if eps != 0.0:
                chi, grad = self.timefn.chi_value_grad(x)
                t = tau - eps * chi
                dchidr = np.einsum("...a,...a->...", grad, omega)
            else:
                t = np.broadcast_to(tau, shape)
                dchidr = 0.0
            parts = self.radius_partials(
                t, np.broadcast_to(theta, shape), np.broadcast_to(phi, shape))
            F = r - parts[(0, 0, 0)]
            dF = 1.0 + parts[(1, 0, 0)] * eps * dchidr
            step = F / dF
            r = r - step
            if np.max(np.abs(step)) < 1e-13 * (1.0 + np.max(np.abs(r))):
                break
        else:
            raise RegionAssumptionError("leaf-boundary intersection did not converge")
        if np.any(r <= 0.0):
            raise RegionAssumptionError("leaf-boundary intersection at nonpositive radius")
        return r

    def boundary_point(self, tau, theta, phi):
        """(t, x) coordinates of the point of the tau-sphere in direction omega."""
        r = self.boundary_radius(tau, theta, phi)
        theta = np.broadcast_to(np.asarray(theta, float), r.shape)
        phi = np.broadcast_to(np.asarray(phi, float), r.shape)
        omega = np.stack([np.sin(theta) * np.cos(phi),
                          np.sin(theta) * np.sin(phi), np.cos(theta)], axis=-1)
        x = self.center + r[..., None] * omega
        t = self.timefn.t_of(tau, x)
        return t, x

    def sphere_tangents(self, tau, theta, phi) -> dict:
        """Chart tangents of the boundary sphere S_tau at (theta, phi).

        Returns the ambient point plus 4-vectors e_theta, e_phi obtained by
        implicit differentiation of the leaf-boundary intersection.
        """
        r = self.boundary_radius(tau, theta, phi)
        theta = np.broadcast_to(np.asarray(theta, float), r.shape)
        phi = np.broadcast_to(np.asarray(phi, float), r.shape)
        st, ct = np.sin(theta), np.cos(theta)
        sp, cp = np.sin(phi), np.cos(phi)
        omega = np.stack([st * cp, st * sp, ct], axis=-1)
        d_om_th = np.stack([ct * cp, ct * sp, -st], axis=-1)
        d_om_ph = np.stack([-st * sp, st * cp, np.zeros_like(st)], axis=-1)
        x = self.center + r[..., None] * omega
        eps = self.timefn.eps
        if eps != 0.0:
            chi, grad = self.timefn.chi_value_grad(x)
            t = np.asarray(tau, float) - eps * chi
        else:
            grad = np.zeros_like(x)
            t = np.broadcast_to(np.asarray(tau, float), r.shape).copy()
        parts = self.radius_partials(t, theta, phi)
        gdotom = np.einsum("...a,...a->...", grad, omega)
        dF_dr = 1.0 + parts[(1, 0, 0)] * eps * gdotom

        def tangent(d_om, dR_ang):
            gdot = np.einsum("...a,...a->...", grad, d_om) * r
            dF = eps * parts[(1, 0, 0)] * gdot - dR_ang
            dr = -dF / dF_dr
            dx = dr[..., None] * omega + r[..., None] * d_om
            dt = -eps * np.einsum("...a,...a->...", grad, dx)
            return np.concatenate([dt[..., None], dx], axis=-1)

        # moving the leaf: dr/dtau = R_t / F_r, dt/dtau = 1 - eps grad(chi).dx
        dr_tau = parts[(1, 0, 0)] / dF_dr
        dx_tau = dr_tau[..., None] * omega
        dt_tau = 1.0 - eps * np.einsum("...a,...a->...", grad, dx_tau)
        return {
            "t": t, "x": x, "r": r,
            "e_tau": np.concatenate([dt_tau[..., None], dx_tau], axis=-1),
            "e_theta": tangent(d_om_th, parts[(0, 1, 0)]),
            "e_phi": tangent(d_om_ph, parts[(0, 0, 1)]),
        }

    def leaf_tangents(self, tau, xi, theta, phi) -> dict:
        """Chart tangents of the tau-leaf ball at (xi, theta, phi), xi in (0, 1]."""
        sph = self.sphere_tangents(tau, theta, phi)
        xi = np.asarray(xi, dtype=float)
        rb = sph["r"]
        theta = np.broadcast_to(np.asarray(theta, float), rb.shape)
        phi = np.broadcast_to(np.asarray(phi, float), rb.shape)
        st, ct = np.sin(theta), np.cos(theta)
        sp, cp = np.sin(phi), np.cos(phi)
        omega = np.stack([st * cp, st * sp, ct], axis=-1)
        d_om_th = np.stack([ct * cp, ct * sp, -st], axis=-1)
        d_om_ph = np.stack([-st * sp, st * cp, np.zeros_like(st)], axis=-1)
        x = self.center + (xi * rb)[..., None] * omega
        eps = self.timefn.eps
        if eps != 0.0:
            chi, grad = self.timefn.chi_value_grad(x)
            t = np.asarray(tau, float) - eps * chi
        else:
            grad = np.zeros_like(x)
        t = np.broadcast_to(np.asarray(tau, float) if eps == 0.0 else t,
                            x.shape[:-1]).copy()
        # radial derivative of r_b enters only through the boundary sphere
        drb_th = sph["e_theta"][..., 1:] - rb[..., None] * d_om_th
        drb_th = np.einsum("...a,...a->...", drb_th, omega)
        drb_ph = sph["e_phi"][..., 1:] - rb[..., None] * d_om_ph
        drb_ph = np.einsum("...a,...a->...", drb_ph, omega)

        def four_vec(dx):
            dt = -eps * np.einsum("...a,...a->...", grad, dx)
            shape = np.broadcast_shapes(dt.shape, dx.shape[:-1])
            dt = np.broadcast_to(dt, shape)
            dx = np.broadcast_to(dx, shape + (3,))
            return np.concatenate([dt[..., None], dx], axis=-1)

        e_xi = four_vec(rb[..., None] * omega)
        e_th = four_vec((xi * drb_th)[..., None] * omega
                        + (xi * rb)[..., None] * d_om_th)
        e_ph = four_vec((xi * drb_ph)[..., None] * omega
                        + (xi * rb)[..., None] * d_om_ph)
        drb_tau = np.einsum("...a,...a->...", sph["e_tau"][..., 1:], omega)
        dx_tau = (xi * drb_tau)[..., None] * omega
        dt_tau = 1.0 - eps * np.einsum("...a,...a->...", grad, dx_tau)
        e_tau = np.concatenate([dt_tau[..., None], dx_tau], axis=-1)
        return {"t": t, "x": x, "e_tau": e_tau, "e_xi": e_xi,
                "e_theta": e_th, "e_phi": e_ph}

    def sample_state(self, t, x, order: int = 2):
        return catalog.sample(self.sol, t, x, self.eos, order=order)

    @property
    def diagnostics(self) -> dict:
        return dict(self._graph.diagnostics) if self._graph is not None else {}


def _check_time_function(region: Region, rng_seed: int = 3) -> None:
    from . import frames  # local import to avoid a cycle

    taus = np.linspace(0.0, region.T, 4)
    for tau in taus:
        th = np.arccos(np.linspace(-0.9, 0.9, 7))
        ph = np.linspace(0.3, 2 * math.pi, 11, endpoint=False)
        TH, PH = map(np.ravel, np.meshgrid(th, ph, indexing="ij"))
        for xi in (0.35, 0.8):
            leaf = region.leaf_tangents(tau, xi, TH, PH)
            frames.leaf_frame(region, leaf["t"], leaf["x"], order=1)


def _check_tube_ingoing(region: Region) -> None:
    from . import frames

    taus = np.linspace(0.0, region.T, 6)
    worst = None
    for tau in taus:
        th = np.arccos(np.linspace(-0.95, 0.95, 9))
        ph = np.linspace(0.0, 2 * math.pi, 12, endpoint=False)
        TH, PH = map(np.ravel, np.meshgrid(th, ph, indexing="ij"))
        t, x = region.boundary_point(tau, TH, PH)
        fr = frames.frame_at(region, t, x, order=1)
        for name, val in (("z-bar", fr.z_bar.value), ("h-bar", fr.h_bar.value)):
            k = int(np.argmin(val))
            if val[k] <= 0.0:
                raise RegionAssumptionError(
                    f"tube is not ingoing-spacelike: {name} <= 0",
                    worst_point=(float(t[k]), x[k].tolist()), value=float(val[k]))
            if worst is None or val[k] < worst[0]:
                worst = (float(val[k]), name)


def build_region(spec: RegionSpec, sol, eos: IdealGasEOS | None = None) -> Region:
    """Construct a region and run its causal assumption checks."""
    eos = eos or IdealGasEOS()
    graph = None
    if spec.boundary.kind == "cone":
        pad = 0.1 + 2.0 * abs(spec.timefn.eps)
        t_lo = -pad if spec.timefn.eps != 0.0 else 0.0
        graph = _trace_cone(spec.boundary, sol, eos, t_lo, spec.T + pad)
    region = Region(spec, sol, eos, graph)
    _check_time_function(region)
    if spec.boundary.kind == "tube":
        _check_tube_ingoing(region)
    return region
