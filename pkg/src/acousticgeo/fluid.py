"""Equation of state, derived flow variables, acoustical metric, residuals.

Fields live as jets (see jets.py) so all residuals below are evaluated
with analytically exact derivatives.  Conventions: coordinates (t, x1,
x2, x3); index 0 is time; spatial indices are raised/lowered with the
Kronecker delta unless the acoustical metric is named explicitly; the
material derivative is B = d_t + v^a d_a.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from . import jets
from .jets import Jet
from .tensors import EPS3, eps3_contract, rel_residual


class HyperbolicityError(ValueError):
    """Sound speed not positive at a sampled point."""


class NotASolutionError(ValueError):
    """A checker gated on the flow equations received a non-solution."""

    def __init__(self, magnitudes: dict):
        self.magnitudes = magnitudes
        worst = max(magnitudes.values())
        super().__init__(f"flow-equation residuals too large: {worst:.3e} {magnitudes}")


class IdealGasEOS:
    """p(density, s) = exp(s) density^gamma / gamma, reference density rho_bar.

    In terms of the logarithmic density rho = ln(density/rho_bar) this gives
    closed-form jets for p, its state-space derivatives, and the sound speed
    c = sqrt(dp/d(density) at fixed s).
    """

    def __init__(self, gamma: float = 1.4, rho_bar: float = 1.0):
        if gamma <= 1.0 or rho_bar <= 0.0:
            raise ValueError("need gamma > 1 and rho_bar > 0")
        self.gamma = float(gamma)
        self.rho_bar = float(rho_bar)

    def __repr__(self):
        return f"IdealGasEOS(gamma={self.gamma}, rho_bar={self.rho_bar})"


class FluidState:
    """Jets of (rho, v, s) at a batch of points plus everything derived.

    rho is the logarithmic density, v the velocity 3-vector, s the entropy.
    Derived fields: pressure and its state-space derivatives, sound speed,
    specific vorticity Omega = exp(-rho) curl v, entropy gradient S = grad s,
    and the modified variables Cmod (curl-type) and Dmod (divergence-type)
    whose transport equations the formulation checks exercise.
    """

    def __init__(self, rho: Jet, v: list[Jet], s: Jet, eos: IdealGasEOS):
        self.eos = eos
        self.rho, self.v, self.s = rho, list(v), s
        g = eos.gamma
        rb = eos.rho_bar
        self.p = (rb**g / g) * jets.exp(s + g * rho)
        self.p_s = self.p
        self.p_rho = g * self.p
        self.p_srho = g * self.p
        self.p_ss = self.p
        # normalized by the reference density, as the equations use them
        self.ps_n = self.p_s / rb
        self.psrho_n = self.p_srho / rb
        self.pss_n = self.p_ss / rb
        self.ln_c = 0.5 * (s + (g - 1.0) * rho) + (0.5 * (g - 1.0) * np.log(rb))
        self.c = jets.exp(self.ln_c)
        if np.any(self.c.value <= 0.0) or not np.all(np.isfinite(self.c.value)):
            bad = np.argmin(self.c.value)
            raise HyperbolicityError(f"non-positive sound speed at flat index {bad}")
        self.c_rho = (0.5 * (g - 1.0)) * self.c
        self.c_s = 0.5 * self.c
        self.exp_rho = jets.exp(rho)
        self.inv_exp_rho = jets.exp(-rho)
        self.c2 = jets.exp(2.0 * self.ln_c)
        self.inv_c2 = jets.exp(-2.0 * self.ln_c)
        self.inv_c3 = jets.exp(-3.0 * self.ln_c)
        self.Omega = [self.inv_exp_rho * w for w in curl(self.v)]
        self.S = [s.partial(a) for a in (1, 2, 3)]

    @property
    def order(self) -> int:
        return min(j.order for j in [self.rho, self.s] + self.v)

    @property
    def shape(self):
        return self.rho.shape

    def material(self, f: Jet) -> Jet:
        """B f = d_t f + v^a d_a f."""
        out = f.partial(0)
        for a in range(3):
            out = out + self.v[a] * f.partial(a + 1)
        return out

    @cached_property
    def B(self) -> list[Jet]:
        one = Jet.constant(np.ones(self.shape), self.order)
        return [one] + self.v

    @cached_property
    def Cmod(self) -> list[Jet]:
        """Modified curl variable: exp(-rho) curl Omega plus entropy coupling."""
        cw = curl(self.Omega)
        coef = self.inv_exp_rho * self.inv_exp_rho * self.inv_exp_rho * self.inv_c2 * self.ps_n
        divv = divergence(self.v)
        out = []
        for i in range(3):
            adv = self.S[0] * self.v[i].partial(1)
            for a in (1, 2):
                adv = adv + self.S[a] * self.v[i].partial(a + 1)
            out.append(self.inv_exp_rho * cw[i] + coef * adv - coef * (divv * self.S[i]))
        return out

    @cached_property
    def Dmod(self) -> Jet:
        """Modified divergence variable: exp(-2 rho) (div S - S . grad rho)."""
        inv2 = self.inv_exp_rho * self.inv_exp_rho
        adv = self.S[0] * self.rho.partial(1)
        for a in (1, 2):
            adv = adv + self.S[a] * self.rho.partial(a + 1)
        return inv2 * divergence(self.S) - inv2 * adv

    # -- acoustical metric --------------------------------------------

    @cached_property
    def g(self) -> list[list[Jet]]:
        """Lower-index acoustical metric components."""
        ic2 = self.inv_c2
        v = self.v
        vsq = v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
        G = [[None] * 4 for _ in range(4)]
        G[0][0] = -1.0 + ic2 * vsq
        zero = 0.0 * vsq
        for a in range(3):
            G[0][a + 1] = G[a + 1][0] = -(ic2 * v[a])
            for b in range(3):
                G[a + 1][b + 1] = (ic2 + zero) if a == b else zero
        return G

    @cached_property
    def ginv(self) -> list[list[Jet]]:
        """Upper-index acoustical metric components."""
        c2, v = self.c2, self.v
        zero = 0.0 * c2
        Gi = [[None] * 4 for _ in range(4)]
        Gi[0][0] = -1.0 + zero
        for a in range(3):
            Gi[0][a + 1] = Gi[a + 1][0] = -v[a]
            for b in range(3):
                off = -(v[a] * v[b])
                Gi[a + 1][b + 1] = c2 + off if a == b else off
        return Gi

    @cached_property
    def sqrt_det(self) -> Jet:
        """sqrt |det g| = c^-3."""
        return self.inv_c3

    @cached_property
    def chr_lower(self) -> list[list[list[Jet]]]:
        """Christoffel symbols of the first kind Gam[b][a][c] = Gam_{b a c}."""
        dg = [[[self.g[k][l].partial(m) for m in range(4)] for l in range(4)] for k in range(4)]
        out = [[[None] * 4 for _ in range(4)] for _ in range(4)]
        for b in range(4):
            for a in range(4):
                for c in range(4):
                    out[b][a][c] = 0.5 * (dg[a][c][b] + dg[b][a][c] - dg[b][c][a])
        return out

    @cached_property
    def chr(self) -> list[list[list[Jet]]]:
        """Mixed Christoffels chr[b][a][c] = Gam_b^a_c (middle index raised)."""
        low = self.chr_lower
        out = [[[None] * 4 for _ in range(4)] for _ in range(4)]
        for b in range(4):
            for c in range(4):
                for a in range(4):
                    acc = None
                    for k in range(4):
                        term = self.ginv[a][k] * low[b][k][c]
                        acc = term if acc is None else acc + term
                    out[b][a][c] = acc
        return out

    def box_g(self, phi: Jet) -> Jet:
        """Covariant wave operator: c^3 d_a { c^-3 (g^-1)^{ab} d_b phi }."""
        w = self.inv_c3
        out = None
        for a in range(4):
            flux = None
            for b in range(4):
                term = self.ginv[a][b] * phi.partial(b)
                flux = term if flux is None else flux + term
            term = (w * flux).partial(a)
            out = term if out is None else out + term
        return jets.exp(3.0 * self.ln_c) * out

    def quad_g(self, f: Jet, h: Jet) -> Jet:
        """Standard null form (g^-1)^{ab} d_a f d_b h."""
        out = None
        for a in range(4):
            for b in range(4):
                term = self.ginv[a][b] * f.partial(a) * h.partial(b)
                out = term if out is None else out + term
        return out


def curl(V: list[Jet]) -> list[Jet]:
    """(curl V)^i = eps_{ijk} d_j V^k, spatial indices."""
    D = [[V[k].partial(j + 1) for j in range(3)] for k in range(3)]
    out = [None, None, None]
    for (i, j, k), sign in EPS3:
        term = sign * D[k][j]
        out[i] = term if out[i] is None else out[i] + term
    return out


def divergence(V: list[Jet]) -> Jet:
    out = V[0].partial(1)
    for a in (1, 2):
        out = out + V[a].partial(a + 1)
    return out


def lower_spatial(state: FluidState, V: list[Jet]) -> list[Jet]:
    """Four lowered components of a Sigma_t-tangent vector (V^0 = 0)."""
    vdotV = state.v[0] * V[0] + state.v[1] * V[1] + state.v[2] * V[2]
    down0 = -(state.inv_c2 * vdotV)
    return [down0] + [state.inv_c2 * V[a] for a in range(3)]


def derive_state(rho: Jet, v: list[Jet], s: Jet, eos: IdealGasEOS) -> FluidState:
    return FluidState(rho, v, s, eos)


# -- first-order system residuals ----------------------------------------


def euler_residual(state: FluidState) -> dict[str, np.ndarray]:
    """Signed residual values of the first-order flow system."""
    r_rho = state.material(state.rho) + divergence(state.v)
    coef = state.inv_exp_rho * state.ps_n
    r_v = []
    for i in range(3):
        r = (state.material(state.v[i]) + state.c2 * state.rho.partial(i + 1)
             + coef * state.s.partial(i + 1))
        r_v.append(r.value)
    return {
        "log_density": r_rho.value,
        "velocity": np.stack(r_v, axis=-1),
        "entropy": state.material(state.s).value,
    }


def euler_residual_max(state: FluidState) -> dict[str, float]:
    return {k: float(np.max(np.abs(r))) for k, r in euler_residual(state).items()}


def require_solution(state: FluidState, tol: float = 1e-10) -> None:
    mags = euler_residual_max(state)
    if max(mags.values()) > tol:
        raise NotASolutionError(mags)


# -- source terms of the second-order formulation -------------------------
#
# Naming: quad_* collects the derivative-quadratic (null form) sources,
# lower_* the lower-order sources, of each equation in the formulation
# theorem.  transport_source_* are the right-hand sides of the transport
# equations for Omega and S; they reappear as the 'B' bulk terms of the
# integral identities.


def quad_source_velocity(state: FluidState) -> list[Jet]:
    coef = 1.0 + state.c_rho / state.c
    return [-(coef * state.quad_g(state.rho, state.v[i])) for i in range(3)]


def quad_source_log_density(state: FluidState) -> Jet:
    dv = [[state.v[b].partial(a + 1) for a in range(3)] for b in range(3)]
    divv2 = divergence(state.v) * divergence(state.v)
    cross = None
    for a in range(3):
        for b in range(3):
            term = dv[b][a] * dv[a][b]
            cross = term if cross is None else cross + term
    return -3.0 * (state.c_rho / state.c) * state.quad_g(state.rho, state.rho) + divv2 - cross


def lower_source_velocity(state: FluidState) -> list[Jet]:
    Brho = state.material(state.rho)
    Bv = [state.material(state.v[i]) for i in range(3)]
    t1 = eps3_contract(Bv, state.Omega)
    t2 = eps3_contract(state.Omega, state.S)
    out = []
    for i in range(3):
        adv = state.S[0] * state.v[i].partial(1)
        for a in (1, 2):
            adv = adv + state.S[a] * state.v[i].partial(a + 1)
        out.append(2.0 * state.exp_rho * t1[i]
                   - state.ps_n * t2[i]
                   - 0.5 * state.inv_exp_rho * state.psrho_n * adv
                   - 2.0 * state.inv_exp_rho * (state.c_rho / state.c) * state.ps_n * Brho * state.S[i]
                   + state.inv_exp_rho * state.psrho_n * Brho * state.S[i])
    return out


def lower_source_log_density(state: FluidState) -> Jet:
    Sdrho = state.S[0] * state.rho.partial(1)
    for a in (1, 2):
        Sdrho = Sdrho + state.S[a] * state.rho.partial(a + 1)
    Ssq = state.S[0] * state.S[0] + state.S[1] * state.S[1] + state.S[2] * state.S[2]
    return (-2.5 * state.inv_exp_rho * state.psrho_n * Sdrho
            - state.inv_exp_rho * state.pss_n * Ssq)


def lower_source_entropy(state: FluidState) -> Jet:
    Sdrho = state.S[0] * state.rho.partial(1)
    for a in (1, 2):
        Sdrho = Sdrho + state.S[a] * state.rho.partial(a + 1)
    Ssq = state.S[0] * state.S[0] + state.S[1] * state.S[1] + state.S[2] * state.S[2]
    return state.c2 * Sdrho - state.c * state.c_rho * Sdrho - state.c * state.c_s * Ssq


def transport_source_vorticity(state: FluidState) -> list[Jet]:
    """Right-hand side of B Omega^i; Sigma_t-tangent by inspection."""
    Bv = [state.material(state.v[i]) for i in range(3)]
    coef = state.inv_exp_rho * state.inv_exp_rho * state.inv_c2 * state.ps_n
    tw = eps3_contract(Bv, state.S)
    out = []
    for i in range(3):
        adv = state.Omega[0] * state.v[i].partial(1)
        for a in (1, 2):
            adv = adv + state.Omega[a] * state.v[i].partial(a + 1)
        out.append(adv - coef * tw[i])
    return out


def transport_source_entropy_gradient(state: FluidState) -> list[Jet]:
    """Right-hand side of B S^i."""
    tw = eps3_contract(state.Omega, state.S)
    out = []
    for i in range(3):
        adv = state.S[0] * state.v[i].partial(1)
        for a in (1, 2):
            adv = adv + state.S[a] * state.v[i].partial(a + 1)
        out.append(-adv + state.exp_rho * tw[i])
    return out


def _quad_source_modified_curl(state: FluidState) -> list[Jet]:
    S, v = state.S, state.v
    dv = [[v[b].partial(a + 1) for a in range(3)] for b in range(3)]
    divv = divergence(v)
    Brho = state.material(state.rho)
    Bv = [state.material(v[i]) for i in range(3)]
    e3 = state.inv_exp_rho * state.inv_exp_rho * state.inv_exp_rho
    base = e3 * state.inv_c2 * state.ps_n
    base_crho = base * (state.c_rho / state.c)
    base_sr = e3 * state.inv_c2 * state.psrho_n
    drho = [state.rho.partial(a + 1) for a in range(3)]

    cross = None  # (d_a v^b)(d_b v^a)
    for a in range(3):
        for b in range(3):
            term = dv[b][a] * dv[a][b]
            cross = term if cross is None else cross + term
    SdotBv_rho = None  # S^a{(d_a rho) Bv^i - (d_a v^i) Brho}, per i below
    BvdotDrho = None  # (Bv^a) d_a rho
    for a in range(3):
        term = Bv[a] * drho[a]
        BvdotDrho = term if BvdotDrho is None else BvdotDrho + term

    out = []
    for i in range(3):
        swirl = None  # S^b{(div v) d_b v^i - (d_a v^i) d_b v^a}
        mix = None  # S^a{(d_a rho) Bv^i - (d_a v^i) Brho}
        for b in range(3):
            t = S[b] * (divv * dv[i][b])
            for a in range(3):
                t = t - S[b] * (dv[i][a] * dv[a][b])
            swirl = t if swirl is None else swirl + t
            m = S[b] * (drho[b] * Bv[i] - dv[i][b] * Brho)
            mix = m if mix is None else mix + m
        out.append(
            base * state.S[i] * (cross - divv * divv)
            + base * swirl
            + 2.0 * base * mix
            + 2.0 * base_crho * mix
            - base_sr * mix
            + base_sr * S[i] * (BvdotDrho - Brho * divv)
            + 2.0 * base * S[i] * (Brho * divv - BvdotDrho)
            + 2.0 * base_crho * S[i] * (Brho * divv - BvdotDrho)
        )
    return out


def _lower_source_modified_curl(state: FluidState) -> list[Jet]:
    S = state.S
    Bv = [state.material(state.v[i]) for i in range(3)]
    Ssq = S[0] * S[0] + S[1] * S[1] + S[2] * S[2]
    SdotBv = S[0] * Bv[0] + S[1] * Bv[1] + S[2] * Bv[2]
    e3 = state.inv_exp_rho * state.inv_exp_rho * state.inv_exp_rho
    k1 = e3 * state.inv_c2 * (state.c_s / state.c) * state.ps_n
    k2 = e3 * state.inv_c2 * state.pss_n
    out = []
    for i in range(3):
        out.append(2.0 * k1 * (Bv[i] * Ssq) - 2.0 * k1 * (SdotBv * S[i])
                   + k2 * (SdotBv * S[i]) - k2 * (Bv[i] * Ssq))
    return out


def _quad_source_modified_div(state: FluidState) -> Jet:
    divv = divergence(state.v)
    drho = [state.rho.partial(a + 1) for a in range(3)]
    dv = [[state.v[b].partial(a + 1) for a in range(3)] for b in range(3)]
    inv2 = state.inv_exp_rho * state.inv_exp_rho
    acc = None
    for a in range(3):
        t = None
        for b in range(3):
            term = dv[b][a] * drho[b]
            t = term if t is None else t + term
        term = state.S[a] * (t - drho[a] * divv)
        acc = term if acc is None else acc + term
    return 2.0 * (inv2 * acc)


def formulation_residuals(state: FluidState, gate_tol: float = 1e-10,
                          gate: bool = True) -> dict[str, np.ndarray]:
    """Relative residuals of every equation of the second-order formulation.

    Requires order-3 jets.  Each entry is |sum of terms| / (1 + max term)
    per point (vector equations: per point and component).
    """
    if gate:
        require_solution(state, gate_tol)
    out = {}
    vec = lambda rs: np.stack(rs, axis=-1)

    c2e2r = state.c2 * (state.exp_rho * state.exp_rho)
    Qv = quad_source_velocity(state)
    Lv = lower_source_velocity(state)
    out["wave_velocity"] = vec([
        rel_residual(state.box_g(state.v[i]), c2e2r * state.Cmod[i], -Qv[i], -Lv[i])
        for i in range(3)])

    out["wave_log_density"] = rel_residual(
        state.box_g(state.rho), state.exp_rho * state.ps_n * state.Dmod,
        -quad_source_log_density(state), -lower_source_log_density(state))

    out["wave_entropy"] = rel_residual(
        state.box_g(state.s), -(c2e2r * state.Dmod), -lower_source_entropy(state))

    LO = transport_source_vorticity(state)
    out["transport_vorticity"] = vec([
        rel_residual(state.material(state.Omega[i]), -LO[i]) for i in range(3)])

    LS = transport_source_entropy_gradient(state)
    out["transport_entropy_gradient"] = vec([
        rel_residual(state.material(state.S[i]), -LS[i]) for i in range(3)])

    OmDrho = state.Omega[0] * state.rho.partial(1)
    for a in (1, 2):
        OmDrho = OmDrho + state.Omega[a] * state.rho.partial(a + 1)
    out["divergence_vorticity"] = rel_residual(divergence(state.Omega), OmDrho)

    out["curl_entropy_gradient"] = vec([rel_residual(w) for w in curl(state.S)])

    cw = curl(state.Omega)
    dv = [[state.v[b].partial(a + 1) for a in range(3)] for b in range(3)]
    dO = [[state.Omega[b].partial(a + 1) for a in range(3)] for b in range(3)]
    divv, divS = divergence(state.v), divergence(state.S)
    Bv = [state.material(state.v[i]) for i in range(3)]
    BS = [state.material(state.S[i]) for i in range(3)]
    coef = (state.inv_exp_rho * state.inv_exp_rho * state.inv_exp_rho
            * state.inv_c2 * state.ps_n)
    QC = _quad_source_modified_curl(state)
    LC = _lower_source_modified_curl(state)
    res_c = []
    for i in range(3):
        g1 = None
        for (ii, a, b), sign in EPS3:
            if ii != i:
                continue
            for j in range(3):
                term = sign * (dv[j][a] * dO[j][b])
                g1 = term if g1 is None else g1 + term
        g1 = -2.0 * (state.inv_exp_rho * g1)
        g2 = None
        for a in range(3):
            term = dv[i][a] * cw[a]
            g2 = term if g2 is None else g2 + term
        g2 = state.inv_exp_rho * g2
        g3 = None
        for a in range(3):
            term = BS[a] * dv[i][a]
            g3 = term if g3 is None else g3 + term
        g3 = coef * (g3 - Bv[i] * divS)
        g4 = None
        for a in range(3):
            term = Bv[a] * state.S[i].partial(a + 1)
            g4 = term if g4 is None else g4 + term
        g4 = coef * (g4 - BS[i] * divv)
        res_c.append(rel_residual(state.material(state.Cmod[i]),
                                  -g1, -g2, -g3, -g4, -QC[i], -LC[i]))
    out["transport_modified_curl"] = vec(res_c)

    inv2 = state.inv_exp_rho * state.inv_exp_rho
    h1 = 2.0 * (inv2 * (divv * divS))
    h1b = None
    for a in range(3):
        for b in range(3):
            term = state.S[b].partial(a + 1) * dv[a][b]
            h1b = term if h1b is None else h1b + term
    h1 = h1 - 2.0 * (inv2 * h1b)
    h2 = None
    for a in range(3):
        term = cw[a] * state.S[a]
        h2 = term if h2 is None else h2 + term
    h2 = state.inv_exp_rho * h2
    out["transport_modified_div"] = rel_residual(
        state.material(state.Dmod), -h1, -h2, -_quad_source_modified_div(state))
    return out
