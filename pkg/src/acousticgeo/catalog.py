"""Closed-form exact solutions of the flow system, as jet factories.

Every member evaluates (rho, v, s) from coordinate jets with jet
arithmetic only, so sampled states carry analytically exact derivatives.
Steady members are built so the system holds identically:

- shear: unidirectional v = (f(x2,x3),0,0) with constant rho, s;
- entropy_stratified: v = 0, s arbitrary in (x2,x3), rho solved from
  pointwise pressure equilibrium p(rho,s) = p0;
- composite: shear + stratification together (both x1-independent);
- boosted: Galilean image of an inner member, genuinely time-dependent;
- perturbed_nonsolution: a flagged wrong-by-construction fixture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from . import jets
from .fluid import FluidState, IdealGasEOS
from .jets import Jet, coordinate_jets


@dataclass(frozen=True)
class Constant:
    kind = "constant"
    rho0: float = 0.0
    v0: tuple[float, float, float] = (0.0, 0.0, 0.0)
    s0: float = 0.0
    is_solution = True

    def fields(self, T, X1, X2, X3, eos):
        shape = T.shape
        order = T.order
        const = lambda val: Jet.constant(np.full(shape, float(val)), order)
        return const(self.rho0), [const(c) for c in self.v0], const(self.s0)


@dataclass(frozen=True)
class Shear:
    """v = (A sin(k2 x2) cos(k3 x3), 0, 0); rho, s constant."""

    kind = "shear"
    amplitude: float = 0.5
    k2: float = 1.0
    k3: float = 0.0
    rho0: float = 0.0
    s0: float = 0.0
    is_solution = True

    def fields(self, T, X1, X2, X3, eos):
        v1 = self.amplitude * (jets.sin(self.k2 * X2) * jets.cos(self.k3 * X3))
        zero = 0.0 * v1
        rho = self.rho0 + zero
        s = self.s0 + zero
        return rho, [v1, zero, zero], s


def _equilibrium_log_density(s: Jet, eos: IdealGasEOS, p0: float) -> Jet:
    # p = rho_bar^gamma exp(s + gamma rho)/gamma = p0, solved for rho
    g = eos.gamma
    K = math.log(g * p0) - g * math.log(eos.rho_bar)
    return (K - s) / g


@dataclass(frozen=True)
class EntropyStratified:
    """v = 0, s = A sin(k2 x2 + k3 x3), rho from pressure equilibrium."""

    kind = "entropy_stratified"
    amplitude: float = 0.3
    k2: float = 1.0
    k3: float = 1.0
    p0: float = 1.0
    is_solution = True

    def fields(self, T, X1, X2, X3, eos):
        s = self.amplitude * jets.sin(self.k2 * X2 + self.k3 * X3)
        rho = _equilibrium_log_density(s, eos, self.p0)
        zero = 0.0 * s
        return rho, [zero, zero, zero], s


@dataclass(frozen=True)
class Composite:
    """Shear flow through an entropy stratification (both x1-independent).

    The velocity advects nothing (all fields are x1-independent and
    v2 = v3 = 0), the pressure is in equilibrium, and both the specific
    vorticity and the entropy gradient are nonzero on generic points.
    Default wavenumbers are half-unit: backward sound cones traced off
    radius-2 spheres then stay band-limited near degree 20, which the
    region graphs rely on.
    """

    kind = "composite"
    v_amplitude: float = 0.6
    s_amplitude: float = 0.25
    kv2: float = 0.5
    kv3: float = 0.5
    ks: float = 0.5
    p0: float = 1.0
    is_solution = True

    def fields(self, T, X1, X2, X3, eos):
        v1 = self.v_amplitude * (jets.sin(self.kv2 * X2) * jets.cos(self.kv3 * X3))
        s = self.s_amplitude * jets.sin(self.ks * (X2 + X3))
        rho = _equilibrium_log_density(s, eos, self.p0)
        zero = 0.0 * v1
        return rho, [v1, zero, zero], s


@dataclass(frozen=True)
class RotatingVortex:
    """Rigid rotation about the x3-axis against radial stratification.

    With L = ln(1 + b r^2), r^2 = x1^2 + x2^2, the choice
        rho = (gamma omega^2/(2b) - 1) L + rho_c,
        s   = L - (gamma - 1) rho,
    balances the centripetal acceleration against the pressure gradient
    exactly (c^2 = 1 + b r^2), giving a steady solution with nonzero
    material acceleration B v and rotating entropy gradient (B S != 0) --
    the only member exercising those source terms.
    """

    kind = "vortex"
    omega: float = 0.5
    b: float = 0.5
    rho_c: float = 0.0
    is_solution = True

    def fields(self, T, X1, X2, X3, eos):
        g = eos.gamma
        L = jets.ln(1.0 + self.b * (X1 * X1 + X2 * X2))
        rho = (g * self.omega**2 / (2.0 * self.b) - 1.0) * L + self.rho_c
        s = L - (g - 1.0) * rho - (g - 1.0) * np.log(eos.rho_bar)
        v = [-self.omega * X2, self.omega * X1, 0.0 * L]
        return rho, v, s


@dataclass(frozen=True)
class Boosted:
    """Galilean image: fields(t,x) = inner(x - V0 t), velocity shifted by V0."""

    kind = "boosted"
    inner: object = field(default_factory=Composite)
    V0: tuple[float, float, float] = (0.2, 0.0, 0.0)
    is_solution = True

    def fields(self, T, X1, X2, X3, eos):
        Y = [X1 - self.V0[0] * T, X2 - self.V0[1] * T, X3 - self.V0[2] * T]
        rho, v, s = self.inner.fields(T, Y[0], Y[1], Y[2], eos)
        return rho, [v[a] + self.V0[a] for a in range(3)], s


@dataclass(frozen=True)
class PerturbedNonsolution:
    """Deliberate non-solution: inner fields plus an O(amplitude) ripple."""

    kind = "perturbed_nonsolution"
    inner: object = field(default_factory=Composite)
    amplitude: float = 0.05
    is_solution = False

    def fields(self, T, X1, X2, X3, eos):
        rho, v, s = self.inner.fields(T, X1, X2, X3, eos)
        ripple = self.amplitude * jets.sin(X1 + 2.0 * T)
        return rho + ripple, [v[0] + ripple, v[1], v[2]], s


def sample(spec, t, x, eos: IdealGasEOS, order: int = 3) -> FluidState:
    """Exact jets of the member's fields at points (t, x)."""
    T, X1, X2, X3 = coordinate_jets(t, x, order)
    rho, v, s = spec.fields(T, X1, X2, X3, eos)
    return FluidState(rho, v, s, eos)


KINDS = {
    "constant": Constant,
    "shear": Shear,
    "entropy_stratified": EntropyStratified,
    "composite": Composite,
    "vortex": RotatingVortex,
    "boosted": Boosted,
    "perturbed_nonsolution": PerturbedNonsolution,
}


def spec_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("kind")
    cls = KINDS[kind]
    for key in ("inner",):
        if key in d and isinstance(d[key], dict):
            d[key] = spec_from_dict(d[key])
    for key in ("v0", "V0"):
        if key in d:
            d[key] = tuple(d[key])
    return cls(**d)


def spec_to_dict(spec) -> dict:
    out = {"kind": spec.kind}
    for name in spec.__dataclass_fields__:
        val = getattr(spec, name)
        if hasattr(val, "__dataclass_fields__"):
            val = spec_to_dict(val)
        elif isinstance(val, tuple):
            val = list(val)
        out[name] = val
    return out


def default_catalog() -> dict[str, object]:
    comp = Composite()
    return {
        "constant": Constant(),
        "shear": Shear(),
        "entropy_stratified": EntropyStratified(),
        "composite": comp,
        "vortex": RotatingVortex(),
        "boosted_constant": Boosted(inner=Constant()),
        "boosted_composite": Boosted(inner=comp),
        "perturbed_nonsolution": PerturbedNonsolution(inner=comp),
    }


def halton_points(n: int, lo, hi, seed: int = 0) -> np.ndarray:
    """Scrambled low-discrepancy points in a box, shape (n, len(lo))."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    eng = qmc.Halton(d=lo.size, scramble=True, seed=seed)
    return lo + (hi - lo) * eng.random(n)
