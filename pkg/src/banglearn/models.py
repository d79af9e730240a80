"""Benchmark dynamical systems with an additive scalar control input.

Every model is a named vector field F(x) together with the channels the
scalar control feeds into.  The single-unit models (Duffing, reduced
Hodgkin-Huxley, thalamic neuron, Lorenz) receive the control on their first
state component only; the coupled thalamic population receives the same
scalar on every oscillator's voltage.

Vector fields broadcast over leading axes, so a field evaluated on a
(batch, n) array returns a (batch, n) array of derivatives.  Time units are
milliseconds for the neural models and dimensionless otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq


class UnsupportedModelError(ValueError):
    """Raised when an operation has no closed form for the given model."""


@dataclass(frozen=True)
class StateLabel:
    """A fixed point annotated with its stability."""

    kind: str  # "stable_fixed_point" or "unstable_fixed_point"
    location: np.ndarray


@dataclass(frozen=True)
class Model:
    """A controlled vector field dx/dt = F(x) + u * e_control.

    `drift` is the uncontrolled field F; the control is added on
    `control_channels` by :meth:`vector_field`, which keeps the additive
    control structure true by construction.
    """

    name: str
    dimension: int
    params: object
    drift: Callable[[np.ndarray], np.ndarray]
    control_channels: tuple = (0,)
    event_coordinate: int = 0
    default_dt: float = 1e-3
    default_ic: tuple = ()
    default_settle: float = 0.0

    def vector_field(self, x: np.ndarray, u) -> np.ndarray:
        out = self.drift(x)
        u_arr = np.asarray(u, dtype=float)
        if u_arr.ndim == 0:
            if u_arr != 0.0:
                out[..., list(self.control_channels)] += u_arr
        else:
            # one control value per batch row
            out[..., list(self.control_channels)] += u_arr[..., None]
        return out


def eval_field(model: Model, x, u: float) -> np.ndarray:
    """Controlled derivative F(x) + u on the model's control channels.

    Validating wrapper around :meth:`Model.vector_field`; rejects dimension
    mismatches and non-finite inputs.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.dimension:
        raise ValueError(
            f"state has dimension {x.shape[-1]}, model '{model.name}' "
            f"expects {model.dimension}"
        )
    if not np.all(np.isfinite(x)):
        raise ValueError("state contains non-finite components")
    if not np.isfinite(u):
        raise ValueError("control value is not finite")
    return model.vector_field(x, u)


# ---------------------------------------------------------------------------
# Duffing oscillator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DuffingParams:
    delta: float = 0.1


def duffing(delta: float = 0.1) -> Model:
    """Damped Duffing oscillator: dx/dt = y + u, dy/dt = x - x^3 - delta*y."""
    p = DuffingParams(delta=delta)

    def drift(x):
        pos = x[..., 0]
        vel = x[..., 1]
        return np.stack([vel, pos - pos**3 - p.delta * vel], axis=-1)

    return Model(
        name="duffing",
        dimension=2,
        params=p,
        drift=drift,
        default_dt=1e-3,
        default_ic=(0.5, 0.5),
        default_settle=50.0,
    )


# ---------------------------------------------------------------------------
# Reduced Hodgkin-Huxley model (2D: v, n)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReducedHHParams:
    """Reduced Hodgkin-Huxley parameters.

    The baseline current defaults to 6.69 uA/cm^2, the value that produces
    the bistable regime (stable orbit / unstable orbit / rest state).  The
    same source also quotes I = 20 in its parameter listing; that regime is
    reachable by overriding `i_base`.
    """

    i_base: float = 6.69
    c: float = 1.0
    g_na: float = 120.0
    v_na: float = 50.0
    g_k: float = 36.0
    v_k: float = -77.0
    g_l: float = 0.3
    v_l: float = -54.4

    @staticmethod
    def a_n(v):
        return _rate_with_limit(v, offset=55.0, coef=0.01, scale=10.0)

    @staticmethod
    def b_n(v):
        return 0.125 * np.exp(-(np.asarray(v, dtype=float) + 65.0) / 80.0)

    @staticmethod
    def a_m(v):
        return _rate_with_limit(v, offset=40.0, coef=0.1, scale=10.0)

    @staticmethod
    def b_m(v):
        return 4.0 * np.exp(-(np.asarray(v, dtype=float) + 65.0) / 18.0)

    @classmethod
    def m_inf(cls, v):
        am = cls.a_m(v)
        return am / (am + cls.b_m(v))

    @classmethod
    def n_inf(cls, v):
        an = cls.a_n(v)
        return an / (an + cls.b_n(v))


def _rate_with_limit(v, offset: float, coef: float, scale: float):
    """Rate function coef*(v+offset)/(1 - exp(-(v+offset)/scale)).

    The denominator vanishes at v = -offset; the removable singularity is
    filled with the analytic limit coef*scale whenever |denominator| < 1e-12.
    """
    w = np.asarray(v, dtype=float) + offset
    den = -np.expm1(-w / scale)
    near = np.abs(den) < 1e-12
    safe = np.where(near, 1.0, den)
    return np.where(near, coef * scale, coef * w / safe)


def reduced_hh(i_base: float = 6.69, **overrides) -> Model:
    """Two-dimensional Hodgkin-Huxley reduction (voltage v, gating n)."""
    p = ReducedHHParams(i_base=i_base, **overrides)

    def drift(x):
        v = x[..., 0]
        n = x[..., 1]
        m = p.m_inf(v)
        i_ion = (
            p.g_na * m**3 * (0.8 - n) * (v - p.v_na)
            + p.g_k * n**4 * (v - p.v_k)
            + p.g_l * (v - p.v_l)
        )
        vdot = (p.i_base - i_ion) / p.c
        ndot = p.a_n(v) * (1.0 - n) - p.b_n(v) * n
        return np.stack([vdot, ndot], axis=-1)

    return Model(
        name="reduced_hh",
        dimension=2,
        params=p,
        drift=drift,
        default_dt=1e-2,
        default_ic=(0.0, 0.2),
        default_settle=500.0,
    )


def reduced_hh_rest_state(params: ReducedHHParams | None = None,
                          v_bracket=(-75.0, -55.0)) -> np.ndarray:
    """Equilibrium (v*, n*) of the reduced HH model, solved numerically.

    On the n-nullcline n = n_inf(v), so the equilibrium reduces to a scalar
    root of the voltage equation, bracketed by `v_bracket`.
    """
    p = params or ReducedHHParams()

    def vdot(v):
        n = p.n_inf(v)
        m = p.m_inf(v)
        i_ion = (
            p.g_na * m**3 * (0.8 - n) * (v - p.v_na)
            + p.g_k * n**4 * (v - p.v_k)
            + p.g_l * (v - p.v_l)
        )
        return (p.i_base - i_ion) / p.c

    v_star = brentq(vdot, *v_bracket, xtol=1e-12, rtol=8.9e-16)
    return np.array([v_star, float(p.n_inf(v_star))])


# ---------------------------------------------------------------------------
# Thalamic neuron model (3D: v, h, r)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThalamicParams:
    c_m: float = 1.0
    g_l: float = 0.05
    e_l: float = -70.0
    g_na: float = 3.0
    e_na: float = 50.0
    g_k: float = 5.0
    e_k: float = -90.0
    g_t: float = 5.0
    e_t: float = 0.0
    i_b: float = 5.0

    @staticmethod
    def h_inf(v):
        return 1.0 / (1.0 + np.exp((np.asarray(v, dtype=float) + 41.0) / 4.0))

    @staticmethod
    def r_inf(v):
        return 1.0 / (1.0 + np.exp((np.asarray(v, dtype=float) + 84.0) / 4.0))

    @staticmethod
    def alpha_h(v):
        return 0.128 * np.exp(-(np.asarray(v, dtype=float) + 46.0) / 18.0)

    @staticmethod
    def beta_h(v):
        return 4.0 / (1.0 + np.exp(-(np.asarray(v, dtype=float) + 23.0) / 5.0))

    @classmethod
    def tau_h(cls, v):
        return 1.0 / (cls.alpha_h(v) + cls.beta_h(v))

    @staticmethod
    def tau_r(v):
        return 28.0 + np.exp(-(np.asarray(v, dtype=float) + 25.0) / 10.5)

    @staticmethod
    def m_inf(v):
        return 1.0 / (1.0 + np.exp(-(np.asarray(v, dtype=float) + 37.0) / 7.0))

    @staticmethod
    def p_inf(v):
        return 1.0 / (1.0 + np.exp(-(np.asarray(v, dtype=float) + 60.0) / 6.2))


def _thalamic_rhs(p: ThalamicParams, v, h, r, coupling=0.0):
    i_l = p.g_l * (v - p.e_l)
    i_na = p.g_na * p.m_inf(v) ** 3 * h * (v - p.e_na)
    i_k = p.g_k * (0.75 * (1.0 - h)) ** 4 * (v - p.e_k)
    i_t = p.g_t * p.p_inf(v) ** 2 * r * (v - p.e_t)
    vdot = (-i_l - i_na - i_k - i_t + p.i_b + coupling) / p.c_m
    hdot = (p.h_inf(v) - h) / p.tau_h(v)
    rdot = (p.r_inf(v) - r) / p.tau_r(v)
    return vdot, hdot, rdot


def thalamic(**overrides) -> Model:
    """Three-dimensional thalamic neuron model (voltage v, gating h, r)."""
    p = ThalamicParams(**overrides)

    def drift(x):
        v = x[..., 0]
        h = x[..., 1]
        r = x[..., 2]
        vdot, hdot, rdot = _thalamic_rhs(p, v, h, r)
        return np.stack([vdot, hdot, rdot], axis=-1)

    return Model(
        name="thalamic",
        dimension=3,
        params=p,
        drift=drift,
        default_dt=1e-2,
        default_ic=(-65.0, 0.4, 0.1),
        default_settle=500.0,
    )


# ---------------------------------------------------------------------------
# Coupled thalamic population (3M-dimensional, block layout)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoupledThalamicParams:
    """All-to-all electrotonically coupled thalamic oscillators.

    State layout is block-contiguous: (v_1..v_M, h_1..h_M, r_1..r_M).  The
    coupling term on oscillator i is (1/M) * sum_j alpha_ij (v_j - v_i) with
    alpha_ii = 0.  The scalar control is applied to every voltage, so the
    whole population receives the same stimulus.
    """

    cell: ThalamicParams = field(default_factory=ThalamicParams)
    m: int = 51
    coupling: np.ndarray | None = None
    coupling_strength: float = 0.01

    def coupling_matrix(self) -> np.ndarray:
        if self.coupling is not None:
            mat = np.asarray(self.coupling, dtype=float)
            if mat.shape != (self.m, self.m):
                raise ValueError("coupling matrix shape does not match M")
            if np.any(np.diagonal(mat) != 0.0):
                raise ValueError("coupling matrix diagonal must be zero")
            return mat
        mat = np.full((self.m, self.m), self.coupling_strength)
        np.fill_diagonal(mat, 0.0)
        return mat


def coupled_thalamic(m: int = 51, coupling_strength: float = 0.01,
                     cell: ThalamicParams | None = None,
                     coupling: np.ndarray | None = None) -> Model:
    """Population of M coupled thalamic neurons sharing one control input."""
    if m < 1:
        raise ValueError("population size M must be >= 1")
    p = CoupledThalamicParams(
        cell=cell or ThalamicParams(),
        m=m,
        coupling=coupling,
        coupling_strength=coupling_strength,
    )
    alpha = p.coupling_matrix()
    row_sum = alpha.sum(axis=1)

    def drift(x):
        v = x[..., : p.m]
        h = x[..., p.m: 2 * p.m]
        r = x[..., 2 * p.m:]
        coup = (v @ alpha.T - v * row_sum) / p.m
        vdot, hdot, rdot = _thalamic_rhs(p.cell, v, h, r, coupling=coup)
        return np.concatenate([vdot, hdot, rdot], axis=-1)

    single = thalamic()
    return Model(
        name="coupled_thalamic",
        dimension=3 * m,
        params=p,
        drift=drift,
        control_channels=tuple(range(m)),
        event_coordinate=0,
        default_dt=1e-2,
        default_ic=tuple(np.repeat(single.default_ic, m)),
        default_settle=200.0,
    )


def mean_population_state(x_full, m: int) -> np.ndarray:
    """Per-variable population mean (v_bar, h_bar, r_bar) of a block state."""
    if m < 1:
        raise ValueError("population size M must be >= 1")
    x_full = np.asarray(x_full, dtype=float)
    if x_full.shape[-1] != 3 * m:
        raise ValueError(
            f"state has dimension {x_full.shape[-1]}, expected 3*M = {3 * m}"
        )
    return x_full.reshape(x_full.shape[:-1] + (3, m)).mean(axis=-1)


def population_state(member_states) -> np.ndarray:
    """Assemble a block-layout population state from per-oscillator triples."""
    member_states = np.asarray(member_states, dtype=float)
    if member_states.ndim != 2 or member_states.shape[1] != 3:
        raise ValueError("expected an (M, 3) array of per-oscillator states")
    return member_states.T.reshape(-1)


# ---------------------------------------------------------------------------
# Lorenz system
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LorenzParams:
    sigma: float = 10.0
    b: float = 8.0 / 3.0
    r: float = 1.5


def lorenz(sigma: float = 10.0, b: float = 8.0 / 3.0, r: float = 1.5) -> Model:
    """Lorenz system in the bistable regime (default r = 1.5)."""
    p = LorenzParams(sigma=sigma, b=b, r=r)

    def drift(x):
        xx = x[..., 0]
        yy = x[..., 1]
        zz = x[..., 2]
        return np.stack(
            [p.sigma * (yy - xx), p.r * xx - yy - xx * zz, xx * yy - p.b * zz],
            axis=-1,
        )

    return Model(
        name="lorenz",
        dimension=3,
        params=p,
        drift=drift,
        default_dt=1e-3,
        default_ic=(1.0, 1.0, 1.0),
        default_settle=50.0,
    )


# ---------------------------------------------------------------------------
# Radial isochron clock (synthetic benchmark with a known phase response)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialClockParams:
    omega: float = 1.0


def radial_clock(omega: float = 1.0) -> Model:
    """Planar oscillator dr/dt = r(1 - r^2), dtheta/dt = omega, control on x.

    Its isochrons are radial, so the phase sensitivity to an x-impulse is
    exactly -sin(theta); used as a ground-truth oscillator in validation.
    """
    p = RadialClockParams(omega=omega)

    def drift(x):
        xx = x[..., 0]
        yy = x[..., 1]
        shrink = 1.0 - (xx**2 + yy**2)
        return np.stack(
            [xx * shrink - p.omega * yy, yy * shrink + p.omega * xx], axis=-1
        )

    return Model(
        name="radial_clock",
        dimension=2,
        params=p,
        drift=drift,
        default_dt=1e-3,
        default_ic=(1.2, 0.0),
        default_settle=30.0,
    )


# ---------------------------------------------------------------------------
# Fixed points and the model registry
# ---------------------------------------------------------------------------

def fixed_points(model: Model) -> list[StateLabel]:
    """Closed-form fixed points for the Duffing and Lorenz models."""
    if model.name == "duffing":
        return [
            StateLabel("stable_fixed_point", np.array([-1.0, 0.0])),
            StateLabel("stable_fixed_point", np.array([1.0, 0.0])),
            StateLabel("unstable_fixed_point", np.array([0.0, 0.0])),
        ]
    if model.name == "lorenz":
        p = model.params
        origin = StateLabel("unstable_fixed_point", np.zeros(3))
        if p.r <= 1.0:
            return [StateLabel("stable_fixed_point", np.zeros(3))]
        s = np.sqrt(p.b * (p.r - 1.0))
        return [
            StateLabel("stable_fixed_point", np.array([-s, -s, p.r - 1.0])),
            StateLabel("stable_fixed_point", np.array([s, s, p.r - 1.0])),
            origin,
        ]
    raise UnsupportedModelError(
        f"no closed-form fixed points for model '{model.name}'"
    )


MODEL_BUILDERS = {
    "duffing": duffing,
    "reduced_hh": reduced_hh,
    "thalamic": thalamic,
    "coupled_thalamic": coupled_thalamic,
    "lorenz": lorenz,
    "radial_clock": radial_clock,
}


def get_model(name: str, **overrides) -> Model:
    """Build a registered model by identifier, with parameter overrides."""
    try:
        builder = MODEL_BUILDERS[name]
    except KeyError:
        known = ", ".join(sorted(MODEL_BUILDERS))
        raise UnsupportedModelError(f"unknown model '{name}' (known: {known})")
    return builder(**overrides)
