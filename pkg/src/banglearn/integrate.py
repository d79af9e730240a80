"""Fixed-step integration, spike detection, and measurement noise.

The integrator is classical RK4 with the control held constant across each
step (zero-order hold).  Spike times are located to sub-step accuracy by a
quadratic fit through the three samples bracketing a sign change of the
discrete derivative of the event coordinate.

Measurement noise only ever corrupts what a controller *sees*: the dynamics
always advance on the true state, so replaying a recorded control sequence
open-loop reproduces the recorded states bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import rng
from .models import Model


class IntegrationBlowupError(RuntimeError):
    """Integration produced a non-finite state; carries the last good state."""

    def __init__(self, message, last_good_state=None, time=None, trajectory=None):
        super().__init__(message)
        self.last_good_state = last_good_state
        self.time = time
        self.trajectory = trajectory


class SpikeTimeoutError(RuntimeError):
    """No event (local maximum) occurred before the timeout."""


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian measurement noise: zero mean, standard deviation sigma.

    sigma = 0 reproduces the noiseless pipeline bitwise.
    """

    sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("noise standard deviation must be >= 0")


@dataclass
class Trajectory:
    """Time-stamped states plus the control applied over each step.

    `controls[k]` is held over [times[k], times[k+1]); it is a scalar for
    single-input runs or a state-size vector for fully actuated baselines.
    """

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        self.controls = np.asarray(self.controls, dtype=float)
        if len(self.states) != len(self.times):
            raise ValueError("states and times must have equal length")
        if len(self.controls) != len(self.times) - 1:
            raise ValueError("need exactly one control per step")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])


def _rk4(model: Model, x: np.ndarray, u, dt: float) -> np.ndarray:
    """One unvalidated RK4 step; broadcasts over leading axes of x."""
    f = model.vector_field
    k1 = f(x, u)
    k2 = f(x + 0.5 * dt * k1, u)
    k3 = f(x + 0.5 * dt * k2, u)
    k4 = f(x + dt * k3, u)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step(model: Model, x, u: float, dt: float) -> np.ndarray:
    """Classical 4-stage Runge-Kutta update with zero-order-hold control."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("state contains non-finite components")
    out = _rk4(model, x, u, dt)
    if not np.all(np.isfinite(out)):
        raise IntegrationBlowupError(
            f"integration of '{model.name}' blew up", last_good_state=x
        )
    return out


def _steps(duration: float, dt: float) -> list[float]:
    """Step sizes covering [0, duration]: constant dt plus one partial step."""
    if duration <= 0 or dt <= 0:
        raise ValueError("duration and dt must be positive")
    n_full = int(np.floor(duration / dt + 1e-9))
    rem = duration - n_full * dt
    steps = [dt] * n_full
    if rem > dt * 1e-9:
        steps.append(rem)
    return steps


def integrate_span(model: Model, x, u: float, span: float,
                   dt: float | None = None) -> np.ndarray:
    """Endpoint of integrating with constant control u for `span` time units."""
    x = np.asarray(x, dtype=float)
    dt = dt if dt is not None else model.default_dt
    for h in _steps(span, min(dt, span)):
        x = _rk4(model, x, u, h)
    return x


def add_gaussian_noise(x, noise: NoiseSpec | None, draw_index: int) -> np.ndarray:
    """x + sigma*z with z standard normal, deterministic in (seed, draw_index)."""
    x = np.asarray(x, dtype=float)
    if noise is None or noise.sigma == 0.0:
        return x
    z = rng.normal(noise.seed, rng.entity_stream(rng.MEASUREMENT), draw_index,
                   x.shape)
    return x + noise.sigma * z


def simulate(model: Model, x0, controller: Callable[[np.ndarray], float],
             duration: float, dt: float,
             noise: NoiseSpec | None = None) -> Trajectory:
    """Closed-loop integration of a state-feedback controller.

    At every step the controller receives the measurement x + eps with
    eps ~ N(0, sigma^2 I); the dynamics advance on the true state.  The
    control value applied over each step is recorded.
    """
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (model.dimension,):
        raise ValueError("initial state has the wrong dimension")
    steps = _steps(duration, dt)
    times = np.concatenate([[0.0], np.cumsum(steps)])
    states = np.empty((len(steps) + 1, model.dimension))
    controls = np.empty(len(steps))
    states[0] = x

    noisy = noise is not None and noise.sigma > 0.0
    gen = rng.generator(noise.seed, rng.entity_stream(rng.MEASUREMENT)) if noisy else None

    for k, h in enumerate(steps):
        x_meas = x + noise.sigma * gen.standard_normal(x.shape) if noisy else x
        u = float(controller(x_meas))
        if not np.isfinite(u):
            raise ValueError(f"controller returned non-finite control at step {k}")
        x = _rk4(model, x, u, h)
        controls[k] = u
        states[k + 1] = x
        if not np.all(np.isfinite(x)):
            partial = Trajectory(times[: k + 2], states[: k + 2], controls[: k + 1])
            raise IntegrationBlowupError(
                f"closed-loop integration of '{model.name}' blew up at "
                f"t = {times[k + 1]:.6g}",
                last_good_state=states[k],
                time=times[k + 1],
                trajectory=partial,
            )
    return Trajectory(times, states, controls)


# ---------------------------------------------------------------------------
# Event (spike / local maximum) detection
# ---------------------------------------------------------------------------

def _quadratic_vertex_offset(y_prev, y_mid, y_next, dt):
    """Offset of the parabola vertex from the middle of three uniform samples."""
    den = y_prev - 2.0 * y_mid + y_next
    with np.errstate(divide="ignore", invalid="ignore"):
        off = 0.5 * dt * (y_prev - y_next) / den
    return np.where(den == 0.0, 0.0, off)


def first_event_times(model: Model, x0, dt: float, timeout: float,
                      coords=None, n_events: int = 1) -> np.ndarray:
    """Times of the n-th local maximum of each event coordinate, batched.

    x0 may be a single state or a (batch, n) array; `coords` lists the state
    components watched as independent event channels (default: the model's
    event coordinate).  Entries that see no n-th maximum before `timeout`
    are returned as NaN.
    """
    x = np.atleast_2d(np.asarray(x0, dtype=float)).copy()
    coords = [model.event_coordinate] if coords is None else list(coords)
    b = x.shape[0]
    counts = np.zeros((b, len(coords)), dtype=int)
    out = np.full((b, len(coords)), np.nan)

    y_prev = x[:, coords].copy()
    x = _rk4(model, x, 0.0, dt)
    y_mid = x[:, coords].copy()
    t_mid = dt
    while t_mid <= timeout + dt:
        x = _rk4(model, x, 0.0, dt)
        y_next = x[:, coords]
        bracket = (y_mid - y_prev > 0.0) & (y_next - y_mid <= 0.0)
        if bracket.any():
            counts[bracket] += 1
            hit = bracket & (counts == n_events) & np.isnan(out)
            if hit.any():
                t_star = t_mid + _quadratic_vertex_offset(y_prev, y_mid, y_next, dt)
                out[hit] = t_star[hit]
                if not np.isnan(out).any():
                    break
        y_prev, y_mid = y_mid, y_next.copy()
        t_mid += dt
    return out


def detect_spike_time(model: Model, x0, dt: float, timeout: float,
                      coordinate: int | None = None) -> float:
    """Time of the first local maximum of the event coordinate, zero control."""
    if timeout <= 0:
        raise ValueError("timeout must be positive")
    coords = [model.event_coordinate if coordinate is None else coordinate]
    t = first_event_times(model, x0, dt, timeout, coords=coords)[0, 0]
    if np.isnan(t):
        raise SpikeTimeoutError(
            f"no maximum of coordinate {coords[0]} within {timeout} time units"
        )
    return float(t)


def detect_population_spikes(model: Model, x0, dt: float, timeout: float) -> np.ndarray:
    """First spike time of every oscillator's voltage in a coupled population."""
    if timeout <= 0:
        raise ValueError("timeout must be positive")
    m = model.params.m
    times = first_event_times(model, x0, dt, timeout, coords=range(m))[0]
    if np.isnan(times).any():
        missing = np.flatnonzero(np.isnan(times))
        raise SpikeTimeoutError(
            f"oscillators {missing.tolist()} did not spike within {timeout} ms"
        )
    return times


def first_maximum_from_series(times, values) -> float:
    """Quadratic-interpolated first local maximum of a sampled series."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    d = np.diff(values)
    for k in range(1, len(d)):
        if d[k - 1] > 0.0 and d[k] <= 0.0:
            dt = times[k + 1] - times[k]
            off = _quadratic_vertex_offset(values[k - 1], values[k], values[k + 1], dt)
            return float(times[k] + off)
    raise SpikeTimeoutError("series contains no interior local maximum")


# ---------------------------------------------------------------------------
# Trajectory CSV export
# ---------------------------------------------------------------------------

def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Write "t,x1..xn,u" rows at full float precision (last row's u empty)."""
    n = traj.states.shape[1]
    scalar_u = traj.controls.ndim == 1
    if scalar_u:
        u_cols = ["u"]
    else:
        u_cols = [f"u{i + 1}" for i in range(traj.controls.shape[1])]
    header = ["t"] + [f"x{i + 1}" for i in range(n)] + u_cols
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for k in range(len(traj.times)):
            row = [repr(float(traj.times[k]))]
            row += [repr(float(v)) for v in traj.states[k]]
            if k < len(traj.controls):
                u = traj.controls[k]
                row += [repr(float(u))] if scalar_u else [repr(float(v)) for v in u]
            else:
                row += [""] * len(u_cols)
            fh.write(",".join(row) + "\n")


def read_trajectory_csv(path) -> Trajectory:
    """Inverse of :func:`write_trajectory_csv`."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        n = sum(1 for c in header if c.startswith("x"))
        n_u = len(header) - 1 - n
        times, states, controls = [], [], []
        for line in fh:
            cells = line.rstrip("\n").split(",")
            times.append(float(cells[0]))
            states.append([float(c) for c in cells[1: 1 + n]])
            u_cells = cells[1 + n:]
            if u_cells[0] != "":
                u = [float(c) for c in u_cells]
                controls.append(u[0] if n_u == 1 else u)
    return Trajectory(np.array(times), np.array(states), np.array(controls))
