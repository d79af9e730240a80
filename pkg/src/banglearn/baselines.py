"""Classical comparison controllers and phase-response machinery.

The phase response curve is measured by direct perturbation: nudge the first
coordinate at a known phase, integrate perturbed and unperturbed copies for
several periods, and convert the asymptotic spike-time shift into a phase
shift.  Positive values mean an impulse advances the next spike
(theta_dot = omega + Z(theta) * u convention); the radial isochron clock,
whose response is exactly -sin(theta), pins this convention in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .integrate import (
    SpikeTimeoutError,
    Trajectory,
    _rk4,
    _steps,
    detect_spike_time,
    first_event_times,
    integrate_span,
)
from .models import Model


class NoPeriodicityError(RuntimeError):
    """Successive periods disagree; no stable limit cycle was found."""


class OffCycleError(ValueError):
    """Queried state lies too far from the stored limit cycle."""


@dataclass(frozen=True)
class LimitCycle:
    """One period of an attracting orbit, sampled uniformly in time.

    Phase zero is anchored at the spike (the maximum of the event
    coordinate); `points[k]` sits at phase 2*pi*k/len(points).  `mean` and
    `scale` are per-dimension statistics of the stored points, used to
    normalize distances for phase lookups.
    """

    model_name: str
    period: float
    points: np.ndarray
    mean: np.ndarray
    scale: np.ndarray

    @property
    def n_phases(self) -> int:
        return len(self.points)

    @property
    def phases(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_phases) / self.n_phases

    def state_at_time(self, t: float) -> np.ndarray:
        """Linear interpolation of the cycle at time t after the spike."""
        s = (t % self.period) / self.period * self.n_phases
        k = int(np.floor(s)) % self.n_phases
        frac = s - np.floor(s)
        nxt = (k + 1) % self.n_phases
        return (1.0 - frac) * self.points[k] + frac * self.points[nxt]

    def state_at_phase(self, theta: float) -> np.ndarray:
        return self.state_at_time(theta / (2.0 * np.pi) * self.period)


def find_limit_cycle(model: Model, dt: float | None = None,
                     settle_time: float | None = None, x0=None,
                     n_phases: int = 256) -> LimitCycle:
    """Settle onto the attracting orbit and sample one period of it.

    Two successive spike-to-spike periods must agree to within 0.1%;
    otherwise the trajectory has not converged to a cycle and a
    NoPeriodicityError is raised.
    """
    dt = dt if dt is not None else model.default_dt
    settle_time = settle_time if settle_time is not None else model.default_settle
    x0 = np.asarray(x0 if x0 is not None else model.default_ic, dtype=float)

    x = integrate_span(model, x0, 0.0, settle_time, dt)
    t_first = detect_spike_time(model, x, dt, timeout=settle_time)
    x_spike = integrate_span(model, x, 0.0, t_first, dt)
    t1 = detect_spike_time(model, x_spike, dt, timeout=settle_time)
    x_spike = integrate_span(model, x_spike, 0.0, t1, dt)
    t2 = detect_spike_time(model, x_spike, dt, timeout=settle_time)
    if abs(t2 - t1) > 1e-3 * t2:
        raise NoPeriodicityError(
            f"successive periods {t1:.6g} and {t2:.6g} differ by more than 0.1%"
        )
    period = t2

    points = np.empty((n_phases, model.dimension))
    x = x_spike
    t = 0.0
    for k in range(n_phases):
        t_k = k * period / n_phases
        if t_k > t:
            x = integrate_span(model, x, 0.0, t_k - t, dt)
            t = t_k
        points[k] = x
    scale = points.std(axis=0)
    scale = np.where(scale > 0.0, scale, 1.0)
    return LimitCycle(
        model_name=model.name,
        period=float(period),
        points=points,
        mean=points.mean(axis=0),
        scale=scale,
    )


def phase_of_state(cycle: LimitCycle, x, max_distance: float = 2.0) -> float:
    """Phase of the nearest cycle point in normalized coordinates.

    Ties go to the smaller phase.  States farther than `max_distance`
    (normalized units) from every cycle point raise OffCycleError.
    """
    z = (np.asarray(x, dtype=float) - cycle.mean) / cycle.scale
    zp = (cycle.points - cycle.mean) / cycle.scale
    dist = np.linalg.norm(zp - z, axis=1)
    k = int(np.argmin(dist))
    if dist[k] > max_distance:
        raise OffCycleError(
            f"state is {dist[k]:.3g} normalized units from the cycle "
            f"(bound {max_distance:g})"
        )
    return float(2.0 * np.pi * k / cycle.n_phases)


# ---------------------------------------------------------------------------
# Phase response curve by direct perturbation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PRC:
    """Phase response samples Z(theta) on a uniform grid, plus Z'(theta)."""

    phases: np.ndarray
    values: np.ndarray
    derivative: np.ndarray
    period: float
    impulse: float
    cycle: LimitCycle

    def interp(self, theta) -> np.ndarray:
        """Linear interpolation of Z on the periodic phase grid."""
        return self._interp(self.values, theta)

    def interp_derivative(self, theta) -> np.ndarray:
        return self._interp(self.derivative, theta)

    def _interp(self, table, theta):
        theta = np.asarray(theta, dtype=float) % (2.0 * np.pi)
        n = len(table)
        s = theta / (2.0 * np.pi) * n
        k = np.floor(s).astype(int) % n
        frac = s - np.floor(s)
        return (1.0 - frac) * table[k] + frac * table[(k + 1) % n]

    def negated(self) -> "PRC":
        """Same curve under the opposite time-shift sign convention."""
        return PRC(self.phases, -self.values, -self.derivative, self.period,
                   self.impulse, self.cycle)


def compute_prc_direct(model: Model, cycle: LimitCycle, impulse: float = 1e-3,
                       k_periods: int = 8, dt: float | None = None) -> PRC:
    """Measure Z(theta) by perturbing the first coordinate at each phase.

    Perturbed and unperturbed copies start from every stored cycle point and
    run side by side until their k-th spike; the spike-time difference
    (unperturbed minus perturbed, so phase advances are positive) scaled by
    (2*pi/T)/impulse is the PRC sample.  Z' comes from centered differences
    on the periodic grid.
    """
    if cycle.n_phases < 16:
        raise ValueError("need at least 16 phase samples for a PRC")
    dt = dt if dt is not None else model.default_dt
    base = cycle.points
    pert = base.copy()
    pert[:, 0] += impulse
    stack = np.vstack([base, pert])
    timeout = (k_periods + 2.5) * cycle.period
    times = first_event_times(model, stack, dt, timeout, n_events=k_periods)[:, 0]
    if np.isnan(times).any():
        bad = np.flatnonzero(np.isnan(times)) % cycle.n_phases
        raise SpikeTimeoutError(
            f"PRC trajectories at phases {sorted(set(bad.tolist()))} left the "
            f"spiking regime"
        )
    n = cycle.n_phases
    shift = times[:n] - times[n:]
    z = (2.0 * np.pi / cycle.period) * shift / impulse
    dtheta = 2.0 * np.pi / n
    zprime = (np.roll(z, -1) - np.roll(z, 1)) / (2.0 * dtheta)
    return PRC(cycle.phases, z, zprime, cycle.period, impulse, cycle)


def prc_sign_control(prc: PRC, theta: float, u1: float) -> float:
    """Bang-bang phase-response law -sign(Z(theta)) * u1 (Z = 0 gives +u1)."""
    z = float(prc.interp(theta))
    return float(u1) if z <= 0.0 else -float(u1)


def prc_sign_controller(prc: PRC, u1: float, max_distance: float = 2.0):
    """State-feedback wrapper: look up the phase, then apply the sign law."""

    def controller(x):
        theta = phase_of_state(prc.cycle, x, max_distance=max_distance)
        return prc_sign_control(prc, theta, u1)

    return controller


# ---------------------------------------------------------------------------
# Classical comparison controllers
# ---------------------------------------------------------------------------

def fully_actuated_control(model: Model, x, target, gain: float) -> np.ndarray:
    """Feedback U(x) = -F(x) - gain*(x - target) acting on every component."""
    if gain <= 0:
        raise ValueError("gain must be positive")
    x = np.asarray(x, dtype=float)
    return -model.drift(x) - gain * (x - np.asarray(target, dtype=float))


def run_fully_actuated(model: Model, x0, target, gain: float, dt: float,
                       duration: float) -> Trajectory:
    """Integrate the fully actuated closed loop, recording U per step.

    The feedback cancels the drift exactly, so the closed loop is the linear
    contraction dx/dt = -gain*(x - target); it is integrated as such, with
    the (vector) control that realizes it recorded at each step start.
    """
    target = np.asarray(target, dtype=float)
    x = np.asarray(x0, dtype=float).copy()
    steps = _steps(duration, dt)
    times = np.concatenate([[0.0], np.cumsum(steps)])
    states = np.empty((len(steps) + 1, model.dimension))
    controls = np.empty((len(steps), model.dimension))
    states[0] = x
    for k, h in enumerate(steps):
        controls[k] = fully_actuated_control(model, x, target, gain)
        x = target + (x - target) * np.exp(-gain * h)
        states[k + 1] = x
    return Trajectory(times, states, controls)


def unstable_orbit_period(model: Model, inner, outer, dt: float | None = None,
                          fate_time: float = 300.0,
                          spike_threshold: float = -40.0) -> tuple[float, np.ndarray]:
    """Period of the repelling orbit separating a resting and a spiking basin.

    Bisects along the segment from `inner` (converges to the rest state) to
    `outer` (converges to the spiking orbit), classifying each endpoint by
    whether the voltage still exceeds `spike_threshold` late in a long free
    run.  The bisected point lies on the basin boundary, i.e. on the
    unstable periodic orbit; the trajectory from it shadows that orbit for
    several loops, and the spacing of successive voltage maxima gives the
    period.  Returns (period, boundary_point).
    """
    dt = dt if dt is not None else model.default_dt
    inner = np.asarray(inner, dtype=float)
    outer = np.asarray(outer, dtype=float)
    tail = max(50.0 * dt, fate_time / 6.0)

    def spikes(lam: float) -> bool:
        x = inner + lam * (outer - inner)
        x = integrate_span(model, x, 0.0, fate_time - tail, dt)
        peak = -np.inf
        steps = int(round(tail / dt))
        for _ in range(steps):
            x = _rk4(model, x, 0.0, dt)
            peak = max(peak, float(x[model.event_coordinate]))
        return peak > spike_threshold

    lo, hi = 0.0, 1.0
    if spikes(lo) or not spikes(hi):
        raise ValueError("endpoints do not bracket the basin boundary")
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if spikes(mid):
            hi = mid
        else:
            lo = mid
    boundary = inner + 0.5 * (lo + hi) * (outer - inner)

    t1 = first_event_times(model, boundary, dt, timeout=fate_time, n_events=1)[0, 0]
    t2 = first_event_times(model, boundary, dt, timeout=fate_time, n_events=2)[0, 0]
    if np.isnan([t1, t2]).any():
        raise SpikeTimeoutError("boundary trajectory stopped spiking")
    # only the first full loop is trusted: the orbit repels at roughly the
    # millisecond scale, so even a machine-precision bisection shadows it
    # for little more than one revolution
    return float(t2 - t1), boundary


def lyapunov_control_lorenz(x, sigma: float, r: float) -> float:
    """Stabilizing feedback u = -(sigma + r) * y for the Lorenz origin."""
    return float(-(sigma + r) * np.asarray(x, dtype=float)[..., 1])


def lyapunov_controller_lorenz(model: Model):
    p = model.params
    return lambda x: lyapunov_control_lorenz(x, p.sigma, p.r)


# ---------------------------------------------------------------------------
# Desynchronization policy validation
# ---------------------------------------------------------------------------

def validate_desync_policy(classifier, cycle: LimitCycle, prc: PRC,
                           exclude_fraction: float = 0.05) -> float:
    """Fraction of cycle phases where the policy sign matches sign(Z').

    Phases where |Z'| falls below `exclude_fraction` of its maximum are left
    out, since the predicted control there is indeterminate.
    """
    controls = np.asarray(classifier.classify(cycle.points), dtype=float)
    zp = prc.derivative
    include = np.abs(zp) >= exclude_fraction * np.abs(zp).max()
    if not include.any():
        raise ValueError("Z' is numerically flat; nothing to validate against")
    agree = np.sign(controls[include]) == np.sign(zp[include])
    return float(np.count_nonzero(agree) / np.count_nonzero(include))


def write_prc_csv(prc: PRC, path) -> None:
    """Write the PRC as "theta,Z,Zprime" rows."""
    with open(path, "w") as fh:
        fh.write("theta,Z,Zprime\n")
        for th, z, zp in zip(prc.phases, prc.values, prc.derivative):
            fh.write(f"{float(th)!r},{float(z)!r},{float(zp)!r}\n")
