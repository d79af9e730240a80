"""Closed-loop execution of a classifier and the metrics reported on runs.

Convergence is always judged on the true state, even when measurement noise
corrupts what the classifier sees.  Single-run metrics report the first
sample time inside the target ball; Monte-Carlo trials count a run as
converged only if its state is still inside the ball when the run ends,
since a noisy failing loop can drift through the target region without the
policy ever capturing it.

`run_trials` / `effectiveness` advance all initial conditions in one
vectorized batch.  Per-trial noise and initial conditions are keyed by
(master seed, trial index), so results do not depend on batch composition,
trial order, or worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rng
from .classifier import Classifier
from .integrate import NoiseSpec, Trajectory, _rk4, _steps, simulate
from .models import Model

_NOISE_CHUNK = 1024


@dataclass
class RunMetrics:
    """Summary of one closed-loop run against a target ball."""

    converged: bool
    convergence_time: float | None
    off_fraction: float
    control_energy: float
    final_distance: float

    def as_text(self) -> str:
        lines = [
            f"converged = {self.converged}",
            f"convergence_time = {'none' if self.convergence_time is None else repr(self.convergence_time)}",
            f"off_fraction = {self.off_fraction!r}",
            f"control_energy = {self.control_energy!r}",
            f"final_distance = {self.final_distance!r}",
        ]
        return "\n".join(lines)


def control_energy(traj: Trajectory, until: float | None = None) -> float:
    """Integral of the squared control, rectangle rule per held step."""
    dts = np.diff(traj.times)
    u = traj.controls
    u2 = u**2 if u.ndim == 1 else (u**2).sum(axis=1)
    if until is not None:
        keep = traj.times[:-1] < until - 1e-12
        dts, u2 = dts[keep], u2[keep]
    return float(np.sum(u2 * dts))


def off_fraction(traj: Trajectory, until: float | None = None) -> float:
    """Fraction of steps with zero control among steps starting before `until`."""
    u = traj.controls
    if u.ndim != 1:
        raise ValueError("off_fraction applies to scalar-control runs")
    if until is not None:
        if until > traj.times[-1] + 1e-9:
            raise ValueError("until exceeds the trajectory end")
        u = u[traj.times[:-1] < until]
    if len(u) == 0:
        return 1.0
    return float(np.count_nonzero(u == 0.0) / len(u))


def _distances(states, target, metric_scale=None):
    diff = states - target
    if metric_scale is not None:
        diff = diff / metric_scale
    return np.linalg.norm(diff, axis=-1)


def run_closed_loop(model: Model, classifier: Classifier, x0, dt: float,
                    duration: float, noise: NoiseSpec | None = None,
                    target=None, radius: float | None = None,
                    metric_scale=None) -> tuple[Trajectory, RunMetrics]:
    """Drive the model with the classifier and measure the paper's metrics.

    `metric_scale` optionally divides each coordinate before the distance to
    the target is taken (used where the scenario judges convergence in
    normalized coordinates).
    """
    traj = simulate(model, x0, classifier.classify, duration, dt, noise=noise)
    metrics = metrics_from_trajectory(traj, target, radius, metric_scale)
    return traj, metrics


def metrics_from_trajectory(traj: Trajectory, target=None,
                            radius: float | None = None,
                            metric_scale=None) -> RunMetrics:
    """Recompute RunMetrics from a recorded trajectory alone."""
    if target is None:
        return RunMetrics(False, None, off_fraction(traj), control_energy(traj),
                          float("nan"))
    if radius is None or radius <= 0:
        raise ValueError("a positive radius is required to assess convergence")
    target = np.asarray(target, dtype=float)
    dist = _distances(traj.states, target, metric_scale)
    inside = np.flatnonzero(dist <= radius)
    converged = inside.size > 0
    t_conv = float(traj.times[inside[0]]) if converged else None
    scalar_u = traj.controls.ndim == 1
    return RunMetrics(
        converged=converged,
        convergence_time=t_conv,
        off_fraction=off_fraction(traj, until=t_conv if converged else None)
        if scalar_u else float("nan"),
        control_energy=control_energy(traj),
        final_distance=float(dist[-1]),
    )


# ---------------------------------------------------------------------------
# Batched Monte-Carlo trials
# ---------------------------------------------------------------------------

@dataclass
class TrialBatch:
    """Per-trial convergence outcomes of a Monte-Carlo run.

    `converged` marks trials whose state ends the run inside the target
    ball; `convergence_time` is the first entry time (NaN if the ball was
    never reached).
    """

    converged: np.ndarray
    convergence_time: np.ndarray
    initial_conditions: np.ndarray
    master_seed: int
    stream_salt: int = 0

    @property
    def fraction(self) -> float:
        return float(np.count_nonzero(self.converged) / len(self.converged))

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            dim = self.initial_conditions.shape[1]
            cols = ["trial"] + [f"x{i + 1}_0" for i in range(dim)]
            fh.write(",".join(cols + ["converged", "convergence_time"]) + "\n")
            for i in range(len(self.converged)):
                ic = ",".join(repr(float(v)) for v in self.initial_conditions[i])
                t = "" if not self.converged[i] else repr(float(self.convergence_time[i]))
                fh.write(f"{i},{ic},{int(self.converged[i])},{t}\n")


def _trial_noise_stream(trial: int, salt: int) -> int:
    return rng.entity_stream(rng.TRIAL, trial + (salt << 14))


def _closed_loop_batch(model, classifier, x0s, dt, duration, sigma, seed,
                       target, radius, metric_scale, trial_ids, salt):
    """Advance a batch of closed loops; returns (converged, first_entry_time).

    A trial counts as converged when its state sits inside the target ball
    at the END of the run, i.e. the policy actually holds it there; merely
    passing through the ball is not convergence (measurement noise can push
    a failing loop through the target region transiently).  The first entry
    time is recorded for reporting.  Blown-up trials freeze and fail.  Each
    trial's noise comes from its own (seed, trial) stream, so outcomes are
    independent of batch composition.
    """
    b = x0s.shape[0]
    x = x0s.copy()
    target = np.asarray(target, dtype=float)
    t_first = np.full(b, np.nan)
    active = np.arange(b)

    noisy = sigma > 0.0
    if noisy:
        gens = [rng.generator(seed, _trial_noise_stream(t, salt)) for t in trial_ids]
        buffer = np.empty((b, _NOISE_CHUNK, x.shape[1]))
        buf_pos = _NOISE_CHUNK  # trigger refill on first use

    t = 0.0
    inside = np.zeros(b, dtype=bool)
    for h in _steps(duration, dt) + [0.0]:
        inside_now = _distances(x, target, metric_scale) <= radius
        fresh = inside_now & np.isnan(t_first[active])
        if np.any(fresh):
            t_first[active[fresh]] = t
        if h == 0.0 or active.size == 0:
            inside[active] = inside_now
            break
        if noisy:
            if buf_pos == _NOISE_CHUNK:
                for i, trial in enumerate(active):
                    buffer[i] = gens[trial].standard_normal((_NOISE_CHUNK, x.shape[1]))
                buf_pos = 0
            x_meas = x + sigma * buffer[: len(x), buf_pos]
            buf_pos += 1
        else:
            x_meas = x
        u = classifier.classify(x_meas)
        x_new = _rk4(model, x, u, h)
        bad = ~np.isfinite(x_new).all(axis=1)
        if np.any(bad):
            keep = ~bad  # blown-up trials freeze and count as failed
            active = active[keep]
            x_new = x_new[keep]
            if noisy:
                buffer = buffer[keep]
        x = x_new
        t += h
    return inside, t_first


def run_trials(model: Model, classifier: Classifier, ic_sampler, trials: int,
               dt: float, duration: float, target, radius: float,
               noise: NoiseSpec | None = None, master_seed: int = 0,
               metric_scale=None, stream_salt: int = 0,
               n_workers: int = 1) -> TrialBatch:
    """Monte-Carlo closed-loop trials from independently sampled ICs.

    Initial conditions and per-step measurement noise are derived per trial
    from `master_seed`, so any split of the trial range across workers
    produces identical results.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    ics = np.stack([
        ic_sampler.draw(1, draw_index=(stream_salt << 14) + t)[0]
        for t in range(trials)
    ])
    sigma = 0.0 if noise is None else noise.sigma
    noise_seed = master_seed if noise is None else noise.seed

    def run_block(lo, hi):
        return _closed_loop_batch(
            model, classifier, ics[lo:hi], dt, duration, sigma, noise_seed,
            target, radius, metric_scale, range(lo, hi), stream_salt,
        )

    if n_workers <= 1:
        converged, t_conv = run_block(0, trials)
    else:
        bounds = np.linspace(0, trials, n_workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            parts = list(pool.map(lambda b: run_block(*b),
                                  zip(bounds[:-1], bounds[1:])))
        converged = np.concatenate([p[0] for p in parts])
        t_conv = np.concatenate([p[1] for p in parts])
    return TrialBatch(converged, t_conv, ics, master_seed, stream_salt)


def effectiveness(model: Model, classifier: Classifier, ic_sampler, trials: int,
                  dt: float, duration: float, target, radius: float,
                  noise: NoiseSpec | None = None, master_seed: int = 0,
                  metric_scale=None, n_workers: int = 1) -> float:
    """Fraction of random initial conditions driven into the target ball."""
    return run_trials(model, classifier, ic_sampler, trials, dt, duration,
                      target, radius, noise=noise, master_seed=master_seed,
                      metric_scale=metric_scale, n_workers=n_workers).fraction
