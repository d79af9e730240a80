"""Training-set generation for the two labeling algorithms.

Algorithm 1 labels a sampled state ON/OFF by short free and forced probes:
if the reward does not drop under free flow the label is OFF, otherwise the
probe that reaches the higher reward wins (ties resolve to OFF).
Algorithm 2 probes with +u1 and -u1 and keeps whichever maximizes the
reward, ties resolving to +u1.

Rewards are either instantaneous (distance to a target state, optionally in
normalized coordinates) or event-based (spike times measured by integrating
onward with zero control).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import rng
from .integrate import NoiseSpec, first_event_times, integrate_span, _rk4
from .models import Model, mean_population_state


class TrainingAbortError(RuntimeError):
    """Too many probe timeouts while building a training set."""


@dataclass
class TrainingSet:
    """Sampled states with their binary control labels.

    Labels take values in {u_on, 0} for algorithm 1 and {u_on, -u_on} for
    algorithm 2.  `normalizer` carries the statistics fitted on the samples
    when the scenario normalizes state coordinates; `tau_default` is the
    bandwidth the producing scenario recommends for classification.
    """

    samples: np.ndarray
    labels: np.ndarray
    algorithm: int
    u_on: float
    probe_dt: float
    provenance: dict = field(default_factory=dict)
    normalizer: object = None
    tau_default: float | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        self.labels = np.asarray(self.labels, dtype=float)
        if self.algorithm not in (1, 2):
            raise ValueError("algorithm must be 1 or 2")
        if self.u_on <= 0:
            raise ValueError("u_on must be > 0")
        if len(self.samples) != len(self.labels) or len(self.samples) == 0:
            raise ValueError("samples and labels must be non-empty and equal length")
        allowed = {self.u_on, self.u_off}
        if not set(np.unique(self.labels)) <= allowed:
            raise ValueError(f"labels must lie in {sorted(allowed)}")

    @property
    def u_off(self) -> float:
        return 0.0 if self.algorithm == 1 else -self.u_on

    @property
    def n(self) -> int:
        return len(self.samples)

    @property
    def dimension(self) -> int:
        return self.samples.shape[1]


# ---------------------------------------------------------------------------
# Rewards
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DistanceReward:
    """Negative Euclidean distance to a target, maximal (zero) at the target.

    When `normalizer` is set, both state and target are mapped through it
    before taking the norm, so differently scaled coordinates contribute
    comparably.
    """

    target: np.ndarray
    normalizer: Callable | None = None

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        target = np.asarray(self.target, dtype=float)
        if self.normalizer is not None:
            x = self.normalizer(x)
            target = self.normalizer(target)
        values = -np.linalg.norm(x - target, axis=-1)
        return values, np.ones(np.shape(values), dtype=bool)

    def __call__(self, x):
        return self.evaluate(x)[0]


@dataclass(frozen=True)
class SpikeTimeReward:
    """Negative time until the event coordinate next reaches a maximum."""

    model: Model
    dt: float
    timeout: float

    def evaluate(self, x):
        t = first_event_times(self.model, x, self.dt, self.timeout)[..., 0]
        ok = np.isfinite(t)
        return np.where(ok, -t, -np.inf), ok

    def __call__(self, x):
        values, ok = self.evaluate(np.atleast_2d(np.asarray(x, dtype=float)))
        return float(values[0]) if np.asarray(x).ndim == 1 else values


@dataclass(frozen=True)
class SpikeSpreadReward:
    """Spread between the earliest and latest first spikes of a population."""

    model: Model
    dt: float
    timeout: float

    def evaluate(self, x):
        m = self.model.params.m
        times = first_event_times(self.model, x, self.dt, self.timeout,
                                  coords=range(m))
        ok = np.isfinite(times).all(axis=-1)
        spread = times.max(axis=-1) - times.min(axis=-1)
        return np.where(ok, spread, -np.inf), ok

    def __call__(self, x):
        values, ok = self.evaluate(np.atleast_2d(np.asarray(x, dtype=float)))
        return float(values[0]) if np.asarray(x).ndim == 1 else values


def reward_distance(x, target, normalizer=None) -> float:
    """Negative Euclidean distance between x and target (optionally normalized)."""
    value = DistanceReward(np.asarray(target, dtype=float), normalizer)(np.asarray(x, dtype=float))
    return float(value)


def reward_negative_spike_time(model: Model, x, dt: float, timeout: float) -> float:
    """Negative of the next spike time from state x."""
    values, ok = SpikeTimeReward(model, dt, timeout).evaluate(
        np.atleast_2d(np.asarray(x, dtype=float)))
    if not ok[0]:
        from .integrate import SpikeTimeoutError
        raise SpikeTimeoutError(f"no spike within {timeout} time units")
    return float(values[0])


def reward_spike_spread(model: Model, x_full, dt: float, timeout: float) -> float:
    """|earliest - latest| first spike time across a coupled population."""
    values, ok = SpikeSpreadReward(model, dt, timeout).evaluate(
        np.atleast_2d(np.asarray(x_full, dtype=float)))
    if not ok[0]:
        from .integrate import SpikeTimeoutError
        raise SpikeTimeoutError(f"population did not fully spike within {timeout} ms")
    return float(values[0])


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UniformBoxSampler:
    """Uniform draws from an axis-aligned box, keyed by (seed, draw_index)."""

    bounds: tuple
    seed: int

    @property
    def dimension(self) -> int:
        return len(self.bounds)

    def draw(self, n: int, draw_index: int = 0) -> np.ndarray:
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        u = rng.uniform(self.seed, rng.entity_stream(rng.SAMPLER), draw_index,
                        (n, self.dimension))
        return lo + u * (hi - lo)

    def describe(self) -> str:
        spans = "x".join(f"[{b[0]:g},{b[1]:g}]" for b in self.bounds)
        return f"uniform_box {spans}"


@dataclass(frozen=True)
class LimitCycleSampler:
    """States drawn along a limit cycle at stratified random phases."""

    cycle: object  # baselines.LimitCycle
    seed: int

    @property
    def dimension(self) -> int:
        return self.cycle.points.shape[1]

    def draw(self, n: int, draw_index: int = 0) -> np.ndarray:
        jitter = rng.uniform(self.seed, rng.entity_stream(rng.SAMPLER),
                             draw_index, n)
        phase_times = (np.arange(n) + jitter) / n * self.cycle.period
        return np.stack([self.cycle.state_at_time(t) for t in phase_times])

    def describe(self) -> str:
        return f"on_limit_cycle period={self.cycle.period:.6g}"


@dataclass(frozen=True)
class PopulationSnapshotSampler:
    """Full population states snapshotted along one near-synchronized cycle.

    Starting from `x0` (a nearly synchronized population), the uncontrolled
    dynamics are integrated over one period and sampled at stratified random
    times, so the drawn states cover every phase of the collective
    oscillation.
    """

    model: Model
    x0: np.ndarray
    period: float
    dt: float
    seed: int

    @property
    def dimension(self) -> int:
        return self.model.dimension

    def draw(self, n: int, draw_index: int = 0) -> np.ndarray:
        jitter = rng.uniform(self.seed, rng.entity_stream(rng.SAMPLER),
                             draw_index, n)
        # stratified times are increasing by construction, so one forward
        # integration pass visits every snapshot in order
        snap_times = (np.arange(n) + jitter) / n * self.period
        out = np.empty((n, self.model.dimension))
        x = np.asarray(self.x0, dtype=float).copy()
        t = 0.0
        for i, t_snap in enumerate(snap_times):
            if t_snap > t:
                x = integrate_span(self.model, x, 0.0, t_snap - t, self.dt)
                t = t_snap
            out[i] = x
        return out

    def describe(self) -> str:
        return f"population_snapshots period={self.period:.6g}"


# ---------------------------------------------------------------------------
# Training algorithms
# ---------------------------------------------------------------------------

_MAX_RESAMPLE_ROUNDS = 10


def _probe(model: Model, x, u, probe_dt: float) -> np.ndarray:
    """Advance a batch of states by the probe horizon under constant control."""
    h = min(probe_dt, model.default_dt)
    x = np.asarray(x, dtype=float)
    n_full = int(np.floor(probe_dt / h + 1e-9))
    for _ in range(n_full):
        x = _rk4(model, x, u, h)
    rem = probe_dt - n_full * h
    if rem > h * 1e-9:
        x = _rk4(model, x, u, rem)
    return x


def _label_algorithm1(model, reward, x0, probe_dt, u1):
    r0, ok0 = reward.evaluate(x0)
    x_off = _probe(model, x0, 0.0, probe_dt)
    r_off, ok_off = reward.evaluate(x_off)
    stay_off = r_off >= r0
    x_on = _probe(model, x0, u1, probe_dt)
    r_on, ok_on = reward.evaluate(x_on)
    labels = np.where(stay_off | ~(r_on > r_off), 0.0, u1)
    ok = ok0 & ok_off & (stay_off | ok_on)
    return labels, ok


def _label_algorithm2(model, reward, x0, probe_dt, u1):
    x_plus = _probe(model, x0, u1, probe_dt)
    x_minus = _probe(model, x0, -u1, probe_dt)
    r_plus, ok_plus = reward.evaluate(x_plus)
    r_minus, ok_minus = reward.evaluate(x_minus)
    labels = np.where(r_plus >= r_minus, u1, -u1)
    return labels, ok_plus & ok_minus


def _train(model, reward, sampler, n, probe_dt, u1, algorithm,
           store_reduction=None, tau_default=None, normalizer=None):
    if n < 1:
        raise ValueError("sample count N must be >= 1")
    if probe_dt <= 0 or u1 <= 0:
        raise ValueError("probe_dt and u1 must be positive")
    if sampler.dimension != model.dimension:
        raise ValueError(
            f"sampler dimension {sampler.dimension} does not match model "
            f"dimension {model.dimension}"
        )
    label_fn = _label_algorithm1 if algorithm == 1 else _label_algorithm2

    states = sampler.draw(n, draw_index=0)
    labels = np.empty(n)
    pending = np.arange(n)
    resampled = 0
    for round_idx in range(_MAX_RESAMPLE_ROUNDS + 1):
        new_labels, ok = label_fn(model, reward, states[pending], probe_dt, u1)
        labels[pending] = new_labels
        pending = pending[~ok]
        if pending.size == 0:
            break
        if round_idx == _MAX_RESAMPLE_ROUNDS:
            raise TrainingAbortError(
                f"{pending.size} samples still timing out after "
                f"{_MAX_RESAMPLE_ROUNDS} resampling rounds"
            )
        resampled += pending.size
        states[pending] = sampler.draw(n, draw_index=round_idx + 1)[pending]

    stored = states if store_reduction is None else store_reduction(states)
    provenance = {
        "model": model.name,
        "reward": type(reward).__name__,
        "sampler": sampler.describe(),
        "seed": sampler.seed,
        "resampled": resampled,
    }
    return TrainingSet(
        samples=stored,
        labels=labels,
        algorithm=algorithm,
        u_on=u1,
        probe_dt=probe_dt,
        provenance=provenance,
        normalizer=normalizer,
        tau_default=tau_default,
    )


def train_algorithm1(model, reward, sampler, n, probe_dt, u1, **kwargs) -> TrainingSet:
    """Label N sampled states ON/OFF by short free and forced reward probes."""
    return _train(model, reward, sampler, n, probe_dt, u1, algorithm=1, **kwargs)


def train_algorithm2(model, reward, sampler, n, probe_dt, u1, **kwargs) -> TrainingSet:
    """Label N sampled states +u1/-u1 by comparing both probe directions."""
    return _train(model, reward, sampler, n, probe_dt, u1, algorithm=2, **kwargs)


def population_training_reduction(m: int):
    """Reduction storing the population mean (v, h, r) instead of full states."""
    return lambda states: mean_population_state(states, m)


def corrupt_training_set(ts: TrainingSet, noise: NoiseSpec) -> TrainingSet:
    """Gaussian-perturb every stored sample; labels are untouched."""
    if noise.sigma == 0.0:
        return replace(ts, samples=ts.samples.copy(), labels=ts.labels.copy())
    z = np.stack([
        rng.normal(noise.seed, rng.entity_stream(rng.DATASET), i, ts.dimension)
        for i in range(ts.n)
    ])
    corrupted = ts.samples + noise.sigma * z
    provenance = dict(ts.provenance, corruption_sigma=noise.sigma,
                      corruption_seed=noise.seed)
    return replace(ts, samples=corrupted, labels=ts.labels.copy(),
                   provenance=provenance)


# ---------------------------------------------------------------------------
# Persistence (structured text, lossless round trip)
# ---------------------------------------------------------------------------

def save_training_set(ts: TrainingSet, path) -> None:
    lines = ["[provenance]"]
    lines.append(f"algorithm = {ts.algorithm}")
    lines.append(f"u_on = {ts.u_on!r}")
    lines.append(f"probe_dt = {ts.probe_dt!r}")
    for key in sorted(ts.provenance):
        lines.append(f"{key} = {ts.provenance[key]}")
    lines.append("")
    lines.append("[normalizer]")
    if ts.normalizer is None:
        lines.append("mode = none")
    else:
        lines.append(f"mode = {ts.normalizer.mode}")
        lines.append("mean = " + " ".join(repr(float(v)) for v in ts.normalizer.mean))
        lines.append("scale = " + " ".join(repr(float(v)) for v in ts.normalizer.scale))
    lines.append("")
    lines.append("[classifier]")
    lines.append(f"tau = {'none' if ts.tau_default is None else repr(ts.tau_default)}")
    lines.append("")
    lines.append("[samples]")
    for x, u in zip(ts.samples, ts.labels):
        lines.append(" ".join(repr(float(v)) for v in x) + " | " + repr(float(u)))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_training_set(path) -> TrainingSet:
    from .classifier import Normalizer  # deferred to avoid an import cycle

    sections: dict[str, list[str]] = {}
    current = None
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1]
                sections[current] = []
            else:
                sections[current].append(line)

    meta = {}
    for line in sections["provenance"]:
        key, _, value = line.partition(" = ")
        meta[key] = value
    norm_meta = {}
    for line in sections.get("normalizer", []):
        key, _, value = line.partition(" = ")
        norm_meta[key] = value
    normalizer = None
    if norm_meta.get("mode", "none") != "none":
        normalizer = Normalizer(
            mean=np.array([float(v) for v in norm_meta["mean"].split()]),
            scale=np.array([float(v) for v in norm_meta["scale"].split()]),
            mode=norm_meta["mode"],
        )
    tau_line = sections.get("classifier", ["tau = none"])[0].partition(" = ")[2]
    tau_default = None if tau_line == "none" else float(tau_line)

    samples, labels = [], []
    for line in sections["samples"]:
        xs, _, u = line.partition(" | ")
        samples.append([float(v) for v in xs.split()])
        labels.append(float(u))

    provenance = {
        k: v for k, v in meta.items()
        if k not in ("algorithm", "u_on", "probe_dt")
    }
    for key in ("seed", "resampled"):
        if key in provenance:
            provenance[key] = int(provenance[key])
    if "corruption_sigma" in provenance:
        provenance["corruption_sigma"] = float(provenance["corruption_sigma"])
    if "corruption_seed" in provenance:
        provenance["corruption_seed"] = int(provenance["corruption_seed"])
    return TrainingSet(
        samples=np.array(samples),
        labels=np.array(labels),
        algorithm=int(meta["algorithm"]),
        u_on=float(meta["u_on"]),
        probe_dt=float(meta["probe_dt"]),
        provenance=provenance,
        normalizer=normalizer,
        tau_default=tau_default,
    )
