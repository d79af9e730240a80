"""Locally weighted binary classifier over a training set.

A query state is normalized, given Gaussian kernel weights against the
stored samples, and classified by thresholding the weighted label sum:
u1 when sum(w_i * U_i) > 0.5*u1 for ON/OFF training sets, u1 when
sum(w_i * U_i) > 0 for bang-bang sets; ties fall to the OFF / -u1 side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .training import TrainingSet

_TINIEST_NORMAL = np.finfo(float).tiny


@dataclass(frozen=True)
class Normalizer:
    """Per-dimension affine map x -> (x - mean) / scale."""

    mean: np.ndarray
    scale: np.ndarray
    mode: str = "std"

    def __call__(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean) / self.scale


def identity_normalizer(dimension: int) -> Normalizer:
    return Normalizer(np.zeros(dimension), np.ones(dimension), mode="identity")


def fit_normalizer(data, mode: str = "std") -> Normalizer:
    """Fit per-dimension centering and scaling from a training set.

    mode "std" divides by the standard deviation, "variance_verbatim" by the
    variance, "identity" leaves coordinates untouched.
    """
    samples = data.samples if isinstance(data, TrainingSet) else np.asarray(data, dtype=float)
    dim = samples.shape[1]
    if mode == "identity":
        return identity_normalizer(dim)
    if mode not in ("std", "variance_verbatim"):
        raise ValueError(f"unknown normalizer mode '{mode}'")
    if len(samples) < 2:
        raise ValueError("need at least 2 samples to fit a non-identity normalizer")
    mean = samples.mean(axis=0)
    std = samples.std(axis=0)
    zero = np.flatnonzero(std == 0.0)
    if zero.size:
        raise ValueError(
            f"zero spread in dimension(s) {zero.tolist()}; cannot normalize"
        )
    scale = std if mode == "std" else std**2
    return Normalizer(mean, scale, mode=mode)


@dataclass(frozen=True)
class Classifier:
    """Training set + bandwidth + normalizer; maps a state to a control value.

    The decision threshold is fixed by the training set's algorithm: 0.5*u1
    for ON/OFF sets, 0 for bang-bang sets.
    """

    training_set: TrainingSet
    tau: float
    normalizer: Normalizer

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("bandwidth tau must be > 0")
        object.__setattr__(self, "_xn", self.normalizer(self.training_set.samples))
        object.__setattr__(self, "_labels", np.asarray(self.training_set.labels, dtype=float))

    @property
    def threshold(self) -> float:
        ts = self.training_set
        return 0.5 * ts.u_on if ts.algorithm == 1 else 0.0

    def _sq_distances(self, x) -> np.ndarray:
        z = self.normalizer(x)
        # per-dimension accumulation of exact squared differences; cheaper
        # than materializing a (..., N, d) difference tensor in batch mode
        d2 = np.zeros(z.shape[:-1] + (len(self._xn),))
        for k in range(self._xn.shape[1]):
            diff = z[..., k, None] - self._xn[:, k]
            d2 += diff * diff
        return d2

    def weights(self, x) -> np.ndarray:
        """Normalized kernel weights of every stored sample for query x.

        If every raw weight underflows to zero the nearest sample gets
        weight one, so far-field queries still classify.
        """
        d2 = self._sq_distances(x)
        raw = np.exp(-d2 / (2.0 * self.tau))
        total = raw.sum(axis=-1, keepdims=True)
        dead = total[..., 0] < _TINIEST_NORMAL
        if np.any(dead):
            raw = np.where(dead[..., None], 0.0, raw)
            nearest = np.argmin(d2, axis=-1)
            one_hot = np.zeros_like(raw)
            np.put_along_axis(one_hot, nearest[..., None], 1.0, axis=-1)
            raw = np.where(dead[..., None], one_hot, raw)
            total = np.where(dead[..., None], 1.0, total)
        return raw / total

    def classify(self, x) -> float | np.ndarray:
        """Control value for a query state (or batch of query states)."""
        x = np.asarray(x, dtype=float)
        score = self.weights(x) @ self._labels
        ts = self.training_set
        out = np.where(score > self.threshold, ts.u_on, ts.u_off)
        return float(out) if x.ndim == 1 else out

    def __call__(self, x):
        return self.classify(x)


def decision_region_grid(classifier: Classifier, box, resolution: int,
                         dims=(0, 1), base_point=None):
    """Classifier output on a regular 2D grid.

    `box` gives (min, max) per grid axis; for models with more than two
    states, `dims` selects the projected coordinates and `base_point`
    supplies the held-fixed values of the rest.
    """
    (x_lo, x_hi), (y_lo, y_hi) = box
    xs = np.linspace(x_lo, x_hi, resolution)
    ys = np.linspace(y_lo, y_hi, resolution)
    dim = classifier.training_set.dimension
    if base_point is None:
        if dim != 2:
            raise ValueError("base_point required for models with n > 2")
        base_point = np.zeros(dim)
    grid_x, grid_y = np.meshgrid(xs, ys, indexing="ij")
    queries = np.tile(np.asarray(base_point, dtype=float), (resolution, resolution, 1))
    queries[..., dims[0]] = grid_x
    queries[..., dims[1]] = grid_y
    values = classifier.classify(queries.reshape(-1, dim)).reshape(resolution, resolution)
    return xs, ys, values


def write_region_csv(path, xs, ys, values) -> None:
    """Write the decision grid as "x,y,u" rows."""
    with open(path, "w") as fh:
        fh.write("x,y,u\n")
        for i, x in enumerate(xs):
            for j, y in enumerate(ys):
                fh.write(f"{float(x)!r},{float(y)!r},{float(values[i, j])!r}\n")
