"""Sliding-window (delay) embeddings, maxmin landmarks and PCA."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._accel import jit


class WindowError(ValueError):
    pass


@dataclass
class TimeSeries:
    values: np.ndarray
    t0: float = 0.0
    dt: float = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if not self.dt > 0:
            raise WindowError("dt must be positive")
        if not np.all(np.isfinite(self.values)):
            raise WindowError("time series values must be finite")

    def __len__(self):
        return len(self.values)

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(len(self.values))


@dataclass(frozen=True)
class SlidingWindowConfig:
    N: int
    tau_steps: int = 1
    stride: int = 1

    def __post_init__(self):
        if self.N < 0 or self.tau_steps < 1 or self.stride < 1:
            raise WindowError("need N >= 0, tau_steps >= 1 and stride >= 1")

    @property
    def span(self):
        return self.N * self.tau_steps


@dataclass
class PointCloud:
    points: np.ndarray
    times: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        if len(self.points) < 1:
            raise WindowError("a point cloud needs at least one point")

    def __len__(self):
        return len(self.points)

    @property
    def dim(self):
        return self.points.shape[1]

    def subset(self, idx):
        return PointCloud(self.points[idx], None if self.times is None else self.times[idx])


@dataclass
class LandmarkSet:
    indices: np.ndarray
    cover_radius: float


def window_count(n, cfg):
    return (n - cfg.span - 1) // cfg.stride + 1


def sliding_window(ts, cfg):
    """Rows (g(t_j), g(t_j + tau), ..., g(t_j + N tau)), t_j advancing by stride * dt."""
    n = len(ts)
    if cfg.span >= n:
        raise WindowError(f"window of {cfg.span + 1} samples exceeds series length {n}")
    J = window_count(n, cfg)
    idx = (np.arange(J) * cfg.stride)[:, None] + (np.arange(cfg.N + 1) * cfg.tau_steps)[None, :]
    return PointCloud(ts.values[idx], ts.t0 + ts.dt * idx[:, 0])


@jit
def _maxmin_kernel(X, k, seed):
    n, m = X.shape
    idx = np.empty(k, dtype=np.int64)
    dist = np.empty(n)
    for i in range(n):
        s = 0.0
        for c in range(m):
            t = X[i, c] - X[seed, c]
            s += t * t
        dist[i] = np.sqrt(s)
    idx[0] = seed
    for j in range(1, k):
        best = 0
        for i in range(1, n):
            if dist[i] > dist[best]:
                best = i
        idx[j] = best
        for i in range(n):
            s = 0.0
            for c in range(m):
                t = X[i, c] - X[best, c]
                s += t * t
            s = np.sqrt(s)
            if s < dist[i]:
                dist[i] = s
    return idx, dist.max()


def _maxmin_numpy(X, k, seed):
    dist = np.linalg.norm(X - X[seed], axis=1)
    idx = [seed]
    for _ in range(k - 1):
        best = int(np.argmax(dist))
        idx.append(best)
        dist = np.minimum(dist, np.linalg.norm(X - X[best], axis=1))
    return np.array(idx, dtype=np.int64), float(dist.max())


def maxmin_landmarks(cloud, k, seed_index=0, use_kernel=True):
    """Greedy farthest-point landmarks starting from ``seed_index``.

    Ties go to the lowest index, so the result is deterministic.
    """
    X = np.ascontiguousarray(getattr(cloud, "points", cloud), dtype=float)
    n = len(X)
    if not 1 <= k <= n:
        raise WindowError(f"cannot pick {k} landmarks from {n} points")
    if not 0 <= seed_index < n:
        raise WindowError("seed index out of range")
    fn = _maxmin_kernel if use_kernel else _maxmin_numpy
    idx, radius = fn(X, int(k), int(seed_index))
    return LandmarkSet(np.asarray(idx), float(radius))


def pca_project(cloud, k):
    """Project onto the top-k principal axes.

    Returns the projected cloud and the fraction of total variance carried by
    each retained component.
    """
    X = getattr(cloud, "points", cloud)
    X = np.asarray(X, dtype=float)
    if not 1 <= k <= X.shape[1]:
        raise WindowError(f"cannot keep {k} components of a {X.shape[1]}-dimensional cloud")
    Xc = X - X.mean(axis=0)
    _, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    var = s ** 2
    total = var.sum()
    frac = var[:k] / total if total > 0 else np.zeros(k)
    Y = Xc @ Vt[:k].T
    times = getattr(cloud, "times", None)
    return PointCloud(Y, times), frac
