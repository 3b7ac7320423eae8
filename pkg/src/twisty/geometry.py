"""Model surfaces, their charts and metrics, and the flows driving every example.

Charts
------
torus   (u, v) in [0, 2pi)^2
klein   (u, v) in [0, 2pi) x [0, pi], the quotient of the torus by
        kappa(u, v) = (u + pi, -v); on the circles v = 0 and v = pi the
        u-coordinate is taken mod pi
sphere  (phi, theta), azimuth phi in [0, 2pi), polar angle theta in [0, pi]
rp2     upper hemisphere theta in [0, pi/2], antipodes identified on the equator
genus2  points of the regular octagon of circumradius 1 centred at the origin,
        opposite sides glued by translation

Batch functions take ``(n, 2)`` coordinate arrays; the scalar API wraps them.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from ._accel import jit

TWO_PI = 2.0 * math.pi


class GeometryError(ValueError):
    pass


class Manifold(str, enum.Enum):
    TORUS = "torus"
    KLEIN = "klein"
    SPHERE = "sphere"
    RP2 = "rp2"
    GENUS2 = "genus2"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise GeometryError(f"unknown manifold {value!r}") from None


@dataclass(frozen=True)
class ManifoldPoint:
    manifold: Manifold
    coords: tuple

    def __post_init__(self):
        object.__setattr__(self, "manifold", Manifold.parse(self.manifold))
        c = tuple(float(x) for x in self.coords)
        if len(c) != 2 or not all(map(math.isfinite, c)):
            raise GeometryError("a chart point needs two finite coordinates")
        object.__setattr__(self, "coords", c)

    def reduced(self):
        return ManifoldPoint(self.manifold, tuple(reduce_coords(self.manifold, self.coords)[0]))


# --- genus-2 octagon -------------------------------------------------------------

OCTAGON_APOTHEM = math.cos(math.pi / 8)
# outward normals of sides 0..3; sides 4..7 have the opposite normals
OCTAGON_NORMALS = np.array([[math.cos(k * math.pi / 4), math.sin(k * math.pi / 4)] for k in range(4)])
# the identity and the eight side-pairing translations
OCTAGON_TRANSLATIONS = np.vstack([np.zeros((1, 2)),
                                  2 * OCTAGON_APOTHEM * OCTAGON_NORMALS,
                                  -2 * OCTAGON_APOTHEM * OCTAGON_NORMALS])


def octagon_vertices():
    ang = math.pi / 8 + np.arange(8) * math.pi / 4
    return np.c_[np.cos(ang), np.sin(ang)]


def _reduce_octagon(P):
    P = P.copy()
    a = OCTAGON_APOTHEM
    for _ in range(64):
        s = P @ OCTAGON_NORMALS.T
        hi = s >= a
        lo = s < -a
        if not (hi.any() or lo.any()):
            return P
        # move each offending point across its worst side only
        viol = np.where(hi, s - a, 0.0) + np.where(lo, -a - s, 0.0)
        k = np.argmax(viol, axis=1)
        rows = np.nonzero(viol.max(axis=1) > 0)[0]
        sign = np.where(hi[rows, k[rows]], -1.0, 1.0)
        P[rows] += (sign * 2 * a)[:, None] * OCTAGON_NORMALS[k[rows]]
    raise GeometryError("octagon reduction did not converge")


@jit
def _octagon_walk(start, step, n, normals, a):
    """Straight-line flow on the octagon surface, re-entering through paired sides."""
    out = np.empty((n, 2))
    x = start[0]
    y = start[1]
    for k in range(n):
        if k > 0:
            x += step[0]
            y += step[1]
        for _ in range(64):
            worst = -1.0
            side = -1
            sign = 0.0
            for i in range(4):
                s = x * normals[i, 0] + y * normals[i, 1]
                if s >= a and s - a > worst:
                    worst = s - a
                    side = i
                    sign = -1.0
                elif s < -a and -a - s > worst:
                    worst = -a - s
                    side = i
                    sign = 1.0
            if side < 0:
                break
            x += sign * 2.0 * a * normals[side, 0]
            y += sign * 2.0 * a * normals[side, 1]
        out[k, 0] = x
        out[k, 1] = y
    return out


# --- chart reduction -------------------------------------------------------------

def _mod(x, period):
    r = np.mod(x, period)
    return np.where(r >= period, 0.0, r)


def reduce_coords(manifold, coords):
    """Reduce chart coordinates to the fundamental domain (idempotent)."""
    manifold = Manifold.parse(manifold)
    P = np.array(coords, dtype=float).reshape(-1, 2)
    if not np.all(np.isfinite(P)):
        raise GeometryError("coordinates must be finite")
    x, y = P[:, 0], P[:, 1]
    if manifold is Manifold.TORUS:
        return np.c_[_mod(x, TWO_PI), _mod(y, TWO_PI)]
    if manifold is Manifold.KLEIN:
        y = _mod(y, TWO_PI)
        flip = y > math.pi
        x = np.where(flip, x + math.pi, x)
        y = np.where(flip, TWO_PI - y, y)
        x = _mod(x, TWO_PI)
        edge = (y == 0.0) | (y == math.pi)
        x = np.where(edge, _mod(x, math.pi), x)
        return np.c_[x, y]
    if manifold in (Manifold.SPHERE, Manifold.RP2):
        y = _mod(y, TWO_PI)
        flip = y > math.pi
        x = np.where(flip, x + math.pi, x)
        y = np.where(flip, TWO_PI - y, y)
        if manifold is Manifold.RP2:
            flip = y > math.pi / 2
            x = np.where(flip, x + math.pi, x)
            y = np.where(flip, math.pi - y, y)
        x = _mod(x, TWO_PI)
        if manifold is Manifold.RP2:
            x = np.where(y == math.pi / 2, _mod(x, math.pi), x)
        x = np.where((y == 0.0) | (y == math.pi), 0.0, x)
        return np.c_[x, y]
    return _reduce_octagon(P)


def reduce_point(p):
    return p.reduced()


def kappa(coords):
    """The Klein deck transformation (u, v) -> (u + pi, -v) on torus coordinates."""
    P = np.asarray(coords, dtype=float).reshape(-1, 2)
    return np.c_[P[:, 0] + math.pi, -P[:, 1]]


def antipode(coords):
    P = np.asarray(coords, dtype=float).reshape(-1, 2)
    return np.c_[P[:, 0] + math.pi, math.pi - P[:, 1]]


def sphere_to_xyz(coords):
    P = np.asarray(coords, dtype=float).reshape(-1, 2)
    phi, theta = P[:, 0], P[:, 1]
    st = np.sin(theta)
    return np.c_[np.cos(phi) * st, np.sin(phi) * st, np.cos(theta)]


# --- metrics ---------------------------------------------------------------------

def _circ(d):
    return np.abs(np.mod(d + math.pi, TWO_PI) - math.pi)


def _check_weights(weights):
    a, b = (float(w) for w in weights)
    if not (a > 0 and b > 0):
        raise GeometryError("metric weights must be positive")
    return a, b


def torus_distance(P, Q, weights=(1.0, 1.0)):
    a, b = _check_weights(weights)
    P = np.asarray(P, dtype=float).reshape(-1, 2)
    Q = np.asarray(Q, dtype=float).reshape(-1, 2)
    du = _circ(P[:, 0] - Q[:, 0])
    dv = _circ(P[:, 1] - Q[:, 1])
    return np.sqrt((a * du) ** 2 + (b * dv) ** 2)


def distances(manifold, P, Q, weights=(1.0, 1.0)):
    """Vectorised metric between rows of P and Q (either may be a single row)."""
    manifold = Manifold.parse(manifold)
    P = np.asarray(P, dtype=float).reshape(-1, 2)
    Q = np.asarray(Q, dtype=float).reshape(-1, 2)
    if manifold is Manifold.TORUS:
        return torus_distance(P, Q, weights)
    if manifold is Manifold.KLEIN:
        return np.minimum(torus_distance(P, Q, weights), torus_distance(P, kappa(Q), weights))
    if manifold in (Manifold.SPHERE, Manifold.RP2):
        dot = np.sum(sphere_to_xyz(P) * sphere_to_xyz(Q), axis=1)
        if manifold is Manifold.RP2:
            dot = np.abs(dot)
        return np.arccos(np.clip(dot, -1.0, 1.0))
    diff = P[:, None, :] - (Q[:, None, :] + OCTAGON_TRANSLATIONS[None, :, :])
    return np.min(np.sum(diff * diff, axis=2), axis=1)


def manifold_distance(manifold, metric_params, p, q):
    """Distance between two ManifoldPoints.

    ``metric_params`` holds the (alpha, beta) weights of the flat metrics on
    the torus and Klein bottle; it is ignored elsewhere.  On the genus-2
    surface the value is the squared flat distance over one ring of octagon
    copies.
    """
    manifold = Manifold.parse(manifold)
    if p.manifold is not manifold or q.manifold is not manifold:
        raise GeometryError("points do not lie on the requested manifold")
    weights = (1.0, 1.0) if metric_params is None else metric_params
    if manifold in (Manifold.TORUS, Manifold.KLEIN):
        _check_weights(weights)
    return float(distances(manifold, p.coords, q.coords, weights)[0])


# --- flows -----------------------------------------------------------------------

def smooth_step(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1, all derivatives vanish at both ends."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        f = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        g = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return f / (f + g)


@dataclass(frozen=True)
class KleinParams:
    eps: float
    profile: str = "smoothstep"

    def __post_init__(self):
        if not (0 < self.eps < math.pi / 4):
            raise GeometryError("klein eps must lie in (0, pi/4)")
        if self.profile != "smoothstep":
            raise GeometryError(f"unknown bump profile {self.profile!r}")


@dataclass(frozen=True)
class FlowSpec:
    """Dynamics on one surface.

    ``slope`` is the chart velocity (alpha, beta).  On the sphere and RP2 it is
    (azimuthal speed, polar sweep rate).  With ``klein`` set the flow is the
    field that is linear in the band eps < v < pi - eps and flattens to a
    horizontal flow on the circles v = 0, pi.
    """

    manifold: Manifold
    slope: tuple
    dt: float
    klein: KleinParams | None = None

    def __post_init__(self):
        object.__setattr__(self, "manifold", Manifold.parse(self.manifold))
        object.__setattr__(self, "slope", tuple(float(s) for s in self.slope))
        if not self.dt > 0:
            raise GeometryError("dt must be positive")
        if self.klein is not None and self.manifold is not Manifold.KLEIN:
            raise GeometryError("klein parameters only apply on the Klein bottle")


def rho(y, eps, beta):
    return beta * smooth_step(np.asarray(y, dtype=float) / eps)


def _klein_vertical(v, params, beta):
    """Vertical speed of the kappa-invariant field at torus height v."""
    v = np.mod(np.asarray(v, dtype=float) + math.pi, TWO_PI) - math.pi  # (-pi, pi]
    sgn = np.where(v < 0, -1.0, 1.0)
    y = np.abs(v)
    eps = params.eps
    speed = np.where(y <= eps, rho(y, eps, beta),
                     np.where(y <= math.pi - eps, beta, rho(math.pi - y, eps, beta)))
    return sgn * speed


def klein_field_eval(flow, p):
    """Tangent vector of the Klein field at ``p`` (torus chart coordinates)."""
    if flow.klein is None:
        raise GeometryError("flow has no klein parameters")
    coords = p.coords if isinstance(p, ManifoldPoint) else tuple(p)
    if isinstance(p, ManifoldPoint) and p.manifold is not Manifold.KLEIN:
        raise GeometryError("point is not on the Klein bottle")
    alpha, beta = flow.slope
    return (alpha, float(_klein_vertical(coords[1], flow.klein, beta)))


@jit
def _klein_speed(v, eps, beta):
    """Scalar twin of _klein_vertical for the compiled integrator."""
    w = (v + math.pi) % TWO_PI - math.pi
    y = abs(w)
    if y <= eps:
        s = y / eps
    elif y <= math.pi - eps:
        return -beta if w < 0 else beta
    else:
        s = (math.pi - y) / eps
    s = min(max(s, 0.0), 1.0)
    f = math.exp(-1.0 / s) if s > 0 else 0.0
    g = math.exp(-1.0 / (1.0 - s)) if s < 1 else 0.0
    speed = beta * (f / (f + g))
    return -speed if w < 0 else speed


@jit
def _klein_rk4_path(start, n, substeps, h, alpha, beta, eps):
    """RK4 samples of the Klein field, ``substeps`` steps of size h between samples.

    Row k is the state after k samples, so row 0 is ``start``.
    """
    out = np.empty((n, 2))
    u = start[0]
    v = start[1]
    out[0, 0] = u
    out[0, 1] = v
    for k in range(1, n):
        for _ in range(substeps):
            k1 = _klein_speed(v, eps, beta)
            k2 = _klein_speed(v + 0.5 * h * k1, eps, beta)
            k3 = _klein_speed(v + 0.5 * h * k2, eps, beta)
            k4 = _klein_speed(v + h * k3, eps, beta)
            v = v + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            u = u + h * alpha
        out[k, 0] = u
        out[k, 1] = v
    return out


def _klein_rk4(flow, lift, steps):
    """Advance each row of ``lift`` by ``steps`` samples (four RK4 sub-steps each)."""
    alpha, beta = flow.slope
    out = np.empty_like(lift)
    for i, p in enumerate(lift):
        out[i] = _klein_rk4_path(np.ascontiguousarray(p), 2, 4 * int(steps), flow.dt / 4,
                                 alpha, beta, flow.klein.eps)[-1]
    return out


def advance_lift(flow, lift, steps=1):
    """Flow lifted chart coordinates forward by ``steps * flow.dt``."""
    lift = np.asarray(lift, dtype=float).reshape(-1, 2)
    if flow.manifold is Manifold.GENUS2:
        step = flow.dt * np.asarray(flow.slope)
        return np.array([_octagon_walk(p, step, int(steps) + 1, OCTAGON_NORMALS,
                                       OCTAGON_APOTHEM)[-1] for p in lift]).reshape(-1, 2)
    if flow.klein is not None:
        return _klein_rk4(flow, lift, steps)
    return lift + steps * flow.dt * np.asarray(flow.slope)


def flow_for_time(flow, lift, t):
    """Flow lifted coordinates for time t, which must be a multiple of dt."""
    steps = round(t / flow.dt)
    if abs(steps * flow.dt - t) > 1e-9 * max(1.0, abs(t)):
        raise GeometryError("flow time must be a multiple of dt")
    return advance_lift(flow, lift, steps)


@dataclass
class Trajectory:
    """Samples of an integral curve at times ``t0 + k * dt``.

    ``points`` are reduced chart coordinates; ``lift`` are the unreduced
    coordinates the dynamics actually evolve (the torus double cover for the
    Klein bottle, the unwrapped angles on spheres).  On the octagon surface
    there is no global lift and ``lift`` equals ``points``.
    """

    manifold: Manifold
    points: np.ndarray
    lift: np.ndarray
    t0: float
    dt: float
    flow: FlowSpec | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.points)

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(len(self.points))

    def point(self, k):
        return ManifoldPoint(self.manifold, tuple(self.points[k]))


def flow_trajectory(flow, p0, n, t0=0.0):
    """Sample ``n`` points of the integral curve of ``flow`` through ``p0``."""
    if not isinstance(p0, ManifoldPoint):
        p0 = ManifoldPoint(flow.manifold, p0)
    if p0.manifold is not flow.manifold:
        raise GeometryError("starting point is on a different manifold than the flow")
    if int(n) < 1:
        raise GeometryError("need at least one sample")
    n = int(n)
    start = np.asarray(p0.coords, dtype=float)
    if flow.klein is not None:
        lift = _klein_rk4_path(start, n, 4, flow.dt / 4, flow.slope[0], flow.slope[1], flow.klein.eps)
    elif flow.manifold is Manifold.GENUS2:
        lift = _octagon_walk(start, flow.dt * np.asarray(flow.slope), n,
                             OCTAGON_NORMALS, OCTAGON_APOTHEM)
    else:
        lift = start + flow.dt * np.arange(n)[:, None] * np.asarray(flow.slope)[None, :]
    points = reduce_coords(flow.manifold, lift)
    return Trajectory(flow.manifold, points, lift, float(t0), flow.dt, flow)


def cover_radius(samples, queries, metric):
    """max over queries of the distance to the nearest sample (brute force)."""
    best = np.full(len(queries), np.inf)
    for s in samples:
        best = np.minimum(best, metric(queries, s))
    return float(best.max())
