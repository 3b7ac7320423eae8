"""Observation functions on the model surfaces and goodness checks for them."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .geometry import Manifold, ManifoldPoint
from .slidingwindow import TimeSeries


class ObservationError(ValueError):
    pass


# --- Fourier supports ----------------------------------------------------------------

@dataclass(frozen=True)
class FourierSupport:
    """Nonzero Fourier coefficients ``{(n, m): c}`` of a real function on the torus."""

    terms: tuple

    def __init__(self, terms, check=True):
        items = terms.items() if isinstance(terms, dict) else terms
        merged = {}
        for (n, m), c in items:
            key = (int(n), int(m))
            merged[key] = merged.get(key, 0) + complex(c)
        cleaned = tuple(sorted((k, c) for k, c in merged.items() if c != 0))
        object.__setattr__(self, "terms", cleaned)
        if check:
            self.check_conjugate_symmetric()

    @property
    def coeffs(self):
        return dict(self.terms)

    @property
    def vectors(self):
        return np.array([k for k, _ in self.terms], dtype=np.int64).reshape(-1, 2)

    def __len__(self):
        return len(self.terms)

    def check_conjugate_symmetric(self, tol=1e-12):
        c = self.coeffs
        for (n, m), v in c.items():
            w = c.get((-n, -m))
            if w is None or abs(w - v.conjugate()) > tol * max(1.0, abs(v)):
                raise ObservationError(f"support is not conjugate symmetric at {(n, m)}")

    def is_kappa_invariant(self, tol=1e-12):
        # G(x + pi, -y) = G(x, y)  <=>  c(n, -m) = (-1)^n c(n, m)
        c = self.coeffs
        for (n, m), v in c.items():
            w = c.get((n, -m))
            if w is None or abs(w - (-1) ** (n % 2) * v) > tol * max(1.0, abs(v)):
                return False
        return True

    def evaluate(self, coords):
        P = np.asarray(coords, dtype=float).reshape(-1, 2)
        z = np.zeros(len(P), dtype=complex)
        for (n, m), c in self.terms:
            z += c * np.exp(1j * (n * P[:, 0] + m * P[:, 1]))
        if len(P) and np.max(np.abs(z.imag)) > 1e-12 * max(1.0, np.max(np.abs(z.real))):
            raise ObservationError("Fourier evaluation is not real")
        return z.real

    def to_records(self):
        return [{"n": n, "m": m, "re": c.real, "im": c.imag} for (n, m), c in self.terms]

    @classmethod
    def from_records(cls, records):
        return cls([((r["n"], r["m"]), complex(r["re"], r["im"])) for r in records])

    @classmethod
    def from_vectors(cls, vectors):
        """Support with coefficient 1/2 on each vector and its negative (a sum of cosines)."""
        terms = {}
        for n, m in vectors:
            for k in ((n, m), (-n, -m)):
                terms[k] = 0.5
        return cls(terms)


def cos_cos_support():
    """cos x + cos y."""
    return FourierSupport({(1, 0): 0.5, (-1, 0): 0.5, (0, 1): 0.5, (0, -1): 0.5})


def klein_fourier_support(with_cos2x=True):
    """cos 2x + cos x sin y + cos y (optionally without the cos 2x term)."""
    terms = {(1, 1): -0.25j, (-1, -1): 0.25j, (1, -1): 0.25j, (-1, 1): -0.25j,
             (0, 1): 0.5, (0, -1): 0.5}
    if with_cos2x:
        terms.update({(2, 0): 0.5, (-2, 0): 0.5})
    return FourierSupport(terms)


# --- observation functions -------------------------------------------------------

class ObservationKind(str, enum.Enum):
    DISTANCE = "distance"
    FOURIER = "fourier"


@dataclass(frozen=True)
class DistanceTo:
    manifold: Manifold
    x_hat: tuple
    weights: tuple = (1.0, 1.0)
    kind: ObservationKind = field(default=ObservationKind.DISTANCE, init=False)

    def __post_init__(self):
        object.__setattr__(self, "manifold", Manifold.parse(self.manifold))
        object.__setattr__(self, "x_hat", tuple(float(c) for c in self.x_hat))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.manifold in (Manifold.TORUS, Manifold.KLEIN):
            geo._check_weights(self.weights)

    def __call__(self, coords):
        return geo.distances(self.manifold, coords, self.x_hat, self.weights)

    def supports(self, manifold):
        return Manifold.parse(manifold) is self.manifold


@dataclass(frozen=True)
class Fourier:
    support: FourierSupport
    kind: ObservationKind = field(default=ObservationKind.FOURIER, init=False)

    def __call__(self, coords):
        return self.support.evaluate(coords)

    def supports(self, manifold):
        manifold = Manifold.parse(manifold)
        if manifold is Manifold.TORUS:
            return True
        return manifold is Manifold.KLEIN and self.support.is_kappa_invariant()


@dataclass(frozen=True)
class Constant:
    value: float = 0.0

    def __call__(self, coords):
        return np.full(len(np.asarray(coords, dtype=float).reshape(-1, 2)), float(self.value))

    def supports(self, manifold):
        return True


def _coords_of(obs, p):
    if isinstance(p, ManifoldPoint):
        if not obs.supports(p.manifold):
            raise ObservationError(f"observation is not defined on {p.manifold.value}")
        return p.coords
    return p


def observe(obs, p):
    return float(obs(_coords_of(obs, p))[0])


def observe_trajectory(obs, traj):
    if not obs.supports(traj.manifold):
        raise ObservationError(f"observation is not defined on {traj.manifold.value}")
    coords = traj.lift if isinstance(obs, Fourier) else traj.points
    return TimeSeries(obs(coords), traj.t0, traj.dt)


# --- lattice generation via the Smith normal form -----------------------------------

def smith_normal_form(A):
    """Diagonal of the Smith normal form of an integer matrix (exact, Python ints)."""
    A = np.asarray(A)
    M = [[int(x) for x in row] for row in A.reshape(A.shape[0], -1)]
    rows = len(M)
    cols = len(M[0]) if rows else 0
    diag = []
    for t in range(min(rows, cols)):
        nz = [(abs(M[i][j]), i, j) for i in range(t, rows) for j in range(t, cols) if M[i][j]]
        if not nz:
            break
        _, i, j = min(nz)
        M[t], M[i] = M[i], M[t]
        for row in M:
            row[t], row[j] = row[j], row[t]
        while True:
            p = M[t][t]
            for i in range(t + 1, rows):
                q = M[i][t] // p
                M[i] = [a - q * b for a, b in zip(M[i], M[t])]
            for j in range(t + 1, cols):
                q = M[t][j] // p
                for row in M:
                    row[j] -= q * row[t]
            left = [(abs(M[i][t]), i, None) for i in range(t + 1, rows) if M[i][t]]
            left += [(abs(M[t][j]), None, j) for j in range(t + 1, cols) if M[t][j]]
            if left:
                # a remainder smaller than the pivot survived: make it the new pivot
                _, i, j = min(left, key=lambda r: r[0])
                if i is not None:
                    M[t], M[i] = M[i], M[t]
                else:
                    for row in M:
                        row[t], row[j] = row[j], row[t]
                continue
            rest = [i for i in range(t + 1, rows) for j in range(t + 1, cols) if M[i][j] % p]
            if rest:
                M[t] = [a + b for a, b in zip(M[t], M[rest[0]])]
                continue
            break
        diag.append(abs(M[t][t]))
    return tuple(diag) + (0,) * (min(rows, cols) - len(diag))


@dataclass
class GoodnessReport:
    good: bool
    reasons: list
    details: dict = field(default_factory=dict)

    @property
    def verdict(self):
        return "Good" if self.good else "Bad"

    def to_dict(self):
        return {"verdict": self.verdict, "reasons": self.reasons, "details": self.details}


def fourier_support_generates(support):
    """Whether the support vectors generate Z^2 as a group (SNF diagonal (1, 1))."""
    vecs = support.vectors if isinstance(support, FourierSupport) else np.asarray(support).reshape(-1, 2)
    if len(vecs) == 0:
        raise ObservationError("empty Fourier support")
    diag = smith_normal_form(vecs)
    if len(diag) < 2:
        diag = diag + (0,)
    reasons = []
    if diag != (1, 1):
        index = diag[0] * diag[1] if diag[1] else None
        reasons.append({"check": "lattice", "snf_diagonal": list(diag), "index": index})
    return GoodnessReport(not reasons, reasons, {"snf_diagonal": list(diag)})


def boundary_harmonics(support, y):
    """Coefficients {n: c} of x -> G(x, y) for y in {0, pi}."""
    out = {}
    for (n, m), c in support.terms:
        w = c * (-1) ** (m % 2) if y else c
        out[n] = out.get(n, 0) + w
    return {n: c for n, c in out.items() if abs(c) > 1e-12}


def _boundary_period_problem(support, y):
    freqs = sorted({abs(n) for n in boundary_harmonics(support, y) if n != 0})
    if not freqs:
        return "constant curve"
    g = math.gcd(*freqs)
    if g != 2:
        return f"minimal period 2pi/{g}, not pi"
    return None


def klein_observation_check(support, grid_size=1024, tol=1e-9):
    """Goodness of a kappa-invariant Fourier observation for the Klein field.

    The boundary circles y = 0 and y = pi must carry curves of minimal period pi
    (nonconstant, seeing x only mod pi) that are not translates of each other,
    and the support must generate Z^2.
    """
    if not support.is_kappa_invariant():
        raise ObservationError("support is not kappa-invariant; it does not descend to the Klein bottle")
    reasons = []
    grid = np.arange(grid_size) * (2 * math.pi / grid_size)
    bottom = support.evaluate(np.c_[grid, np.zeros(grid_size)])
    top = support.evaluate(np.c_[grid, np.full(grid_size, math.pi)])
    for name, y in (("y=0", 0.0), ("y=pi", math.pi)):
        why = _boundary_period_problem(support, y)
        if why:
            reasons.append({"check": "boundary_period", "curve": name, "detail": why})
    shift = _shift_witness(support, bottom, top, grid, tol)
    if shift is not None:
        reasons.append({"check": "boundary_shift", "shift": shift})
    lattice = fourier_support_generates(support)
    reasons.extend(lattice.reasons)
    return GoodnessReport(not reasons, reasons, dict(lattice.details))


def _shift_witness(support, bottom, top, grid, tol):
    """A shift s with G(x + s, 0) == G(x, pi) on the grid, or None."""
    n = len(grid)
    # grid-aligned shifts, all at once through the circular cross-correlation
    # |roll(bottom, -k) - top|^2 = |bottom|^2 + |top|^2 - 2 sum_x bottom(x + k) top(x)
    corr = np.fft.ifft(np.fft.fft(bottom) * np.conj(np.fft.fft(top))).real
    sq = np.sum(bottom ** 2) + np.sum(top ** 2) - 2 * corr
    for k in np.argsort(sq)[:4]:
        if np.max(np.abs(np.roll(bottom, -k) - top)) < tol:
            return float(grid[k])
    # off-grid shifts: a matching shift must align the phase of the lowest harmonic
    hb = boundary_harmonics(support, 0.0)
    ht = boundary_harmonics(support, math.pi)
    freqs = sorted(f for f in hb if f > 0)
    if not freqs:
        return None if np.max(np.abs(bottom - top)) >= tol else 0.0
    f = freqs[0]
    if f not in ht:
        return None
    base = np.angle(ht[f] / hb[f]) / f
    for j in range(f):
        s = base + 2 * math.pi * j / f
        moved = support.evaluate(np.c_[grid + s, np.zeros(n)])
        if np.max(np.abs(moved - top)) < tol:
            return float(np.mod(s, 2 * math.pi))
    return None


# --- numerical diagnostics ---------------------------------------------------------

def _takens(obs, flow, lift, N, tau_steps):
    cols = []
    cur = np.asarray(lift, dtype=float).reshape(-1, 2)
    for k in range(N + 1):
        pts = cur if isinstance(obs, Fourier) else geo.reduce_coords(flow.manifold, cur)
        cols.append(obs(pts))
        if k < N:
            cur = geo.advance_lift(flow, cur, tau_steps)
    return np.stack(cols, axis=1)


def _tau_steps(flow, tau):
    steps = round(tau / flow.dt)
    if steps < 1 or abs(steps * flow.dt - tau) > 1e-9 * max(1.0, tau):
        raise ObservationError("tau must be a positive multiple of the flow step")
    return steps


def takens_rank_diagnostic(obs, flow, base_points, N, tau, h=1e-4, threshold=1e-4):
    """Singular value ratio of the finite-difference Jacobian of the Takens map.

    Returns a dict with per-point ``ratio`` (sigma2 / sigma1, 0 when sigma1 is
    0) and ``deficient`` flags.
    """
    steps = _tau_steps(flow, tau)
    P = np.array([p.coords if isinstance(p, ManifoldPoint) else p for p in base_points], dtype=float)
    P = P.reshape(-1, 2)
    for p in base_points:
        if isinstance(p, ManifoldPoint) and p.manifold is not flow.manifold:
            raise ObservationError("base point is on a different manifold than the flow")
    J = np.empty((len(P), N + 1, 2))
    for c in range(2):
        e = np.zeros(2)
        e[c] = h
        J[:, :, c] = (_takens(obs, flow, P + e, N, steps) - _takens(obs, flow, P - e, N, steps)) / (2 * h)
    s = np.linalg.svd(J, compute_uv=False)
    ratio = np.where(s[:, 0] > 0, s[:, 1] / np.where(s[:, 0] > 0, s[:, 0], 1.0), 0.0)
    deficient = ratio < threshold
    return {"sigma": s, "ratio": ratio, "deficient": deficient,
            "n_deficient": int(deficient.sum()), "threshold": threshold, "h": h}


def curve_separation_diagnostic(obs, flow, pairs, horizon, tol=1e-6):
    """sup over the first ``horizon`` samples of |g_p - g_q| for each pair."""
    P, Q = [], []
    for p, q in pairs:
        pc = p.coords if isinstance(p, ManifoldPoint) else tuple(p)
        qc = q.coords if isinstance(q, ManifoldPoint) else tuple(q)
        if np.allclose(geo.reduce_coords(flow.manifold, pc), geo.reduce_coords(flow.manifold, qc),
                       rtol=0, atol=1e-15):
            raise ObservationError("curve separation needs two distinct points")
        P.append(pc)
        Q.append(qc)
    P = np.array(P, dtype=float).reshape(-1, 2)
    Q = np.array(Q, dtype=float).reshape(-1, 2)
    sep = np.zeros(len(P))
    for k in range(int(horizon)):
        if k:
            P = geo.advance_lift(flow, P)
            Q = geo.advance_lift(flow, Q)
        gp = obs(P if isinstance(obs, Fourier) else geo.reduce_coords(flow.manifold, P))
        gq = obs(Q if isinstance(obs, Fourier) else geo.reduce_coords(flow.manifold, Q))
        sep = np.maximum(sep, np.abs(gp - gq))
    bad = sep < tol
    return {"separation": sep, "indistinguishable": bad, "n_indistinguishable": int(bad.sum()),
            "tol": tol, "horizon": int(horizon)}
