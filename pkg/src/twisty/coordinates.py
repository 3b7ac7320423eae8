"""Circular and real-projective coordinates from persistent cohomology classes.

Cochains live on the Rips complex of the landmarks at scale ``2 * alpha``.
Edges are stored as index pairs ``j < k`` oriented from j to k, and the
coboundary of a 0-cochain t is ``(delta t)_{jk} = t_k - t_j``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .persistence import CocycleRep, is_prime, pairwise_distances

DEFAULT_PRIMES = (41, 43, 47)


class CoordinateError(ValueError):
    pass


class LiftError(CoordinateError):
    """The integer lift of a Z/q cocycle is not a cocycle over Z."""


# --- cover and complex -------------------------------------------------------------

def cross_distances(A, B):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    sq = np.einsum("ij,ij->i", A, A)[:, None] + np.einsum("ij,ij->i", B, B)[None, :] - 2.0 * A @ B.T
    return np.sqrt(np.maximum(sq, 0.0))


@dataclass
class CoordinateCover:
    """Balls of radius ``alpha`` around the landmark points."""

    landmarks: np.ndarray
    alpha: float
    indices: np.ndarray | None = None

    def __post_init__(self):
        self.landmarks = np.asarray(self.landmarks, dtype=float)
        if not self.alpha > 0:
            raise CoordinateError("alpha must be positive")

    def __len__(self):
        return len(self.landmarks)

    def distances(self, queries):
        return cross_distances(np.asarray(getattr(queries, "points", queries), dtype=float), self.landmarks)

    def check(self, queries):
        D = self.distances(queries)
        if np.any(D.min(axis=1) >= self.alpha):
            raise CoordinateError("some queries lie outside every landmark ball")
        return D


@dataclass
class RipsComplex:
    """1- and 2-simplices of the Rips complex of the landmarks at a fixed scale."""

    n: int
    scale: float
    edges: np.ndarray      # (m, 2), j < k, lexicographic
    triangles: np.ndarray  # (t, 3), ascending vertices

    @classmethod
    def build(cls, points_or_D, scale, is_distance=False):
        D = np.asarray(points_or_D, dtype=float) if is_distance else pairwise_distances(points_or_D)
        n = len(D)
        adj = (D <= scale) & ~np.eye(n, dtype=bool)
        ii, jj = np.nonzero(np.triu(adj, 1))
        edges = np.c_[ii, jj].astype(np.int64)
        tris = []
        for a, b in edges:
            common = np.nonzero(adj[a] & adj[b])[0]
            common = common[common > b]
            if len(common):
                tris.append(np.c_[np.full(len(common), a), np.full(len(common), b), common])
        triangles = np.vstack(tris).astype(np.int64) if tris else np.zeros((0, 3), dtype=np.int64)
        return cls(n, float(scale), edges, triangles)

    def edge_index(self):
        return {(int(a), int(b)): e for e, (a, b) in enumerate(self.edges)}

    def coboundary0(self):
        """Sparse delta^0: vertices -> edges."""
        m = len(self.edges)
        rows = np.repeat(np.arange(m), 2)
        cols = self.edges.ravel()
        vals = np.tile([-1.0, 1.0], m)
        return sp.csr_matrix((vals, (rows, cols)), shape=(m, self.n))

    def components(self):
        from scipy.sparse.csgraph import connected_components
        A = sp.csr_matrix((np.ones(len(self.edges)), (self.edges[:, 0], self.edges[:, 1])),
                          shape=(self.n, self.n))
        return connected_components(A, directed=False)[1]


def cochain_on(complex_, cocycle):
    """Values of a CocycleRep on the complex's edges (0 off its support, dropped if absent)."""
    index = complex_.edge_index()
    out = np.zeros(len(complex_.edges), dtype=np.int64)
    for (a, b), c in zip(np.asarray(cocycle.edges).reshape(-1, 2), cocycle.coeffs):
        a, b = int(a), int(b)
        key = (a, b) if a < b else (b, a)
        e = index.get(key)
        if e is not None:
            out[e] = c if a < b else -c
    return out


def coboundary1(complex_, values):
    """(delta mu)(a, b, c) = mu_ab + mu_bc - mu_ac on every triangle."""
    index = complex_.edge_index()
    T = complex_.triangles
    if len(T) == 0:
        return np.zeros(0, dtype=np.asarray(values).dtype)
    ab = np.array([index[(a, b)] for a, b in T[:, :2]])
    bc = np.array([index[(b, c)] for b, c in T[:, 1:]])
    ac = np.array([index[(a, c)] for a, c in T[:, [0, 2]]])
    v = np.asarray(values)
    return v[ab] + v[bc] - v[ac]


# --- circular coordinates -------------------------------------------------------------

def lift_cocycle(cocycle, complex_):
    """Integer lift of a Z/q cocycle with entries in (-q/2, q/2)."""
    q = int(cocycle.char)
    if q <= 2 or not is_prime(q):
        raise CoordinateError("circular coordinates need a prime q > 2")
    vals = cochain_on(complex_, cocycle) % q
    lifted = np.where(vals > q // 2, vals - q, vals)
    bad = np.count_nonzero(coboundary1(complex_, lifted))
    if bad:
        raise LiftError(f"integer lift fails the cocycle condition on {bad} triangles (q={q})")
    return lifted.astype(np.int64)


@dataclass
class HarmonicDecomposition:
    """``mu_int = theta - delta(tau0)`` with theta of least norm in the class."""

    theta: np.ndarray
    tau0: np.ndarray
    residual: float
    iterations: int = 0


def harmonic_decompose(mu_int, complex_, rtol=1e-10):
    """Harmonic representative of an integer cocycle by least squares.

    tau0 minimises ``|mu_int + delta tau0|`` and is fixed to mean zero on every
    connected component; theta is ``mu_int + delta tau0``.  The normal
    equations are solved by conjugate gradients on the graph Laplacian.
    """
    mu = np.asarray(mu_int, dtype=float)
    d0 = complex_.coboundary0()
    if mu.shape != (d0.shape[0],):
        raise CoordinateError("cochain does not match the complex's edges")
    n = complex_.n
    if d0.shape[0] == 0:
        return HarmonicDecomposition(mu.copy(), np.zeros(n), 0.0, 0)
    lap = (d0.T @ d0).tocsr()
    rhs = -(d0.T @ mu)
    bnorm = float(np.linalg.norm(rhs))
    its = [0]

    def count(_):
        its[0] += 1

    if bnorm == 0:
        tau0 = np.zeros(n)
    else:
        tau0, info = cg(lap, rhs, rtol=rtol * 1e-2, atol=0.0, maxiter=10 * n, callback=count)
        if info > 0:
            res = float(np.linalg.norm(lap @ tau0 - rhs)) / bnorm
            raise CoordinateError(f"conjugate gradients did not converge (relative residual {res:.3g})")
    comp = complex_.components()
    for c in np.unique(comp):
        tau0[comp == c] -= tau0[comp == c].mean()
    theta = mu + d0 @ tau0
    residual = float(np.linalg.norm(lap @ tau0 - rhs)) / bnorm if bnorm else 0.0
    if residual >= rtol:
        raise CoordinateError(f"harmonic solve residual {residual:.3g} exceeds {rtol:g}")
    return HarmonicDecomposition(theta, tau0, residual, its[0])


def partition_of_unity(D, alpha):
    """phi_k(b) = |alpha - d(b, l_k)|_+ normalised over k; rows of D are queries."""
    w = np.maximum(alpha - np.asarray(D, dtype=float), 0.0)
    s = w.sum(axis=1, keepdims=True)
    if np.any(s == 0):
        raise CoordinateError("some queries lie outside every landmark ball")
    return w / s


def _theta_matrix(complex_, theta):
    n = complex_.n
    T = np.zeros((n, n))
    a, b = complex_.edges[:, 0], complex_.edges[:, 1]
    T[a, b] = theta
    T[b, a] = -theta
    return T


def circular_coords(queries, cover, hd, complex_, anchors=None):
    """Angles in [0, 2pi) of the circle-valued map built from a harmonic cocycle.

    ``anchors`` optionally fixes the landmark j used for each query (it must
    cover the query); by default the nearest landmark is used.
    """
    D = cover.check(queries)
    phi = partition_of_unity(D, cover.alpha)
    j = np.argmin(D, axis=1) if anchors is None else np.asarray(anchors)
    if np.any(D[np.arange(len(D)), j] >= cover.alpha):
        raise CoordinateError("anchor landmark does not cover its query")
    T = _theta_matrix(complex_, hd.theta)
    turns = hd.tau0[j] + np.einsum("ik,ik->i", T[j], phi)
    return np.mod(2 * math.pi * turns, 2 * math.pi)


# --- projective coordinates -------------------------------------------------------

def canonicalize(X):
    """Unit rows with the first nonzero coordinate positive."""
    X = np.array(X, dtype=float, ndmin=2)
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise CoordinateError("the zero vector is not a projective point")
    X = X / norms
    first = np.argmax(X != 0, axis=1)
    sign = np.sign(X[np.arange(len(X)), first])
    return X * sign[:, None]


@dataclass(frozen=True)
class ProjectivePoint:
    coords: tuple

    @classmethod
    def from_vector(cls, v):
        return cls(tuple(canonicalize(v)[0]))

    @property
    def dim(self):
        return len(self.coords) - 1

    def distance(self, other):
        return float(geodesic_distances(np.array([self.coords]), np.array([other.coords]))[0, 0])


def geodesic_distances(X, Y=None):
    """d_g([x], [y]) = arccos |<x, y>| for unit representatives."""
    Y = X if Y is None else Y
    G = np.abs(np.asarray(X) @ np.asarray(Y).T)
    return np.arccos(np.clip(G, 0.0, 1.0))


def z2_cocycle_matrix(cocycle, n):
    if int(cocycle.char) != 2:
        raise CoordinateError("projective coordinates need a Z/2 cocycle")
    M = np.zeros((n, n), dtype=np.int64)
    for (a, b), c in zip(np.asarray(cocycle.edges).reshape(-1, 2), cocycle.coeffs):
        M[a, b] = M[b, a] = int(c) % 2
    return M


def projective_coords(queries, cover, cocycle, anchors=None):
    """Canonical unit representatives in R^{|L|} of the map to RP^{|L|-1}."""
    D = cover.check(queries)
    w = np.maximum(cover.alpha - D, 0.0)
    j = np.argmin(D, axis=1) if anchors is None else np.asarray(anchors)
    M = cocycle if isinstance(cocycle, np.ndarray) else z2_cocycle_matrix(cocycle, len(cover))
    signs = 1.0 - 2.0 * (M[j] % 2)
    return canonicalize(signs * w)


def fix_column_signs(X):
    """Flip coordinate signs into a gauge fixed by the data.

    Signs are propagated from the lowest-index column of each component along
    a maximum spanning tree of |X^T X|, making the first coordinate of every
    component positive-correlated with its tree parent.  |X^T X| is unchanged
    bit for bit by coordinate sign flips, so inputs that differ only by such
    flips (as cohomologous Z/2 cocycles do) come out identical.
    """
    from scipy.sparse.csgraph import breadth_first_order, minimum_spanning_tree

    X = np.asarray(X, dtype=float)
    C = X.T @ X
    W = np.abs(C)
    np.fill_diagonal(W, 0.0)
    # MST of (max + 1 - w) on the nonzero pattern = maximum spanning tree of w
    cost = np.where(W > 0, W.max() + 1.0 - W, 0.0)
    tree = minimum_spanning_tree(sp.csr_matrix(cost))
    tree = tree + tree.T
    sign = np.ones(X.shape[1])
    seen = np.zeros(X.shape[1], dtype=bool)
    for root in range(X.shape[1]):
        if seen[root]:
            continue
        order, parent = breadth_first_order(tree, root, directed=False)
        seen[order] = True
        for v in order[1:]:
            sign[v] = sign[parent[v]] * (1.0 if C[parent[v], v] >= 0 else -1.0)
    return X * sign


def ppca_reduce(X, k):
    """Stage-wise principal projective component analysis down to RP^k.

    Each stage drops the direction v minimising sum_i <v, x_i>^2 and
    renormalises; the returned distortions are those minimal sums.  The
    smallest eigenvector is ill-conditioned when the low spectrum is crowded,
    so coordinate signs are first put in a data-fixed gauge: otherwise
    rounding alone can send isometric inputs to different outputs.
    """
    X = canonicalize(fix_column_signs(canonicalize(X)))
    if not 0 <= k < X.shape[1] - 1:
        raise CoordinateError("target dimension must be below the ambient projective dimension")
    distortion = []
    while X.shape[1] > k + 1:
        vals, vecs = np.linalg.eigh(X.T @ X)
        distortion.append(max(float(vals[0]), 0.0))
        X = X @ vecs[:, 1:]
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise CoordinateError("a point collapsed to zero during reduction")
        X = X / norms
    return canonicalize(X), distortion


def rp2_stereograph(X, axis=(0.0, 0.0, 1.0)):
    """Planar image of RP^2 points: hemisphere representative, projected from -axis."""
    X = np.asarray(X, dtype=float).reshape(-1, 3)
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    s = X @ a
    X = np.where((s < 0)[:, None], -X, X)
    s = np.abs(s)
    helper = np.eye(3)[np.argmin(np.abs(a))]
    e1 = np.cross(a, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(a, e1)
    return np.c_[X @ e1, X @ e2] / (1.0 + s)[:, None]


def reduce_circular_basis(hds):
    """Gauss-reduce two harmonic classes to a basis of shortest harmonic cocycles.

    Any integer basis of the same lattice gives valid circle maps; the reduced
    one has least Dirichlet energy, which on a flat torus singles out the two
    coordinate circles rather than a diagonal combination of them.
    """
    if len(hds) != 2:
        return list(hds)
    a, b = hds
    for _ in range(64):
        if a.theta @ a.theta > b.theta @ b.theta:
            a, b = b, a
        m = round(float(a.theta @ b.theta) / float(a.theta @ a.theta))
        if m == 0:
            break
        b = HarmonicDecomposition(b.theta - m * a.theta, b.tau0 - m * a.tau0,
                                  max(a.residual, b.residual), 0)
    return [a, b]


# --- choosing the scale -------------------------------------------------------------

def choose_alpha(cover_radius, birth, death, slack=1.1):
    """Ball radius for the coordinate cover.

    ``slack * cover_radius`` keeps every query covered; alpha must also be at
    least the class's birth so the cocycle exists, and 2 alpha must stay below
    its death so it is still a cocycle on the complex at 2 alpha.
    """
    alpha = max(slack * cover_radius, birth)
    if not 2 * alpha < death:
        raise CoordinateError(f"no admissible alpha: need max({slack} * cover, birth) = {alpha:.4g} "
                              f"below death / 2 = {death / 2:.4g}")
    return float(alpha)
