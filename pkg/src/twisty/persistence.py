"""Vietoris-Rips persistent cohomology over prime fields.

The filtration is the closed Rips (diameter) filtration: an edge ``(i, j)``
enters at ``d(i, j)`` and a simplex at the length of its longest edge.  The
coboundary matrices are reduced column by column in reverse filtration order
with clearing, which yields the diagrams together with representative
1-cocycles for every H^1 class.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _rips
from ._accel import jit


class PersistenceError(ValueError):
    pass


@dataclass
class PersistenceDiagram:
    dim: int
    pairs: np.ndarray  # (m, 2) births and deaths, death == inf for essential classes

    def __post_init__(self):
        self.pairs = np.asarray(self.pairs, dtype=float).reshape(-1, 2)

    def __len__(self):
        return len(self.pairs)

    @property
    def persistence(self):
        return self.pairs[:, 1] - self.pairs[:, 0]

    def betti_at(self, scale):
        b, d = self.pairs[:, 0], self.pairs[:, 1]
        return int(np.count_nonzero((b <= scale) & (scale < d)))


@dataclass
class CocycleRep:
    """A representative 1-cocycle over Z/char of one H^1 class.

    ``edges`` holds vertex pairs ``i < j`` (oriented from i to j) and
    ``coeffs`` their values in ``0..char-1``.  The cochain is a cocycle on
    every Rips complex at scales in ``[birth, death)``.
    """

    dim: int
    char: int
    birth: float
    death: float
    edges: np.ndarray
    coeffs: np.ndarray

    @property
    def birth_scale(self):
        return self.birth

    def as_dict(self):
        return {e: int(c) for e, c in zip(map(tuple, self.edges.tolist()), self.coeffs)}


@dataclass
class PersistenceResult:
    diagrams: list
    cocycles: list
    field_char: int
    threshold: float
    stats: dict = field(default_factory=dict)

    def diagram(self, dim):
        return self.diagrams[dim]


def is_prime(q):
    q = int(q)
    if q < 2:
        return False
    return all(q % f for f in range(2, int(math.isqrt(q)) + 1))


def check_distance_matrix(D):
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise PersistenceError("distance matrix must be square")
    if not np.array_equal(D, D.T):
        raise PersistenceError("distance matrix is not symmetric")
    if np.any(np.diag(D) != 0):
        raise PersistenceError("distance matrix must have a zero diagonal")
    if np.any(D < 0) or np.any(np.isnan(D)):
        raise PersistenceError("distances must be non-negative numbers")
    return D


@jit
def _pairwise_kernel(X):
    n, m = X.shape
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            s = 0.0
            for k in range(m):
                t = X[i, k] - X[j, k]
                s += t * t
            D[i, j] = np.sqrt(s)
            D[j, i] = D[i, j]
    return D


def pairwise_distances(X, use_kernel=True):
    """Euclidean distance matrix; exactly symmetric with a zero diagonal."""
    X = np.ascontiguousarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if use_kernel:
        return _pairwise_kernel(X)
    sq = np.einsum("ij,ij->i", X, X)
    D2 = sq[:, None] + sq[None, :] - 2.0 * X @ X.T
    D = np.sqrt(np.maximum(D2, 0.0))
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    return D


def enclosing_radius(D):
    return float(np.min(np.max(D, axis=1)))


def _inverse_table(p):
    inv = np.zeros(p, dtype=np.int64)
    for a in range(1, p):
        inv[a] = pow(a, p - 2, p)
    return inv


def rips_persistence(D, maxdim=2, char=2, threshold=None):
    """Persistent cohomology of the Rips filtration of ``D`` up to ``threshold``.

    ``threshold=None`` uses the enclosing radius, past which the complex is a
    cone and no class can be born.  Classes alive at the threshold are reported
    with death ``inf``.  Zero-persistence pairs are dropped.
    """
    D = check_distance_matrix(D)
    if not is_prime(char):
        raise PersistenceError(f"field characteristic {char} is not prime")
    if maxdim not in (0, 1, 2):
        raise PersistenceError("maxdim must be 0, 1 or 2")
    n = D.shape[0]
    if n > 2000:
        raise PersistenceError("at most 2000 points are supported")
    thr = enclosing_radius(D) if threshold is None else float(threshold)
    if not thr > 0:
        raise PersistenceError("threshold must be positive")
    p = int(char)

    B = _rips.binomial_table(n, 4)
    ei, ej, ed, erank, ptr, nbr = _rips.build_edges(D, thr)
    merged, ncomp = _rips.zero_dim_pairs(n, ei, ej)
    deaths0 = ed[merged]
    pairs0 = [(0.0, d) for d in deaths0 if d > 0] + [(0.0, math.inf)] * ncomp
    diagrams = [PersistenceDiagram(0, _sorted_pairs(pairs0))]
    cocycles = []
    stats = {"n_points": n, "n_edges": int(len(ed))}
    if maxdim == 0:
        return PersistenceResult(diagrams, cocycles, p, thr, stats)

    inv = _inverse_table(p)
    ne = B[n, 2]
    ranks = np.arange(len(ed), dtype=np.int64)
    edge_keys = ranks * ne + ei + ej * (ej - 1) // 2
    cols = edge_keys[~merged][::-1].copy()
    piv, pivc, vptr, vkeys, vcoefs = _rips.reduce_coboundary(cols, 1, n, ptr, nbr, erank, B, p, inv)
    stats["n_cols_1"] = int(len(cols))

    pairs1 = []
    for c in range(len(cols)):
        birth = ed[cols[c] // ne]
        death = math.inf if piv[c] < 0 else ed[piv[c] // B[n, 3]]
        if death <= birth:
            continue
        sl = slice(vptr[c], vptr[c + 1])
        r = vkeys[sl] // ne
        edges = np.stack([ei[r], ej[r]], axis=1)
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        pairs1.append((birth, death, CocycleRep(1, p, float(birth), float(death),
                                                edges[order], vcoefs[sl][order].copy())))
    pairs1.sort(key=lambda t: (t[0], t[1]))
    diagrams.append(PersistenceDiagram(1, np.array([(b, d) for b, d, _ in pairs1]).reshape(-1, 2)))
    cocycles = [c for _, _, c in pairs1]
    if maxdim == 1:
        return PersistenceResult(diagrams, cocycles, p, thr, stats)

    tri = _rips.enumerate_triangles(ei, ej, ptr, nbr, erank, B)
    dead = np.sort(piv[piv >= 0])
    tri = tri[~_rips.cleared_mask(tri, dead)]
    cols2 = np.sort(tri)[::-1].copy()
    stats["n_cols_2"] = int(len(cols2))
    piv2, _, _, _, _ = _rips.reduce_coboundary(cols2, 2, n, ptr, nbr, erank, B, p, inv)
    n3, n4 = B[n, 3], B[n, 4]
    births = ed[cols2 // n3]
    deaths = np.where(piv2 < 0, math.inf, ed[np.maximum(piv2, 0) // n4])
    keep = deaths > births
    diagrams.append(PersistenceDiagram(2, _sorted_pairs(list(zip(births[keep], deaths[keep])))))
    return PersistenceResult(diagrams, cocycles, p, thr, stats)


def _sorted_pairs(pairs):
    pairs = sorted((float(b), float(d)) for b, d in pairs)
    return np.array(pairs, dtype=float).reshape(-1, 2)


# --- brute-force oracle -------------------------------------------------------

def _rank_mod_p(M, p):
    M = np.array(M, dtype=np.int64) % p
    rows, cols = M.shape
    rank = 0
    for c in range(cols):
        if rank == rows:
            break
        nz = np.nonzero(M[rank:, c])[0]
        if len(nz) == 0:
            continue
        r = rank + nz[0]
        M[[rank, r]] = M[[r, rank]]
        M[rank] = M[rank] * pow(int(M[rank, c]), p - 2, p) % p
        others = np.nonzero(M[:, c])[0]
        for o in others:
            if o != rank:
                M[o] = (M[o] - M[o, c] * M[rank]) % p
        rank += 1
    return rank


def betti_oracle(D, scale, maxdim=2, char=2):
    """Betti numbers of the closed Rips complex at ``scale`` from dense boundary ranks."""
    D = check_distance_matrix(D)
    n = D.shape[0]
    if n > 16:
        raise PersistenceError("betti_oracle materialises all simplices; use n <= 16")
    if not is_prime(char):
        raise PersistenceError(f"field characteristic {char} is not prime")
    simplices = [[(v,) for v in range(n)]]
    for k in range(1, maxdim + 2):
        simplices.append([s for s in itertools.combinations(range(n), k + 1)
                          if all(D[a, b] <= scale for a, b in itertools.combinations(s, 2))])
    ranks = [0]
    for k in range(1, maxdim + 2):
        index = {s: i for i, s in enumerate(simplices[k - 1])}
        M = np.zeros((len(simplices[k - 1]), len(simplices[k])), dtype=np.int64)
        for j, s in enumerate(simplices[k]):
            for pos in range(len(s)):
                M[index[s[:pos] + s[pos + 1:]], j] = (-1) ** pos
        ranks.append(_rank_mod_p(M, char) if M.size else 0)
    return tuple(len(simplices[k]) - ranks[k] - ranks[k + 1] for k in range(maxdim + 1))


# --- significance --------------------------------------------------------------

def significant_classes(diagram, gap_ratio, cap=None, floor=0.0):
    """Pairs standing out from the rest of ``diagram`` by a persistence gap.

    Pairs are ranked by persistence, ties broken by (birth, death).  Essential
    classes count with death ``cap``, or are ignored when ``cap`` is None.  The
    result is the shortest prefix of the ranking whose last member has
    persistence at least ``gap_ratio`` times that of the first excluded pair
    and at least ``floor``; it is empty when no prefix qualifies.
    """
    if gap_ratio <= 1:
        raise ValueError("gap_ratio must exceed 1")
    pairs = np.asarray(diagram.pairs if isinstance(diagram, PersistenceDiagram) else diagram,
                       dtype=float).reshape(-1, 2)
    b, d = pairs[:, 0], pairs[:, 1]
    if cap is None:
        keep = np.isfinite(d)
        pairs, b, d = pairs[keep], b[keep], d[keep]
        pers = d - b
    else:
        pers = np.minimum(d, cap) - b
    order = sorted(range(len(pairs)), key=lambda i: (-pers[i], b[i], d[i]))
    ranked = pers[order]
    for k in range(len(ranked)):
        if ranked[k] < floor:
            break
        nxt = ranked[k + 1] if k + 1 < len(ranked) else 0.0
        if ranked[k] >= gap_ratio * nxt:
            return [tuple(pairs[i]) for i in order[: k + 1]]
    return []


# --- serialisation -------------------------------------------------------------

def diagrams_to_json(result):
    rows = []
    for dgm in result.diagrams:
        for b, d in dgm.pairs:
            rows.append({"dim": dgm.dim, "birth": float(b),
                         "death": None if math.isinf(d) else float(d)})
    cocycles = [{"birth": c.birth, "death": None if math.isinf(c.death) else c.death,
                 "terms": [{"edge": [int(i), int(j)], "coeff": int(v)}
                           for (i, j), v in zip(c.edges, c.coeffs)]}
                for c in result.cocycles]
    return {"field": result.field_char, "threshold": result.threshold,
            "maxdim": len(result.diagrams) - 1, "diagrams": rows, "cocycles": cocycles}


def diagrams_from_json(obj):
    if isinstance(obj, str):
        obj = json.loads(obj)
    rows = obj["diagrams"] if isinstance(obj, dict) else obj
    dims = max([r["dim"] for r in rows], default=0) + 1
    if isinstance(obj, dict) and "maxdim" in obj:
        dims = obj["maxdim"] + 1
    out = []
    for k in range(dims):
        pairs = [(r["birth"], math.inf if r["death"] is None else r["death"])
                 for r in rows if r["dim"] == k]
        out.append(PersistenceDiagram(k, np.array(pairs, dtype=float).reshape(-1, 2)))
    return out
