"""Low-level kernels for Vietoris-Rips persistent cohomology over Z/p.

Simplices are encoded as int64 keys ``rank * C(n, k + 1) + comb`` where
``rank`` is the position of the simplex's longest edge in the sorted edge list
and ``comb`` is the combinatorial-number-system index of its vertex set.  Keys
of one dimension therefore sort in filtration order, and faces never come after
their cofaces.  Everything here is numba-compatible; see ``_accel``.
"""
import numpy as np

from ._accel import jit


@jit
def binomial_table(n, kmax):
    B = np.zeros((n + 1, kmax + 1), dtype=np.int64)
    for i in range(n + 1):
        B[i, 0] = 1
        for j in range(1, kmax + 1):
            if i >= 1:
                B[i, j] = B[i - 1, j - 1] + B[i - 1, j]
    return B


@jit
def build_edges(D, thr):
    """Edges with length <= thr, sorted by (length, i, j)."""
    n = D.shape[0]
    m = 0
    for i in range(n):
        for j in range(i + 1, n):
            if D[i, j] <= thr:
                m += 1
    ei = np.empty(m, dtype=np.int64)
    ej = np.empty(m, dtype=np.int64)
    ed = np.empty(m, dtype=np.float64)
    t = 0
    for i in range(n):
        for j in range(i + 1, n):
            if D[i, j] <= thr:
                ei[t] = i
                ej[t] = j
                ed[t] = D[i, j]
                t += 1
    order = np.argsort(ed, kind="mergesort")
    ei = ei[order]
    ej = ej[order]
    ed = ed[order]
    erank = -np.ones((n, n), dtype=np.int64)
    for r in range(m):
        erank[ei[r], ej[r]] = r
        erank[ej[r], ei[r]] = r
    deg = np.zeros(n + 1, dtype=np.int64)
    for r in range(m):
        deg[ei[r] + 1] += 1
        deg[ej[r] + 1] += 1
    ptr = np.cumsum(deg)
    nbr = np.empty(2 * m, dtype=np.int64)
    fill = ptr[:-1].copy()
    for v in range(n):
        for w in range(n):
            if erank[v, w] >= 0:
                nbr[fill[v]] = w
                fill[v] += 1
    return ei, ej, ed, erank, ptr, nbr


@jit
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@jit
def zero_dim_pairs(n, ei, ej):
    """Union-find over sorted edges; returns the edge ranks that merge components."""
    parent = np.arange(n)
    merged = np.zeros(ei.shape[0], dtype=np.bool_)
    for r in range(ei.shape[0]):
        a = _find(parent, ei[r])
        b = _find(parent, ej[r])
        if a != b:
            if a < b:
                parent[b] = a
            else:
                parent[a] = b
            merged[r] = True
    ncomp = 0
    for v in range(n):
        if _find(parent, v) == v:
            ncomp += 1
    return merged, ncomp


@jit
def decode_vertices(comb, k, n, B, out):
    """Vertices (ascending) of the k-simplex with combinatorial index comb."""
    hi = n - 1
    for pos in range(k, -1, -1):
        lo = pos
        # largest v in [lo, hi] with C(v, pos + 1) <= comb
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if B[mid, pos + 1] <= comb:
                lo = mid
            else:
                hi = mid - 1
        out[pos] = lo
        comb -= B[lo, pos + 1]
        hi = lo - 1


@jit
def coboundary(vs, k, rank, ptr, nbr, erank, B, ncof, p, out_keys, out_coefs):
    """Cofaces of the k-simplex ``vs`` with signs (-1)^position, as keys."""
    v0 = vs[0]
    cnt = 0
    for t in range(ptr[v0], ptr[v0 + 1]):
        w = nbr[t]
        mr = rank
        pos = 0
        ok = True
        for i in range(k + 1):
            vi = vs[i]
            if vi == w:
                ok = False
                break
            r = erank[w, vi]
            if r < 0:
                ok = False
                break
            if r > mr:
                mr = r
            if vi < w:
                pos += 1
        if not ok:
            continue
        c = B[w, pos + 1]
        for i in range(k + 1):
            if i < pos:
                c += B[vs[i], i + 1]
            else:
                c += B[vs[i], i + 2]
        out_keys[cnt] = mr * ncof + c
        out_coefs[cnt] = 1 if pos % 2 == 0 else p - 1
        cnt += 1
    return cnt


@jit
def enumerate_triangles(ei, ej, ptr, nbr, erank, B):
    """Keys of all triangles whose edges are present (unsorted)."""
    m = ei.shape[0]
    n = erank.shape[0]
    ncof = B[n, 3]
    count = 0
    for r in range(m):
        i = ei[r]
        j = ej[r]
        for t in range(ptr[j], ptr[j + 1]):
            w = nbr[t]
            if w > j and erank[i, w] >= 0:
                count += 1
    keys = np.empty(count, dtype=np.int64)
    c = 0
    for r in range(m):
        i = ei[r]
        j = ej[r]
        for t in range(ptr[j], ptr[j + 1]):
            w = nbr[t]
            if w > j and erank[i, w] >= 0:
                mr = max(r, max(erank[i, w], erank[j, w]))
                keys[c] = mr * ncof + B[i, 1] + B[j, 2] + B[w, 3]
                c += 1
    return keys


# --- binary min-heap of (key, coef) held in growable arrays -------------------

@jit
def _heap_push(hk, hc, hs, key, coef):
    if hs == hk.shape[0]:
        nk = np.empty(2 * hs + 16, dtype=np.int64)
        nc = np.empty(2 * hs + 16, dtype=np.int64)
        nk[:hs] = hk[:hs]
        nc[:hs] = hc[:hs]
        hk = nk
        hc = nc
    i = hs
    hk[i] = key
    hc[i] = coef
    while i > 0:
        parent = (i - 1) // 2
        if hk[parent] <= hk[i]:
            break
        hk[parent], hk[i] = hk[i], hk[parent]
        hc[parent], hc[i] = hc[i], hc[parent]
        i = parent
    return hk, hc, hs + 1


@jit
def _heap_pop(hk, hc, hs):
    hs -= 1
    hk[0] = hk[hs]
    hc[0] = hc[hs]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= hs:
            break
        small = left
        right = left + 1
        if right < hs and hk[right] < hk[left]:
            small = right
        if hk[i] <= hk[small]:
            break
        hk[small], hk[i] = hk[i], hk[small]
        hc[small], hc[i] = hc[i], hc[small]
        i = small
    return hs


@jit
def _heap_pivot(hk, hc, hs, p):
    """Smallest key with nonzero accumulated coefficient; left in the heap."""
    while hs > 0:
        key = hk[0]
        c = 0
        while hs > 0 and hk[0] == key:
            c += hc[0]
            hs = _heap_pop(hk, hc, hs)
        c %= p
        if c != 0:
            hk, hc, hs = _heap_push(hk, hc, hs, key, c)
            return hk, hc, hs, key, c
    return hk, hc, hs, -1, 0


# --- open-addressing hash: simplex key -> column index ------------------------

@jit
def _hash_slot(hkeys, key):
    mask = hkeys.shape[0] - 1
    h = (int(key) * 0x5851F42D4C957F2D) & 0x7FFFFFFFFFFFFFFF
    s = h & mask
    while hkeys[s] != -1 and hkeys[s] != key:
        s = (s + 1) & mask
    return s


@jit
def _grow(a, need):
    if need <= a.shape[0]:
        return a
    b = np.empty(max(need, 2 * a.shape[0]), dtype=a.dtype)
    b[: a.shape[0]] = a
    return b


@jit
def reduce_coboundary(cols, k, n, ptr, nbr, erank, B, p, inv):
    """Reduce the coboundary matrix of the k-simplices ``cols`` (descending keys).

    Returns, per column, the pivot key (-1 when the column reduces to zero) and
    the consolidated reduction-matrix column V (a cochain whose coboundary is
    the reduced column) stored as CSR ``vptr / vkeys / vcoefs``.
    """
    ncols = cols.shape[0]
    nface = B[n, k + 1]
    ncof = B[n, k + 2]
    cap = 16
    while cap < 2 * ncols + 2:
        cap *= 2
    hkeys = -np.ones(cap, dtype=np.int64)
    hvals = np.empty(cap, dtype=np.int64)

    pivots = -np.ones(ncols, dtype=np.int64)
    pivcoef = np.zeros(ncols, dtype=np.int64)
    vptr = np.zeros(ncols + 1, dtype=np.int64)
    vkeys = np.empty(ncols + 16, dtype=np.int64)
    vcoefs = np.empty(ncols + 16, dtype=np.int64)

    hk = np.empty(64, dtype=np.int64)
    hc = np.empty(64, dtype=np.int64)
    ak = np.empty(16, dtype=np.int64)
    ac = np.empty(16, dtype=np.int64)
    maxdeg = 0
    for v in range(n):
        maxdeg = max(maxdeg, ptr[v + 1] - ptr[v])
    bk = np.empty(maxdeg + 1, dtype=np.int64)
    bc = np.empty(maxdeg + 1, dtype=np.int64)
    vs = np.empty(k + 2, dtype=np.int64)

    for col in range(ncols):
        key = cols[col]
        hs = 0
        ak[0] = key
        ac[0] = 1
        na = 1
        decode_vertices(key % nface, k, n, B, vs)
        cnt = coboundary(vs, k, key // nface, ptr, nbr, erank, B, ncof, p, bk, bc)
        for t in range(cnt):
            hk, hc, hs = _heap_push(hk, hc, hs, bk[t], bc[t])
        while True:
            hk, hc, hs, piv, pc = _heap_pivot(hk, hc, hs, p)
            if piv < 0:
                break
            s = _hash_slot(hkeys, piv)
            if hkeys[s] == -1:
                hkeys[s] = piv
                hvals[s] = col
                pivots[col] = piv
                pivcoef[col] = pc
                break
            j = hvals[s]
            factor = (p - pc) * inv[pivcoef[j]] % p
            for e in range(vptr[j], vptr[j + 1]):
                ek = vkeys[e]
                ec = vcoefs[e] * factor % p
                ak = _grow(ak, na + 1)
                ac = _grow(ac, na + 1)
                ak[na] = ek
                ac[na] = ec
                na += 1
                decode_vertices(ek % nface, k, n, B, vs)
                cnt = coboundary(vs, k, ek // nface, ptr, nbr, erank, B, ncof, p, bk, bc)
                for t in range(cnt):
                    hk, hc, hs = _heap_push(hk, hc, hs, bk[t], bc[t] * ec % p)
        # consolidate V column
        if na > 1:
            order = np.argsort(ak[:na])
            sk = ak[:na][order]
            sc = ac[:na][order]
        else:
            sk = ak[:1].copy()
            sc = ac[:1].copy()
        start = vptr[col]
        vkeys = _grow(vkeys, start + na)
        vcoefs = _grow(vcoefs, start + na)
        w = start
        t = 0
        while t < na:
            kk = sk[t]
            cc = 0
            while t < na and sk[t] == kk:
                cc += sc[t]
                t += 1
            cc %= p
            if cc != 0:
                vkeys[w] = kk
                vcoefs[w] = cc
                w += 1
        vptr[col + 1] = w
    return pivots, pivcoef, vptr, vkeys[: vptr[ncols]], vcoefs[: vptr[ncols]]


@jit
def cleared_mask(keys, sorted_pivots):
    """True where a key appears among the (sorted) pivots of the previous dimension."""
    out = np.zeros(keys.shape[0], dtype=np.bool_)
    m = sorted_pivots.shape[0]
    if m == 0:
        return out
    pos = np.searchsorted(sorted_pivots, keys)
    for i in range(keys.shape[0]):
        if pos[i] < m and sorted_pivots[pos[i]] == keys[i]:
            out[i] = True
    return out
