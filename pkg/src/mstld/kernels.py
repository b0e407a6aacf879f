"""Inner loops of the patch pipeline, in numba and pure-numpy flavours.

Every public function takes ``backend=None`` (use the import-time default),
``"numba"`` or ``"numpy"``. Both flavours implement identical rules, including
tie-breaking, so results agree to rounding.
"""
import numpy as np

from ._accel import HAVE_NUMBA, njit


def _pick(backend):
    if backend is None:
        return "numba" if HAVE_NUMBA else "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is unavailable or disabled")
    return backend


# --------------------------------------------------------------------------
# patch aggregation
# --------------------------------------------------------------------------

@njit(cache=True)
def _aggregate_nb(cols, height, width, p):
    hp = height - p + 1
    wp = width - p + 1
    acc = np.zeros((height, width))
    for oy in range(hp):
        for ox in range(wp):
            j = oy * wp + ox
            for c in range(p):
                for r in range(p):
                    acc[oy + r, ox + c] += cols[c * p + r, j]
    return acc


def _aggregate_np(cols, height, width, p):
    hp = height - p + 1
    wp = width - p + 1
    acc = np.zeros((height, width))
    for c in range(p):
        for r in range(p):
            acc[r:r + hp, c:c + wp] += cols[c * p + r].reshape(hp, wp)
    return acc


def coverage(height, width, p):
    """Number of stride-1 p x p patches covering each pixel."""
    rows = np.minimum.reduce([np.arange(height) + 1, np.full(height, p),
                              height - np.arange(height), np.full(height, height - p + 1)])
    cols = np.minimum.reduce([np.arange(width) + 1, np.full(width, p),
                              width - np.arange(width), np.full(width, width - p + 1)])
    return np.outer(rows, cols).astype(float)


def aggregate(cols, height, width, p, backend=None):
    """Sum of patch columns at their locations (no normalisation)."""
    cols = np.ascontiguousarray(cols, dtype=np.float64)
    if _pick(backend) == "numba":
        return _aggregate_nb(cols, height, width, p)
    return _aggregate_np(cols, height, width, p)


# --------------------------------------------------------------------------
# hard thresholding to the l largest magnitudes (ties -> lowest index)
# --------------------------------------------------------------------------

@njit(cache=True)
def _kth_largest(buf, k):
    """k-th largest (1-based) of ``buf``; reorders ``buf`` in place."""
    lo, hi = 0, buf.size - 1
    target = k - 1
    while lo < hi:
        pivot = buf[(lo + hi) // 2]
        i, j = lo, hi
        while i <= j:
            while buf[i] > pivot:
                i += 1
            while buf[j] < pivot:
                j -= 1
            if i <= j:
                buf[i], buf[j] = buf[j], buf[i]
                i += 1
                j -= 1
        if target <= j:
            hi = j
        elif target >= i:
            lo = i
        else:
            break
    return buf[target]


@njit(cache=True)
def _threshold_nb(zt, levels):
    # zt is (N, n): one patch per row, contiguous
    m, n = zt.shape
    out = np.zeros((n, m))
    a = np.empty(n)
    for j in range(m):
        l = levels[j]
        if l <= 0:
            continue
        if l >= n:
            for i in range(n):
                out[i, j] = zt[j, i]
            continue
        for i in range(n):
            a[i] = abs(zt[j, i])
        t = _kth_largest(a, l)
        above = 0
        for i in range(n):
            if abs(zt[j, i]) > t:
                above += 1
        ties = l - above
        for i in range(n):
            v = zt[j, i]
            if abs(v) > t:
                out[i, j] = v
            elif abs(v) == t and ties > 0:
                out[i, j] = v
                ties -= 1
    return out


def _threshold_np(z, levels):
    n, m = z.shape
    order = np.argsort(-np.abs(z), axis=0, kind="stable")
    rank = np.empty_like(order)
    np.put_along_axis(rank, order, np.arange(n)[:, None], axis=0)
    return np.where(rank < levels[None, :], z, 0.0)


def threshold_columns(z, levels, backend=None):
    """Keep the ``levels[j]`` largest-magnitude entries of column j."""
    z = np.ascontiguousarray(z, dtype=np.float64)
    levels = np.broadcast_to(np.asarray(levels, dtype=np.int64), (z.shape[1],)).copy()
    if _pick(backend) == "numba":
        return _threshold_nb(np.ascontiguousarray(z.T), levels)
    return _threshold_np(z, levels)


# --------------------------------------------------------------------------
# greedy support growth for the variable sparsity update
# --------------------------------------------------------------------------

@njit(cache=True)
def _grow_nb(z, winv, y, bound):
    n, m = z.shape
    resid_out = np.empty_like(y)
    sizes = np.zeros(m, dtype=np.int64)
    r = np.empty(n)
    a = np.empty(n)
    for j in range(m):
        e = 0.0
        for i in range(n):
            r[i] = y[i, j]
            e += r[i] * r[i]
            a[i] = abs(z[i, j])
        k = 0
        while e > bound and k < n:
            # next largest magnitude; strict '>' keeps the lowest index on ties
            col = 0
            best = -1.0
            for i in range(n):
                if a[i] > best:
                    best = a[i]
                    col = i
            a[col] = -1.0
            coef = z[col, j]
            e = 0.0
            for i in range(n):
                r[i] -= winv[i, col] * coef
                e += r[i] * r[i]
            k += 1
        sizes[j] = k
        for i in range(n):
            resid_out[i, j] = r[i]
    return resid_out, sizes


def _grow_np(z, winv, y, bound):
    n, m = z.shape
    order = np.argsort(-np.abs(z), axis=0, kind="stable")
    resid = y.copy()
    energy = np.einsum("ij,ij->j", resid, resid)
    sizes = np.zeros(m, dtype=np.int64)
    active = np.flatnonzero(energy > bound)
    for k in range(n):
        if active.size == 0:
            break
        idx = order[k, active]
        resid[:, active] -= winv[:, idx] * z[idx, active]
        sizes[active] += 1
        sub = resid[:, active]
        energy[active] = np.einsum("ij,ij->j", sub, sub)
        active = active[energy[active] > bound]
    return resid, sizes


def grow_supports(z, winv, y, bound, backend=None):
    """Greedily add coefficients of ``z`` (largest first) per column.

    Returns ``(residual, sizes)`` where ``residual[:, j] = y[:, j] - winv @ x_j``
    and ``x_j`` keeps the ``sizes[j]`` largest entries of ``z[:, j]``. Growth in
    a column stops once its squared residual is ``<= bound`` or the support
    is full.
    """
    z = np.ascontiguousarray(z, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    winv = np.ascontiguousarray(winv, dtype=np.float64)
    if _pick(backend) == "numba":
        return _grow_nb(z, winv, y, float(bound))
    return _grow_np(z, winv, y, float(bound))
