# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: fast-marching solve, DDA raycast, scan integration.

Semantics mirror ``_purepy`` exactly (same update formulas, same traversal
order, same tie-breaking), so either backend can serve the rest of the
package interchangeably.
"""

from libc.math cimport sqrt, floor, INFINITY

import numpy as np

cimport numpy as cnp

cnp.import_array()

DEF EPS_FRAC = 1e-9


# ---------------------------------------------------------------------------
# binary min-heap over (t, iy, ix), ordered lexicographically like the
# Python tuple heap in the fallback
# ---------------------------------------------------------------------------

cdef inline bint _heap_less(double ta, int ya, int xa,
                            double tb, int yb, int xb) nogil:
    if ta != tb:
        return ta < tb
    if ya != yb:
        return ya < yb
    return xa < xb


cdef void _heap_push(double[::1] ht, int[::1] hy, int[::1] hx, Py_ssize_t* n,
                     double t, int iy, int ix) nogil:
    cdef Py_ssize_t i = n[0]
    cdef Py_ssize_t parent
    ht[i] = t
    hy[i] = iy
    hx[i] = ix
    n[0] += 1
    while i > 0:
        parent = (i - 1) >> 1
        if _heap_less(ht[i], hy[i], hx[i], ht[parent], hy[parent], hx[parent]):
            ht[i], ht[parent] = ht[parent], ht[i]
            hy[i], hy[parent] = hy[parent], hy[i]
            hx[i], hx[parent] = hx[parent], hx[i]
            i = parent
        else:
            break


cdef void _heap_pop(double[::1] ht, int[::1] hy, int[::1] hx, Py_ssize_t* n,
                    double* t, int* iy, int* ix) nogil:
    cdef Py_ssize_t i = 0, child
    cdef Py_ssize_t last = n[0] - 1
    t[0] = ht[0]
    iy[0] = hy[0]
    ix[0] = hx[0]
    ht[0] = ht[last]
    hy[0] = hy[last]
    hx[0] = hx[last]
    n[0] = last
    while True:
        child = 2 * i + 1
        if child >= last:
            break
        if child + 1 < last and _heap_less(ht[child + 1], hy[child + 1], hx[child + 1],
                                           ht[child], hy[child], hx[child]):
            child += 1
        if _heap_less(ht[child], hy[child], hx[child], ht[i], hy[i], hx[i]):
            ht[i], ht[child] = ht[child], ht[i]
            hy[i], hy[child] = hy[child], hy[i]
            hx[i], hx[child] = hx[child], hx[i]
            i = child
        else:
            break


def fmm(traversable, seeds, double h):
    """First-order fast-marching distance field on the 4-neighborhood.

    See ``navvlm._purepy.fmm`` for the full contract.
    """
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] trav = np.ascontiguousarray(traversable, dtype=np.uint8)
    cdef cnp.ndarray[cnp.int64_t, ndim=2] seed_arr = np.ascontiguousarray(seeds, dtype=np.int64)
    cdef Py_ssize_t height = trav.shape[0]
    cdef Py_ssize_t width = trav.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] t_arr = np.full((height, width), np.inf, dtype=np.float64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] state_arr = np.zeros((height, width), dtype=np.uint8)
    cdef double[:, ::1] t_field = t_arr
    cdef cnp.uint8_t[:, ::1] state = state_arr
    cdef cnp.uint8_t[:, ::1] tv = trav

    # each cell improves at most once per accepted 4-neighbor, so 4*H*W
    # plus the seeds bounds the number of heap pushes
    cdef Py_ssize_t cap = 4 * height * width + seed_arr.shape[0] + 8
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ht_arr = np.empty(cap, dtype=np.float64)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] hy_arr = np.empty(cap, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] hx_arr = np.empty(cap, dtype=np.int32)
    cdef double[::1] ht = ht_arr
    cdef int[::1] hy = hy_arr
    cdef int[::1] hx = hx_arr
    cdef Py_ssize_t heap_n = 0

    cdef Py_ssize_t k
    cdef int ix, iy, jx, jy, d
    cdef double t, tx, ty, diff, cand
    cdef int dxs[4]
    cdef int dys[4]
    dxs[0] = 1; dxs[1] = -1; dxs[2] = 0; dxs[3] = 0
    dys[0] = 0; dys[1] = 0; dys[2] = 1; dys[3] = -1

    for k in range(seed_arr.shape[0]):
        ix = <int>seed_arr[k, 0]
        iy = <int>seed_arr[k, 1]
        if t_field[iy, ix] != 0.0:
            t_field[iy, ix] = 0.0
            state[iy, ix] = 1
            _heap_push(ht, hy, hx, &heap_n, 0.0, iy, ix)

    while heap_n > 0:
        _heap_pop(ht, hy, hx, &heap_n, &t, &iy, &ix)
        if state[iy, ix] == 2:
            continue
        state[iy, ix] = 2
        for d in range(4):
            jy = iy + dys[d]
            jx = ix + dxs[d]
            if jy < 0 or jy >= height or jx < 0 or jx >= width:
                continue
            if state[jy, jx] == 2 or not tv[jy, jx]:
                continue
            tx = INFINITY
            if jx > 0 and state[jy, jx - 1] == 2:
                tx = t_field[jy, jx - 1]
            if jx < width - 1 and state[jy, jx + 1] == 2 and t_field[jy, jx + 1] < tx:
                tx = t_field[jy, jx + 1]
            ty = INFINITY
            if jy > 0 and state[jy - 1, jx] == 2:
                ty = t_field[jy - 1, jx]
            if jy < height - 1 and state[jy + 1, jx] == 2 and t_field[jy + 1, jx] < ty:
                ty = t_field[jy + 1, jx]
            if tx > ty:
                tx, ty = ty, tx
            if ty - tx < h:
                diff = tx - ty
                cand = 0.5 * (tx + ty + sqrt(2.0 * h * h - diff * diff))
            else:
                cand = tx + h
            if cand < t_field[jy, jx]:
                t_field[jy, jx] = cand
                state[jy, jx] = 1
                _heap_push(ht, hy, hx, &heap_n, cand, jy, jx)

    return t_arr


def raycast(obstacles, double x, double y, dir_x, dir_y, double max_range, double h):
    """Cast rays by DDA; see ``navvlm._purepy.raycast``."""
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] obst = np.ascontiguousarray(obstacles, dtype=np.uint8)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dxs = np.ascontiguousarray(dir_x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dys = np.ascontiguousarray(dir_y, dtype=np.float64)
    cdef Py_ssize_t height = obst.shape[0]
    cdef Py_ssize_t width = obst.shape[1]
    cdef Py_ssize_t n = dxs.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ranges = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] hits = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] ob = obst
    cdef Py_ssize_t k
    cdef double rng
    cdef bint hit
    for k in range(n):
        _trace(ob, height, width, x, y, dxs[k], dys[k], max_range, h, &rng, &hit)
        ranges[k] = rng
        hits[k] = 1 if hit else 0
    return ranges, hits


cdef void _trace(cnp.uint8_t[:, ::1] obst, Py_ssize_t height, Py_ssize_t width,
                 double x, double y, double dx, double dy, double max_range, double h,
                 double* out_range, bint* out_hit) nogil:
    cdef long ix = <long>floor(x / h)
    cdef long iy = <long>floor(y / h)
    cdef long step_x, step_y
    cdef double t_max_x, t_max_y, t_delta_x, t_delta_y, t

    if dx > 0.0:
        step_x = 1
        t_max_x = ((ix + 1) * h - x) / dx
        t_delta_x = h / dx
    elif dx < 0.0:
        step_x = -1
        t_max_x = (ix * h - x) / dx
        t_delta_x = -h / dx
    else:
        step_x = 0
        t_max_x = INFINITY
        t_delta_x = INFINITY
    if dy > 0.0:
        step_y = 1
        t_max_y = ((iy + 1) * h - y) / dy
        t_delta_y = h / dy
    elif dy < 0.0:
        step_y = -1
        t_max_y = (iy * h - y) / dy
        t_delta_y = -h / dy
    else:
        step_y = 0
        t_max_y = INFINITY
        t_delta_y = INFINITY

    while True:
        if t_max_x < t_max_y:
            t = t_max_x
            t_max_x += t_delta_x
            ix += step_x
        else:
            t = t_max_y
            t_max_y += t_delta_y
            iy += step_y
        if t > max_range:
            out_range[0] = max_range
            out_hit[0] = 0
            return
        if ix < 0 or ix >= width or iy < 0 or iy >= height:
            out_range[0] = max_range
            out_hit[0] = 0
            return
        if obst[iy, ix]:
            out_range[0] = t
            out_hit[0] = 1
            return


def integrate(cells, double x, double y, dir_x, dir_y, ranges, hits, double h,
              int free_value, int obstacle_value):
    """Write one depth scan into an occupancy array, in place.

    See ``navvlm._purepy.integrate``.
    """
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] cl = cells
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dxs = np.ascontiguousarray(dir_x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dys = np.ascontiguousarray(dir_y, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rng = np.ascontiguousarray(ranges, dtype=np.float64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] ht = np.ascontiguousarray(hits, dtype=np.uint8)
    cdef Py_ssize_t height = cl.shape[0]
    cdef Py_ssize_t width = cl.shape[1]
    cdef cnp.uint8_t[:, ::1] cv = cl
    cdef double eps = EPS_FRAC * h
    cdef Py_ssize_t k
    for k in range(dxs.shape[0]):
        _integrate_ray(cv, height, width, x, y, dxs[k], dys[k], rng[k], ht[k] != 0,
                       h, eps, <cnp.uint8_t>free_value, <cnp.uint8_t>obstacle_value)


cdef void _integrate_ray(cnp.uint8_t[:, ::1] cells, Py_ssize_t height, Py_ssize_t width,
                         double x, double y, double dx, double dy, double rng, bint hit,
                         double h, double eps,
                         cnp.uint8_t free_value, cnp.uint8_t obstacle_value) nogil:
    cdef long ix = <long>floor(x / h)
    cdef long iy = <long>floor(y / h)
    cdef long step_x, step_y
    cdef double t_max_x, t_max_y, t_delta_x, t_delta_y, t_exit, t_entry

    if dx > 0.0:
        step_x = 1
        t_max_x = ((ix + 1) * h - x) / dx
        t_delta_x = h / dx
    elif dx < 0.0:
        step_x = -1
        t_max_x = (ix * h - x) / dx
        t_delta_x = -h / dx
    else:
        step_x = 0
        t_max_x = INFINITY
        t_delta_x = INFINITY
    if dy > 0.0:
        step_y = 1
        t_max_y = ((iy + 1) * h - y) / dy
        t_delta_y = h / dy
    elif dy < 0.0:
        step_y = -1
        t_max_y = (iy * h - y) / dy
        t_delta_y = -h / dy
    else:
        step_y = 0
        t_max_y = INFINITY
        t_delta_y = INFINITY

    while True:
        if ix < 0 or ix >= width or iy < 0 or iy >= height:
            return
        t_exit = t_max_x if t_max_x < t_max_y else t_max_y
        if rng < t_exit - eps:
            cells[iy, ix] = obstacle_value if hit else free_value
            return
        cells[iy, ix] = free_value
        if t_max_x < t_max_y:
            t_entry = t_max_x
            t_max_x += t_delta_x
            ix += step_x
        else:
            t_entry = t_max_y
            t_max_y += t_delta_y
            iy += step_y
        if t_entry > rng + eps:
            return
