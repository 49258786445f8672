"""Pure-Python kernel fallback.

Same signatures and semantics as the compiled ``_kernels`` extension; used
when the extension is unavailable or explicitly disabled.  Grid arrays are
indexed ``[iy, ix]``; world coordinates are meters with cell (ix, iy)
covering ``[ix*h, (ix+1)*h) x [iy*h, (iy+1)*h)``.
"""

import heapq
import math

import numpy as np

# Fraction of a cell treated as "the same boundary" when matching a ray
# range against a DDA crossing; absorbs float drift without misclassifying
# any physically meaningful endpoint.
_EPS_FRAC = 1e-9


def fmm(traversable, seeds, h):
    """First-order fast-marching distance field on the 4-neighborhood.

    traversable : (H, W) uint8/bool, nonzero where a cell may be crossed
    seeds       : (N, 2) int array of (ix, iy) source cells, T = 0 there
    h           : cell size in meters

    Returns (H, W) float64 of arrival distances, +inf where unreached.
    The upwind update solves (T - Tx)^2 + (T - Ty)^2 = h^2 when the two
    upwind values are within h of each other, otherwise T = min(Tx, Ty) + h.
    """
    trav = np.asarray(traversable)
    height, width = trav.shape
    t_field = np.full((height, width), np.inf, dtype=np.float64)
    # 0 = far, 1 = narrow band, 2 = accepted
    state = np.zeros((height, width), dtype=np.uint8)

    heap = []
    for k in range(len(seeds)):
        ix = int(seeds[k][0])
        iy = int(seeds[k][1])
        if t_field[iy, ix] != 0.0:
            t_field[iy, ix] = 0.0
            state[iy, ix] = 1
            heapq.heappush(heap, (0.0, iy, ix))

    while heap:
        t, iy, ix = heapq.heappop(heap)
        if state[iy, ix] == 2:
            continue
        state[iy, ix] = 2
        for dy, dx in ((0, 1), (0, -1), (1, 0), (-1, 0)):
            jy = iy + dy
            jx = ix + dx
            if not (0 <= jy < height and 0 <= jx < width):
                continue
            if state[jy, jx] == 2 or not trav[jy, jx]:
                continue
            tx = math.inf
            if jx > 0 and state[jy, jx - 1] == 2:
                tx = t_field[jy, jx - 1]
            if jx < width - 1 and state[jy, jx + 1] == 2 and t_field[jy, jx + 1] < tx:
                tx = t_field[jy, jx + 1]
            ty = math.inf
            if jy > 0 and state[jy - 1, jx] == 2:
                ty = t_field[jy - 1, jx]
            if jy < height - 1 and state[jy + 1, jx] == 2 and t_field[jy + 1, jx] < ty:
                ty = t_field[jy + 1, jx]
            if tx > ty:
                tx, ty = ty, tx
            if ty - tx < h:
                diff = tx - ty
                cand = 0.5 * (tx + ty + math.sqrt(2.0 * h * h - diff * diff))
            else:
                cand = tx + h
            if cand < t_field[jy, jx]:
                t_field[jy, jx] = cand
                state[jy, jx] = 1
                heapq.heappush(heap, (cand, jy, jx))

    return t_field


def raycast(obstacles, x, y, dir_x, dir_y, max_range, h):
    """Cast rays through the obstacle grid by DDA traversal.

    Ray directions come in as unit-vector components so that both kernel
    backends consume identical doubles.  Returns (ranges, hits): range is
    the distance to the first obstacle cell boundary along each ray,
    clamped to max_range with hit = 0 when nothing is struck (including
    rays that leave the grid).
    """
    obst = np.asarray(obstacles)
    height, width = obst.shape
    n = len(dir_x)
    ranges = np.empty(n, dtype=np.float64)
    hits = np.zeros(n, dtype=np.uint8)
    for k in range(n):
        rng, hit = _trace(obst, height, width, x, y, dir_x[k], dir_y[k], max_range, h)
        ranges[k] = rng
        hits[k] = 1 if hit else 0
    return ranges, hits


def _trace(obst, height, width, x, y, dx, dy, max_range, h):
    ix = int(math.floor(x / h))
    iy = int(math.floor(y / h))

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
        t_max_x = math.inf
        t_delta_x = math.inf
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
        t_max_y = math.inf
        t_delta_y = math.inf

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
            return max_range, False
        if not (0 <= ix < width and 0 <= iy < height):
            return max_range, False
        if obst[iy, ix]:
            return t, True


def integrate(cells, x, y, dir_x, dir_y, ranges, hits, h, free_value, obstacle_value):
    """Write one depth scan into an occupancy array, in place.

    Cells fully crossed before a ray's endpoint become free; the cell
    containing the endpoint becomes an obstacle when the ray hit, free
    otherwise.  Later rays overwrite earlier ones.
    """
    height, width = cells.shape
    eps = _EPS_FRAC * h
    for k in range(len(dir_x)):
        _integrate_ray(cells, height, width, x, y, dir_x[k], dir_y[k], ranges[k],
                       bool(hits[k]), h, eps, free_value, obstacle_value)


def _integrate_ray(cells, height, width, x, y, dx, dy, rng, hit, h, eps,
                   free_value, obstacle_value):
    ix = int(math.floor(x / h))
    iy = int(math.floor(y / h))

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
        t_max_x = math.inf
        t_delta_x = math.inf
    if dy > 0.0:
        step_y = 1
        t_max_y = ((iy + 1) * h - y) / dy
        t_delta_y = h / dy
    else:
        if dy < 0.0:
            step_y = -1
            t_max_y = (iy * h - y) / dy
            t_delta_y = -h / dy
        else:
            step_y = 0
            t_max_y = math.inf
            t_delta_y = math.inf

    while True:
        if not (0 <= ix < width and 0 <= iy < height):
            return
        t_exit = t_max_x if t_max_x < t_max_y else t_max_y
        if rng < t_exit - eps:
            # endpoint lies inside this cell
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
