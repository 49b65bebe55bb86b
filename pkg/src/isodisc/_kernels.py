import math

import numba
import numpy as np


@numba.njit(cache=True)
def hat_image_dedup(points, mat, r2, h, occ, out):
    """Write the distinct roundings of ``mat @ x`` with squared norm < r2 into ``out``.

    ``occ`` is a zeroed flat occupancy buffer of size (2h+1)**n; it is zeroed
    again before returning. Returns the number of rows written.
    """
    n = points.shape[1]
    side = 2 * h + 1
    q = np.empty(n, np.int64)
    c = 0
    for i in range(points.shape[0]):
        norm2 = 0
        for a in range(n):
            acc = 0.0
            for b in range(n):
                acc += mat[a, b] * points[i, b]
            qa = np.int64(math.ceil(acc - 0.5))
            q[a] = qa
            norm2 += qa * qa
        if norm2 >= r2:
            continue
        idx = 0
        for a in range(n):
            idx = idx * side + (q[a] + h)
        if not occ[idx]:
            occ[idx] = True
            for a in range(n):
                out[c, a] = q[a]
            c += 1
    for i in range(c):
        idx = 0
        for a in range(n):
            idx = idx * side + (out[i, a] + h)
        occ[idx] = False
    return c
