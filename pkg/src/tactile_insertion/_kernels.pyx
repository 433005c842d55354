# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled signed-distance kernels for convex cross-sections.

Mirrors ``_kernels_py``; both return ``(sd, normal)`` with ``sd`` negative
inside the region and ``normal`` the outward unit normal of the closest
boundary feature.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, hypot

cnp.import_array()

DEF BISECT_ITERS = 80


def polygon_signed_distance(points, vertices):
    cdef double[:, ::1] q = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
    cdef double[:, ::1] v = np.ascontiguousarray(vertices, dtype=np.float64)
    cdef Py_ssize_t n = q.shape[0]
    cdef Py_ssize_t m = v.shape[0]
    out_sd = np.empty(n, dtype=np.float64)
    out_n = np.empty((n, 2), dtype=np.float64)
    cdef double[::1] sd = out_sd
    cdef double[:, ::1] nrm = out_n

    edge_arr = np.empty((m, 2), dtype=np.float64)
    unit_arr = np.empty((m, 2), dtype=np.float64)
    len2_arr = np.empty(m, dtype=np.float64)
    cdef double[:, ::1] e = edge_arr
    cdef double[:, ::1] u = unit_arr
    cdef double[::1] len2 = len2_arr
    cdef Py_ssize_t i, k, j, k_best
    cdef double ex, ey, ln, px, py, plane, best_plane, t, cx, cy, dx, dy, d2, best_d2
    cdef double best_dx = 0.0, best_dy = 0.0

    for k in range(m):
        j = k + 1 if k + 1 < m else 0
        ex = v[j, 0] - v[k, 0]
        ey = v[j, 1] - v[k, 1]
        ln = hypot(ex, ey)
        e[k, 0] = ex
        e[k, 1] = ey
        len2[k] = ex * ex + ey * ey
        u[k, 0] = ey / ln
        u[k, 1] = -ex / ln

    for i in range(n):
        best_plane = -1e300
        k_best = 0
        for k in range(m):
            px = q[i, 0] - v[k, 0]
            py = q[i, 1] - v[k, 1]
            plane = px * u[k, 0] + py * u[k, 1]
            if plane > best_plane:
                best_plane = plane
                k_best = k
        if best_plane <= 0.0:
            sd[i] = best_plane
            nrm[i, 0] = u[k_best, 0]
            nrm[i, 1] = u[k_best, 1]
            continue
        best_d2 = 1e300
        for k in range(m):
            px = q[i, 0] - v[k, 0]
            py = q[i, 1] - v[k, 1]
            t = (px * e[k, 0] + py * e[k, 1]) / len2[k]
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
            cx = v[k, 0] + t * e[k, 0]
            cy = v[k, 1] + t * e[k, 1]
            dx = q[i, 0] - cx
            dy = q[i, 1] - cy
            d2 = dx * dx + dy * dy
            if d2 < best_d2:
                best_d2 = d2
                best_dx = dx
                best_dy = dy
        d2 = sqrt(best_d2)
        sd[i] = d2
        nrm[i, 0] = best_dx / d2
        nrm[i, 1] = best_dy / d2
    return out_sd, out_n


cdef void _closest_first_quadrant(double y0, double y1, double e0, double e1,
                                  double* x0, double* x1) nogil:
    cdef double z0, z1, g, r0, n0, lo, hi, s, ra, rb, f, numer, denom, xde
    cdef int it
    if y1 > 0.0:
        if y0 > 0.0:
            z0 = y0 / e0
            z1 = y1 / e1
            g = z0 * z0 + z1 * z1 - 1.0
            if g == 0.0:
                x0[0] = y0
                x1[0] = y1
                return
            r0 = (e0 / e1) * (e0 / e1)
            n0 = r0 * z0
            lo = z1 - 1.0
            hi = 0.0 if g < 0.0 else hypot(n0, z1) - 1.0
            for it in range(BISECT_ITERS):
                s = 0.5 * (lo + hi)
                ra = n0 / (s + r0)
                rb = z1 / (s + 1.0)
                f = ra * ra + rb * rb - 1.0
                if f > 0.0:
                    lo = s
                elif f < 0.0:
                    hi = s
                else:
                    break
            s = 0.5 * (lo + hi)
            x0[0] = r0 * y0 / (s + r0)
            x1[0] = y1 / (s + 1.0)
        else:
            x0[0] = 0.0
            x1[0] = e1
        return
    numer = e0 * y0
    denom = e0 * e0 - e1 * e1
    if numer < denom:
        xde = numer / denom
        x0[0] = e0 * xde
        x1[0] = e1 * sqrt(1.0 - xde * xde)
    else:
        x0[0] = e0
        x1[0] = 0.0


def ellipse_signed_distance(points, double a, double b):
    cdef double[:, ::1] q = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
    cdef Py_ssize_t n = q.shape[0]
    out_sd = np.empty(n, dtype=np.float64)
    out_n = np.empty((n, 2), dtype=np.float64)
    cdef double[::1] sd = out_sd
    cdef double[:, ::1] nrm = out_n
    cdef bint swap = b > a
    cdef double e0 = b if swap else a
    cdef double e1 = a if swap else b
    cdef Py_ssize_t i
    cdef double qx, qy, sx, sy, y0, y1, x0 = 0.0, x1 = 0.0, d, nx, ny, norm
    for i in range(n):
        if swap:
            qx = q[i, 1]
            qy = q[i, 0]
        else:
            qx = q[i, 0]
            qy = q[i, 1]
        sx = -1.0 if qx < 0.0 else 1.0
        sy = -1.0 if qy < 0.0 else 1.0
        y0 = fabs(qx)
        y1 = fabs(qy)
        _closest_first_quadrant(y0, y1, e0, e1, &x0, &x1)
        d = hypot(x0 - y0, x1 - y1)
        if (y0 / e0) * (y0 / e0) + (y1 / e1) * (y1 / e1) < 1.0:
            d = -d
        sd[i] = d
        nx = x0 / (e0 * e0)
        ny = x1 / (e1 * e1)
        norm = hypot(nx, ny)
        nx = sx * nx / norm
        ny = sy * ny / norm
        if swap:
            nrm[i, 0] = ny
            nrm[i, 1] = nx
        else:
            nrm[i, 0] = nx
            nrm[i, 1] = ny
    return out_sd, out_n
