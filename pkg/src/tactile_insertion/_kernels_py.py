"""Pure-numpy implementations of the signed-distance kernels.

Same signatures and semantics as the compiled ``_kernels`` module; used when
the extension is not built or when ``TACTILE_INSERTION_PURE_PYTHON`` is set.
"""
import numpy as np

_BISECT_ITERS = 80


def polygon_signed_distance(points, vertices):
    """Signed distance and outward unit normal of points w.r.t. a convex CCW polygon."""
    q = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
    v = np.ascontiguousarray(vertices, dtype=np.float64)
    e = np.roll(v, -1, axis=0) - v
    lengths = np.hypot(e[:, 0], e[:, 1])
    normals = np.stack([e[:, 1], -e[:, 0]], axis=1) / lengths[:, None]

    rel = q[:, None, :] - v[None, :, :]
    plane = np.einsum("nmk,mk->nm", rel, normals)
    k_in = np.argmax(plane, axis=1)
    sd_in = plane[np.arange(len(q)), k_in]

    s = np.einsum("nmk,mk->nm", rel, e) / (lengths ** 2)[None, :]
    s = np.clip(s, 0.0, 1.0)
    closest = v[None, :, :] + s[..., None] * e[None, :, :]
    diff = q[:, None, :] - closest
    dist = np.hypot(diff[..., 0], diff[..., 1])
    k_out = np.argmin(dist, axis=1)
    rows = np.arange(len(q))
    sd_out = dist[rows, k_out]

    inside = sd_in <= 0.0
    sd = np.where(inside, sd_in, sd_out)
    n_out = diff[rows, k_out] / np.where(sd_out > 0.0, sd_out, 1.0)[:, None]
    normal = np.where(inside[:, None], normals[k_in], n_out)
    return sd, normal


def _ellipse_first_quadrant(y0, y1, e0, e1):
    # Robust closest point on x^2/e0^2 + y^2/e1^2 = 1 for y0, y1 >= 0, e0 >= e1.
    n = y0.shape[0]
    x0 = np.empty(n)
    x1 = np.empty(n)

    both = (y0 > 0.0) & (y1 > 0.0)
    if np.any(both):
        a0 = y0[both]
        a1 = y1[both]
        z0 = a0 / e0
        z1 = a1 / e1
        g = z0 * z0 + z1 * z1 - 1.0
        r0 = (e0 / e1) ** 2
        n0 = r0 * z0
        lo = z1 - 1.0
        hi = np.where(g < 0.0, 0.0, np.hypot(n0, z1) - 1.0)
        for _ in range(_BISECT_ITERS):
            s = 0.5 * (lo + hi)
            r_a = n0 / (s + r0)
            r_b = z1 / (s + 1.0)
            f = r_a * r_a + r_b * r_b - 1.0
            lo = np.where(f > 0.0, s, lo)
            hi = np.where(f < 0.0, s, hi)
        s = 0.5 * (lo + hi)
        s = np.where(g == 0.0, 0.0, s)
        x0[both] = r0 * a0 / (s + r0)
        x1[both] = a1 / (s + 1.0)

    on_y = (~both) & (y1 > 0.0)
    x0[on_y] = 0.0
    x1[on_y] = e1

    on_x = (~both) & (~on_y)
    if np.any(on_x):
        a0 = y0[on_x]
        numer = e0 * a0
        denom = e0 * e0 - e1 * e1
        inner = numer < denom
        xde = np.where(inner, numer / denom if denom > 0 else 1.0, 1.0)
        x0[on_x] = np.where(inner, e0 * xde, e0)
        x1[on_x] = np.where(inner, e1 * np.sqrt(np.maximum(1.0 - xde * xde, 0.0)), 0.0)
    return x0, x1


def ellipse_signed_distance(points, a, b):
    """Signed distance and outward normal w.r.t. an axis-aligned ellipse."""
    q = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
    swap = b > a
    if swap:
        q = q[:, ::-1]
        a, b = b, a
    sx = np.where(q[:, 0] < 0.0, -1.0, 1.0)
    sy = np.where(q[:, 1] < 0.0, -1.0, 1.0)
    y0 = np.abs(q[:, 0])
    y1 = np.abs(q[:, 1])
    x0, x1 = _ellipse_first_quadrant(y0, y1, a, b)
    d = np.hypot(x0 - y0, x1 - y1)
    inside = (y0 / a) ** 2 + (y1 / b) ** 2 < 1.0
    sd = np.where(inside, -d, d)
    nx = x0 / (a * a)
    ny = x1 / (b * b)
    norm = np.hypot(nx, ny)
    normal = np.stack([sx * nx / norm, sy * ny / norm], axis=1)
    if swap:
        normal = normal[:, ::-1]
    return sd, np.ascontiguousarray(normal)
