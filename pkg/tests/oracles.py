"""Independent reference implementations used to freeze expected values.

Everything here deliberately avoids the library's own code paths: loops
instead of vectorization, a different splitting algorithm for the TV-L1
reference, exhaustive search where the search space is finite, and
third-party geometry for rasterization checks.
"""

from itertools import product

import numpy as np


def gradient_loops(u):
    """Forward differences with Neumann ends, index by index."""
    h, w = u.shape
    g = np.zeros((2, h, w))
    for i in range(h):
        for j in range(w):
            if j < w - 1:
                g[0, i, j] = u[i, j + 1] - u[i, j]
            if i < h - 1:
                g[1, i, j] = u[i + 1, j] - u[i, j]
    return g


def modified_laplacian_loops(img, r):
    """Direct evaluation of the focus measure with edge replication."""
    h, w = img.shape
    pad = np.pad(img, 1, mode="edge")
    f = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            pi, pj = i + 1, j + 1
            cx = -pad[pi, pj - 1] + 2 * pad[pi, pj] - pad[pi, pj + 1]
            cy = -pad[pi - 1, pj] + 2 * pad[pi, pj] - pad[pi + 1, pj]
            f[i, j] = abs(cx) + abs(cy)
    if r == 0:
        return f
    out = np.zeros((h, w))
    fp = np.pad(f, r, mode="edge")
    size = 2 * r + 1
    for i in range(h):
        for j in range(w):
            out[i, j] = fp[i : i + size, j : j + size].mean()
    return out


def jbu_loops(depth_lo, conf_lo, guide_gray, guide_lo, factor, sigma_spatial, sigma_range):
    """Double-loop joint bilateral upsampling, mirroring the definition."""
    h_lo, w_lo = depth_lo.shape
    h_hi, w_hi = guide_gray.shape
    rad = max(1, int(np.ceil(2.0 * sigma_spatial / factor)))
    out = np.zeros((h_hi, w_hi))
    out_c = np.zeros((h_hi, w_hi))
    for r_hi in range(h_hi):
        for c_hi in range(w_hi):
            rl = (r_hi + 0.5) / factor - 0.5
            cl = (c_hi + 0.5) / factor - 0.5
            r0 = int(round(rl))
            c0 = int(round(cl))
            acc = acc_c = acc_w = 0.0
            for dy in range(-rad, rad + 1):
                for dx in range(-rad, rad + 1):
                    y = r0 + dy
                    x = c0 + dx
                    if not (0 <= y < h_lo and 0 <= x < w_lo):
                        continue
                    dist2 = ((y - rl) * factor) ** 2 + ((x - cl) * factor) ** 2
                    ws = np.exp(-dist2 / (2 * sigma_spatial**2))
                    dg = guide_gray[r_hi, c_hi] - guide_lo[y, x]
                    wr = np.exp(-(dg**2) / (2 * sigma_range**2))
                    w = ws * wr
                    acc += w * depth_lo[y, x]
                    acc_c += w * conf_lo[y, x]
                    acc_w += w
            out[r_hi, c_hi] = acc / acc_w
            out_c[r_hi, c_hi] = acc_c / acc_w
    return out, out_c


def gaussian_fit_least_squares(f_prev, f_peak, f_next, m):
    """Nonlinear least-squares Gaussian fit through the three samples."""
    import warnings

    from scipy.optimize import OptimizeWarning, curve_fit

    xs = np.array([m - 1, m, m + 1], dtype=float)
    ys = np.array([f_prev, f_peak, f_next], dtype=float)

    def gauss(x, a, mu, sigma):
        return a * np.exp(-((x - mu) ** 2) / (2 * sigma**2))

    with warnings.catch_warnings():
        # Three points, three parameters: the exact fit has no covariance.
        warnings.simplefilter("ignore", OptimizeWarning)
        popt, _ = curve_fit(
            gauss, xs, ys, p0=[f_peak, float(m), 1.0], maxfev=20000, xtol=1e-15, ftol=1e-15
        )
    return popt  # amplitude, location, sigma


def cp_tvl1_reference(observed, lam, iters=10000):
    """High-precision TV-L1 minimizer by a primal-dual (Chambolle-Pock) loop.

    Independent of the ADMM path under test: different algorithm, its own
    operators, fixed steps sigma = tau = 1/sqrt(8).
    """
    I = np.asarray(observed, dtype=float)
    sigma = tau = 1.0 / np.sqrt(8.0)
    t = I.copy()
    tbar = t.copy()
    phi = np.zeros((2,) + I.shape)

    def grad(u):
        g = np.zeros((2,) + u.shape)
        g[0, :, :-1] = u[:, 1:] - u[:, :-1]
        g[1, :-1, :] = u[1:, :] - u[:-1, :]
        return g

    def div(g):
        d = np.zeros(g.shape[1:])
        d[:, :-1] += g[0, :, :-1]
        d[:, 1:] -= g[0, :, :-1]
        d[:-1, :] += g[1, :-1, :]
        d[1:, :] -= g[1, :-1, :]
        return d

    for _ in range(iters):
        phi = phi + sigma * grad(tbar)
        mag = np.maximum(1.0, np.sqrt(phi[0] ** 2 + phi[1] ** 2))
        phi = phi / mag[None]
        t_new = t + tau * div(phi)
        dz = t_new - I
        t_new = I + np.sign(dz) * np.maximum(np.abs(dz) - tau * lam, 0.0)
        tbar = 2 * t_new - t
        t = t_new
    return t


def tvl1_energy_1d(t, sig, lam):
    return lam * np.abs(t - sig).sum() + np.abs(np.diff(t)).sum()


def brute_force_tvl1_1x3(sig, lam):
    """Exhaustive TV-L1 minimizer over the input level set.

    On 1-D signals the minimizer takes values from the inputs, so the
    candidate set is finite. Returns (minimizer, energy, unique flag).
    """
    vals = sorted(set(float(v) for v in sig))
    best = None
    best_e = np.inf
    second_e = np.inf
    for combo in product(vals, repeat=len(sig)):
        t = np.array(combo)
        e = tvl1_energy_1d(t, np.asarray(sig, dtype=float), lam)
        if e < best_e - 1e-12:
            second_e = best_e
            best_e = e
            best = t
        elif abs(e - best_e) <= 1e-12 and not np.allclose(t, best):
            second_e = min(second_e, e)
        elif e < second_e:
            second_e = e
    unique = second_e - best_e > 1e-9
    return best, best_e, unique


def hexagon_mask_shapely(radius, half):
    """Rasterize a flat-top hexagon with an independent geometry library."""
    from shapely.geometry import Point, Polygon

    verts = [
        (radius * np.cos(np.deg2rad(a)), radius * np.sin(np.deg2rad(a)))
        for a in range(0, 360, 60)
    ]
    hexagon = Polygon(verts).buffer(1e-9)
    size = 2 * half + 1
    mask = np.zeros((size, size), dtype=bool)
    for iy, y in enumerate(range(-half, half + 1)):
        for ix, x in enumerate(range(-half, half + 1)):
            mask[iy, ix] = hexagon.covers(Point(float(x), float(y)))
    return mask


def hex_blur_direct(img, radius, kernel_fn):
    """Fractional-radius hexagonal blur as the documented floor/ceil blend."""
    import scipy.ndimage as ndi

    def conv(a, r):
        if r == 0:
            return a.copy()
        return ndi.convolve(a, kernel_fn(r), mode="constant", cval=0.0)

    lo = int(np.floor(radius))
    hi = int(np.ceil(radius))
    if lo == hi:
        return conv(img, lo)
    frac = radius - lo
    return (1 - frac) * conv(img, lo) + frac * conv(img, hi)
