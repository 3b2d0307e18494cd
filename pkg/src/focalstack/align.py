"""Inter-frame alignment via a plane-decomposed homography model.

All per-plane homographies between two views of a piecewise-planar scene
share one basis homography H1 and a 3-vector K, with a rank-one per-plane
correction:

    d_i * H_i = H1 + K @ delta_n_i.T

Motion estimation alternates two linear least-squares solves: per-plane
normal corrections delta_n_i with (H1, K) fixed, then the joint 11-vector
(h1..h8, k1, k2, k3) with the delta_n_i fixed. The reference plane carries
delta_n = 0 and d = 1, which fixes the scale gauge. Frames warp to the
reference via the dominant-plane composed homography.

Points are (x, y) with x = column, y = row; homographies are 3x3 arrays
normalized so h[2, 2] = 1 and act on homogeneous (x, y, 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.ndimage as ndi

from focalstack.stack_io import FocalStack, to_grayscale

COND_LIMIT = 1e8


@dataclass(frozen=True)
class CorrespondenceSet:
    """Matched point pairs, each tagged with a plane-patch id."""

    pts_a: np.ndarray  # (n, 2) in frame a
    pts_b: np.ndarray  # (n, 2) in frame b
    plane_ids: np.ndarray  # (n,) int

    def __post_init__(self):
        a = np.asarray(self.pts_a, dtype=float)
        b = np.asarray(self.pts_b, dtype=float)
        ids = np.asarray(self.plane_ids, dtype=int)
        if a.shape != b.shape or a.ndim != 2 or a.shape[1] != 2:
            raise ValueError("pts_a and pts_b must both be (n, 2)")
        if ids.shape != (a.shape[0],):
            raise ValueError("one plane id per correspondence required")
        object.__setattr__(self, "pts_a", a)
        object.__setattr__(self, "pts_b", b)
        object.__setattr__(self, "plane_ids", ids)

    def __len__(self) -> int:
        return self.pts_a.shape[0]

    def patch(self, plane_id: int) -> tuple[np.ndarray, np.ndarray]:
        m = self.plane_ids == plane_id
        return self.pts_a[m], self.pts_b[m]

    @property
    def planes(self) -> np.ndarray:
        return np.unique(self.plane_ids)


@dataclass(frozen=True)
class EpipolarModel:
    """Shared (H1, K) plus per-plane normal corrections."""

    h1: np.ndarray  # (3, 3), h1[2, 2] == 1
    k: np.ndarray  # (3,)
    delta_normals: dict[int, np.ndarray]  # plane id -> (3,)
    reference_plane: int

    def __post_init__(self):
        object.__setattr__(self, "h1", normalize_homography(self.h1))
        object.__setattr__(self, "k", np.asarray(self.k, dtype=float).reshape(3))
        dn = {
            int(i): np.asarray(v, dtype=float).reshape(3)
            for i, v in self.delta_normals.items()
        }
        object.__setattr__(self, "delta_normals", dn)
        ref = dn.get(self.reference_plane)
        if ref is not None and np.any(ref != 0):
            raise ValueError("reference plane must carry delta_n = 0")

    @property
    def free_parameter_count(self) -> int:
        """8 for H1, 3 for K, 3 per non-reference plane; d_i are derived."""
        non_ref = sum(1 for i in self.delta_normals if i != self.reference_plane)
        return 8 + 3 + 3 * non_ref

    def scale(self, plane_id: int) -> float:
        dn = self.delta_normals.get(int(plane_id), np.zeros(3))
        return float((self.h1 + np.outer(self.k, dn))[2, 2])


def normalize_homography(h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=float).reshape(3, 3)
    if abs(h[2, 2]) < 1e-12:
        raise ValueError("improper homography: h[2,2] vanishes")
    h = h / h[2, 2]
    if abs(np.linalg.det(h)) <= 1e-12:
        raise ValueError("improper homography: singular matrix")
    return h


def apply_homography(h: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Map (n, 2) points through a homography."""
    p = np.asarray(pts, dtype=float)
    ones = np.ones((p.shape[0], 1))
    q = np.hstack([p, ones]) @ h.T
    return q[:, :2] / q[:, 2:3]


def fit_homography_dlt(pts_a: np.ndarray, pts_b: np.ndarray) -> np.ndarray:
    """Direct linear transform with Hartley normalization."""
    a = np.asarray(pts_a, dtype=float)
    b = np.asarray(pts_b, dtype=float)
    if a.shape[0] < 4:
        raise ValueError("insufficient features: DLT needs at least 4 points")

    def norm_transform(p):
        mean = p.mean(axis=0)
        d = np.sqrt(((p - mean) ** 2).sum(axis=1)).mean()
        s = np.sqrt(2.0) / max(d, 1e-12)
        t = np.array([[s, 0, -s * mean[0]], [0, s, -s * mean[1]], [0, 0, 1.0]])
        return t

    ta = norm_transform(a)
    tb = norm_transform(b)
    an = apply_homography(ta, a)
    bn = apply_homography(tb, b)
    rows = []
    for (x, y), (u, v) in zip(an, bn):
        rows.append([x, y, 1, 0, 0, 0, -u * x, -u * y, -u])
        rows.append([0, 0, 0, x, y, 1, -v * x, -v * y, -v])
    m = np.asarray(rows)
    _, _, vt = np.linalg.svd(m)
    h = vt[-1].reshape(3, 3)
    h = np.linalg.inv(tb) @ h @ ta
    return normalize_homography(h)


def solve_delta_n(
    model: EpipolarModel, pts_a: np.ndarray, pts_b: np.ndarray
) -> np.ndarray:
    """Least-squares normal correction for one plane, (H1, K) fixed.

    Each correspondence contributes two equations; the row vectors combine
    K with the point coordinates, the right-hand sides are the residuals of
    the basis homography.
    """
    a = np.asarray(pts_a, dtype=float)
    b = np.asarray(pts_b, dtype=float)
    if a.shape[0] < 2:
        raise ValueError("degenerate patch: needs at least 2 correspondences")
    h = model.h1
    k1, k2, k3 = model.k
    x, y = a[:, 0], a[:, 1]
    xp, yp = b[:, 0], b[:, 1]
    v1 = np.stack([k1 * x - k3 * x * xp, k1 * y - k3 * y * xp, k1 - k3 * xp], axis=1)
    v2 = np.stack([k2 * x - k3 * x * yp, k2 * y - k3 * y * yp, k2 - k3 * yp], axis=1)
    b1 = xp * (h[2, 0] * x + h[2, 1] * y + 1.0) - (h[0, 0] * x + h[0, 1] * y + h[0, 2])
    b2 = yp * (h[2, 0] * x + h[2, 1] * y + 1.0) - (h[1, 0] * x + h[1, 1] * y + h[1, 2])
    mat = np.vstack([v1, v2])
    rhs = np.concatenate([b1, b2])
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv[0] < 1e-300 or sv[0] / max(sv[-1], 1e-300) > COND_LIMIT:
        raise ValueError("degenerate patch")
    sol, *_ = np.linalg.lstsq(mat, rhs, rcond=None)
    return sol


def solve_h1_k(
    delta_normals: dict[int, np.ndarray], c: CorrespondenceSet
) -> tuple[np.ndarray, np.ndarray]:
    """Joint least squares for (h1..h8, k1..k3) with normals fixed.

    Planes whose delta_n vanishes contribute nothing to the K columns; K
    components without support stay 0 and the fit reduces to the standard
    8-parameter homography (the solved column set shrinks accordingly).
    """
    a, b = c.pts_a, c.pts_b
    n = len(c)
    dn = np.zeros((n, 3))
    for pid in c.planes:
        m = c.plane_ids == pid
        dn[m] = np.asarray(delta_normals.get(int(pid), np.zeros(3)), dtype=float)
    x, y = a[:, 0], a[:, 1]
    xp, yp = b[:, 0], b[:, 1]
    # delta_n . (x, y, 1): points live on the z = 1 plane.
    dnp = dn[:, 0] * x + dn[:, 1] * y + dn[:, 2]
    zero = np.zeros(n)
    one = np.ones(n)
    e_rows = np.stack(
        [x, y, one, zero, zero, zero, -x * xp, -y * xp, dnp, zero, -xp * dnp], axis=1
    )
    f_rows = np.stack(
        [zero, zero, zero, x, y, one, -x * yp, -y * yp, zero, dnp, -yp * dnp], axis=1
    )
    q = np.vstack([e_rows, f_rows])
    rhs = np.concatenate([xp, yp])
    col_norms = np.linalg.norm(q, axis=0)
    active = col_norms > 1e-12 * max(1.0, col_norms.max())
    qa = q[:, active]
    if qa.shape[0] < qa.shape[1]:
        raise ValueError("degenerate configuration: underdetermined system")
    sv = np.linalg.svd(qa, compute_uv=False)
    if sv[0] < 1e-300 or sv[0] / max(sv[-1], 1e-300) > COND_LIMIT:
        raise ValueError("degenerate configuration")
    sol_a, *_ = np.linalg.lstsq(qa, rhs, rcond=None)
    g = np.zeros(11)
    g[active] = sol_a
    h1 = np.array(
        [[g[0], g[1], g[2]], [g[3], g[4], g[5]], [g[6], g[7], 1.0]], dtype=float
    )
    return normalize_homography(h1), g[8:11].copy()


def compose_homography(model: EpipolarModel, plane_id: int) -> np.ndarray:
    """Per-plane homography (H1 + K delta_n^T) / d_i, renormalized."""
    dn = model.delta_normals.get(int(plane_id), np.zeros(3))
    m = model.h1 + np.outer(model.k, dn)
    if abs(m[2, 2]) < 1e-12:
        raise ValueError("improper homography: h[2,2] vanishes")
    return m / m[2, 2]


def reprojection_error(h: np.ndarray, c: CorrespondenceSet) -> float:
    """Mean Euclidean distance between mapped a-points and b-points."""
    mapped = apply_homography(h, c.pts_a)
    return float(np.sqrt(((mapped - c.pts_b) ** 2).sum(axis=1)).mean())


def model_reprojection_error(model: EpipolarModel, c: CorrespondenceSet) -> float:
    """Mean reprojection error using each patch's composed homography."""
    total = 0.0
    for pid in c.planes:
        a, b = c.patch(int(pid))
        h = compose_homography(model, int(pid))
        mapped = apply_homography(h, a)
        total += np.sqrt(((mapped - b) ** 2).sum(axis=1)).sum()
    return total / len(c)


# ---------------------------------------------------------------------------
# Feature detection and matching
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureConfig:
    max_corners: int = 200
    quality_level: float = 0.01  # relative to strongest corner response
    min_distance: int = 6
    window_half: int = 5  # NCC template half-size
    search_radius: int = 16  # shrinks automatically on small frames
    ncc_threshold: float = 0.6


def harris_response(img: np.ndarray, sigma: float = 1.5) -> np.ndarray:
    ix = ndi.sobel(img, axis=1, mode="nearest")
    iy = ndi.sobel(img, axis=0, mode="nearest")
    ixx = ndi.gaussian_filter(ix * ix, sigma, mode="nearest")
    iyy = ndi.gaussian_filter(iy * iy, sigma, mode="nearest")
    ixy = ndi.gaussian_filter(ix * iy, sigma, mode="nearest")
    return ixx * iyy - ixy * ixy - 0.05 * (ixx + iyy) ** 2


def detect_corners(img: np.ndarray, cfg: FeatureConfig, margin: int) -> np.ndarray:
    """Top Harris corners as (n, 2) integer (x, y), borders excluded."""
    r = harris_response(img)
    thresh = max(1e-10, cfg.quality_level * float(r.max()))
    size = 2 * cfg.min_distance + 1
    peaks = (r == ndi.maximum_filter(r, size=size, mode="nearest")) & (r > thresh)
    peaks[:margin, :] = False
    peaks[-margin:, :] = False
    peaks[:, :margin] = False
    peaks[:, -margin:] = False
    ys, xs = np.nonzero(peaks)
    if len(xs) == 0:
        return np.zeros((0, 2), dtype=int)
    order = np.argsort(r[ys, xs])[::-1][: cfg.max_corners]
    return np.stack([xs[order], ys[order]], axis=1)


def _parabolic_offset(lo: float, mid: float, hi: float) -> float:
    denom = lo - 2.0 * mid + hi
    if abs(denom) < 1e-12:
        return 0.0
    return float(np.clip(0.5 * (lo - hi) / denom, -0.5, 0.5))


def detect_correspondences(
    frame_a: np.ndarray, frame_b: np.ndarray, cfg: FeatureConfig | None = None
) -> CorrespondenceSet:
    """Harris corners in frame_a matched into frame_b by windowed NCC.

    The strongest corners are matched by searching a square window in
    frame_b for the peak normalized cross-correlation; matches below the
    NCC threshold are discarded and the peak is refined to sub-pixel
    precision with a parabolic fit.
    """
    if cfg is None:
        cfg = FeatureConfig()
    a = to_grayscale(frame_a)
    b = to_grayscale(frame_b)
    if a.shape != b.shape:
        raise ValueError("frames must have identical dimensions")
    w = cfg.window_half
    s = cfg.search_radius
    # Only the template must stay inside the frame; the search region
    # clamps at the borders so near-border corners remain usable.
    corners = detect_corners(a, cfg, margin=w + 1)
    pts_a = []
    pts_b = []
    for x, y in corners:
        tpl = a[y - w : y + w + 1, x - w : x + w + 1]
        tpl0 = tpl - tpl.mean()
        tstd = np.sqrt((tpl0**2).sum())
        if tstd < 1e-9:
            continue
        y0 = max(0, y - w - s)
        x0 = max(0, x - w - s)
        region = b[y0 : y + w + s + 1, x0 : x + w + s + 1]
        wins = np.lib.stride_tricks.sliding_window_view(region, (2 * w + 1, 2 * w + 1))
        wm = wins.mean(axis=(2, 3), keepdims=True)
        wz = wins - wm
        denom = np.sqrt((wz**2).sum(axis=(2, 3)))
        num = np.einsum("ijkl,kl->ij", wz, tpl0)
        ncc = num / np.maximum(denom * tstd, 1e-12)
        iy, ix = np.unravel_index(np.argmax(ncc), ncc.shape)
        if ncc[iy, ix] < cfg.ncc_threshold:
            continue
        dx = dy = 0.0
        # A perfect correlation means an exact pixel-grid match; the
        # parabolic fit would only add asymmetry noise there.
        if ncc[iy, ix] < 1.0 - 1e-9:
            if 0 < ix < ncc.shape[1] - 1:
                dx = _parabolic_offset(ncc[iy, ix - 1], ncc[iy, ix], ncc[iy, ix + 1])
            if 0 < iy < ncc.shape[0] - 1:
                dy = _parabolic_offset(ncc[iy - 1, ix], ncc[iy, ix], ncc[iy + 1, ix])
        # Window (iy, ix) has its center at (y0 + iy + w, x0 + ix + w) in b.
        pts_a.append((float(x), float(y)))
        pts_b.append((float(x0 + ix + w + dx), float(y0 + iy + w + dy)))
    if len(pts_a) < 4:
        raise ValueError(f"insufficient features: {len(pts_a)} matches")
    pa = np.asarray(pts_a)
    pb = np.asarray(pts_b)
    return CorrespondenceSet(pa, pb, np.zeros(len(pa), dtype=int))


def partition_planes(
    c: CorrespondenceSet, grid: tuple[int, int] = (3, 3), min_per_patch: int = 4
) -> CorrespondenceSet:
    """Assign plane-patch ids by gridding frame-a point positions.

    Cells with fewer than ``min_per_patch`` matches are merged into the
    nearest populated cell (by cell-center distance), so every surviving
    patch can support a least-squares solve.
    """
    rows, cols = grid
    if rows < 1 or cols < 1:
        raise ValueError("grid must be at least 1x1")
    x = c.pts_a[:, 0]
    y = c.pts_a[:, 1]
    x0, x1 = x.min(), x.max() + 1e-9
    y0, y1 = y.min(), y.max() + 1e-9
    ci = np.minimum((cols * (x - x0) / (x1 - x0)).astype(int), cols - 1)
    ri = np.minimum((rows * (y - y0) / (y1 - y0)).astype(int), rows - 1)
    ids = ri * cols + ci

    centers = {}
    for pid in np.unique(ids):
        m = ids == pid
        centers[int(pid)] = np.array([x[m].mean(), y[m].mean()])
    while True:
        counts = {pid: int((ids == pid).sum()) for pid in np.unique(ids)}
        if len(counts) <= 1:
            break
        small = [pid for pid, n in counts.items() if n < min_per_patch]
        if not small:
            break
        pid = min(small, key=lambda p: counts[p])
        others = [p for p in counts if p != pid]
        target = min(
            others, key=lambda p: float(np.sum((centers[p] - centers[pid]) ** 2))
        )
        m = (ids == pid) | (ids == target)
        ids[ids == pid] = target
        centers[target] = np.array([x[m].mean(), y[m].mean()])
        del centers[pid]
    # Renumber surviving patches densely.
    remap = {int(pid): i for i, pid in enumerate(np.unique(ids))}
    ids = np.array([remap[int(p)] for p in ids], dtype=int)
    return replace(c, plane_ids=ids)


# ---------------------------------------------------------------------------
# Alternation and stack alignment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AlignConfig:
    grid: tuple[int, int] = (3, 3)
    reproj_threshold_px: float = 0.5
    max_rounds: int = 20
    features: FeatureConfig = field(default_factory=FeatureConfig)


@dataclass(frozen=True)
class FrameAlignReport:
    frame: int
    homography: np.ndarray
    rounds: int
    round_errors: list[float]
    final_reproj_error_px: float
    converged: bool

    def to_dict(self) -> dict:
        return {
            "frame": self.frame,
            "homography": self.homography.tolist(),
            "rounds": self.rounds,
            "round_errors": [float(e) for e in self.round_errors],
            "final_reproj_error_px": float(self.final_reproj_error_px),
            "converged": bool(self.converged),
        }


def init_model(c: CorrespondenceSet) -> EpipolarModel:
    """Pooled DLT for H1, K = 0, delta_n = 0; reference = largest patch."""
    h1 = fit_homography_dlt(c.pts_a, c.pts_b)
    planes = c.planes
    ref = int(max(planes, key=lambda p: int((c.plane_ids == p).sum())))
    dn = {int(p): np.zeros(3) for p in planes}
    return EpipolarModel(h1=h1, k=np.zeros(3), delta_normals=dn, reference_plane=ref)


def alternate_rounds(
    model: EpipolarModel,
    c: CorrespondenceSet,
    max_rounds: int = 20,
    threshold_px: float = 0.5,
) -> tuple[EpipolarModel, list[float], bool]:
    """Alternating least squares over (delta_n_i) and (H1, K).

    Returns the best model seen, the mean reprojection error before the
    first round and after each accepted round, and a convergence flag.
    Degenerate sub-solves keep the previous estimate; a round that raises
    the error reverts to the best model and stops.
    """
    errors = [model_reprojection_error(model, c)]
    best = model
    converged = errors[0] < threshold_px
    for _ in range(max_rounds):
        if converged:
            break
        dn = dict(model.delta_normals)
        for pid in c.planes:
            pid = int(pid)
            if pid == model.reference_plane:
                continue
            a, b = c.patch(pid)
            try:
                dn[pid] = solve_delta_n(model, a, b)
            except ValueError:
                pass
        model = replace(model, delta_normals=dn)
        try:
            h1, k = solve_h1_k(model.delta_normals, c)
            model = replace(model, h1=h1, k=k)
        except ValueError:
            pass
        err = model_reprojection_error(model, c)
        if err > errors[-1] + 1e-9:
            model = best
            break
        errors.append(err)
        best = model
        if err < threshold_px:
            converged = True
    return best, errors, converged


def warp(img: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Apply a homography to image content.

    Output pixel p takes the bilinear sample of ``img`` at h^-1(p)
    (inverse mapping); samples outside the frame clamp to the edge.
    """
    h = normalize_homography(h)
    hinv = np.linalg.inv(h)
    rows, cols = img.shape[:2]
    xx, yy = np.meshgrid(np.arange(cols, dtype=float), np.arange(rows, dtype=float))
    denom = hinv[2, 0] * xx + hinv[2, 1] * yy + hinv[2, 2]
    denom = np.where(np.abs(denom) < 1e-12, 1e-12, denom)
    xs = (hinv[0, 0] * xx + hinv[0, 1] * yy + hinv[0, 2]) / denom
    ys = (hinv[1, 0] * xx + hinv[1, 1] * yy + hinv[1, 2]) / denom
    if img.ndim == 2:
        return ndi.map_coordinates(img, [ys, xs], order=1, mode="nearest")
    out = np.empty_like(img)
    for ch in range(img.shape[2]):
        out[:, :, ch] = ndi.map_coordinates(
            img[:, :, ch], [ys, xs], order=1, mode="nearest"
        )
    return out


def _per_match_errors(model: EpipolarModel, c: CorrespondenceSet) -> np.ndarray:
    errs = np.empty(len(c))
    for pid in c.planes:
        m = c.plane_ids == pid
        h = compose_homography(model, int(pid))
        mapped = apply_homography(h, c.pts_a[m])
        errs[m] = np.sqrt(((mapped - c.pts_b[m]) ** 2).sum(axis=1))
    return errs


def align_frame(
    ref_gray: np.ndarray, frame_gray: np.ndarray, cfg: AlignConfig
) -> tuple[np.ndarray, FrameAlignReport]:
    """Estimate the reference->frame homography for one stack frame.

    After a first fit, matches whose reprojection error grossly exceeds
    the median are discarded once and the model refit; correlation
    matching near borders or on repeated texture occasionally locks onto
    the wrong peak, and a single trim pass removes those without
    disturbing clean data.
    """
    corr = detect_correspondences(ref_gray, frame_gray, cfg.features)
    parted = partition_planes(corr, cfg.grid)
    model = init_model(parted)
    model, errors, converged = alternate_rounds(
        model, parted, cfg.max_rounds, cfg.reproj_threshold_px
    )
    res = _per_match_errors(model, parted)
    keep = res <= max(3.0 * float(np.median(res)), cfg.reproj_threshold_px)
    if (~keep).any() and keep.sum() >= max(8, len(parted) // 2):
        trimmed = CorrespondenceSet(
            corr.pts_a[keep], corr.pts_b[keep], np.zeros(int(keep.sum()), dtype=int)
        )
        parted = partition_planes(trimmed, cfg.grid)
        model = init_model(parted)
        model, errors, converged = alternate_rounds(
            model, parted, cfg.max_rounds, cfg.reproj_threshold_px
        )
    h = compose_homography(model, model.reference_plane)
    report = FrameAlignReport(
        frame=-1,
        homography=h,
        rounds=len(errors) - 1,
        round_errors=errors,
        final_reproj_error_px=errors[-1],
        converged=converged,
    )
    return h, report


def align_stack(
    stack: FocalStack, cfg: AlignConfig | None = None, threads: int = 1
) -> tuple[FocalStack, list[FrameAlignReport]]:
    """Warp every frame onto frame 0 with its dominant-plane homography.

    Motion is estimated between consecutive frames, where the defocus
    difference is small enough for correlation matching, and the pairwise
    homographies compose along the chain to reach the reference frame.
    """
    if cfg is None:
        cfg = AlignConfig()
    grays = [to_grayscale(f) for f in stack.frames]

    def solve(k: int) -> tuple[np.ndarray, FrameAlignReport]:
        # Pairwise map: frame k-1 pixel coords -> frame k pixel coords.
        h, rep = align_frame(grays[k - 1], grays[k], cfg)
        return h, replace(rep, frame=k)

    results: dict[int, tuple[np.ndarray, FrameAlignReport]] = {}
    indices = range(1, stack.num_frames)
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            for k, res in zip(indices, pool.map(solve, indices)):
                results[k] = res
    else:
        for k in indices:
            results[k] = solve(k)

    homographies = [np.eye(3)]
    reports = [
        FrameAlignReport(
            frame=0,
            homography=np.eye(3),
            rounds=0,
            round_errors=[0.0],
            final_reproj_error_px=0.0,
            converged=True,
        )
    ]
    frames = [stack.frames[0].copy()]
    for k in indices:
        h_pair, rep = results[k]
        h_to_ref = normalize_homography(h_pair @ homographies[k - 1])
        homographies.append(h_to_ref)
        reports.append(replace(rep, homography=h_to_ref))
        frames.append(warp(stack.frames[k], np.linalg.inv(h_to_ref)))
    aligned = FocalStack(
        frames=frames,
        focal_distances_mm=stack.focal_distances_mm.copy(),
        homographies=homographies,
        optics=stack.optics,
    )
    return aligned, reports
