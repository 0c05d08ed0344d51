"""Executable forms of the three classical recognition hypotheses.

All three consume ordered 8-point 2D views (vertex correspondence known by
construction), score every class, and classify by best score:

* match2d      nearest stored view under an RBF of aligned point distance
* lc           residual of the test view against the linear span of each
               class's training-view coordinate vectors (plus translation)
* sfm + align  rank-3 factorization of stacked views into a 3D shape, then
               scaled-orthographic pose fitting against each shape
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .clipgen import N_VERTICES, Paperclip
from .scene import Camera, PoseSpec, view_points


class EmptyLibrary(ValueError):
    """Raised when a view library has no classes or an empty class."""


class DegenerateSpan(ValueError):
    """Raised when a class's view matrix has rank < 3."""


class InsufficientViews(ValueError):
    """Raised when an operation needs more training views than provided."""


class RankDeficient(ValueError):
    """Raised when the measurement matrix is not usably rank 3."""


@dataclass
class ViewLibrary:
    views: dict[int, list[tuple[np.ndarray, PoseSpec]]]

    def __post_init__(self):
        if not self.views or any(len(v) == 0 for v in self.views.values()):
            raise EmptyLibrary("every class needs at least one view")

    @property
    def class_ids(self) -> list[int]:
        return sorted(self.views)

    @classmethod
    def build(cls, clips: list[Paperclip], train_poses: list[PoseSpec],
              cam: Camera | None = None) -> "ViewLibrary":
        cam = cam or Camera()
        return cls({c.class_id: [(view_points(c, p, cam), p) for p in train_poses]
                    for c in clips})


def normalize_view(points: np.ndarray) -> np.ndarray:
    """Center a (8,2) view and scale to unit Frobenius norm; returns (8,2)."""
    pts = np.asarray(points, dtype=np.float64)
    pts = pts - pts.mean(axis=0)
    n = np.linalg.norm(pts)
    return pts / n if n > 1e-300 else pts


def _as_complex(points: np.ndarray) -> np.ndarray:
    return points[..., 0] + 1j * points[..., 1]


def view_distance(a: np.ndarray, b: np.ndarray, allow_flip: bool = True,
                  align_rotation: bool = False) -> float:
    """Distance between two views after centering, unit scaling, optional
    horizontal flip, and (off by default) optimal in-plane rotation."""
    an = normalize_view(a)
    bn = normalize_view(b)
    candidates = [an]
    if allow_flip:
        candidates.append(an * np.array([-1.0, 1.0]))
    best = np.inf
    for cand in candidates:
        if align_rotation:
            # optimal rotation has closed form on the complex plane
            d2 = 2.0 - 2.0 * abs(np.vdot(_as_complex(cand), _as_complex(bn)))
        else:
            d2 = float(np.sum((cand - bn) ** 2))
        best = min(best, max(d2, 0.0))
    return float(np.sqrt(best))


@dataclass
class MatchResult:
    scores: dict[int, float]
    predicted: int


def match2d(test: np.ndarray, lib: ViewLibrary, sigma: float = 0.1,
            allow_flip: bool = True, align_rotation: bool = False) -> MatchResult:
    """RBF score per class: max over stored views of exp(-d^2 / 2 sigma^2)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    scores = {}
    best_class, best_d = None, np.inf
    for cid in lib.class_ids:
        d = min(view_distance(test, v, allow_flip, align_rotation)
                for v, _ in lib.views[cid])
        scores[cid] = float(np.exp(-d * d / (2.0 * sigma * sigma)))
        if d < best_d:
            best_class, best_d = cid, d
    return MatchResult(scores, best_class)


def _lc_basis(class_views, include_constant: bool) -> np.ndarray:
    cols = []
    for pts, _ in class_views:
        p = np.asarray(pts, dtype=np.float64)
        cols.append(p[:, 0])
        cols.append(p[:, 1])
    if include_constant:
        cols.append(np.ones(N_VERTICES))
    return np.column_stack(cols)


def lc_residual(test: np.ndarray, class_views, include_constant: bool = True) -> float:
    """Least-squares residual of the test view against the span of the class's
    training coordinate vectors, normalized by ||test||^2."""
    if len(class_views) < 2:
        raise InsufficientViews("linear combination needs >= 2 views")
    t = np.asarray(test, dtype=np.float64)
    basis = _lc_basis(class_views, include_constant)
    sol, _, rank, _ = np.linalg.lstsq(basis, t, rcond=None)
    if rank < 3:
        raise DegenerateSpan(f"view basis rank {rank} < 3")
    resid = float(np.sum((t - basis @ sol) ** 2))
    denom = float(np.sum(t * t))
    return resid / denom if denom > 0 else 0.0


def lc_classify(test: np.ndarray, lib: ViewLibrary, include_constant: bool = True) -> int:
    """Class with the smallest lc_residual; degenerate classes score +inf."""
    for cid in lib.class_ids:
        if len(lib.views[cid]) < 2:
            raise InsufficientViews(f"class {cid} has fewer than 2 views")
    best_cid, best_r = None, np.inf
    for cid in lib.class_ids:
        try:
            r = lc_residual(test, lib.views[cid], include_constant)
        except DegenerateSpan:
            r = np.inf
        if r < best_r:
            best_cid, best_r = cid, r
    return best_cid


@dataclass
class Shape3D:
    points: np.ndarray           # (8, 3), centroid 0, up to rotation/reflection
    singular_values: np.ndarray  # spectrum of the registered measurement matrix
    cond_ratio: float = field(init=False)  # third / fourth singular value

    def __post_init__(self):
        sv = self.singular_values
        self.cond_ratio = float(sv[2] / sv[3]) if len(sv) > 3 and sv[3] > 0 else np.inf


def _metric_upgrade(m_x: np.ndarray, m_y: np.ndarray) -> np.ndarray:
    """Solve for the 3x3 Gram correction G = A A^T enforcing equal-norm,
    orthogonal projection rows per view; returns A."""
    def gram_row(u, v):
        return np.array([u[0] * v[0], u[1] * v[1], u[2] * v[2],
                         u[0] * v[1] + u[1] * v[0],
                         u[0] * v[2] + u[2] * v[0],
                         u[1] * v[2] + u[2] * v[1]])

    rows, rhs = [], []
    for ux, uy in zip(m_x, m_y):
        rows.append(gram_row(ux, ux) - gram_row(uy, uy))
        rhs.append(0.0)
        rows.append(gram_row(ux, uy))
        rhs.append(0.0)
    rows.append(gram_row(m_x[0], m_x[0]))  # gauge: unit norm for the first view
    rhs.append(1.0)
    g, *_ = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)
    G = np.array([[g[0], g[3], g[4]],
                  [g[3], g[1], g[5]],
                  [g[4], g[5], g[2]]])
    w, V = np.linalg.eigh(G)
    w = np.maximum(w, 1e-15 * max(w.max(), 1e-300))
    return V @ np.diag(np.sqrt(w))


def sfm_reconstruct(class_views) -> Shape3D:
    """Orthographic structure from motion: rank-3 factorization of the
    registered 2F x 8 measurement matrix plus a metric upgrade."""
    F = len(class_views)
    if F < 3:
        raise InsufficientViews(f"structure from motion needs >= 3 views, got {F}")
    xs = np.array([np.asarray(v, dtype=np.float64)[:, 0] for v, _ in class_views])
    ys = np.array([np.asarray(v, dtype=np.float64)[:, 1] for v, _ in class_views])
    W = np.vstack([xs - xs.mean(axis=1, keepdims=True),
                   ys - ys.mean(axis=1, keepdims=True)])
    U, sv, Vt = np.linalg.svd(W, full_matrices=False)
    if sv[2] < 1e-6 * sv[0]:
        raise RankDeficient(f"sigma3/sigma1 = {sv[2] / sv[0]:.2e}")
    root = np.sqrt(sv[:3])
    M = U[:, :3] * root
    S = root[:, None] * Vt[:3]
    A = _metric_upgrade(M[:F], M[F:])
    shape = np.linalg.solve(A, S).T
    return Shape3D(shape, sv)


def reconstruct_library(lib: ViewLibrary) -> dict[int, Shape3D]:
    return {cid: sfm_reconstruct(lib.views[cid]) for cid in lib.class_ids}


def _nearest_scaled_orthographic(M: np.ndarray) -> np.ndarray:
    """Closest (Frobenius) matrix s*Q with QQ^T = I_2 to a 2x3 pose matrix."""
    U, sv, Vt = np.linalg.svd(M, full_matrices=False)
    return sv.mean() * (U @ Vt)


def pose_fit_residuals(test: np.ndarray, points3d: np.ndarray) -> tuple[float, float]:
    """(unconstrained, constrained) normalized residuals of fitting a
    scaled-orthographic pose + translation mapping points3d onto the test view."""
    t = np.asarray(test, dtype=np.float64)
    S = np.asarray(points3d, dtype=np.float64)
    A = np.hstack([S, np.ones((len(S), 1))])
    coef, *_ = np.linalg.lstsq(A, t, rcond=None)
    centered = t - t.mean(axis=0)
    denom = float(np.sum(centered ** 2))
    denom = denom if denom > 0 else 1.0
    r_un = float(np.sum((t - A @ coef) ** 2)) / denom
    Mc = _nearest_scaled_orthographic(coef[:3].T)
    proj = S @ Mc.T
    shift = (t - proj).mean(axis=0)
    r_con = float(np.sum((t - proj - shift) ** 2)) / denom
    return r_un, r_con


def align_residual(test: np.ndarray, shape: Shape3D) -> float:
    """Constrained pose-fit residual, minimized over the two reflection
    hypotheses left open by orthographic reconstruction."""
    mirror = shape.points * np.array([1.0, 1.0, -1.0])
    return min(pose_fit_residuals(test, shape.points)[1],
               pose_fit_residuals(test, mirror)[1])


def align_classify(test: np.ndarray, shapes: dict[int, Shape3D]) -> int:
    best_cid, best_r = None, np.inf
    for cid in sorted(shapes):
        r = align_residual(test, shapes[cid])
        if r < best_r:
            best_cid, best_r = cid, r
    return best_cid


# Vectorized classifier fronts for grid evaluation. Each precomputes per-class
# structure once and classifies (N, 8, 2) test batches with array ops; results
# match the single-view operations above exactly.

class Match2dClassifier:
    name = "match2d"

    def __init__(self, lib: ViewLibrary, sigma: float = 0.1,
                 allow_flip: bool = True, align_rotation: bool = False):
        self.sigma = sigma
        self.allow_flip = allow_flip
        self.align_rotation = align_rotation
        self.class_ids = np.array(lib.class_ids)
        mats, owners = [], []
        for k, cid in enumerate(lib.class_ids):
            for pts, _ in lib.views[cid]:
                mats.append(normalize_view(pts))
                owners.append(k)
        self.view_owner = np.array(owners)
        stacked = np.stack(mats)                       # (V, 8, 2)
        self.views_c = _as_complex(stacked)            # (V, 8) complex
        self.views_r = stacked.reshape(len(mats), -1)  # (V, 16)

    def _min_d2(self, tests: np.ndarray) -> np.ndarray:
        """(N, V) squared distances minimized over the enabled alignments."""
        nrm = np.stack([normalize_view(t) for t in tests])
        cands = [nrm]
        if self.allow_flip:
            cands.append(nrm * np.array([-1.0, 1.0]))
        d2 = np.full((len(tests), len(self.views_r)), np.inf)
        for cand in cands:
            if self.align_rotation:
                ip = np.abs(np.conj(_as_complex(cand)) @ self.views_c.T)
            else:
                ip = cand.reshape(len(cand), -1) @ self.views_r.T
            np.minimum(d2, np.maximum(2.0 - 2.0 * ip, 0.0), out=d2)
        return d2

    def predict_batch(self, tests: np.ndarray) -> np.ndarray:
        d2 = self._min_d2(tests)
        return self.class_ids[self.view_owner[np.argmin(d2, axis=1)]]


class LcClassifier:
    name = "lc"

    def __init__(self, lib: ViewLibrary, include_constant: bool = True):
        self.class_ids = np.array(lib.class_ids)
        self.projectors = []  # residual projector I - B B^+ per class, or None
        for cid in lib.class_ids:
            if len(lib.views[cid]) < 2:
                raise InsufficientViews(f"class {cid} has fewer than 2 views")
            B = _lc_basis(lib.views[cid], include_constant)
            if np.linalg.matrix_rank(B) < 3:
                self.projectors.append(None)
                continue
            self.projectors.append(np.eye(N_VERTICES) - B @ np.linalg.pinv(B))

    def residual_batch(self, tests: np.ndarray) -> np.ndarray:
        """(N, C) normalized residuals."""
        t = np.asarray(tests, dtype=np.float64)
        denom = np.maximum(np.sum(t * t, axis=(1, 2)), 1e-300)
        out = np.empty((len(t), len(self.class_ids)))
        for k, P in enumerate(self.projectors):
            if P is None:
                out[:, k] = np.inf
                continue
            r = np.einsum("ij,njk->nik", P, t)
            out[:, k] = np.einsum("nik,nik->n", r, r) / denom
        return out

    def predict_batch(self, tests: np.ndarray) -> np.ndarray:
        return self.class_ids[np.argmin(self.residual_batch(tests), axis=1)]


class AlignClassifier:
    name = "align3d"

    def __init__(self, shapes: dict[int, Shape3D]):
        self.class_ids = np.array(sorted(shapes))
        self.hyps = []  # per class: list of (S (8,3), pinv([S 1]) (4,8))
        for cid in self.class_ids:
            entry = []
            for S in (shapes[cid].points, shapes[cid].points * np.array([1.0, 1.0, -1.0])):
                A = np.hstack([S, np.ones((len(S), 1))])
                entry.append((S, np.linalg.pinv(A)))
            self.hyps.append(entry)

    def residual_batch(self, tests: np.ndarray) -> np.ndarray:
        """(N, C) constrained residuals, min over reflection hypotheses."""
        t = np.asarray(tests, dtype=np.float64)
        centered = t - t.mean(axis=1, keepdims=True)
        denom = np.maximum(np.einsum("nij,nij->n", centered, centered), 1e-300)
        out = np.full((len(t), len(self.class_ids)), np.inf)
        for k, entry in enumerate(self.hyps):
            for S, pinvA in entry:
                coef = np.einsum("js,nsk->njk", pinvA, t)     # (N, 4, 2)
                M = coef[:, :3, :].transpose(0, 2, 1)          # (N, 2, 3)
                U, sv, Vt = np.linalg.svd(M, full_matrices=False)
                Mc = sv.mean(axis=1)[:, None, None] * (U @ Vt)
                proj = np.einsum("sj,nkj->nsk", S, Mc)         # (N, 8, 2)
                shift = (t - proj).mean(axis=1, keepdims=True)
                r = np.einsum("nij,nij->n", t - proj - shift, t - proj - shift) / denom
                np.minimum(out[:, k], r, out=out[:, k])
        return out

    def predict_batch(self, tests: np.ndarray) -> np.ndarray:
        return self.class_ids[np.argmin(self.residual_batch(tests), axis=1)]
