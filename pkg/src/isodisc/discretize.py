"""Discretized isometries acting on points, windowed sets and rasters.

Finite computations of the images ``Gamma_k`` stay exact inside a trusted
radius. The bookkeeping rests on three facts: an isometry preserves the
Euclidean norm, rounding moves a point by at most ``sqrt(n)/2`` in that norm,
and ``||x||_2 <= sqrt(n) ||x||_inf``. So every chain of ``k`` steps ending in
the sup-norm ball ``B_R`` starts in the Euclidean ball of radius
``sqrt(n) (R + k/2)``, which sits inside the sup-norm ball of the same radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import _kernels
from .lattice import (
    Isometry,
    IsometrySequence,
    WindowedSet,
    ball_cardinality,
    integer_ball,
    project,
    project_array,
)

__all__ = [
    "apply_hat",
    "apply_hat_array",
    "safe_window_radius",
    "ImageChain",
    "iter_stages",
    "image_chain",
    "RotationStats",
    "rotate_raster",
]

# Dense occupancy buffers up to this many cells; beyond, dedup by sorting.
_MAX_DENSE_CELLS = 1 << 27
# Extra Euclidean slack when pruning; keeping surplus genuine points is harmless.
_PRUNE_SLACK = 1e-6


def apply_hat(P: Isometry, x) -> tuple[int, ...]:
    """Discretization of ``P`` at the integer point ``x``: ``project(P x)``."""
    x = np.asarray(x)
    if x.shape != (P.n,):
        raise ValueError(f"point of shape {x.shape} does not match dimension {P.n}")
    return project(P.matrix @ x.astype(float))


def apply_hat_array(P: Isometry, points: np.ndarray) -> np.ndarray:
    """Row-wise :func:`apply_hat` on an ``(N, n)`` integer array (no dedup)."""
    points = np.asarray(points)
    if points.ndim != 2 or points.shape[1] != P.n:
        raise ValueError(f"points of shape {points.shape} do not match dimension {P.n}")
    return project_array(points @ P.matrix.T)


def safe_window_radius(R: float, k: int, n: int) -> float:
    """Sup-norm radius of a Z^n window that makes ``Gamma_k`` exact on ``B_R``.

    Equals ``sqrt(n) * (R + k/2)``; see the module docstring.
    """
    if R < 0 or k < 0 or n < 1:
        raise ValueError(f"invalid window request R={R}, k={k}, n={n}")
    return math.sqrt(n) * (R + k / 2)


def _hat_image(P: Isometry, points: np.ndarray, radius2: float) -> np.ndarray:
    """Distinct images of ``points`` under ``P`` hat with Euclidean norm below ``radius2``."""
    n = P.n
    if len(points) == 0:
        return np.zeros((0, n), dtype=np.int64)
    r = math.sqrt(radius2) + _PRUNE_SLACK
    h = math.ceil(r) + 1
    if (2 * h + 1) ** n <= _MAX_DENSE_CELLS:
        occ = np.zeros((2 * h + 1) ** n, dtype=np.bool_)
        out = np.empty((len(points), n), dtype=np.int64)
        c = _kernels.hat_image_dedup(
            np.ascontiguousarray(points, dtype=np.int64),
            np.ascontiguousarray(P.matrix),
            r * r,
            h,
            occ,
            out,
        )
        return out[:c].copy()
    q = apply_hat_array(P, points)
    q = q[np.einsum("ij,ij->i", q, q) < r * r]
    return np.unique(q, axis=0)


@dataclass(frozen=True)
class ImageChain:
    """Successive images ``Gamma_0 = Z^n, Gamma_1, ..., Gamma_k`` sampled around 0.

    Every stage is exact on the open sup-norm ball of ``requested_radius``.
    Memory is one int64 row per retained point per stage.
    """

    sequence: IsometrySequence
    stages: tuple
    requested_radius: float

    def density(self, j: int, R: float | None = None) -> float:
        """Fraction of the integer points of ``B_R`` that lie in stage ``j``."""
        R = self.requested_radius if R is None else R
        return self.stages[j].count_in_ball(R) / ball_cardinality(R, self.stages[j].dimension)


def iter_stages(seq: IsometrySequence, R: float, n: int | None = None) -> Iterator[WindowedSet]:
    """Yield the stages of :func:`image_chain` one at a time.

    Stage ``j`` is trusted on the sup-norm ball of ``R + (k - j)/2``;
    points beyond the matching Euclidean radius are dropped as they can
    never reach ``B_R``.
    """
    if not R > 0:
        raise ValueError(f"radius must be positive, got {R}")
    n = seq.n if len(seq) else n
    if n is None:
        raise ValueError("dimension required for an empty sequence")
    k = len(seq)
    stage = integer_ball(safe_window_radius(R, k, n), n)
    yield stage
    pts = stage.points
    for j, P in enumerate(seq, start=1):
        trusted = R + (k - j) / 2
        pts = _hat_image(P, pts, n * trusted * trusted)
        yield WindowedSet(pts, trusted, n)


def image_chain(seq: IsometrySequence, R: float, n: int | None = None) -> ImageChain:
    """All stages ``Gamma_0..Gamma_k`` of ``seq``, each exact on ``B_R``."""
    return ImageChain(seq, tuple(iter_stages(seq, R, n)), R)


@dataclass(frozen=True)
class RotationStats:
    hole_fraction: float
    collision_fraction: float
    step_density: tuple


def _pixel_lattice(h: int, w: int) -> tuple[np.ndarray, int, int]:
    cx, cy = (w - 1) // 2, (h - 1) // 2
    rows, cols = np.indices((h, w)).reshape(2, -1)
    return np.stack([cols - cx, cy - rows], axis=1).astype(np.int64), cx, cy


def rotate_raster(
    image: np.ndarray, seq: IsometrySequence, background: int = 0
) -> tuple[np.ndarray, RotationStats]:
    """Apply the discretized chain pixel by pixel to a 2D raster.

    Pixel ``(row, col)`` is the lattice point ``(col - cx, cy - row)`` with
    ``(cx, cy)`` the central pixel, so rotations turn counterclockwise on
    screen. Every source pixel is carried through the whole chain; when several
    land on one output pixel the last in row-major source order wins.

    Holes are counted only over output pixels whose exact preimage under the
    composed real isometry lies in the source rectangle, so the corners
    a rotation pushes out of frame are not counted as information loss.
    """
    image = np.asarray(image)
    if image.ndim not in (2, 3):
        raise ValueError(f"raster must be HxW or HxWxC, got shape {image.shape}")
    if len(seq) and seq.n != 2:
        raise ValueError(f"raster rotation needs planar isometries, got dimension {seq.n}")
    h, w = image.shape[:2]
    src, cx, cy = _pixel_lattice(h, w)
    pts = src
    composed = np.eye(2)
    step_density = []
    for P in seq:
        pts = apply_hat_array(P, pts)
        composed = P.matrix @ composed
        uniq = np.unique(pts, axis=0)
        step_density.append(len(uniq) / len(src))

    cols = pts[:, 0] + cx
    rows = cy - pts[:, 1]
    inframe = (rows >= 0) & (rows < h) & (cols >= 0) & (cols < w)
    flat = rows[inframe] * w + cols[inframe]
    src_flat = np.flatnonzero(inframe)

    out = np.full_like(image, background)
    out_flat = out.reshape(h * w, *image.shape[2:])
    img_flat = image.reshape(h * w, *image.shape[2:])
    targets, first_rev = np.unique(flat[::-1], return_index=True)
    last = len(flat) - 1 - first_rev
    out_flat[targets] = img_flat[src_flat[last]]
    hit = np.zeros(h * w, dtype=bool)
    hit[targets] = True
    collisions = len(flat) - len(targets)

    # Reference region: output pixels whose real preimage lies in the source rectangle.
    pre = src @ composed  # row-wise composed^T y, the exact inverse image
    ref = (
        (pre[:, 0] + cx >= -0.5)
        & (pre[:, 0] + cx < w - 0.5)
        & (cy - pre[:, 1] >= -0.5)
        & (cy - pre[:, 1] < h - 0.5)
    )
    n_ref = np.count_nonzero(ref)
    holes = np.count_nonzero(ref & ~hit) / n_ref if n_ref else 0.0
    stats = RotationStats(
        hole_fraction=float(holes),
        collision_fraction=float(collisions / len(flat)) if len(flat) else 0.0,
        step_density=tuple(step_density),
    )
    return out, stats
