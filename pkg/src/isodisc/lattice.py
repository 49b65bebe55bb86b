"""Integer-lattice primitives.

Rounding onto Z^n, orthogonal matrices with exactness metadata, seeded
sampling of isometries and enumeration of integer balls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "round_half_low",
    "project",
    "Provenance",
    "Isometry",
    "IsometrySequence",
    "WindowedSet",
    "make_rng",
    "make_rotation2d",
    "make_pythagorean",
    "sample_isometry",
    "integer_ball",
    "ball_cardinality",
]

ORTHO_TOL = 1e-12
SEED_BITS = 64


def round_half_low(x: float) -> int:
    """Return the unique integer k with k - 1/2 < x <= k + 1/2.

    Half-integers go down: ``round_half_low(0.5) == 0`` and
    ``round_half_low(-0.5) == -1``.
    """
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot round non-finite value {x!r}")
    return math.ceil(x - 0.5)


def project(v: Iterable[float]) -> tuple[int, ...]:
    """Coordinatewise :func:`round_half_low`, the projection R^n -> Z^n."""
    return tuple(round_half_low(c) for c in v)


def project_array(y: np.ndarray) -> np.ndarray:
    """Vectorised :func:`project` on an ``(..., n)`` float array."""
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("cannot round non-finite coordinates")
    return np.ceil(y - 0.5).astype(np.int64)


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """PCG64 generator for substream ``stream`` of ``seed``.

    The substream state is derived by NumPy's SeedSequence hash of
    ``(seed, spawn_key=(stream,))``, so streams are independent and each is a
    pure function of the pair.
    """
    seed = int(seed)
    if not 0 <= seed < 2**SEED_BITS:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if stream < 0:
        raise ValueError("stream index must be nonnegative")
    ss = np.random.SeedSequence(seed, spawn_key=(int(stream),))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class Provenance:
    """Where an isometry came from.

    ``kind`` is one of ``rotation2d``, ``pythagorean``, ``sampled`` or
    ``explicit``; ``params`` holds the angle, the triple, or
    ``(seed, stream, index)`` respectively.
    """

    kind: str
    params: tuple = ()

    def __str__(self) -> str:
        if not self.params:
            return self.kind
        return f"{self.kind}({', '.join(map(str, self.params))})"


@dataclass(frozen=True, eq=False)
class Isometry:
    """An orthogonal ``n x n`` matrix.

    ``rational_rows`` holds the (0-based) indices of rows whose entries are
    all rational. It is set from provenance, never guessed from floats.
    When ``denominator`` is not None, ``denominator * matrix`` is an exact
    integer matrix (see :meth:`integer_form`).
    """

    matrix: np.ndarray
    rational_rows: frozenset = frozenset()
    provenance: Provenance = field(default_factory=lambda: Provenance("explicit"))
    denominator: int | None = None

    def __post_init__(self):
        a = np.array(self.matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"isometry must be a square matrix, got shape {a.shape}")
        err = np.max(np.abs(a.T @ a - np.eye(a.shape[0])))
        if err > ORTHO_TOL:
            raise ValueError(f"matrix is not orthogonal (max |A^T A - I| = {err:.3g})")
        a.flags.writeable = False
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "rational_rows", frozenset(int(i) for i in self.rational_rows))
        if self.provenance.kind == "pythagorean":
            p, q, r = self.provenance.params
            if p * p + q * q != r * r:
                raise ValueError(f"({p}, {q}, {r}) is not a Pythagorean triple")
            if self.rational_rows != frozenset(range(self.n)):
                raise ValueError("a pythagorean isometry has all rows rational")
        if self.denominator is not None:
            m = a * self.denominator
            if np.max(np.abs(m - np.round(m))) > 1e-9:
                raise ValueError("denominator does not clear the matrix entries")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_integer(self) -> bool:
        return self.denominator == 1

    def integer_form(self) -> tuple[np.ndarray, int]:
        """Return ``(M, q)`` with ``M`` integral and ``matrix == M / q``."""
        if self.denominator is None:
            raise ValueError(f"isometry {self.provenance} has no exact rational form")
        q = self.denominator
        return np.round(self.matrix * q).astype(np.int64), q

    def __call__(self, v) -> np.ndarray:
        return self.matrix @ np.asarray(v, dtype=float)

    def __repr__(self) -> str:
        return f"Isometry(n={self.n}, provenance={self.provenance})"

    @classmethod
    def from_integer_matrix(cls, m, q: int = 1) -> Isometry:
        """Exact isometry ``m / q`` for an integer matrix ``m``."""
        m = np.asarray(m, dtype=np.int64)
        return cls(m / q, rational_rows=frozenset(range(m.shape[0])), denominator=q)


def make_rotation2d(theta: float) -> Isometry:
    """Counterclockwise rotation of R^2 by ``theta`` radians.

    Multiples of pi/2 are snapped to the exact integer matrix and flagged
    rational; every other angle is treated as irrational.
    """
    theta = float(theta)
    if not math.isfinite(theta):
        raise ValueError("rotation angle must be finite")
    quarter = theta / (math.pi / 2)
    if abs(quarter - round(quarter)) < 1e-12:
        c, s = [(1, 0), (0, 1), (-1, 0), (0, -1)][round(quarter) % 4]
        return Isometry(
            np.array([[c, -s], [s, c]], dtype=float),
            rational_rows=frozenset({0, 1}),
            provenance=Provenance("rotation2d", (theta,)),
            denominator=1,
        )
    c, s = math.cos(theta), math.sin(theta)
    return Isometry(np.array([[c, -s], [s, c]]), provenance=Provenance("rotation2d", (theta,)))


def make_pythagorean(p: int, q: int, r: int) -> Isometry:
    """The rational rotation ``[[p/r, -q/r], [q/r, p/r]]``."""
    p, q, r = int(p), int(q), int(r)
    if r <= 0 or p * p + q * q != r * r:
        raise ValueError(f"({p}, {q}, {r}) is not a Pythagorean triple")
    return Isometry(
        np.array([[p, -q], [q, p]]) / r,
        rational_rows=frozenset({0, 1}),
        provenance=Provenance("pythagorean", (p, q, r)),
        denominator=r,
    )


def _draw_isometry(n: int, rng: np.random.Generator, provenance: Provenance) -> Isometry:
    if n == 2:
        theta = 2 * math.pi * rng.random()
        c, s = math.cos(theta), math.sin(theta)
        return Isometry(np.array([[c, -s], [s, c]]), provenance=provenance)
    g = rng.standard_normal((n, n))
    q, r = np.linalg.qr(g)
    # Fix column signs so that diag(r) > 0; makes the factorization unique.
    q = q * np.where(np.diag(r) < 0, -1.0, 1.0)
    return Isometry(q, provenance=provenance)


def sample_isometry(n: int, seed: int) -> Isometry:
    """Pseudo-random isometry, a pure function of ``(n, seed)``.

    For ``n == 2`` this is a rotation by an angle uniform in [0, 2pi). For
    other ``n`` it is the sign-fixed QR orthogonalization of a matrix of
    independent standard normals.
    """
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    return _draw_isometry(n, make_rng(seed), Provenance("sampled", (int(seed), 0, 0)))


@dataclass(frozen=True)
class IsometrySequence:
    items: tuple = ()
    master_seed: int | None = None

    def __post_init__(self):
        items = tuple(self.items)
        object.__setattr__(self, "items", items)
        if items and len({p.n for p in items}) != 1:
            raise ValueError("all isometries of a sequence must share the dimension")

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, k):
        if isinstance(k, slice):
            return IsometrySequence(self.items[k], self.master_seed)
        return self.items[k]

    @property
    def n(self) -> int | None:
        return self.items[0].n if self.items else None

    @classmethod
    def sampled(cls, n: int, length: int, master_seed: int, stream: int = 0) -> IsometrySequence:
        """``length`` isometries drawn in order from substream ``stream``."""
        if n < 1:
            raise ValueError(f"dimension must be >= 1, got {n}")
        rng = make_rng(master_seed, stream)
        items = [
            _draw_isometry(n, rng, Provenance("sampled", (int(master_seed), stream, i)))
            for i in range(length)
        ]
        return cls(tuple(items), int(master_seed))

    @classmethod
    def repeat(cls, p: Isometry, length: int) -> IsometrySequence:
        return cls((p,) * length)


def ball_cardinality(radius: float, n: int) -> int:
    """Number of integer points in the open sup-norm ball of ``radius`` around an integer point."""
    if radius <= 0:
        return 0
    return (2 * math.ceil(radius) - 1) ** n


@dataclass(frozen=True, eq=False)
class WindowedSet:
    """Finite sample of a subset of Z^n.

    Inside the open sup-norm ball of ``trusted_radius`` the recorded points
    coincide with the modeled infinite set; points outside that ball may be
    present but carry no guarantee.
    """

    points: np.ndarray
    trusted_radius: float
    dimension: int

    def __post_init__(self):
        pts = np.asarray(self.points)
        if pts.size == 0:
            pts = np.zeros((0, self.dimension), dtype=np.int64)
        if pts.ndim != 2 or pts.shape[1] != self.dimension:
            raise ValueError(f"points must have shape (N, {self.dimension}), got {pts.shape}")
        if not np.issubdtype(pts.dtype, np.integer):
            if not np.all(pts == np.round(pts)):
                raise ValueError("windowed set points must be integral")
        pts = np.ascontiguousarray(pts, dtype=np.int64)
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        if self.trusted_radius < 0:
            raise ValueError("trusted radius must be nonnegative")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def half_width(self) -> int:
        """Largest coordinate magnitude of a point inside the trusted ball."""
        return max(math.ceil(self.trusted_radius) - 1, -1)

    @cached_property
    def mask(self) -> np.ndarray:
        """Boolean occupancy array of the trusted box; index ``x + half_width``."""
        h = self.half_width
        side = 2 * h + 1
        m = np.zeros((max(side, 0),) * self.dimension, dtype=bool)
        if side <= 0 or len(self.points) == 0:
            return m
        inside = np.all(np.abs(self.points) <= h, axis=1)
        idx = self.points[inside] + h
        m[tuple(idx.T)] = True
        m.flags.writeable = False
        return m

    def restrict(self, radius: float) -> WindowedSet:
        """Points in the open sup-norm ball of ``radius`` (must be trusted)."""
        if radius > self.trusted_radius:
            raise ValueError(
                f"radius {radius} exceeds the trusted radius {self.trusted_radius}"
            )
        keep = np.all(np.abs(self.points) < radius, axis=1)
        return WindowedSet(self.points[keep], radius, self.dimension)

    def count_in_ball(self, radius: float) -> int:
        if radius > self.trusted_radius:
            raise ValueError(
                f"radius {radius} exceeds the trusted radius {self.trusted_radius}"
            )
        return int(np.count_nonzero(np.all(np.abs(self.points) < radius, axis=1)))

    def sorted_points(self) -> np.ndarray:
        if len(self.points) == 0:
            return self.points
        order = np.lexsort(self.points.T[::-1])
        return self.points[order]

    def as_set(self) -> set[tuple[int, ...]]:
        return {tuple(int(c) for c in p) for p in self.points}

    @classmethod
    def from_mask(cls, mask: np.ndarray, trusted_radius: float) -> WindowedSet:
        """Set whose occupancy over the centred box is ``mask`` (odd side lengths)."""
        mask = np.asarray(mask, dtype=bool)
        h = (np.array(mask.shape) - 1) // 2
        pts = np.argwhere(mask) - h
        return cls(pts, trusted_radius, mask.ndim)

    @classmethod
    def sublattice(cls, steps: Sequence[int], radius: float) -> WindowedSet:
        """The lattice ``steps[0] Z x ... x steps[n-1] Z`` sampled in the ball of ``radius``."""
        n = len(steps)
        h = max(math.ceil(radius) - 1, 0)
        axes = [np.arange(-h, h + 1) for _ in range(n)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        keep = np.all(grid % np.asarray(steps) == 0, axis=1)
        if radius <= 0:
            keep[:] = False
        return cls(grid[keep], radius, n)


def integer_ball(R: float, n: int) -> WindowedSet:
    """All x in Z^n with ``max |x_i| < R``.

    The ball is open, so ``integer_ball(10, 1)`` stops at +-9.
    """
    if R < 0 or not math.isfinite(R):
        raise ValueError(f"radius must be finite and nonnegative, got {R}")
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    h = math.ceil(R) - 1
    if h < 0:
        return WindowedSet(np.zeros((0, n), dtype=np.int64), R, n)
    axis = np.arange(-h, h + 1, dtype=np.int64)
    grid = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1).reshape(-1, n)
    return WindowedSet(grid, R, n)
