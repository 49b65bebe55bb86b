"""Torus-geometric predictions for discretized isometries.

For ``Lambda = P Z^n`` let ``U`` be the union of the half-open unit cubes
``lambda + [-1/2, 1/2)^n``. An integer point belongs to ``P hat (Z^n)`` exactly when
it lies in ``U``, and only its class modulo ``Lambda`` matters. When ``Z^n`` is
equidistributed modulo ``Lambda`` the densities reduce to volumes on the
torus ``R^n / Lambda``, estimated here by sampling its fundamental domain
``P [0, 1)^n``.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .density import DiffHistogram
from .lattice import Isometry, WindowedSet, make_rng

__all__ = [
    "SparseWeights",
    "TorusSampler",
    "Estimate",
    "phi",
    "tau_rotation_closed_form",
    "mean_tau_rotation",
    "in_union",
    "tau_geometric",
    "rho_geometric",
    "diffusion_step",
    "max_fiber_size",
    "density_decrease_predicate",
    "equidistribution_discrepancy",
]

Z95 = 1.959963984540054


@dataclass(frozen=True)
class SparseWeights:
    """Weights on the vertices of one integral unit cube, summing to 1."""

    weights: dict

    def __getitem__(self, v) -> float:
        return self.weights.get(tuple(v), 0.0)

    def total(self) -> float:
        return math.fsum(self.weights.values())


def phi(u) -> SparseWeights:
    """Multilinear spread of the real point ``u`` onto the vertices of its unit cube.

    The vertex ``v`` gets ``prod_i (1 - |u_i - v_i|)``; vertices with zero weight
    are dropped, so an integer ``u`` maps to ``{u: 1}``.
    """
    u = np.asarray(u, dtype=float)
    base = np.floor(u).astype(np.int64)
    frac = u - base
    out = {}
    for corner in itertools.product((0, 1), repeat=len(u)):
        w = 1.0
        for f, c in zip(frac, corner):
            w *= f if c else 1.0 - f
        if w > 0.0:
            out[tuple(int(b + c) for b, c in zip(base, corner))] = w
    return SparseWeights(out)


def _phi_batch(points: np.ndarray):
    """Yield ``(vertices, weights)`` for every corner, vectorised over rows of ``points``."""
    base = np.floor(points).astype(np.int64)
    frac = points - base
    n = points.shape[1]
    for corner in itertools.product((0, 1), repeat=n):
        c = np.array(corner)
        w = np.prod(np.where(c == 1, frac, 1.0 - frac), axis=1)
        yield base + c, w


@dataclass(frozen=True)
class TorusSampler:
    """Sampling plan for the unit cube.

    ``scheme="lattice"`` is a Kronecker low-discrepancy sequence (additive
    recurrence on the generalized golden ratio) shifted by a seeded uniform
    vector; ``scheme="random"`` draws independent uniforms.
    """

    samples: int = 100_000
    seed: int = 0
    scheme: str = "lattice"

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("at least one sample is required")
        if self.scheme not in ("lattice", "random"):
            raise ValueError(f"unknown sampling scheme {self.scheme!r}")

    def unit_cube(self, n: int) -> np.ndarray:
        rng = make_rng(self.seed)
        if self.scheme == "random":
            return rng.random((self.samples, n))
        # phi_n is the positive root of x^(n+1) = x + 1
        g = 2.0
        for _ in range(60):
            g = (1 + g) ** (1 / (n + 1))
        alpha = (1 / g) ** np.arange(1, n + 1)
        shift = rng.random(n)
        i = np.arange(1, self.samples + 1)[:, None]
        return np.mod(shift + i * alpha, 1.0)


class Estimate(NamedTuple):
    value: float
    halfwidth: float


def _binomial_halfwidth(p: float, m: int) -> float:
    return Z95 * math.sqrt(max(p * (1 - p), 0.0) / m) if m else math.inf


def tau_rotation_closed_form(theta: float) -> float:
    """Density of the image of Z^2 under the discretized rotation by ``theta``.

    ``1 - (cos t + sin t - 1)^2`` with ``t`` the angle reduced to
    ``[0, pi/2]`` by the symmetries of the square lattice.
    """
    t = math.fmod(float(theta), math.pi / 2)
    if t < 0:
        t += math.pi / 2
    return 1.0 - (math.cos(t) + math.sin(t) - 1.0) ** 2


def mean_tau_rotation() -> float:
    """Average of :func:`tau_rotation_closed_form` over a uniform angle, ``6/pi - 1``."""
    return 6 / math.pi - 1


def in_union(P: Isometry, y: np.ndarray) -> np.ndarray:
    """Rows ``y`` of an ``(N, n)`` array lying in ``U = P Z^n + [-1/2, 1/2)^n``.

    A lattice point ``P m`` within sup distance 1/2 of ``y`` has
    ``|m - P^T y|_2 <= sqrt(n)/2``, so only the integers in that box are tried.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    n = P.n
    z = y @ P.matrix  # rows are P^T y
    half = math.sqrt(n) / 2
    lo = np.ceil(z - half).astype(np.int64)
    span = int(math.floor(2 * half)) + 1
    hit = np.zeros(len(y), dtype=bool)
    for off in itertools.product(range(span), repeat=n):
        m = lo + np.array(off)
        d = y - m @ P.matrix.T
        hit |= np.all((d >= -0.5) & (d < 0.5), axis=1)
    return hit


def _warn_rational(P: Isometry) -> None:
    if P.rational_rows:
        warnings.warn(
            f"{P.provenance} has rational rows {sorted(P.rational_rows)}; "
            "the uniform torus measure does not apply",
            stacklevel=3,
        )


def tau_geometric(P: Isometry, sampler: TorusSampler = TorusSampler()) -> Estimate:
    """Volume of ``U`` in the fundamental domain ``P [0,1)^n``, with a 95% binomial half-width.

    Valid for totally irrational ``P``; rational rows trigger a warning.
    """
    _warn_rational(P)
    y = sampler.unit_cube(P.n) @ P.matrix.T
    p = float(np.mean(in_union(P, y)))
    return Estimate(p, _binomial_halfwidth(p, sampler.samples))


def rho_geometric(P: Isometry, v, sampler: TorusSampler = TorusSampler()) -> Estimate:
    """Frequency of the difference ``v`` in ``P hat (Z^n)``.

    Both ``x`` and ``x + v`` are image points exactly when ``x mod Lambda`` lies in
    ``U & (U - v)``. Under equidistribution the frequency is
    ``vol(U & (U - v)) / vol(U)`` on the torus. The half-width is the
    binomial one for the conditional proportion.
    """
    _warn_rational(P)
    v = np.asarray(v, dtype=float)
    y = sampler.unit_cube(P.n) @ P.matrix.T
    a = in_union(P, y)
    m = int(np.count_nonzero(a))
    if m == 0:
        return Estimate(0.0, math.inf)
    both = in_union(P, y[a] + v)
    p = float(np.mean(both))
    return Estimate(p, _binomial_halfwidth(p, m))


def _safe_output_radius(vmax: int, n: int) -> int:
    # u is reached only from v with |v|_inf < sqrt(n) (|u|_inf + 1)
    a = int(math.floor((vmax + 1) / math.sqrt(n))) - 1
    while a >= 0 and math.ceil(math.sqrt(n) * (a + 1)) - 1 > vmax:
        a -= 1
    return a


def diffusion_step(h: DiffHistogram, P: Isometry) -> tuple[DiffHistogram, DiffHistogram]:
    """Sum and max of the spread differences ``phi(P v)[u] * h[v]``.

    Returns ``(lower, upper)`` on the largest box ``|u|_inf <= a`` whose every
    contributing ``v`` is tabulated in ``h``. The density ratio between the
    set and its image is left to the caller.
    """
    n = h.dimension
    a = _safe_output_radius(h.diff_radius, n)
    if a < 0:
        raise ValueError(f"histogram radius {h.diff_radius} too small for a diffusion step")
    keys = list(h.freqs)
    vs = np.array(keys, dtype=float)
    vals = np.array([h.freqs[k] for k in keys])
    side = 2 * a + 1
    upper = np.zeros((side,) * n)
    lower = np.zeros((side,) * n)
    for verts, w in _phi_batch(vs @ P.matrix.T):
        contrib = w * vals
        keep = np.all(np.abs(verts) <= a, axis=1) & (w > 0)
        idx = tuple((verts[keep] + a).T)
        np.add.at(upper, idx, contrib[keep])
        np.maximum.at(lower, idx, contrib[keep])
    return (
        DiffHistogram.from_array(lower, h.base_density, h.window_radius),
        DiffHistogram.from_array(upper, h.base_density, h.window_radius),
    )


def max_fiber_size(P: Isometry) -> int:
    """Upper bound on how many integer points ``P hat`` can send to one point.

    Points of a fiber have pairwise differences ``d`` with ``|P d|_inf < 1``;
    this is the size of the largest clique containing 0 in that finite graph.
    """
    n = P.n
    b = math.ceil(math.sqrt(n))
    close = [
        d
        for d in itertools.product(range(-b, b + 1), repeat=n)
        if any(d) and np.max(np.abs(P.matrix @ np.array(d, dtype=float))) < 1
    ]

    def adjacent(d1, d2):
        diff = np.subtract(d1, d2, dtype=float)
        return np.max(np.abs(P.matrix @ diff)) < 1

    best = 1

    def grow(clique, cands):
        nonlocal best
        best = max(best, len(clique) + 1)
        for i, c in enumerate(cands):
            rest = [d for d in cands[i + 1 :] if adjacent(c, d)]
            grow(clique + [c], rest)

    grow([], close)
    return best


def density_decrease_predicate(h: DiffHistogram, P: Isometry) -> tuple[bool, float]:
    """Whether one discretization step must lose density, and a lower bound on the loss.

    ``strict`` holds when some nonzero difference ``v0`` with positive frequency
    is shrunk by ``P`` to sup norm below 1. The bound follows from counting
    pairs: ``D * (upper[v0] - 1) / M`` for the best ``v0``, where ``upper`` is the
    diffusion sum and ``M`` bounds the fiber size.
    """
    strict = False
    for v, f in h.freqs.items():
        if f > 0 and any(v) and np.max(np.abs(P.matrix @ np.array(v, dtype=float))) < 1:
            strict = True
            break
    _, upper = diffusion_step(h, P)
    excess = max(0.0, max(upper.freqs.values()) - 1.0)
    return strict, h.base_density * excess / max_fiber_size(P)


def equidistribution_discrepancy(P: Isometry, S: WindowedSet, bins: int = 10) -> float:
    """Largest relative deviation from uniform of ``P x mod Z^n`` over a grid of boxes.

    Returns ``max_box |mass - bins^-n| * bins^n`` for ``x`` ranging over the
    trusted part of ``S``.
    """
    if bins < 2:
        raise ValueError("at least two bins per axis are required")
    pts = S.points[np.all(np.abs(S.points) < S.trusted_radius, axis=1)]
    if len(pts) == 0:
        raise ValueError("no trusted points to test")
    frac = np.mod(pts @ P.matrix.T, 1.0)
    cell = np.minimum((frac * bins).astype(np.int64), bins - 1)
    flat = np.ravel_multi_index(tuple(cell.T), (bins,) * P.n)
    mass = np.bincount(flat, minlength=bins**P.n) / len(pts)
    return float(np.max(np.abs(mass * bins**P.n - 1.0)))
