"""Counting statistics on windowed subsets of Z^n.

Densities, rates of injectivity, difference frequencies and their mean,
epsilon-translations and Delone parameters. Every function reads a
:class:`~isodisc.lattice.WindowedSet` only inside its trusted radius and
raises :class:`WindowExceeded` when asked to look further.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, signal
from scipy.special import gamma as gamma_fn

from .discretize import iter_stages
from .lattice import (
    Isometry,
    IsometrySequence,
    WindowedSet,
    ball_cardinality,
)

__all__ = [
    "WindowExceeded",
    "DensityCurve",
    "DiffHistogram",
    "ConvergenceReport",
    "sample_centers",
    "uniform_R_density",
    "rate_of_injectivity",
    "rate_convergence",
    "residue_rate",
    "rate_curve",
    "diff_frequency",
    "diff_histogram",
    "bohr_mean",
    "translation_defects",
    "find_translations",
    "delone_parameters",
    "minkowski_radius",
    "minkowski_witness",
]


class WindowExceeded(ValueError):
    """A query reaches outside the trusted radius of a windowed set."""


@dataclass(frozen=True)
class DensityCurve:
    """Per-step mean rate of injectivity; ``entries`` holds ``(k, tau, stderr)``."""

    entries: tuple
    trials: int
    R: float

    def __post_init__(self):
        ks = [e[0] for e in self.entries]
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError("curve steps must be strictly increasing")
        if any(not 0.0 <= e[1] <= 1.0 for e in self.entries):
            raise ValueError("rates of injectivity lie in [0, 1]")

    @property
    def k(self) -> np.ndarray:
        return np.array([e[0] for e in self.entries])

    @property
    def tau(self) -> np.ndarray:
        return np.array([e[1] for e in self.entries])

    @property
    def stderr(self) -> np.ndarray:
        return np.array([e[2] for e in self.entries])


@dataclass(frozen=True)
class DiffHistogram:
    """Frequencies of differences, keyed by integer vectors with ``max |v_i| <= diff_radius``.

    Histograms built by :func:`diff_histogram` satisfy ``freqs[0] == 1`` and
    are exactly symmetric. The bounds returned by ``diffusion_step`` reuse the
    type and may exceed 1.
    """

    freqs: dict
    base_density: float
    window_radius: float
    diff_radius: int

    @property
    def dimension(self) -> int:
        return len(next(iter(self.freqs)))

    def __getitem__(self, v) -> float:
        return self.freqs.get(tuple(int(c) for c in v), 0.0)

    def as_array(self) -> np.ndarray:
        """Dense array indexed by ``v + diff_radius``."""
        d = self.diff_radius
        arr = np.zeros((2 * d + 1,) * self.dimension)
        for v, f in self.freqs.items():
            arr[tuple(c + d for c in v)] = f
        return arr

    @classmethod
    def from_array(cls, arr: np.ndarray, base_density: float, window_radius: float) -> DiffHistogram:
        d = (arr.shape[0] - 1) // 2
        freqs = {
            tuple(int(c) - d for c in idx): float(arr[idx]) for idx in np.ndindex(arr.shape)
        }
        return cls(freqs, base_density, window_radius, d)


@dataclass(frozen=True)
class ConvergenceReport:
    tau_R: float
    tau_2R: float
    gap: float
    converged: bool


def _check_inside(S: WindowedSet, needed_half_width: int, what: str) -> None:
    if needed_half_width > S.half_width:
        raise WindowExceeded(
            f"{what} needs coordinates up to {needed_half_width}, "
            f"but the set is only trusted below radius {S.trusted_radius}"
        )


def sample_centers(trusted: float, R: float, n: int, stride: int | None = None) -> np.ndarray:
    """Integer centers on a grid of step ``stride`` (default ``R/2``) whose ball of radius ``R`` is trusted.

    The origin is always included.
    """
    room = math.ceil(trusted) - math.ceil(R)
    if room < 0:
        raise WindowExceeded(f"balls of radius {R} do not fit in trusted radius {trusted}")
    s = max(1, int(R // 2)) if stride is None else max(1, int(stride))
    m = room // s
    axis = np.arange(-m, m + 1) * s
    return np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1).reshape(-1, n)


def _box_sums(mask: np.ndarray, centers_idx: np.ndarray, h: int) -> np.ndarray:
    """Number of True cells of ``mask`` in the boxes ``[c - h, c + h]`` (array indices)."""
    table = mask.astype(np.int64)
    for ax in range(mask.ndim):
        table = np.cumsum(table, axis=ax)
    table = np.pad(table, [(1, 0)] * mask.ndim)
    total = np.zeros(len(centers_idx), dtype=np.int64)
    for corner in itertools.product((0, 1), repeat=mask.ndim):
        idx = tuple(
            centers_idx[:, a] + h + 1 if hi else centers_idx[:, a] - h
            for a, hi in enumerate(corner)
        )
        sign = -1 if (mask.ndim - sum(corner)) % 2 else 1
        total += sign * table[idx]
    return total


def uniform_R_density(S: WindowedSet, R: float, stride: int | None = None) -> float:
    """Grid estimate of ``sup_x card(B(x,R) & S) / card(B(x,R) & Z^n)``.

    Centers run over the grid of :func:`sample_centers`, so the value is a
    lower bound of the supremum over all real centers.
    """
    if R <= 0:
        raise ValueError("radius must be positive")
    centers = sample_centers(S.trusted_radius, R, S.dimension, stride)
    h = math.ceil(R) - 1
    counts = _box_sums(S.mask, centers + S.half_width, h)
    return float(counts.max() / ball_cardinality(R, S.dimension))


def rate_of_injectivity(seq: IsometrySequence, R: float, n: int | None = None) -> float:
    """``card(Gamma_k & [B_R]) / card[B_R]`` computed on an exact window."""
    *_, last = iter_stages(seq, R, n)
    return last.count_in_ball(R) / ball_cardinality(R, last.dimension)


def rate_convergence(seq: IsometrySequence, R: float, n: int | None = None) -> ConvergenceReport:
    """Rates at ``R`` and ``2R``; flagged unconverged when they differ by more than ``3/sqrt(R)``."""
    a = rate_of_injectivity(seq, R, n)
    b = rate_of_injectivity(seq, 2 * R, n)
    gap = abs(a - b)
    return ConvergenceReport(a, b, gap, gap <= 3 / math.sqrt(R))


def _round_half_low_exact(num: int, den: int) -> int:
    # ceil(num/den - 1/2) in integer arithmetic, den > 0
    return -((den - 2 * num) // (2 * den))


def residue_rate(P: Isometry) -> float:
    """Exact density of ``P hat (Z^n)`` for a rational isometry.

    With ``P = M / q`` and integral ``M``, ``P hat (x + q m) = P hat (x) + M m``, so the
    image is a union of cosets of ``M Z^n`` (index ``q^n``), one per residue of
    ``x`` modulo ``q``. Cosets are compared through ``M^T y mod q^2``, which is
    exact because ``M^T M = q^2 I``.
    """
    M, q = P.integer_form()
    n = P.n
    Mt = M.T.tolist()
    Ml = M.tolist()
    keys = set()
    for r in itertools.product(range(q), repeat=n):
        y = [_round_half_low_exact(sum(Ml[i][j] * r[j] for j in range(n)), q) for i in range(n)]
        keys.add(tuple(sum(Mt[i][j] * y[j] for j in range(n)) % (q * q) for i in range(n)))
    return len(keys) / q**n


def _trial_rates(args) -> np.ndarray:
    n, kmax, R, seed, t = args
    seq = IsometrySequence.sampled(n, kmax, seed, stream=t)
    card = ball_cardinality(R, n)
    stages = iter_stages(seq, R)
    next(stages)
    return np.array([s.count_in_ball(R) / card for s in stages])


def rate_curve(
    seed: int, kmax: int, R: float, trials: int, n: int = 2, workers: int = 1
) -> DensityCurve:
    """Mean and standard error of ``tau^k`` over independent sampled sequences.

    Trial ``t`` uses substream ``t`` of ``seed``; results are merged in trial
    order, so the curve does not depend on ``workers``.
    """
    if kmax < 1 or trials < 1:
        raise ValueError("kmax and trials must be at least 1")
    jobs = [(n, kmax, R, seed, t) for t in range(trials)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            rows = list(ex.map(_trial_rates, jobs))
    else:
        rows = [_trial_rates(j) for j in jobs]
    data = np.vstack(rows)
    mean = data.mean(axis=0)
    se = data.std(axis=0, ddof=1) / math.sqrt(trials) if trials > 1 else np.zeros(kmax)
    entries = tuple((k + 1, float(mean[k]), float(se[k])) for k in range(kmax))
    return DensityCurve(entries, trials, R)


def diff_frequency(S: WindowedSet, v) -> float:
    """``card{x in S & B_R : x + v in S} / card(S & B_R)`` with ``R = trusted_radius - |v|_inf``."""
    v = np.asarray(v, dtype=np.int64)
    if v.shape != (S.dimension,):
        raise ValueError(f"difference of shape {v.shape} does not match dimension {S.dimension}")
    a = int(np.max(np.abs(v))) if v.size else 0
    H = S.half_width
    h = H - a
    if h < 0:
        raise WindowExceeded(f"difference {tuple(v)} leaves no room in radius {S.trusted_radius}")
    inner = S.mask[tuple(slice(a, a + 2 * h + 1) for _ in range(S.dimension))]
    shifted = S.mask[tuple(slice(a + c, a + c + 2 * h + 1) for c in v)]
    base = np.count_nonzero(inner)
    if base == 0:
        return 0.0
    return np.count_nonzero(inner & shifted) / base


def _pair_counts(S: WindowedSet, h: int, vmax: int, center=None) -> tuple[np.ndarray, np.ndarray]:
    """Counts ``#{x in S & box(center, h) : x + v in S}`` for all ``|v|_inf <= vmax``.

    Also returns the matching region of the mask. Indices of the first
    array are ``v + vmax``.
    """
    n = S.dimension
    H = S.half_width
    c = np.zeros(n, dtype=np.int64) if center is None else np.asarray(center)
    _check_inside(S, int(np.max(np.abs(c))) + h + vmax, "pair counting")
    lo = c + H - h - vmax
    region = S.mask[tuple(slice(l, l + 2 * (h + vmax) + 1) for l in lo)]
    inner = region[tuple(slice(vmax, vmax + 2 * h + 1) for _ in range(n))]
    if not inner.any():
        return np.zeros((2 * vmax + 1,) * n, dtype=np.int64), region
    corr = signal.correlate(region.astype(float), inner.astype(float), mode="valid", method="fft")
    return np.rint(corr).astype(np.int64), region


def diff_histogram(S: WindowedSet, vmax: int) -> DiffHistogram:
    """Symmetrized difference frequencies over the box ``|v|_inf <= vmax``.

    All differences share the window ``B_R``, ``R = trusted_radius - vmax``, and
    ``freqs[v]`` is the mean of the one-sided counts for ``v`` and ``-v``,
    which makes the table exactly symmetric.
    """
    vmax = int(vmax)
    H = S.half_width
    h = H - vmax
    if h < 0:
        raise WindowExceeded(f"vmax={vmax} exceeds trusted radius {S.trusted_radius}")
    counts, _ = _pair_counts(S, h, vmax)
    zero = (vmax,) * S.dimension
    base = counts[zero]
    card = (2 * h + 1) ** S.dimension
    if base == 0:
        arr = np.zeros_like(counts, dtype=float)
    else:
        arr = (counts + np.flip(counts)) / (2.0 * base)
    return DiffHistogram.from_array(arr, base / card, S.trusted_radius - vmax)


def bohr_mean(h: DiffHistogram) -> float:
    """Average frequency over the tabulated box."""
    return float(np.mean(list(h.freqs.values())))


def translation_defects(
    S: WindowedSet, search_radius: int, R: float | None = None, stride: int | None = None
) -> dict:
    """``D_R^+((S + v) symmetric-difference S)`` for every ``|v|_inf <= search_radius``.

    ``R`` defaults to ``trusted_radius - search_radius``; the sup runs over
    the centers of :func:`sample_centers` for the shrunken window.
    """
    s = int(search_radius)
    n = S.dimension
    if R is None:
        R = S.trusted_radius - s
    if R <= 0:
        raise WindowExceeded(f"search radius {s} leaves no room in radius {S.trusted_radius}")
    centers = sample_centers(S.trusted_radius - s, R, n, stride)
    h = math.ceil(R) - 1
    card = ball_cardinality(R, n)
    worst = np.zeros((2 * s + 1,) * n)
    ones = np.ones((2 * h + 1,) * n)
    for c in centers:
        pairs, region = _pair_counts(S, h, s, c)
        # Counts of S in the shifted boxes B(c + w, R), indexed by w + s.
        shifted = np.rint(
            signal.correlate(region.astype(float), ones, mode="valid", method="fft")
        ).astype(np.int64)
        here = shifted[(s,) * n]
        # (S + v) & B(c, R) has the size of S & B(c - v, R); the overlap is pairs at -v.
        sym = here + np.flip(shifted) - 2 * np.flip(pairs)
        worst = np.maximum(worst, sym / card)
    return {
        tuple(int(c) - s for c in idx): float(worst[idx]) for idx in np.ndindex(worst.shape)
    }


def find_translations(
    S: WindowedSet, eps: float, search_radius: int, R: float | None = None
) -> set:
    """All ``v`` in the search box whose translation defect is below ``eps``."""
    return {v for v, d in translation_defects(S, search_radius, R).items() if d < eps}


_MAX_DT_CELLS = 50_000_000


def delone_parameters(S: WindowedSet) -> tuple[float, float]:
    """Packing and covering radii of ``S`` in the sup norm, measured in the window.

    ``r`` is half the smallest distance between two points of the trusted
    box. ``Rc`` is the largest distance from a center on the half-integer grid
    of the inner half of the window to the nearest point of ``S``.
    """
    if len(S) == 0:
        raise ValueError("Delone parameters of an empty set are undefined")
    n = S.dimension
    H = S.half_width
    m = S.mask
    r = math.inf
    for d in range(1, 2 * H + 1):
        found = False
        for v in itertools.product(range(-d, d + 1), repeat=n):
            if max(map(abs, v)) != d or v < (0,) * n:
                continue
            a = tuple(slice(max(0, -c), m.shape[0] - max(0, c)) for c in v)
            b = tuple(slice(max(0, c), m.shape[0] - max(0, -c)) for c in v)
            if np.any(m[a] & m[b]):
                found = True
                break
        if found:
            r = d / 2
            break

    Hw = H
    while Hw > 0 and (4 * Hw + 1) ** n > _MAX_DT_CELLS:
        Hw -= 1
    sub = m[tuple(slice(H - Hw, H + Hw + 1) for _ in range(n))]
    doubled = np.ones((4 * Hw + 1,) * n, dtype=bool)
    doubled[tuple(slice(0, None, 2) for _ in range(n))] = ~sub
    if doubled.all():
        return r, math.inf
    dist = ndimage.distance_transform_cdt(doubled, metric="chessboard") / 2
    c = Hw // 2
    inner = dist[tuple(slice(2 * (Hw - c), 2 * (Hw + c) + 1) for _ in range(n))]
    Rc = float(inner.max())
    # A nearest point farther than the window edge could be missing.
    if Rc > Hw - c:
        Rc = math.inf
    return r, Rc


def minkowski_radius(D: float, n: int) -> float:
    """Euclidean radius of the ball of volume ``4^n floor(1/D)``."""
    if not 0 < D <= 1:
        raise ValueError(f"density must lie in (0, 1], got {D}")
    vol_unit = math.pi ** (n / 2) / gamma_fn(n / 2 + 1)
    return (4**n * math.floor(1 / D) / vol_unit) ** (1 / n)


def minkowski_witness(S: WindowedSet, D: float) -> tuple[tuple, float]:
    """Nonzero ``v`` of largest frequency in the Euclidean ball of volume ``4^n floor(1/D)``."""
    n = S.dimension
    rad = minkowski_radius(D, n)
    b = math.floor(rad)
    best, best_rho = None, -1.0
    for v in itertools.product(range(-b, b + 1), repeat=n):
        if not any(v) or sum(c * c for c in v) > rad * rad:
            continue
        rho = diff_frequency(S, v)
        if rho > best_rho:
            best, best_rho = v, rho
    return best, best_rho
