import math

import numpy as np
import pytest
from scipy import integrate

from isodisc.density import (
    DensityCurve,
    DiffHistogram,
    WindowExceeded,
    bohr_mean,
    delone_parameters,
    diff_frequency,
    diff_histogram,
    find_translations,
    minkowski_radius,
    minkowski_witness,
    rate_convergence,
    rate_curve,
    rate_of_injectivity,
    residue_rate,
    sample_centers,
    translation_defects,
    uniform_R_density,
)
from isodisc.discretize import apply_hat, image_chain
from isodisc.lattice import (
    Isometry,
    IsometrySequence,
    WindowedSet,
    integer_ball,
    make_pythagorean,
    make_rotation2d,
    sample_isometry,
)
from isodisc.torus import tau_rotation_closed_form


@pytest.fixture(scope="module")
def gamma1_pi4():
    ch = image_chain(IsometrySequence((make_rotation2d(math.pi / 4),)), 120)
    return ch.stages[1]


def test_uniform_R_density_examples(gamma1_pi4):
    assert uniform_R_density(integer_ball(40, 2), 10) == 1.0
    assert uniform_R_density(WindowedSet.sublattice((2, 2), 40), 10) == pytest.approx(0.25, abs=0.05)
    assert uniform_R_density(gamma1_pi4, 50) == pytest.approx(0.83, abs=0.03)
    with pytest.raises(WindowExceeded):
        uniform_R_density(integer_ball(10, 2), 20)


def test_sample_centers_stay_inside():
    c = sample_centers(30, 10, 2)
    assert np.all(np.abs(c) <= 30 - 10)


def test_rate_identity_exact():
    I = Isometry(np.eye(2))
    assert rate_of_injectivity(IsometrySequence((I, I)), 37) == 1.0


def test_rate_pi_over_4():
    r = rate_of_injectivity(IsometrySequence((make_rotation2d(math.pi / 4),)), 500)
    assert r == pytest.approx(2 * math.sqrt(2) - 2, abs=0.01)


def _brute_residue_rate(p, q, r):
    """Fraction of a period box ``[0, r^2)^2`` hit by the discretization.

    A preimage of ``y`` lies within distance 1 of ``P^T y``; odd ``r`` rules out ties.
    """
    P = make_pythagorean(p, q, r)
    hit = 0
    for y in np.ndindex(r * r, r * r):
        z = np.rint(P.matrix.T @ np.array(y, dtype=float)).astype(int)
        hit += any(
            apply_hat(P, (z[0] + a, z[1] + b)) == y for a in (-1, 0, 1) for b in (-1, 0, 1)
        )
    return hit / r**4


@pytest.mark.parametrize("triple", [(3, 4, 5), (5, 12, 13), (8, 15, 17)])
def test_residue_rate_matches_brute_force(triple):
    assert residue_rate(make_pythagorean(*triple)) == _brute_residue_rate(*triple)


def test_residue_rate_known_values():
    assert residue_rate(make_pythagorean(3, 4, 5)) == 1.0
    assert residue_rate(make_pythagorean(8, 15, 17)) == pytest.approx(13 / 17)


def test_residue_rate_matches_counting_on_aligned_box():
    P = make_pythagorean(8, 15, 17)
    # side 2*145 - 1 = 289 = 17^2, a period of the image
    assert rate_of_injectivity(IsometrySequence((P,)), 145) == residue_rate(P)


def test_rate_convergence_report():
    rep = rate_convergence(IsometrySequence((make_rotation2d(0.3),)), 100)
    assert rep.converged
    assert rep.tau_R == pytest.approx(rep.tau_2R, abs=0.3)


def test_rate_curve_first_step_mean_matches_quadrature():
    curve = rate_curve(seed=11, kmax=1, R=80, trials=300)
    quad, _ = integrate.quad(tau_rotation_closed_form, 0, math.pi / 2)
    assert curve.tau[0] == pytest.approx(quad / (math.pi / 2), abs=0.02)


def test_rate_curve_reproducible_and_worker_independent():
    a = rate_curve(seed=5, kmax=4, R=30, trials=3)
    b = rate_curve(seed=5, kmax=4, R=30, trials=3, workers=2)
    assert a.entries == b.entries
    assert list(a.k) == [1, 2, 3, 4]


def test_density_curve_validation():
    with pytest.raises(ValueError):
        DensityCurve(((2, 0.5, 0.0), (1, 0.4, 0.0)), 1, 10)
    with pytest.raises(ValueError):
        DensityCurve(((1, 1.5, 0.0),), 1, 10)


def test_diff_frequency_examples(gamma1_pi4):
    assert diff_frequency(integer_ball(20, 2), (3, -2)) == 1.0
    assert diff_frequency(WindowedSet.sublattice((2, 1), 20), (1, 0)) == 0.0
    with pytest.raises(WindowExceeded):
        diff_frequency(integer_ball(5, 2), (6, 0))


def test_diff_histogram_lattices():
    h = diff_histogram(integer_ball(20, 2), 3)
    assert len(h.freqs) == 49 and all(f == 1.0 for f in h.freqs.values())
    h = diff_histogram(WindowedSet.sublattice((2, 2), 20), 3)
    for v, f in h.freqs.items():
        assert f == (1.0 if v[0] % 2 == 0 and v[1] % 2 == 0 else 0.0)


def test_diff_histogram_invariants(gamma1_pi4):
    h = diff_histogram(gamma1_pi4, 6)
    assert h[(0, 0)] == 1.0
    for v, f in h.freqs.items():
        assert f == h[tuple(-c for c in v)]
        assert 0.0 <= f <= 1.0


def test_diff_histogram_agrees_with_one_sided(gamma1_pi4):
    h = diff_histogram(gamma1_pi4, 4)
    for v in [(1, 0), (2, 1), (3, -3)]:
        assert h[v] == pytest.approx(diff_frequency(gamma1_pi4, v), abs=0.01)


def test_diff_histogram_array_round_trip():
    h = diff_histogram(WindowedSet.sublattice((2, 3), 20), 2)
    g = DiffHistogram.from_array(h.as_array(), h.base_density, h.window_radius)
    assert g.freqs == h.freqs


def test_bohr_mean_lattices():
    assert bohr_mean(diff_histogram(integer_ball(30, 2), 4)) == 1.0
    # box of side 9 holds 5^2 even vectors out of 81
    assert bohr_mean(diff_histogram(WindowedSet.sublattice((2, 2), 30), 4)) == pytest.approx(
        0.25, abs=0.07
    )


def test_find_translations_lattices():
    found = find_translations(integer_ball(30, 2), 0.01, 3)
    assert found == {(a, b) for a in range(-3, 4) for b in range(-3, 4)}
    found = find_translations(WindowedSet.sublattice((2, 1), 30), 0.01, 3)
    assert found == {(a, b) for a in range(-3, 4) for b in range(-3, 4) if a % 2 == 0}


def test_find_translations_image_has_nonzero(gamma1_pi4):
    found = find_translations(gamma1_pi4, 0.05, 20)
    assert any(any(v) for v in found)


def test_delone_parameters_examples():
    assert delone_parameters(integer_ball(20, 2)) == (0.5, 0.5)
    assert delone_parameters(WindowedSet.sublattice((2, 2), 20)) == (1.0, 1.0)
    with pytest.raises(ValueError):
        delone_parameters(WindowedSet(np.zeros((0, 2)), 5, 2))


def test_delone_parameters_late_image_relatively_dense():
    ch = image_chain(IsometrySequence.sampled(2, 50, 7), 100)
    r, Rc = delone_parameters(ch.stages[50])
    assert r >= 0.5 and math.isfinite(Rc)


def test_minkowski_radius_volume():
    rad = minkowski_radius(0.3, 2)
    assert math.pi * rad**2 == pytest.approx(16 * 3)
    with pytest.raises(ValueError):
        minkowski_radius(0.0, 2)


def test_minkowski_witness_on_image(gamma1_pi4):
    D = gamma1_pi4.count_in_ball(100) / 199**2
    v, rho = minkowski_witness(gamma1_pi4, D)
    assert any(v) and rho >= D / 2


def test_translation_defects_match_direct_count():
    S = image_chain(IsometrySequence.sampled(2, 3, 5), 60).stages[3]
    R = 40
    defects = translation_defects(S, 5, R=R)
    pts = S.as_set()
    centers = sample_centers(S.trusted_radius - 5, R, 2)
    for v in [(0, 0), (1, 0), (3, -2), (-5, 5)]:
        moved = {(a + v[0], b + v[1]) for a, b in pts}
        direct = max(
            sum(1 for p in moved ^ pts if max(abs(p[0] - c[0]), abs(p[1] - c[1])) < R)
            for c in centers
        ) / (2 * R - 1) ** 2
        assert defects[v] == pytest.approx(direct, abs=1e-12)
