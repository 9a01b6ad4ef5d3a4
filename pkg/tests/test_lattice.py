import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fermiball import (
    InteractionPotential,
    Momentum,
    annulus_count_vs_area,
    build_fermi_ball,
    count_slice,
    dispersion,
    equator_reciprocal_sum,
    excitation_energy,
    hartree_fock_energy,
    kinetic_reciprocal_sum,
    shell_pairs,
)
from fermiball.lattice import shell_denominators


# ---------------------------------------------------------------- oracles


def brute_ball_count(ksq) -> int:
    r = int(math.floor(math.sqrt(float(ksq)))) + 1
    count = 0
    for x in range(-r, r + 1):
        for y in range(-r, r + 1):
            for z in range(-r, r + 1):
                if Fraction(x * x + y * y + z * z) <= Fraction(ksq):
                    count += 1
    return count


def brute_shell_pairs(ksq, k, box=6):
    kx, ky, kz = k
    thr = Fraction(ksq)
    out = set()
    for x in range(-box, box + 1):
        for y in range(-box, box + 1):
            for z in range(-box, box + 1):
                p2 = x * x + y * y + z * z
                h2 = (x - kx) ** 2 + (y - ky) ** 2 + (z - kz) ** 2
                if Fraction(p2) > thr and Fraction(h2) <= thr:
                    out.add((x, y, z))
    return out


def brute_annulus(r_in, r_out, d0):
    lo, hi = r_in * r_in, r_out * r_out
    n = 0
    b = int(math.ceil(r_out)) + 1
    for x in range(-b, b + 1):
        for y in range(-b, b + 1):
            q = d0 * x * x + y * y
            if q <= hi and (q > lo or (r_in == 0 and q == 0)):
                n += 1
    return n


def brute_hf_energy(ball, v):
    pts = [tuple(p) for p in ball.points.tolist()]
    n = len(pts)
    lam = 1.0 / n
    kin = ball.hbar**2 * sum(x * x + y * y + z * z for x, y, z in pts)
    inter = 0.0
    for i, p in enumerate(pts):
        for j, q in enumerate(pts):
            if i != j:
                inter += v((0, 0, 0)) - v((p[0] - q[0], p[1] - q[1], p[2] - q[2]))
    return kin + 0.5 * lam * inter


# ------------------------------------------------------------ fermi ball


def test_ball_trivial_counts():
    assert build_fermi_ball(0.5).n_particles == 1
    assert build_fermi_ball(1.0).n_particles == 7


def test_ball_matches_brute_force_and_gauss():
    ball = build_fermi_ball(10.0)
    assert ball.n_particles == brute_ball_count(100)
    volume = 4.0 * math.pi / 3.0 * 1000.0
    assert abs(ball.n_particles - volume) / 100.0 < 1.0


def test_ball_integer_radius_includes_boundary():
    ball = build_fermi_ball(k_fermi_sq=4)
    assert ball.contains((2, 0, 0))
    assert ball.n_particles == brute_ball_count(4)


def test_ball_deterministic_and_sorted(ball_small):
    other = build_fermi_ball(k_fermi_sq=ball_small.k_fermi_sq)
    assert np.array_equal(ball_small.points, other.points)
    order = np.lexsort((ball_small.points[:, 2], ball_small.points[:, 1], ball_small.points[:, 0]))
    assert np.array_equal(order, np.arange(len(ball_small.points)))


def test_ball_reflection_symmetry(ball_small):
    pts = {tuple(p) for p in ball_small.points.tolist()}
    assert pts == {(-x, -y, -z) for x, y, z in pts}


def test_scaling_constants(ball_100):
    n = ball_100.n_particles
    assert ball_100.hbar == pytest.approx(n ** (-1 / 3), rel=1e-15)
    assert ball_100.kappa_eff == pytest.approx(ball_100.k_fermi * ball_100.hbar, rel=1e-15)
    # kappa_eff approaches (3/4pi)^(1/3) ~ 0.620350 from the counting argument
    assert abs(ball_100.kappa_eff - 0.620350) < 0.01


# ------------------------------------------------------------ dispersion


def test_dispersion_vanishes_on_sphere():
    ball = build_fermi_ball(3.0)
    assert dispersion(ball, (3, 0, 0)) == 0.0
    assert dispersion(ball, (0, 0, 0)) == pytest.approx(ball.kappa_eff**2, rel=1e-15)


def test_dispersion_example(ball_tiny):
    # k_F^2 = 1.5, N = 7: e((2,0,0)) = |4 - 1.5| hbar^2
    assert dispersion(ball_tiny, (2, 0, 0)) == pytest.approx(2.5 * 7 ** (-2 / 3), rel=1e-14)


# ------------------------------------------------------------ shell pairs


def test_shell_pairs_k_zero_empty(ball_tiny):
    assert len(shell_pairs(ball_tiny, (0, 0, 0))) == 0


def test_shell_pairs_brute_force():
    ball = build_fermi_ball(1.0)
    got = {tuple(p) for p in shell_pairs(ball, (1, 0, 0)).tolist()}
    expected = {(2, 0, 0), (1, 1, 0), (1, -1, 0), (1, 0, 1), (1, 0, -1)}
    assert got == expected
    assert got == brute_shell_pairs(1, (1, 0, 0))


@settings(max_examples=30, deadline=None)
@given(
    k=st.tuples(
        st.integers(-3, 3), st.integers(-3, 3), st.integers(-3, 3)
    ).filter(lambda k: any(k))
)
def test_shell_pairs_properties(k):
    ball = build_fermi_ball(k_fermi_sq=Fraction("4.5"))
    pairs = shell_pairs(ball, k)
    assert {tuple(p) for p in pairs.tolist()} == brute_shell_pairs(Fraction("4.5"), k)
    # reflection: same cardinality at -k
    assert len(pairs) == len(shell_pairs(ball, tuple(-c for c in k)))
    if len(pairs):
        den = shell_denominators(ball, k)
        assert den.min() >= 1


def test_shell_cardinality_scales_like_surface():
    sizes = []
    for ksq in ["100.5", "400.5", "1600.5"]:
        ball = build_fermi_ball(k_fermi_sq=Fraction(ksq))
        sizes.append(len(shell_pairs(ball, (0, 0, 1))) / ball.n_particles ** (2 / 3))
    assert max(sizes) / min(sizes) < 1.5


# ------------------------------------------------------- reciprocal sums


def test_kinetic_sum_example(ball_tiny):
    ball = build_fermi_ball(1.0)
    assert kinetic_reciprocal_sum(ball, (1, 0, 0)) == pytest.approx(13.0 / 3.0, abs=1e-15)


def test_kinetic_sum_rejects_zero(ball_tiny):
    with pytest.raises(ValueError):
        kinetic_reciprocal_sum(ball_tiny, (0, 0, 0))


def test_equator_sum_bounds_and_validation(ball_100):
    k = (0, 0, 1)
    full = kinetic_reciprocal_sum(ball_100, k)
    eq = equator_reciprocal_sum(ball_100, k, 1.0 / 24.0)
    assert 0.0 <= eq <= full + 1e-12
    for bad in (0.0, -0.1, 77.0 / 624.0, 0.2):
        with pytest.raises(ValueError):
            equator_reciprocal_sum(ball_100, k, bad)


def test_equator_sum_inactive_threshold_equals_full():
    # cut 4 N^(1/3 - delta) exceeds every integer gap on a small ball
    ball = build_fermi_ball(1.0)
    k = (1, 0, 0)
    assert equator_reciprocal_sum(ball, k, 0.01) == kinetic_reciprocal_sum(ball, k)


def test_equator_sum_empty_restriction():
    # large |k| pushes every gap above the cut: gaps at k=(0,0,4) are >= 8
    ball = build_fermi_ball(1.0)
    k = (0, 0, 4)
    assert kinetic_reciprocal_sum(ball, k) > 0
    assert equator_reciprocal_sum(ball, k, 0.12) == 0.0


# ------------------------------------------------------------ slices


def test_count_slice_example():
    ball = build_fermi_ball(1.0)
    k = (1, 0, 0)
    assert count_slice(ball, k, 1) == 4
    assert count_slice(ball, k, 2) == 1
    assert count_slice(ball, k, 0) == 0
    assert count_slice(ball, k, 3) == 0


@settings(max_examples=20, deadline=None)
@given(
    k=st.tuples(
        st.integers(-2, 2), st.integers(-2, 2), st.integers(-2, 2)
    ).filter(lambda k: any(k))
)
def test_slice_partition(k):
    ball = build_fermi_ball(k_fermi_sq=Fraction("6.5"))
    pairs = shell_pairs(ball, k)
    kv = np.asarray(k)
    if len(pairs):
        s_values = pairs @ kv
        total = sum(count_slice(ball, k, s) for s in range(s_values.min(), s_values.max() + 1))
        assert total == len(pairs)


def test_slice_window(ball_100):
    k = (1, 1, 0)
    pairs = shell_pairs(ball_100, k)
    s_vals = pairs @ np.asarray(k)
    ksq = 2
    assert s_vals.min() >= (1 + ksq) / 2
    assert s_vals.max() <= 2 * ball_100.k_fermi * math.sqrt(ksq)


# ------------------------------------------------------------ ellipses


def test_annulus_examples():
    assert annulus_count_vs_area(0, 1, 1) == (5, pytest.approx(math.pi))
    count, _ = annulus_count_vs_area(0, 2.5, 1)
    assert count == 21


@settings(max_examples=25, deadline=None)
@given(
    d0=st.integers(1, 5),
    r_in=st.floats(0, 6),
    width=st.floats(0.3, 5),
)
def test_annulus_brute_force(d0, r_in, width):
    r_out = r_in + width
    count, area = annulus_count_vs_area(r_in, r_out, d0)
    assert count == brute_annulus(r_in, r_out, d0)
    assert area == pytest.approx(math.pi * (r_out**2 - r_in**2) / math.sqrt(d0))


def test_annulus_validation():
    with pytest.raises(ValueError):
        annulus_count_vs_area(2.0, 1.0, 1)
    with pytest.raises(ValueError):
        annulus_count_vs_area(0.0, 1.0, 0)


# ------------------------------------------------------------ potential


def test_potential_symmetrization_and_radius():
    v = InteractionPotential.from_pairs([((1, 0, 0), 0.3), ((0, 0, 1), 0.2), ((0, 0, -1), 0.2)])
    assert v((-1, 0, 0)) == 0.3
    assert v.radius == 2.0
    assert v.ell1() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        InteractionPotential.from_pairs([((1, 0, 0), 0.3), ((-1, 0, 0), 0.4)])
    with pytest.raises(ValueError):
        InteractionPotential({(1, 0, 0): 0.3})  # missing mirror
    with pytest.raises(ValueError):
        InteractionPotential.from_pairs([((1, 0, 0), -0.3)])


def test_gamma_nor_partitions_support(unit_potential):
    nor = unit_potential.gamma_nor()
    assert len(nor) == 3
    supp = set(unit_potential.support)
    mirrored = {Momentum(-k.px, -k.py, -k.pz) for k in nor}
    assert set(nor) | mirrored == supp
    assert set(nor) & mirrored == set()


# ------------------------------------------------------- Hartree-Fock


def test_hf_energy_free_case(ball_tiny):
    v = InteractionPotential({})
    assert hartree_fock_energy(ball_tiny, v) == pytest.approx(
        ball_tiny.hbar**2 * 6.0, rel=1e-14
    )


def test_hf_energy_contact_example():
    # k_F = 1, N = 7, support {0}: E = kinetic + (1/14) * 42 * v0
    ball = build_fermi_ball(1.0)
    v0 = 0.7
    v = InteractionPotential({(0, 0, 0): v0})
    expected = ball.hbar**2 * 6.0 + 3.0 * v0
    assert hartree_fock_energy(ball, v) == pytest.approx(expected, rel=1e-14)


def test_hf_energy_matches_brute_force(ball_small, unit_potential):
    got = hartree_fock_energy(ball_small, unit_potential)
    assert got == pytest.approx(brute_hf_energy(ball_small, unit_potential), rel=1e-12)


def test_excitation_free_gap(ball_small):
    v = InteractionPotential({})
    hole, particle = (4, 1, 0), (4, 2, 1)
    gap = 21 - 17
    assert excitation_energy(ball_small, v, hole, particle) == pytest.approx(
        ball_small.hbar**2 * gap, rel=1e-14
    )


def test_excitation_validates_membership(ball_small, unit_potential):
    with pytest.raises(ValueError):
        excitation_energy(ball_small, unit_potential, (5, 0, 0), (5, 1, 0))
    with pytest.raises(ValueError):
        excitation_energy(ball_small, unit_potential, (4, 0, 0), (4, 1, 0))


def test_excitation_matches_full_difference(ball_small, unit_potential):
    e0 = hartree_fock_energy(ball_small, unit_potential)
    rng = np.random.default_rng(7)
    kf = ball_small.k_fermi
    holes = ball_small.points[ball_small.norms_sq >= (kf - 1) ** 2]
    for _ in range(12):
        h = holes[rng.integers(0, len(holes))]
        p = h + np.array([0, 0, 1 + rng.integers(0, 2)])
        if ball_small.contains(p):
            continue
        pts = [tuple(q) for q in ball_small.points.tolist()]
        pts.remove(tuple(h.tolist()))
        pts.append(tuple(p.tolist()))
        swapped = _brute_energy_of(ball_small, unit_potential, pts)
        fast = excitation_energy(ball_small, unit_potential, h, p)
        assert fast == pytest.approx(swapped - brute_hf_energy(ball_small, unit_potential), rel=1e-10)
        break
    else:
        pytest.skip("no boundary swap found")
    assert e0 == pytest.approx(brute_hf_energy(ball_small, unit_potential), rel=1e-12)


def _brute_energy_of(ball, v, pts):
    n = len(pts)
    lam = 1.0 / ball.n_particles
    kin = ball.hbar**2 * sum(x * x + y * y + z * z for x, y, z in pts)
    inter = 0.0
    for i, p in enumerate(pts):
        for j, q in enumerate(pts):
            if i != j:
                inter += v((0, 0, 0)) - v((p[0] - q[0], p[1] - q[1], p[2] - q[2]))
    return kin + 0.5 * lam * inter


def test_excitation_positive_in_stable_regime(ball_small, unit_potential):
    # lambda ||V||_1 < hbar^2 / 2 guarantees a positive gap for every swap
    lam_v1 = unit_potential.ell1() / ball_small.n_particles
    assert lam_v1 < ball_small.hbar**2 / 2
    rng = np.random.default_rng(11)
    kf = ball_small.k_fermi
    holes = ball_small.points[ball_small.norms_sq >= (kf - 1) ** 2]
    for _ in range(200):
        h = holes[rng.integers(0, len(holes))]
        step = rng.integers(-1, 2, size=3)
        p = h + step
        if not step.any() or ball_small.contains(p):
            continue
        assert excitation_energy(ball_small, unit_potential, h, p) > 0.0
