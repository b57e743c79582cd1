import math

import numpy as np
import pytest

from blumecapel import (
    GeometryError,
    InconsistentParametersError,
    InvalidParametersError,
    FrameKind,
    FrameSpec,
    Parameters,
    Path,
    build_frame,
    chopped_corner_rectangle,
    critical_droplet,
    critical_droplet_with_protuberance,
    critical_quantities,
    frame_energy_delta,
    hamiltonian,
    homogeneous,
    homogeneous_energy,
    is_local_minimum,
    path_height,
    reference_path_minus_to_plus,
    reference_path_zero_to_plus,
    saddle_configuration,
)
from blumecapel.landscape import (
    chopped_corner_rectangle_delta,
    load_path_steps,
    save_path_file,
    verify_manifold_minimum,
)

DESK = Parameters(J=1.0, lam=1.4, h=0.8, L=12, beta=2.0)

# lam > h > lam/2 points where the quasi-square route attains the barrier
# exactly (verified grid; see the acceptance suite for the full 20-point grid)
GOOD_POINTS = [(1.0, 1.4, 0.8), (1.0, 0.7, 0.4), (1.0, 0.5, 0.3), (1.0, 0.38, 0.2)]


# -- frames ---------------------------------------------------------------------

def test_frame_energy_identities_all_kinds():
    p = Parameters(J=1.0, lam=1.4, h=0.8, L=26)
    minus_energy = homogeneous_energy(-1, p)
    for kind in FrameKind:
        for ell in range(1, 6):
            eta = build_frame(FrameSpec(kind, ell), p)
            delta = hamiltonian(eta, p) - minus_energy
            want = frame_energy_delta(kind, ell, p)
            assert delta == pytest.approx(want, rel=1e-12), (kind, ell)


def test_frame_zero_counts():
    p = Parameters(J=1.0, lam=1.4, h=0.8, L=12)
    expected = {
        FrameKind.FRAME: lambda l: 4 * l,
        FrameKind.BOUNDARY_FRAME: lambda l: 4 * l + 2,
        FrameKind.CORNER_FRAME: lambda l: 4 * l + 3,
        FrameKind.CHOPPED_CORNER_FRAME: lambda l: 2 * l,
        FrameKind.CHOPPED_BOUNDARY_FRAME: lambda l: 3 * l,
    }
    for kind, zeros in expected.items():
        for ell in (1, 2, 3):
            eta = build_frame(FrameSpec(kind, ell), p)
            n_minus, n_zero, n_plus = eta.counts()
            assert n_plus == ell * ell
            assert n_zero == zeros(ell), kind


def test_chopped_corner_frame_example():
    p = Parameters(J=1.0, lam=1.4, h=0.8, L=4)
    eta = build_frame(FrameSpec(FrameKind.CHOPPED_CORNER_FRAME, 1), p)
    assert eta.counts() == (13, 2, 1)
    with pytest.raises(GeometryError):
        build_frame(FrameSpec(FrameKind.CHOPPED_CORNER_FRAME, 4), p)


def test_frame_delta_d_example():
    p = Parameters(J=1.0, lam=0.8, h=0.5, L=8)
    assert frame_energy_delta(FrameKind.CHOPPED_CORNER_FRAME, 1, p) == pytest.approx(3.6)


def test_frame_difference_identities_positive():
    for J, lam, h in [(1.0, 1.4, 0.8), (1.0, 0.8, 0.5), (2.0, 0.3, 0.2)]:
        p = Parameters(J=J, lam=lam, h=h, L=4)
        d = lam - h
        for ell in range(1, 21):
            delta_d = frame_energy_delta(FrameKind.CHOPPED_CORNER_FRAME, ell, p)
            diffs = {
                FrameKind.FRAME: 4 * J * ell + 8 * J + 2 * ell * d,
                FrameKind.BOUNDARY_FRAME: 2 * J * ell + 4 * J + (2 * ell + 2) * d,
                FrameKind.CORNER_FRAME: (2 * ell + 3) * d,
                FrameKind.CHOPPED_BOUNDARY_FRAME: 2 * J * ell + 2 * J + ell * d,
            }
            for kind, want in diffs.items():
                got = frame_energy_delta(kind, ell, p) - delta_d
                assert got == pytest.approx(want, rel=1e-12)
                assert got > 0


def test_frames_are_local_minima():
    # requires the droplet regime lam + h < 2J: otherwise the wall-side zero
    # strips of the boundary and corner frames accept a plus for free
    for J, lam, h in [(1.0, 0.7, 0.4), (1.0, 0.5, 0.3), (1.0, 0.38, 0.2), (1.0, 0.21, 0.11)]:
        p = Parameters(J=J, lam=lam, h=h, L=12)
        for kind in FrameKind:
            eta = build_frame(FrameSpec(kind, 2), p)
            assert is_local_minimum(eta, p), (J, lam, h, kind)


def test_wall_frames_relax_outside_droplet_regime():
    # at lam + h > 2J a wall-strip zero with a plus neighbor flips downhill
    p = Parameters(J=1.0, lam=1.4, h=0.8, L=12)
    assert not is_local_minimum(build_frame(FrameSpec(FrameKind.BOUNDARY_FRAME, 2), p), p)
    assert not is_local_minimum(build_frame(FrameSpec(FrameKind.CORNER_FRAME, 2), p), p)
    assert is_local_minimum(build_frame(FrameSpec(FrameKind.CHOPPED_CORNER_FRAME, 2), p), p)


def test_frame_with_ring_corners_is_not_a_local_minimum():
    # the zero layer never includes the diagonal ring corners: adding one
    # creates a zero with two zero and two minus neighbors, which relaxes
    p = Parameters(J=1.0, lam=1.4, h=0.8, L=12)
    eta = build_frame(FrameSpec(FrameKind.FRAME, 2), p)
    zeros = sorted((x, y) for x in range(1, 13) for y in range(1, 13)
                   if eta.spin_at((x, y)) == 0)
    x0 = min(x for x, _ in zeros)
    y0 = min(y for _, y in zeros)
    corner_site = (x0, y0)  # diagonal corner of the ring bounding box
    assert eta.spin_at(corner_site) == -1
    assert not is_local_minimum(eta.with_flip(corner_site, 0), p)


def test_local_minimum_classification_by_region():
    high_field = Parameters(J=1.0, lam=0.8, h=1.4, L=10)
    assert is_local_minimum(homogeneous(0, 10), high_field)
    assert not is_local_minimum(homogeneous(-1, 10), high_field)
    low_field = Parameters(J=1.0, lam=1.4, h=0.8, L=10)
    assert is_local_minimum(homogeneous(0, 10), low_field)
    assert is_local_minimum(homogeneous(-1, 10), low_field)


# -- corner rectangles and the critical configurations ----------------------------

def test_chopped_corner_rectangle_energy_formula():
    p = Parameters(J=1.0, lam=1.4, h=0.8, L=10)
    minus_energy = homogeneous_energy(-1, p)
    for m in range(1, 8):
        for n in range(1, 8):
            eta = chopped_corner_rectangle(m, n, p)
            delta = hamiltonian(eta, p) - minus_energy
            assert delta == pytest.approx(chopped_corner_rectangle_delta(m, n, p), rel=1e-12)


def test_quasi_square_monotonicity_switch():
    # growing is uphill below the critical ratio and downhill above it
    p = Parameters(J=1.0, lam=0.38, h=0.2, L=30)
    crit = (2 * p.J + p.lam - p.h) / (2 * p.h)
    for n in range(2, 12):
        e1 = chopped_corner_rectangle_delta(n, n - 1, p)
        e2 = chopped_corner_rectangle_delta(n, n, p)
        e3 = chopped_corner_rectangle_delta(n, n + 1, p)
        if n < crit:
            assert e1 < e2 < e3
        else:
            assert e1 > e2 > e3


def test_critical_quantities_examples():
    q = critical_quantities(DESK)
    assert q.l_c == 2
    assert q.gamma == pytest.approx(5.6, rel=1e-12)
    assert q.gamma_star == pytest.approx(2.5, rel=1e-12)
    assert q.n_tilde == 1
    assert q.n_plus_c == 2
    assert q.l_plus == 1 and q.l_F == 3 and q.l_tilde == 4

    tiny = Parameters(J=1.0, lam=0.015, h=0.01, L=4)
    q = critical_quantities(tiny)
    assert q.l_c == 101
    assert q.gamma == pytest.approx(202.99, rel=1e-9)
    assert q.gamma > q.gamma_star == pytest.approx(200.0)

    with pytest.raises(InvalidParametersError):
        critical_quantities(Parameters(J=1.0, lam=0.8, h=1.4, L=4))
    with pytest.raises(InvalidParametersError):
        critical_quantities(Parameters(J=1.0, lam=0.8, h=0.8, L=4))


def test_gamma_exceeds_gamma_star_in_region():
    rng = np.random.default_rng(12)
    for _ in range(200):
        h = float(rng.uniform(0.02, 1.0))
        lam = float(rng.uniform(h, 2 * h))
        if lam <= h:
            continue
        p = Parameters(J=float(rng.uniform(max(h, lam), 4.0)) + 0.5, lam=lam, h=h, L=4)
        q = critical_quantities(p)
        assert q.gamma > q.gamma_star


def test_saddle_identities():
    for J, lam, h in GOOD_POINTS:
        p = Parameters(J=J, lam=lam, h=h, L=14)
        droplet = hamiltonian(critical_droplet(p), p)
        proto = hamiltonian(critical_droplet_with_protuberance(p), p)
        saddle = hamiltonian(saddle_configuration(p), p)
        assert proto - droplet == pytest.approx(2 * J - (lam + h) + (lam - h), abs=1e-12)
        assert saddle - droplet == pytest.approx(2 * J - (lam + h) + 2 * (lam - h), abs=1e-12)
        # the minimal energy difference of the model separates the two
        assert saddle - proto == pytest.approx(lam - h, abs=1e-12)


def test_corner_placements_are_degenerate():
    p = Parameters(J=1.0, lam=1.4, h=0.8, L=9)
    reference = hamiltonian(critical_droplet(p), p)
    for corner in ("sw", "se", "nw", "ne"):
        for build in (critical_droplet, critical_droplet_with_protuberance, saddle_configuration):
            eta = build(p, corner=corner)
            if build is critical_droplet:
                assert hamiltonian(eta, p) == pytest.approx(reference, rel=1e-12)
    saddles = {saddle_configuration(p, corner=c) for c in ("sw", "se", "nw", "ne")}
    assert len(saddles) == 4  # distinct configurations, equal energy
    energies = {hamiltonian(s, p) for s in saddles}
    assert max(energies) - min(energies) < 1e-12


def test_saddle_counts_match_snapshot_example():
    p = Parameters(J=1.0, lam=1.4, h=0.8, L=6)
    eta = saddle_configuration(p)
    n_minus, n_zero, n_plus = eta.counts()
    q = critical_quantities(p)
    assert n_plus == q.n_plus_c + 1 == 3
    assert n_zero == 2 * q.l_c == 4


# -- paths -------------------------------------------------------------------------

def test_path_height_basics():
    p = Parameters(J=1.0, lam=1.4, h=0.8, L=4)
    constant = Path(homogeneous(-1, 4), p)
    assert path_height(constant) == hamiltonian(homogeneous(-1, 4), p)
    uphill = Path.from_flips(homogeneous(-1, 4), p, [((1, 1), 0)])
    assert path_height(uphill) == pytest.approx(
        hamiltonian(homogeneous(-1, 4).with_flip((1, 1), 0), p), abs=1e-12
    )
    with pytest.raises(ValueError):
        uphill.append_flip((1, 1), 0)  # no-op flip


def test_path_energies_match_full_hamiltonian():
    rng = np.random.default_rng(31)
    p = Parameters(J=1.0, lam=1.4, h=0.8, L=5)
    path = Path(homogeneous(0, 5), p)
    for _ in range(60):
        site = (int(rng.integers(1, 6)), int(rng.integers(1, 6)))
        cur = path.end.spin_at(site)
        path.append_flip(site, int(rng.choice([v for v in (-1, 0, 1) if v != cur])))
    energies = path.energies
    for i, eta in enumerate(path.configs()):
        assert energies[i] == pytest.approx(hamiltonian(eta, p), abs=1e-9)


def test_reference_path_minus_to_plus_barrier():
    for J, lam, h in GOOD_POINTS:
        p0 = Parameters(J=J, lam=lam, h=h, L=4)
        q = critical_quantities(p0)
        p = Parameters(J=J, lam=lam, h=h, L=q.l_c + 4)
        path = reference_path_minus_to_plus(p)
        assert path.start == homogeneous(-1, p.L)
        assert path.end == homogeneous(1, p.L)
        assert path.height() - homogeneous_energy(-1, p) == pytest.approx(q.gamma, abs=1e-9)
        top = path.argmax_indices()
        assert len(top) == 1
        assert path.config_at(top[0]) == saddle_configuration(p)


def test_reference_path_first_four_steps():
    p = Parameters(J=1.0, lam=1.4, h=0.8, L=8)
    path = reference_path_minus_to_plus(p)
    e = path.energies - homogeneous_energy(-1, p)
    d = p.lam - p.h
    assert e[1] == pytest.approx(d, abs=1e-12)
    assert e[2] == pytest.approx(2 * d, abs=1e-12)
    assert e[3] == pytest.approx(3 * d, abs=1e-12)
    assert e[4] == pytest.approx(4 * p.J + 2 * p.lam - 4 * p.h, abs=1e-12)


def test_reference_path_milestones_match_formula():
    p = Parameters(J=1.0, lam=0.5, h=0.3, L=8)
    path = reference_path_minus_to_plus(p)
    minus_energy = homogeneous_energy(-1, p)
    for (m, n) in [(1, 1), (1, 2), (2, 2), (2, 3), (3, 3), (3, 4), (4, 4)]:
        idx = path.marks[f"F:{m},{n}"]
        got = path.energies[idx] - minus_energy
        assert got == pytest.approx(chopped_corner_rectangle_delta(m, n, p), abs=1e-9)
        assert path.config_at(idx) == chopped_corner_rectangle(m, n, p)


def test_reference_path_requires_region_and_room():
    with pytest.raises(InvalidParametersError):
        reference_path_minus_to_plus(Parameters(J=1.0, lam=0.8, h=1.4, L=12))
    with pytest.raises(InvalidParametersError):
        # h < lam/2 outside the proof region
        reference_path_minus_to_plus(Parameters(J=1.0, lam=1.4, h=0.5, L=12))
    with pytest.raises(GeometryError):
        reference_path_minus_to_plus(Parameters(J=1.0, lam=1.4, h=0.8, L=3))


def test_reference_path_small_droplet_corner_case():
    # l_c = 2 with lam + h < 2J: every flip order pays an extra lam - h above
    # the three-step saddle, so the strict builder refuses and the unchecked
    # path tops out at Gamma + (lam - h)
    p = Parameters(J=1.0, lam=0.9, h=0.6, L=8)
    q = critical_quantities(p)
    assert q.l_c == 2 and p.lam + p.h < 2 * p.J
    with pytest.raises(InconsistentParametersError):
        reference_path_minus_to_plus(p)
    path = reference_path_minus_to_plus(p, check=False)
    gap = path.height() - homogeneous_energy(-1, p) - q.gamma
    assert gap == pytest.approx(p.lam - p.h, abs=1e-9)


def test_reference_path_zero_to_plus():
    p = Parameters(J=1.0, lam=1.4, h=0.8, L=8)
    path = reference_path_zero_to_plus(p)
    assert path.start == homogeneous(0, 8)
    assert path.end == homogeneous(1, 8)
    q = critical_quantities(p)
    height = path.height() - homogeneous_energy(0, p)
    assert height < q.gamma_star < q.gamma
    # milestone energies: H(sigma_{m,n}) - H(0) = 2J(m+n) - (lam+h) m n
    rect = Path(homogeneous(0, 8), p)
    assert path.energies[path.marks["R:2x2"]] == pytest.approx(
        2 * p.J * 4 - (p.lam + p.h) * 4, abs=1e-12
    )
    assert 2 * p.J * 4 - (p.lam + p.h) * 4 == pytest.approx(-0.8)


def test_zero_to_plus_seed_invariance():
    p = Parameters(J=1.0, lam=0.5, h=0.3, L=7)
    profiles = []
    for seed in [(1, 1), (4, 4), (7, 1), (3, 6)]:
        path = reference_path_zero_to_plus(p, seed_site=seed)
        profiles.append(path.energies)
    for other in profiles[1:]:
        assert np.allclose(profiles[0], other, atol=1e-9)


def test_zero_to_plus_height_below_gamma_on_grid():
    for J, lam, h in GOOD_POINTS:
        p0 = Parameters(J=J, lam=lam, h=h, L=4)
        q = critical_quantities(p0)
        p = Parameters(J=J, lam=lam, h=h, L=max(q.n_tilde + 2, 6))
        path = reference_path_zero_to_plus(p)
        assert path.height() - homogeneous_energy(0, p) < q.gamma_star < q.gamma


# -- manifold minima ------------------------------------------------------------------

def test_manifold_minimum_trivial_cases():
    p = Parameters(J=0.3, lam=1.4, h=0.8, L=3)
    report = verify_manifold_minimum(p, n_plus=0)
    assert report.argmin == homogeneous(-1, 3)  # strong fields favor minus
    report = verify_manifold_minimum(p, n_plus=9)
    assert report.n_states == 1 and report.argmin == homogeneous(1, 3)


def test_manifold_minimum_critical_count_recorded():
    p = Parameters(J=1.0, lam=1.4, h=0.8, L=3)
    report = verify_manifold_minimum(p)
    assert report.n_plus == 2
    assert report.min_energy <= report.critical_energy
    assert report.critical_attains is False  # small-L effect, recorded not asserted
    assert not report.smallness_ok
    assert report.argmin.counts()[2] == 2


def test_manifold_minimum_size_guard():
    p = Parameters(J=1.0, lam=1.4, h=0.8, L=5)
    from blumecapel import UnsupportedSizeError

    with pytest.raises(UnsupportedSizeError):
        verify_manifold_minimum(p, n_plus=2)


# -- witness path files ------------------------------------------------------------------

def test_path_file_round_trip(tmp_path):
    p = Parameters(J=1.0, lam=1.4, h=0.8, L=6)
    path = reference_path_minus_to_plus(p)
    out = tmp_path / "witness.path"
    save_path_file(out, path)
    meta, steps = load_path_steps(out)
    assert meta == {"L": 6, "J": 1.0, "lam": 1.4, "h": 0.8}
    assert len(steps) == len(path) - 1
    rebuilt = Path.from_flips(path.start, p, [(site, new) for site, _old, new, _e in steps])
    assert rebuilt.end == path.end
    assert np.allclose(rebuilt.energies, path.energies)
    for (site, old, new, energy), flip in zip(steps, path.flips):
        assert (site, old, new) == flip
