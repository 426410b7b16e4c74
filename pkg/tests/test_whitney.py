import math

import numpy as np
import pytest

from foslab.geometry import Grid, ahlfors_theta, make_domain
from foslab.norms import SampledFunction
from foslab.whitney import (
    MASK_INSIDE,
    MASK_STRADDLE,
    PartitionOfUnity,
    build_extension,
    bump_profile,
    default_ahlfors_probes,
    make_box_grid,
    project_to_boundary,
    reflect,
    whitney_decompose,
)


def _pipeline(name, res, **dom_params):
    domain = make_domain(name, **dom_params)
    grid = Grid(domain, res)
    op = build_extension(domain, grid)
    return domain, grid, op


@pytest.fixture(scope="module")
def disk_op():
    return _pipeline("disk", 32)


def test_whitney_distance_bounds_disk_square():
    for name in ("disk", "square"):
        domain, _, op = _pipeline(name, 32)
        dec = op.decomp
        sqn = math.sqrt(2)
        assert len(dec) > 100
        assert np.all(dec.dist_lbs >= sqn * dec.sides - 1e-12)
        assert np.all(dec.dist_lbs <= 4 * sqn * dec.sides + 1e-12)


def test_whitney_cubes_avoid_domain():
    domain, _, op = _pipeline("disk", 32)
    for cube in op.decomp.cubes:
        # positive clearance at the nearest cube point
        assert cube.dist_lb > 0


def test_whitney_disjoint_and_neighbors():
    domain, _, op = _pipeline("disk", 32)
    dec = op.decomp
    assert dec.interior_disjoint()
    for i, nb in enumerate(dec.neighbors):
        assert i in nb  # a cube touches itself
        ratios = dec.sides[nb] / dec.sides[i]
        assert np.all(ratios >= 0.25 - 1e-12) and np.all(ratios <= 4 + 1e-12)
    assert dec.gamma0_observed <= 144


def test_whitney_halfplane_band():
    # cubes at distance d from the wall line have side within [d/(4 sqrt n), d/sqrt n]
    domain = make_domain("halfplane_truncated")
    dec = whitney_decompose(domain, max_level=7)
    sqn = math.sqrt(2)
    for cube in dec.cubes:
        d = cube.center[0] - cube.side / 2  # true distance to {x1 = 0}
        if d > 0:  # cubes right of the wall belong to the complement proper
            assert cube.side >= d / (4 * sqn) - 1e-12
            assert cube.side <= d / sqn + 1e-12


def test_whitney_box_validation():
    disk = make_domain("disk")
    with pytest.raises(ValueError):
        whitney_decompose(disk, truncation_box_=((-3, 3), (-2, 2)))
    with pytest.raises(ValueError):
        whitney_decompose(disk, truncation_box_=((-2, 2), (-2, 2)))


def test_whitney_coverage_gap_scales_like_perimeter():
    domain, grid, op = _pipeline("disk", 32)
    per_cells = 2 * math.pi / grid.h
    assert 0 < op.uncovered_cells <= 8 * per_cells


def test_whitney_csv_and_svg(tmp_path):
    domain, _, op = _pipeline("disk", 32)
    csv_path = tmp_path / "w.csv"
    op.decomp.write_csv(csv_path)
    header = open(csv_path).readline().strip().split(",")
    assert header == ["level", "i0", "i1", "side", "dist_lb", "n_neighbors"]
    svg_path = tmp_path / "w.svg"
    op.decomp.write_svg(svg_path)
    assert open(svg_path).read().startswith("<svg")


def test_projection_lands_on_boundary():
    disk = make_domain("disk")
    x = project_to_boundary(disk, np.array([2.0, 0.0]))
    assert np.allclose(x, [1.0, 0.0], atol=1e-8)


def test_reflection_local_and_nonempty(disk_op):
    domain, grid, op = disk_op
    refl, dec = op.refl, op.decomp
    pts = grid.inside_points
    assert refl.localization_violations == 0
    assert refl.gamma2_observed >= 1
    for e in refl.entries:
        assert len(e.cells) > 0
        assert e.mode == "small"
        assert e.enlargements == 0
        cube = dec.cubes[e.owner]
        gap = np.max(np.abs(pts[e.cells] - np.array(cube.center)))
        assert gap <= 5 * math.sqrt(2) * cube.side + 1e-12


def test_reflection_eps0_formula(disk_op):
    domain, grid, op = disk_op
    samples, radii = default_ahlfors_probes(domain, grid)
    rep = ahlfors_theta(domain, grid, samples, radii)
    expected = (rep.theta_hat / (2 * op.decomp.gamma0_observed)) ** 0.5 / (30 * math.sqrt(2))
    assert op.refl.eps0 == pytest.approx(expected, rel=1e-12)
    # at the 3x truncation every cube sits far below the small-cube threshold
    assert all(e.mode == "small" for e in op.refl.entries)


def test_reflection_gamma2_stable_on_disk():
    g2 = []
    for res in (32, 64):
        _, _, op = _pipeline("disk", res)
        g2.append(op.refl.gamma2_observed)
    assert abs(g2[1] - g2[0]) <= max(2, 0.5 * g2[0])


def test_reflection_overlap_by_iterate(disk_op):
    domain, grid, op = disk_op
    base = op.refl.gamma2_observed
    for k in (0, 1, 2):
        v = op.refl.overlap_by_iterate(op.decomp, len(grid.inside_idx), k)
        assert 1 <= v <= base


def test_reflection_cusp_gamma1_grows():
    g1 = []
    for res in (24, 48):
        _, _, op = _pipeline("cusp", res)
        g1.append(op.refl.gamma1_observed)
    assert g1[1] > 1.5 * g1[0]


def test_large_mode_reflection_far_truncation():
    # a truncation box hundreds of diameters wide finally produces cubes with
    # side above diam/eps0; their reflected region is the whole domain
    disk = make_domain("disk")
    grid = Grid(disk, 24)
    dec = whitney_decompose(disk, truncation_box_=((-4096.0, 4096.0),) * 2, max_level=18)
    samples, radii = default_ahlfors_probes(disk, grid)
    rep = ahlfors_theta(disk, grid, samples, radii)
    refl = reflect(dec, grid, rep)
    modes = {e.mode for e in refl.entries}
    assert "large" in modes and "small" in modes
    for e in refl.entries:
        if e.mode == "large":
            assert len(e.cells) == len(grid.inside_idx)


def test_bump_profile_shape():
    t = np.array([0.0, 0.45, 0.5, 0.515, 17 / 32, 0.6])
    v = bump_profile(t)
    assert v[0] == 1.0 and v[1] == 1.0 and v[2] == 1.0
    assert 0 < v[3] < 1
    assert v[4] == 0.0 and v[5] == 0.0
    assert np.array_equal(bump_profile(-t), v)


def test_partition_sums_to_one(disk_op):
    domain, grid, op = disk_op
    rng = np.random.default_rng(1)
    pts = rng.uniform(-3, 3, size=(4000, 2))
    pts = pts[np.asarray(domain.sdist(pts)) > 3 * grid.h][:1500]
    s = op.pou.sum_phi(pts)
    covered = s > 0
    assert covered.mean() > 0.9
    assert np.max(np.abs(s[covered] - 1.0)) < 1e-10


def test_partition_deep_interior_single_bump(disk_op):
    domain, grid, op = disk_op
    dec = op.decomp
    big = int(np.argmax(dec.sides))
    x = np.array(dec.cubes[big].center)
    total, pairs = op.pou.bumps_at(x)
    assert [i for i, _ in pairs] == [big]
    assert op.pou.phi_value(big, x) == 1.0


def test_partition_gradient_bound(disk_op):
    domain, grid, op = disk_op
    pou = op.pou
    L = pou.measure_L()
    assert L > 0
    rng = np.random.default_rng(7)
    dec = op.decomp
    checked = 0
    for i in rng.choice(len(dec), size=24, replace=False):
        cube = dec.cubes[i]
        for off in rng.uniform(-0.53, 0.53, size=(6, 2)):
            x = np.array(cube.center) + off * cube.side
            total, _ = pou.bumps_at(x)
            if total <= 0:
                continue
            g = pou.phi_gradient(i, x)
            assert np.linalg.norm(g) <= (L / cube.side) * (1 + 1e-3)
            checked += 1
    assert checked > 20


def test_partition_L_stable_under_refinement():
    Ls = []
    for res in (32, 64):
        _, _, op = _pipeline("disk", res)
        Ls.append(op.pou.measure_L())
    assert abs(Ls[1] / Ls[0] - 1) <= 0.1


def test_extension_identity_constant_linearity(disk_op):
    domain, grid, op = disk_op
    n_in = len(grid.inside_idx)
    u = SampledFunction(grid, grid.inside_points[:, 0])
    eu = op.extend(u)
    assert np.array_equal(eu.values[op._omega_pos], u.values)
    const = SampledFunction(grid, np.full(n_in, 2.7))
    ec = op.extend(const)
    live = (op.box_mask != MASK_STRADDLE) & ((op._b_sum > 0) | (op.box_mask == MASK_INSIDE))
    assert np.max(np.abs(ec.values[live] - 2.7)) <= 5e-14 * 2.7
    v = SampledFunction(grid, np.sin(3 * grid.inside_points[:, 1]))
    lin = op.extend(SampledFunction(grid, 2 * u.values - 3 * v.values))
    parts = 2 * op.extend(u).values - 3 * op.extend(v).values
    assert np.max(np.abs(lin.values - parts)) <= 1e-12


def test_extension_zero_conventions(disk_op):
    domain, grid, op = disk_op
    u = SampledFunction(grid, np.ones(len(grid.inside_idx)))
    eu = op.extend(u)
    assert np.all(eu.values[op.box_mask == MASK_STRADDLE] == 0.0)
    uncovered = (op.box_mask == 0) & (op._b_sum == 0)
    assert np.all(eu.values[uncovered] == 0.0)


def test_extension_rejects_foreign_grid(disk_op):
    domain, grid, op = disk_op
    other = Grid(domain, 16)
    u = SampledFunction(other, np.ones(len(other.inside_idx)))
    with pytest.raises(ValueError):
        op.extend(u)


def test_box_grid_alignment():
    for name in ("disk", "cusp", "interval"):
        domain = make_domain(name)
        grid = Grid(domain, 24)
        box = make_box_grid(domain, grid)
        assert box.h == pytest.approx(grid.h, rel=1e-12)
        for (glo, _), (blo, _) in zip(grid.bbox, box.bbox):
            k = (glo - blo) / grid.h
            assert abs(k - round(k)) < 1e-9
