"""Whitney decomposition of the complement, reflected regions, and extension.

The complement of the domain inside a square truncation box is tiled by
dyadic cubes accepted when sqrt(n) * side <= dist(Q, boundary), with the
distance taken conservatively from corner signed distances minus half the
cube diagonal.  Each small cube reflects to a region of inside grid cells
near the boundary point closest to its center; a smooth partition of unity
subordinate to (17/16)-dilated cubes then blends the reflected cell averages
into an extension of any sampled function.

The nominal reflected-cube side eps0 * l_Q sits far below any affordable
cell size (eps0 ~ 1e-2 or smaller), so reflection enforces a floor of a few
grid cells and doubles the side until the region is nonempty, recording the
enlargement; the region is always clipped to (10 sqrt(n) Q) ∩ Ω.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import product
from typing import Optional

import numpy as np

from .geometry import (
    MASK_INSIDE,
    MASK_OUTSIDE,
    MASK_STRADDLE,
    Domain,
    Grid,
    AhlforsReport,
    truncation_box,
)
from .norms import SampledFunction


class WhitneyError(RuntimeError):
    pass


@dataclass(frozen=True)
class WhitneyCube:
    level: int
    coords: tuple[int, ...]
    side: float
    center: tuple[float, ...]
    dist_lb: float  # conservative distance to the domain boundary


class WhitneyDecomposition:
    def __init__(self, domain, box, max_level, cubes, discarded_boundary):
        self.domain = domain
        self.box = box
        self.max_level = max_level
        self.cubes = cubes
        self.discarded_boundary = discarded_boundary
        self.centers = np.array([c.center for c in cubes])
        self.sides = np.array([c.side for c in cubes])
        self.levels = np.array([c.level for c in cubes])
        self.dist_lbs = np.array([c.dist_lb for c in cubes])
        self.neighbors = self._build_neighbors()
        self.gamma0_observed = max((len(nb) for nb in self.neighbors), default=0)

    def __len__(self):
        return len(self.cubes)

    def _build_neighbors(self):
        n = len(self.cubes)
        out = []
        tol = 1e-9 * float(np.min(self.sides)) if n else 0.0
        for i0 in range(0, n, 512):
            i1 = min(i0 + 512, n)
            gap = np.max(
                np.abs(self.centers[i0:i1, None, :] - self.centers[None, :, :]), axis=2
            ) - 0.5 * (self.sides[i0:i1, None] + self.sides[None, :])
            for k in range(i1 - i0):
                out.append(np.flatnonzero(gap[k] <= tol))
        return out

    def small_mask(self, eps0: float) -> np.ndarray:
        """Cubes with side below diam(domain) / eps0."""
        return self.sides < self.domain.diam / eps0

    def neighbor_iterate(self, mask: np.ndarray, k: int) -> np.ndarray:
        """k-th neighbor closure of the cube set given by mask."""
        cur = mask.copy()
        for _ in range(k):
            nxt = cur.copy()
            for i in np.flatnonzero(cur):
                nxt[self.neighbors[i]] = True
            cur = nxt
        return cur

    def interior_disjoint(self) -> bool:
        n = len(self.cubes)
        tol = 1e-9 * float(np.min(self.sides)) if n else 0.0
        for i0 in range(0, n, 512):
            i1 = min(i0 + 512, n)
            gap = np.max(
                np.abs(self.centers[i0:i1, None, :] - self.centers[None, :, :]), axis=2
            ) - 0.5 * (self.sides[i0:i1, None] + self.sides[None, :])
            bad = gap < -tol
            for k in range(i1 - i0):
                bad[k, i0 + k] = False
            if np.any(bad):
                return False
        return True

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            dim = self.domain.dim
            w.writerow(["level"] + [f"i{a}" for a in range(dim)] + ["side", "dist_lb", "n_neighbors"])
            for cube, nb in zip(self.cubes, self.neighbors):
                w.writerow(
                    [cube.level]
                    + list(cube.coords)
                    + [repr(cube.side), repr(cube.dist_lb), len(nb)]
                )

    def write_svg(self, path, outline_points: Optional[np.ndarray] = None) -> None:
        if self.domain.dim != 2:
            raise ValueError("SVG overlay is only available in 2-D")
        (x0, x1), (y0, y1) = self.box
        scale = 800.0 / (x1 - x0)

        def sx(x):
            return (x - x0) * scale

        def sy(y):
            return (y1 - y) * scale

        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="800" height="{(y1 - y0) * scale:.0f}">'
        ]
        for c in self.cubes:
            lo = [c.center[a] - c.side / 2 for a in range(2)]
            parts.append(
                f'<rect x="{sx(lo[0]):.2f}" y="{sy(lo[1] + c.side):.2f}" '
                f'width="{c.side * scale:.2f}" height="{c.side * scale:.2f}" '
                'fill="none" stroke="#336" stroke-width="0.6"/>'
            )
        if outline_points is not None:
            pts = " ".join(f"{sx(p[0]):.2f},{sy(p[1]):.2f}" for p in outline_points)
            parts.append(f'<polygon points="{pts}" fill="none" stroke="#c33" stroke-width="1.5"/>')
        parts.append("</svg>")
        with open(path, "w") as f:
            f.write("\n".join(parts))


def whitney_decompose(domain: Domain, truncation_box_=None, max_level: int = 8) -> WhitneyDecomposition:
    """Dyadic Whitney tiling of (truncation box) minus the closed domain.

    Top-down subdivision: a cube is accepted once sqrt(n)*side <= dist_lb,
    dropped once certainly interior to the domain, and otherwise split until
    max_level, where unresolved cubes are discarded and counted (they hug the
    boundary; the coverage gap is O(h * perimeter)).
    """
    box = tuple(truncation_box_) if truncation_box_ is not None else truncation_box(domain)
    sides = [hi - lo for lo, hi in box]
    if max(sides) - min(sides) > 1e-9 * max(sides):
        raise ValueError("truncation box must be square")
    need = truncation_box(domain)
    for (lo, hi), (nlo, nhi) in zip(box, need):
        if lo > nlo + 1e-9 or hi < nhi - 1e-9:
            raise ValueError("truncation box must contain 3x the domain bounding box")
    dim = domain.dim
    root_side = float(sides[0])
    lo0 = np.array([lo for lo, _ in box])
    sqn = math.sqrt(dim)
    corner_unit = np.array(list(product((0.0, 1.0), repeat=dim)))
    child_offsets = list(product((0, 1), repeat=dim))

    accepted: list[WhitneyCube] = []
    discarded_boundary = 0
    frontier = [(0,) * dim]
    for level in range(max_level + 1):
        if not frontier:
            break
        side = root_side / 2**level
        half_diag = sqn * side / 2
        coords_arr = np.array(frontier, dtype=float)
        los = lo0 + coords_arr * side
        corners = (los[:, None, :] + corner_unit[None, :, :] * side).reshape(-1, dim)
        sd = np.asarray(domain.sdist(corners), dtype=float).reshape(len(frontier), -1)
        dist_lb = np.min(sd, axis=1) - half_diag
        interior = np.max(sd, axis=1) + half_diag <= 0
        accept = ~interior & (dist_lb >= sqn * side)
        split = ~interior & ~accept
        for k in np.flatnonzero(accept):
            accepted.append(
                WhitneyCube(
                    level=level,
                    coords=frontier[k],
                    side=side,
                    center=tuple(los[k] + side / 2),
                    dist_lb=float(dist_lb[k]),
                )
            )
        if level == max_level:
            discarded_boundary = int(np.count_nonzero(split))
            break
        frontier = [
            tuple(2 * c + o for c, o in zip(frontier[k], off))
            for k in np.flatnonzero(split)
            for off in child_offsets
        ]

    accepted.sort(key=lambda c: (c.level, c.coords))
    return WhitneyDecomposition(domain, box, max_level, accepted, discarded_boundary)


def project_to_boundary_batch(domain: Domain, x: np.ndarray, iters: int = 5) -> np.ndarray:
    """Nearest-boundary-point estimates by damped Newton on the signed distance
    (finite-difference gradients, all points advanced together)."""
    x = np.array(np.atleast_2d(x), dtype=float)
    dim = x.shape[1]
    for _ in range(iters):
        sd = np.asarray(domain.sdist(x), dtype=float)
        live = np.abs(sd) >= 1e-10
        if not np.any(live):
            break
        step = 1e-6 * np.maximum(1.0, np.max(np.abs(x), axis=1))
        g = np.zeros_like(x)
        for a in range(dim):
            e = np.zeros_like(x)
            e[:, a] = step
            g[:, a] = (
                np.asarray(domain.sdist(x + e), dtype=float)
                - np.asarray(domain.sdist(x - e), dtype=float)
            ) / (2 * step)
        g2 = np.sum(g * g, axis=1)
        ok = live & (g2 > 1e-16)
        x[ok] -= (sd[ok] / g2[ok])[:, None] * g[ok]
    return x


def project_to_boundary(domain: Domain, x, iters: int = 5) -> np.ndarray:
    return project_to_boundary_batch(domain, np.asarray(x, dtype=float)[None], iters)[0]


@dataclass
class ReflectedCube:
    owner: int
    cells: np.ndarray  # positions into the grid's inside-cell arrays
    mode: str  # "small" or "large"
    side_used: float
    enlargements: int


@dataclass
class ReflectionTable:
    eps0: float
    theta_hat: float
    entries: list[ReflectedCube]
    gamma1_observed: float
    gamma2_observed: int
    # cubes whose region had to grow beyond (10 sqrt(n)) Q to reach inside
    # cells; zero on regular domains, positive near degenerate boundary points
    localization_violations: int = 0

    def overlap_by_iterate(self, decomp: WhitneyDecomposition, n_inside: int, k: int) -> int:
        """max_x of the reflected-region overlap count restricted to the k-th
        neighbor closure of the small-cube set."""
        mask = decomp.small_mask(self.eps0)
        mask = decomp.neighbor_iterate(mask, k)
        counts = np.zeros(n_inside, dtype=np.int64)
        for e in self.entries:
            if mask[e.owner]:
                if e.mode == "large":
                    counts += 1
                else:
                    np.add.at(counts, e.cells, 1)
        return int(np.max(counts)) if len(counts) else 0


def reflect(
    decomp: WhitneyDecomposition,
    grid: Grid,
    ahlfors: AhlforsReport,
    floor_cells: float = 3.0,
) -> ReflectionTable:
    """Reflected region per cube: inside cells near the closest boundary point.

    Side starts at max(eps0 * l_Q, floor_cells * h) and doubles until the
    region is nonempty; the number of doublings is recorded per cube.  On a
    regular domain no doubling ever fires and every region stays inside
    (10 sqrt(n)) Q; near a degenerate boundary point (cusp tip) the region
    must grow to reach the first resolved inside cells, and each region that
    leaves (10 sqrt(n)) Q is counted in ``localization_violations``.  The
    hard error only remains for grids with no inside cells within the
    domain diameter of the boundary point.
    """
    theta = ahlfors.theta_hat
    if not theta > 0:
        raise ValueError("reflect: need a positive measured regularity constant")
    n = decomp.domain.dim
    eps0 = (theta / (2 * decomp.gamma0_observed)) ** (1.0 / n) / (30 * math.sqrt(n))
    small = decomp.small_mask(eps0)
    pts = grid.inside_points
    entries = []
    counts = np.zeros(len(pts), dtype=np.int64)
    gamma1 = 0.0
    nonlocal_count = 0
    stars = np.full_like(decomp.centers, np.nan)
    if np.any(small):
        stars[small] = project_to_boundary_batch(decomp.domain, decomp.centers[small])
    for i, cube in enumerate(decomp.cubes):
        if not small[i]:
            cells = np.arange(len(pts))
            entries.append(ReflectedCube(i, cells, "large", math.inf, 0))
            counts += 1
            continue
        center = np.array(cube.center)
        x_star = stars[i]
        s = max(eps0 * cube.side, floor_cells * grid.h)
        enlargements = 0
        while True:
            sel = np.all(np.abs(pts - x_star) <= s / 2, axis=1)
            cells = np.flatnonzero(sel)
            if len(cells):
                break
            s *= 2
            enlargements += 1
            if s > 4 * decomp.domain.diam:
                raise WhitneyError(
                    f"empty reflected region for cube level={cube.level} coords={cube.coords} "
                    f"side={cube.side:g} at h={grid.h:g}: grid too coarse near the boundary"
                )
        entries.append(ReflectedCube(i, cells, "small", s, enlargements))
        if np.max(np.abs(pts[cells] - center)) > 5 * math.sqrt(n) * cube.side + 1e-12:
            nonlocal_count += 1
        np.add.at(counts, cells, 1)
        gamma1 = max(gamma1, cube.side**n / (len(cells) * grid.cell_measure))
    return ReflectionTable(
        eps0=eps0,
        theta_hat=theta,
        entries=entries,
        gamma1_observed=gamma1,
        gamma2_observed=int(np.max(counts)) if len(counts) else 0,
        localization_violations=nonlocal_count,
    )


_BAND_LO, _BAND_HI = 0.5, 17.0 / 32.0


def _smooth01(y: np.ndarray) -> np.ndarray:
    """C-infinity monotone step: 0 for y <= 0, 1 for y >= 1."""
    y = np.clip(np.asarray(y, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        fa = np.where(y > 0, np.exp(-1.0 / np.maximum(y, 1e-300)), 0.0)
        fb = np.where(y < 1, np.exp(-1.0 / np.maximum(1.0 - y, 1e-300)), 0.0)
    return fa / (fa + fb)


def bump_profile(t) -> np.ndarray:
    """Even cutoff: 1 on [-1/2, 1/2], 0 outside [-17/32, 17/32], smooth between."""
    return _smooth01((_BAND_HI - np.abs(np.asarray(t, dtype=float))) / (_BAND_HI - _BAND_LO))


class PartitionOfUnity:
    """Normalized bumps subordinate to the (17/16)-dilated Whitney cubes."""

    def __init__(self, decomp: WhitneyDecomposition):
        self.decomp = decomp
        lo0 = np.array([lo for lo, _ in decomp.box])
        self._lo0 = lo0
        self._root = decomp.box[0][1] - decomp.box[0][0]
        self._levels: dict[int, dict[tuple, int]] = {}
        for i, c in enumerate(decomp.cubes):
            self._levels.setdefault(c.level, {})[c.coords] = i

    def _bump(self, cube_id: int, pts: np.ndarray) -> np.ndarray:
        c = self.decomp.cubes[cube_id]
        out = np.ones(len(pts))
        for a in range(pts.shape[1]):
            out *= bump_profile((pts[:, a] - c.center[a]) / c.side)
        return out

    def candidates(self, x: np.ndarray) -> list[int]:
        """Cubes whose support (17/16 of the cube) can contain the point x."""
        out = []
        for level, table in self._levels.items():
            side = self._root / 2**level
            rel = (x - self._lo0) / side
            ranges = [
                range(
                    int(math.floor(r - _BAND_HI - 0.5)),
                    int(math.floor(r + _BAND_HI + 0.5)) + 1,
                )
                for r in rel
            ]
            for coords in product(*ranges):
                idx = table.get(coords)
                if idx is not None:
                    out.append(idx)
        return sorted(out)

    def bumps_at(self, x: np.ndarray) -> tuple[float, list[tuple[int, float]]]:
        total = 0.0
        pairs = []
        for idx in self.candidates(x):
            b = float(self._bump(idx, x[None])[0])
            if b > 0:
                pairs.append((idx, b))
                total += b
        return total, pairs

    def sum_phi(self, pts: np.ndarray) -> np.ndarray:
        """Normalized sum over covered points; exactly 1 wherever coverage exists."""
        out = np.zeros(len(pts))
        for k, x in enumerate(pts):
            total, pairs = self.bumps_at(x)
            if total > 0:
                out[k] = math.fsum(b for _, b in pairs) / total
        return out

    def phi_value(self, cube_id: int, x: np.ndarray) -> float:
        total, pairs = self.bumps_at(x)
        if total <= 0:
            return 0.0
        for idx, b in pairs:
            if idx == cube_id:
                return b / total
        return 0.0

    def phi_gradient(self, cube_id: int, x: np.ndarray, rel_step: float = 1e-5) -> np.ndarray:
        side = self.decomp.cubes[cube_id].side
        d = rel_step * side
        g = np.zeros_like(x)
        for a in range(len(x)):
            e = np.zeros_like(x)
            e[a] = d
            g[a] = (self.phi_value(cube_id, x + e) - self.phi_value(cube_id, x - e)) / (2 * d)
        return g

    def _sample_offsets(self, dim: int) -> np.ndarray:
        """Support-relative probe offsets concentrated on the cutoff band."""
        band = [0.502, (_BAND_LO + _BAND_HI) / 2, 0.528]
        lateral = [0.0, -0.3, 0.3, 0.45]
        offs = []
        for a in range(dim):
            for s in (-1.0, 1.0):
                for t in band:
                    for lat in lateral:
                        v = [lat] * dim
                        v[a] = s * t
                        offs.append(v)
        if dim == 2:
            m = (_BAND_LO + _BAND_HI) / 2
            for sx in (-1, 1):
                for sy in (-1, 1):
                    offs.append([sx * m, sy * m])
        offs += [[0.45] * dim, [-0.45] * dim, [0.0] * dim]
        return np.unique(np.array(offs), axis=0)

    def _second_ring(self, cube_id: int) -> np.ndarray:
        """Neighbors-of-neighbors: every cube whose support can meet points in
        the support of cube_id (dyadic gaps exceed the 1/32 support overhang)."""
        nb = self.decomp.neighbors
        ring = set(nb[cube_id])
        for j in list(ring):
            ring.update(nb[j])
        return np.fromiter(sorted(ring), dtype=np.int64)

    def measure_L(self, per_cube_random: int = 8, seed: int = 0) -> float:
        """Max over probes of |grad phi_Q| * l_Q (central differences).

        Probes are cube-relative, so the estimate is comparable across grid
        refinements; the band midpoints where the cutoff slope peaks are
        always included.
        """
        rng = np.random.default_rng(seed)
        dim = self.decomp.domain.dim
        offsets = self._sample_offsets(dim)
        best = 0.0
        for i, cube in enumerate(self.decomp.cubes):
            extra = rng.uniform(-0.53, 0.53, size=(per_cube_random, dim))
            center = np.array(cube.center)
            base = center + np.vstack([offsets, extra]) * cube.side
            m = len(base)
            delta = 1e-5 * cube.side
            stencil = [base]
            for a in range(dim):
                e = np.zeros(dim)
                e[a] = delta
                stencil += [base + e, base - e]
            pts = np.vstack(stencil)  # (m*(2*dim+1), dim)
            ring = self._second_ring(i)
            bsum = np.zeros(len(pts))
            bq = None
            for j in ring:
                b = self._bump(j, pts)
                bsum += b
                if j == i:
                    bq = b
            covered = bsum > 0
            phi = np.zeros(len(pts))
            phi[covered] = bq[covered] / bsum[covered]
            ok = covered[:m]
            g2 = np.zeros(m)
            for a in range(dim):
                plus = phi[(1 + 2 * a) * m : (2 + 2 * a) * m]
                minus = phi[(2 + 2 * a) * m : (3 + 2 * a) * m]
                ok &= covered[(1 + 2 * a) * m : (2 + 2 * a) * m]
                ok &= covered[(2 + 2 * a) * m : (3 + 2 * a) * m]
                g2 += ((plus - minus) / (2 * delta)) ** 2
            if np.any(ok):
                best = max(best, float(np.max(np.sqrt(g2[ok]))) * cube.side)
        return best


def partition_of_unity(decomp: WhitneyDecomposition) -> PartitionOfUnity:
    return PartitionOfUnity(decomp)


def _box_all_domain(dim: int, box) -> Domain:
    return Domain(
        "box_all",
        dim,
        inside=lambda pts: np.ones(len(np.atleast_2d(pts)), dtype=bool),
        sdist=lambda pts: np.full(len(np.atleast_2d(pts)), -1.0),
        bbox=tuple(box),
        diam=float(
            math.sqrt(sum((hi - lo) ** 2 for lo, hi in box))
        ),
        params={},
    )


def make_box_grid(domain: Domain, grid: Grid, factor: float = 3.0) -> Grid:
    """Square grid over the truncation box with the same cell size as ``grid``,
    snapped onto the domain grid's lattice so inside cells coincide."""
    h = grid.h
    box = truncation_box(domain, factor)
    snapped = []
    counts = []
    for (blo, bhi), (glo, _) in zip(box, grid.bbox):
        k = round((blo - glo) / h)
        lo = glo + k * h
        n = round((bhi - blo) / h)
        snapped.append((lo, lo + n * h))
        counts.append(n)
    if len(set(counts)) != 1:
        raise ValueError("truncation box did not snap to a square cell count")
    box_dom = _box_all_domain(domain.dim, snapped)
    return Grid(box_dom, counts[0], bbox=tuple(snapped))


class ExtensionOperator:
    """Binds (domain, grid, decomposition, partition, reflections, box grid)
    and evaluates the blended extension of sampled functions."""

    def __init__(self, domain: Domain, grid: Grid, decomp: WhitneyDecomposition,
                 pou: PartitionOfUnity, refl: ReflectionTable, box_grid: Grid):
        self.domain = domain
        self.grid = grid
        self.decomp = decomp
        self.pou = pou
        self.refl = refl
        self.box_grid = box_grid
        self._avg_cache: dict[int, np.ndarray] = {}

        h = grid.h
        # positions of the domain grid's inside cells within the box grid
        offs = []
        for (glo, _), (blo, _) in zip(grid.bbox, box_grid.bbox):
            k = round((glo - blo) / h)
            if abs(blo + k * h - glo) > 1e-9 * h:
                raise ValueError("box grid is not aligned with the domain grid")
            offs.append(k)
        inner = np.array(np.unravel_index(grid.inside_idx, grid.shape)).T
        self._omega_pos = np.ravel_multi_index(
            tuple((inner + np.array(offs)).T), box_grid.shape
        )

        centers = box_grid.centers
        ins = domain.inside(centers)
        sd = domain.sdist(centers)
        half_diag = h * math.sqrt(domain.dim) / 2
        self.box_mask = np.full(len(centers), MASK_OUTSIDE, dtype=np.int8)
        self.box_mask[np.abs(sd) <= half_diag] = MASK_STRADDLE
        self.box_mask[ins] = MASK_INSIDE

        # rasterize each cube's bump onto the complement cells of the box grid
        complement = self.box_mask == MASK_OUTSIDE
        self._support_cells: list[np.ndarray] = []
        self._support_bumps: list[np.ndarray] = []
        b_sum = np.zeros(len(centers))
        axes = [np.arange(nk) for nk in box_grid.shape]
        for cube in decomp.cubes:
            lo = np.array(cube.center) - _BAND_HI * cube.side
            hi = np.array(cube.center) + _BAND_HI * cube.side
            sl = []
            for a, nk in enumerate(box_grid.shape):
                blo = box_grid.bbox[a][0]
                i0 = max(0, int(math.floor((lo[a] - blo) / h - 0.5)))
                i1 = min(nk - 1, int(math.ceil((hi[a] - blo) / h - 0.5)))
                if i0 > i1:
                    sl = None
                    break
                sl.append(np.arange(i0, i1 + 1))
            if sl is None:
                self._support_cells.append(np.empty(0, dtype=np.int64))
                self._support_bumps.append(np.empty(0))
                continue
            mesh = np.meshgrid(*sl, indexing="ij")
            flat = np.ravel_multi_index(tuple(m.ravel() for m in mesh), box_grid.shape)
            flat = flat[complement[flat]]
            pts = centers[flat]
            b = np.ones(len(flat))
            for a in range(domain.dim):
                b *= bump_profile((pts[:, a] - cube.center[a]) / cube.side)
            keep = b > 0
            flat, b = flat[keep], b[keep]
            self._support_cells.append(flat)
            self._support_bumps.append(b)
            b_sum[flat] += b
        self._b_sum = b_sum
        self.uncovered_cells = int(np.count_nonzero(complement & (b_sum == 0)))

    def averages(self, u: SampledFunction) -> np.ndarray:
        key = id(u)
        if key not in self._avg_cache:
            self._avg_cache[key] = np.array(
                [float(np.mean(u.values[e.cells])) for e in self.refl.entries]
            )
        return self._avg_cache[key]

    def extend(self, u: SampledFunction) -> SampledFunction:
        """u on inside cells; blended reflected averages on the complement;
        0 on straddling (boundary) and uncovered cells."""
        if u.grid is not self.grid:
            raise ValueError("extend: function lives on a different grid")
        avg = self.averages(u)
        out = np.zeros(self.box_grid.n_cells)
        num = np.zeros(self.box_grid.n_cells)
        for q, (cells, bumps) in enumerate(zip(self._support_cells, self._support_bumps)):
            if len(cells):
                num[cells] += bumps * avg[q]
        covered = self._b_sum > 0
        out[covered] = num[covered] / self._b_sum[covered]
        out[self._omega_pos] = u.values
        out[self.box_mask == MASK_STRADDLE] = 0.0
        return SampledFunction(self.box_grid, out[self.box_grid.inside_idx], name=f"E[{u.name}]")


def domain_outline(domain: Domain, n_points: int = 256) -> Optional[np.ndarray]:
    """Boundary polyline for the SVG overlay; None when there is no single loop."""
    if domain.dim != 2:
        return None
    p = domain.params
    if domain.name == "disk":
        th = np.linspace(0, 2 * math.pi, n_points)
        return np.column_stack(
            [p["cx"] + p["radius"] * np.cos(th), p["cy"] + p["radius"] * np.sin(th)]
        )
    if domain.name == "square":
        x0, y0, s = p["x0"], p["y0"], p["side"]
        return np.array([[x0, y0], [x0 + s, y0], [x0 + s, y0 + s], [x0, y0 + s]])
    if domain.name == "cusp":
        a = np.linspace(0, 1, n_points // 2)
        upper = np.column_stack([a, a ** p["s"]])
        lower = np.column_stack([a[::-1], -(a[::-1] ** p["s"])])
        return np.vstack([upper, [[1.0, 1.0]], [[1.0, -1.0]], lower])
    if domain.name == "halfplane_truncated":
        (x0, x1), (y0, y1) = domain.bbox
        return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    return None


def default_ahlfors_probes(domain: Domain, grid: Grid, n_samples: int = 24, n_radii: int = 8,
                           seed: int = 0) -> tuple[np.ndarray, list[float]]:
    """Deterministic regularity probes: seeded interior cell centers and
    log-spaced radii from a few cells up to nearly 2 diam."""
    rng = np.random.default_rng(seed)
    pts = grid.inside_points
    take = min(n_samples, len(pts))
    idx = rng.choice(len(pts), size=take, replace=False)
    r_lo = max(6 * grid.h, domain.diam / 64)
    radii = list(np.geomspace(r_lo, 1.9 * domain.diam, n_radii))
    return pts[idx], radii


def build_extension(domain: Domain, grid: Grid, *, ahlfors: Optional[AhlforsReport] = None,
                    max_level: Optional[int] = None, seed: int = 0) -> ExtensionOperator:
    """Wire the full pipeline for one (domain, grid) pair."""
    from .geometry import ahlfors_theta

    box_grid = make_box_grid(domain, grid)
    root_side = box_grid.bbox[0][1] - box_grid.bbox[0][0]
    if max_level is None:
        max_level = int(math.floor(math.log2(root_side / (2 * grid.h))))
    if ahlfors is None:
        samples, radii = default_ahlfors_probes(domain, grid, seed=seed)
        ahlfors = ahlfors_theta(domain, grid, samples, radii)
    decomp = whitney_decompose(domain, truncation_box_=box_grid.bbox, max_level=max_level)
    refl = reflect(decomp, grid, ahlfors)
    pou = PartitionOfUnity(decomp)
    return ExtensionOperator(domain, grid, decomp, pou, refl, box_grid)
