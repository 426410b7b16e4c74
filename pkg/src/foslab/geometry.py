"""Planar and 1-D domains, uniform grids, and measure-based geometry probes.

Domains carry a vectorized indicator and signed distance (negative inside).
All integrals downstream use the center-point rule on uniform grids: a cell
counts as inside iff its center is inside, so measures carry an
O(h * perimeter) bias that the convergence tests quantify.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


class GridResolutionError(RuntimeError):
    """The grid is too coarse for the requested measurement."""


@dataclass(frozen=True)
class Domain:
    name: str
    dim: int
    inside: Callable[[np.ndarray], np.ndarray]  # (m, dim) -> bool (m,)
    sdist: Callable[[np.ndarray], np.ndarray]  # (m, dim) -> float (m,)
    bbox: tuple[tuple[float, float], ...]  # per-axis (lo, hi)
    diam: float
    params: dict

    def bbox_sides(self) -> np.ndarray:
        return np.array([hi - lo for lo, hi in self.bbox])


def _pts(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    return a


def _interval(a: float, b: float) -> Domain:
    if not b > a:
        raise ValueError("interval: need b > a")
    return Domain(
        "interval",
        1,
        inside=lambda x: (_pts(x)[:, 0] > a) & (_pts(x)[:, 0] < b),
        sdist=lambda x: np.maximum(a - _pts(x)[:, 0], _pts(x)[:, 0] - b),
        bbox=((a, b),),
        diam=b - a,
        params={"a": a, "b": b},
    )


def _disk(radius: float, cx: float, cy: float) -> Domain:
    if radius <= 0:
        raise ValueError("disk: need radius > 0")
    c = np.array([cx, cy])
    return Domain(
        "disk",
        2,
        inside=lambda x: np.linalg.norm(_pts(x) - c, axis=1) < radius,
        sdist=lambda x: np.linalg.norm(_pts(x) - c, axis=1) - radius,
        bbox=((cx - radius, cx + radius), (cy - radius, cy + radius)),
        diam=2 * radius,
        params={"radius": radius, "cx": cx, "cy": cy},
    )


def _square(side: float, x0: float, y0: float) -> Domain:
    if side <= 0:
        raise ValueError("square: need side > 0")
    lo = np.array([x0, y0])
    hi = lo + side

    def sdist(x):
        p = _pts(x)
        d = np.maximum(lo - p, p - hi)  # per-axis signed distance to the slab
        outside = np.linalg.norm(np.maximum(d, 0.0), axis=1)
        inside = np.minimum(np.max(d, axis=1), 0.0)
        return outside + inside

    return Domain(
        "square",
        2,
        inside=lambda x: np.all((_pts(x) > lo) & (_pts(x) < hi), axis=1),
        sdist=sdist,
        bbox=((x0, x0 + side), (y0, y0 + side)),
        diam=side * math.sqrt(2),
        params={"side": side, "x0": x0, "y0": y0},
    )


def _annulus(r_inner: float, r_outer: float) -> Domain:
    if not 0 < r_inner < r_outer:
        raise ValueError("annulus: need 0 < r_inner < r_outer")

    def sdist(x):
        r = np.linalg.norm(_pts(x), axis=1)
        return np.maximum(r - r_outer, r_inner - r)

    return Domain(
        "annulus",
        2,
        inside=lambda x: sdist(x) < 0,
        sdist=sdist,
        bbox=((-r_outer, r_outer), (-r_outer, r_outer)),
        diam=2 * r_outer,
        params={"r_inner": r_inner, "r_outer": r_outer},
    )


def _dist_to_power_curve(p: np.ndarray, s: float) -> np.ndarray:
    """Distance from points (m, 2) with y >= 0 to the arc {(a, a^s): a in [0, 1]}.

    Dense scan plus golden-section refinement of up to two local basins;
    accurate to ~1e-10 on unit-scale inputs.
    """
    m = len(p)
    a_scan = np.linspace(0.0, 1.0, 129)
    d2 = (a_scan[None, :] - p[:, 0:1]) ** 2 + (a_scan[None, :] ** s - p[:, 1:2]) ** 2
    best = np.argmin(d2, axis=1)
    # second, separated local basin (guards against bifurcated projection)
    masked = d2.copy()
    for off in range(-2, 3):
        idx = np.clip(best + off, 0, len(a_scan) - 1)
        masked[np.arange(m), idx] = np.inf
    interior = (masked[:, 1:-1] <= masked[:, :-2]) & (masked[:, 1:-1] <= masked[:, 2:])
    masked2 = np.where(
        np.pad(interior, ((0, 0), (1, 1)), constant_values=True), masked, np.inf
    )
    second = np.argmin(masked2, axis=1)

    def refine(idx):
        lo = a_scan[np.maximum(idx - 1, 0)]
        hi = a_scan[np.minimum(idx + 1, len(a_scan) - 1)]
        invphi = (math.sqrt(5) - 1) / 2
        x1 = hi - invphi * (hi - lo)
        x2 = lo + invphi * (hi - lo)

        def f(a):
            return (a - p[:, 0]) ** 2 + (a**s - p[:, 1]) ** 2

        f1, f2 = f(x1), f(x2)
        for _ in range(60):
            take1 = f1 < f2
            hi = np.where(take1, x2, hi)
            lo = np.where(take1, lo, x1)
            x1n = np.where(take1, hi - invphi * (hi - lo), x2)
            x2n = np.where(take1, x1, lo + invphi * (hi - lo))
            f1n = np.where(take1, f(hi - invphi * (hi - lo)), f2)
            f2n = np.where(take1, f1, f(lo + invphi * (hi - lo)))
            x1, x2, f1, f2 = x1n, x2n, f1n, f2n
        a = 0.5 * (lo + hi)
        return f(a)

    d2_best = np.minimum(refine(best), refine(second))
    ends = np.minimum(d2[:, 0], d2[:, -1])
    return np.sqrt(np.minimum(d2_best, ends))


def _cusp(s: float) -> Domain:
    """Power cusp {0 < x < 1, |y| < x^s}; the canonical Ahlfors-regularity violator."""
    if s <= 1:
        raise ValueError("cusp: need exponent s > 1")

    def inside(x):
        p = _pts(x)
        return (p[:, 0] > 0) & (p[:, 0] < 1) & (np.abs(p[:, 1]) < p[:, 0] ** s)

    def sdist(x):
        p = _pts(x)
        out = np.empty(len(p))
        for a in range(0, len(p), 65536):  # golden-section scan is O(m * 129)
            q = np.column_stack([p[a : a + 65536, 0], np.abs(p[a : a + 65536, 1])])
            d_curve = _dist_to_power_curve(q, s)
            dy = np.maximum(q[:, 1] - 1.0, 0.0)  # right cap {x=1, |y| <= 1}
            d_cap = np.hypot(q[:, 0] - 1.0, dy)
            out[a : a + 65536] = np.minimum(d_curve, d_cap)
        return np.where(inside(p), -out, out)

    return Domain(
        "cusp",
        2,
        inside=inside,
        sdist=sdist,
        bbox=((0.0, 1.0), (-1.0, 1.0)),
        diam=math.hypot(1.0, 1.0),
        params={"s": s},
    )


def _halfplane_truncated(width: float, height: float) -> Domain:
    """Block {x < 0} cut to a finite box; sdist is to the physical line x = 0.

    The truncation faces are artificial: signed distance ignores them so the
    Whitney machinery sees the half-plane geometry, while grids and measures
    only ever sample the finite block.
    """
    if width <= 0 or height <= 0:
        raise ValueError("halfplane_truncated: need positive width and height")
    bbox = ((-width, 0.0), (-height / 2, height / 2))

    def inside(x):
        p = _pts(x)
        ok = p[:, 0] < 0
        for a, (lo, hi) in enumerate(bbox):
            ok &= (p[:, a] > lo) & (p[:, a] < hi)
        return ok

    return Domain(
        "halfplane_truncated",
        2,
        inside=inside,
        sdist=lambda x: _pts(x)[:, 0],
        bbox=bbox,
        diam=math.hypot(width, height),
        params={"width": width, "height": height},
    )


_DOMAIN_BUILDERS = {
    "interval": (_interval, {"a": 0.0, "b": 1.0}),
    "disk": (_disk, {"radius": 1.0, "cx": 0.0, "cy": 0.0}),
    "square": (_square, {"side": 1.0, "x0": 0.0, "y0": 0.0}),
    "annulus": (_annulus, {"r_inner": 0.5, "r_outer": 1.0}),
    "cusp": (_cusp, {"s": 2.0}),
    "halfplane_truncated": (_halfplane_truncated, {"width": 1.0, "height": 2.0}),
}


def domain_catalog() -> dict[str, dict]:
    return {name: dict(defaults) for name, (_, defaults) in _DOMAIN_BUILDERS.items()}


def make_domain(name: str, **params) -> Domain:
    if name not in _DOMAIN_BUILDERS:
        raise ValueError(f"unknown domain {name!r}; known: {sorted(_DOMAIN_BUILDERS)}")
    builder, defaults = _DOMAIN_BUILDERS[name]
    use = dict(defaults)
    for k, v in params.items():
        if k not in defaults:
            raise ValueError(f"domain {name}: unknown parameter {k!r}")
        use[k] = float(v)
    return builder(**use)


MASK_OUTSIDE, MASK_INSIDE, MASK_STRADDLE = 0, 1, 2


class Grid:
    """Uniform square-cell decomposition of a bounding box with inside mask.

    ``resolution`` is the cell count along axis 0; the other axes inherit the
    same cell size h (box side ratios of the built-ins are integral).  A cell
    is inside iff its center is; non-inside cells whose center lies within
    half a cell diagonal of the boundary are classified as straddling.
    """

    def __init__(self, domain: Domain, resolution: int, bbox=None):
        if resolution < 1:
            raise ValueError("resolution must be >= 1")
        self.domain = domain
        box = tuple(bbox) if bbox is not None else domain.bbox
        self.bbox = box
        sides = np.array([hi - lo for lo, hi in box])
        h = sides[0] / resolution
        shape = []
        for side in sides:
            nk = max(1, round(side / h))
            if abs(nk * h - side) > 1e-9 * h:
                raise ValueError("bbox sides must be integer multiples of the cell size")
            shape.append(nk)
        self.shape = tuple(shape)
        self.h = float(h)
        self.cell_measure = self.h ** domain.dim
        axes = [lo + (np.arange(nk) + 0.5) * h for (lo, _), nk in zip(box, shape)]
        mesh = np.meshgrid(*axes, indexing="ij")
        self.centers = np.column_stack([m.ravel() for m in mesh])
        ins = domain.inside(self.centers)
        sd = domain.sdist(self.centers)
        half_diag = self.h * math.sqrt(domain.dim) / 2
        mask = np.full(len(self.centers), MASK_OUTSIDE, dtype=np.int8)
        mask[np.abs(sd) <= half_diag] = MASK_STRADDLE
        mask[ins] = MASK_INSIDE
        self.mask = mask
        self.inside_idx = np.flatnonzero(mask == MASK_INSIDE)
        self.inside_points = self.centers[self.inside_idx]

    @property
    def n_cells(self) -> int:
        return len(self.centers)

    def inside_measure(self) -> float:
        return self.cell_measure * len(self.inside_idx)


def region_measure(grid: Grid, region: Callable[[np.ndarray], np.ndarray]) -> float:
    """h^n times the count of inside cells whose center satisfies the predicate.

    Bias is O(h * perimeter of the region boundary within the domain).
    """
    if len(grid.inside_idx) == 0:
        return 0.0
    sel = np.asarray(region(grid.inside_points), dtype=bool)
    return grid.cell_measure * int(np.count_nonzero(sel))


def ball_region(x, r: float) -> Callable[[np.ndarray], np.ndarray]:
    c = np.asarray(x, dtype=float)
    return lambda pts: np.sum((pts - c) ** 2, axis=1) < r * r


def ball_measure(grid: Grid, x, r: float) -> float:
    return region_measure(grid, ball_region(x, r))


@dataclass(frozen=True)
class AhlforsReport:
    """Empirical lower-regularity constant: min |B(x,r) ∩ Ω| / r^n over probes."""

    theta_hat: float
    rows: tuple  # (r, min_ratio, argmin point tuple)
    n_samples: int
    dim: int

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["r", "min_ratio"] + [f"argmin_x{a}" for a in range(self.dim)])
            for r, ratio, x in self.rows:
                w.writerow([repr(float(r)), repr(float(ratio))] + [repr(float(c)) for c in x])

    def to_json(self) -> str:
        return json.dumps(
            {
                "theta_hat": self.theta_hat,
                "n_samples": self.n_samples,
                "scales": [r for r, _, _ in self.rows],
            }
        )


def ahlfors_theta(
    domain: Domain, grid: Grid, samples: np.ndarray, radii: Sequence[float]
) -> AhlforsReport:
    """Scan |B(x, r) ∩ Ω| / r^n over sample centers and radii; keep the per-scale min."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    radii = list(radii)
    if len(samples) == 0 or len(radii) == 0:
        raise ValueError("ahlfors_theta: need nonempty samples and radii")
    if not np.all(domain.inside(samples)):
        raise ValueError("ahlfors_theta: all sample centers must lie inside the domain")
    for r in radii:
        if not 0 < r < 2 * domain.diam:
            raise ValueError(f"ahlfors_theta: radius {r} outside (0, 2*diam)")
    pts = grid.inside_points
    rows = []
    theta = math.inf
    for r in radii:
        ratios = np.empty(len(samples))
        for i, x in enumerate(samples):
            cnt = np.count_nonzero(np.sum((pts - x) ** 2, axis=1) < r * r)
            ratios[i] = cnt * grid.cell_measure / r**domain.dim
        k = int(np.argmin(ratios))
        rows.append((float(r), float(ratios[k]), tuple(samples[k])))
        theta = min(theta, float(ratios[k]))
    return AhlforsReport(theta_hat=theta, rows=tuple(rows), n_samples=len(samples), dim=domain.dim)


def halving_radii(domain: Domain, grid: Grid, x, t: float, j_max: int) -> list[float]:
    """Radii fractions b_j with |B(x, b_j t) ∩ Ω| = 2^{-j} |B(x, t) ∩ Ω|, b_0 = 1.

    Each b_j comes from bisection against the cell-counting measure; refuses
    when the target ball resolves fewer than 32 cells or the 1% relative
    measure match is unreachable at this resolution.
    """
    x = np.asarray(x, dtype=float)
    if not bool(domain.inside(x[None])[0]):
        raise ValueError("halving_radii: x must lie inside the domain")
    if not 0 < t < domain.diam:
        raise ValueError("halving_radii: need 0 < t < diam")
    if j_max < 0:
        raise ValueError("halving_radii: j_max must be >= 0")
    d = np.sqrt(np.sum((grid.inside_points - x) ** 2, axis=1))

    def count(r: float) -> int:
        return int(np.count_nonzero(d < r))

    m_t = count(t)
    out = [1.0]
    for j in range(1, j_max + 1):
        target = m_t / 2**j
        if target < 32:
            raise GridResolutionError(
                f"halving_radii: target ball at j={j} resolves {target:.1f} cells (< 32); "
                f"refine the grid (h={grid.h:g})"
            )
        lo, hi = 0.0, out[-1]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if count(mid * t) > target:
                hi = mid
            else:
                lo = mid
        cands = [(abs(count(b * t) - target), b) for b in (lo, hi)]
        err, b = min(cands)
        if err > 0.01 * target:
            raise GridResolutionError(
                f"halving_radii: nearest achievable measure misses the 2^-{j} target "
                f"by {err / target:.1%} (> 1%); refine the grid"
            )
        out.append(b)
    return out


def truncation_box(domain: Domain, factor: float = 3.0) -> tuple[tuple[float, float], ...]:
    """Square box with side factor * (largest bbox side), centered on the bbox."""
    sides = domain.bbox_sides()
    half = factor * float(np.max(sides)) / 2
    return tuple(
        ((lo + hi) / 2 - half, (lo + hi) / 2 + half) for lo, hi in domain.bbox
    )
