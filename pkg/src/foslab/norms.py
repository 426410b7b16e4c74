"""Gagliardo-type modulars, Luxemburg (semi)norms, and cell statistics.

The seminorm modular of u at level lam is

    sum_{i<j inside} 2 * phi(|u_i - u_j| / lam) * h^(2n) / |x_i - x_j|^(n+beta)

with the diagonal excluded.  The Luxemburg seminorm is the lam solving
modular(lam) = 1, found by a doubling bracket and a safeguarded bisection
(Brent) on log lam.  For the pure power family phi = t^p the modular equals
S_p / lam^p exactly, so S_p is accumulated once and reused across the root
search; every other family re-evaluates phi on cached pair differences, or
streams tiles when the pair set exceeds the memory budget.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from . import pairsum
from .geometry import Grid
from .young import YoungFunction

# pair arrays above this count are streamed tile-by-tile instead of cached
MAX_CACHED_PAIRS = 32_000_000


@dataclass
class SampledFunction:
    """Cell values on the inside cells of a grid."""

    grid: Grid
    values: np.ndarray
    name: str = "u"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.grid.inside_idx),):
            raise ValueError("values must align with the grid's inside cells")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite")

    @classmethod
    def from_callable(cls, grid: Grid, fn: Callable[[np.ndarray], np.ndarray], name: str = "u"):
        return cls(grid, np.asarray(fn(grid.inside_points), dtype=float), name)

    def write_csv(self, path) -> None:
        dim = self.grid.domain.dim
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["cell"] + [f"x{a}" for a in range(dim)] + ["value"])
            for idx, pt, v in zip(self.grid.inside_idx, self.grid.inside_points, self.values):
                w.writerow([int(idx)] + [repr(float(c)) for c in pt] + [repr(float(v))])

    @classmethod
    def read_csv(cls, grid: Grid, path, name: str = "u"):
        vals = np.full(len(grid.inside_idx), np.nan)
        pos = {int(c): i for i, c in enumerate(grid.inside_idx)}
        with open(path, newline="") as f:
            r = csv.reader(f)
            header = next(r)
            for row in r:
                cell = int(row[0])
                if cell in pos:
                    vals[pos[cell]] = float(row[-1])
        if np.any(np.isnan(vals)):
            raise ValueError(f"{path}: missing values for some inside cells")
        return cls(grid, vals, name)


class PairCache:
    """Pair differences and kernel weights for one (function, beta) pair.

    Small problems keep flattened (|du|, w) arrays; large ones fall back to a
    deterministic streaming sweep per modular evaluation.  Power sums
    sum w * du^p are memoized either way.
    """

    def __init__(self, u: SampledFunction, beta: float, *, max_pairs: int = MAX_CACHED_PAIRS,
                 tile: int = pairsum.DEFAULT_TILE, workers: int = 1,
                 power_sums: Optional[dict] = None):
        grid = u.grid
        self.beta = float(beta)
        self.expo = grid.domain.dim + self.beta
        self.h2n = grid.cell_measure**2
        self.points = grid.inside_points
        self.values = u.values
        self.tile = tile
        self.workers = workers
        self._power_sums: dict[float, float] = dict(power_sums or {})
        built = pairsum.build_pair_arrays(
            self.points, self.values, self.h2n, self.expo, max_pairs, tile
        )
        if built is None:
            self.du, self.w = None, None
        else:
            self.du, self.w = built

    def modular(self, phi: YoungFunction, lam: float) -> float:
        if lam <= 0:
            raise ValueError("modular level lam must be positive")
        p = phi.homogeneous_power
        if p is not None:
            return self.power_sum(p) / lam**p
        if self.du is not None:
            with np.errstate(over="ignore"):
                return float(np.sum(self.w * np.asarray(phi.eval(self.du / lam), dtype=float)))
        with np.errstate(over="ignore"):
            return pairsum.pair_kernel_sum(
                self.points, self.values, self.h2n, self.expo,
                lambda a: np.asarray(phi.eval(a / lam), dtype=float),
                self.tile, self.workers,
            )

    def power_sum(self, p: float) -> float:
        if p not in self._power_sums:
            if self.du is not None:
                s = float(np.sum(self.w * self.du**p))
            else:
                s = pairsum.pair_power_sum_auto(
                    self.points, self.values, self.h2n, self.expo,
                    float(p), self.tile, self.workers,
                )
            self._power_sums[p] = s
        return self._power_sums[p]


def batch_power_caches(us: list, beta: float, p: float, *,
                       tile: int = pairsum.DEFAULT_TILE, workers: int = 1) -> list:
    """PairCaches for same-grid functions under a power gauge.

    The Gagliardo power sums of all members are streamed in one
    shared-kernel sweep: the kernel block dominates the cost, so this is
    ~m times cheaper than m separate sweeps, and a power-gauge root search
    needs nothing beyond the sums.
    """
    if not us:
        return []
    grid = us[0].grid
    if any(u.grid is not grid for u in us):
        raise ValueError("batch_power_caches: functions must share one grid")
    pts = grid.inside_points
    h2n = grid.cell_measure**2
    expo = grid.domain.dim + beta
    sums = np.empty(len(us))
    dense = [k for k, u in enumerate(us) if float(np.mean(u.values == 0.0)) < 0.5]
    sparse = [k for k in range(len(us)) if k not in dense]
    if dense:
        dense_sums = pairsum.pair_power_sums_multi(
            pts, np.vstack([us[k].values for k in dense]), h2n, expo, p, tile, workers
        )
        sums[dense] = dense_sums
    for k in sparse:
        sums[k] = pairsum.pair_power_sum_sparse(
            pts, us[k].values, h2n, expo, p, tile, workers
        )
    return [
        PairCache(u, beta, max_pairs=0, tile=tile, workers=workers, power_sums={p: float(s)})
        for u, s in zip(us, sums)
    ]


def seminorm_modular(u: SampledFunction, phi: YoungFunction, beta: float, lam: float,
                     *, workers: int = 1) -> float:
    """One-off evaluation of the Gagliardo-type modular at level lam."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    if len(u.values) < 2:
        return 0.0
    grid = u.grid
    with np.errstate(over="ignore"):
        return pairsum.pair_kernel_sum(
            grid.inside_points, u.values, grid.cell_measure**2, grid.domain.dim + beta,
            lambda a: np.asarray(phi.eval(a / lam), dtype=float),
            workers=workers,
        )


class BracketError(RuntimeError):
    """No Luxemburg bracket could be established."""


def _luxemburg_root(modular: Callable[[float], float], lam0: float, rtol: float) -> float:
    """Solve modular(lam) = 1 for a nonincreasing modular: doubling bracket,
    then safeguarded bisection (Brent) on log lam."""
    lam0 = max(lam0, 1e-300)
    m0 = modular(lam0)
    if m0 == 1.0:
        lo = hi = lam0
    elif m0 > 1.0:
        lo, hi = lam0, 2 * lam0
        for _ in range(1100):
            if modular(hi) <= 1.0:
                break
            lo, hi = hi, 2 * hi
        else:
            raise BracketError("modular stays above 1; no upper bracket")
    else:
        lo, hi = lam0 / 2, lam0
        for _ in range(1100):
            if modular(lo) > 1.0:
                break
            lo, hi = lo / 2, lo
            if lo < 1e-280:
                # modular < 1 at every positive level down to underflow
                return 0.0
        else:
            raise BracketError("modular stays below 1; no lower bracket")
    if lo == hi:
        lam = lo
    else:
        # shrink until both endpoint values are finite and nonzero, then Brent
        f_lo, f_hi = modular(lo), modular(hi)
        for _ in range(200):
            if math.isfinite(f_lo) and f_hi > 0 and hi / lo <= 16:
                break
            mid = math.sqrt(lo * hi)
            fm = modular(mid)
            if fm > 1.0:
                lo, f_lo = mid, fm
            else:
                hi, f_hi = mid, fm
        if f_hi == 1.0:
            lam = hi
        elif f_lo == 1.0:
            lam = lo
        else:
            lam = math.exp(
                brentq(
                    lambda L: math.log(modular(math.exp(L))),
                    math.log(lo),
                    math.log(hi),
                    xtol=rtol / 10,
                )
            )
    # certify from above: modular just beyond lam must not exceed 1
    for _ in range(60):
        if modular(lam * (1 + 1e-6)) <= 1.0:
            return lam
        lam *= 1 + 2e-7
    raise BracketError("could not certify the Luxemburg level from above")


def luxemburg_seminorm(u: SampledFunction, phi: YoungFunction, beta: float,
                       *, rtol: float = 1e-8, workers: int = 1,
                       cache: Optional[PairCache] = None) -> float:
    """Luxemburg seminorm inf{lam > 0 : modular(u, lam) <= 1}."""
    if len(u.values) < 2 or np.ptp(u.values) == 0.0:
        return 0.0
    pc = cache if cache is not None else PairCache(u, beta, workers=workers)
    scale = float(np.ptp(u.values))
    return _luxemburg_root(lambda lam: pc.modular(phi, lam), scale, rtol)


def orlicz_norm(u: SampledFunction, psi: YoungFunction, *, rtol: float = 1e-8) -> float:
    """Luxemburg norm of the single integral sum psi(|u_i|/lam) h^n <= 1."""
    vals = np.abs(u.values)
    vals = vals[vals > 0]
    if len(vals) == 0:
        return 0.0
    hn = u.grid.cell_measure
    p = psi.homogeneous_power
    if p is not None:
        s = float(np.sum(vals**p)) * hn

        def modular(lam):
            return s / lam**p

    else:

        def modular(lam):
            with np.errstate(over="ignore"):
                return hn * float(np.sum(np.asarray(psi.eval(vals / lam), dtype=float)))

    return _luxemburg_root(modular, float(np.max(vals)), rtol)


def inf_centered_norm(u: SampledFunction, psi: YoungFunction,
                      *, rtol: float = 1e-6) -> tuple[float, float]:
    """Minimize c -> ||u - c||_psi by ternary search on [min u, max u]."""
    a, b = float(np.min(u.values)), float(np.max(u.values))
    if a == b:
        return a, 0.0
    span = b - a

    def J(c):
        return orlicz_norm(replace(u, values=u.values - c), psi)

    lo, hi = a, b
    while hi - lo > rtol * span:
        m1 = lo + (hi - lo) / 3
        m2 = hi - (hi - lo) / 3
        if J(m1) <= J(m2):
            hi = m2
        else:
            lo = m1
    c = 0.5 * (lo + hi)
    return c, J(c)


def average(u: SampledFunction, region: Optional[Callable] = None) -> float:
    vals = _region_values(u, region)
    return float(np.mean(vals))


def median(u: SampledFunction, region: Optional[Callable] = None) -> float:
    """Median in cell-counting measure: inf{c : #{u > c} <= N/2}.

    Both #{u > m} <= N/2 and #{u < m} <= N/2 hold; ties resolve to the lower
    sample quantile.
    """
    vals = np.sort(_region_values(u, region))
    return float(vals[(len(vals) - 1) // 2])


def _region_values(u: SampledFunction, region) -> np.ndarray:
    if region is None:
        vals = u.values
    else:
        sel = np.asarray(region(u.grid.inside_points), dtype=bool)
        vals = u.values[sel]
    if len(vals) == 0:
        raise ValueError("region contains no inside cells")
    return vals


def truncate(u: SampledFunction, n_cut: float) -> SampledFunction:
    """Pointwise clamp to [-n_cut, n_cut]."""
    if n_cut <= 0:
        raise ValueError("truncate: need a positive level")
    return replace(u, values=np.clip(u.values, -n_cut, n_cut), name=f"{u.name}|{n_cut:g}")


@dataclass(frozen=True)
class ModularCurve:
    lambdas: np.ndarray
    values: np.ndarray

    def is_monotone(self) -> bool:
        v = self.values
        ok = np.all(np.diff(v) <= 0)
        pos = v > 0
        strict = np.all(np.diff(v[pos]) < 0) if np.count_nonzero(pos) > 1 else True
        return bool(ok and strict)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["lambda", "modular"])
            for lam, v in zip(self.lambdas, self.values):
                w.writerow([repr(float(lam)), repr(float(v))])


def modular_curve(u: SampledFunction, phi: YoungFunction, beta: float,
                  lambdas, *, workers: int = 1) -> ModularCurve:
    pc = PairCache(u, beta, workers=workers)
    lams = np.asarray(lambdas, dtype=float)
    vals = np.array([pc.modular(phi, lam) for lam in lams])
    return ModularCurve(lams, vals)
