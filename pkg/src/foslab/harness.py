"""Inequality checks: both sides of every estimate, measured independently.

Each check builds its own discretization, computes left and right hand sides
by separate routes, and emits an InequalityReport with per-case rows.
Explicit proof-chain constants are asserted as true inequalities with a small
quadrature slack; non-explicit constants are replaced by
refinement-stability criteria and reported.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import Domain, Grid, ball_measure, make_domain
from .norms import (
    PairCache,
    SampledFunction,
    batch_power_caches,
    inf_centered_norm,
    luxemburg_seminorm,
    truncate,
)
from .whitney import build_extension
from .young import YoungFunction, estimate_C_beta, estimate_doubling, inverse, power_compose

# (n-1)-dimensional measure of the unit sphere
OMEGA_N = {1: 2.0, 2: 2 * math.pi}


@dataclass
class InequalityReport:
    check_id: str
    params: dict
    rows: list
    max_ratio: float
    bound: Optional[float]
    tol: float
    passed: Optional[bool]  # None: report-only (no asserted constant)
    runtime_s: float
    notes: str = ""

    def summary(self) -> dict:
        return {
            "check": self.check_id,
            "params": {k: (repr(v) if isinstance(v, float) else v) for k, v in self.params.items()},
            "max_ratio": self.max_ratio,
            "bound": self.bound,
            "tol": self.tol,
            "passed": self.passed,
            "runtime_s": round(self.runtime_s, 3),
            "notes": self.notes,
        }

    def write(self, outdir, stem: Optional[str] = None):
        import os

        stem = stem or self.check_id
        csv_path = os.path.join(outdir, f"{stem}.csv")
        json_path = os.path.join(outdir, f"{stem}.json")
        keys = sorted({k for row in self.rows for k in row})
        with open(csv_path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(keys)
            for row in self.rows:
                w.writerow([_fmt(row.get(k)) for k in keys])
        with open(json_path, "w") as f:
            json.dump(self.summary(), f, indent=1, sort_keys=True)
            f.write("\n")
        return csv_path, json_path


def _fmt(v):
    if isinstance(v, float):
        return repr(float(v))
    return v


# ---------------------------------------------------------------------------
# test function families


@dataclass(frozen=True)
class FamilySpec:
    """Seed-reproducible generator of test functions.

    Parameters are drawn grid-independently so the same spec yields comparable
    functions across refinements of the same domain.
    """

    kind: str = "trig"  # polynomials | trig | bumps | cutoffs | truncations
    count: int = 20
    seed: int = 7
    degree: int = 3

    def label(self) -> str:
        return f"{self.kind}(count={self.count},seed={self.seed})"


def _coarse_interior(domain: Domain, per_axis: int = 32) -> np.ndarray:
    """Grid-independent interior reference points for seeded placement."""
    axes = [np.linspace(lo, hi, per_axis + 2)[1:-1] for lo, hi in domain.bbox]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh])
    return pts[domain.inside(pts)]


def make_family(spec: FamilySpec, grid: Grid) -> list[SampledFunction]:
    domain = grid.domain
    rng = np.random.default_rng(spec.seed)
    dim = domain.dim
    out: list[SampledFunction] = []

    if spec.kind == "polynomials":
        exps = []
        if dim == 1:
            exps = [(a,) for a in range(1, spec.degree + 1)]
        else:
            exps = [
                (a, b)
                for a in range(spec.degree + 1)
                for b in range(spec.degree + 1)
                if 1 <= a + b <= spec.degree
            ]
        for e in exps:
            def fn(z, e=e):
                v = np.ones(len(z))
                for a, k in enumerate(e):
                    v *= z[:, a] ** k
                return v

            out.append(SampledFunction.from_callable(grid, fn, name="x^" + ",".join(map(str, e))))
    elif spec.kind == "trig":
        for i in range(spec.count):
            n_modes = 5
            amps = rng.standard_normal(n_modes) / np.arange(1, n_modes + 1)
            freqs = rng.integers(1, 4, size=(n_modes, dim)).astype(float)
            phases = rng.uniform(0, 2 * math.pi, n_modes)

            def fn(z, amps=amps, freqs=freqs, phases=phases):
                v = np.zeros(len(z))
                for a, w, th in zip(amps, freqs, phases):
                    v += a * np.cos(2 * math.pi * (z @ w) + th)
                return v

            out.append(SampledFunction.from_callable(grid, fn, name=f"trig{i}"))
    elif spec.kind == "bumps":
        anchors = _coarse_interior(domain)
        depth = -np.asarray(domain.sdist(anchors))
        for i in range(spec.count):
            j = int(rng.integers(len(anchors)))
            c = anchors[j]
            radius = float(depth[j]) * rng.uniform(0.3, 0.9)
            out.append(radial_bump(grid, c, radius, name=f"bump{i}"))
    elif spec.kind == "cutoffs":
        anchors = _coarse_interior(domain)
        for i in range(spec.count):
            j = int(rng.integers(len(anchors)))
            x = anchors[j]
            t = domain.diam * rng.uniform(0.2, 0.8)
            r = t * rng.uniform(0.3, 0.8)
            u = make_cutoff(grid, x, r, t)
            u.name = f"cutoff{i}"
            out.append(u)
    elif spec.kind == "truncations":
        base_spec = FamilySpec("trig", count=1, seed=spec.seed)
        base = make_family(base_spec, grid)[0]
        peak = float(np.max(np.abs(base.values)))
        for i, frac in enumerate(np.linspace(0.25, 1.0, max(spec.count, 2))):
            out.append(truncate(base, frac * peak))
    else:
        raise ValueError(f"unknown family kind {spec.kind!r}")
    return out[: spec.count] if spec.count > 0 else out


def radial_bump(grid: Grid, center, radius: float, name: str = "bump") -> SampledFunction:
    c = np.asarray(center, dtype=float)

    def fn(z):
        r2 = np.sum((z - c) ** 2, axis=1) / radius**2
        v = np.zeros(len(z))
        core = r2 < 1
        v[core] = np.exp(-1.0 / (1.0 - r2[core]))
        return v

    return SampledFunction.from_callable(grid, fn, name=name)


def make_cutoff(grid: Grid, x, r: float, t: float) -> SampledFunction:
    """Radial cutoff: 1 on the r-ball around x, linear ramp to 0 at the t-ball."""
    domain = grid.domain
    x = np.asarray(x, dtype=float)
    if not bool(domain.inside(x[None])[0]):
        raise ValueError("make_cutoff: x must lie inside the domain")
    if not 0 < r < t < domain.diam:
        raise ValueError("make_cutoff: need 0 < r < t < diam")

    def fn(z):
        d = np.sqrt(np.sum((z - x) ** 2, axis=1))
        return np.clip((t - d) / (t - r), 0.0, 1.0)

    return SampledFunction.from_callable(grid, fn, name=f"cutoff({r:g},{t:g})")


def deepest_point(domain: Domain) -> tuple[np.ndarray, float]:
    pts = _coarse_interior(domain, per_axis=64)
    sd = np.asarray(domain.sdist(pts))
    k = int(np.argmin(sd))
    return pts[k], float(-sd[k])


# ---------------------------------------------------------------------------
# checks


def _ball_domain(n: int, radius: float) -> Domain:
    if n == 1:
        return make_domain("interval", a=-radius, b=radius)
    return make_domain("disk", radius=radius)


def check_poincare(
    phi: YoungFunction,
    beta: float,
    n: int,
    *,
    radius: float = 1.0,
    resolution: int = 48,
    family: FamilySpec = FamilySpec(),
    tol: float = 0.02,
    workers: int = 1,
) -> InequalityReport:
    """Mean oscillation against the seminorm on a ball:
    avg |u - u_B|  <=  phi^{-1}(2^{n+beta} r^{beta-n} omega_n^2) * ||u||."""
    t0 = time.perf_counter()
    ball = _ball_domain(n, radius)
    grid = Grid(ball, resolution)
    members = make_family(family, grid)
    const = inverse(phi, 2.0 ** (n + beta) * radius ** (beta - n) * OMEGA_N[n] ** 2)
    rows = []
    worst = 0.0
    for u in members:
        lhs = float(np.mean(np.abs(u.values - np.mean(u.values))))
        nrm = luxemburg_seminorm(u, phi, beta, workers=workers)
        rhs = const * nrm
        ratio = lhs / rhs if rhs > 0 else 0.0
        worst = max(worst, ratio)
        rows.append({"case": u.name, "lhs": lhs, "rhs": rhs, "ratio": ratio})
    return InequalityReport(
        "poincare",
        {"phi": phi.label(), "beta": beta, "n": n, "radius": radius,
         "resolution": resolution, "family": family.label()},
        rows,
        max_ratio=worst,
        bound=1.0,
        tol=tol,
        passed=worst <= 1.0 + tol,
        runtime_s=time.perf_counter() - t0,
    )


def holder_chain_constant(beta: float, n: int, k_doubling: float) -> float:
    """Constant assembled from the telescoping-ball proof chain."""
    return 4.0 * 2.0 ** (beta + 2 * n) * OMEGA_N[n] ** 2 / (
        1.0 - 2.0 ** (-(beta - n) / (k_doubling - 1.0))
    )


def check_holder(
    phi: YoungFunction,
    beta: float,
    *,
    n: int = 1,
    resolution: int = 512,
    family: FamilySpec = FamilySpec(),
    tol: float = 0.0,
    workers: int = 1,
) -> InequalityReport:
    """Pointwise continuity for beta > n:
    |u(x) - u(y)| <= C_chain * phi^{-1}(|x-y|^(beta-n)) * ||u||."""
    if beta <= n:
        raise ValueError("check_holder: needs beta > n")
    K = estimate_doubling(phi)
    if math.isinf(K):
        raise ValueError("check_holder: phi must be doubling")
    t0 = time.perf_counter()
    ball = _ball_domain(n, 0.5)  # unit-diameter ball
    grid = Grid(ball, resolution)
    members = make_family(family, grid)
    bound = holder_chain_constant(beta, n, K)
    pts = grid.inside_points
    diff = pts[:, None, :] - pts[None, :, :]
    d = np.sqrt(np.sum(diff**2, axis=2))
    iu = np.triu_indices(len(pts), k=1)
    d_flat = d[iu]
    gauge = inverse(phi, np.unique(d_flat) ** (beta - n))
    gauge_of = dict(zip(np.unique(d_flat), gauge))
    gauge_flat = np.array([gauge_of[v] for v in d_flat])
    rows = []
    worst = 0.0
    for u in members:
        nrm = luxemburg_seminorm(u, phi, beta, workers=workers)
        if nrm == 0:
            rows.append({"case": u.name, "max_pair_ratio": 0.0})
            continue
        du = np.abs(u.values[:, None] - u.values[None, :])[iu]
        ratio = float(np.max(du / (gauge_flat * nrm)))
        worst = max(worst, ratio)
        rows.append({"case": u.name, "max_pair_ratio": ratio, "seminorm": nrm})
    return InequalityReport(
        "holder",
        {"phi": phi.label(), "beta": beta, "n": n, "K": K,
         "resolution": resolution, "family": family.label()},
        rows,
        max_ratio=worst,
        bound=bound,
        tol=tol,
        passed=worst <= bound * (1.0 + tol),
        runtime_s=time.perf_counter() - t0,
    )


def check_geometric(
    beta: float,
    *,
    n: int = 2,
    radius: float = 1.0,
    trials: int = 500,
    seed: int = 11,
    resolution: int = 48,
    refine_factor: int = 2,
    tol: float = 0.3,
) -> InequalityReport:
    """Kernel mass outside a subset: min over trials of
    (sum_{B minus E} h^n / |x-y|^(n+beta)) * |E|^(beta/n) stays positive and
    refinement-stable.  Trial sets are geometric (balls clipped to B) so the
    same trials rasterize onto both grids."""
    t0 = time.perf_counter()
    ball = _ball_domain(n, radius)
    rng = np.random.default_rng(seed)
    specs = []
    while len(specs) < trials:
        z = rng.uniform(-radius, radius, n)
        if np.linalg.norm(z) >= radius:
            continue
        rho = radius * rng.uniform(0.08, 0.6)
        x = z + rho * 0.3 * rng.uniform(-1, 1, n)  # probe point inside E
        if np.linalg.norm(x - z) >= rho or np.linalg.norm(x) >= radius:
            continue
        specs.append((z, rho, x))
    # adversarial trial: E is a centered ball of measure ~ half of B
    specs.append((np.zeros(n), radius * 0.5 ** (1.0 / n) * 0.98, np.zeros(n)))

    def run(res: int) -> float:
        grid = Grid(ball, res)
        pts = grid.inside_points
        hn = grid.cell_measure
        c_emp = math.inf
        for z, rho, x in specs:
            in_e = np.sum((pts - z) ** 2, axis=1) < rho * rho
            me = hn * int(np.count_nonzero(in_e))
            if me <= 0 or me >= 0.5 * grid.inside_measure():
                continue
            d = np.sqrt(np.sum((pts[~in_e] - x) ** 2, axis=1))
            lhs = hn * float(np.sum(d ** (-(n + beta))))
            c_emp = min(c_emp, lhs * me ** (beta / n))
        return c_emp

    c1 = run(resolution)
    c2 = run(resolution * refine_factor)
    drift = abs(c2 / c1 - 1.0) if c1 > 0 else math.inf
    rows = [
        {"resolution": resolution, "C_emp": c1},
        {"resolution": resolution * refine_factor, "C_emp": c2},
    ]
    return InequalityReport(
        "geometric",
        {"beta": beta, "n": n, "radius": radius, "trials": trials, "seed": seed},
        rows,
        max_ratio=drift,
        bound=tol,
        tol=tol,
        passed=(c1 > 0 and c2 > 0 and drift <= tol),
        runtime_s=time.perf_counter() - t0,
        notes=f"C_emp={c2:.6g} at the finer grid",
    )


def check_embedding(
    phi: YoungFunction,
    beta: float,
    *,
    n: int = 2,
    radius: float = 1.0,
    resolutions: Sequence[int] = (32, 64),
    family: FamilySpec = FamilySpec(),
    tol: float = 0.3,
    workers: int = 1,
) -> InequalityReport:
    """Centered Orlicz norm with gauge phi^(n/(n-beta)) against the seminorm;
    the non-explicit constant is replaced by refinement stability of the
    worst ratio.  Includes the truncation-consistency probe."""
    if not 0 < beta < n:
        raise ValueError("check_embedding: needs 0 < beta < n")
    if math.isinf(estimate_doubling(phi)):
        raise ValueError("check_embedding: phi must be doubling")
    t0 = time.perf_counter()
    psi = power_compose(phi, n / (n - beta))
    ball = _ball_domain(n, radius)
    rows = []
    c_embs = []
    for res in resolutions:
        grid = Grid(ball, res)
        members = make_family(family, grid)
        worst = 0.0
        for u in members:
            nrm = luxemburg_seminorm(u, phi, beta, workers=workers)
            if nrm == 0:
                continue
            _, cnorm = inf_centered_norm(u, psi)
            worst = max(worst, cnorm / nrm)
        c_embs.append(worst)
        rows.append({"resolution": res, "C_emb": worst})
    # truncation consistency on the last member at the coarse grid
    grid = Grid(ball, resolutions[0])
    u = make_family(family, grid)[-1]
    nrm = luxemburg_seminorm(u, phi, beta, workers=workers)
    full_ratio = inf_centered_norm(u, psi)[1] / nrm if nrm > 0 else 0.0
    gaps = []
    for frac in (0.25, 0.5, 1.0):
        ucut = truncate(u, frac * float(np.max(np.abs(u.values))))
        ncut = luxemburg_seminorm(ucut, phi, beta, workers=workers)
        rcut = inf_centered_norm(ucut, psi)[1] / ncut if ncut > 0 else 0.0
        gaps.append(abs(rcut - full_ratio))
        rows.append({"case": f"trunc@{frac:g}", "ratio_gap": gaps[-1]})
    trunc_ok = all(gaps[i + 1] <= gaps[i] + 1e-12 for i in range(len(gaps) - 1))
    drift = abs(c_embs[-1] / c_embs[0] - 1.0) if c_embs[0] > 0 else math.inf
    return InequalityReport(
        "embedding",
        {"phi": phi.label(), "beta": beta, "n": n,
         "resolutions": list(resolutions), "family": family.label()},
        rows,
        max_ratio=drift,
        bound=tol,
        tol=tol,
        passed=(drift <= tol and trunc_ok),
        runtime_s=time.perf_counter() - t0,
        notes=f"C_emb={c_embs[-1]:.6g}; truncation gaps {['%.3g' % g for g in gaps]}",
    )


def testfn_bound_constant(phi: YoungFunction, beta: float, n: int) -> float:
    """max of the two explicit cutoff-estimate constants; uses measured C_beta."""
    c_beta = estimate_C_beta(phi, beta)
    if math.isinf(c_beta):
        raise ValueError("testfn_bound: C_beta is infinite for this (phi, beta)")
    omega = OMEGA_N[n]
    m_far = 4.0 * (4.0**beta / beta + 1.0) * (n / beta) * omega * (beta + 1.0)
    m_near = 2.0 * (n / beta) * (beta + 1.0) * omega * c_beta
    return max(m_far, m_near)


def check_testfn_bound(
    phi: YoungFunction,
    beta: float,
    domain: Domain,
    x,
    r: float,
    t: float,
    *,
    resolution: int = 64,
    tol: float = 0.05,
    workers: int = 1,
) -> InequalityReport:
    """Cutoff seminorm against the explicit bound
    C * [phi^{-1}((t-r)^beta / |B_Omega(x,t)|)]^{-1}."""
    t0 = time.perf_counter()
    grid = Grid(domain, resolution)
    u = make_cutoff(grid, x, r, t)
    lhs = luxemburg_seminorm(u, phi, beta, workers=workers)
    measure = ball_measure(grid, x, t)
    c = testfn_bound_constant(phi, beta, domain.dim)
    rhs = c / inverse(phi, (t - r) ** beta / measure)
    ratio = lhs / rhs if rhs > 0 else math.inf
    rows = [{"case": u.name, "lhs": lhs, "rhs": rhs, "ratio": ratio, "ball_measure": measure}]
    return InequalityReport(
        "testfn_bound",
        {"phi": phi.label(), "beta": beta, "domain": domain.name, "x": tuple(np.atleast_1d(x)),
         "r": r, "t": t, "resolution": resolution},
        rows,
        max_ratio=ratio,
        bound=1.0,
        tol=tol,
        passed=ratio <= 1.0 + tol,
        runtime_s=time.perf_counter() - t0,
    )


def check_extension(
    domain_name: str,
    phi: YoungFunction,
    beta: float,
    *,
    domain_params: Optional[dict] = None,
    resolutions: Sequence[int] = (48, 96),
    family: FamilySpec = FamilySpec("polynomials"),
    members_builder=None,
    tol: float = 0.5,
    workers: int = 1,
) -> InequalityReport:
    """Extension-operator norm ratios ||Eu||_box / ||u||_domain per member.

    Regular domains must keep the worst ratio within the drift tolerance
    across the two grids; the cusp is report-only (the ratio is expected to
    grow: that growth is the regularity-failure signature)."""
    t0 = time.perf_counter()
    domain = make_domain(domain_name, **(domain_params or {}))
    rows = []
    worsts = []
    p = phi.homogeneous_power
    for res in resolutions:
        grid = Grid(domain, res)
        op = build_extension(domain, grid)
        raw = members_builder(grid) if members_builder is not None else make_family(family, grid)
        members = [u for u in raw if np.ptp(u.values) > 0]
        extended = [op.extend(u) for u in members]
        if p is not None:
            in_caches = batch_power_caches(members, beta, p, workers=workers)
            out_caches = batch_power_caches(extended, beta, p, workers=workers)
        else:
            in_caches = out_caches = [None] * len(members)
        worst = 0.0
        for u, eu, ci, co in zip(members, extended, in_caches, out_caches):
            nrm = luxemburg_seminorm(u, phi, beta, workers=workers, cache=ci)
            if nrm == 0:
                continue
            enorm = luxemburg_seminorm(eu, phi, beta, workers=workers, cache=co)
            ratio = enorm / nrm
            worst = max(worst, ratio)
            rows.append({"resolution": res, "case": u.name, "ratio": ratio})
        worsts.append(worst)
    drift = abs(worsts[-1] / worsts[0] - 1.0) if worsts[0] > 0 else math.inf
    increasing = worsts[-1] > worsts[0]
    if domain_name == "cusp":
        passed: Optional[bool] = None
        notes = f"cusp ratios {worsts}; increasing={increasing} (expected on a cusp)"
    else:
        passed = drift <= tol
        notes = f"C_ext={worsts[-1]:.6g}"
    return InequalityReport(
        "extension",
        {"domain": domain_name, "phi": phi.label(), "beta": beta,
         "resolutions": list(resolutions), "family": family.label()},
        rows,
        max_ratio=drift,
        bound=tol,
        tol=tol,
        passed=passed,
        runtime_s=time.perf_counter() - t0,
        notes=notes,
    )


def check_nontriviality(
    phi: YoungFunction,
    beta: float,
    domain: Domain,
    *,
    resolutions: Sequence[int] = (32, 64),
    growth_threshold: float = 0.5,
    workers: int = 1,
) -> InequalityReport:
    """Seminorm of a smooth interior bump across a refinement pair.

    Finite C_beta: the value must be refinement-stable (growth below the
    threshold).  Infinite C_beta: the near-diagonal sum must blow up (growth
    above the threshold)."""
    t0 = time.perf_counter()
    c_beta = estimate_C_beta(phi, beta)
    center, depth = deepest_point(domain)
    values = []
    for res in resolutions:
        grid = Grid(domain, res)
        u = radial_bump(grid, center, 0.8 * depth)
        values.append(luxemburg_seminorm(u, phi, beta, workers=workers))
    growth = values[-1] / values[0] - 1.0 if values[0] > 0 else math.inf
    finite = math.isfinite(c_beta)
    passed = (growth < growth_threshold) if finite else (growth > growth_threshold)
    rows = [{"resolution": r, "seminorm": v} for r, v in zip(resolutions, values)]
    return InequalityReport(
        "nontriviality",
        {"phi": phi.label(), "beta": beta, "domain": domain.name,
         "resolutions": list(resolutions), "C_beta": ("inf" if not finite else c_beta)},
        rows,
        max_ratio=growth,
        bound=growth_threshold,
        tol=growth_threshold,
        passed=passed,
        runtime_s=time.perf_counter() - t0,
        notes=f"C_beta {'finite' if finite else 'infinite'}; growth={growth:.3f}",
    )
