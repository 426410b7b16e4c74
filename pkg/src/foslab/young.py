"""Young functions: construction, inversion, and derived constants.

A Young function is a convex continuous phi on [0, inf) with phi(0) = 0 and
phi(t) > 0 for t > 0.  Two derived quantities drive everything downstream:

* the nontriviality constant
      C_beta = sup_t (t^beta / phi(t)) * int_0^t phi(s) s^(-beta-1) ds,
  finite exactly when the near-diagonal part of the Gagliardo-type modular
  is integrable;
* the doubling constant K = sup_t phi(2t) / phi(t).

Both are estimated over finite logarithmic scans; the scan is part of the
reported analysis so results are reproducible.  Divergence flags are
best-effort heuristics on those scans.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

_FAMILIES = ("power", "power_log", "power_max", "power_exp", "exp_minus_taylor")


class QuadratureError(RuntimeError):
    """Quadrature failed to converge for reasons other than analytic divergence."""


@dataclass(frozen=True)
class YoungFunction:
    """Evaluator bundle for one Young function.

    ``eval`` accepts scalars or numpy arrays of nonnegative reals.
    ``closed_inverse`` is populated when an analytic inverse exists and is
    used only as a cross-check; root-finding always goes through
    :func:`inverse`.  ``homogeneous_power`` is set to p for the pure power
    family, for which phi(t/lam) = phi(t)/lam^p exactly.
    """

    name: str
    params: dict
    eval: Callable[[np.ndarray], np.ndarray]
    closed_inverse: Optional[Callable[[np.ndarray], np.ndarray]] = None
    homogeneous_power: Optional[float] = None

    def __call__(self, t):
        return self.eval(t)

    def label(self) -> str:
        ps = ",".join(f"{k}={v:g}" for k, v in sorted(self.params.items()))
        return f"{self.name}({ps})"


@dataclass(frozen=True)
class ScanSpec:
    t_min: float
    t_max: float
    points: int

    def grid(self) -> np.ndarray:
        return np.logspace(math.log10(self.t_min), math.log10(self.t_max), self.points)


C_BETA_SCAN = ScanSpec(1e-4, 1e4, 200)
DOUBLING_SCAN = ScanSpec(1e-6, 1e6, 400)


def _check_params(name, params, required):
    missing = [k for k in required if k not in params]
    if missing:
        raise ValueError(f"{name}: missing parameters {missing}")
    extra = [k for k in params if k not in required]
    if extra:
        raise ValueError(f"{name}: unknown parameters {extra}")


def _validate_shape(phi: YoungFunction) -> None:
    """Sampled check of the Young-function axioms (cheap, at construction)."""
    if float(phi.eval(0.0)) != 0.0:
        raise ValueError(f"{phi.label()}: eval(0) != 0")
    t = np.logspace(-6, 6, 25)
    with np.errstate(over="ignore"):
        v = np.asarray(phi.eval(t), dtype=float)
    if not np.all(v > 0):
        raise ValueError(f"{phi.label()}: not positive on (0, inf)")
    fin = np.isfinite(v)
    if np.any(np.diff(v[fin]) < 0):
        raise ValueError(f"{phi.label()}: not nondecreasing")
    # midpoint convexity on consecutive sample triples
    tm = (t[:-2] + t[2:]) / 2
    with np.errstate(over="ignore"):
        vm = np.asarray(phi.eval(tm), dtype=float)
    ok = np.isfinite(v[:-2]) & np.isfinite(v[2:]) & np.isfinite(vm)
    if not np.all(vm[ok] <= (v[:-2][ok] + v[2:][ok]) / 2 * (1 + 1e-12) + 1e-300):
        raise ValueError(f"{phi.label()}: midpoint convexity violated on samples")


def make_young(name: str, **params) -> YoungFunction:
    """Construct a built-in Young function.

    Families and parameter ranges:
      power            t^p                                   p >= 1
      power_log        t^p * ln(1+t)^alpha                   p >= 1, alpha >= 1
      power_max        max(t^p, t^(p+delta))                 p >= 1, delta > 0
      power_exp        t^p * exp(c t^alpha)                  p >= 1, c > 0, alpha > 0
      exp_minus_taylor exp(c t^alpha) minus its Taylor part   c > 0, alpha > 0,
                       up to order floor(nu/alpha)           nu >= 1 (default 1)
    """
    if name not in _FAMILIES:
        raise ValueError(f"unknown Young family {name!r}; known: {_FAMILIES}")

    if name == "power":
        _check_params(name, params, ("p",))
        p = float(params["p"])
        if p < 1:
            raise ValueError("power: need p >= 1")
        phi = YoungFunction(
            name,
            {"p": p},
            eval=lambda t, p=p: np.asarray(t, dtype=float) ** p,
            closed_inverse=lambda y, p=p: np.asarray(y, dtype=float) ** (1.0 / p),
            homogeneous_power=p,
        )
    elif name == "power_log":
        _check_params(name, params, ("p", "alpha"))
        p, alpha = float(params["p"]), float(params["alpha"])
        if p < 1 or alpha < 1:
            raise ValueError("power_log: need p >= 1 and alpha >= 1")

        def ev(t, p=p, alpha=alpha):
            t = np.asarray(t, dtype=float)
            return t**p * np.log1p(t) ** alpha

        phi = YoungFunction(name, {"p": p, "alpha": alpha}, eval=ev)
    elif name == "power_max":
        _check_params(name, params, ("p", "delta"))
        p, delta = float(params["p"]), float(params["delta"])
        if p < 1 or delta <= 0:
            raise ValueError("power_max: need p >= 1 and delta > 0")

        def ev(t, p=p, q=p + delta):
            t = np.asarray(t, dtype=float)
            return np.maximum(t**p, t**q)

        phi = YoungFunction(name, {"p": p, "delta": delta}, eval=ev)
    elif name == "power_exp":
        _check_params(name, params, ("p", "c", "alpha"))
        p, c, alpha = float(params["p"]), float(params["c"]), float(params["alpha"])
        if p < 1 or c <= 0 or alpha <= 0:
            raise ValueError("power_exp: need p >= 1, c > 0, alpha > 0")

        def ev(t, p=p, c=c, alpha=alpha):
            t = np.asarray(t, dtype=float)
            with np.errstate(over="ignore"):
                return t**p * np.exp(c * t**alpha)

        phi = YoungFunction(name, {"p": p, "c": c, "alpha": alpha}, eval=ev)
    else:  # exp_minus_taylor
        use = dict(params)
        use.setdefault("nu", 1.0)
        _check_params(name, use, ("c", "alpha", "nu"))
        c, alpha, nu = float(use["c"]), float(use["alpha"]), float(use["nu"])
        if c <= 0 or alpha <= 0 or nu < 1:
            raise ValueError("exp_minus_taylor: need c > 0, alpha > 0, nu >= 1")
        m = int(math.floor(nu / alpha))

        def ev(t, c=c, alpha=alpha, m=m):
            t = np.asarray(t, dtype=float)
            x = c * t**alpha
            with np.errstate(over="ignore"):
                full = np.exp(x)
            head = np.zeros_like(x)
            term = np.ones_like(x)
            for j in range(m + 1):
                head += term
                term = term * x / (j + 1)
            direct = full - head
            # series tail for small x, where exp(x) - head cancels catastrophically
            tail = np.zeros_like(x)
            tterm = term  # x^(m+1)/(m+1)!
            for j in range(m + 1, m + 40):
                tail += tterm
                tterm = tterm * x / (j + 1)
            return np.where(x < 0.5, tail, direct)

        phi = YoungFunction(name, {"c": c, "alpha": alpha, "nu": nu}, eval=ev)

    _validate_shape(phi)
    return phi


def power_compose(phi: YoungFunction, q: float) -> YoungFunction:
    """The Young function t -> phi(t)^q for q >= 1."""
    if q < 1:
        raise ValueError("power_compose: need q >= 1")
    if q == 1:
        return phi
    inv = None
    if phi.closed_inverse is not None:
        inv = lambda y, base=phi.closed_inverse, q=q: base(np.asarray(y, dtype=float) ** (1.0 / q))
    hp = phi.homogeneous_power * q if phi.homogeneous_power is not None else None

    def ev(t, base=phi.eval, q=q):
        with np.errstate(over="ignore"):
            return np.asarray(base(t), dtype=float) ** q

    out = YoungFunction(
        f"{phi.name}^{q:g}",
        dict(phi.params, compose_q=q),
        eval=ev,
        closed_inverse=inv,
        homogeneous_power=hp,
    )
    _validate_shape(out)
    return out


def inverse(phi: YoungFunction, y, rel_tol: float = 1e-10, max_iter: int = 200):
    """Solve phi(t) = y by doubling bracket plus bisection (vectorized).

    Returns t with |phi(t) - y| <= rel_tol * max(1, y); inverse(0) = 0 exactly.
    A bracket always exists since phi is increasing to infinity.
    """
    y_arr = np.asarray(y, dtype=float)
    scalar = y_arr.ndim == 0
    y_flat = np.atleast_1d(y_arr).astype(float)
    if np.any(y_flat < 0):
        raise ValueError("inverse: need y >= 0")
    out = np.zeros_like(y_flat)
    pos = y_flat > 0
    if np.any(pos):
        yp = y_flat[pos]
        hi = np.ones_like(yp)
        with np.errstate(over="ignore"):
            for _ in range(1100):
                need = np.asarray(phi.eval(hi), dtype=float) < yp
                if not np.any(need):
                    break
                hi[need] *= 2.0
            else:
                raise QuadratureError("inverse: no upper bracket found")
            lo = np.zeros_like(yp)
            tol = rel_tol * np.maximum(1.0, yp)
            done = np.zeros(len(yp), dtype=bool)
            for _ in range(max_iter):
                mid = 0.5 * (lo + hi)
                fm = np.asarray(phi.eval(mid), dtype=float)
                done |= np.abs(fm - yp) <= tol
                high = fm > yp
                hi = np.where(~done & high, mid, hi)
                lo = np.where(~done & ~high, mid, lo)
                if np.all(done | (hi - lo <= np.finfo(float).eps * hi)):
                    break
            out[pos] = 0.5 * (lo + hi)
            # keep exact hits exact
            exact = np.asarray(phi.eval(hi), dtype=float) == yp
            out_pos = out[pos]
            out_pos[exact] = hi[exact]
            out[pos] = out_pos
    if scalar:
        return float(out[0])
    return out.reshape(y_arr.shape)


_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(32)


def _gauss(f, a: float, b: float) -> float:
    u = 0.5 * (b - a) * _GAUSS_NODES + 0.5 * (a + b)
    return float(np.sum(_GAUSS_WEIGHTS * f(u))) * 0.5 * (b - a)


def _adaptive_block(f, a: float, b: float, depth: int = 0) -> float:
    """Gauss block with bisection refinement; handles integrands sharply
    peaked at a block edge (exponential-type Young functions)."""
    whole = _gauss(f, a, b)
    mid = 0.5 * (a + b)
    halves = _gauss(f, a, mid) + _gauss(f, mid, b)
    if not math.isfinite(halves):
        return halves
    if abs(halves - whole) <= 1e-12 * abs(halves) + 1e-300 or depth >= 16:
        return halves
    return _adaptive_block(f, a, mid, depth + 1) + _adaptive_block(f, mid, b, depth + 1)


def _inner_integral(
    phi: YoungFunction,
    beta: float,
    t: float,
    rel_tol: float = 1e-12,
    max_blocks: int = 240,
) -> float:
    """int_0^t phi(s) s^(-beta-1) ds via s = exp(u) block quadrature.

    Decade blocks descend from ln(t).  Divergence near s = 0 shows up as
    non-decaying blocks and returns inf; a drained block budget with blocks
    still decaying raises QuadratureError instead.
    """

    def g(u):
        with np.errstate(over="ignore", invalid="ignore"):
            pv = np.asarray(phi.eval(np.exp(u)), dtype=float)
            direct = pv * np.exp(-beta * u)
            # phi underflow reads as a zero tail; rescue finite products whose
            # factors straddle the float range via log space
            out = np.where(pv > 0, direct, 0.0)
            fix = (pv > 0) & ~np.isfinite(direct)
            if np.any(fix):
                out[fix] = np.exp(np.log(pv[fix]) - beta * u[fix])
            return out

    w_dec = math.log(10.0)
    u_top = math.log(t)
    total = 0.0
    prev = None
    plateau = 0
    for k in range(max_blocks):
        u1 = u_top - k * w_dec
        block = _adaptive_block(g, u1 - w_dec, u1)
        if not math.isfinite(block):
            return math.inf
        total += block
        if block <= rel_tol * max(total, 1e-300):
            return total
        if prev is not None:
            plateau = plateau + 1 if block >= 0.95 * prev else 0
            if k >= 10 and plateau >= 5:
                return math.inf
        prev = block
    raise QuadratureError(
        f"inner integral did not converge for {phi.label()} at t={t:g} "
        f"after {max_blocks} decades"
    )


def estimate_C_beta(phi: YoungFunction, beta: float, scan: ScanSpec = C_BETA_SCAN) -> float:
    """sup over the scan of (t^beta / phi(t)) * int_0^t phi(s) s^(-beta-1) ds.

    Returns math.inf when the inner integral diverges.  Scan points where
    phi(t) exceeds 1e280 are skipped to keep the quadrature in range (the
    ratio decays there for the built-ins that reach such values).
    """
    if beta <= 0:
        raise ValueError("estimate_C_beta: need beta > 0")
    best = 0.0
    for t in scan.grid():
        with np.errstate(over="ignore"):
            pt = float(phi.eval(t))
        if not math.isfinite(pt) or pt == 0.0 or pt > 1e280:
            continue
        inner = _inner_integral(phi, beta, float(t))
        if math.isinf(inner):
            return math.inf
        best = max(best, t**beta / pt * inner)
    return best


def estimate_doubling(phi: YoungFunction, scan: ScanSpec = DOUBLING_SCAN) -> float:
    """sup over the scan of phi(2t)/phi(t); inf flag for non-doubling growth.

    Flags +inf when the ratio exceeds 1e6 anywhere or is strictly increasing
    across the right edge of the scan.
    """
    t = scan.grid()
    with np.errstate(over="ignore", invalid="ignore"):
        num = np.asarray(phi.eval(2 * t), dtype=float)
        den = np.asarray(phi.eval(t), dtype=float)
        ratio = num / den
    valid = np.isfinite(ratio) & (den > 0)
    r = ratio[valid]
    if len(r) == 0:
        return math.inf
    sup = float(np.max(r))
    if sup > 1e6:
        return math.inf
    edge = r[-10:]
    if len(edge) >= 10 and np.all(np.diff(edge) > 0):
        return math.inf
    return sup


@dataclass(frozen=True)
class YoungAnalysis:
    """Measured constants for one Young function over recorded scan ranges."""

    name: str
    params: dict
    beta: float
    C_beta: float
    K_doubling: float
    c_beta_scan: ScanSpec = C_BETA_SCAN
    doubling_scan: ScanSpec = DOUBLING_SCAN

    def __post_init__(self):
        if not (self.C_beta > 0):
            raise ValueError("YoungAnalysis: C_beta must be positive")
        if math.isfinite(self.K_doubling) and not (self.K_doubling > 1):
            raise ValueError("YoungAnalysis: finite K must exceed 1")

    def to_json_row(self) -> str:
        def enc(x):
            return "inf" if math.isinf(x) else x

        return json.dumps(
            {
                "name": self.name,
                "params": self.params,
                "beta": self.beta,
                "C_beta": enc(self.C_beta),
                "K_doubling": enc(self.K_doubling),
                "c_beta_scan": [self.c_beta_scan.t_min, self.c_beta_scan.t_max, self.c_beta_scan.points],
                "doubling_scan": [
                    self.doubling_scan.t_min,
                    self.doubling_scan.t_max,
                    self.doubling_scan.points,
                ],
            }
        )


def analyze_young(phi: YoungFunction, beta: float) -> YoungAnalysis:
    return YoungAnalysis(
        name=phi.name,
        params=dict(phi.params),
        beta=beta,
        C_beta=estimate_C_beta(phi, beta),
        K_doubling=estimate_doubling(phi),
    )
