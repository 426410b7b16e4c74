"""Configuration-driven entry point for reproducible experiment runs.

Configs are flat INI files (sections of key = value pairs), diffable and
round-trippable.  Every run writes one CSV and one JSON summary per check
plus a manifest (config hash, seed, versions, tolerances) sufficient to
reproduce the run byte-for-byte.

Exit codes: 0 all asserted checks pass, 1 check failure, 2 config error,
3 runtime error.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import io
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .geometry import Grid, domain_catalog, make_domain
from .harness import (
    FamilySpec,
    check_embedding,
    check_extension,
    check_geometric,
    check_holder,
    check_nontriviality,
    check_poincare,
    check_testfn_bound,
    deepest_point,
)
from .norms import SampledFunction, luxemburg_seminorm
from .whitney import default_ahlfors_probes, domain_outline, whitney_decompose
from .young import make_young

ENV_OUTPUT_ROOT = "FOSLAB_OUTPUT_ROOT"

YOUNG_SIGNATURES = {
    "power": "p>=1",
    "power_log": "p>=1, alpha>=1",
    "power_max": "p>=1, delta>0",
    "power_exp": "p>=1, c>0, alpha>0",
    "exp_minus_taylor": "c>0, alpha>0, nu>=1",
}

CHECK_SIGNATURES = {
    "poincare": "ball mean oscillation vs seminorm (asserted, 2% slack)",
    "holder": "pointwise modulus vs proof-chain constant, beta > n (asserted)",
    "geometric": "kernel mass outside subsets, stability +-30% (asserted)",
    "embedding": "centered Orlicz norm vs seminorm, stability +-30% (asserted)",
    "testfn_bound": "cutoff seminorm vs explicit constant (asserted, 5% slack)",
    "extension": "||Eu||/||u|| drift across refinements (asserted; cusp report-only)",
    "nontriviality": "bump seminorm refinement dichotomy (asserted)",
}


class ConfigError(ValueError):
    pass


def _parse_scalar(s: str):
    for cast in (int, float):
        try:
            return cast(s)
        except ValueError:
            pass
    return s


@dataclass
class ExperimentConfig:
    domain_shape: str = "disk"
    domain_params: dict = field(default_factory=dict)
    resolution: int = 48
    young_family: str = "power"
    young_params: dict = field(default_factory=lambda: {"p": 2.0})
    family_kind: str = "trig"
    family_count: int = 20
    family_degree: int = 3
    beta: float = 1.0
    checks: list = field(default_factory=lambda: ["nontriviality"])
    seed: int = 7
    threads: int = 1
    output: str = "out"
    tolerances: dict = field(default_factory=dict)

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as e:
            raise ConfigError(f"config parse error: {e}") from e
        cfg = cls()
        if cp.has_section("domain"):
            items = dict(cp.items("domain"))
            cfg.domain_shape = items.pop("shape", cfg.domain_shape)
            cfg.resolution = int(items.pop("resolution", cfg.resolution))
            cfg.domain_params = {k: float(v) for k, v in items.items()}
        if cp.has_section("young"):
            items = dict(cp.items("young"))
            cfg.young_family = items.pop("family", cfg.young_family)
            cfg.young_params = {k: float(v) for k, v in items.items()}
        if cp.has_section("family"):
            items = dict(cp.items("family"))
            cfg.family_kind = items.pop("kind", cfg.family_kind)
            cfg.family_count = int(items.pop("count", cfg.family_count))
            cfg.family_degree = int(items.pop("degree", cfg.family_degree))
            if items:
                raise ConfigError(f"family.{sorted(items)[0]}: unknown key")
        if cp.has_section("run"):
            items = dict(cp.items("run"))
            cfg.beta = float(items.pop("beta", cfg.beta))
            if "checks" in items:
                cfg.checks = [c.strip() for c in items.pop("checks").split(",") if c.strip()]
            cfg.seed = int(items.pop("seed", cfg.seed))
            cfg.threads = int(items.pop("threads", cfg.threads))
            cfg.output = items.pop("output", cfg.output)
            if items:
                raise ConfigError(f"run.{sorted(items)[0]}: unknown key")
        if cp.has_section("tolerances"):
            cfg.tolerances = {k: float(v) for k, v in cp.items("tolerances")}
        cfg.validate()
        return cfg

    def validate(self) -> None:
        catalog = domain_catalog()
        if self.domain_shape not in catalog:
            raise ConfigError(
                f"domain.shape: unknown domain {self.domain_shape!r}; "
                f"known: {sorted(catalog)}"
            )
        for k in self.domain_params:
            if k not in catalog[self.domain_shape]:
                raise ConfigError(f"domain.{k}: unknown parameter for {self.domain_shape}")
        if self.young_family not in YOUNG_SIGNATURES:
            raise ConfigError(
                f"young.family: unknown family {self.young_family!r}; "
                f"known: {sorted(YOUNG_SIGNATURES)}"
            )
        if self.family_kind not in ("polynomials", "trig", "bumps", "cutoffs", "truncations"):
            raise ConfigError(f"family.kind: unknown kind {self.family_kind!r}")
        for c in self.checks:
            if c not in CHECK_SIGNATURES:
                raise ConfigError(
                    f"run.checks: unknown check {c!r}; known: {sorted(CHECK_SIGNATURES)}"
                )
        if self.resolution < 2:
            raise ConfigError("domain.resolution: must be >= 2")
        if self.beta <= 0:
            raise ConfigError("run.beta: must be positive")
        for k in self.tolerances:
            if k not in CHECK_SIGNATURES:
                raise ConfigError(f"tolerances.{k}: unknown check")

    def to_text(self) -> str:
        out = io.StringIO()
        out.write("[domain]\n")
        out.write(f"shape = {self.domain_shape}\n")
        out.write(f"resolution = {self.resolution}\n")
        for k, v in sorted(self.domain_params.items()):
            out.write(f"{k} = {v!r}\n")
        out.write("\n[young]\n")
        out.write(f"family = {self.young_family}\n")
        for k, v in sorted(self.young_params.items()):
            out.write(f"{k} = {v!r}\n")
        out.write("\n[family]\n")
        out.write(f"kind = {self.family_kind}\n")
        out.write(f"count = {self.family_count}\n")
        out.write(f"degree = {self.family_degree}\n")
        out.write("\n[run]\n")
        out.write(f"beta = {self.beta!r}\n")
        out.write(f"checks = {', '.join(self.checks)}\n")
        out.write(f"seed = {self.seed}\n")
        out.write(f"threads = {self.threads}\n")
        out.write(f"output = {self.output}\n")
        if self.tolerances:
            out.write("\n[tolerances]\n")
            for k, v in sorted(self.tolerances.items()):
                out.write(f"{k} = {v!r}\n")
        return out.getvalue()

    def output_dir(self) -> str:
        root = os.environ.get(ENV_OUTPUT_ROOT)
        if root and not os.path.isabs(self.output):
            return os.path.join(root, self.output)
        return self.output

    def family_spec(self) -> FamilySpec:
        return FamilySpec(
            kind=self.family_kind, count=self.family_count,
            seed=self.seed, degree=self.family_degree,
        )

    def young(self):
        return make_young(self.young_family, **self.young_params)

    def domain(self):
        return make_domain(self.domain_shape, **self.domain_params)


def _run_one_check(name: str, cfg: ExperimentConfig):
    phi = cfg.young()
    domain = cfg.domain()
    n = domain.dim
    fam = cfg.family_spec()
    tol = cfg.tolerances.get(name)
    kw = {} if tol is None else {"tol": tol}
    if name == "poincare":
        return check_poincare(phi, cfg.beta, n, resolution=cfg.resolution,
                              family=fam, workers=cfg.threads, **kw)
    if name == "holder":
        return check_holder(phi, cfg.beta, n=n, resolution=cfg.resolution,
                            family=fam, workers=cfg.threads, **kw)
    if name == "geometric":
        return check_geometric(cfg.beta, n=n, resolution=cfg.resolution,
                               seed=cfg.seed, **kw)
    if name == "embedding":
        return check_embedding(phi, cfg.beta, n=n,
                               resolutions=(cfg.resolution, 2 * cfg.resolution),
                               family=fam, workers=cfg.threads, **kw)
    if name == "testfn_bound":
        x, depth = deepest_point(domain)
        t = min(0.5 * domain.diam, 4 * depth)
        return check_testfn_bound(phi, cfg.beta, domain, x, t / 2, t,
                                  resolution=cfg.resolution, workers=cfg.threads, **kw)
    if name == "extension":
        return check_extension(cfg.domain_shape, phi, cfg.beta,
                               domain_params=cfg.domain_params,
                               resolutions=(cfg.resolution, 2 * cfg.resolution),
                               family=fam, workers=cfg.threads, **kw)
    if name == "nontriviality":
        return check_nontriviality(phi, cfg.beta, domain,
                                   resolutions=(cfg.resolution, 2 * cfg.resolution),
                                   workers=cfg.threads)
    raise ConfigError(f"run.checks: unknown check {name!r}")


def run(config_path: str) -> int:
    """Execute the configured checks in declared order; 0 iff all assertions pass."""
    try:
        with open(config_path) as f:
            text = f.read()
        cfg = ExperimentConfig.from_text(text)
    except (OSError, ConfigError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    outdir = cfg.output_dir()
    os.makedirs(outdir, exist_ok=True)
    results = []
    try:
        for i, name in enumerate(cfg.checks):
            report = _run_one_check(name, cfg)
            report.write(outdir, stem=f"{i:02d}_{name}")
            results.append(report)
            state = {True: "pass", False: "FAIL", None: "report"}[report.passed]
            print(f"{name}: {state} (max_ratio={report.max_ratio:.6g}, {report.runtime_s:.1f}s)")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - runtime failures get a distinct code
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3
    manifest = {
        "config_sha256": hashlib.sha256(text.encode()).hexdigest(),
        "config": cfg.to_text(),
        "seed": cfg.seed,
        "threads": cfg.threads,
        "versions": {
            "foslab": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
        "tolerances": {r.check_id: r.tol for r in results},
        "checks": [r.summary() for r in results],
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
        f.write("\n")
    return 0 if all(r.passed in (True, None) for r in results) else 1


def list_catalog() -> str:
    lines = ["domains:"]
    for name, params in sorted(domain_catalog().items()):
        sig = ", ".join(f"{k}={v:g}" for k, v in sorted(params.items()))
        lines.append(f"  {name}({sig})")
    lines.append("young families:")
    for name, sig in sorted(YOUNG_SIGNATURES.items()):
        lines.append(f"  {name}({sig})")
    lines.append("checks:")
    for name, desc in sorted(CHECK_SIGNATURES.items()):
        lines.append(f"  {name}: {desc}")
    return "\n".join(lines)


def whitney_dump(config_path: str) -> int:
    try:
        with open(config_path) as f:
            cfg = ExperimentConfig.from_text(f.read())
    except (OSError, ConfigError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        domain = cfg.domain()
        decomp = whitney_decompose(domain)
        outdir = cfg.output_dir()
        os.makedirs(outdir, exist_ok=True)
        csv_path = os.path.join(outdir, "whitney.csv")
        decomp.write_csv(csv_path)
        print(f"wrote {csv_path} ({len(decomp)} cubes, gamma0={decomp.gamma0_observed})")
        if domain.dim == 2:
            svg_path = os.path.join(outdir, "whitney.svg")
            decomp.write_svg(svg_path, outline_points=domain_outline(domain))
            print(f"wrote {svg_path}")
        return 0
    except Exception as e:  # noqa: BLE001
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3


def norm_of_csv(config_path: str, csv_path: str) -> int:
    try:
        with open(config_path) as f:
            cfg = ExperimentConfig.from_text(f.read())
    except (OSError, ConfigError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        grid = Grid(cfg.domain(), cfg.resolution)
        u = SampledFunction.read_csv(grid, csv_path)
        value = luxemburg_seminorm(u, cfg.young(), cfg.beta, workers=cfg.threads)
        print(repr(value))
        return 0
    except Exception as e:  # noqa: BLE001
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="foslab", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)
    p_run = sub.add_parser("run", help="run the checks declared in a config")
    p_run.add_argument("config")
    sub.add_parser("list", help="print built-in domains, Young families, and checks")
    p_dump = sub.add_parser("whitney-dump", help="export the Whitney decomposition (CSV/SVG)")
    p_dump.add_argument("config")
    p_norm = sub.add_parser("norm", help="seminorm of a CSV-supplied cell function")
    p_norm.add_argument("config")
    p_norm.add_argument("csv")
    args = parser.parse_args(argv)
    if args.verb == "run":
        return run(args.config)
    if args.verb == "list":
        print(list_catalog())
        return 0
    if args.verb == "whitney-dump":
        return whitney_dump(args.config)
    if args.verb == "norm":
        return norm_of_csv(args.config, args.csv)
    return 2


if __name__ == "__main__":
    sys.exit(main())
