"""Experiment runner.

Subcommands: solve | compare | convergence | rigidity-sweep. Each run
writes its artifacts into --out plus a manifest listing every file and the
hash of the resolved configuration; outputs are byte-identical across runs
up to the manifest's timestamp line.

Exit codes: 0 all checks pass, 1 check failure, 2 usage/config error,
3 runtime failure (meshing or solver).
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from dataclasses import dataclass, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import comparison, fem, rearrange
from .geometry import (
    DomainError,
    DomainSpec,
    Ellipse,
    MeshError,
    PerturbedDisk,
    build_mesh,
    parse_domain,
    write_mesh,
)

USAGE_ERROR = 2
RUNTIME_ERROR = 3

_DEFAULTS = {
    "beta": 1.0,
    "h": 0.05,
    "levels": 3,
    "t_grid": 256,
    "s_grid": 1000,
    "tol_scale": 1.0,
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str
    out: str
    domain: str | None = None
    family: str | None = None
    beta: float = _DEFAULTS["beta"]
    h: float = _DEFAULTS["h"]
    levels: int = _DEFAULTS["levels"]
    t_grid: int = _DEFAULTS["t_grid"]
    s_grid: int = _DEFAULTS["s_grid"]
    tol_scale: float = _DEFAULTS["tol_scale"]
    seed: int | None = None  # reserved; no randomized stage exists yet

    def validate(self) -> None:
        if self.beta <= 0:
            raise ConfigError("beta must be positive")
        if self.h <= 0:
            raise ConfigError("h must be positive")
        if not 0 <= self.levels <= 6:
            raise ConfigError("levels must lie in [0, 6]")
        if self.t_grid < 16 or self.s_grid < 16:
            raise ConfigError("grid sizes must be at least 16")
        if self.tol_scale <= 0:
            raise ConfigError("tol-scale must be positive")
        if self.kind == "rigidity-sweep":
            if not self.family:
                raise ConfigError("missing required key: family")
        elif not self.domain:
            raise ConfigError("missing required key: domain")

    def canonical(self) -> str:
        pairs = []
        for f in fields(self):
            if f.name == "out":  # where results land is not what was run
                continue
            value = getattr(self, f.name)
            if value is not None:
                pairs.append(f"{f.name} = {value}")
        return "\n".join(pairs)

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


_FILE_KEYS = {
    "domain": str,
    "family": str,
    "beta": float,
    "h": float,
    "levels": int,
    "t_grid": int,
    "s_grid": int,
    "tol_scale": float,
    "seed": int,
    "out": str,
}


def _read_config_file(path: str) -> dict:
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        if key not in _FILE_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _FILE_KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(
                f"{path}:{lineno}: malformed value {value!r} for {key!r}: {exc}"
            ) from exc
    return values


def parse_config(namespace: argparse.Namespace) -> ExperimentConfig:
    """Merge config-file values with command-line flags; flags win."""
    file_values = _read_config_file(namespace.config) if namespace.config else {}
    merged = dict(_DEFAULTS)
    merged.update(file_values)
    for key in _FILE_KEYS:
        flag = getattr(namespace, key, None)
        if flag is not None:
            merged[key] = flag
    merged.setdefault("out", None)
    if merged.get("out") is None:
        raise ConfigError("missing required key: out")
    config = ExperimentConfig(
        kind=namespace.command, **{k: merged.get(k) for k in merged if k != "kind"}
    )
    config.validate()
    return config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="torsionlab",
        description="Robin torsion laboratory: solve, compare, sweep.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("solve", "mesh a domain and solve the torsion problem"),
        ("compare", "solve and run every comparison check"),
        ("convergence", "refinement study against the explicit disk solution"),
        ("rigidity-sweep", "deficit table over a family of domains"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--domain", help="disk:R | ellipse:a,b | rect:w,h | "
                       "polygon:@file | perturbed_disk:R,eps,k")
        p.add_argument("--beta", type=float, help="Robin parameter (> 0)")
        p.add_argument("--h", type=float, help="target mesh size")
        p.add_argument("--out", help="output directory (created if missing)")
        p.add_argument("--tol-scale", dest="tol_scale", type=float,
                       help="multiplier on the eps(h) tolerances")
        p.add_argument("--seed", type=int, help="reserved, currently unused")
        p.add_argument("--config", help="key = value file; flags override it")
        p.add_argument("--t-grid", dest="t_grid", type=int, help="threshold grid size")
        p.add_argument("--s-grid", dest="s_grid", type=int, help="measure grid size")
        if name == "convergence":
            p.add_argument("--levels", type=int, help="uniform refinements (0..6)")
        if name == "rigidity-sweep":
            p.add_argument("--family",
                           help="perturbed_disk:R,START:STOP:N,k=K | ellipse:START:STOP:N")
    return parser


def parse_family(text: str) -> list[DomainSpec]:
    kind, _, rest = text.partition(":")
    try:
        if kind == "perturbed_disk":
            radius_s, span, mode_s = rest.split(",")
            start, stop, count = span.split(":")
            if not mode_s.startswith("k="):
                raise ConfigError("perturbed_disk family needs a trailing k=<mode>")
            eps = np.linspace(float(start), float(stop), int(count))
            return [PerturbedDisk(float(radius_s), float(e), int(mode_s[2:])) for e in eps]
        if kind == "ellipse":
            start, stop, count = rest.split(":")
            aspects = np.linspace(float(start), float(stop), int(count))
            return [Ellipse(float(a), 1.0) for a in aspects]
    except (ValueError, DomainError) as exc:
        raise ConfigError(f"cannot parse family {text!r}: {exc}") from exc
    raise ConfigError(f"unknown family kind {kind!r}")


# ---------------------------------------------------------------------------
# commands


def _write_run_manifest(outdir: Path, config: ExperimentConfig, artifacts: list[str]) -> None:
    lines = [
        f"command = {config.kind}",
        f"config_hash = {config.hash()}",
        f"timestamp = {datetime.now(timezone.utc).isoformat()}",
        f"artifacts = {','.join(artifacts)}",
    ]
    (outdir / "manifest.txt").write_text("\n".join(lines) + "\n")


def _solve_artifacts(config: ExperimentConfig, outdir: Path):
    spec = parse_domain(config.domain)
    mesh = build_mesh(spec, config.h)
    field = fem.solve_torsion(mesh, config.beta)
    write_mesh(outdir / "mesh.txt", mesh)
    fem.write_field(outdir / "field.txt", field)
    fem.write_manifest(
        outdir / "solution.manifest",
        {"mesh": "mesh.txt", "field": "field.txt", "beta": config.beta,
         "tol": fem.SolveOptions().tolerance},
    )
    return field, ["mesh.txt", "field.txt", "solution.manifest"]


def _cmd_solve(config: ExperimentConfig, outdir: Path) -> int:
    field, artifacts = _solve_artifacts(config, outdir)
    record = comparison.flux_check(field, config.beta)
    _write_run_manifest(outdir, config, artifacts)
    print(f"solved {config.domain}: flux residual {record.residual:.3e}")
    return 0 if record.passed else 1


def _cmd_compare(config: ExperimentConfig, outdir: Path) -> int:
    field, artifacts = _solve_artifacts(config, outdir)
    report = comparison.standard_checks(field, config.beta, config.tol_scale)
    prof = rearrange.distribution_profile(field)
    prof.to_csv(outdir / "mu.csv")
    rearrange.decreasing_rearrangement(field).to_csv(
        outdir / "ustar.csv", n=config.s_grid
    )
    (outdir / "report.json").write_text(report.to_json() + "\n")
    (outdir / "report.csv").write_text(report.to_csv())
    artifacts += ["mu.csv", "ustar.csv", "report.json", "report.csv"]
    _write_run_manifest(outdir, config, artifacts)
    failed = [c.name for c in report.checks if not c.passed]
    if failed:
        print(f"FAIL: {', '.join(failed)}", file=sys.stderr)
        return 1
    print(f"all {len(report.checks)} checks pass on {config.domain}")
    return 0


def _cmd_convergence(config: ExperimentConfig, outdir: Path) -> int:
    spec = parse_domain(config.domain)
    from .geometry import Disk

    if not isinstance(spec, Disk):
        raise ConfigError("convergence study needs a disk domain (explicit solution)")
    rows = comparison.convergence_study(
        radius=spec.radius, beta=config.beta, h0=config.h, levels=config.levels + 1
    )
    lines = ["h,n_vertices,max_error,order"]
    for h, nv, err, order in rows:
        lines.append(f"{h:.17g},{nv},{err:.17g},{order:.17g}")
    slope = comparison.observed_order(rows)
    lines.append(f"# observed_order,{slope:.17g}")
    (outdir / "orders.csv").write_text("\n".join(lines) + "\n")
    _write_run_manifest(outdir, config, ["orders.csv"])
    print(f"observed order {slope:.3f} over {len(rows)} levels")
    return 0 if slope >= 1.8 else 1


def _cmd_rigidity(config: ExperimentConfig, outdir: Path) -> int:
    family = parse_family(config.family)
    rows = comparison.rigidity_probe(
        family, config.beta, config.h, n_grid=config.s_grid
    )
    (outdir / "deficit.csv").write_text(comparison.probe_rows_to_csv(rows))
    _write_run_manifest(outdir, config, ["deficit.csv"])
    tol = comparison.eps_h(config.h, config.tol_scale)
    bad = [r.label for r in rows if r.deficit < -tol or r.min_gap < -tol]
    if bad:
        print(f"FAIL: negative deficit on {', '.join(bad)}", file=sys.stderr)
        return 1
    print(f"{len(rows)} family members probed; deficits in "
          f"[{rows[0].deficit:.3e}, {max(r.deficit for r in rows):.3e}]")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    namespace = parser.parse_args(argv)
    try:
        config = parse_config(namespace)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    outdir = Path(config.out)
    outdir.mkdir(parents=True, exist_ok=True)
    handler = {
        "solve": _cmd_solve,
        "compare": _cmd_compare,
        "convergence": _cmd_convergence,
        "rigidity-sweep": _cmd_rigidity,
    }[config.kind]
    try:
        return handler(config, outdir)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (MeshError, fem.SolveError, fem.DiscretizationError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
