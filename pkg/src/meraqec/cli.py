"""Reproducible experiment runner.

Builds networks from a JSON config, executes a named verification suite,
and writes machine-readable reports.  Identical (config, seeds) produce
byte-identical data files; only the manifest's wall time varies.

Exit codes: 0 when every bound check passed, 2 when any bound was
violated, 1 on configuration or I/O errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .channels import (
    SPECTRAL_RADIUS_TOL,
    build_transfer_operator,
    spectral_decomposition,
    spectrum_report,
)
from .network import (
    MeraNetwork,
    Region,
    ascend_operator,
    encode_state,
    network_from_json,
    random_mera,
    trivial_mera,
)
from .qec import (
    CodeSpec,
    decoupling_constant,
    decoupling_defect,
    distance_exponent,
    shield_region,
    uberholography_partition,
    union_correctability,
    verify_local_correctability,
)
from .reduced import code_factor, codeword_rdm
from .tensors import apply_operator_to_axes, dagger, embed_operator, rng_from_seed

EXPERIMENTS = (
    "spectrum",
    "decoupling",
    "local-correctability",
    "union",
    "distance",
    "lightcone",
    "identities",
)

IDENTITY_TOL = 1e-10


class ConfigError(ValueError):
    pass


_CONFIG_FIELDS = {
    "experiment",
    "network",
    "seeds",
    "scales",
    "region_sizes",
    "shield_radii",
    "t_grid",
    "z",
    "levels",
    "num_codewords",
    "output",
}

_NETWORK_FIELDS = {"kind", "site_dim", "num_layers", "base_sites", "path"}
_OUTPUT_FIELDS = {"path", "format"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; unknown fields are rejected."""

    experiment: str
    network: dict
    seeds: tuple[int, ...]
    scales: tuple[int, ...]
    region_sizes: tuple[int, ...]
    shield_radii: tuple[int, ...]
    t_grid: tuple[float, ...]
    z: float
    levels: int
    num_codewords: int
    out_path: str
    out_format: str

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(doc) - _CONFIG_FIELDS
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        experiment = doc.get("experiment")
        if experiment not in EXPERIMENTS:
            raise ConfigError(
                f"field 'experiment' must be one of {EXPERIMENTS}, got {experiment!r}"
            )
        network = dict(doc.get("network", {}))
        bad = set(network) - _NETWORK_FIELDS
        if bad:
            raise ConfigError(f"unknown network fields: {sorted(bad)}")
        network.setdefault("kind", "random")
        if network["kind"] not in ("random", "trivial", "file"):
            raise ConfigError(f"network kind {network['kind']!r} not recognised")
        output = dict(doc.get("output", {}))
        bad = set(output) - _OUTPUT_FIELDS
        if bad:
            raise ConfigError(f"unknown output fields: {sorted(bad)}")
        fmt = output.get("format", "csv")
        if fmt not in ("json", "csv"):
            raise ConfigError(f"field 'output.format' must be json or csv, got {fmt!r}")
        # lightcone needs a chain small enough for dense evolution
        default_scales = (3,) if experiment == "lightcone" else (2, 3, 4)
        scales = tuple(int(s) for s in doc.get("scales", default_scales))
        num_layers = int(network.get("num_layers", max(scales)))
        if network["kind"] != "file" and num_layers < max(scales):
            raise ConfigError(
                f"network.num_layers = {num_layers} is below max scale {max(scales)}"
            )
        network.setdefault("num_layers", num_layers)
        return cls(
            experiment=experiment,
            network=network,
            seeds=tuple(int(s) for s in doc.get("seeds", (0, 1, 2))),
            scales=scales,
            region_sizes=tuple(int(a) for a in doc.get("region_sizes", (1, 2))),
            shield_radii=tuple(int(x) for x in doc.get("shield_radii", (1, 2, 4))),
            t_grid=tuple(float(t) for t in doc.get("t_grid", (0.0, 0.5, 1.0, 1.5, 2.0))),
            z=float(doc.get("z", 3.0)),
            levels=int(doc.get("levels", 3)),
            num_codewords=int(doc.get("num_codewords", 4)),
            out_path=str(output.get("path", "out")),
            out_format=fmt,
        )

    def to_canonical_json(self) -> str:
        doc = {
            "experiment": self.experiment,
            "network": self.network,
            "seeds": list(self.seeds),
            "scales": list(self.scales),
            "region_sizes": list(self.region_sizes),
            "shield_radii": list(self.shield_radii),
            "t_grid": list(self.t_grid),
            "z": self.z,
            "levels": self.levels,
            "num_codewords": self.num_codewords,
            "output": {"path": self.out_path, "format": self.out_format},
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_canonical_json().encode()).hexdigest()


@dataclass
class RunManifest:
    """What a run produced: per-seed status and the output files."""

    experiment: str
    config_hash: str
    tool_version: str
    per_seed: dict
    wall_time_s: float
    outputs: list
    all_bounds_satisfied: bool
    columns: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    out_dir: Path | None = None

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "config_hash": self.config_hash,
            "tool_version": self.tool_version,
            "per_seed": self.per_seed,
            "wall_time_s": self.wall_time_s,
            "outputs": self.outputs,
            "all_bounds_satisfied": bool(self.all_bounds_satisfied),
        }


# ---------------------------------------------------------------------------
# Network construction


def _build_network(cfg: ExperimentConfig, seed: int) -> MeraNetwork:
    net = cfg.network
    kind = net["kind"]
    if kind == "trivial":
        return trivial_mera(int(net["num_layers"]), int(net.get("base_sites", 1)))
    if kind == "file":
        return network_from_json(Path(net["path"]).read_text())
    return random_mera(
        int(net.get("site_dim", 2)),
        int(net["num_layers"]),
        int(net.get("base_sites", 1)),
        seed=seed,
    )


def _contiguous_region(size: int) -> Region:
    return Region(0, tuple(range(size)))


# ---------------------------------------------------------------------------
# Experiment suites.  Each returns (columns, rows, bounds_ok) and may raise
# per-seed; the caller records the failure and moves on.


def _run_spectrum(cfg: ExperimentConfig):
    columns = [
        "seed",
        "lambda0_re",
        "lambda0_im",
        "lambda1_re",
        "lambda1_im",
        "gap",
        "nu",
        "is_regular",
        "defective",
        "radius_ok",
    ]
    rows, per_seed, ok = [], {}, True
    for seed in cfg.seeds:
        try:
            net = _build_network(cfg, seed)
            sd = spectral_decomposition(build_transfer_operator(net))
            rep = spectrum_report(sd)
            radius_ok = bool(abs(sd.eigenvalues[0]) <= 1.0 + SPECTRAL_RADIUS_TOL)
            ok = ok and radius_ok
            rows.append(
                {
                    "seed": seed,
                    "lambda0_re": sd.eigenvalues[0].real,
                    "lambda0_im": sd.eigenvalues[0].imag,
                    "lambda1_re": sd.eigenvalues[1].real,
                    "lambda1_im": sd.eigenvalues[1].imag,
                    "gap": rep["gap"],
                    "nu": rep["nu"] if rep["nu"] is not None else float("nan"),
                    "is_regular": rep["is_regular"],
                    "defective": rep["defective"],
                    "radius_ok": radius_ok,
                }
            )
            per_seed[str(seed)] = "ok"
        except ValueError as exc:
            per_seed[str(seed)] = f"error: {exc}"
    return columns, rows, ok, per_seed


def _run_decoupling(cfg: ExperimentConfig):
    columns = ["seed", "s", "A_size", "defect", "bound", "satisfied"]
    rows, per_seed, ok = [], {}, True
    for seed in cfg.seeds:
        try:
            net = _build_network(cfg, seed)
            sd = spectral_decomposition(build_transfer_operator(net))
            nu = sd.nu
            c_const = decoupling_constant(net)
            for s in cfg.scales:
                for a_size in cfg.region_sizes:
                    code = CodeSpec(net, s, num_codewords=cfg.num_codewords)
                    defect = decoupling_defect(code, _contiguous_region(a_size))
                    bound = c_const * 2.0 ** (-nu * (s - math.log2(a_size)))
                    sat = defect <= bound + 1e-8
                    ok = ok and sat
                    rows.append(
                        {
                            "seed": seed,
                            "s": s,
                            "A_size": a_size,
                            "defect": defect,
                            "bound": bound,
                            "satisfied": sat,
                        }
                    )
            per_seed[str(seed)] = "ok"
        except ValueError as exc:
            per_seed[str(seed)] = f"error: {exc}"
    return columns, rows, ok, per_seed


def _run_local(cfg: ExperimentConfig):
    columns = ["seed", "s", "x", "error", "bound", "satisfied"]
    rows, per_seed, ok = [], {}, True
    s = max(cfg.scales)
    for seed in cfg.seeds:
        try:
            net = _build_network(cfg, seed)
            code = CodeSpec(net, s, num_codewords=cfg.num_codewords)
            region = _contiguous_region(cfg.region_sizes[0])
            for x in cfg.shield_radii:
                rep = verify_local_correctability(code, region, x)
                ok = ok and rep.satisfied
                rows.append(
                    {
                        "seed": seed,
                        "s": s,
                        "x": x,
                        "error": rep.lhs,
                        "bound": rep.rhs,
                        "satisfied": rep.satisfied,
                    }
                )
            per_seed[str(seed)] = "ok"
        except ValueError as exc:
            per_seed[str(seed)] = f"error: {exc}"
    return columns, rows, ok, per_seed


def _run_union(cfg: ExperimentConfig):
    columns = ["seed", "eps_1", "eps_2", "joint", "bound", "satisfied"]
    rows, per_seed, ok = [], {}, True
    s = max(cfg.scales)
    x = cfg.shield_radii[0]
    for seed in cfg.seeds:
        try:
            net = _build_network(cfg, seed)
            code = CodeSpec(net, s, num_codewords=cfg.num_codewords)
            n = net.n_phys
            a1 = Region(0, (0,))
            a2 = Region(0, (n // 2,))
            b1 = shield_region(net, a1, x)
            b2 = shield_region(net, a2, x)
            rep = union_correctability(code, a1, b1, a2, b2)
            ok = ok and rep.satisfied
            rows.append(
                {
                    "seed": seed,
                    "eps_1": rep.constants["eps_1"],
                    "eps_2": rep.constants["eps_2"],
                    "joint": rep.lhs,
                    "bound": rep.rhs,
                    "satisfied": rep.satisfied,
                }
            )
            per_seed[str(seed)] = "ok"
        except ValueError as exc:
            per_seed[str(seed)] = f"error: {exc}"
    return columns, rows, ok, per_seed


def _run_distance(cfg: ExperimentConfig):
    columns = ["z", "alpha", "g", "pieces", "piece_size", "total_sites"]
    alpha = distance_exponent(cfg.z)
    region = _contiguous_region(max(cfg.region_sizes[-1], 1) * 64)
    per_level, _ = uberholography_partition(region, cfg.z, cfg.levels)
    rows = []
    for g, regions in enumerate(per_level):
        rows.append(
            {
                "z": cfg.z,
                "alpha": alpha,
                "g": g,
                "pieces": len(regions),
                "piece_size": len(regions[0].sites),
                "total_sites": sum(len(r.sites) for r in regions),
            }
        )
    return columns, rows, True, {"-": "ok"}


def _run_lightcone(cfg: ExperimentConfig):
    from .dynamics import heisenberg_chain, lightcone_sweep, pauli

    columns = ["seed", "t", "lhs", "rhs", "nu", "v", "xi", "c_prime", "satisfied"]
    rows, per_seed, ok = [], {}, True
    s = max(cfg.scales)
    for seed in cfg.seeds:
        try:
            net = _build_network(cfg, seed)
            n = net.n_phys
            code = CodeSpec(net, s, num_codewords=cfg.num_codewords)
            H = heisenberg_chain(n)
            mid = n // 2
            op1 = embed_operator(pauli("x"), [mid], n, net.site_dim)
            rng = rng_from_seed(code.sampler_seed)
            d_top = code.top_dim
            def pure():
                v = rng.normal(size=(d_top, 1)) + 1j * rng.normal(size=(d_top, 1))
                return v / np.linalg.norm(v)
            sweep = lightcone_sweep(
                code, H, op1, (mid,), pauli("z"), cfg.t_grid,
                c_rho=pure(), c_sigma=pure(),
            )
            for r in sweep:
                ok = ok and r["satisfied"]
                rows.append({"seed": seed, **r})
            per_seed[str(seed)] = "ok"
        except ValueError as exc:
            per_seed[str(seed)] = f"error: {exc}"
    return columns, rows, ok, per_seed


def _identity_residuals(net: MeraNetwork, seed: int) -> dict:
    """Residuals of the structural identities a network must satisfy:
    layer tensors isometric, coarse-graining consistent with dense
    encoding, and cone reduction matching the dense reduced state."""
    d = net.site_dim
    s = net.num_layers
    res = {}
    res["isometry-unitarity"] = max(
        float(np.abs(dagger(net.isometry) @ net.isometry - np.eye(d)).max()),
        float(
            np.abs(
                dagger(net.disentangler) @ net.disentangler - np.eye(d * d)
            ).max()
        ),
    )

    rng = rng_from_seed(seed + 77)
    n = net.n_phys
    m = rng.normal(size=(d * d, d * d)) + 1j * rng.normal(size=(d * d, d * d))
    op = (m + m.conj().T) / 2.0
    region = Region(0, (0, 1))
    asc, reg_s = ascend_operator(net, op, region, s)
    d_top = net.top_dim(s)
    phi = rng.normal(size=d_top) + 1j * rng.normal(size=d_top)
    phi /= np.linalg.norm(phi)
    psi = rng.normal(size=d_top) + 1j * rng.normal(size=d_top)
    psi /= np.linalg.norm(psi)
    enc_phi = encode_state(net, phi, s)
    enc_psi = encode_state(net, psi, s)
    applied = apply_operator_to_axes(
        op, enc_psi.reshape([d] * n), (0, 1), d
    ).reshape(-1)
    lhs = complex(enc_phi.conj() @ applied)
    top_sites = net.sites_at_scale(s)
    psi_top = psi.reshape([d] * top_sites)
    asc_applied = apply_operator_to_axes(
        asc, psi_top, tuple(reg_s.sites), d
    ).reshape(-1)
    rhs = complex(phi.conj() @ asc_applied)
    res["ascend-evaluation"] = abs(lhs - rhs)

    factor = code_factor(net, s, region)
    c = psi.reshape(d_top, 1)
    rho_thin = codeword_rdm(factor, c, keep_reference=False)
    vec = enc_psi.reshape(d * d, -1)
    rho_dense = vec @ vec.conj().T
    res["cone-reduction"] = float(
        np.abs(rho_thin.reshape(rho_dense.shape) - rho_dense).max()
    )
    return res


def _run_identities(cfg: ExperimentConfig):
    columns = ["seed", "identity", "residual", "ok"]
    rows, per_seed, all_ok = [], {}, True
    for seed in cfg.seeds:
        try:
            net = _build_network(cfg, seed)
            for name, residual in _identity_residuals(net, seed).items():
                good = residual <= IDENTITY_TOL
                all_ok = all_ok and good
                rows.append(
                    {"seed": seed, "identity": name, "residual": residual, "ok": good}
                )
            per_seed[str(seed)] = "ok"
        except ValueError as exc:
            per_seed[str(seed)] = f"error: {exc}"
    return columns, rows, all_ok, per_seed


_SUITES = {
    "spectrum": _run_spectrum,
    "decoupling": _run_decoupling,
    "local-correctability": _run_local,
    "union": _run_union,
    "distance": _run_distance,
    "lightcone": _run_lightcone,
    "identities": _run_identities,
}


# ---------------------------------------------------------------------------
# Serialization


def _fmt_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _rows_to_csv(columns, rows) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt_cell(row[c]) for c in columns))
    return "\n".join(lines) + "\n"


def _json_safe(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    return v


def _rows_to_json(columns, rows) -> str:
    doc = {
        "columns": list(columns),
        "rows": [{c: _json_safe(r[c]) for c in columns} for r in rows],
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def run(config: ExperimentConfig) -> RunManifest:
    """Execute the configured suite and write its data files plus a
    manifest.  Data files are byte-identical across reruns."""
    start = time.monotonic()
    suite = _SUITES[config.experiment]
    columns, rows, bounds_ok, per_seed = suite(config)
    out_dir = Path(config.out_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    ext = "json" if config.out_format == "json" else "csv"
    data_path = out_dir / f"{config.experiment}.{ext}"
    if ext == "json":
        data_path.write_text(_rows_to_json(columns, rows))
    else:
        data_path.write_text(_rows_to_csv(columns, rows))
    manifest = RunManifest(
        experiment=config.experiment,
        config_hash=config.config_hash(),
        tool_version=__version__,
        per_seed=per_seed,
        wall_time_s=time.monotonic() - start,
        outputs=[data_path.name],
        all_bounds_satisfied=bounds_ok,
        columns=list(columns),
        rows=rows,
        out_dir=out_dir,
    )
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest.to_dict(), sort_keys=True, indent=2) + "\n"
    )
    return manifest


_PLOT_COLUMNS = {
    "spectrum": ["seed", "gap", "nu", "is_regular"],
    "decoupling": ["seed", "s", "A_size", "defect", "bound"],
    "local-correctability": ["seed", "x", "error", "bound"],
    "union": ["seed", "eps_1", "eps_2", "joint", "bound"],
    "distance": ["z", "g", "pieces", "piece_size"],
    "lightcone": ["seed", "t", "lhs", "rhs", "nu", "v", "xi", "c_prime", "satisfied"],
    "identities": ["seed", "identity", "residual"],
}


def emit_plotdata(manifest: RunManifest) -> list[Path]:
    """Write a long-format CSV for external plotting and return the paths."""
    if manifest.out_dir is None:
        raise ConfigError("manifest has no output directory")
    columns = _PLOT_COLUMNS[manifest.experiment]
    path = manifest.out_dir / f"plot_{manifest.experiment}.csv"
    path.write_text(_rows_to_csv(columns, manifest.rows))
    manifest.outputs.append(path.name)
    return [path]


# ---------------------------------------------------------------------------
# Command line


def _parse_args(argv):
    parser = argparse.ArgumentParser(
        prog="meraqec",
        description="Verification suites for renormalization-circuit codes.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} suite")
        p.add_argument("--config", type=Path, default=None, help="JSON config file")
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument(
            "--seeds", type=str, default=None, help="comma-separated seed list"
        )
        p.add_argument("--format", choices=("json", "csv"), default=None)
        p.add_argument(
            "--plotdata", action="store_true", help="also write plotting CSVs"
        )
    return parser.parse_args(argv)


def _config_from_args(args) -> ExperimentConfig:
    doc = {}
    if args.config is not None:
        doc = json.loads(args.config.read_text())
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
    doc["experiment"] = args.experiment
    if args.seeds is not None:
        doc["seeds"] = [int(s) for s in args.seeds.split(",") if s != ""]
    if args.out is not None or args.format is not None:
        output = dict(doc.get("output", {}))
        if args.out is not None:
            output["path"] = str(args.out)
        if args.format is not None:
            output["format"] = args.format
        doc["output"] = output
    return ExperimentConfig.from_dict(doc)


def main(argv=None) -> int:
    args = _parse_args(sys.argv[1:] if argv is None else argv)
    try:
        config = _config_from_args(args)
        manifest = run(config)
        if args.plotdata:
            emit_plotdata(manifest)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for seed, status in manifest.per_seed.items():
        print(f"seed {seed}: {status}")
    print(
        f"{config.experiment}: {len(manifest.rows)} rows -> "
        f"{manifest.out_dir / manifest.outputs[0]}"
        f" (bounds {'satisfied' if manifest.all_bounds_satisfied else 'VIOLATED'})"
    )
    return 0 if manifest.all_bounds_satisfied else 2


if __name__ == "__main__":
    sys.exit(main())
