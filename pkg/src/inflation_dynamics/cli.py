"""Command-line driver.

Usage::

    inflation-dynamics synth --output fixtures/
    inflation-dynamics report --config fixtures/config.txt --output out/
    inflation-dynamics trajectory --config run.txt --set delta=2.5

Configuration is a ``key = value`` text file; ``--set key=value`` and the
named flags override it. Exit codes: 0 ok, 2 configuration error, 3 data
error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import logging
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, centrality, distance, optimizer, robustness, sectorcorr, spectrum, synth
from .errors import ConfigError, DataError, NumericalError
from .formatting import num, write_json
from .panel import format_date, load_csv, load_returns_csv, log_returns, normalized_trajectories, parse_date, write_csv

logger = logging.getLogger("inflation_dynamics")

VERBOSITY_ENV = "INFLATION_DYNAMICS_LOG"

PATH_KEYS = ("cpi", "equity_index", "sector_returns", "sector_map", "asset_returns")


def _int_list(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _float_list(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _choice(*options):
    def parse(text):
        t = str(text).strip()
        if t not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return t
    return parse


def _date(text):
    return parse_date(str(text))


def _positive(kind):
    def parse(text):
        v = kind(text)
        if not v > 0:
            raise ValueError("must be positive")
        return v
    return parse


# key -> (parser, default)
PARAMETERS = {
    "input_kind": (_choice("levels", "log_returns"), "levels"),
    "missing_policy": (_choice("reject", "drop_row"), "reject"),
    # trajectory
    "delta": (float, 2.5),
    "linkage": (_choice(*distance.LINKAGES), "average"),
    "clusters": (_positive(int), 3),
    "eigenvectors": (_bool, False),
    # centrality
    "centrality_windows": (_int_list, [60, 120]),
    "phi_max": (int, centrality.DEFAULT_PHI_MAX),
    "split_date": (_date, None),
    "partition_window": (_positive(int), 30),
    # robustness
    "min_obs": (_positive(int), robustness.MIN_JOINT_OBS),
    # sectorcorr
    "sector_window": (_positive(int), sectorcorr.DEFAULT_WINDOW),
    "sector_from": (_date, None),
    "sector_to": (_date, None),
    # optimize
    "core_weight": (float, 0.4),
    "lower": (float, 0.025),
    "upper": (float, 0.3),
    "risk_free": (float, 0.0025),
    "portfolio_window": (_positive(int), 250),
    "objective": (_choice(*optimizer.OBJECTIVES), "variance"),
    "cold_start": (_bool, False),
    "sweep": (_float_list, []),
}


@dataclass
class RunConfig:
    paths: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    output: Path | None = None

    def __getitem__(self, key):
        return self.params[key]

    def require(self, *roles):
        for role in roles:
            p = self.paths.get(role)
            if p is None:
                raise ConfigError(f"{role}: input path not configured")
            if not Path(p).exists():
                raise ConfigError(f"{role}: file not found: {p}")


def read_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    out = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out


def build_config(raw: dict, base_dir: Path | None = None) -> RunConfig:
    cfg = RunConfig()
    for key, value in raw.items():
        if key in PATH_KEYS:
            p = Path(value)
            if base_dir is not None and not p.is_absolute():
                p = base_dir / p
            cfg.paths[key] = p
        elif key == "output":
            p = Path(value)
            if base_dir is not None and not p.is_absolute():
                p = base_dir / p
            cfg.output = p
        elif key not in PARAMETERS:
            raise ConfigError(f"{key}: unknown configuration key")
    for key, (parse, default) in PARAMETERS.items():
        if key in raw and raw[key] not in ("", None):
            try:
                cfg.params[key] = parse(raw[key])
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from None
        else:
            cfg.params[key] = default
    if cfg["delta"] <= 0:
        raise ConfigError("delta: threshold must be positive")
    if cfg["phi_max"] < 0:
        raise ConfigError("phi_max: must be nonnegative")
    if not 0 <= cfg["core_weight"] <= 1:
        raise ConfigError("core_weight: must lie in [0, 1]")
    if any(w < 3 for w in cfg["centrality_windows"]):
        raise ConfigError("centrality_windows: every window must be >= 3")
    return cfg


# ---------------------------------------------------------------------------
# helpers


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(v):
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, tuple):
        return format_date(v)
    return v


class Run:
    """Output directory plus its manifest; the manifest is written before any analysis output."""

    def __init__(self, command: str, cfg: RunConfig, roles):
        if cfg.output is None:
            raise ConfigError("output: no output directory given")
        self.dir = Path(cfg.output)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.outputs = []
        self.manifest = {
            "command": command,
            "tool_version": __version__,
            "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "status": "running",
            "parameters": {k: _jsonable(v) for k, v in sorted(cfg.params.items())},
            "inputs": {
                r: {"path": str(cfg.paths[r]), "sha256": _sha256(cfg.paths[r])}
                for r in roles if r in cfg.paths
            },
            "outputs": [],
        }
        self._write_manifest()

    def _write_manifest(self):
        write_json(self.manifest, self.dir / "manifest.json")

    def path(self, name: str) -> Path:
        p = self.dir / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.outputs.append(name)
        return p

    def finish(self):
        self.manifest["status"] = "complete"
        self.manifest["outputs"] = sorted(self.outputs)
        self._write_manifest()


def _load(cfg: RunConfig, role: str, frequency: str):
    path = cfg.paths[role]
    if cfg["input_kind"] == "log_returns":
        return load_returns_csv(path, frequency, cfg["missing_policy"])
    return log_returns(load_csv(path, frequency, cfg["missing_policy"]))


def _safe_name(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


# ---------------------------------------------------------------------------
# commands


def cmd_trajectory(cfg: RunConfig) -> list[str]:
    cfg.require("cpi")
    run = Run("trajectory", cfg, ["cpi"])
    returns = _load(cfg, "cpi", "monthly")
    dist = distance.trajectory_distance_matrix(normalized_trajectories(returns))
    dendro = distance.hierarchical_cluster(dist, cfg["linkage"])
    spec = spectrum.eigen_decompose(dist)
    count = spectrum.similarity_count(spec, cfg["delta"])
    k = min(cfg["clusters"], dist.n)
    distance.write_distance_csv(dist, run.path("distance_matrix.csv"))
    distance.write_dendrogram_json(dendro, run.path("dendrogram.json"))
    spectrum.write_spectrum_csv(spec, run.path("spectrum.csv"))
    if cfg["eigenvectors"]:
        spectrum.write_eigenvectors_csv(spec, dist.entities, run.path("eigenvectors.csv"))
    write_json(
        {
            "threshold": cfg["delta"],
            "k": count.k,
            "similar_entities": count.similar_entities,
            "summary": count.describe(),
            "operator_norm": num(spectrum.operator_norm(dist)),
            "clusters": cut_summary(dendro, k),
        },
        run.path("similarity.json"),
    )
    run.finish()
    return run.outputs


def cut_summary(dendro, k):
    return {"k": k, "partition": distance.cut_clusters(dendro, k)}


def cmd_centrality(cfg: RunConfig) -> list[str]:
    cfg.require("cpi")
    run = Run("centrality", cfg, ["cpi"])
    returns = _load(cfg, "cpi", "monthly")
    phi_max = cfg["phi_max"]
    for window in cfg["centrality_windows"]:
        slopes, report = centrality.panel_centrality(returns, window, phi_max)
        tag = report.to_json()["model"] or f"w{window}"
        centrality.write_slopes_csv(slopes, run.path(f"slopes_{tag}.csv"), returns.frequency)
        distance.write_distance_csv(report.offsets, run.path(f"offsets_{tag}.csv"))
        write_json(report.to_json(), run.path(f"centrality_{tag}.json"))
        dendro = distance.hierarchical_cluster(report.offsets, cfg["linkage"])
        distance.write_dendrogram_json(dendro, run.path(f"offsets_dendrogram_{tag}.json"))
    if cfg["split_date"] is not None:
        first, second = centrality.partitioned_centrality(
            returns, cfg["split_date"], cfg["partition_window"], phi_max
        )
        for label, report in (("1", first), ("2", second)):
            js = report.to_json()
            js["partition"] = label
            write_json(js, run.path(f"centrality_partition_{label}.json"))
    run.finish()
    return run.outputs


def cmd_robustness(cfg: RunConfig) -> list[str]:
    cfg.require("cpi", "equity_index")
    run = Run("robustness", cfg, ["cpi", "equity_index"])
    infl = _load(cfg, "cpi", "monthly")
    equity = _load(cfg, "equity_index", "monthly")
    scores, samples = robustness.robustness_table(infl, equity, cfg["min_obs"])
    if not scores:
        raise DataError("no entity could be scored")
    robustness.write_robustness_csv(scores, run.path("robustness.csv"))
    for name, (extreme, stable) in samples.items():
        robustness.write_samples_csv(extreme, stable, run.path(f"samples/{_safe_name(name)}.csv"))
    run.finish()
    return run.outputs


def cmd_sectorcorr(cfg: RunConfig) -> list[str]:
    cfg.require("sector_returns", "sector_map")
    run = Run("sectorcorr", cfg, ["sector_returns", "sector_map"])
    returns = _load(cfg, "sector_returns", "daily")
    smap = sectorcorr.SectorMap.read_csv(cfg.paths["sector_map"])
    averages = []
    for sector in smap.sectors:
        members = [e for e in smap.members(sector) if e in returns.entities]
        if len(members) < 2:
            logger.warning("sector %s has %d member(s) with data; skipped", sector, len(members))
            continue
        rc = sectorcorr.rolling_correlation(returns, smap, sector, cfg["sector_window"])
        sectorcorr.write_rolling_csv(rc, run.path(f"rolling/{_safe_name(sector)}.csv"), returns.frequency)
        averages.append(sectorcorr.average_sector_correlation(rc, cfg["sector_from"], cfg["sector_to"]))
    if not averages:
        raise DataError("no sector has two or more members with data")
    sectorcorr.write_summary_csv(averages, run.path("sector_summary.csv"))
    run.finish()
    return run.outputs


def cmd_optimize(cfg: RunConfig) -> list[str]:
    cfg.require("asset_returns")
    run = Run("optimize", cfg, ["asset_returns"])
    returns = _load(cfg, "asset_returns", "daily")
    spec = optimizer.PortfolioSpec(
        returns.entities,
        fixed_core_weight=cfg["core_weight"],
        lower=cfg["lower"],
        upper=cfg["upper"],
        risk_free=cfg["risk_free"],
        window=cfg["portfolio_window"],
        objective=cfg["objective"],
    )
    spec.check_feasible()
    traj = optimizer.rolling_optimize(returns, spec, cold_start=cfg["cold_start"])
    optimizer.write_trajectory_csv(traj, run.path("weights.csv"), returns.frequency)
    optimizer.write_stats_csv(optimizer.weight_stats(traj), run.path("weight_stats.csv"))
    if cfg["sweep"]:
        rows = optimizer.sensitivity_sweep(returns, spec, cfg["sweep"])
        optimizer.write_sweep_csv(rows, spec.assets, run.path("sweep.csv"))
    run.finish()
    return run.outputs


COMMANDS = {
    "trajectory": (cmd_trajectory, ("cpi",)),
    "centrality": (cmd_centrality, ("cpi",)),
    "robustness": (cmd_robustness, ("cpi", "equity_index")),
    "sectorcorr": (cmd_sectorcorr, ("sector_returns", "sector_map")),
    "optimize": (cmd_optimize, ("asset_returns",)),
}


def cmd_report(cfg: RunConfig) -> list[str]:
    """Run every analysis whose inputs are configured, each into its own subdirectory."""
    if cfg.output is None:
        raise ConfigError("output: no output directory given")
    ran = []
    for name, (fn, roles) in COMMANDS.items():
        if not all(r in cfg.paths for r in roles):
            logger.info("report: %s skipped (inputs not configured)", name)
            continue
        sub = RunConfig(cfg.paths, cfg.params, Path(cfg.output) / name)
        fn(sub)
        ran.append(name)
    if not ran:
        raise ConfigError("report: no analysis has its inputs configured")
    return ran


def cmd_synth(output: Path, seed: int = 0) -> list[str]:
    """Write the synthetic fixtures plus a ready-to-run config file."""
    output.mkdir(parents=True, exist_ok=True)
    cpi = synth.cpi_panel(seed)
    write_csv(cpi, output / "cpi.csv")
    write_csv(synth.equity_panel(seed + 1, cpi), output / "equity.csv")
    prices, smap = synth.sector_prices(seed + 2)
    write_csv(prices, output / "sector_prices.csv")
    with (output / "sector_map.csv").open("w", encoding="utf-8") as fh:
        fh.write("entity,sector\n")
        for e, s in smap.mapping.items():
            fh.write(f"{e},{s}\n")
    write_csv(synth.asset_prices(seed + 3), output / "asset_prices.csv")
    (output / "config.txt").write_text(
        "# synthetic fixtures; paths are relative to this file\n"
        "cpi = cpi.csv\n"
        "equity_index = equity.csv\n"
        "sector_returns = sector_prices.csv\n"
        "sector_map = sector_map.csv\n"
        "asset_returns = asset_prices.csv\n"
        "split_date = 1990-01\n"
        "sweep = 0.2, 0.3, 0.4, 0.5\n",
        encoding="utf-8",
    )
    return ["cpi.csv", "equity.csv", "sector_prices.csv", "sector_map.csv", "asset_prices.csv", "config.txt"]


# ---------------------------------------------------------------------------
# entry point

FLAG_KEYS = {
    "delta": float, "linkage": str, "phi_max": int, "objective": str, "core_weight": float,
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="inflation-dynamics", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in (*COMMANDS, "report"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="key = value configuration file")
        sp.add_argument("--output", help="output directory (overrides config)")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
        for role in PATH_KEYS:
            sp.add_argument(f"--{role.replace('_', '-')}", dest=role)
        for key, kind in FLAG_KEYS.items():
            sp.add_argument(f"--{key.replace('_', '-')}", dest=key, type=kind)
        sp.add_argument("--cold-start", dest="cold_start", action="store_const", const="true")
    sp = sub.add_parser("synth")
    sp.add_argument("--output", required=True)
    sp.add_argument("--seed", type=int, default=0)
    return p


def _raw_config(args) -> tuple[dict, Path | None]:
    raw, base = {}, None
    if args.config:
        raw = read_config_file(args.config)
        base = Path(args.config).resolve().parent
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    for key in (*PATH_KEYS, *FLAG_KEYS, "cold_start"):
        v = getattr(args, key, None)
        if v is not None:
            overrides[key] = str(v)
    # command-line paths are relative to the working directory
    for key in (*PATH_KEYS,):
        if key in overrides:
            overrides[key] = str(Path(overrides[key]).resolve())
    if args.output:
        overrides["output"] = str(Path(args.output).resolve())
    raw.update(overrides)
    return raw, base


def _setup_logging():
    level = os.environ.get(VERBOSITY_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)


def main(argv=None) -> int:
    _setup_logging()
    args = _parser().parse_args(argv)
    try:
        if args.command == "synth":
            for name in cmd_synth(Path(args.output), args.seed):
                print(Path(args.output) / name)
            return 0
        raw, base = _raw_config(args)
        cfg = build_config(raw, base)
        if args.command == "report":
            ran = cmd_report(cfg)
            print("ran: " + ", ".join(ran))
        else:
            for name in COMMANDS[args.command][0](cfg):
                print(Path(cfg.output) / name)
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
