"""Command line front end: configuration, experiment dispatch, serialization.

Every run is reproducible from the resolved configuration plus the seed; the
configuration is echoed into every output (comment lines in CSV, a config
object in JSON).  Options come from a flat key=value config file, overridden
by command line flags.  Numeric CSV cells use 17 significant digits so values
round-trip exactly.

Output routing: with --out PATH both PATH.csv and PATH.json are written
(PATH ending in .csv or .json selects just that one); without --out the
format picked by --format goes to stdout.  All computation and validation
happen before the first byte is written, so a failing run leaves no partial
files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .asymptotics import laplace_ratio
from .fields import (
    FieldStats,
    MissingMomentError,
    ParameterError,
    SpecError,
    StatsSchedule,
    field_stats,
    parse_dist,
    sample_field,
    schedule_stats,
    stats_arrays,
    t_plus,
)
from .gibbs import UnsupportedStatsError, log_partition, weight_plus_profile
from .kernels import backend_name
from .metastate import (
    PhaseError,
    arcsine_cdf,
    aw_experiment,
    cesaro_miss_rate,
    csd_search,
    default_dictionary,
    fingerprint_gibbs,
    ns_metastate,
    sign_times,
    triviality_check,
    walk_target,
)
from .numerics import RngStream, ks_distance
from .tilting import ModelParams, beta_critical, classify_phase, maximizers, psi

__all__ = ["main", "run", "build_identifier"]

_COMMANDS = ("phase", "free-energy", "weights", "gibbs", "laplace", "metastate")
_MODES = ("aw", "ns", "arcsine", "csd", "triviality", "conditioning")

# keys recognized in config files, mirrored by the long flags
_KEYS = ("beta", "J", "dist", "schedule", "n", "N", "replicas", "seed",
         "threads", "samples", "mode", "target", "tol", "n_max",
         "filter_width", "delta", "exact", "format", "out")


def build_identifier() -> str:
    return f"rfmfs-{__version__}+{backend_name()}"


class CliError(ValueError):
    """Configuration problem: bad key, bad value, or a missing required key."""


def _fmt(x) -> str:
    return format(float(x), ".17g")


# ------------------------------------------------------------ configuration

def read_config_file(path: str) -> dict:
    """Flat key=value lines; '#' starts a comment, blank lines ignored."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliError(f"{path}:{ln}: expected key=value, got {raw.strip()!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _KEYS:
                raise CliError(f"{path}:{ln}: unknown key {key!r}")
            out[key] = val
    return out


def parse_schedule(text: str) -> StatsSchedule:
    """'m_par,m_perp:g_par,g_perp:delta' -> deterministic statistics path."""
    parts = text.strip().split(":")
    if len(parts) != 3:
        raise CliError(f"schedule needs m:gamma:delta, got {text!r}")
    try:
        m = tuple(float(v) for v in parts[0].split(","))
        g = tuple(float(v) for v in parts[1].split(","))
        d = float(parts[2])
    except ValueError as exc:
        raise CliError(f"non-numeric value in schedule {text!r}") from exc
    if len(m) != 2 or len(g) != 2:
        raise CliError(f"schedule m and gamma need two components, got {text!r}")
    return StatsSchedule(m, g, d)


_PARSERS = {
    "beta": float, "J": float, "target": float, "tol": float,
    "filter_width": float, "delta": float,
    "N": int, "replicas": int, "seed": int, "threads": int,
    "samples": int, "n_max": int,
    "dist": str, "schedule": str, "mode": str, "format": str, "out": str,
    "n": lambda s: [int(v) for v in str(s).split(",")],
    "exact": lambda s: str(s).lower() in ("1", "true", "yes"),
}

_DEFAULTS = {
    "seed": 0,
    "threads": max(1, os.cpu_count() or 1),
    "samples": 4000,
    "tol": 0.05,
    "filter_width": 0.5,
    "format": "json",
    "exact": False,
}


def resolve_config(command: str, cli: dict, file_cfg: dict) -> dict:
    """Merge file values under explicit flags, coerce types, apply defaults."""
    cfg = {"command": command}
    for key in _KEYS:
        val = cli.get(key)
        if val is None:
            val = file_cfg.get(key)
        if val is None:
            val = _DEFAULTS.get(key)
        if val is None:
            continue
        if isinstance(val, str) or key == "n":
            try:
                val = _PARSERS[key](val)
            except (ValueError, TypeError) as exc:
                raise CliError(f"bad value for key {key!r}: {val!r}") from exc
        cfg[key] = val
    if cfg.get("format") not in ("csv", "json"):
        raise CliError(f"bad value for key 'format': {cfg.get('format')!r}")
    cfg["_format_given"] = cli.get("format") is not None or "format" in file_cfg
    return cfg


def _require(cfg: dict, *keys: str):
    for key in keys:
        if key not in cfg:
            raise CliError(f"missing required key: {key!r} "
                           f"(flag --{key.replace('_', '-')})")


def _params(cfg: dict) -> ModelParams:
    _require(cfg, "beta", "J")
    return ModelParams(cfg["beta"], cfg["J"])


def _echo(cfg: dict) -> dict:
    # threads and the output path steer execution, not the experiment, and
    # would break byte-identity of reruns
    skip = ("out", "threads")
    return {k: cfg[k] for k in ("command", *_KEYS)
            if k in cfg and k not in skip}


# -------------------------------------------------------- stats resolution

def _stats_source(cfg: dict):
    """(kind, object): a sampled field prefix scan or a schedule path."""
    if "schedule" in cfg:
        return "schedule", parse_schedule(cfg["schedule"])
    _require(cfg, "dist")
    return "dist", parse_dist(cfg["dist"])


def _stats_at(cfg: dict, ns: Sequence[int]):
    """FieldStats at each n, drawn once per seed for field sources."""
    kind, src = _stats_source(cfg)
    if kind == "schedule":
        return [schedule_stats(src, n) for n in ns], src.m
    field = sample_field(src, max(ns), RngStream(cfg["seed"]))
    return [field_stats(field, n) for n in ns], src.m_limit()


# ------------------------------------------------------------ serialization

def _csv_text(cfg: dict, header: Sequence[str], rows: Sequence[Sequence]) -> str:
    lines = [f"# build={build_identifier()}"]
    for k, v in _echo(cfg).items():
        lines.append(f"# {k}={v}")
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(c if isinstance(c, str) else _fmt(c) for c in row))
    return "\n".join(lines) + "\n"


def _json_text(cfg: dict, results: dict, runtime: float) -> str:
    doc = {"build": build_identifier(), "config": _echo(cfg),
           "results": results, "runtime_seconds": round(runtime, 6)}
    return json.dumps(doc, indent=2) + "\n"


def _emit(cfg: dict, header, rows, results: dict, runtime: float,
          stdout) -> None:
    csv_text = _csv_text(cfg, header, rows)
    json_text = _json_text(cfg, results, runtime)
    out = cfg.get("out")
    if out is None:
        stdout.write(csv_text if cfg["format"] == "csv" else json_text)
        return
    if out.endswith(".csv"):
        targets = [(out, csv_text)]
    elif out.endswith(".json"):
        targets = [(out, json_text)]
    else:
        targets = [(out + ".csv", csv_text), (out + ".json", json_text)]
    for path, text in targets:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


# ---------------------------------------------------------------- commands

def _cmd_phase(cfg: dict, stdout):
    params = _params(cfg)
    _require(cfg, "dist")
    spec = parse_dist(cfg["dist"])
    phase = classify_phase(params, spec)
    m = spec.m_limit()
    bc = beta_critical(params.J, m[1]) if m[1] > 0 else None
    mset = maximizers(params, m)
    if mset.is_two:
        branches = [("plus", mset.z_plus), ("minus", mset.z_minus)]
        human = (f"{phase.value}, beta_c = {bc:.4g}, "
                 f"z+ = ({mset.z_plus.x:.4g}, {mset.z_plus.y:.4g}), "
                 f"z- = ({mset.z_minus.x:.4g}, {mset.z_minus.y:.4g})")
    else:
        branches = [("star", mset.z_star)]
        bc_part = f"beta_c = {bc:.4g}, " if bc is not None else ""
        human = (f"{phase.value}, {bc_part}"
                 f"z* = ({mset.z_star.x:.4g}, {mset.z_star.y:.4g})")
    rows = [(phase.value, bc if bc is not None else float("nan"),
             name, z.x, z.y) for name, z in branches]
    results = {"summary": human, "phase": phase.value, "beta_c": bc,
               "maximizers": {name: [z.x, z.y] for name, z in branches},
               "psi_at_maximizer": psi(branches[0][1], params, m)}
    return ("phase", "beta_c", "branch", "z_x", "z_y"), rows, results


def _cmd_free_energy(cfg: dict, stdout):
    params = _params(cfg)
    _require(cfg, "n")
    ns = cfg["n"]
    stats, m = _stats_at(cfg, ns)
    rows, per_n = [], []
    for n, st in zip(ns, stats):
        lz = log_partition(n, params, st)
        rows.append((n, st.m_par, st.m_perp, lz, lz / n))
        per_n.append({"n": n, "log_partition": lz, "density": lz / n})
    mset = maximizers(params, m)
    z = mset.z_plus if mset.is_two else mset.z_star
    results = {"per_n": per_n, "limit_density": psi(z, params, m)}
    return ("n", "m_par", "m_perp", "log_partition", "density"), rows, results


def _cmd_weights(cfg: dict, stdout):
    params = _params(cfg)
    _require(cfg, "n")
    ns = cfg["n"]
    stats, _ = _stats_at(cfg, ns)
    arr = np.asarray(ns, dtype=np.int64)
    mp = np.array([s.m_par for s in stats])
    mq = np.array([s.m_perp for s in stats])
    w = weight_plus_profile(arr, params, mp, mq)
    rows = [(n, a, b, c) for n, a, b, c in zip(ns, mp, mq, w)]
    results = {"per_n": [{"n": int(n), "w_plus": float(c)}
                         for n, c in zip(ns, w)]}
    return ("n", "m_par", "m_perp", "w_plus"), rows, results


def _cmd_gibbs(cfg: dict, stdout):
    params = _params(cfg)
    _require(cfg, "dist", "n")
    spec = parse_dist(cfg["dist"])
    ns = cfg["n"]
    rng = RngStream(cfg["seed"])
    field = sample_field(spec, max(ns), rng.substream(0))
    dic = default_dictionary()
    labels = [str(obs) for obs in dic]
    rows, per_n = [], []
    for i, n in enumerate(ns):
        fp, ses = fingerprint_gibbs(field, n, params, dic,
                                    samples=cfg["samples"],
                                    rng=rng.substream(1 + i))
        for lab, v, se in zip(labels, fp.values, ses):
            rows.append((n, lab, v, se))
        per_n.append({"n": n, "estimates": list(map(float, fp.values)),
                      "stderr": list(map(float, ses))})
    results = {"observables": labels, "per_n": per_n}
    return ("n", "observable", "estimate", "stderr"), rows, results


def _cmd_laplace(cfg: dict, stdout):
    params = _params(cfg)
    _require(cfg, "n")
    ns = cfg["n"]
    stats, m = _stats_at(cfg, ns)
    mset = maximizers(params, m)
    z = mset.z_plus if mset.is_two else mset.z_star
    rows, per_n = [], []
    for n, st in zip(ns, stats):
        ratio, limit = laplace_ratio(n, params, st, z, "half_plus")
        rows.append((n, ratio, limit, abs(ratio - limit) / limit))
        per_n.append({"n": n, "ratio": ratio, "limit": limit})
    return ("n", "ratio", "limit", "rel_error"), rows, {"per_n": per_n}


def _meta_aw(cfg: dict):
    params = _params(cfg)
    _require(cfg, "dist", "N", "replicas")
    spec = parse_dist(cfg["dist"])
    s = aw_experiment(spec, cfg["N"], cfg["replicas"], params,
                      RngStream(cfg["seed"]), threads=cfg["threads"])
    k = s.fingerprints.shape[1]
    header = ("replica", "w_plus") + tuple(f"fingerprint_{j+1}" for j in range(k))
    rows = [(r, s.w_plus[r], *s.fingerprints[r]) for r in range(s.replicas)]
    results = {"fraction_plus": s.fraction_plus,
               "mean_fingerprint": list(map(float, s.mean_fingerprint))}
    return header, rows, results


def _meta_ns(cfg: dict):
    params = _params(cfg)
    _require(cfg, "dist", "N")
    spec = parse_dist(cfg["dist"])
    rng = RngStream(cfg["seed"])
    field = sample_field(spec, cfg["N"], rng.substream(0))
    mode = "exact" if cfg["exact"] else "surrogate"
    meta = ns_metastate(field, cfg["N"], params, mode=mode,
                        rng=rng.substream(1), samples=cfg["samples"])
    header = ("n", "w_plus", "source") + tuple(
        f"value_{j+1}" for j in range(meta.atom_matrix().shape[1]))
    rows = [(a.source[1], meta.plus_weights[i], a.source[0], *a.values)
            for i, a in enumerate(meta.atoms)]
    results = {"fraction_plus": meta.fraction_plus(),
               "t_plus": t_plus(field, cfg["N"])}
    return header, rows, results


def _meta_arcsine(cfg: dict):
    # no model parameters: the sign time is a walk functional
    _require(cfg, "dist", "N", "replicas")
    spec = parse_dist(cfg["dist"])
    ts = sign_times(spec, cfg["N"], cfg["replicas"], RngStream(cfg["seed"]),
                    threads=cfg["threads"])
    rows = [(r, t) for r, t in enumerate(ts)]
    results = {"ks": ks_distance(ts, arcsine_cdf)}
    return ("replica", "t_plus"), rows, results


def _meta_csd(cfg: dict):
    params = _params(cfg)
    _require(cfg, "dist", "target", "n_max")
    spec = parse_dist(cfg["dist"])
    mset = maximizers(params, spec.m_limit())
    field = sample_field(spec, cfg["n_max"], RngStream(cfg["seed"]))
    found = csd_search(field, cfg["target"], params, mset, cfg["n_max"],
                       cfg["tol"], filter_width=cfg["filter_width"])
    level = walk_target(cfg["target"], params, mset)
    if found is None:
        rows = [(cfg["target"], cfg["tol"], cfg["n_max"], "", "")]
    else:
        mp, mq = stats_arrays(field, found, found)
        w = float(weight_plus_profile(np.array([found]), params, mp, mq)[0])
        rows = [(cfg["target"], cfg["tol"], cfg["n_max"], found, w)]
    results = {"found_n": found, "walk_level": level}
    return ("target", "tol", "n_max", "found_n", "w_plus"), rows, results


def _meta_triviality(cfg: dict):
    params = _params(cfg)
    _require(cfg, "dist", "n")
    spec = parse_dist(cfg["dist"])
    rep = triviality_check(spec, params, cfg["n"], rng=RngStream(cfg["seed"]))
    rows = [(n, d) for n, d in zip(rep.n_grid, rep.deviations)]
    results = {"phase": rep.phase.value,
               "max_deviation": rep.max_deviation,
               "deviations": list(map(float, rep.deviations))}
    return ("n", "deviation"), rows, results


def _meta_conditioning(cfg: dict):
    _require(cfg, "N", "delta")
    if "schedule" in cfg:
        src = parse_schedule(cfg["schedule"])
        miss = cesaro_miss_rate(src, cfg["N"], cfg["delta"])
    else:
        _require(cfg, "dist")
        spec = parse_dist(cfg["dist"])
        field = sample_field(spec, cfg["N"], RngStream(cfg["seed"]))
        miss = cesaro_miss_rate(field, cfg["N"], cfg["delta"])
    rows = [(cfg["N"], cfg["delta"], miss)]
    return ("N", "delta", "miss_rate"), rows, {"miss_rate": miss}


_META = {"aw": _meta_aw, "ns": _meta_ns, "arcsine": _meta_arcsine,
         "csd": _meta_csd, "triviality": _meta_triviality,
         "conditioning": _meta_conditioning}


def _cmd_metastate(cfg: dict, stdout):
    _require(cfg, "mode")
    if cfg["mode"] not in _MODES:
        raise CliError(f"bad value for key 'mode': {cfg['mode']!r} "
                       f"(choose from {', '.join(_MODES)})")
    return _META[cfg["mode"]](cfg)


_DISPATCH = {"phase": _cmd_phase, "free-energy": _cmd_free_energy,
             "weights": _cmd_weights, "gibbs": _cmd_gibbs,
             "laplace": _cmd_laplace, "metastate": _cmd_metastate}


# ------------------------------------------------------------------ driver

def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value config file")
    common.add_argument("--beta", help="inverse temperature")
    common.add_argument("--J", help="coupling strength")
    common.add_argument("--dist", help="field distribution, e.g. rademacher:1")
    common.add_argument("--schedule",
                        help="deterministic stats path m_par,m_perp:g_par,g_perp:delta")
    common.add_argument("--n", help="volume or comma list of volumes")
    common.add_argument("--N", help="scan depth / replica volume")
    common.add_argument("--replicas", help="independent field draws")
    common.add_argument("--seed", help="root seed (default 0)")
    common.add_argument("--threads", help="worker count for replica loops")
    common.add_argument("--samples", help="Monte Carlo draws per estimate")
    common.add_argument("--format", choices=("csv", "json"),
                        help="stdout format when --out is absent")
    common.add_argument("--out", help="output path; writes PATH.csv and PATH.json")
    parser = argparse.ArgumentParser(
        prog="rfmfs",
        description="Random-field spherical model experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("phase", "free-energy", "weights", "gibbs", "laplace"):
        sub.add_parser(name, parents=[common])
    meta = sub.add_parser("metastate", parents=[common])
    meta.add_argument("--mode", choices=_MODES)
    meta.add_argument("--target", help="weight level for the csd search")
    meta.add_argument("--tol", help="csd acceptance half-width (default 0.05)")
    meta.add_argument("--n-max", dest="n_max", help="csd search horizon")
    meta.add_argument("--filter-width", dest="filter_width",
                      help="csd walk prefilter half-width (default 0.5)")
    meta.add_argument("--delta", help="conditioning band exponent")
    meta.add_argument("--exact", action="store_const", const="true",
                      help="ns mode: Monte Carlo atoms instead of surrogates")
    return parser


def run(argv: Optional[Sequence[str]] = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    args = vars(_build_parser().parse_args(argv))
    command = args.pop("command")
    file_cfg = read_config_file(args["config"]) if args.get("config") else {}
    args.pop("config", None)
    cfg = resolve_config(command, args, file_cfg)
    t0 = time.perf_counter()
    header, rows, results = _DISPATCH[command](cfg, stdout)
    if (command == "phase" and cfg.get("out") is None
            and not cfg["_format_given"]):
        stdout.write(results["summary"] + "\n")  # the human-readable default
    else:
        _emit(cfg, header, rows, results, time.perf_counter() - t0, stdout)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        return run(argv)
    except CliError as exc:
        print(f"rfmfs: {exc}", file=sys.stderr)
        return 2
    except (SpecError, ParameterError, PhaseError, MissingMomentError,
            UnsupportedStatsError, ValueError, OSError) as exc:
        print(f"rfmfs: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
