"""Command-line interface.

Exit codes: 0 success, 2 usage/configuration, 3 data, 4 numerical
non-convergence, 5 geometry failure. Progress goes to stderr; stdout carries
data only when no --out-dir is given.

The default seed is 0 unless the VORONOI_EXTREMES_SEED environment variable
is set.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .distributions import FAMILIES, THEORY_NAMES, GGParams, canonical_family, gg_moment, theory_cdf
from .empirics import DEFAULT_BINS
from .errors import ConfigError, DataError, VoronoiExtremesError
from .extremes import R_CAP_MAX, R_CAP_MIN, R_CAP_VERTEX, run_1d_experiment, run_2d_experiment
from .fitting import fit_mle, rank_families
from .io import (
    accumulator_bundle,
    build_manifest,
    csv_text,
    ecdf_rows,
    json_text,
    load_accumulators,
    load_raw_values,
    sha256_file,
    write_csv,
    write_json,
    write_text,
)
from .ppp import SimConfig1D, SimConfig2D

log = logging.getLogger("voronoi_extremes")

SEED_ENV = "VORONOI_EXTREMES_SEED"
MANIFEST = "manifest.json"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw, 0)
    except ValueError:
        raise ConfigError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _families(text: str) -> list[str]:
    names = [t for t in (s.strip() for s in text.split(",")) if t]
    if not names:
        raise ConfigError("--families is empty")
    return [canonical_family(n) for n in names]


def _orders(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"--orders must be comma-separated numbers, got {text!r}") from None


def _finish(args, command: str, config: dict, outputs: list, started, wall):
    if args.out_dir is None:
        return
    manifest = build_manifest(command, args.argv, config, outputs, started, wall)
    path = write_json(Path(args.out_dir) / MANIFEST, manifest)
    log.info("wrote %s", path)


# ------------------------------------------------------------------ commands

def cmd_simulate_2d(args) -> int:
    started = datetime.now(timezone.utc)
    config = SimConfig2D(lam=args.lam, area=args.area, windows=args.windows,
                         seed=args.seed, shards=args.shards, guard=args.guard)
    raw_path = None
    if args.raw:
        if args.out_dir is None:
            raise ConfigError("--raw needs --out-dir")
        raw_path = Path(args.out_dir) / "raw_extremes.csv"
        raw_path.parent.mkdir(parents=True, exist_ok=True)
    log.info("simulating %d window(s) of area %g at lambda=%g", config.windows, config.area, config.lam)
    r_min, r_max, r_bar, report = run_2d_experiment(
        config, bins=args.bins, caps=(args.cap_min, args.cap_max, args.cap_vertex),
        raw_path=raw_path)
    for flag in report.grid_flags:
        log.warning(flag)
    report_dict = report.to_dict(include_timing=False)
    report_dict["moments"] = {k: dict(zip(("mean", "second"), a.moments()))
                              for k, a in (("r_min", r_min), ("r_max", r_max), ("r_bar", r_bar))
                              if a.n}
    if r_bar.n:
        report_dict["sup_distance_to_theory"] = {"vertex2d": float(np.max(np.abs(
            r_bar.ecdf_on_grid() - theory_cdf("vertex2d", r_bar.grid))))}
    log.info("%d interior cells of %d (%.4f)", report.interior_cells,
             report.generated_cells, report.interior_fraction)
    if args.out_dir is None:
        sys.stdout.write(json_text(report_dict))
        return 0
    out = Path(args.out_dir)
    outputs = []
    streams = {"r_min": r_min, "r_max": r_max, "r_bar": r_bar}
    if args.format == "csv":
        for name, acc in streams.items():
            if not acc.n:
                continue
            if name == "r_bar":
                rows = ecdf_rows(acc, lambda x: theory_cdf("vertex2d", x))
                outputs.append(write_csv(out / "ecdf_r_bar.csv", ["r", "ecdf", "theory_vertex2d"], rows))
            else:
                outputs.append(write_csv(out / f"ecdf_{name}.csv", ["r", "ecdf"], ecdf_rows(acc)))
    else:
        grids = {name: {"r": acc.grid, "ecdf": acc.ecdf_on_grid()}
                 for name, acc in streams.items() if acc.n}
        outputs.append(write_json(out / "ecdf.json", grids))
    outputs.append(write_json(out / "accumulators.json", accumulator_bundle(streams)))
    outputs.append(write_json(out / "report.json", report_dict))
    if raw_path is not None:
        outputs.append(raw_path)
    _finish(args, "simulate-2d", {**config.to_dict(), "bins": args.bins}, outputs,
            started, report.wall_time_s)
    return 0


def cmd_simulate_1d(args) -> int:
    started = datetime.now(timezone.utc)
    config = SimConfig1D(lam=args.lam, length=args.length, windows=args.windows,
                         seed=args.seed, shards=args.shards)
    d_min, d_max, report = run_1d_experiment(config, bins=args.bins, cap=args.cap)
    for flag in report.grid_flags:
        log.warning(flag)
    report_dict = report.to_dict(include_timing=False)
    if d_min.n:
        report_dict["moments"] = {"d_min": dict(zip(("mean", "second"), d_min.moments())),
                                  "d_max": dict(zip(("mean", "second"), d_max.moments()))}
    sup = report.sup_distance_to_theory or {}
    log.info("sup|ecdf_min - theory_min| = %s, sup|ecdf_max - theory_max| = %s",
             sup.get("min1d"), sup.get("max1d"))
    header = ["d", "ecdf_min", "theory_min", "ecdf_max", "theory_max"]
    rows = []
    if d_min.n:
        g = d_min.grid
        rows = list(zip(g, d_min.ecdf_on_grid(), theory_cdf("min1d", g),
                        d_max.ecdf_on_grid(), theory_cdf("max1d", g)))
    if args.out_dir is None:
        sys.stdout.write(json_text(report_dict))
        return 0
    out = Path(args.out_dir)
    outputs = []
    if args.format == "csv":
        outputs.append(write_csv(out / "ecdf_1d.csv", header, rows))
    else:
        outputs.append(write_json(out / "ecdf_1d.json", {h: [r[i] for r in rows]
                                                         for i, h in enumerate(header)}))
    outputs.append(write_json(out / "accumulators.json",
                              accumulator_bundle({"d_min": d_min, "d_max": d_max})))
    outputs.append(write_json(out / "report.json", report_dict))
    _finish(args, "simulate-1d", {**config.to_dict(), "bins": args.bins}, outputs,
            started, report.wall_time_s)
    return 0


def _load_fit_input(path: str, stream: str | None):
    p = Path(path)
    if not p.exists():
        raise DataError(f"input file {path} does not exist")
    if p.suffix.lower() == ".json":
        accs = load_accumulators(p)
        if stream is None:
            if len(accs) != 1:
                raise ConfigError(f"{path} holds streams {sorted(accs)}; choose one with --stream")
            return next(iter(accs.values())), next(iter(accs))
        if stream not in accs:
            raise ConfigError(f"stream {stream!r} not in {path}; available: {sorted(accs)}")
        return accs[stream], stream
    return load_raw_values(p), "raw"


_TABLE_HEADER = ["rank", "family", "param", "estimate", "ci_low", "ci_high",
                 "log_likelihood", "rmse", "max_abs_variation", "n", "converged", "error"]


def fit_table_rows(results) -> list:
    rows = []
    for rank, r in enumerate(results, 1):
        if r.error is not None:
            rows.append([rank, r.family, "", None, None, None, None, None, None, r.n, 0, r.error])
            continue
        for name, value in r.estimates().items():
            lo, hi = (r.ci_95 or {}).get(name, (None, None))
            rows.append([rank, r.family, name, float(value), lo, hi, r.log_likelihood,
                         r.rmse, r.max_abs_variation, r.n, int(r.converged), ""])
    return rows


def cmd_fit(args) -> int:
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    families = _families(args.families)
    data, stream = _load_fit_input(args.input, args.stream)
    if len(families) == len(FAMILIES) or args.rank:
        results = rank_families(data, families=families, level=args.level)
    else:
        results = sorted((fit_mle(f, data, level=args.level) for f in families),
                         key=lambda r: r.rmse)
    for r in results:
        if r.warnings:
            for w in r.warnings:
                log.warning("%s: %s", r.family, w)
    report = {"input": Path(args.input).name, "stream": stream, "level": args.level,
              "gof_grid": "accumulator grid where the ECDF lies in [1e-4, 1 - 1e-4]",
              "fits": [r.to_dict() for r in results]}
    table = csv_text(_TABLE_HEADER, fit_table_rows(results))
    if args.out_dir is None:
        sys.stdout.write(table)
        return 0
    out = Path(args.out_dir)
    outputs = [write_json(out / f"fit_{stream}.json", report),
               write_text(out / f"fit_{stream}.csv", table)]
    _finish(args, "fit", {"input": str(args.input), "input_sha256": sha256_file(args.input),
                          "families": families, "level": args.level, "stream": stream},
            outputs, started, time.perf_counter() - t0)
    return 0


def _grid(text: str) -> np.ndarray:
    try:
        start, stop, num = text.split(":")
        start, stop, num = float(start), float(stop), int(num)
    except ValueError:
        raise ConfigError(f"--grid must be START:STOP:NUM, got {text!r}") from None
    if num < 1 or not (math.isfinite(start) and math.isfinite(stop)) or start < 0 or stop < start:
        raise ConfigError(f"invalid grid {text!r}")
    return np.linspace(start, stop, num)


def cmd_theory(args) -> int:
    names = list(THEORY_NAMES) if args.which == "all" else [args.which]
    x = _grid(args.grid)
    cols = [theory_cdf(n, x) for n in names]
    text = csv_text(["x", *names], zip(x, *cols))
    if args.out_dir is None:
        sys.stdout.write(text)
    else:
        write_text(Path(args.out_dir) / "theory.csv", text)
    return 0


def cmd_moments(args) -> int:
    params = GGParams(args.a, args.b, args.c)
    for m in _orders(args.orders):
        sys.stdout.write(f"{m:g},{gg_moment(m, params):.6f}\n")
    return 0


def cmd_dump_window(args) -> int:
    from .geometry.delaunay import triangulate
    from .geometry.voronoi import write_tessellation_csv
    from .ppp import sample_window_2d

    if args.out_dir is None:
        raise ConfigError("dump-window needs --out-dir")
    config = SimConfig2D(lam=args.lam, area=args.area, windows=args.window_index + 1,
                         seed=args.seed, guard=args.guard)
    pts = sample_window_2d(config, args.window_index)
    tri = triangulate(pts)
    for p in write_tessellation_csv(tri, args.out_dir, config.side, config.guard_length):
        log.info("wrote %s", p)
    return 0


def cmd_replay(args) -> int:
    """Re-run the command recorded in a manifest and compare output checksums."""
    manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    argv = list(manifest["argv"])
    with tempfile.TemporaryDirectory() as tmp:
        if "--out-dir" in argv:
            argv[argv.index("--out-dir") + 1] = tmp
        else:
            argv += ["--out-dir", tmp]
        code = main(argv)
        if code:
            return code
        mismatched = []
        for name, entry in sorted(manifest["outputs"].items()):
            p = Path(tmp) / name
            got = sha256_file(p) if p.exists() else None
            if got != entry["sha256"]:
                mismatched.append(name)
            log.info("%s %s", "ok      " if got == entry["sha256"] else "MISMATCH", name)
    if mismatched:
        log.error("replay differs in %s", ", ".join(mismatched))
        return 3
    log.info("replay reproduced %d file(s) byte-for-byte", len(manifest["outputs"]))
    return 0


# -------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="voronoi-extremes",
                description="Extreme generator-to-vertex distances of Poisson Voronoi cells.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("-q", "--quiet", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common_sim(sp):
        sp.add_argument("--lambda", dest="lam", type=float, default=1.0)
        sp.add_argument("--windows", type=int, default=None)
        sp.add_argument("--seed", type=int, default=None,
                        help=f"RNG seed (default: ${SEED_ENV} or 0)")
        sp.add_argument("--shards", type=int, default=1, help="worker processes")
        sp.add_argument("--bins", type=int, default=DEFAULT_BINS)
        sp.add_argument("--out-dir", default=None)
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    s2 = sub.add_parser("simulate-2d", help="planar Monte-Carlo run")
    common_sim(s2)
    s2.add_argument("--area", type=float, default=1e5)
    s2.add_argument("--guard", type=float, default=None,
                    help="guard band in units of 1/sqrt(lambda) (default 8, capped at side/4)")
    s2.add_argument("--cap-min", type=float, default=R_CAP_MIN)
    s2.add_argument("--cap-max", type=float, default=R_CAP_MAX)
    s2.add_argument("--cap-vertex", type=float, default=R_CAP_VERTEX)
    s2.add_argument("--raw", action="store_true", help="also write raw (window, r_min, r_max) rows")
    s2.set_defaults(func=cmd_simulate_2d, default_windows=10)

    s1 = sub.add_parser("simulate-1d", help="line Monte-Carlo run")
    common_sim(s1)
    s1.add_argument("--length", type=float, default=1e6)
    s1.add_argument("--cap", type=float, default=8.0)
    s1.set_defaults(func=cmd_simulate_1d, default_windows=1)

    f = sub.add_parser("fit", help="MLE fits and goodness-of-fit ranking")
    f.add_argument("--input", required=True, help="accumulators.json or a column of raw values")
    f.add_argument("--stream", default=None, help="stream name inside an accumulator bundle")
    f.add_argument("--families", default=",".join(FAMILIES))
    f.add_argument("--level", type=float, default=0.95)
    f.add_argument("--rank", action="store_true", help="enforce the ranking sample-size floor")
    f.add_argument("--out-dir", default=None)
    f.set_defaults(func=cmd_fit)

    t = sub.add_parser("theory", help="closed-form CDFs on a grid")
    t.add_argument("--which", choices=(*THEORY_NAMES, "all"), default="all")
    t.add_argument("--grid", default="0:3:301", help="START:STOP:NUM")
    t.add_argument("--out-dir", default=None)
    t.set_defaults(func=cmd_theory)

    m = sub.add_parser("moments", help="raw moments of a Generalized Gamma")
    m.add_argument("--a", type=float, required=True)
    m.add_argument("--b", type=float, required=True)
    m.add_argument("--c", type=float, required=True)
    m.add_argument("--orders", default="1,2")
    m.set_defaults(func=cmd_moments)

    d = sub.add_parser("dump-window", help="write one window's tessellation as CSV")
    d.add_argument("--lambda", dest="lam", type=float, default=1.0)
    d.add_argument("--area", type=float, default=1e4)
    d.add_argument("--seed", type=int, default=None)
    d.add_argument("--window-index", type=int, default=0)
    d.add_argument("--guard", type=float, default=None)
    d.add_argument("--out-dir", default=None)
    d.set_defaults(func=cmd_dump_window)

    r = sub.add_parser("replay", help="re-run a manifest and verify checksums")
    r.add_argument("manifest")
    r.set_defaults(func=cmd_replay)
    return p


def _configure_logging(args):
    level = logging.WARNING if args.quiet else (logging.DEBUG if args.verbose > 1 else logging.INFO)
    if not log.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
        log.addHandler(handler)
    # main() may run repeatedly in one process with sys.stderr swapped between calls
    # (setStream would flush a stream that may already be closed)
    log.handlers[0].stream = sys.stderr
    log.setLevel(level)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.argv = argv
    _configure_logging(args)
    try:
        if getattr(args, "seed", 0) is None:
            args.seed = _default_seed()
            # record the resolved seed so a manifest replays without the env var
            args.argv = [*argv, "--seed", str(args.seed)]
        if getattr(args, "windows", 0) is None:
            args.windows = args.default_windows
        return args.func(args)
    except VoronoiExtremesError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except OSError as exc:
        log.error("%s", exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
