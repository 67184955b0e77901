"""Per-cell extreme distances and the 1D / 2D Monte-Carlo drivers."""

from __future__ import annotations

import logging
import math
import multiprocessing as mp
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit

from .empirics import DEFAULT_BINS, OVERFLOW_WARN_FRACTION, EcdfAccumulator
from .errors import ContractError, GeometryError
from .geometry.delaunay import triangulate
from .geometry.voronoi import VoronoiCell, cell_table
from .ppp import SimConfig1D, SimConfig2D, sample_line_1d, sample_window_2d

log = logging.getLogger(__name__)

R_CAP_MIN = 1.5
R_CAP_MAX = 3.0
R_CAP_VERTEX = 2.5
D_CAP_1D = 8.0


@dataclass(frozen=True)
class ExtremesRecord:
    r_min_norm: float
    r_max_norm: float


@dataclass(frozen=True)
class OneDRecord:
    d_min_norm: float
    d_max_norm: float


def cell_extremes(cell: VoronoiCell, points, lam: float) -> ExtremesRecord:
    if not cell.interior:
        raise ContractError(f"cell {cell.generator_index} is not an interior cell")
    if len(cell.vertices) == 0:
        raise ContractError(f"cell {cell.generator_index} has no vertices")
    gen = np.asarray(points, dtype=float)[cell.generator_index]
    dist = np.hypot(cell.vertices[:, 0] - gen[0], cell.vertices[:, 1] - gen[1])
    scale = math.sqrt(lam)
    return ExtremesRecord(float(scale * dist.min()), float(scale * dist.max()))


@njit(cache=True)
def _window_distances(points, offsets, ring, keep, centers, interior, scale):
    n_int = 0
    n_dist = 0
    for v in range(interior.shape[0]):
        if interior[v]:
            n_int += 1
            for k in range(offsets[v], offsets[v + 1]):
                if keep[k]:
                    n_dist += 1
    rmin = np.empty(n_int)
    rmax = np.empty(n_int)
    nverts = np.empty(n_int, np.int64)
    dists = np.empty(n_dist)
    c = 0
    m = 0
    for v in range(interior.shape[0]):
        if not interior[v]:
            continue
        lo = np.inf
        hi = 0.0
        cnt = 0
        for k in range(offsets[v], offsets[v + 1]):
            if not keep[k]:
                continue
            t = ring[k]
            d = scale * math.hypot(centers[t, 0] - points[v, 0], centers[t, 1] - points[v, 1])
            dists[m] = d
            m += 1
            cnt += 1
            lo = min(lo, d)
            hi = max(hi, d)
        rmin[c] = lo
        rmax[c] = hi
        nverts[c] = cnt
        c += 1
    return rmin, rmax, nverts, dists


@dataclass
class WindowResult:
    points: int
    interior: int
    vertex_total: int
    incomplete: int
    r_min: np.ndarray = field(repr=False)
    r_max: np.ndarray = field(repr=False)
    distances: np.ndarray = field(repr=False)


def process_window_2d(config: SimConfig2D, window_index: int) -> WindowResult:
    pts = sample_window_2d(config, window_index)
    try:
        tri = triangulate(pts)
        table = cell_table(tri, config.side, config.guard_length)
        rmin, rmax, nverts, dists = _window_distances(
            tri.points, table.offsets, table.ring, table.keep, table.centers,
            table.interior, math.sqrt(config.lam))
    except GeometryError as exc:
        raise GeometryError(str(exc), window_index=window_index) from exc
    if not (np.all(np.isfinite(rmax)) and np.all(rmin > 0) and np.all(rmin <= rmax)):
        raise GeometryError("non-finite or inconsistent extreme distances", window_index)
    return WindowResult(points=len(pts), interior=len(rmin), vertex_total=int(nverts.sum()),
                        incomplete=table.incomplete, r_min=rmin, r_max=rmax, distances=dists)


@dataclass
class RunReport:
    kind: str
    config: dict
    windows: int
    generated_cells: int
    interior_cells: int
    interior_fraction: float
    empty_windows: list
    overflow_fractions: dict
    grid_flags: list
    wall_time_s: float
    mean_vertex_count: float | None = None
    guard: float | None = None
    incomplete_in_guard: int | None = None
    vertex_distance_samples: int | None = None
    sup_distance_to_theory: dict | None = None

    def to_dict(self, include_timing: bool = True) -> dict:
        data = asdict(self)
        if not include_timing:
            data.pop("wall_time_s")
        return data


@dataclass
class _Shard2D:
    r_min: EcdfAccumulator
    r_max: EcdfAccumulator
    r_bar: EcdfAccumulator
    generated: int = 0
    interior: int = 0
    vertex_total: int = 0
    incomplete: int = 0
    empty: list = field(default_factory=list)


def _run_shard_2d(config: SimConfig2D, window_ids, bins: int, caps, raw_path=None) -> _Shard2D:
    shard = _Shard2D(EcdfAccumulator(caps[0], bins), EcdfAccumulator(caps[1], bins),
                     EcdfAccumulator(caps[2], bins))
    raw = open(raw_path, "w") if raw_path else None
    try:
        for w in window_ids:
            res = process_window_2d(config, w)
            shard.generated += res.points
            shard.interior += res.interior
            shard.vertex_total += res.vertex_total
            shard.incomplete += res.incomplete
            if res.interior == 0:
                shard.empty.append(int(w))
                log.warning("window %d produced no interior cells", w)
                continue
            shard.r_min.add_many(res.r_min)
            shard.r_max.add_many(res.r_max)
            shard.r_bar.add_many(res.distances)
            if raw is not None:
                for lo, hi in zip(res.r_min, res.r_max):
                    raw.write(f"{w},{lo:.9g},{hi:.9g}\n")
    finally:
        if raw is not None:
            raw.close()
    return shard


def _pool(workers: int) -> ProcessPoolExecutor:
    ctx = mp.get_context("fork") if sys.platform.startswith("linux") else None
    return ProcessPoolExecutor(max_workers=workers, mp_context=ctx)


def _shard_windows(windows: int, shards: int):
    return [list(range(s, windows, shards)) for s in range(shards)]


def _config_echo(config) -> dict:
    # shard count lives in the manifest; outputs must not depend on it
    data = config.to_dict()
    data.pop("shards", None)
    return data


def _grid_flags(accs: dict) -> list:
    return [f"{name}: overflow fraction {acc.overflow_fraction:.3g} exceeds "
            f"{OVERFLOW_WARN_FRACTION:g}; raise r_cap"
            for name, acc in accs.items() if acc.overflow_fraction >= OVERFLOW_WARN_FRACTION]


def run_2d_experiment(config: SimConfig2D, bins: int = DEFAULT_BINS,
                      caps: tuple[float, float, float] = (R_CAP_MIN, R_CAP_MAX, R_CAP_VERTEX),
                      raw_path=None):
    """Simulate ``config.windows`` windows and accumulate normalized distances.

    Returns (r_min accumulator, r_max accumulator, all-vertex-distance
    accumulator, RunReport). Windows are split round-robin over
    ``config.shards`` worker processes; accumulators merge exactly, so the
    result does not depend on the shard count.
    """
    t0 = time.perf_counter()
    groups = [g for g in _shard_windows(config.windows, config.shards) if g]
    if len(groups) == 1 or raw_path is not None:
        shards = [_run_shard_2d(config, range(config.windows), bins, caps, raw_path)]
    else:
        with _pool(len(groups)) as pool:
            futures = [pool.submit(_run_shard_2d, config, g, bins, caps) for g in groups]
            shards = [f.result() for f in futures]
    r_min, r_max, r_bar = shards[0].r_min, shards[0].r_max, shards[0].r_bar
    for s in shards[1:]:
        r_min = r_min.merge(s.r_min)
        r_max = r_max.merge(s.r_max)
        r_bar = r_bar.merge(s.r_bar)
    generated = sum(s.generated for s in shards)
    interior = sum(s.interior for s in shards)
    vertex_total = sum(s.vertex_total for s in shards)
    accs = {"r_min": r_min, "r_max": r_max, "r_bar": r_bar}
    report = RunReport(
        kind="2d",
        config=_config_echo(config),
        windows=config.windows,
        generated_cells=generated,
        interior_cells=interior,
        interior_fraction=interior / generated if generated else 0.0,
        empty_windows=sorted(w for s in shards for w in s.empty),
        overflow_fractions={k: a.overflow_fraction for k, a in accs.items()},
        grid_flags=_grid_flags(accs),
        wall_time_s=time.perf_counter() - t0,
        mean_vertex_count=vertex_total / interior if interior else None,
        guard=config.effective_guard,
        incomplete_in_guard=sum(s.incomplete for s in shards),
        vertex_distance_samples=r_bar.n,
    )
    for acc in accs.values():
        acc.seal()
    return r_min, r_max, r_bar, report


def line_half_gaps(positions: np.ndarray, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Normalized (min, max) distance to the two cell edges for interior points."""
    gaps = np.diff(positions)
    half = 0.5 * lam * gaps
    left, right = half[:-1], half[1:]
    return np.minimum(left, right), np.maximum(left, right)


def _run_shard_1d(config: SimConfig1D, window_ids, bins: int, cap: float):
    acc_min = EcdfAccumulator(cap, bins)
    acc_max = EcdfAccumulator(cap, bins)
    generated = 0
    empty = []
    for w in window_ids:
        pos = sample_line_1d(config, w)
        generated += len(pos)
        if len(pos) < 3:
            empty.append(int(w))
            continue
        dmin, dmax = line_half_gaps(pos, config.lam)
        acc_min.add_many(dmin)
        acc_max.add_many(dmax)
    return acc_min, acc_max, generated, empty


def run_1d_experiment(config: SimConfig1D, bins: int = DEFAULT_BINS, cap: float = D_CAP_1D):
    """1D analogue: returns (D_min accumulator, D_max accumulator, RunReport)."""
    from .distributions import theory_cdf

    t0 = time.perf_counter()
    groups = [g for g in _shard_windows(config.windows, config.shards) if g]
    if len(groups) == 1:
        parts = [_run_shard_1d(config, range(config.windows), bins, cap)]
    else:
        with _pool(len(groups)) as pool:
            futures = [pool.submit(_run_shard_1d, config, g, bins, cap) for g in groups]
            parts = [f.result() for f in futures]
    acc_min, acc_max = parts[0][0], parts[0][1]
    for p in parts[1:]:
        acc_min = acc_min.merge(p[0])
        acc_max = acc_max.merge(p[1])
    generated = sum(p[2] for p in parts)
    sup = None
    if acc_min.n:
        grid = acc_min.grid
        sup = {
            "min1d": float(np.max(np.abs(acc_min.ecdf_on_grid() - theory_cdf("min1d", grid)))),
            "max1d": float(np.max(np.abs(acc_max.ecdf_on_grid() - theory_cdf("max1d", grid)))),
        }
    accs = {"d_min": acc_min, "d_max": acc_max}
    report = RunReport(
        kind="1d",
        config=_config_echo(config),
        windows=config.windows,
        generated_cells=generated,
        interior_cells=acc_min.n,
        interior_fraction=acc_min.n / generated if generated else 0.0,
        empty_windows=sorted(w for p in parts for w in p[3]),
        overflow_fractions={k: a.overflow_fraction for k, a in accs.items()},
        grid_flags=_grid_flags(accs),
        wall_time_s=time.perf_counter() - t0,
        sup_distance_to_theory=sup,
    )
    acc_min.seal()
    acc_max.seal()
    return acc_min, acc_max, report
