"""Seedable homogeneous Poisson point processes on 1D and 2D windows.

Every window draws from its own Philox stream keyed by (seed, stream tag,
window index), so a window's sample does not depend on which worker produced
it or in which order windows were processed.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError

MIN_EXPECTED_POINTS_2D = 100
# guard band in units of 1/sqrt(lambda); a planar Poisson cell reaching this
# far is astronomically rare, so cells seeded inside the band are complete
DEFAULT_GUARD = 8.0
_STREAM_1D = 1
_STREAM_2D = 2
_SEED_MAX = 2 ** 64 - 1


def _check_common(windows: int, seed: int, shards: int) -> None:
    if int(windows) != windows or windows < 1:
        raise ConfigError(f"windows must be an integer >= 1, got {windows!r}")
    if int(shards) != shards or shards < 1:
        raise ConfigError(f"shards must be an integer >= 1, got {shards!r}")
    if int(seed) != seed or not 0 <= seed <= _SEED_MAX:
        raise ConfigError(f"seed must be an integer in [0, 2^64), got {seed!r}")


def _check_positive(name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ConfigError(f"{name} must be finite and > 0, got {value!r}")


@dataclass(frozen=True)
class SimConfig2D:
    lam: float = 1.0
    area: float = 1e5
    windows: int = 10
    seed: int = 0
    shards: int = 1
    guard: float | None = None

    def __post_init__(self):
        _check_positive("lambda", self.lam)
        _check_positive("area", self.area)
        _check_common(self.windows, self.seed, self.shards)
        if self.lam * self.area < MIN_EXPECTED_POINTS_2D:
            raise ConfigError(
                f"lambda*area = {self.lam * self.area:g} < {MIN_EXPECTED_POINTS_2D}; "
                "windows this small contain no usable interior cells")
        if self.guard is not None:
            g = self.guard
            if not (isinstance(g, (int, float)) and math.isfinite(g) and g >= 0):
                raise ConfigError(f"guard must be finite and >= 0, got {g!r}")
            if 2 * g / math.sqrt(self.lam) >= self.side:
                raise ConfigError(f"guard {g:g} leaves no inner window (side*sqrt(lambda) = "
                                  f"{self.side * math.sqrt(self.lam):g})")

    @property
    def side(self) -> float:
        return math.sqrt(self.area)

    @property
    def effective_guard(self) -> float:
        """Guard in normalized units; by default capped at a quarter of the side."""
        if self.guard is not None:
            return float(self.guard)
        return min(DEFAULT_GUARD, 0.25 * self.side * math.sqrt(self.lam))

    @property
    def guard_length(self) -> float:
        return self.effective_guard / math.sqrt(self.lam)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SimConfig1D:
    lam: float = 1.0
    length: float = 1e6
    windows: int = 1
    seed: int = 0
    shards: int = 1

    def __post_init__(self):
        _check_positive("lambda", self.lam)
        _check_positive("length", self.length)
        _check_common(self.windows, self.seed, self.shards)

    def to_dict(self) -> dict:
        return asdict(self)


def window_rng(seed: int, window_index: int, stream: int = _STREAM_2D) -> np.random.Generator:
    """Independent counter-based generator for one window."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(window_index)))
    return np.random.Generator(np.random.Philox(ss))


def poisson_sample(mean: float, rng: np.random.Generator) -> int:
    """One Poisson(mean) variate.

    numpy's sampler uses inversion for small means and Hormann's transformed
    rejection (PTRS) for large ones, so it is exact at both scales.
    """
    if not (isinstance(mean, (int, float, np.floating)) and math.isfinite(mean) and mean > 0):
        raise ConfigError(f"Poisson mean must be finite and > 0, got {mean!r}")
    return int(rng.poisson(mean))


def sample_window_2d(config: SimConfig2D, window_index: int,
                     rng: np.random.Generator | None = None) -> np.ndarray:
    """Poisson(lambda*A) points uniform on [0, sqrt(A)]^2, shape (N, 2)."""
    if rng is None:
        rng = window_rng(config.seed, window_index, _STREAM_2D)
    n = poisson_sample(config.lam * config.area, rng)
    return rng.random((n, 2)) * config.side


def sample_line_1d(config: SimConfig1D, window_index: int,
                   rng: np.random.Generator | None = None) -> np.ndarray:
    """Sorted Poisson(lambda*L) positions uniform on [0, L]."""
    if rng is None:
        rng = window_rng(config.seed, window_index, _STREAM_1D)
    n = poisson_sample(config.lam * config.length, rng)
    return np.sort(rng.random(n) * config.length)
