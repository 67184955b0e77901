"""Mergeable binned empirical CDF with exact running moments."""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .errors import ConfigError, DataError, EmptyDataError

DEFAULT_BINS = 4096
OVERFLOW_WARN_FRACTION = 1e-4


@njit(cache=True)
def _grow_partials(partials, count, values):
    # Shewchuk's msum: keeps the exact sum as nonoverlapping partials
    for j in range(values.shape[0]):
        x = values[j]
        i = 0
        for k in range(count):
            y = partials[k]
            if abs(x) < abs(y):
                x, y = y, x
            hi = x + y
            lo = y - (hi - x)
            if lo != 0.0:
                partials[i] = lo
                i += 1
            x = hi
        partials[i] = x
        count = i + 1
    return count


class ExactSum:
    """Exact sum of a stream of doubles.

    The running total is stored without rounding, so ``value`` is the correctly
    rounded sum regardless of the order values arrive or sums are merged.
    """

    __slots__ = ("_partials", "_count")

    def __init__(self, partials=()):
        self._partials = np.zeros(128)
        self._count = 0
        if len(partials):
            self.add(np.asarray(partials, dtype=float))

    def add(self, values) -> None:
        vals = np.ascontiguousarray(np.atleast_1d(values), dtype=np.float64)
        if vals.size:
            self._count = _grow_partials(self._partials, self._count, vals)

    def merge(self, other: "ExactSum") -> "ExactSum":
        out = ExactSum()
        out.add(self.partials)
        out.add(other.partials)
        return out

    @property
    def partials(self) -> np.ndarray:
        return self._partials[: self._count].copy()

    @property
    def value(self) -> float:
        return math.fsum(self._partials[: self._count])

    def canonical(self) -> list[float]:
        """Greedy expansion of the exact sum: each term is the correctly rounded
        remainder. It depends only on the exact value, never on input order."""
        out = []
        rest = ExactSum(self.partials)
        while True:
            head = rest.value
            if head == 0.0:
                return out
            out.append(head)
            rest.add(-head)


class EcdfAccumulator:
    """Streaming histogram on ``bins`` equal bins over [0, r_cap].

    Bin k covers (k*h, (k+1)*h] with h = r_cap/bins (zero falls in bin 0);
    values above ``r_cap`` are tallied in ``overflow``. The ECDF is therefore
    exact at every right bin edge, which is the evaluation grid used
    throughout. First and second raw moments are tracked exactly from the
    unbinned values.
    """

    def __init__(self, r_cap: float, bins: int = DEFAULT_BINS):
        if not (math.isfinite(r_cap) and r_cap > 0):
            raise ConfigError(f"r_cap must be finite and > 0, got {r_cap!r}")
        if int(bins) != bins or bins < 1:
            raise ConfigError(f"bins must be a positive integer, got {bins!r}")
        self.r_cap = float(r_cap)
        self.bins = int(bins)
        self.counts = np.zeros(self.bins, dtype=np.int64)
        self.overflow = 0
        self._sum = ExactSum()
        self._sum_sq = ExactSum()
        self.sealed = False

    @property
    def n(self) -> int:
        return int(self.counts.sum()) + self.overflow

    @property
    def width(self) -> float:
        return self.r_cap / self.bins

    @property
    def grid(self) -> np.ndarray:
        """Right bin edges x_1..x_G."""
        return self.r_cap * np.arange(1, self.bins + 1) / self.bins

    @property
    def edges(self) -> np.ndarray:
        return self.r_cap * np.arange(self.bins + 1) / self.bins

    @property
    def sum(self) -> float:
        return self._sum.value

    @property
    def sum_sq(self) -> float:
        return self._sum_sq.value

    def _edge_count(self, x: np.ndarray) -> np.ndarray:
        # smallest i with x <= r_cap*i/bins, using the same rounding as ``grid``
        i = np.ceil(x * (self.bins / self.r_cap)).astype(np.int64)
        i -= (i > 0) & (self.r_cap * (i - 1) / self.bins >= x)
        i += self.r_cap * i / self.bins < x
        return i

    def _bin_index(self, x: np.ndarray) -> np.ndarray:
        return np.clip(self._edge_count(x) - 1, 0, self.bins - 1)

    def add(self, value) -> "EcdfAccumulator":
        return self.add_many(np.atleast_1d(np.asarray(value, dtype=float)))

    def add_many(self, values) -> "EcdfAccumulator":
        if self.sealed:
            raise DataError("accumulator is sealed")
        x = np.asarray(values, dtype=np.float64).ravel()
        if x.size == 0:
            return self
        bad = ~np.isfinite(x) | (x < 0)
        if bad.any():
            first = int(np.argmax(bad))
            raise DataError(f"invalid sample {x[first]!r} at position {first}: "
                            "values must be finite and >= 0")
        over = x > self.r_cap
        self.overflow += int(over.sum())
        inside = x[~over]
        self.counts += np.bincount(self._bin_index(inside), minlength=self.bins)
        self._sum.add(x)
        self._sum_sq.add(x * x)
        return self

    def seal(self) -> "EcdfAccumulator":
        self.sealed = True
        self.counts.setflags(write=False)
        return self

    def _require_data(self):
        if self.n == 0:
            raise EmptyDataError("accumulator holds no samples")

    def eval(self, x):
        """ECDF at x: share of samples up to the right edge of x's bin."""
        self._require_data()
        xa = np.asarray(x, dtype=float)
        cum = np.concatenate([[0], np.cumsum(self.counts)])
        idx = self._edge_count(np.atleast_1d(xa)).reshape(xa.shape)
        idx = np.where(xa <= 0, 1, idx)
        out = cum[np.clip(idx, 0, self.bins)] / self.n
        out = np.where(xa < 0, 0.0, out)
        return float(out) if out.ndim == 0 else out

    def ecdf_on_grid(self) -> np.ndarray:
        self._require_data()
        return np.cumsum(self.counts) / self.n

    def moments(self) -> tuple[float, float]:
        """(mean, raw second moment) from the exact running sums."""
        self._require_data()
        n = self.n
        return self._sum.value / n, self._sum_sq.value / n

    @property
    def overflow_fraction(self) -> float:
        return self.overflow / self.n if self.n else 0.0

    def same_grid(self, other: "EcdfAccumulator") -> bool:
        return self.r_cap == other.r_cap and self.bins == other.bins

    def merge(self, other: "EcdfAccumulator") -> "EcdfAccumulator":
        if not self.same_grid(other):
            raise ConfigError(
                f"cannot merge grids ({self.r_cap}, {self.bins}) and ({other.r_cap}, {other.bins})")
        out = EcdfAccumulator(self.r_cap, self.bins)
        out.counts = self.counts + other.counts
        out.overflow = self.overflow + other.overflow
        out._sum = self._sum.merge(other._sum)
        out._sum_sq = self._sum_sq.merge(other._sum_sq)
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, EcdfAccumulator):
            return NotImplemented
        return (self.same_grid(other) and self.overflow == other.overflow
                and np.array_equal(self.counts, other.counts)
                and self.sum == other.sum and self.sum_sq == other.sum_sq)

    def __repr__(self) -> str:
        return f"EcdfAccumulator(r_cap={self.r_cap}, bins={self.bins}, n={self.n})"

    def to_dict(self) -> dict:
        return {
            "r_cap": self.r_cap,
            "bins": self.bins,
            "n": self.n,
            "overflow": self.overflow,
            "sum": self.sum,
            "sum_sq": self.sum_sq,
            "sum_partials": self._sum.canonical(),
            "sum_sq_partials": self._sum_sq.canonical(),
            "counts": [int(c) for c in self.counts],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EcdfAccumulator":
        try:
            acc = cls(float(data["r_cap"]), int(data["bins"]))
            counts = np.asarray(data["counts"], dtype=np.int64)
            overflow = int(data.get("overflow", 0))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed accumulator record: {exc}") from exc
        if counts.shape != (acc.bins,) or (counts < 0).any() or overflow < 0:
            raise DataError("accumulator counts do not match its bin count")
        acc.counts = counts
        acc.overflow = overflow
        acc._sum = ExactSum(data.get("sum_partials") or [data.get("sum", 0.0)])
        acc._sum_sq = ExactSum(data.get("sum_sq_partials") or [data.get("sum_sq", 0.0)])
        if "n" in data and int(data["n"]) != acc.n:
            raise DataError(f"accumulator n={data['n']} disagrees with its counts ({acc.n})")
        return acc


def merge_all(accs) -> EcdfAccumulator:
    accs = list(accs)
    if not accs:
        raise EmptyDataError("nothing to merge")
    out = accs[0]
    for acc in accs[1:]:
        out = out.merge(acc)
    return out
