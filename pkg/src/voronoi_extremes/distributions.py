"""Candidate distribution families, closed-form theory CDFs and GG moments.

Parameterizations:

* GeneralizedGamma(a, b, c): density a b^(c/a) / Gamma(c/a) x^(c-1) exp(-b x^a)
* Gamma(shape k, rate beta)
* LogNormal(mu, sigma), the mean and standard deviation of log X
* Rayleigh(sigma): CDF 1 - exp(-x^2 / (2 sigma^2))
* Weibull(shape k, scale lam_w): CDF 1 - exp(-(x / lam_w)^k)

Gamma, Rayleigh and Weibull are GG sub-families and evaluate through the same
incomplete-gamma kernel; ``to_gg`` gives the embedding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Callable

import numpy as np
from scipy.special import log_ndtr, ndtr

from .errors import ConfigError, DomainError
from .special import log_gamma, reg_lower_gamma, reg_upper_gamma

FAMILIES = ("generalized_gamma", "gamma", "lognormal", "rayleigh", "weibull")
FAMILY_ALIASES = {"gg": "generalized_gamma", "log-normal": "lognormal", "log_normal": "lognormal"}


def canonical_family(name: str) -> str:
    key = FAMILY_ALIASES.get(name.strip().lower(), name.strip().lower())
    if key not in FAMILIES:
        raise ConfigError(f"unknown family {name!r}; valid: {', '.join(FAMILIES)}")
    return key


def _check_positive(**kw):
    for name, v in kw.items():
        if not (isinstance(v, (int, float, np.floating)) and math.isfinite(v) and v > 0):
            raise DomainError(f"{name} must be finite and > 0, got {v!r}")


def _x_nonneg(x):
    xa = np.asarray(x, dtype=float)
    if np.any(np.isnan(xa)) or np.any(xa < 0):
        raise DomainError("CDF argument must be >= 0")
    return xa


def _x_pos(x):
    xa = np.asarray(x, dtype=float)
    if np.any(np.isnan(xa)) or np.any(xa <= 0):
        raise DomainError("density argument must be > 0")
    return xa


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


@dataclass(frozen=True)
class GGParams:
    a: float
    b: float
    c: float

    def __post_init__(self):
        _check_positive(a=self.a, b=self.b, c=self.c)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.a, self.b, self.c)


class _Family:
    family: str = ""

    def params(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_dict(self) -> dict:
        return {"family": self.family, "params": self.params()}

    def sf(self, x):
        return _out(1.0 - np.asarray(self.cdf(x)))


@dataclass(frozen=True)
class GeneralizedGamma(_Family):
    a: float
    b: float
    c: float
    family = "generalized_gamma"

    def __post_init__(self):
        _check_positive(a=self.a, b=self.b, c=self.c)

    @property
    def gg(self) -> GGParams:
        return GGParams(self.a, self.b, self.c)

    def to_gg(self) -> GGParams:
        return self.gg

    def cdf(self, x):
        return gg_cdf(x, self.gg)

    def sf(self, x):
        return gg_sf(x, self.gg)

    def logpdf(self, x):
        return gg_logpdf(x, self.gg)


@dataclass(frozen=True)
class Gamma(_Family):
    shape: float
    rate: float
    family = "gamma"

    def __post_init__(self):
        _check_positive(shape=self.shape, rate=self.rate)

    def to_gg(self) -> GGParams:
        return GGParams(1.0, self.rate, self.shape)

    def cdf(self, x):
        return gg_cdf(x, self.to_gg())

    def sf(self, x):
        return gg_sf(x, self.to_gg())

    def logpdf(self, x):
        return gg_logpdf(x, self.to_gg())


@dataclass(frozen=True)
class Weibull(_Family):
    shape: float
    scale: float
    family = "weibull"

    def __post_init__(self):
        _check_positive(shape=self.shape, scale=self.scale)

    def to_gg(self) -> GGParams:
        return GGParams(self.shape, self.scale ** -self.shape, self.shape)

    def cdf(self, x):
        xa = _x_nonneg(x)
        return _out(-np.expm1(-(xa / self.scale) ** self.shape))

    def sf(self, x):
        xa = _x_nonneg(x)
        return _out(np.exp(-(xa / self.scale) ** self.shape))

    def logpdf(self, x):
        xa = _x_pos(x)
        k, lam = self.shape, self.scale
        z = xa / lam
        return _out(math.log(k / lam) + (k - 1.0) * np.log(z) - z ** k)


@dataclass(frozen=True)
class Rayleigh(_Family):
    sigma: float
    family = "rayleigh"

    def __post_init__(self):
        _check_positive(sigma=self.sigma)

    def to_gg(self) -> GGParams:
        return GGParams(2.0, 0.5 / self.sigma ** 2, 2.0)

    def cdf(self, x):
        xa = _x_nonneg(x)
        return _out(-np.expm1(-0.5 * (xa / self.sigma) ** 2))

    def sf(self, x):
        xa = _x_nonneg(x)
        return _out(np.exp(-0.5 * (xa / self.sigma) ** 2))

    def logpdf(self, x):
        xa = _x_pos(x)
        s2 = self.sigma ** 2
        return _out(np.log(xa) - math.log(s2) - 0.5 * xa * xa / s2)


@dataclass(frozen=True)
class LogNormal(_Family):
    mu: float
    sigma: float
    family = "lognormal"

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise DomainError(f"mu must be finite, got {self.mu!r}")
        _check_positive(sigma=self.sigma)

    def _z(self, xa):
        with np.errstate(divide="ignore"):
            return (np.log(xa) - self.mu) / self.sigma

    def cdf(self, x):
        return _out(ndtr(self._z(_x_nonneg(x))))

    def sf(self, x):
        return _out(ndtr(-self._z(_x_nonneg(x))))

    def logcdf(self, x):
        return _out(log_ndtr(self._z(_x_nonneg(x))))

    def logpdf(self, x):
        xa = _x_pos(x)
        z = self._z(xa)
        return _out(-np.log(xa) - math.log(self.sigma) - 0.5 * math.log(2 * math.pi) - 0.5 * z * z)


FamilyParams = GeneralizedGamma | Gamma | LogNormal | Rayleigh | Weibull
_CLASSES = {cls.family: cls for cls in (GeneralizedGamma, Gamma, LogNormal, Rayleigh, Weibull)}


def family_from_dict(data: dict) -> FamilyParams:
    cls = _CLASSES[canonical_family(data["family"])]
    return cls(**{k: float(v) for k, v in data["params"].items()})


def family_cdf(x, p: FamilyParams):
    return p.cdf(x)


def family_logpdf(x, p: FamilyParams):
    return p.logpdf(x)


def _gg_arg(x, p: GGParams):
    xa = _x_nonneg(x)
    return p.c / p.a, p.b * xa ** p.a


def gg_cdf(x, p: GGParams):
    """P(c/a, b x^a): substitute u = b t^a in the defining integral."""
    s, z = _gg_arg(x, p)
    return reg_lower_gamma(s, z)


def gg_sf(x, p: GGParams):
    s, z = _gg_arg(x, p)
    return reg_upper_gamma(s, z)


def gg_logpdf(x, p: GGParams):
    xa = _x_pos(x)
    a, b, c = p.as_tuple()
    out = (math.log(a) + (c / a) * math.log(b) - log_gamma(c / a)
           + (c - 1.0) * np.log(xa) - b * xa ** a)
    return _out(out)


def gg_sample(p: GGParams, rng: np.random.Generator, size=None):
    """(U / b)^(1/a) with U ~ Gamma(c/a, 1)."""
    u = rng.standard_gamma(p.c / p.a, size=size)
    return (u / p.b) ** (1.0 / p.a)


def gg_moment(m: float, p: GGParams) -> float:
    """E[X^m] = Gamma((c+m)/a) / (b^(m/a) Gamma(c/a))."""
    if not (math.isfinite(m) and m >= 0):
        raise DomainError(f"moment order must be finite and >= 0, got {m!r}")
    a, b, c = p.as_tuple()
    return math.exp(log_gamma((c + m) / a) - log_gamma(c / a) - (m / a) * math.log(b))


THEORY_NAMES = ("edge1d", "max1d", "min1d", "vertex2d")


def theory_cdf(name: str, x):
    """Closed-form CDFs of normalized distances.

    edge1d: generator to either edge of a 1D cell; max1d/min1d: the larger and
    smaller of the two; vertex2d: generator to a typical vertex of a planar
    cell.
    """
    xa = _x_nonneg(x)
    if name == "edge1d":
        out = -np.expm1(-2.0 * xa)
    elif name == "max1d":
        out = np.expm1(-2.0 * xa) ** 2
    elif name == "min1d":
        out = -np.expm1(-4.0 * xa)
    elif name == "vertex2d":
        u = math.pi * xa * xa
        # 1 - (1+u)e^-u, rearranged to avoid cancellation near zero
        out = -np.expm1(-u) - u * np.exp(-u)
    else:
        raise ConfigError(f"unknown theory CDF {name!r}; valid: {', '.join(THEORY_NAMES)}")
    return _out(np.clip(out, 0.0, 1.0))


def rescale_cdf(f: Callable, lam: float) -> Callable:
    """Physical-units CDF x -> f(x sqrt(lam)) for a normalized CDF f."""
    _check_positive(**{"lambda": lam})
    root = math.sqrt(lam)

    def rescaled(x):
        return f(np.asarray(x, dtype=float) * root)

    return rescaled
