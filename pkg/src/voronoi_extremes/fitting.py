"""Maximum-likelihood fits, confidence intervals and goodness-of-fit ranking.

Every family is optimized over an unconstrained parameter vector theta (log
of each positive parameter; the log-normal location stays on its natural
scale). Gamma, Weibull and Rayleigh are evaluated as Generalized-Gamma
sub-families, so one likelihood kernel and one gradient serve four families;
the chain rule to theta is a fixed Jacobian per family.

Data come either as an EcdfAccumulator (grouped likelihood over its bins,
with the overflow count as one extra open bin) or as a raw sample array.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.optimize import minimize
from scipy.special import ndtr
from scipy.stats import norm

from .distributions import (
    FAMILIES,
    Gamma,
    GeneralizedGamma,
    LogNormal,
    Rayleigh,
    Weibull,
    canonical_family,
)
from .empirics import EcdfAccumulator
from .errors import (
    ConvergenceError,
    DataError,
    DegenerateDataError,
    EmptyDataError,
    SampleSizeError,
    VoronoiExtremesError,
)
from .special import (
    digamma_scalar,
    dlower_gamma_ds_scalar,
    lgamma_scalar,
    reg_lower_gamma_scalar,
    reg_upper_gamma_scalar,
)

log = logging.getLogger(__name__)

MIN_SAMPLES = 1000
MIN_RANK_SAMPLES = 10_000
MAX_ITER = 500
GRAD_TOL = 1e-8
GOF_TAIL = 1e-4
_FD_STEP = 1e-5
_LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------- likelihoods

@njit(cache=True)
def _gg_edge_terms(a, b, c, edges):
    """P, Q and dP/d(log a, log b, log c) of the GG CDF at every edge."""
    m = edges.shape[0]
    P = np.zeros(m)
    Q = np.ones(m)
    dP = np.zeros((m, 3))
    s = c / a
    lgs = lgamma_scalar(s)
    for i in range(m):
        x = edges[i]
        if x <= 0.0:
            continue
        lx = math.log(x)
        z = b * math.exp(a * lx)
        if z == 0.0:
            continue
        P[i] = reg_lower_gamma_scalar(s, z)
        Q[i] = reg_upper_gamma_scalar(s, z)
        zdens = math.exp(s * math.log(z) - z - lgs) if math.isfinite(z) else 0.0
        dps = dlower_gamma_ds_scalar(s, z)
        dP[i, 0] = -dps * s + zdens * a * lx
        dP[i, 1] = zdens
        dP[i, 2] = dps * s
    return P, Q, dP


@njit(cache=True)
def _grouped_from_terms(P, Q, dP, counts, overflow):
    G = counts.shape[0]
    n = 0.0
    nll = 0.0
    g = np.zeros(dP.shape[1])
    for k in range(G):
        ck = counts[k]
        if ck == 0:
            continue
        n += ck
        if P[k + 1] <= 0.5:
            p = P[k + 1] - P[k]
        else:
            p = Q[k] - Q[k + 1]
        if not p > 0.0:
            return np.inf, g
        nll -= ck * math.log(p)
        for j in range(dP.shape[1]):
            g[j] -= ck * (dP[k + 1, j] - dP[k, j]) / p
    if overflow > 0:
        n += overflow
        p = Q[G]
        if not p > 0.0:
            return np.inf, g
        nll -= overflow * math.log(p)
        for j in range(dP.shape[1]):
            g[j] += overflow * dP[G, j] / p
    return nll / n, g / n


def _gg_grouped(abc, edges, counts, overflow):
    P, Q, dP = _gg_edge_terms(abc[0], abc[1], abc[2], edges)
    return _grouped_from_terms(P, Q, dP, counts, overflow)


def _gg_raw(abc, x, logx):
    a, b, c = abc
    s = c / a
    lb = math.log(b)
    psi = digamma_scalar(s)
    xa = np.exp(a * logx)
    bxa = b * xa
    mean_logx = logx.mean()
    mean_bxa = bxa.mean()
    nll = -(math.log(a) + s * lb - lgamma_scalar(s) + (c - 1.0) * mean_logx - mean_bxa)
    g = -np.array([
        1.0 - s * lb + s * psi - a * np.mean(bxa * logx),
        s - mean_bxa,
        s * lb - s * psi + c * mean_logx,
    ])
    return nll, g


def _lognormal_grouped(theta, edges, counts, overflow):
    mu, sigma = theta[0], math.exp(theta[1])
    with np.errstate(divide="ignore"):
        z = (np.log(edges) - mu) / sigma
    phi = np.where(np.isfinite(z), np.exp(-0.5 * np.where(np.isfinite(z), z, 0.0) ** 2), 0.0) \
        / math.sqrt(2 * math.pi)
    P = ndtr(z)
    Q = ndtr(-z)
    dP = np.column_stack([-phi / sigma, -phi * np.where(np.isfinite(z), z, 0.0)])
    return _grouped_from_terms(P, Q, dP, counts, overflow)


def _lognormal_raw(theta, x, logx):
    mu, ls = theta
    sigma = math.exp(ls)
    z = (logx - mu) / sigma
    nll = np.mean(logx) + ls + 0.5 * _LOG_2PI + 0.5 * np.mean(z * z)
    g = np.array([-np.mean(z) / sigma, 1.0 - np.mean(z * z)])
    return nll, g


# ------------------------------------------------------------- family models

class _Model:
    name = ""
    param_names: tuple = ()
    log_params: tuple = ()

    def build(self, theta):
        raise NotImplementedError

    def gg_map(self, theta):
        """(a, b, c) and the Jacobian of (log a, log b, log c) w.r.t. theta."""
        raise NotImplementedError

    def objective(self, theta, data: "_Data"):
        abc, J = self.gg_map(theta)
        if data.grouped:
            nll, g = _gg_grouped(abc, data.edges, data.counts, data.overflow)
        else:
            nll, g = _gg_raw(abc, data.x, data.logx)
        return nll, J.T @ g

    def natural(self, theta) -> np.ndarray:
        return np.array([math.exp(t) if lp else t for t, lp in zip(theta, self.log_params)])


class _GGModel(_Model):
    name = "generalized_gamma"
    param_names = ("a", "b", "c")
    log_params = (True, True, True)

    def build(self, theta):
        return GeneralizedGamma(*np.exp(theta))

    def gg_map(self, theta):
        return np.exp(theta), np.eye(3)


class _GammaModel(_Model):
    name = "gamma"
    param_names = ("shape", "rate")
    log_params = (True, True)

    def build(self, theta):
        return Gamma(*np.exp(theta))

    def gg_map(self, theta):
        k, beta = np.exp(theta)
        return np.array([1.0, beta, k]), np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]])


class _WeibullModel(_Model):
    name = "weibull"
    param_names = ("shape", "scale")
    log_params = (True, True)

    def build(self, theta):
        return Weibull(*np.exp(theta))

    def gg_map(self, theta):
        k = math.exp(theta[0])
        log_b = -k * theta[1]
        J = np.array([[1.0, 0.0], [log_b, -k], [1.0, 0.0]])
        return np.array([k, math.exp(log_b), k]), J


class _RayleighModel(_Model):
    name = "rayleigh"
    param_names = ("sigma",)
    log_params = (True,)

    def build(self, theta):
        return Rayleigh(math.exp(theta[0]))

    def gg_map(self, theta):
        b = 0.5 * math.exp(-2.0 * theta[0])
        return np.array([2.0, b, 2.0]), np.array([[0.0], [-2.0], [0.0]])


class _LogNormalModel(_Model):
    name = "lognormal"
    param_names = ("mu", "sigma")
    log_params = (False, True)

    def build(self, theta):
        return LogNormal(float(theta[0]), math.exp(theta[1]))

    def objective(self, theta, data):
        if data.grouped:
            return _lognormal_grouped(theta, data.edges, data.counts, data.overflow)
        return _lognormal_raw(theta, data.x, data.logx)


MODELS = {m.name: m for m in (_GGModel(), _GammaModel(), _WeibullModel(),
                              _RayleighModel(), _LogNormalModel())}


# --------------------------------------------------------------------- data

@dataclass
class _Data:
    grouped: bool
    n: int
    mean: float
    mean_sq: float
    degenerate: bool
    edges: np.ndarray | None = None
    counts: np.ndarray | None = None
    overflow: int = 0
    x: np.ndarray | None = None
    logx: np.ndarray | None = None
    acc: EcdfAccumulator | None = None


def _prepare(data, min_samples: int) -> _Data:
    if isinstance(data, EcdfAccumulator):
        n = data.n
        if n == 0:
            raise EmptyDataError("accumulator holds no samples")
        if n < min_samples:
            raise SampleSizeError(f"need at least {min_samples} samples to fit, got {n}")
        mean, mean_sq = data.moments()
        occupied = np.count_nonzero(data.counts) + (data.overflow > 0)
        return _Data(grouped=True, n=n, mean=mean, mean_sq=mean_sq,
                     degenerate=occupied <= 1 or mean_sq - mean * mean <= 0,
                     edges=data.edges, counts=np.ascontiguousarray(data.counts, dtype=np.int64),
                     overflow=int(data.overflow), acc=data)
    x = np.asarray(data, dtype=float).ravel()
    if x.size == 0:
        raise EmptyDataError("no samples to fit")
    if x.size < min_samples:
        raise SampleSizeError(f"need at least {min_samples} samples to fit, got {x.size}")
    bad = ~np.isfinite(x) | (x <= 0)
    if bad.any():
        i = int(np.argmax(bad))
        raise DataError(f"sample {i} is {x[i]!r}; fitting needs finite positive values")
    mean = math.fsum(x) / x.size
    mean_sq = math.fsum(x * x) / x.size
    return _Data(grouped=False, n=x.size, mean=mean, mean_sq=mean_sq,
                 degenerate=bool(np.all(x == x[0])), x=x, logx=np.log(x))


def _gof_accumulator(d: _Data) -> EcdfAccumulator:
    if d.acc is not None:
        return d.acc
    acc = EcdfAccumulator(float(d.x.max()))
    acc.add_many(d.x)
    return acc.seal()


# ----------------------------------------------------------------- results

@dataclass
class FitResult:
    family: str
    params: object | None
    log_likelihood: float = float("nan")
    covariance: np.ndarray | None = None
    ci_95: dict | None = None
    rmse: float = float("nan")
    max_abs_variation: float = float("nan")
    n: int = 0
    converged: bool = False
    iterations: int = 0
    grad_norm: float = float("nan")
    method: str = ""
    param_names: tuple = ()
    theta: np.ndarray | None = None
    warnings: list = field(default_factory=list)
    error: str | None = None

    @property
    def k(self) -> int:
        return len(self.param_names)

    @property
    def aic(self) -> float:
        return 2 * self.k - 2 * self.log_likelihood

    @property
    def bic(self) -> float:
        return self.k * math.log(self.n) - 2 * self.log_likelihood if self.n else float("nan")

    def estimates(self) -> dict:
        return self.params.params() if self.params is not None else {}

    def to_dict(self) -> dict:
        out = {"family": self.family, "n": self.n, "method": self.method}
        if self.error is not None:
            out["error"] = self.error
            return out
        out.update({
            "params": self.estimates(),
            "ci_95": {k: list(v) for k, v in self.ci_95.items()} if self.ci_95 else None,
            "log_likelihood": self.log_likelihood,
            "aic": self.aic,
            "bic": self.bic,
            "rmse": self.rmse,
            "max_abs_variation": self.max_abs_variation,
            "converged": self.converged,
            "iterations": self.iterations,
            "grad_norm": self.grad_norm,
            "covariance_log_space": self.covariance.tolist() if self.covariance is not None else None,
            "warnings": list(self.warnings),
        })
        return out


# ------------------------------------------------------------- optimization

def _fd_hessian(fun, theta):
    k = len(theta)
    H = np.empty((k, k))
    for j in range(k):
        h = _FD_STEP * max(1.0, abs(theta[j]))
        tp = theta.copy()
        tm = theta.copy()
        tp[j] += h
        tm[j] -= h
        H[:, j] = (fun(tp)[1] - fun(tm)[1]) / (2 * h)
    return 0.5 * (H + H.T)


def _newton_polish(fun, theta, trace, max_steps=25):
    f, g = fun(theta)
    for _ in range(max_steps):
        if np.linalg.norm(g) < 0.01 * GRAD_TOL:
            break
        H = _fd_hessian(fun, theta)
        try:
            np.linalg.cholesky(H)
            step = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        t = 1.0
        while t > 1e-6:
            cand = theta + t * step
            fc, gc = fun(cand)
            if np.isfinite(fc) and fc <= f + 1e-14 * abs(f):
                break
            t *= 0.5
        else:
            break
        theta, f, g = cand, fc, gc
        trace.append((len(trace), float(f), float(np.linalg.norm(g))))
    return theta, f, g


def _minimize(fun, theta0, max_iter=MAX_ITER):
    """BFGS, Nelder-Mead fallback, Newton polish. Returns (theta, f, g, iters, trace)."""
    trace = []

    def record(xk):
        f, g = fun(xk)
        trace.append((len(trace), float(f), float(np.linalg.norm(g))))

    def safe(theta):
        f, g = fun(theta)
        if not np.isfinite(f):
            return 1e300, np.zeros_like(theta)
        return f, g

    res = minimize(safe, theta0, jac=True, method="BFGS", callback=record,
                   options={"gtol": GRAD_TOL, "maxiter": max_iter})
    theta = res.x
    iters = int(res.nit)
    f, g = fun(theta)
    if not (np.isfinite(f) and np.linalg.norm(g) < 1e-4):
        log.info("BFGS stalled (%s); retrying with Nelder-Mead", res.message)
        nm = minimize(lambda t: safe(t)[0], theta if np.isfinite(f) else theta0,
                      method="Nelder-Mead", callback=record,
                      options={"maxiter": max_iter, "xatol": 1e-10, "fatol": 1e-14})
        theta = nm.x
        iters += int(nm.nit)
    theta, f, g = _newton_polish(fun, theta, trace)
    return theta, f, g, iters, trace


def _start(model: _Model, d: _Data) -> np.ndarray:
    m = d.mean
    v = max(d.mean_sq - m * m, 1e-12 * m * m)
    shape, rate = m * m / v, m / v
    if model.name == "gamma":
        return np.log([shape, rate])
    if model.name == "weibull":
        cv = math.sqrt(v) / m
        k = min(max(cv ** -1.086, 0.05), 50.0)
        return np.array([math.log(k), math.log(m / math.gamma(1.0 + 1.0 / k))])
    if model.name == "rayleigh":
        return np.array([0.5 * math.log(d.mean_sq / 2.0)])
    if model.name == "lognormal":
        s2 = math.log1p(v / (m * m))
        return np.array([math.log(m) - 0.5 * s2, 0.5 * math.log(s2)])
    raise AssertionError(model.name)


# ------------------------------------------------------------------- API

def confidence_intervals(fit: FitResult, level: float = 0.95) -> dict | None:
    """Normal-approximation intervals on the optimization scale.

    Positive parameters get exp(theta +/- z se); the log-normal location uses
    mu +/- z se. Directions with non-positive or non-finite variance are
    omitted with a warning.
    """
    if not 0 < level < 1:
        raise ValueError(f"level must be in (0, 1), got {level}")
    if fit.covariance is None or fit.theta is None:
        msg = "no usable observed information; intervals omitted"
        if msg not in fit.warnings:
            fit.warnings.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        return None
    z = float(norm.ppf(0.5 + level / 2))
    model = MODELS[fit.family]
    out = {}
    for i, name in enumerate(fit.param_names):
        var = fit.covariance[i, i]
        if not (np.isfinite(var) and var > 0):
            msg = f"zero-variance direction for {name}; interval omitted"
            fit.warnings.append(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
            continue
        half = z * math.sqrt(var)
        t = fit.theta[i]
        lo, hi = (math.exp(t - half), math.exp(t + half)) if model.log_params[i] else (t - half, t + half)
        out[name] = (lo, hi)
    return out or None


def gof_metrics(acc: EcdfAccumulator, cdf, tail: float = GOF_TAIL) -> tuple[float, float]:
    """(rmse, max_abs_variation) of ECDF - CDF on the accumulator grid.

    Grid points whose ECDF lies outside [tail, 1 - tail] are dropped so that
    bin quantization in the far tails does not dominate; pass tail=0 for the
    full grid. If the restriction leaves nothing, the full grid is used.
    """
    ecdf = acc.ecdf_on_grid()
    grid = acc.grid
    mask = (ecdf >= tail) & (ecdf <= 1.0 - tail)
    if not mask.any():
        mask = np.ones_like(ecdf, dtype=bool)
    diff = ecdf[mask] - np.asarray(cdf(grid[mask]), dtype=float)
    return float(math.sqrt(np.mean(diff * diff))), float(np.max(np.abs(diff)))


def fit_mle(family: str, data, level: float = 0.95, min_samples: int = MIN_SAMPLES) -> FitResult:
    """Maximum-likelihood fit of one family to an accumulator or raw samples."""
    name = canonical_family(family)
    model = MODELS[name]
    d = _prepare(data, min_samples)
    method = "grouped" if d.grouped else "raw"
    result = FitResult(family=name, params=None, n=d.n, method=method,
                       param_names=model.param_names)

    if name == "rayleigh":
        # sigma^2 = sum x^2 / (2n) exactly; sum of squares is tracked unbinned
        theta = np.array([0.5 * math.log(d.mean_sq / 2.0)])
        f, g = model.objective(theta, d)
        result.covariance = np.array([[1.0 / (4.0 * d.n)]])
        result.converged, result.iterations = True, 0
        if d.degenerate:
            result.warnings.append("all samples equal; estimate is non-informative")
    elif name == "lognormal" and not d.grouped:
        if d.degenerate:
            raise DegenerateDataError("all samples equal; log-normal fit undefined")
        mu = float(d.logx.mean())
        sigma = float(d.logx.std())
        theta = np.array([mu, math.log(sigma)])
        f, g = model.objective(theta, d)
        result.covariance = np.diag([sigma * sigma / d.n, 1.0 / (2.0 * d.n)])
        result.converged, result.iterations = True, 0
    else:
        if d.degenerate:
            raise DegenerateDataError(f"all samples fall in one value/bin; {name} fit undefined")

        def fun(t):
            return model.objective(np.asarray(t, dtype=float), d)

        if name == "generalized_gamma":
            gamma_fit = fit_mle("gamma", data, level=level, min_samples=min_samples)
            k, beta = np.exp(gamma_fit.theta)
            theta0 = np.log([1.0, beta, k])
        else:
            theta0 = _start(model, d)
        theta, f, g, iters, trace = _minimize(fun, theta0)
        gnorm = float(np.linalg.norm(g))
        if not (np.isfinite(f) and gnorm < GRAD_TOL):
            raise ConvergenceError(
                f"{name} fit did not converge (grad norm {gnorm:.3g}, objective {f:.6g})", trace)
        result.converged, result.iterations = True, iters
        H = _fd_hessian(fun, theta) * d.n
        try:
            np.linalg.cholesky(H)
            result.covariance = np.linalg.inv(H)
        except np.linalg.LinAlgError:
            result.warnings.append("observed information not positive definite (flat likelihood)")

    result.theta = theta
    result.params = model.build(theta)
    result.log_likelihood = float(-f * d.n)
    result.grad_norm = float(np.linalg.norm(g))
    if level is not None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            result.ci_95 = confidence_intervals(result, level)
    result.rmse, result.max_abs_variation = gof_metrics(_gof_accumulator(d), result.params.cdf)
    return result


def rank_families(acc, families=FAMILIES, level: float = 0.95,
                  min_samples: int = MIN_RANK_SAMPLES) -> list[FitResult]:
    """Fit every family and sort by rmse; failed fits are kept at the end."""
    n = acc.n if isinstance(acc, EcdfAccumulator) else np.size(acc)
    if n < min_samples:
        raise SampleSizeError(f"ranking needs at least {min_samples} samples, got {n}")
    ok, failed = [], []
    for fam in families:
        name = canonical_family(fam)
        try:
            ok.append(fit_mle(name, acc, level=level))
        except VoronoiExtremesError as exc:
            log.warning("%s fit failed: %s", name, exc)
            failed.append(FitResult(family=name, params=None, n=n, error=str(exc)))
    ok.sort(key=lambda r: r.rmse)
    return ok + failed
