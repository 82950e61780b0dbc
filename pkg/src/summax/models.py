"""Input distribution models: nonnegative continuous densities and integer mass functions.

Evaluation helpers are vectorized over numpy arrays and return python floats for
scalar input. Sampling is inverse-transform throughout and consumes exactly one
uniform variate per draw, so streams are reproducible for a fixed seed and draw
order. The recommended bit generator is Philox (counter-based, cheap to split);
``make_rng`` constructs one.

A model with ``shift`` c describes the variable X' = X - c where X follows the
base nonnegative law, so the support starts at -c. Engines operate on base laws
and fold shifts in afterwards; the evaluation helpers here honour the shift
directly: pdf'(x) = pdf(x + c), cdf'(x) = cdf(x + c), quantile'(u) = quantile(u) - c.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import special as sp

from .errors import ModelError

__all__ = [
    "ContinuousFamily",
    "DiscreteFamily",
    "ContinuousModel",
    "DiscreteModel",
    "exponential",
    "uniform",
    "gamma",
    "weibull",
    "tabulated",
    "poisson",
    "geometric",
    "binomial",
    "uniform_int",
    "explicit",
    "bernoulli",
    "pdf_eval",
    "cdf_eval",
    "pmf_eval",
    "dcdf_eval",
    "quantile",
    "support_quantile",
    "sample",
    "make_rng",
    "model_fingerprint",
    "canonical_text",
]


class ContinuousFamily(str, Enum):
    EXPONENTIAL = "exponential"
    UNIFORM = "uniform"
    GAMMA = "gamma"
    WEIBULL = "weibull"
    TABULATED = "tabulated"


class DiscreteFamily(str, Enum):
    POISSON = "poisson"
    GEOMETRIC = "geometric"
    BINOMIAL = "binomial"
    UNIFORM_INT = "uniform_int"
    EXPLICIT = "explicit"


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ModelError(message)


def _finite(*values: float) -> bool:
    return all(math.isfinite(v) for v in values)


@dataclass(frozen=True, eq=False)
class ContinuousModel:
    """A nonnegative continuous law, possibly translated left by ``shift``.

    ``params`` is family specific; use the factory functions rather than the
    constructor. Tabulated densities live in ``table_x``/``table_d`` and are
    renormalized on construction when their trapezoid mass is within 1e-3 of 1.
    """

    family: ContinuousFamily
    params: tuple[float, ...]
    shift: float = 0.0
    table_x: np.ndarray | None = None
    table_d: np.ndarray | None = None

    def __post_init__(self):
        _require(isinstance(self.family, ContinuousFamily), "unknown continuous family")
        _require(math.isfinite(self.shift) and self.shift >= 0.0, "shift must be finite and >= 0")
        p = self.params
        fam = self.family
        if fam is ContinuousFamily.EXPONENTIAL:
            _require(len(p) == 1 and _finite(*p) and p[0] > 0, "exponential needs rate > 0")
        elif fam is ContinuousFamily.UNIFORM:
            _require(len(p) == 2 and _finite(*p), "uniform needs finite bounds")
            _require(0.0 <= p[0] < p[1], "uniform needs 0 <= lower < upper")
        elif fam is ContinuousFamily.GAMMA:
            _require(len(p) == 2 and _finite(*p) and p[0] > 0 and p[1] > 0,
                     "gamma needs shape > 0 and rate > 0")
        elif fam is ContinuousFamily.WEIBULL:
            _require(len(p) == 2 and _finite(*p) and p[0] > 0 and p[1] > 0,
                     "weibull needs shape > 0 and scale > 0")
        elif fam is ContinuousFamily.TABULATED:
            xs = np.ascontiguousarray(np.asarray(self.table_x, dtype=np.float64))
            ds = np.ascontiguousarray(np.asarray(self.table_d, dtype=np.float64))
            _require(xs.ndim == 1 and ds.ndim == 1 and xs.size == ds.size and xs.size >= 2,
                     "tabulated needs matching abscissa and density vectors of length >= 2")
            _require(bool(np.all(np.isfinite(xs)) and np.all(np.isfinite(ds))),
                     "tabulated values must be finite")
            _require(xs[0] == 0.0, "tabulated abscissae must start at 0")
            _require(bool(np.all(np.diff(xs) > 0)), "tabulated abscissae must be strictly increasing")
            _require(bool(np.all(ds >= 0.0)), "tabulated density must be nonnegative")
            mass = float(np.trapezoid(ds, xs))
            _require(abs(mass - 1.0) <= 1e-3, f"tabulated mass {mass:.6f} is not within 1e-3 of 1")
            ds = ds / mass
            cum = np.concatenate(([0.0], np.cumsum(np.diff(xs) * (ds[:-1] + ds[1:]) / 2.0)))
            cum[-1] = 1.0
            object.__setattr__(self, "table_x", xs)
            object.__setattr__(self, "table_d", ds)
            object.__setattr__(self, "_table_cum", cum)

    @property
    def kind(self) -> str:
        return "continuous"

    def with_shift(self, shift: float) -> "ContinuousModel":
        return ContinuousModel(self.family, self.params, shift, self.table_x, self.table_d)


@dataclass(frozen=True, eq=False)
class DiscreteModel:
    """An integer-supported law on {0, 1, ...}, possibly translated left by ``shift``.

    Unbounded families are truncated at the smallest k_max whose tail mass is at
    most ``truncation_epsilon``; the dropped tail is tracked, never redistributed.
    """

    family: DiscreteFamily
    params: tuple[float, ...]
    shift: int = 0
    truncation_epsilon: float = 1e-10
    probs: np.ndarray | None = None

    def __post_init__(self):
        _require(isinstance(self.family, DiscreteFamily), "unknown discrete family")
        _require(isinstance(self.shift, (int, np.integer)) and self.shift >= 0,
                 "discrete shift must be a nonnegative integer")
        eps = self.truncation_epsilon
        _require(math.isfinite(eps) and 0.0 < eps < 1.0, "truncation_epsilon must lie in (0, 1)")
        p = self.params
        fam = self.family
        if fam is DiscreteFamily.POISSON:
            _require(len(p) == 1 and _finite(*p) and p[0] > 0, "poisson needs mean > 0")
            vec = _poisson_vector(p[0], eps)
        elif fam is DiscreteFamily.GEOMETRIC:
            _require(len(p) == 1 and _finite(*p) and 0.0 < p[0] <= 1.0, "geometric needs p in (0, 1]")
            vec = _geometric_vector(p[0], eps)
        elif fam is DiscreteFamily.BINOMIAL:
            trials = p[0]
            _require(len(p) == 2 and float(trials).is_integer() and trials >= 1,
                     "binomial needs an integer trial count >= 1")
            _require(_finite(p[1]) and 0.0 <= p[1] <= 1.0, "binomial needs p in [0, 1]")
            vec = _binomial_vector(int(trials), p[1])
        elif fam is DiscreteFamily.UNIFORM_INT:
            lo, hi = p
            _require(float(lo).is_integer() and float(hi).is_integer(), "uniform_int needs integer bounds")
            _require(0 <= lo <= hi, "uniform_int needs 0 <= lower <= upper")
            vec = np.zeros(int(hi) + 1)
            vec[int(lo):] = 1.0 / (int(hi) - int(lo) + 1)
        elif fam is DiscreteFamily.EXPLICIT:
            vec = np.ascontiguousarray(np.asarray(self.probs, dtype=np.float64))
            _require(vec.ndim == 1 and vec.size >= 1, "explicit needs a nonempty probability vector")
            _require(bool(np.all(np.isfinite(vec)) and np.all(vec >= 0.0)),
                     "explicit probabilities must be finite and nonnegative")
            total = float(vec.sum())
            _require(abs(total - 1.0) <= 1e-12, f"explicit probabilities sum to {total!r}, not 1")
            object.__setattr__(self, "probs", vec)
        object.__setattr__(self, "_vec", np.ascontiguousarray(vec))
        object.__setattr__(self, "_cum", np.cumsum(vec))

    @property
    def kind(self) -> str:
        return "discrete"

    @property
    def k_max(self) -> int:
        """Largest retained support point of the base (unshifted) law."""
        return len(self._vec) - 1

    @property
    def truncated_mass(self) -> float:
        """Tail probability dropped by truncation (0 for bounded families)."""
        return max(0.0, 1.0 - float(self._cum[-1]))

    def pmf_vector(self) -> np.ndarray:
        """Copy of the retained base mass function over 0..k_max."""
        return self._vec.copy()

    def with_shift(self, shift: int) -> "DiscreteModel":
        return DiscreteModel(self.family, self.params, shift, self.truncation_epsilon, self.probs)


def _poisson_vector(mean: float, eps: float) -> np.ndarray:
    out = [math.exp(-mean)]
    cum = out[0]
    k = 0
    while cum < 1.0 - eps:
        k += 1
        if k > 2_000_000:
            raise ModelError("poisson truncation did not converge")
        out.append(out[-1] * mean / k)
        cum += out[-1]
    return np.array(out)


def _geometric_vector(p: float, eps: float) -> np.ndarray:
    if p == 1.0:
        return np.array([1.0])
    # tail beyond k is (1-p)^(k+1)
    k_max = max(0, math.ceil(math.log(eps) / math.log1p(-p) - 1.0))
    k = np.arange(k_max + 1)
    return p * np.power(1.0 - p, k)


def _binomial_vector(trials: int, p: float) -> np.ndarray:
    if p == 0.0:
        vec = np.zeros(trials + 1)
        vec[0] = 1.0
        return vec
    if p == 1.0:
        vec = np.zeros(trials + 1)
        vec[-1] = 1.0
        return vec
    out = np.empty(trials + 1)
    out[0] = (1.0 - p) ** trials
    ratio = p / (1.0 - p)
    for k in range(1, trials + 1):
        out[k] = out[k - 1] * ratio * (trials - k + 1) / k
    return out


# ---------------------------------------------------------------------------
# factory functions

def exponential(rate: float, shift: float = 0.0) -> ContinuousModel:
    return ContinuousModel(ContinuousFamily.EXPONENTIAL, (float(rate),), float(shift))


def uniform(lower: float, upper: float, shift: float = 0.0) -> ContinuousModel:
    return ContinuousModel(ContinuousFamily.UNIFORM, (float(lower), float(upper)), float(shift))


def gamma(shape: float, rate: float, shift: float = 0.0) -> ContinuousModel:
    return ContinuousModel(ContinuousFamily.GAMMA, (float(shape), float(rate)), float(shift))


def weibull(shape: float, scale: float, shift: float = 0.0) -> ContinuousModel:
    return ContinuousModel(ContinuousFamily.WEIBULL, (float(shape), float(scale)), float(shift))


def tabulated(abscissae, densities, shift: float = 0.0) -> ContinuousModel:
    return ContinuousModel(ContinuousFamily.TABULATED, (), float(shift),
                           np.asarray(abscissae, dtype=np.float64),
                           np.asarray(densities, dtype=np.float64))


def poisson(mean: float, shift: int = 0, truncation_epsilon: float = 1e-10) -> DiscreteModel:
    return DiscreteModel(DiscreteFamily.POISSON, (float(mean),), int(shift), truncation_epsilon)


def geometric(p: float, shift: int = 0, truncation_epsilon: float = 1e-10) -> DiscreteModel:
    return DiscreteModel(DiscreteFamily.GEOMETRIC, (float(p),), int(shift), truncation_epsilon)


def binomial(trials: int, p: float, shift: int = 0) -> DiscreteModel:
    return DiscreteModel(DiscreteFamily.BINOMIAL, (float(trials), float(p)), int(shift))


def uniform_int(lower: int, upper: int, shift: int = 0) -> DiscreteModel:
    return DiscreteModel(DiscreteFamily.UNIFORM_INT, (float(lower), float(upper)), int(shift))


def explicit(probabilities, shift: int = 0) -> DiscreteModel:
    return DiscreteModel(DiscreteFamily.EXPLICIT, (), int(shift),
                         probs=np.asarray(probabilities, dtype=np.float64))


def bernoulli(p: float, shift: int = 0) -> DiscreteModel:
    """Convenience wrapper: an explicit two-point mass function on {0, 1}."""
    _require(0.0 <= p <= 1.0, "bernoulli needs p in [0, 1]")
    return explicit([1.0 - p, p], shift)


# ---------------------------------------------------------------------------
# evaluation

def _as_array(x):
    arr = np.asarray(x, dtype=np.float64)
    return arr, arr.ndim == 0


def _ret(arr: np.ndarray, scalar: bool):
    return float(arr) if scalar else arr


def pdf_eval(model: ContinuousModel, x) -> float | np.ndarray:
    """Density of the (shifted) variable at x. Zero outside the support.

    Gamma and weibull densities with shape < 1 diverge at the left endpoint;
    they are evaluated as 0 exactly there.
    """
    _require(isinstance(model, ContinuousModel), "pdf_eval needs a continuous model")
    arr, scalar = _as_array(x)
    t = arr + model.shift
    fam = model.family
    p = model.params
    if fam is ContinuousFamily.EXPONENTIAL:
        lam = p[0]
        out = np.where(t >= 0.0, lam * np.exp(-lam * np.maximum(t, 0.0)), 0.0)
    elif fam is ContinuousFamily.UNIFORM:
        a, b = p
        out = np.where((t >= a) & (t <= b), 1.0 / (b - a), 0.0)
    elif fam is ContinuousFamily.GAMMA:
        k, rate = p
        with np.errstate(divide="ignore", invalid="ignore"):
            body = np.exp(k * math.log(rate) + (k - 1.0) * np.log(np.maximum(t, 1e-300))
                          - rate * t - math.lgamma(k))
        out = np.where(t > 0.0, body, 0.0)
        if k == 1.0:
            out = np.where(t == 0.0, rate, out)
    elif fam is ContinuousFamily.WEIBULL:
        k, lam = p
        u = np.maximum(t, 0.0) / lam
        with np.errstate(divide="ignore", invalid="ignore"):
            body = (k / lam) * np.power(np.maximum(u, 1e-300), k - 1.0) * np.exp(-np.power(u, k))
        out = np.where(t > 0.0, body, 0.0)
        if k == 1.0:
            out = np.where(t == 0.0, 1.0 / lam, out)
    else:
        out = np.interp(t, model.table_x, model.table_d, left=0.0, right=0.0)
    return _ret(out, scalar)


def cdf_eval(model: ContinuousModel, x) -> float | np.ndarray:
    """Distribution function of the (shifted) variable at x."""
    _require(isinstance(model, ContinuousModel), "cdf_eval needs a continuous model")
    arr, scalar = _as_array(x)
    t = arr + model.shift
    fam = model.family
    p = model.params
    if fam is ContinuousFamily.EXPONENTIAL:
        out = np.where(t > 0.0, -np.expm1(-p[0] * np.maximum(t, 0.0)), 0.0)
    elif fam is ContinuousFamily.UNIFORM:
        a, b = p
        out = np.clip((t - a) / (b - a), 0.0, 1.0)
    elif fam is ContinuousFamily.GAMMA:
        k, rate = p
        out = sp.gammainc(k, rate * np.maximum(t, 0.0))
    elif fam is ContinuousFamily.WEIBULL:
        k, lam = p
        out = np.where(t > 0.0, -np.expm1(-np.power(np.maximum(t, 0.0) / lam, k)), 0.0)
    else:
        out = _tabulated_cdf(model, t)
    return _ret(out, scalar)


def _tabulated_cdf(model: ContinuousModel, t: np.ndarray) -> np.ndarray:
    xs, ds, cum = model.table_x, model.table_d, model._table_cum
    tt = np.clip(t, xs[0], xs[-1])
    idx = np.clip(np.searchsorted(xs, tt, side="right") - 1, 0, xs.size - 2)
    x0 = xs[idx]
    dt = tt - x0
    seg = xs[idx + 1] - x0
    slope = (ds[idx + 1] - ds[idx]) / seg
    out = cum[idx] + ds[idx] * dt + 0.5 * slope * dt * dt
    out = np.where(t <= xs[0], 0.0, np.where(t >= xs[-1], 1.0, out))
    return np.clip(out, 0.0, 1.0)


def quantile(model: ContinuousModel, u) -> float | np.ndarray:
    """Inverse distribution function of the (shifted) variable, u in [0, 1)."""
    _require(isinstance(model, ContinuousModel), "quantile needs a continuous model")
    arr, scalar = _as_array(u)
    _require(bool(np.all((arr >= 0.0) & (arr < 1.0))), "quantile needs u in [0, 1)")
    fam = model.family
    p = model.params
    if fam is ContinuousFamily.EXPONENTIAL:
        out = -np.log1p(-arr) / p[0]
    elif fam is ContinuousFamily.UNIFORM:
        out = p[0] + arr * (p[1] - p[0])
    elif fam is ContinuousFamily.GAMMA:
        out = sp.gammaincinv(p[0], arr) / p[1]
    elif fam is ContinuousFamily.WEIBULL:
        out = p[1] * np.power(-np.log1p(-arr), 1.0 / p[0])
    else:
        out = _tabulated_quantile(model, arr)
    return _ret(out - model.shift, scalar)


def _tabulated_quantile(model: ContinuousModel, u: np.ndarray) -> np.ndarray:
    xs, ds, cum = model.table_x, model.table_d, model._table_cum
    idx = np.clip(np.searchsorted(cum, u, side="right") - 1, 0, xs.size - 2)
    # within the segment the mass is d0*t + slope*t^2/2; invert the quadratic
    seg = xs[idx + 1] - xs[idx]
    d0 = ds[idx]
    slope = (ds[idx + 1] - d0) / seg
    target = u - cum[idx]
    with np.errstate(divide="ignore", invalid="ignore"):
        disc = np.sqrt(np.maximum(d0 * d0 + 2.0 * slope * target, 0.0))
        quad = (disc - d0) / np.where(slope == 0.0, 1.0, slope)
        lin = target / np.where(d0 == 0.0, 1.0, d0)
    t = np.where(np.abs(slope) * seg > 1e-14 * np.maximum(d0, 1e-300), quad, lin)
    # a segment with d0 = 0 and slope = 0 carries no mass; searchsorted skips it
    return xs[idx] + np.clip(t, 0.0, seg)


def pmf_eval(model: DiscreteModel, k) -> float | np.ndarray:
    """Mass of the (shifted) variable at integer points k; zero elsewhere."""
    _require(isinstance(model, DiscreteModel), "pmf_eval needs a discrete model")
    arr, scalar = _as_array(k)
    t = np.rint(arr).astype(np.int64)
    valid = (np.abs(arr - t) < 1e-9)
    t = t + model.shift
    vec = model._vec
    inside = valid & (t >= 0) & (t <= model.k_max)
    out = np.where(inside, vec[np.clip(t, 0, model.k_max)], 0.0)
    # unbounded families keep their analytic tail beyond the truncation point
    beyond = valid & (t > model.k_max)
    if np.any(beyond):
        if model.family is DiscreteFamily.POISSON:
            mu = model.params[0]
            tb = t[beyond].astype(np.float64)
            out = out.astype(np.float64)
            out[beyond] = np.exp(-mu + tb * math.log(mu) - sp.gammaln(tb + 1.0))
        elif model.family is DiscreteFamily.GEOMETRIC:
            p = model.params[0]
            out = out.astype(np.float64)
            out[beyond] = p * np.power(1.0 - p, t[beyond].astype(np.float64)) if p < 1.0 else 0.0
    return _ret(out, scalar)


def dcdf_eval(model: DiscreteModel, x) -> float | np.ndarray:
    """Distribution function of the (shifted) variable: sum of masses up to floor(x)."""
    _require(isinstance(model, DiscreteModel), "dcdf_eval needs a discrete model")
    arr, scalar = _as_array(x)
    t = np.floor(arr).astype(np.int64) + model.shift
    if model.family is DiscreteFamily.POISSON:
        out = np.where(t >= 0, sp.pdtr(np.maximum(t, 0), model.params[0]), 0.0)
    elif model.family is DiscreteFamily.GEOMETRIC:
        p = model.params[0]
        tf = np.maximum(t, -1).astype(np.float64)
        out = np.where(t >= 0, -np.expm1(np.log1p(-p) * (tf + 1.0)) if p < 1.0 else 1.0, 0.0)
    else:
        cum = model._cum
        out = np.where(t >= 0, cum[np.clip(t, 0, model.k_max)], 0.0)
        out = np.where(t > model.k_max, 1.0, out)
    return _ret(np.clip(out, 0.0, 1.0), scalar)


def support_quantile(model, epsilon: float) -> float:
    """Smallest q with cdf(q) >= 1 - epsilon for the (shifted) variable.

    Bounded supports report their exact upper endpoint. The gamma family has no
    closed inverse and is bisected against its distribution function.
    """
    _require(0.0 < epsilon < 1.0, "support_quantile needs epsilon in (0, 1)")
    if isinstance(model, DiscreteModel):
        target = 1.0 - epsilon
        cum = model._cum
        if cum[-1] >= target:
            idx = int(np.searchsorted(cum, target - 1e-15))
            return float(idx - model.shift)
        return float(model.k_max - model.shift)
    _require(isinstance(model, ContinuousModel), "support_quantile needs a model")
    fam = model.family
    p = model.params
    if fam is ContinuousFamily.EXPONENTIAL:
        q = -math.log(epsilon) / p[0]
    elif fam is ContinuousFamily.UNIFORM:
        q = p[1]
    elif fam is ContinuousFamily.WEIBULL:
        q = p[1] * (-math.log(epsilon)) ** (1.0 / p[0])
    elif fam is ContinuousFamily.TABULATED:
        q = float(model.table_x[-1])
    else:
        base = model.with_shift(0.0) if model.shift else model
        target = 1.0 - epsilon
        hi = max(1.0, p[0] / p[1])
        while cdf_eval(base, hi) < target:
            hi *= 2.0
            if hi > 1e12:
                raise ModelError("support quantile bisection diverged")
        lo = 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if cdf_eval(base, mid) < target:
                lo = mid
            else:
                hi = mid
        q = hi
    return q - model.shift


def make_rng(seed: int) -> np.random.Generator:
    """A Philox-backed generator; counter-based, so safe to spawn per batch."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def sample(model, rng: np.random.Generator, size=None):
    """Inverse-transform draws from the (shifted) law; one uniform per draw."""
    u = rng.random() if size is None else rng.random(size)
    if isinstance(model, ContinuousModel):
        return quantile(model, u)
    _require(isinstance(model, DiscreteModel), "sample needs a model")
    arr, scalar = _as_array(u)
    if model.family is DiscreteFamily.GEOMETRIC:
        p = model.params[0]
        k = np.zeros_like(arr) if p == 1.0 else np.floor(np.log1p(-arr) / math.log1p(-p))
    else:
        # draws falling in the truncated tail (at most truncation_epsilon of them
        # in expectation) land on k_max
        k = np.searchsorted(model._cum, arr, side="right").astype(np.float64)
        k = np.minimum(k, model.k_max)
    return _ret(k - model.shift, scalar)


# ---------------------------------------------------------------------------
# fingerprinting

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_FNV_MASK = (1 << 64) - 1


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _FNV_MASK
    return h


def canonical_text(model) -> str:
    """Stable one-line description of a model, used for fingerprinting."""
    if isinstance(model, ContinuousModel):
        parts = [model.kind, model.family.value]
        parts += [repr(float(v)) for v in model.params]
        if model.family is ContinuousFamily.TABULATED:
            parts.append(",".join(repr(float(v)) for v in model.table_x))
            parts.append(",".join(repr(float(v)) for v in model.table_d))
        parts.append(f"shift={model.shift!r}")
        return ":".join(parts)
    _require(isinstance(model, DiscreteModel), "canonical_text needs a model")
    parts = [model.kind, model.family.value]
    parts += [repr(float(v)) for v in model.params]
    if model.family is DiscreteFamily.EXPLICIT:
        parts.append(",".join(repr(float(v)) for v in model.probs))
    parts.append(f"shift={model.shift!r}")
    parts.append(f"teps={model.truncation_epsilon!r}")
    return ":".join(parts)


def model_fingerprint(models) -> str:
    """64-bit FNV-1a digest of the model list, as 16 hex digits."""
    text = f"n={len(models)}|" + "|".join(canonical_text(m) for m in models)
    return format(_fnv1a64(text.encode("utf-8")), "016x")
