"""Scalar source distributions and iid product sources.

Every :class:`SourceModel` exposes closed-form ``pdf``, ``cdf``, ``sf`` and
``inv_cdf`` plus a sampler driven by an explicit :class:`numpy.random.Generator`.
Moments are deliberately absent: the Cauchy source has none, and nothing
downstream may assume they exist.
"""
from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import _quad
from .errors import DivergenceError, InvalidParameterError

KINDS = ("uniform", "gaussian", "exponential", "cauchy")


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, a SeedSequence or an integer seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True, eq=False)
class SourceModel:
    """A univariate source law.

    ``scale`` is a characteristic width used to lay out quadrature grids; it is
    not a moment.
    """

    kind: str
    params: dict
    support: tuple[float, float]
    pdf: Callable[[np.ndarray], np.ndarray]
    cdf: Callable[[np.ndarray], np.ndarray]
    sf: Callable[[np.ndarray], np.ndarray]
    inv_cdf: Callable[[np.ndarray], np.ndarray]
    sampler: Callable[[np.random.Generator, int], np.ndarray]
    median: float
    scale: float
    breakpoints: tuple[float, ...] = field(default=())

    def sample(self, rng, count: int) -> np.ndarray:
        return self.sampler(as_generator(rng), int(count))

    def integrate(self, func, lo=None, hi=None, rel=1e-10, what="integral"):
        """Integrate ``func`` over the support (or ``[lo, hi]``), split at the median."""
        lo = self.support[0] if lo is None else max(lo, self.support[0])
        hi = self.support[1] if hi is None else min(hi, self.support[1])
        if not lo < hi:
            return 0.0
        points = (self.median, *self.breakpoints)
        return _quad.integrate(func, lo, hi, points, center=self.median, scale=self.scale,
                               rel=rel, what=what)

    def expect(self, func, rel=1e-10, breakpoints=()):
        """``E[func(X)]`` by adaptive quadrature against the pdf."""
        lo, hi = self.support
        points = (self.median, *self.breakpoints, *breakpoints)

        def integrand(x):
            fx = self.pdf(x)
            v = np.where(fx > 0, fx * np.asarray(func(x), dtype=float), 0.0)
            return v

        return _quad.integrate(integrand, lo, hi, points, center=self.median, scale=self.scale,
                               rel=rel, what="expectation")

    def to_config(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"SourceModel({self.kind}, {args})"


def _positive(name, value):
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise InvalidParameterError(f"{name} must be positive and finite, got {value!r}")
    return value


def _finite(name, value):
    value = float(value)
    if not math.isfinite(value):
        raise InvalidParameterError(f"{name} must be finite, got {value!r}")
    return value


def _uniform(lo=0.0, hi=1.0):
    lo, hi = _finite("lo", lo), _finite("hi", hi)
    if not lo < hi:
        raise InvalidParameterError(f"uniform needs lo < hi, got [{lo}, {hi}]")
    w = hi - lo

    def pdf(x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= lo) & (x <= hi), 1.0 / w, 0.0)

    def cdf(x):
        return np.clip((np.asarray(x, dtype=float) - lo) / w, 0.0, 1.0)

    def sf(x):
        return np.clip((hi - np.asarray(x, dtype=float)) / w, 0.0, 1.0)

    def inv_cdf(u):
        return lo + w * np.asarray(u, dtype=float)

    return SourceModel("uniform", {"lo": lo, "hi": hi}, (lo, hi), pdf, cdf, sf, inv_cdf,
                       lambda rng, n: rng.uniform(lo, hi, n), 0.5 * (lo + hi), w / 2)


def _gaussian(mean=0.0, std=1.0):
    mean, std = _finite("mean", mean), _positive("std", std)
    norm = 1.0 / (std * math.sqrt(2 * math.pi))

    def pdf(x):
        z = (np.asarray(x, dtype=float) - mean) / std
        return norm * np.exp(-0.5 * z * z)

    return SourceModel(
        "gaussian", {"mean": mean, "std": std}, (-math.inf, math.inf), pdf,
        lambda x: special.ndtr((np.asarray(x, dtype=float) - mean) / std),
        lambda x: special.ndtr((mean - np.asarray(x, dtype=float)) / std),
        lambda u: mean + std * special.ndtri(np.asarray(u, dtype=float)),
        lambda rng, n: rng.normal(mean, std, n),
        mean, std,
    )


def _exponential(rate=1.0):
    rate = _positive("rate", rate)

    def pdf(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(over="ignore"):
            return np.where(x >= 0, rate * np.exp(-rate * np.maximum(x, 0.0)), 0.0)

    def cdf(x):
        return -np.expm1(-rate * np.maximum(np.asarray(x, dtype=float), 0.0))

    def sf(x):
        return np.exp(-rate * np.maximum(np.asarray(x, dtype=float), 0.0))

    def inv_cdf(u):
        return -np.log1p(-np.asarray(u, dtype=float)) / rate

    return SourceModel("exponential", {"rate": rate}, (0.0, math.inf), pdf, cdf, sf, inv_cdf,
                       lambda rng, n: rng.exponential(1.0 / rate, n),
                       math.log(2) / rate, 1.0 / rate)


def _cauchy(loc=0.0, scale=1.0):
    loc, scale = _finite("loc", loc), _positive("scale", scale)

    def pdf(x):
        z = (np.asarray(x, dtype=float) - loc) / scale
        return 1.0 / (math.pi * scale * (1.0 + z * z))

    def cdf(x):
        z = (np.asarray(x, dtype=float) - loc) / scale
        return 0.5 + np.arctan(z) / math.pi

    def sf(x):
        z = (np.asarray(x, dtype=float) - loc) / scale
        return 0.5 - np.arctan(z) / math.pi

    def inv_cdf(u):
        return loc + scale * np.tan(math.pi * (np.asarray(u, dtype=float) - 0.5))

    return SourceModel("cauchy", {"loc": loc, "scale": scale}, (-math.inf, math.inf), pdf, cdf,
                       sf, inv_cdf, lambda rng, n: loc + scale * rng.standard_cauchy(n),
                       loc, scale)


_FACTORIES = {
    "uniform": _uniform,
    "gaussian": _gaussian,
    "exponential": _exponential,
    "cauchy": _cauchy,
}


def make_source(kind: str, **params) -> SourceModel:
    """Build a source of one of :data:`KINDS`.

    Parameters: uniform(lo, hi), gaussian(mean, std), exponential(rate),
    cauchy(loc, scale).  The density is checked to integrate to one.
    """
    try:
        factory = _FACTORIES[kind]
    except KeyError:
        raise InvalidParameterError(f"unknown source kind {kind!r}; expected one of {KINDS}")
    try:
        src = factory(**params)
    except TypeError as exc:
        raise InvalidParameterError(f"bad parameters for {kind}: {exc}") from None
    mass = src.integrate(src.pdf, rel=1e-12)
    if abs(mass - 1.0) > 1e-9:
        raise InvalidParameterError(f"{kind} density integrates to {mass!r}")
    return src


def source_from_config(record: dict) -> SourceModel:
    """``{"kind": ..., "params": {...}}`` -> SourceModel."""
    return make_source(record["kind"], **dict(record.get("params", {})))


def custom_source(pdf, cdf, sf, inv_cdf, sampler, support, median, scale, name="custom",
                  breakpoints=()) -> SourceModel:
    """Wrap user-provided callables; used for derived laws such as ``g(X)``."""
    return SourceModel(name, {}, (float(support[0]), float(support[1])), pdf, cdf, sf,
                       inv_cdf, sampler, float(median), float(scale), tuple(breakpoints))


def square_law(src: SourceModel) -> SourceModel:
    """Law of ``Y = X**2`` derived from ``src`` by change of variables."""
    lo, hi = src.support
    y_hi = max(lo * lo, hi * hi)
    y_lo = 0.0 if lo <= 0.0 <= hi else min(lo * lo, hi * hi)

    def pdf(y):
        y = np.asarray(y, dtype=float)
        r = np.sqrt(np.maximum(y, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            v = (src.pdf(r) + src.pdf(-r)) / (2.0 * r)
        return np.where(y > 0, v, 0.0)

    def cdf(y):
        r = np.sqrt(np.maximum(np.asarray(y, dtype=float), 0.0))
        return np.clip(src.cdf(r) - src.cdf(-r), 0.0, 1.0)

    def sf(y):
        r = np.sqrt(np.maximum(np.asarray(y, dtype=float), 0.0))
        return np.clip(src.sf(r) + src.cdf(-r), 0.0, 1.0)

    def inv_cdf(u):
        from scipy.optimize import brentq

        u = np.atleast_1d(np.asarray(u, dtype=float))
        out = np.empty_like(u)
        for i, ui in enumerate(u):
            if ui <= 0:
                out[i] = y_lo
                continue
            if ui >= 1:
                out[i] = y_hi
                continue
            top = 1.0
            while cdf(top) < ui:
                top *= 2.0
            out[i] = brentq(lambda y: float(cdf(y)) - ui, y_lo, top, xtol=1e-15, rtol=1e-15)
        return out

    def sampler(rng, n):
        x = src.sampler(rng, n)
        return x * x

    med = float(inv_cdf(0.5)[0])
    return SourceModel(f"square_of_{src.kind}", {"base": src.to_config()}, (y_lo, y_hi), pdf,
                       cdf, sf, inv_cdf, sampler, med, max(med, 1e-3), breakpoints=(0.0,))


def diff_entropy(src: SourceModel, unit: str = "bits") -> float:
    """Differential entropy ``h(X)`` in ``unit`` ("bits" or "nats")."""
    if unit not in ("bits", "nats"):
        raise InvalidParameterError(f"unit must be 'bits' or 'nats', got {unit!r}")

    def integrand(x):
        fx = src.pdf(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = -fx * np.log(fx)
        return np.where(fx > 0, v, 0.0)

    try:
        h = src.integrate(integrand, rel=1e-10, what="differential entropy")
    except DivergenceError as exc:
        raise DivergenceError(f"differential entropy of {src!r} diverges: {exc}") from None
    return h / math.log(2) if unit == "bits" else h


class ProductSource:
    """Independent sources ``X_1..X_N``; the joint density is the product."""

    def __init__(self, marginals: Sequence[SourceModel]):
        marginals = tuple(marginals)
        if not marginals:
            raise InvalidParameterError("ProductSource needs at least one marginal")
        self.marginals = marginals

    @classmethod
    def iid(cls, src: SourceModel, n: int) -> ProductSource:
        if n < 1:
            raise InvalidParameterError("n must be >= 1")
        return cls([src] * n)

    @property
    def N(self) -> int:
        return len(self.marginals)

    def pdf(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.ones(x.shape[0])
        for n, m in enumerate(self.marginals):
            out = out * m.pdf(x[:, n])
        return out

    def sample(self, rng, count: int) -> np.ndarray:
        """``(count, N)`` array; columns drawn in order from one stream."""
        rng = as_generator(rng)
        cols = [m.sampler(rng, int(count)) for m in self.marginals]
        return np.column_stack(cols)

    def sample_conditional(self, rng, n: int, x_n: float, count: int) -> np.ndarray:
        """Draws of the full vector with coordinate ``n`` pinned to ``x_n``.

        For a product law the conditional of the others is their own product.
        """
        rng = as_generator(rng)
        cols = []
        for i, m in enumerate(self.marginals):
            if i == n:
                cols.append(np.full(int(count), float(x_n)))
            else:
                cols.append(m.sampler(rng, int(count)))
        return np.column_stack(cols)

    def __len__(self):
        return self.N

    def __getitem__(self, n):
        return self.marginals[n]
