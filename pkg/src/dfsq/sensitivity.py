"""Functional sensitivity profiles.

The univariate profile is ``|g'|``.  For a multivariate ``g`` the profile of
source ``n`` is the conditional root-mean-square of ``dg/dx_n`` given
``X_n = x``, estimated here by Monte Carlo on a quantile grid and stored as a
tabulated, monotone-cubic interpolant.
"""
from __future__ import annotations

import csv
import math
from collections.abc import Callable, Sequence
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

from ._io import out_path, text_out
from .computations import Computation
from .errors import EstimationError, InvalidParameterError
from .sources import ProductSource

GRID_KNOTS = 257
EXTRAPOLATION = "constant"


class SensitivityProfile:
    """Nonnegative weighting ``gamma(x)``.

    ``form`` is ``"analytic"`` (wrapping a callable) or ``"tabulated"``
    (knots ``grid_x``/``grid_gamma`` with per-knot standard errors).
    ``zeros`` lists abscissae where the profile vanishes or has a kink;
    quadrature splits there.
    """

    def __init__(self, func: Callable | None = None, *, form: str = "analytic",
                 grid_x=None, grid_gamma=None, stderr=None, zeros: Sequence[float] = (),
                 name: str = "gamma", metadata: dict | None = None):
        self.form = form
        self.name = name
        self.metadata = dict(metadata or {})
        if form == "analytic":
            if func is None:
                raise InvalidParameterError("analytic profile needs a callable")
            self._func = func
            self.grid_x = self.grid_gamma = self.stderr = None
            self.zeros = tuple(float(z) for z in zeros)
        elif form == "tabulated":
            gx = np.asarray(grid_x, dtype=float)
            gg = np.asarray(grid_gamma, dtype=float)
            if gx.ndim != 1 or gx.shape != gg.shape or len(gx) < 1:
                raise InvalidParameterError("tabulated profile needs matching 1-D knot arrays")
            if np.any(np.diff(gx) <= 0):
                raise InvalidParameterError("tabulated knots must be strictly increasing")
            if np.any(gg < 0):
                raise InvalidParameterError("sensitivity values must be nonnegative")
            self.grid_x, self.grid_gamma = gx, gg
            self.stderr = None if stderr is None else np.asarray(stderr, dtype=float)
            if len(gx) == 1:
                self._interp = lambda x, v=float(gg[0]): np.full(np.shape(x), v)
            else:
                self._interp = PchipInterpolator(gx, gg, extrapolate=False)
            # every knot is a potential derivative jump of the interpolant
            self.zeros = tuple(float(z) for z in gx) + tuple(float(z) for z in zeros)
            self.metadata.setdefault("extrapolation", EXTRAPOLATION)
        else:
            raise InvalidParameterError(f"unknown profile form {form!r}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.form == "analytic":
            return np.abs(np.asarray(self._func(x), dtype=float))
        y = self._interp(np.clip(x, self.grid_x[0], self.grid_x[-1]))
        return np.maximum(y, 0.0)

    def scaled(self, factor: float) -> SensitivityProfile:
        """Profile multiplied by ``factor >= 0``."""
        if factor < 0:
            raise InvalidParameterError("scale factor must be nonnegative")
        if self.form == "analytic":
            f = self._func
            return SensitivityProfile(lambda x: factor * np.abs(f(x)), zeros=self.zeros,
                                      name=f"{factor}*{self.name}", metadata=self.metadata)
        se = None if self.stderr is None else factor * self.stderr
        return SensitivityProfile(form="tabulated", grid_x=self.grid_x,
                                  grid_gamma=factor * self.grid_gamma, stderr=se,
                                  name=f"{factor}*{self.name}", metadata=self.metadata)

    def to_csv(self, path, grid=None):
        """Write ``x,gamma`` rows; tabulated profiles write their knots."""
        xs = self.grid_x if grid is None and self.form == "tabulated" else np.asarray(grid)
        if xs is None:
            raise InvalidParameterError("analytic profiles need an explicit grid to serialize")
        with text_out(path) as fh:
            meta = {"name": self.name, "form": self.form, **self.metadata}
            fh.write("# " + " ".join(f"{k}={v}" for k, v in sorted(meta.items())) + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "gamma"])
            for x, gm in zip(xs, self(xs)):
                w.writerow([repr(float(x)), repr(float(gm))])
        return out_path(path)

    @classmethod
    def from_csv(cls, path) -> SensitivityProfile:
        meta = {}
        xs, gs = [], []
        with Path(path).open() as fh:
            for line in fh:
                if line.startswith("#"):
                    for item in line[1:].split():
                        k, _, v = item.partition("=")
                        meta[k] = v
                    continue
                if line.startswith("x,"):
                    continue
                a, b = line.strip().split(",")
                xs.append(float(a))
                gs.append(float(b))
        name = meta.pop("name", "gamma")
        meta.pop("form", None)
        return cls(form="tabulated", grid_x=xs, grid_gamma=gs, name=name, metadata=meta)

    def __repr__(self):
        return f"SensitivityProfile({self.name}, {self.form})"


def univariate_sensitivity(g: Computation) -> SensitivityProfile:
    """``gamma(x) = |g'(x)|``."""
    if g.arity != 1 or g.output_dim != 1:
        raise InvalidParameterError("univariate_sensitivity needs a scalar univariate g")
    return SensitivityProfile(lambda x: np.abs(g.partial(0, np.atleast_1d(x))).reshape(np.shape(x)),
                              zeros=g.kinks, name=f"|{g.name}'|")


def constant_sensitivity(value: float = 1.0) -> SensitivityProfile:
    return SensitivityProfile(lambda x: np.full(np.shape(x), float(value)),
                              name=f"const[{value}]")


def min_exponential_sensitivity(N: int, rate: float = 1.0) -> SensitivityProfile:
    """Closed-form profile of ``min`` over ``N`` iid exponential sources."""
    if N < 2:
        raise InvalidParameterError("N must be >= 2")
    if not rate > 0:
        raise InvalidParameterError("rate must be positive")
    k = rate * (N - 1) / 2.0
    return SensitivityProfile(lambda x: np.exp(-k * np.maximum(np.asarray(x, dtype=float), 0.0)),
                              zeros=(0.0,), name=f"min_exp[N={N},rate={rate}]")


def quantile_grid(src, knots: int = GRID_KNOTS) -> np.ndarray:
    """Knots uniform in probability plus one extra knot deep in each tail."""
    inner = np.arange(1, knots - 1) / (knots - 1)
    u = np.concatenate([[1e-6], inner, [1.0 - 1e-6]])
    x = np.asarray(src.inv_cdf(u), dtype=float)
    return np.unique(x)


def _knot_streams(seed, count):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def weighted_sensitivity(g: Computation, src: ProductSource, n: int, weights=None, grid=None,
                         samples_per_point: int = 10_000, seed=0) -> SensitivityProfile:
    """Monte Carlo estimate of ``sqrt(sum_m w_m E[|dg^(m)/dx_n|^2 | X_n = x])``.

    Knot ``i`` draws from its own substream spawned from ``seed``, so results do
    not depend on evaluation order.  Samples on the non-smooth set are dropped
    and replaced.
    """
    if not isinstance(src, ProductSource):
        raise InvalidParameterError("weighted_sensitivity needs a ProductSource")
    if g.arity != src.N:
        raise InvalidParameterError(f"g has arity {g.arity} but the source has {src.N} marginals")
    if not 0 <= n < src.N:
        raise InvalidParameterError(f"source index {n} out of range")
    if samples_per_point < 1000:
        raise InvalidParameterError("samples_per_point must be >= 1000")
    w = np.ones(g.output_dim) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (g.output_dim,):
        raise InvalidParameterError(f"expected {g.output_dim} weights, got {w.shape}")
    if np.any(w < 0):
        raise InvalidParameterError("weights must be nonnegative")
    if not np.any(w > 0):
        raise InvalidParameterError("weights must not all be zero")
    xs = quantile_grid(src[n]) if grid is None else np.asarray(grid, dtype=float)
    streams = _knot_streams(seed, len(xs))
    gamma = np.empty(len(xs))
    stderr = np.empty(len(xs))
    for i, (x, rng) in enumerate(zip(xs, streams)):
        vals = []
        have = 0
        tries = 0
        while have < samples_per_point:
            pts = src.sample_conditional(rng, n, x, samples_per_point - have)
            keep = ~g.nonsmooth(pts)
            pts = pts[keep]
            if len(pts):
                d = g.partial(n, pts)
                if d.ndim == 1:
                    d = d[:, None]
                vals.append((d * d) @ w)
                have += len(pts)
            tries += 1
            if tries > 50:
                raise EstimationError(f"knot x={x!r}: samples keep landing on the non-smooth set")
        v = np.concatenate(vals)
        mean = float(np.mean(v))
        se_mean = float(np.std(v, ddof=1) / math.sqrt(len(v)))
        gamma[i] = math.sqrt(max(mean, 0.0))
        # delta method for the square root
        stderr[i] = se_mean / (2.0 * gamma[i]) if gamma[i] > 0 else math.sqrt(se_mean)
    meta = {"samples_per_point": samples_per_point, "seed": seed, "source_index": n,
            "weights": ";".join(repr(float(b)) for b in w)}
    return SensitivityProfile(form="tabulated", grid_x=xs, grid_gamma=gamma, stderr=stderr,
                              name=f"gamma_{n}[{g.name}]", metadata=meta)


def multivariate_sensitivity_mc(g: Computation, src: ProductSource, n: int, grid=None,
                                samples_per_point: int = 10_000, seed=0) -> SensitivityProfile:
    """``gamma_n(x) = sqrt(E[|dg/dx_n|^2 | X_n = x])`` for scalar ``g``."""
    if g.output_dim != 1:
        raise InvalidParameterError("use weighted_sensitivity for vector-valued g")
    return weighted_sensitivity(g, src, n, None, grid, samples_per_point, seed)
