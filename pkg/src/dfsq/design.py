"""Point densities and their compressor functions.

A design starts from an unnormalized nonnegative function on an interval.
Its normalized version is the point density ``lambda``; the running integral
of ``lambda`` is the compressor ``c``, which maps the source line onto
``[0, 1]``.  Normalization integrals, compressors and their inverses all come
from one adaptive panel table, so ``c(c^{-1}(u)) = u`` holds to quadrature
precision and unbounded supports are never truncated.
"""
from __future__ import annotations

import csv
import itertools
import math

import numpy as np

from . import _quad
from ._io import out_path, text_out
from .errors import DesignInfeasibleError, DivergenceError, InvalidParameterError
from .sensitivity import SensitivityProfile
from .sources import SourceModel

_ids = itertools.count(1)


class PointDensity:
    """Normalized point density with compressor and inverse compressor."""

    def __init__(self, unnormalized, support, *, breakpoints=(), center=0.0, scale=1.0,
                 name="custom", rel=1e-13):
        lo, hi = float(support[0]), float(support[1])
        if not lo < hi:
            raise InvalidParameterError(f"empty support [{lo}, {hi}]")
        self.support = (lo, hi)
        self.name = name
        self.id = f"{name}#{next(_ids)}"
        self._h = unnormalized
        try:
            self._table = _quad.build_panels(unnormalized, lo, hi, breakpoints, center=center,
                                             scale=scale, rel=rel, what=f"normalization of {name}")
        except DivergenceError as exc:
            raise DesignInfeasibleError(f"{name}: point density cannot be normalized ({exc})") \
                from None
        Z = self._table.total
        if not (Z > 0 and math.isfinite(Z)):
            raise DesignInfeasibleError(f"{name}: normalization constant is {Z!r}")
        self.normalization_constant = Z
        self.breakpoints = tuple(float(b) for b in breakpoints if lo < float(b) < hi)

    def __call__(self, x):
        return self.lam(x)

    def lam(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.support[0]) & (x <= self.support[1])
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            v = np.asarray(self._h(np.where(inside, x, self.support[0])), dtype=float)
        return np.where(inside, v / self.normalization_constant, 0.0)

    def compressor(self, x):
        x = np.asarray(x, dtype=float)
        c = self._table.cumulative_at(x) / self.normalization_constant
        c = np.where(x <= self.support[0], 0.0, np.where(x >= self.support[1], 1.0, c))
        return np.clip(c, 0.0, 1.0)

    def inv_compressor(self, u):
        u = np.asarray(u, dtype=float)
        if np.any((u < 0) | (u > 1)) or np.any(np.isnan(u)):
            raise InvalidParameterError("inv_compressor needs u in [0, 1]")
        t = self._table.invert_t(u * self.normalization_constant)
        x = self._table.dmap.to_x(t)
        x = np.where(u <= 0, self.support[0], np.where(u >= 1, self.support[1], x))
        return x

    def tail_mass(self, y, side="upper"):
        """``int_y^hi lambda`` (upper) or ``int_lo^y lambda`` (lower), without cancellation."""
        lo, hi = self.support
        if side == "upper":
            a, b = max(y, lo), hi
        else:
            a, b = lo, min(y, hi)
        if not a < b:
            return 0.0
        pts = [p for p in self.breakpoints if a < p < b]
        center = a if math.isinf(b) or math.isinf(a) else 0.5 * (a + b)
        return _quad.integrate(self.lam, a, b, pts, center=center if math.isfinite(center) else 0.0,
                               scale=self._table.dmap.scale, rel=1e-12, what="tail mass")

    def to_csv(self, path, grid=None, points=401):
        """Write ``x,lambda,compressor`` rows for plotting."""
        if grid is None:
            u = (np.arange(points) + 0.5) / points
            grid = self.inv_compressor(u)
        grid = np.asarray(grid, dtype=float)
        with text_out(path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "lambda", "compressor"])
            for x, lv, cv in zip(grid, self.lam(grid), self.compressor(grid)):
                w.writerow([repr(float(x)), repr(float(lv)), repr(float(cv))])
        return out_path(path)

    def __repr__(self):
        return f"PointDensity({self.id}, support={self.support})"


class UniformDensity(PointDensity):
    """Constant density on a finite interval, in closed form."""

    def __init__(self, lo, hi, name="uniform"):
        lo, hi = float(lo), float(hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise InvalidParameterError("uniform design needs a finite interval")
        if not lo < hi:
            raise InvalidParameterError(f"empty interval [{lo}, {hi}]")
        self.support = (lo, hi)
        self.name = name
        self.id = f"{name}#{next(_ids)}"
        self.normalization_constant = hi - lo
        self.breakpoints = ()
        self._h = lambda x: np.ones_like(np.asarray(x, dtype=float))

    def compressor(self, x):
        lo, hi = self.support
        return np.clip((np.asarray(x, dtype=float) - lo) / (hi - lo), 0.0, 1.0)

    def inv_compressor(self, u):
        u = np.asarray(u, dtype=float)
        if np.any((u < 0) | (u > 1)) or np.any(np.isnan(u)):
            raise InvalidParameterError("inv_compressor needs u in [0, 1]")
        lo, hi = self.support
        return lo + (hi - lo) * u

    def tail_mass(self, y, side="upper"):
        c = float(self.compressor(y))
        return 1.0 - c if side == "upper" else c


def _source_points(src: SourceModel, gamma: SensitivityProfile | None = None):
    pts = [src.median, *src.breakpoints]
    if gamma is not None:
        pts.extend(gamma.zeros)
    lo, hi = src.support
    return sorted({float(p) for p in pts if lo < p < hi})


def design_from_unnormalized(h, support, breakpoints=(), center=0.0, scale=1.0, name="custom"):
    """Normalize an arbitrary nonnegative ``h`` into a :class:`PointDensity`."""
    return PointDensity(h, support, breakpoints=breakpoints, center=center, scale=scale, name=name)


def design_mse_fixed_rate(src: SourceModel) -> PointDensity:
    """Classical fixed-rate optimum: ``lambda`` proportional to ``f**(1/3)``."""
    def h(x):
        return np.cbrt(src.pdf(x))

    return PointDensity(h, src.support, breakpoints=_source_points(src), center=src.median,
                        scale=src.scale, name=f"mse_fr[{src.kind}]")


def design_fmse_fixed_rate(src: SourceModel, gamma: SensitivityProfile) -> PointDensity:
    """Functional fixed-rate optimum: ``lambda`` proportional to ``(gamma**2 f)**(1/3)``.

    The product is formed pointwise; tabulated profile knots become panel
    breakpoints so the interpolant is never integrated across a knot.
    """
    def h(x):
        gm = gamma(x)
        return np.cbrt(gm * gm * src.pdf(x))

    return PointDensity(h, src.support, breakpoints=_source_points(src, gamma),
                        center=src.median, scale=src.scale,
                        name=f"fmse_fr[{src.kind},{gamma.name}]")


def design_fmse_entropy_constrained(gamma: SensitivityProfile, support, center=None,
                                    scale=1.0) -> PointDensity:
    """Functional entropy-constrained optimum: ``lambda`` proportional to ``gamma``.

    Only codebooks with finitely many cells are built, so ``gamma`` must be
    integrable over ``support``.
    """
    lo, hi = float(support[0]), float(support[1])
    if center is None:
        center = 0.5 * (lo + hi) if math.isfinite(lo) and math.isfinite(hi) else (
            lo if math.isfinite(lo) else (hi if math.isfinite(hi) else 0.0))
    pts = [z for z in gamma.zeros if lo < z < hi]
    return PointDensity(gamma, (lo, hi), breakpoints=pts, center=center, scale=scale,
                        name=f"fmse_ec[{gamma.name}]")


def design_uniform(interval=None, *, halfwidth=None) -> UniformDensity:
    """Constant density on ``interval=(lo, hi)`` or on ``[-halfwidth, halfwidth]``."""
    if (interval is None) == (halfwidth is None):
        raise InvalidParameterError("give exactly one of interval or halfwidth")
    if halfwidth is not None:
        w = float(halfwidth)
        if not w > 0:
            raise InvalidParameterError("halfwidth must be positive")
        return UniformDensity(-w, w)
    return UniformDensity(*interval)
