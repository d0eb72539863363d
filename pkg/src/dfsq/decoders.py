"""Univariate decoders and the simple-versus-optimal excess-fMSE study.

Every decoder reduces to a per-cell table of reconstructed ``g`` values:

* ``simple``: ``g`` of the midpoint codeword,
* ``mmse``:   ``g`` of the cell centroid ``E[X | cell]``,
* ``fmmse``:  the cell-conditional mean ``E[g(X) | cell]``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _quad
from ._io import out_path, text_out
from .computations import Computation
from .design import PointDensity
from .distortion import monte_carlo_moments
from .errors import InternalInconsistencyError, InvalidParameterError
from .quantizer import CompandingQuantizer, build_quantizer
from .sources import SourceModel

KINDS = ("simple", "mmse", "fmmse")


@dataclass
class Decoder:
    kind: str
    table: np.ndarray
    cell_values: np.ndarray
    cell_mass: np.ndarray | None = None
    flagged: np.ndarray | None = None

    def decode(self, k):
        """Reconstructed ``g`` value for 1-based cell indices ``k``."""
        return self.table[np.asarray(k) - 1]


def _cell_integrals(src: SourceModel, q: CompandingQuantizer, func):
    lo, hi = src.support
    edges = np.clip(q.edges, lo, hi)
    inner = np.unique(edges)
    if len(inner) < 2:
        raise InvalidParameterError("quantizer cells do not overlap the source support")
    points = sorted({*inner.tolist(), *[p for p in (src.median, *src.breakpoints)
                                         if lo < p < hi]})
    vals = _quad.integrate_segments(func, points, center=src.median, scale=src.scale, rel=1e-13,
                                    what="cell integral")
    # map integration segments back onto quantizer cells
    seg_edges = np.asarray(points)
    out = np.zeros(q.K)
    for k in range(q.K):
        a, b = edges[k], edges[k + 1]
        if not a < b:
            continue
        i0 = int(np.searchsorted(seg_edges, a))
        i1 = int(np.searchsorted(seg_edges, b))
        out[k] = vals[i0:i1].sum()
    return out


def build_decoder(kind: str, src: SourceModel, g: Computation,
                  quantizer: CompandingQuantizer) -> Decoder:
    """Per-cell reconstruction table for ``kind`` in :data:`KINDS`.

    Cells with no source mass fall back to the simple value and are flagged.
    """
    if kind not in KINDS:
        raise InvalidParameterError(f"unknown decoder {kind!r}; expected one of {KINDS}")
    if g.arity != 1 or g.output_dim != 1:
        raise InvalidParameterError("decoders are univariate")
    simple = np.asarray(g.eval(quantizer.codewords), dtype=float)
    if kind == "simple":
        return Decoder("simple", simple, quantizer.codewords.copy())
    mass = _cell_integrals(src, quantizer, src.pdf)
    if kind == "mmse":
        moment = _cell_integrals(src, quantizer, lambda x: x * src.pdf(x))
    else:
        moment = _cell_integrals(src, quantizer, lambda x: g.eval(x) * src.pdf(x))
    flagged = ~(mass > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.where(flagged, np.nan, moment / mass)
    if kind == "mmse":
        edges = quantizer.edges
        values = np.clip(values, edges[:-1], edges[1:])
        cell_values = np.where(flagged, quantizer.codewords, values)
        table = np.asarray(g.eval(cell_values), dtype=float)
    else:
        table = np.where(flagged, simple, values)
        cell_values = table
    return Decoder(kind, table, cell_values, mass, flagged)


@dataclass
class ExcessSweep:
    rates: np.ndarray
    K: np.ndarray
    d: dict
    se: dict
    rel_excess: np.ndarray
    rel_excess_se: np.ndarray
    slope: float = math.nan
    intercept: float = math.nan
    r_squared: float = math.nan
    fit_rates: np.ndarray = field(default_factory=lambda: np.empty(0))
    samples: int = 0
    seed: int | None = None

    def rows(self):
        for i, R in enumerate(self.rates):
            yield {"R": float(R), "d_simple": self.d["simple"][i], "d_mmse": self.d["mmse"][i],
                   "d_fmmse": self.d["fmmse"][i], "rel_excess": self.rel_excess[i],
                   "rel_excess_stderr": self.rel_excess_se[i]}

    def to_csv(self, path):
        cols = ("R", "d_simple", "d_mmse", "d_fmmse", "rel_excess", "rel_excess_stderr")
        with text_out(path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in self.rows():
                w.writerow([repr(float(row[c])) for c in cols])
        return out_path(path)


def _fit_log_linear(rates, rel, se):
    use = (rel > 0) & (rel > 10.0 * se)
    if np.count_nonzero(use) < 2:
        return math.nan, math.nan, math.nan, rates[use]
    x = rates[use]
    y = np.log(rel[use])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2, x


def excess_fmse_sweep(src: SourceModel, g: Computation, design: PointDensity, rates,
                      samples: int = 1_000_000, seed=0) -> ExcessSweep:
    """Simple, MMSE and fMMSE fMSE at each rate on common random numbers.

    Relative excess is ``(D_simple - D_fmmse) / D_fmmse``; ``log`` of it is
    fit linearly in ``R`` over rates where it exceeds ten standard errors.
    """
    rates = np.asarray(rates, dtype=float)
    if np.any(rates < 2):
        raise InvalidParameterError("rates must be at least 2 bits")
    Ks = np.array([int(round(2.0 ** R)) for R in rates])
    d = {k: np.empty(len(rates)) for k in KINDS}
    se = {k: np.empty(len(rates)) for k in KINDS}
    rel = np.empty(len(rates))
    rel_se = np.empty(len(rates))
    for i, K in enumerate(Ks):
        q = build_quantizer(design, K)
        tables = [build_decoder(kind, src, g, q).table for kind in KINDS]

        def errors(x, q=q, tables=tables):
            k = q.encode(x) - 1
            gx = g.eval(x)
            return np.column_stack([(gx - t[k]) ** 2 for t in tables])

        mean, cov = monte_carlo_moments(src.sample, errors, samples, seed)
        for j, kind in enumerate(KINDS):
            d[kind][i] = mean[j]
            se[kind][i] = math.sqrt(max(cov[j, j], 0.0))
        a, b = mean[0], mean[2]
        rel[i] = a / b - 1.0
        grad = np.array([1.0 / b, 0.0, -a / (b * b)])
        rel_se[i] = math.sqrt(max(float(grad @ cov @ grad), 0.0))
        for j in (0, 1):
            diff = mean[j] - mean[2]
            diff_se = math.sqrt(max(cov[j, j] + cov[2, 2] - 2 * cov[j, 2], 0.0))
            if diff < -4.0 * diff_se - 1e-15 * abs(mean[2]):
                raise InternalInconsistencyError(
                    f"R={rates[i]}: {KINDS[j]} decoder beats fMMSE by {-diff:.3g} "
                    f"(paired se {diff_se:.3g})")
    slope, intercept, r2, used = _fit_log_linear(rates, rel, rel_se)
    return ExcessSweep(rates, Ks, d, se, rel, rel_se, slope, intercept, r2, used, int(samples),
                       seed)
