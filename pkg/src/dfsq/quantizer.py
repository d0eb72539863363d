"""Finite-codebook companding quantizers.

Cell ``k`` (1-based) is ``(p_{k-1}, p_k]`` with ``p_0 = -inf`` and
``p_K = +inf``.  Interior codewords are cell midpoints; the two extremal
codewords sit on the innermost boundary of their cell (``c_1 = p_1``,
``c_K = p_{K-1}``), which needs no knowledge of the source.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from ._io import out_path, text_out
from .design import PointDensity
from .errors import InvalidInputError, InvalidParameterError


@dataclass(frozen=True, eq=False)
class CompandingQuantizer:
    K: int
    boundaries: np.ndarray
    codewords: np.ndarray
    point_density_id: str = ""

    @property
    def rate(self) -> float:
        """Fixed rate ``log2 K`` in bits."""
        return math.log2(self.K)

    @property
    def edges(self) -> np.ndarray:
        """``p_0 .. p_K`` including the infinite extremes."""
        return np.concatenate([[-np.inf], self.boundaries, [np.inf]])

    def encode(self, x):
        """1-based cell index of every ``x``."""
        return kernels.encode(self.boundaries, x) + 1

    def decode(self, k):
        k = np.asarray(k)
        if np.any((k < 1) | (k > self.K)):
            raise InvalidInputError(f"cell index out of range 1..{self.K}")
        return self.codewords[k - 1]

    def quantize(self, x):
        """Codeword of the cell containing each ``x``."""
        return kernels.quantize(self.boundaries, self.codewords, x)

    def cell_probabilities(self, src) -> np.ndarray:
        """Source probability of every cell, from CDF differences.

        Cells right of the median use the survival function to avoid
        cancellation in the upper tail.
        """
        b = self.boundaries
        lower = np.diff(np.concatenate([[0.0], src.cdf(b), [1.0]]))
        upper = -np.diff(np.concatenate([[1.0], src.sf(b), [0.0]]))
        left_edge = np.concatenate([[-np.inf], b])
        return np.maximum(np.where(left_edge >= src.median, upper, lower), 0.0)

    def to_csv(self, path):
        """Rows ``k, p_{k-1}, p_k, c_k`` with infinite edges spelled ``-inf``/``inf``."""
        edges = self.edges
        with text_out(path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "p_lo", "p_hi", "codeword"])
            for k in range(1, self.K + 1):
                w.writerow([k, _fmt(edges[k - 1]), _fmt(edges[k]), _fmt(self.codewords[k - 1])])
        return out_path(path)

    @classmethod
    def from_csv(cls, path, point_density_id="") -> CompandingQuantizer:
        with Path(path).open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        bnd = np.array([float(r["p_hi"]) for r in rows[:-1]])
        cw = np.array([float(r["codeword"]) for r in rows])
        return cls(len(rows), bnd, cw, point_density_id)


def _fmt(v):
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def codewords_for(boundaries: np.ndarray) -> np.ndarray:
    """Midpoint codewords with the extremal rule."""
    b = np.asarray(boundaries, dtype=float)
    K = len(b) + 1
    cw = np.empty(K)
    cw[0] = b[0]
    cw[-1] = b[-1]
    cw[1:-1] = 0.5 * (b[:-1] + b[1:])
    return cw


def build_quantizer(density: PointDensity, K: int) -> CompandingQuantizer:
    """Boundaries ``p_k = c^{-1}(k/K)`` for ``k = 1..K-1``."""
    if int(K) != K or K < 3:
        raise InvalidParameterError(f"K must be an integer >= 3, got {K!r}")
    K = int(K)
    b = np.asarray(density.inv_compressor(np.arange(1, K) / K), dtype=float)
    if np.any(np.diff(b) <= 0) or not np.all(np.isfinite(b)):
        raise InvalidParameterError(f"{density.id}: boundaries not strictly increasing at K={K}")
    return CompandingQuantizer(K, b, codewords_for(b), density.id)


def quantizer_from_boundaries(boundaries, point_density_id="explicit") -> CompandingQuantizer:
    b = np.asarray(boundaries, dtype=float)
    if b.ndim != 1 or len(b) < 2 or np.any(np.diff(b) <= 0):
        raise InvalidParameterError("boundaries must be strictly increasing with K >= 3")
    return CompandingQuantizer(len(b) + 1, b, codewords_for(b), point_density_id)
