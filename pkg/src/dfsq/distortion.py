"""High-resolution distortion theory and its Monte Carlo counterpart.

Theory values are adaptive-quadrature evaluations of the asymptotic limits;
empirical values simulate the actual finite quantizers.  Monte Carlo runs are
split into blocks, each drawing from its own substream spawned from the seed,
and block sums are reduced in block order, so a given seed and block size
always reproduce the same bits.
"""
from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from . import _quad, kernels
from .computations import Computation
from .design import PointDensity
from .errors import (
    DivergenceError,
    InternalInconsistencyError,
    InvalidParameterError,
    TheoryUndefinedError,
)
from .quantizer import CompandingQuantizer
from .sensitivity import SensitivityProfile
from .sources import ProductSource, SourceModel, diff_entropy

BLOCK_SIZE = 1 << 16
LOG2E = 1.0 / math.log(2.0)
UNDERFLOW = 1e-250
# where f is below this, an underflowed log term contributes at most f |log| ~ 1e-25
NEGLIGIBLE_MASS = 1e-30


@dataclass
class DistortionReport:
    """One simulated operating point.

    ``K`` is an int for a single quantizer or a tuple of per-source sizes;
    ``rate`` is bits per source (``log2 K`` averaged over sources, or the
    measured index entropy for entropy-coded runs).
    """

    K: int | tuple
    rate: float
    d_empirical: float
    stderr: float
    d_theory: float = math.nan
    seed: int | None = None
    samples: int = 0
    kappa: int | None = None
    experiment_id: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return len(self.K) if isinstance(self.K, tuple) else 1

    @property
    def scaled_empirical(self) -> float:
        return 2.0 ** (2.0 * self.rate) * self.d_empirical

    @property
    def scaled_theory(self) -> float:
        return 2.0 ** (2.0 * self.rate) * self.d_theory

    def row(self) -> dict:
        k_or_kappa = self.kappa if self.kappa is not None else (
            self.K if isinstance(self.K, int) else sum(self.K))
        return {
            "experiment_id": self.experiment_id,
            "N": self.N,
            "K_or_kappa": k_or_kappa,
            "rate_bits": self.rate,
            "d_emp": self.d_empirical,
            "d_emp_stderr": self.stderr,
            "d_theory": self.d_theory,
            "scaled_emp": self.scaled_empirical,
            "scaled_theory": self.scaled_theory,
            "seed": self.seed,
            "samples": self.samples,
        }


CSV_COLUMNS = ("experiment_id", "N", "K_or_kappa", "rate_bits", "d_emp", "d_emp_stderr",
               "d_theory", "scaled_emp", "scaled_theory", "seed", "samples")


@dataclass(frozen=True)
class RateAllocation:
    total_rate: float
    rates: tuple
    alphas: tuple

    def __post_init__(self):
        if abs(sum(self.alphas) - 1.0) > 1e-9 or min(self.alphas) <= 0:
            raise InvalidParameterError("alphas must be positive and sum to one")


# -- theory -----------------------------------------------------------------


def _points(src, *objs):
    pts = [src.median, *src.breakpoints]
    for o in objs:
        pts.extend(getattr(o, "zeros", ()) or ())
        pts.extend(getattr(o, "breakpoints", ()) or ())
    lo, hi = src.support
    return sorted({float(p) for p in pts if lo < p < hi})


def _expect(src, func, points, what, rel=1e-9):
    def integrand(x):
        fx = src.pdf(x)
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            v = fx * np.asarray(func(x), dtype=float)
        return np.where(fx > 0, v, 0.0)

    lo, hi = src.support
    try:
        return _quad.integrate(integrand, lo, hi, points, center=src.median, scale=src.scale,
                               rel=rel, what=what)
    except DivergenceError as exc:
        raise TheoryUndefinedError(str(exc)) from None


def sensitivity_ratio_moment(src: SourceModel, gamma: SensitivityProfile,
                             density: PointDensity) -> float:
    """``E[(gamma(X) / lambda(X))**2]``."""
    lo, hi = density.support

    def ratio2(x):
        gm = gamma(x)
        lam = density.lam(x)
        num = gm * gm
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            # ratio before squaring so lambda^2 cannot underflow ahead of gamma^2
            r = (gm / lam) ** 2
            # lambda underflowed deep in a tail where f gamma^2 is itself negligible
            underflow = (lam == 0) & (x >= lo) & (x <= hi) & (src.pdf(x) * num < UNDERFLOW)
        return np.where((num == 0) | underflow, 0.0, r)

    return _expect(src, ratio2, _points(src, gamma, density),
                   f"E[(gamma/lambda)^2] for {density.id}")


def theory_univariate_limit(src: SourceModel, gamma: SensitivityProfile,
                            density: PointDensity) -> float:
    """``lim K^2 D(K) = E[(gamma/lambda)^2] / 12``; raises TheoryUndefinedError if infinite."""
    return sensitivity_ratio_moment(src, gamma, density) / 12.0


@dataclass(frozen=True)
class RateCurve:
    """``D(R) = constant * 2**(-2R)``."""

    constant: float
    kind: str = "fixed-rate"

    def __call__(self, rate):
        return self.constant * 2.0 ** (-2.0 * np.asarray(rate, dtype=float))


def one_third_norm(src: SourceModel, gamma: SensitivityProfile | None = None) -> float:
    """``||gamma^2 f||_{1/3} = (int (gamma^2 f)^{1/3})^3``."""
    def h(x):
        fx = src.pdf(x)
        if gamma is None:
            return np.cbrt(fx)
        gm = gamma(x)
        return np.cbrt(gm * gm * fx)

    lo, hi = src.support
    try:
        s = _quad.integrate(h, lo, hi, _points(src, gamma), center=src.median, scale=src.scale,
                            rel=1e-11, what="1/3-norm")
    except DivergenceError as exc:
        raise TheoryUndefinedError(str(exc)) from None
    return s ** 3


def theory_fixed_rate_optimal(src: SourceModel, gamma: SensitivityProfile | None = None) -> RateCurve:
    """Optimal fixed-rate curve ``||gamma^2 f||_{1/3} 2^{-2R} / 12``."""
    return RateCurve(one_third_norm(src, gamma) / 12.0, "fixed-rate")


def expected_log2(src: SourceModel, func, points=()) -> float:
    """``E[log2 func(X)]``; integrable log singularities at ``points`` are resolved."""
    def lg(x):
        with np.errstate(divide="ignore"):
            v = np.log2(np.asarray(func(x), dtype=float))
        # func underflowed where the source has no appreciable mass
        return np.where(np.isneginf(v) & (src.pdf(x) < NEGLIGIBLE_MASS), 0.0, v)

    return _expect(src, lg, sorted(set(_points(src)) | {float(p) for p in points
                                                        if src.support[0] < p < src.support[1]}),
                   "E[log2 gamma]")


def theory_entropy_constrained_optimal(src: SourceModel,
                                       gamma: SensitivityProfile | None = None) -> RateCurve:
    """Optimal entropy-constrained curve ``2^{2h(X) + 2E[log2 gamma]} 2^{-2R} / 12``."""
    h = diff_entropy(src, "bits")
    e_log = 0.0 if gamma is None else expected_log2(src, gamma, gamma.zeros)
    return RateCurve(2.0 ** (2.0 * h + 2.0 * e_log) / 12.0, "entropy-constrained")


def entropy_constrained_constant(src: SourceModel, gamma: SensitivityProfile,
                                 density: PointDensity) -> float:
    """Entropy-constrained constant of an arbitrary design.

    With index entropy ``H ~ log2 K + h(X) + E[log2 lambda]`` the distortion is
    ``C 2^{-2H}`` with ``C = E[(gamma/lambda)^2] 2^{2h + 2E[log2 lambda]} / 12``;
    the design ``lambda ~ gamma`` minimizes ``C``.
    """
    m2 = sensitivity_ratio_moment(src, gamma, density)
    h = diff_entropy(src, "bits")
    e_log = expected_log2(src, density.lam, _points(src, gamma, density))
    return m2 * 2.0 ** (2.0 * h + 2.0 * e_log) / 12.0


@dataclass(frozen=True)
class MultivariateLimit:
    """``lim kappa^2 D = constant`` together with per-source terms."""

    constant: float
    terms: tuple
    alphas: tuple

    def distortion(self, kappa):
        return self.constant / np.asarray(kappa, dtype=float) ** 2


def _alphas(alloc, N):
    if isinstance(alloc, RateAllocation):
        a = np.asarray(alloc.alphas, dtype=float)
    elif alloc is None:
        a = np.full(N, 1.0 / N)
    else:
        a = np.asarray(alloc, dtype=float)
    if a.shape != (N,) or np.any(a <= 0) or abs(a.sum() - 1.0) > 1e-9:
        raise InvalidParameterError("allocation needs N positive fractions summing to one")
    return a


def theory_multivariate_limit(srcs, gammas: Sequence[SensitivityProfile],
                              densities: Sequence[PointDensity], alloc=None) -> MultivariateLimit:
    """``sum_n E[(gamma_n/lambda_n)^2] / (12 alpha_n^2)`` for ``K_n = alpha_n kappa``."""
    marg = srcs.marginals if isinstance(srcs, ProductSource) else tuple(srcs)
    N = len(marg)
    if len(gammas) != N or len(densities) != N:
        raise InvalidParameterError("need one profile and one density per source")
    a = _alphas(alloc, N)
    terms = tuple(theory_univariate_limit(s, gm, d) / (an * an)
                  for s, gm, d, an in zip(marg, gammas, densities, a))
    return MultivariateLimit(float(sum(terms)), terms, tuple(a))


def weighted_fmse_theory(srcs, weighted_gammas, densities, alloc=None) -> MultivariateLimit:
    """Weighted vector-valued limit; profiles come from ``weighted_sensitivity``."""
    return theory_multivariate_limit(srcs, weighted_gammas, densities, alloc)


def codebook_sizes(alphas, kappa, minimum=3):
    """``K_n = round(alpha_n kappa)``, never below ``minimum``."""
    return tuple(max(minimum, int(round(a * kappa))) for a in alphas)


# -- rate allocation ----------------------------------------------------------


def allocate_rates(constants, total_rate) -> RateAllocation:
    """Minimize ``sum a_n 2^{-2 R_n}`` subject to ``sum R_n = R``, ``R_n >= 0``.

    Closed-form water-filling on the active set; sources whose unconstrained
    rate is negative are clipped to zero and the rest re-solved.
    """
    a = np.asarray(constants, dtype=float)
    if a.ndim != 1 or len(a) == 0 or np.any(~(a > 0)) or np.any(~np.isfinite(a)):
        raise InvalidParameterError("constants must be positive and finite")
    R = float(total_rate)
    if not R > 0:
        raise InvalidParameterError("total rate must be positive")
    active = np.ones(len(a), dtype=bool)
    rates = np.zeros(len(a))
    while True:
        la = np.log2(a[active])
        r = R / active.sum() + 0.5 * la - 0.5 * la.mean()
        if np.all(r >= 0):
            rates[:] = 0.0
            rates[active] = r
            break
        idx = np.flatnonzero(active)
        active[idx[r < 0]] = False
    K = 2.0 ** rates
    alphas = K / K.sum()
    return RateAllocation(R, tuple(float(x) for x in rates), tuple(float(x) for x in alphas))


# -- Monte Carlo ----------------------------------------------------------------


def block_generators(seed, samples, block_size=BLOCK_SIZE):
    """``(generator, count)`` per block, deterministic in ``seed``."""
    n_blocks = max(1, -(-int(samples) // block_size))
    seqs = np.random.SeedSequence(seed).spawn(n_blocks)
    for i, s in enumerate(seqs):
        count = min(block_size, int(samples) - i * block_size)
        yield np.random.default_rng(s), count


def monte_carlo_moments(draw: Callable, errors: Callable, samples: int, seed,
                        block_size=BLOCK_SIZE):
    """Mean vector and covariance of the mean for per-sample error columns.

    ``draw(rng, count)`` produces source samples; ``errors(x)`` returns a
    ``(count, J)`` array of per-sample losses.  Returns ``(mean, cov_of_mean)``.
    """
    s1 = None
    s2 = None
    n = 0
    for rng, count in block_generators(seed, samples, block_size):
        e = np.asarray(errors(draw(rng, count)), dtype=float)
        if e.ndim == 1:
            e = e[:, None]
        b1 = e.sum(axis=0)
        b2 = e.T @ e
        s1 = b1 if s1 is None else s1 + b1
        s2 = b2 if s2 is None else s2 + b2
        n += len(e)
    mean = s1 / n
    cov = (s2 / n - np.outer(mean, mean)) * n / (n - 1)
    return mean, cov / n


def _decoder_table(g, q, decoder):
    if decoder in (None, "simple"):
        return np.asarray(g.eval(q.codewords), dtype=float)
    table = getattr(decoder, "table", decoder)
    table = np.asarray(table, dtype=float)
    if table.shape != (q.K,):
        raise InvalidParameterError(f"decoder table has shape {table.shape}, expected ({q.K},)")
    return table


def empirical_fmse(src, g: Computation, quantizers, decoder="simple", samples: int = 1_000_000,
                   seed=0, weights=None, block_size=BLOCK_SIZE, d_theory=math.nan,
                   experiment_id="") -> DistortionReport:
    """Monte Carlo fMSE ``E|g(X) - decoder(Q(X))|^2``.

    The simple decoder applies ``g`` to the decoded codewords.  For univariate
    sources ``decoder`` may also be a per-cell table (or an object with a
    ``table``) such as the MMSE and fMMSE decoders.  Vector-valued ``g`` is
    scored with the weighted fMSE ``sum_m w_m |g^(m) - ghat^(m)|^2``.
    """
    if samples < 10_000:
        raise InvalidParameterError("empirical_fmse needs at least 1e4 samples")
    if isinstance(quantizers, CompandingQuantizer):
        quantizers = (quantizers,)
    quantizers = tuple(quantizers)
    multivariate = isinstance(src, ProductSource)
    N = src.N if multivariate else 1
    if len(quantizers) != N or g.arity != N:
        raise InvalidParameterError(f"need {N} quantizers and a computation of arity {N}")
    w = None if weights is None else np.asarray(weights, dtype=float)
    if g.output_dim > 1 and w is None:
        w = np.ones(g.output_dim)

    if not multivariate and g.output_dim == 1:
        q = quantizers[0]
        table = _decoder_table(g, q, decoder)
        s1 = s2 = 0.0
        n = 0
        for rng, count in block_generators(seed, samples, block_size):
            x = src.sample(rng, count)
            a, b = kernels.table_error_sums(g.eval(x), q.boundaries, table, x)
            s1 += a
            s2 += b
            n += count
        mean = s1 / n
        var = max(s2 / n - mean * mean, 0.0) * n / (n - 1)
        se = math.sqrt(var / n)
        K = q.K
        rate = q.rate
    else:
        if decoder not in (None, "simple"):
            raise InvalidParameterError("multivariate runs support only the simple decoder")
        draw = src.sample if multivariate else (lambda rng, c: src.sample(rng, c)[:, None])

        def errors(x):
            xh = np.column_stack([qq.quantize(x[:, i]) for i, qq in enumerate(quantizers)])
            d = g.eval(x) - g.eval(xh)
            if d.ndim == 1:
                return d * d
            return (d * d) @ w

        m, cov = monte_carlo_moments(draw, errors, samples, seed, block_size)
        mean = float(m[0])
        se = math.sqrt(max(float(cov[0, 0]), 0.0))
        K = tuple(qq.K for qq in quantizers) if multivariate else quantizers[0].K
        rate = float(np.mean([qq.rate for qq in quantizers]))
    return DistortionReport(K=K, rate=rate, d_empirical=float(mean), stderr=float(se),
                            d_theory=float(d_theory), seed=seed, samples=int(samples),
                            experiment_id=experiment_id)


def index_entropy(src: SourceModel, quantizer: CompandingQuantizer, method="quadrature",
                  samples: int = 1_000_000, seed=0) -> float:
    """Entropy in bits of the cell index ``Q(X)``."""
    if method == "quadrature":
        p = quantizer.cell_probabilities(src)
    elif method == "mc":
        counts = np.zeros(quantizer.K, dtype=np.int64)
        for rng, count in block_generators(seed, samples):
            counts += kernels.cell_counts(quantizer.boundaries, src.sample(rng, count))
        p = counts / counts.sum()
    else:
        raise InvalidParameterError(f"unknown method {method!r}")
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


# -- tail diagnostic ---------------------------------------------------------------


@dataclass
class TailDiagnostic:
    y: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    passed: bool
    violated: bool
    message: str = ""


def _tail_ratio(src, g, density, y, side):
    lo, hi = src.support
    if side == "upper":
        a, b = max(y, lo), hi
    else:
        a, b = lo, min(y, hi)
    if not a < b:
        return 0.0
    gy = float(g.eval(np.array([y]))[0])

    def integrand(x):
        d = g.eval(x) - gy
        fx = src.pdf(x)
        return np.where(fx > 0, d * d * fx, 0.0)

    center = a if side == "upper" else b
    num = _quad.integrate(integrand, a, b, [p for p in _points(src, density) if a < p < b],
                          center=center, scale=src.scale, rel=1e-9, what=f"tail numerator at y={y}")
    if num == 0.0:
        return 0.0
    den = density.tail_mass(y, side)
    if den <= 0.0:
        return math.inf
    return num / (den * den)


def _eventually_decreasing(series):
    s = np.asarray(series, dtype=float)
    if np.all(s == 0):
        return True
    if not np.all(np.isfinite(s)):
        return False
    half = s[len(s) // 2:]
    return bool(np.all(np.diff(half) <= 0) and s[-1] < s[0])


def check_tail_condition(src: SourceModel, g: Computation, density: PointDensity,
                         y_grid) -> TailDiagnostic:
    """Tail ratio ``T(y) = int_y |g(x)-g(y)|^2 f / (int_y lambda)^2`` in both tails.

    ``y_grid`` holds increasing positive magnitudes; the upper tail is probed
    at ``y`` and the lower tail at ``-y``.  A divergent numerator marks the
    condition as violated.
    """
    y = np.asarray(y_grid, dtype=float)
    if np.any(np.diff(y) <= 0):
        raise InvalidParameterError("y_grid must be increasing")
    upper = np.empty(len(y))
    lower = np.empty(len(y))
    try:
        for i, yi in enumerate(y):
            upper[i] = _tail_ratio(src, g, density, yi, "upper")
            lower[i] = _tail_ratio(src, g, density, -yi, "lower")
    except DivergenceError as exc:
        return TailDiagnostic(y, upper, lower, False, True, f"condition violated: {exc}")
    ok = _eventually_decreasing(upper) and _eventually_decreasing(lower)
    msg = "tail ratio decreasing" if ok else "tail ratio not decreasing on the grid"
    return TailDiagnostic(y, upper, lower, ok, False, msg)


def check_consistent(d_hi, d_lo, se, what, k=4.0):
    """Raise if ``d_hi`` falls below ``d_lo`` by more than ``k`` standard errors."""
    if d_hi < d_lo - k * se:
        raise InternalInconsistencyError(
            f"{what}: {d_hi:.6g} < {d_lo:.6g} beyond Monte Carlo noise (se={se:.3g})")
