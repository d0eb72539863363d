import math

import numpy as np
import pytest
from scipy import integrate, stats

from dfsq.computations import make_computation
from dfsq.decoders import build_decoder, excess_fmse_sweep
from dfsq.design import design_fmse_fixed_rate, design_mse_fixed_rate, design_uniform
from dfsq.distortion import empirical_fmse
from dfsq.errors import InvalidParameterError
from dfsq.quantizer import build_quantizer, quantizer_from_boundaries
from dfsq.sensitivity import univariate_sensitivity
from dfsq.sources import make_source

EXP = make_source("exponential")
UNIF = make_source("uniform")
IDENT = make_computation("identity")
CONCAVE = make_computation("one_minus_exp_neg")


def test_uniform_identity_mmse_is_midpoint():
    q = build_quantizer(design_uniform((0, 1)), 8)
    d = build_decoder("mmse", UNIF, IDENT, q)
    np.testing.assert_allclose(d.cell_values[1:-1], q.codewords[1:-1], atol=1e-12)
    # extremal cells have their centroid at the cell centre, not at the codeword
    assert d.cell_values[0] == pytest.approx(1 / 16)


def test_fmmse_identity_equals_mmse():
    q = build_quantizer(design_mse_fixed_rate(EXP), 16)
    a = build_decoder("mmse", EXP, IDENT, q)
    b = build_decoder("fmmse", EXP, IDENT, q)
    np.testing.assert_allclose(a.table, b.table, rtol=1e-10)


def test_exponential_centroid():
    q = quantizer_from_boundaries([math.log(2), 1.0, 2.0])
    d = build_decoder("mmse", EXP, IDENT, q)
    # first cell is (-inf, ln 2], which on the support is (0, ln 2]
    assert d.cell_values[0] == pytest.approx(1 - math.log(2), rel=1e-10)
    a, b = 1.0, 2.0
    mass = integrate.quad(stats.expon.pdf, a, b)[0]
    mean = integrate.quad(lambda x: x * stats.expon.pdf(x), a, b)[0] / mass
    assert d.cell_values[2] == pytest.approx(mean, rel=1e-10)
    # overload cell (2, inf): memoryless mean 3
    assert d.cell_values[3] == pytest.approx(3.0, rel=1e-10)


def test_decoder_invariants():
    q = build_quantizer(design_fmse_fixed_rate(EXP, univariate_sensitivity(CONCAVE)), 32)
    mm = build_decoder("mmse", EXP, CONCAVE, q)
    edges = np.clip(q.edges, 0, np.inf)
    assert np.all((mm.cell_values >= edges[:-1]) & (mm.cell_values <= edges[1:]))
    fm = build_decoder("fmmse", EXP, CONCAVE, q)
    g_lo = CONCAVE.eval(edges[:-1])
    g_hi = np.where(np.isinf(edges[1:]), 1.0, CONCAVE.eval(np.minimum(edges[1:], 1e300)))
    assert np.all((fm.table >= g_lo - 1e-15) & (fm.table <= g_hi + 1e-15))


def test_zero_mass_cell_falls_back_and_is_flagged():
    q = quantizer_from_boundaries([-2.0, -1.0, 0.5])
    d = build_decoder("fmmse", EXP, CONCAVE, q)
    assert list(d.flagged) == [True, True, False, False]
    assert d.table[0] == CONCAVE.eval(np.array([q.codewords[0]]))[0]


def test_decoder_kind_validation():
    q = build_quantizer(design_uniform((0, 1)), 4)
    with pytest.raises(InvalidParameterError):
        build_decoder("map", UNIF, IDENT, q)


def test_fmmse_is_per_cell_optimal_under_crn():
    q = build_quantizer(design_fmse_fixed_rate(EXP, univariate_sensitivity(CONCAVE)), 16)
    kw = dict(samples=500_000, seed=3)
    ds = {k: empirical_fmse(EXP, CONCAVE, q, decoder=build_decoder(k, EXP, CONCAVE, q), **kw)
          for k in ("simple", "mmse", "fmmse")}
    for k in ("simple", "mmse"):
        se = math.hypot(ds[k].stderr, ds["fmmse"].stderr)
        assert ds["fmmse"].d_empirical <= ds[k].d_empirical + 2 * se


def test_sweep_identity_has_no_mmse_excess():
    d = design_mse_fixed_rate(EXP)
    sw = excess_fmse_sweep(EXP, IDENT, d, [2, 3, 4], samples=200_000, seed=0)
    np.testing.assert_allclose(sw.d["mmse"], sw.d["fmmse"], rtol=1e-9)


def test_sweep_slope_negative(tmp_path):
    d = design_fmse_fixed_rate(EXP, univariate_sensitivity(CONCAVE))
    sw = excess_fmse_sweep(EXP, CONCAVE, d, [2, 3, 4, 5, 6], samples=400_000, seed=1)
    assert sw.slope < 0
    assert np.all(sw.d["fmmse"] <= np.minimum(sw.d["simple"], sw.d["mmse"])
                  + 2 * np.hypot(sw.se["fmmse"], sw.se["simple"]))
    path = sw.to_csv(tmp_path / "sweep.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "R,d_simple,d_mmse,d_fmmse,rel_excess,rel_excess_stderr"
    assert len(lines) == 6


def test_sweep_rejects_low_rates():
    with pytest.raises(InvalidParameterError):
        excess_fmse_sweep(EXP, CONCAVE, design_mse_fixed_rate(EXP), [1, 2], samples=10_000)
