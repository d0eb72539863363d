import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from dfsq.computations import make_computation
from dfsq.design import (
    design_fmse_fixed_rate,
    design_from_unnormalized,
    design_mse_fixed_rate,
    design_uniform,
)
from dfsq.errors import InvalidInputError, InvalidParameterError
from dfsq.quantizer import (
    CompandingQuantizer,
    build_quantizer,
    quantizer_from_boundaries,
)
from dfsq.sensitivity import univariate_sensitivity
from dfsq.sources import make_source

GAUSS = make_source("gaussian")
EXP = make_source("exponential")
SQ_DESIGN = design_fmse_fixed_rate(GAUSS, univariate_sensitivity(make_computation("square")))


def unit_q():
    return build_quantizer(design_uniform((0.0, 1.0)), 4)


def test_uniform_k4_example():
    q = unit_q()
    np.testing.assert_allclose(q.boundaries, [0.25, 0.5, 0.75])
    np.testing.assert_allclose(q.codewords, [0.25, 0.375, 0.625, 0.75])
    assert q.rate == 2.0


def test_exponential_density_boundaries():
    d = design_from_unnormalized(lambda x: np.exp(-x), (0.0, math.inf), center=0.0)
    q = build_quantizer(d, 4)
    np.testing.assert_allclose(q.boundaries, [math.log(4 / 3), math.log(2), math.log(4)],
                               rtol=1e-10)


@pytest.mark.parametrize("K", [4, 16, 64])
def test_symmetric_design_centre_boundary(K):
    q = build_quantizer(SQ_DESIGN, K)
    # lambda ~ |x|^(2/3) near 0 flattens the compressor, so x resolution is coarser there
    assert abs(q.boundaries[K // 2 - 1]) <= 1e-7


def test_encode_examples():
    q = unit_q()
    assert q.encode(np.array([0.3]))[0] == 2
    assert q.encode(np.array([0.5]))[0] == 2
    g = build_quantizer(SQ_DESIGN, 16)
    assert g.encode(np.array([-1e10]))[0] == 1
    assert g.encode(np.array([1e10]))[0] == 16
    with pytest.raises(InvalidInputError):
        q.encode(np.array([0.1, np.nan]))


def test_decode_examples():
    q = unit_q()
    assert [q.decode(np.array([k]))[0] for k in (1, 2, 4)] == [0.25, 0.375, 0.75]
    for bad in (0, 5):
        with pytest.raises(InvalidInputError):
            q.decode(np.array([bad]))


def test_small_k_rejected():
    with pytest.raises(InvalidParameterError):
        build_quantizer(design_uniform((0, 1)), 2)
    with pytest.raises(InvalidParameterError):
        build_quantizer(design_uniform((0, 1)), 3.5)


@pytest.mark.parametrize("design", [design_mse_fixed_rate(GAUSS), SQ_DESIGN,
                                    design_mse_fixed_rate(EXP)])
@pytest.mark.parametrize("K", [3, 10, 64, 257])
def test_structural_invariants(design, K):
    q = build_quantizer(design, K)
    b, c = q.boundaries, q.codewords
    assert len(b) == K - 1 and len(c) == K
    assert np.all(np.diff(b) > 0)
    np.testing.assert_allclose(c[1:-1], 0.5 * (b[:-1] + b[1:]), rtol=0, atol=0)
    assert c[0] == b[0] and c[-1] == b[-1]
    # regularity p_{k-1} < c_k <= p_k holds except for the top codeword, which the
    # extremal rule puts on the closed right end of cell K-1
    edges = q.edges
    assert np.all((edges[:-2] < c[:-1]) & (c[:-1] <= edges[1:-1]))
    assert c[-1] == edges[-2]
    # every cell carries 1/K of the point density
    lam_mass = np.diff(design.compressor(edges))
    np.testing.assert_allclose(lam_mass, 1.0 / K, atol=1e-6)


def test_cell_mass_by_independent_quadrature():
    q = build_quantizer(SQ_DESIGN, 8)
    edges = q.edges
    for k in range(8):
        m = integrate.quad(SQ_DESIGN.lam, edges[k], edges[k + 1], epsabs=1e-12)[0]
        assert m == pytest.approx(1 / 8, abs=1e-6)


@given(st.integers(3, 300), st.lists(st.floats(-50, 50), min_size=2, max_size=50))
def test_encode_monotone_and_cells_consistent(K, xs):
    q = build_quantizer(design_mse_fixed_rate(GAUSS), K)
    x = np.sort(np.asarray(xs))
    k = q.encode(x)
    assert np.all(np.diff(k) >= 0)
    edges = q.edges
    assert np.all((edges[k - 1] < x) & (x <= edges[k]))


def test_round_trip_cells():
    q = build_quantizer(SQ_DESIGN, 32)
    x = np.random.default_rng(0).normal(size=100_000)
    k = q.encode(x)
    kk = q.encode(q.decode(k))
    inner = k < q.K
    assert np.array_equal(kk[inner], k[inner])
    # codeword of the top cell is its left edge, which belongs to cell K-1
    assert np.all(kk[~inner] == q.K - 1)


def test_occupancy_matches_cell_probabilities():
    q = build_quantizer(design_mse_fixed_rate(GAUSS), 32)
    n = 1_000_000
    x = GAUSS.sample(np.random.default_rng(5), n)
    counts = np.bincount(q.encode(x) - 1, minlength=q.K)
    p = q.cell_probabilities(GAUSS)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    sd = np.sqrt(n * p * (1 - p))
    assert np.all(np.abs(counts - n * p) <= 5 * sd)


def test_non_power_of_two_rate():
    q = build_quantizer(design_uniform((0, 1)), 10)
    assert q.rate == pytest.approx(math.log2(10))


def test_csv_round_trip(tmp_path):
    q = build_quantizer(SQ_DESIGN, 7)
    path = q.to_csv(tmp_path / "q.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "k,p_lo,p_hi,codeword"
    assert lines[1].split(",")[1] == "-inf" and lines[-1].split(",")[2] == "inf"
    back = CompandingQuantizer.from_csv(path)
    assert back.K == 7
    assert np.array_equal(back.boundaries, q.boundaries)
    assert np.array_equal(back.codewords, q.codewords)


def test_from_boundaries():
    q = quantizer_from_boundaries([-1.0, 0.0, 2.0])
    np.testing.assert_array_equal(q.codewords, [-1.0, -0.5, 1.0, 2.0])
    with pytest.raises(InvalidParameterError):
        quantizer_from_boundaries([0.0, 0.0, 1.0])
