import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats
from scipy.special import roots_legendre

from rkhs_lsq.christoffel import GridSpec
from rkhs_lsq.sampler import (
    DensityVariant,
    NodeSet,
    density_eval,
    density_mass,
    draw_nodes,
    make_rng,
)
from rkhs_lsq.spectral import SpectralModel

T1 = SpectralModel.trig_sharp(2, 1)
T2 = SpectralModel.trig_sharp(2, 2)
L2 = SpectralModel.legendre(2)


@pytest.mark.parametrize("variant", list(DensityVariant))
def test_trig_densities_are_uniform(variant):
    x = np.random.default_rng(1).uniform(0, 2 * np.pi, (50, 2))
    np.testing.assert_array_equal(density_eval(T2, 9, variant, x), 1.0)


def test_variant_parsing():
    assert DensityVariant.parse("Tailored") is DensityVariant.TAILORED
    assert DensityVariant.parse(DensityVariant.SIMPLE) is DensityVariant.SIMPLE
    with pytest.raises(ValueError):
        DensityVariant.parse("bogus")


def test_legendre_simple_endpoint_heavy():
    assert density_eval(L2, 3, "simple", 1.0) > density_eval(L2, 3, "simple", 0.0)
    assert density_eval(L2, 3, "simple", -1.0) > density_eval(L2, 3, "simple", 0.0)


@pytest.mark.parametrize("model", [T1, L2])
@pytest.mark.parametrize("variant", ["tailored", "simple"])
@pytest.mark.parametrize("m", [4, 16])
def test_density_mass_is_one(model, variant, m):
    assert density_mass(model, m, variant) == pytest.approx(1.0, abs=1e-6)


def test_density_mass_none():
    assert density_mass(T1, 4, "none") == pytest.approx(1.0, abs=1e-12)
    assert density_mass(L2, 4, "none") == pytest.approx(2.0, abs=1e-12)


@given(m=st.integers(2, 40), x=st.floats(-1, 1))
def test_simple_density_lower_bound(m, x):
    # at least half of the uniform probability density 1/2 on [-1, 1]
    assert density_eval(L2, m, "simple", x) >= 0.25 * (1 - 1e-15)


@given(m=st.integers(2, 30), x=st.floats(-1, 1))
def test_tailored_density_positive_and_endpoint_maximal(m, x):
    # |Pn_j(x)| <= Pn_j(1) makes both halves largest at the endpoints
    v = density_eval(L2, m, "tailored", x)
    assert 0 < v <= density_eval(L2, m, "tailored", 1.0) * (1 + 1e-9)


def test_density_needs_m_two():
    with pytest.raises(ValueError):
        density_eval(L2, 1, "tailored", 0.0)


def test_rng_substreams_differ_and_repeat():
    a = make_rng(5, 0).uniform(size=4)
    b = make_rng(5, 1).uniform(size=4)
    c = make_rng(5, 0).uniform(size=4)
    assert not np.allclose(a, b)
    np.testing.assert_array_equal(a, c)


def test_draw_is_deterministic():
    a = draw_nodes(L2, 8, 300, "tailored", seed=9, substream=2)
    b = draw_nodes(L2, 8, 300, "tailored", seed=9, substream=2)
    np.testing.assert_array_equal(a.nodes, b.nodes)
    np.testing.assert_array_equal(a.density_values, b.density_values)


def test_trig_nodes_uniform():
    ns = draw_nodes(T1, 8, 10_000, "tailored", seed=3)
    mean = ns.nodes[:, 0].mean()
    sd = math.pi / math.sqrt(3) / math.sqrt(10_000)
    assert abs(mean - math.pi) < 4 * sd


def test_legendre_simple_mass_near_endpoint():
    ns = draw_nodes(L2, 16, 10_000, "simple", seed=4)
    assert np.mean(ns.nodes[:, 0] >= 0.9) > 0.05


@pytest.mark.parametrize("variant", ["tailored", "simple"])
def test_chi_squared_goodness_of_fit(variant):
    n, m = 100_000, 16
    ns = draw_nodes(L2, m, n, variant, seed=21)
    edges = np.linspace(-1, 1, 65)
    xg, wg = roots_legendre(40)
    probs = []
    for a, b in zip(edges[:-1], edges[1:]):
        x = 0.5 * (b - a) * xg + 0.5 * (a + b)
        probs.append(0.5 * (b - a) * np.sum(wg * density_eval(L2, m, variant, x)))
    probs = np.asarray(probs)
    counts, _ = np.histogram(ns.nodes[:, 0], edges)
    assert stats.chisquare(counts, probs / probs.sum() * n).pvalue > 1e-3


def test_envelope_restart_on_coarse_grid():
    # a two-point grid sees only the endpoints, where the ratio is 0
    ns = draw_nodes(L2, 8, 2000, "tailored", seed=1, grid=GridSpec((2,), "chebyshev"))
    assert ns.stats["envelope_restarts"] >= 1
    assert len(ns) == 2000


def test_nodeset_csv_roundtrip(tmp_path):
    ns = draw_nodes(L2, 6, 50, "tailored", seed=2, substream=7)
    path = tmp_path / "nodes.csv"
    ns.to_csv(path)
    back = NodeSet.from_csv(path)
    np.testing.assert_array_equal(back.nodes, ns.nodes)
    np.testing.assert_array_equal(back.density_values, ns.density_values)
    assert back.header() == ns.header()


def test_nodeset_rejects_nonpositive_density():
    with pytest.raises(ValueError):
        NodeSet(np.zeros((2, 1)), np.array([1.0, 0.0]), 0, "none", 2)
