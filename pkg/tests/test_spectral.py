import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy.special import roots_legendre

from rkhs_lsq.errors import DomainError, ResourceError
from rkhs_lsq.spectral import (
    SpectralModel,
    WeightModel,
    basis_eval,
    basis_matrix,
    frequency_set,
    ranked_spectrum,
    sigma_sq_total,
    sigmas,
    weight_eval,
)


def brute_set(wm, R, box):
    g = np.array(list(itertools.product(range(-box, box + 1), repeat=wm.d)))
    return g[wm.weights(g) <= R]


def test_weight_values():
    assert weight_eval(WeightModel("sharp", 2, 2), [0, 0]) == 1.0
    assert weight_eval(WeightModel("sharp", 2, 1), [1]) == 4.0
    assert weight_eval(WeightModel("plus", 1, 2), [1, 1]) == pytest.approx(2.0, rel=1e-15)


def test_weight_dimension_mismatch():
    with pytest.raises(ValueError):
        weight_eval(WeightModel("sharp", 2, 2), [1])


def test_frequency_set_small_cases():
    got = frequency_set(WeightModel("sharp", 1, 2), 2)
    assert {tuple(k) for k in got} == {(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)}
    assert frequency_set(WeightModel("sharp", 1, 1), 1).tolist() == [[0]]
    assert len(frequency_set(WeightModel("sharp", 1, 1), 3)) == 5


@given(
    kind=st.sampled_from(["sharp", "plus"]),
    s=st.sampled_from([0.7, 1.0, 2.0, 2.5]),
    d=st.integers(1, 3),
    R=st.floats(0.5, 40.0),
)
def test_frequency_set_matches_enumeration(kind, s, d, R):
    wm = WeightModel(kind, s, d)
    # (1 + |k_j|)^s <= w(k) and (1 + k_j^2)^(s/2) <= w(k) bound every coordinate
    box = int(math.ceil(R ** (1.0 / s))) + 1
    assume(box ** d <= 10 ** 6)
    got = frequency_set(wm, R)
    ref = brute_set(wm, R, box)
    assert len(got) == len(ref)
    assert {tuple(k) for k in got} == {tuple(k) for k in ref}


def test_ranked_spectrum_examples():
    sig = ranked_spectrum(SpectralModel.trig_sharp(1, 1), 5).sigma
    np.testing.assert_allclose(sig, [1, 0.5, 0.5, 1 / 3, 1 / 3], rtol=1e-15)
    sig = ranked_spectrum(SpectralModel.legendre(1), 3).sigma
    np.testing.assert_allclose(sig, [1, 3 ** -0.5, 7 ** -0.5], rtol=1e-15)


@pytest.mark.parametrize("kind,s,d", [("sharp", 1.0, 2), ("sharp", 2.0, 3), ("plus", 1.5, 2)])
def test_rearrangement_oracle(kind, s, d):
    model = SpectralModel.trig_sharp(s, d) if kind == "sharp" else SpectralModel.trig_plus(s, d)
    N = 200
    got = np.sort(ranked_spectrum(model, N).sigma)[::-1]
    g = np.array(list(itertools.product(range(-40, 41), repeat=d)))
    ref = np.sort(1.0 / model.weight.weights(g))[::-1][:N]
    np.testing.assert_allclose(got, ref, rtol=1e-14)


def test_ranked_spectrum_sorted_and_ties():
    rs = ranked_spectrum(SpectralModel.trig_sharp(1.0, 2), 60)
    assert np.all(np.diff(rs.sigma) <= 0)
    # ties broken by |k|_1 then coordinates, so the order is reproducible
    again = ranked_spectrum(SpectralModel.trig_sharp(1.0, 2), 60)
    assert np.array_equal(rs.index, again.index)


def test_enumeration_budget():
    with pytest.raises(ResourceError) as exc:
        ranked_spectrum(SpectralModel.trig_sharp(0.6, 4), 10 ** 9)
    assert exc.value.achieved > 0


def test_basis_values():
    T = SpectralModel.trig_sharp(2, 2)
    x = np.random.default_rng(0).uniform(0, 2 * np.pi, (20, 2))
    np.testing.assert_allclose(np.abs(basis_matrix(T, x, 30)), 1.0, rtol=1e-14)
    L = SpectralModel.legendre(2)
    assert basis_eval(L, 1, 0.3) == pytest.approx(1 / math.sqrt(2))
    for k in range(1, 12):
        assert basis_eval(L, k, 1.0).real == pytest.approx(math.sqrt((2 * (k - 1) + 1) / 2), rel=1e-13)


def test_domain_errors():
    with pytest.raises(DomainError):
        basis_eval(SpectralModel.legendre(2), 1, 1.5)
    with pytest.raises(DomainError):
        basis_matrix(SpectralModel.trig_sharp(2, 1), [-0.1], 3)


def test_orthonormality_trig():
    T = SpectralModel.trig_sharp(2, 2)
    g = 2 * np.pi * np.arange(32) / 32
    pts = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    B = basis_matrix(T, pts, 40)
    np.testing.assert_allclose(B.conj().T @ B / len(pts), np.eye(40), atol=1e-12)


def test_orthonormality_legendre():
    x, w = roots_legendre(80)
    B = basis_matrix(SpectralModel.legendre(2), x, 50)
    np.testing.assert_allclose(B.T @ (B * w[:, None]), np.eye(50), atol=1e-12)


@pytest.mark.parametrize("d,s", [(2, 1.0), (2, 2.0), (4, 1.0), (4, 2.0)])
def test_singular_value_upper_bound(d, s):
    sig = sigmas(SpectralModel.trig_sharp(s, d), 5000)
    n = np.arange(6, 5001)
    assert np.all(sig[5:] <= (16.0 / (3.0 * n)) ** (s / (1.0 + math.log2(d))))


@pytest.mark.parametrize("d", [3, 4])
def test_plus_norm_upper_bound(d):
    s = 2.0
    sig = sigmas(SpectralModel.trig_plus(s, d), 3000)
    n = np.arange(2, 3001)
    cd = (1.0 + (1.0 + 2.0 / math.log2(d - 1)) / (d - 1)) ** (d - 1)
    assert np.all(sig[1:] <= (cd / n) ** (s / (2.0 * (1.0 + math.log2(d - 1)))))


@pytest.mark.parametrize("model", [SpectralModel.trig_sharp(2, 1), SpectralModel.trig_plus(1.5, 2),
                                   SpectralModel.power_law(1.5)])
def test_sigma_sq_total_against_partial_sums(model):
    total, err = sigma_sq_total(model)
    partial = math.fsum(sigmas(model, 20000) ** 2)
    assert partial <= total + err
    assert total - partial < 5e-3


def test_descriptor_roundtrip():
    for m in [SpectralModel.trig_sharp(2, 3), SpectralModel.trig_plus(1, 2), SpectralModel.legendre(2),
              SpectralModel.power_law(2, 2)]:
        assert SpectralModel.from_json(m.to_json()) == m


def test_legendre_needs_s_above_half():
    with pytest.raises(ValueError):
        SpectralModel.legendre(0.5)
