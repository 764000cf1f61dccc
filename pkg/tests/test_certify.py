import dataclasses
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rkhs_lsq.christoffel import GridSpec
from rkhs_lsq.certify import (
    certify_sup,
    decomposition_bound,
    kernel_eval,
    legendre_kernel_diagonal_at_one,
    pointwise_wce,
    truncation_rank,
    unit_ball_search,
)
from rkhs_lsq.recover import assemble, evaluate, fit
from rkhs_lsq.sampler import NodeSet, draw_nodes
from rkhs_lsq.spectral import SpectralModel, WeightModel, basis_matrix, sigma_sq_total, sigmas

T1 = SpectralModel.trig_sharp(2, 1)
T2 = SpectralModel.trig_sharp(2, 2)
L2 = SpectralModel.legendre(2)


def fitted(model, m, n, seed=0, variant="tailored"):
    ns = draw_nodes(model, m, n, variant, seed=seed)
    return fit(assemble(model, ns, m), np.zeros(n))


def test_truncation_rank_trig():
    K, tb = truncation_rank(T1, 1e-6)
    total, _ = sigma_sq_total(T1)
    head = math.fsum(sigmas(T1, K) ** 2)
    assert tb <= 1e-6 and total - head <= 1e-6 + 1e-12
    assert total - math.fsum(sigmas(T1, K - 1) ** 2) > 1e-6 - 1e-12


def test_truncation_rank_rejects_power_law():
    with pytest.raises(ValueError):
        truncation_rank(SpectralModel.power_law(2), 1e-6)


@pytest.mark.parametrize("model", [T1, T2, L2])
def test_kernel_hermitian(model):
    x = GridSpec.default(model, 6).points()
    K = kernel_eval(model, x, x, 1e-8).values
    np.testing.assert_allclose(K, K.conj().T, atol=1e-14)
    assert np.all(np.linalg.eigvalsh(K) >= -1e-10)


def test_trig_kernel_diagonal_is_spectrum_total():
    total, _ = sigma_sq_total(T2)
    kv = kernel_eval(T2, [[0.3, 1.1]], [[0.3, 1.1]], 1e-9)
    assert kv.values[0, 0].real == pytest.approx(total, abs=1e-9)


def test_legendre_kernel_at_one():
    ser = legendre_kernel_diagonal_at_one(2.0, 1e-12)
    j = np.arange(200000, dtype=float)
    direct = math.fsum((2 * j + 1) / 2 / (1 + (j * (j + 1)) ** 2))
    # degrees past 2e5 add about 1.25e-11
    assert direct <= ser.value + ser.remainder_bound and ser.value - direct < 2e-11
    kv = kernel_eval(L2, 1.0, 1.0, 1e-8)
    assert kv.values[0, 0] <= ser.value and kv.values[0, 0] >= ser.value - 1e-8


def test_zero_operator_gives_kernel_diagonal():
    op = fitted(T1, 4, 20, seed=1)
    op = dataclasses.replace(op, pinv=np.zeros_like(op.pinv))
    x = np.linspace(0, 6, 9)
    total, _ = sigma_sq_total(T1)
    np.testing.assert_allclose(pointwise_wce(op, T1, x, eps=1e-10), math.sqrt(total), rtol=1e-9)


def test_vanishes_at_interpolation_nodes():
    x = np.array([0.2, 1.5, 2.9, 4.4, 5.6])
    ns = NodeSet(x[:, None], np.ones(5), 0, "none", 6)
    op = fit(assemble(T1, ns, 6, weighted=False), np.zeros(5))
    e, det = pointwise_wce(op, T1, x, eps=1e-10, return_details=True)
    assert np.all(e <= 1e-6)
    assert np.all(det["raw"] >= -1e-10)


@pytest.mark.parametrize("model", [T1, L2])
def test_grid_certificate_matches_kernel_form(model):
    op = fitted(model, 6, 60, seed=2)
    grid = GridSpec.default(model, 64)
    eps = 1e-10 if model.basis == "trig" else 1e-8
    cert = certify_sup(op, model, grid, eps=eps, keep_values=True)
    direct = pointwise_wce(op, model, cert.points, eps=eps)
    np.testing.assert_allclose(cert.values, direct, atol=1e-7)
    assert cert.sup_value == pytest.approx(direct.max(), abs=1e-7)


def test_grid_certificate_two_dimensional():
    op = fitted(T2, 10, 150, seed=3)
    grid = GridSpec((12, 12))
    cert = certify_sup(op, T2, grid, eps=1e-9, keep_values=True)
    direct = pointwise_wce(op, T2, cert.points, eps=1e-9)
    np.testing.assert_allclose(cert.values, direct, atol=1e-6)


@settings(max_examples=10)
@given(seed=st.integers(0, 10 ** 6))
def test_certificate_dominates_unit_ball_errors(seed):
    m, n, K = 8, 80, 200
    op = fitted(T1, m, n, seed=seed % 97)
    grid = GridSpec((256,))
    cert = certify_sup(op, T1, grid, eps=1e-9)
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(K) + 1j * rng.standard_normal(K)
    a /= np.linalg.norm(a)
    coef = a * sigmas(T1, K)  # unit RKHS norm
    f_nodes = basis_matrix(T1, op.nodes.nodes, K) @ coef
    pts = grid.points()
    f_grid = basis_matrix(T1, pts, K) @ coef
    err = np.abs(f_grid - evaluate(op, T1, pts, op.apply(f_nodes)))
    assert err.max() <= cert.upper * (1 + 1e-9)


def test_certificate_vanishes_on_finite_spectrum():
    # ranks beyond the first five carry weight 1e8: the span reproduces all of them
    big = 1e8

    def ev(k):
        a = np.abs(k[:, 0])
        return np.where(a <= 2, 1.0, big * (1.0 + a) ** 2)

    def cb(R):
        return 2 if R < big * 16 else int(math.sqrt(R / big))

    tail = 2 * math.fsum((1.0 + k) ** -4 for k in range(3, 100000)) / big ** 2
    wm = WeightModel("custom", 1.0, 1, evaluator=ev, coord_bound=cb, inverse_sq_total=5 + tail)
    model = SpectralModel("trig", weight=wm)
    op = fitted(model, 6, 40, seed=1)
    cert = certify_sup(op, model, eps=1e-14)
    assert cert.upper <= 1e-6


def test_decomposition_dominates_certificate():
    op = fitted(L2, 8, 120, seed=4)
    grid = GridSpec((257,), "chebyshev")
    cert = certify_sup(op, L2, grid, eps=1e-9)
    bound, parts = decomposition_bound(op, L2, grid, eps=1e-9)
    assert bound >= cert.sup_value
    assert parts["projection_sup"] <= bound


def test_more_nodes_smaller_median():
    m, grid = 8, GridSpec((512,))
    small, large = [], []
    for t in range(20):
        ns = draw_nodes(T1, m, 400, "tailored", seed=t)
        sub = NodeSet(ns.nodes[:100], ns.density_values[:100], ns.seed, ns.variant, m)
        small.append(certify_sup(fit(assemble(T1, sub, m), np.zeros(100)), T1, grid).sup_value)
        large.append(certify_sup(fit(assemble(T1, ns, m), np.zeros(400)), T1, grid).sup_value)
    assert np.median(large) < np.median(small)


def test_unit_ball_search_is_lower_bound():
    x = np.array([0.4, 2.0, 5.1])
    nodes = NodeSet(np.array([[0.1], [1.2], [2.6], [3.9], [5.0]]), np.ones(5), 0, "none", 3)
    op = fit(assemble(T1, nodes, 3, weighted=False), np.zeros(5))
    e = pointwise_wce(op, T1, x, eps=1e-12)
    found = unit_ball_search(op, T1, x, draws=2000, seed=1)
    assert np.all(found <= e * (1 + 1e-9))
    assert np.all(found >= 0.8 * e)


def test_certificate_outputs(tmp_path):
    op = fitted(T1, 4, 30, seed=5)
    cert = certify_sup(op, T1, GridSpec((32,)), keep_values=True)
    cert.to_json(tmp_path / "c.json")
    cert.to_csv(tmp_path / "c.csv")
    doc = json.loads((tmp_path / "c.json").read_text())
    assert doc["sup_value"] == cert.sup_value and doc["upper"] >= doc["sup_value"]
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "x_1,e" and len(lines) == 33
    bare = certify_sup(op, T1, GridSpec((32,)))
    with pytest.raises(ValueError):
        bare.to_csv(tmp_path / "x.csv")
