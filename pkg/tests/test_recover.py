import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rkhs_lsq.christoffel import GridSpec
from rkhs_lsq.errors import RankDeficientError
from rkhs_lsq.recover import (
    assemble,
    evaluate,
    fit,
    load_coefficients,
    spectral_norm_check,
)
from rkhs_lsq.sampler import NodeSet, draw_nodes
from rkhs_lsq.spectral import SpectralModel, basis_matrix

T1 = SpectralModel.trig_sharp(2, 1)
L2 = SpectralModel.legendre(2)


def fixed_nodes(x, m, dens=None):
    x = np.asarray(x, dtype=float).reshape(len(x), -1)
    dens = np.ones(len(x)) if dens is None else np.asarray(dens)
    return NodeSet(x, dens, 0, "none", m)


def test_tailored_trig_matrix_equals_plain():
    ns = draw_nodes(T1, 6, 40, "tailored", seed=1)
    a = assemble(T1, ns, 6, weighted=True).entries
    b = assemble(T1, ns, 6, weighted=False).entries
    np.testing.assert_array_equal(a, b)


def test_single_node_matrix():
    ns = fixed_nodes([0.3], 2, [0.25])
    A = assemble(L2, ns, 2, weighted=True).entries
    assert A.shape == (1, 1)
    assert A[0, 0] == pytest.approx((1 / np.sqrt(2)) / np.sqrt(0.25))


def test_underdetermined_rejected():
    with pytest.raises(ValueError):
        assemble(T1, fixed_nodes([0.1, 0.2], 5), 5)


def test_rank_deficiency_reported():
    ns = fixed_nodes([0.5, 0.5, 0.5], 3)
    mat = assemble(T1, ns, 3, weighted=False)
    with pytest.raises(RankDeficientError) as exc:
        fit(mat, np.ones(3))
    assert exc.value.rank == 1
    op = fit(mat, np.ones(3), strict=False)
    assert not op.rank_ok
    assert spectral_norm_check(mat) == (float("inf"), False)


@pytest.mark.parametrize("model,variant", [(T1, "tailored"), (L2, "tailored"), (L2, "simple")])
def test_reproduces_span(model, variant):
    m = 9
    ns = draw_nodes(model, m, 200, variant, seed=4)
    op = fit(assemble(model, ns, m), np.zeros(len(ns)))
    rng = np.random.default_rng(0)
    grid = GridSpec.default(model, 512).points()
    Bn = basis_matrix(model, ns.nodes, m - 1)
    Bg = basis_matrix(model, grid, m - 1)
    for _ in range(10):
        c = rng.standard_normal(m - 1) + (1j * rng.standard_normal(m - 1) if model.basis == "trig" else 0)
        c /= np.linalg.norm(c)
        coef = op.apply(Bn @ c)
        assert np.max(np.abs(Bg @ coef - Bg @ c)) < 1e-9


def test_zero_samples_give_zero():
    ns = draw_nodes(T1, 5, 30, "tailored", seed=2)
    op = fit(assemble(T1, ns, 5), np.zeros(30))
    assert np.all(op.coefficients == 0)


def test_square_system_interpolates():
    x = np.array([0.1, 1.3, 2.2, 4.0])
    ns = fixed_nodes(x, 5)
    f = np.array([1.0, -2.0, 0.5, 3.0])
    op = fit(assemble(T1, ns, 5, weighted=False), f)
    np.testing.assert_allclose(evaluate(op, T1, x), f, atol=1e-12)


def test_constant_function():
    ns = draw_nodes(T1, 6, 50, "tailored", seed=3)
    op = fit(assemble(T1, ns, 6), np.full(50, 2.5))
    vals = evaluate(op, T1, np.linspace(0, 6, 30))
    np.testing.assert_allclose(vals, 2.5, atol=1e-12)
    assert evaluate(op, T1, 1.0) == pytest.approx(2.5)


@given(n=st.integers(4, 12), m=st.integers(2, 4), seed=st.integers(0, 10 ** 6))
def test_factorization_matches_normal_equations(n, m, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, n)
    dens = rng.uniform(0.3, 2.0, n)
    ns = fixed_nodes(x, m, dens)
    mat = assemble(L2, ns, m, weighted=True)
    g = rng.standard_normal(n)
    op = fit(mat, g)
    A = mat.entries
    ref = np.linalg.solve(A.T @ A, A.T @ (g * mat.row_scale))
    np.testing.assert_allclose(op.coefficients, ref, rtol=1e-8, atol=1e-10)


def test_spectral_norm_orthogonal_columns():
    n = 16
    x = 2 * np.pi * np.arange(n) / n
    mat = assemble(T1, fixed_nodes(x, 5), 5, weighted=False)
    norm, ok = spectral_norm_check(mat)
    assert norm == pytest.approx(1 / np.sqrt(n)) and ok


def test_coefficient_norm_chain():
    # ||c|| <= ||pinv|| * ||(f - Pf)(x^i) / sqrt(rho_i)|| for f orthogonal to the span
    m = 8
    ns = draw_nodes(L2, m, 300, "tailored", seed=6)
    mat = assemble(L2, ns, m)
    f = basis_matrix(L2, ns.nodes, 1, start=m + 3)[:, 0]
    op = fit(mat, f)
    norm, _ = spectral_norm_check(mat)
    assert np.linalg.norm(op.coefficients) <= norm * np.linalg.norm(f * mat.row_scale) * (1 + 1e-12)


def test_weight_norm_matches_weights():
    ns = draw_nodes(L2, 6, 40, "tailored", seed=8)
    op = fit(assemble(L2, ns, 6), np.zeros(40))
    x = np.linspace(-1, 1, 7)
    W = op.node_weights(L2, x)
    np.testing.assert_allclose(op.weight_norm_sq(L2, x), np.sum(np.abs(W) ** 2, axis=1), rtol=1e-12)


def test_operator_json(tmp_path):
    ns = draw_nodes(T1, 4, 20, "tailored", seed=5)
    f = np.cos(ns.nodes[:, 0])
    op = fit(assemble(T1, ns, 4), f, model=T1)
    path = tmp_path / "op.json"
    op.to_json(path)
    np.testing.assert_allclose(load_coefficients(path), op.coefficients)
    doc = json.loads(path.read_text())
    assert doc["m"] == 4 and doc["rank_ok"] is True
