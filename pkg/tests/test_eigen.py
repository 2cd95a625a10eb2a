import numpy as np
import pytest
import sympy

from regent.automata import build_random, minimize, transition_matrices
from regent.eigen import ConvergenceError, balance, eigen_moduli, eigvals, hessenberg, hqr


def exact_moduli(t):
    """Moduli of the roots of the exact integer characteristic polynomial."""
    poly = sympy.Matrix(t.tolist()).charpoly()
    roots = []
    for factor, mult in sympy.factor_list(poly.as_expr())[1]:
        p = sympy.Poly(factor, poly.gen)
        roots += [complex(r) for r in p.nroots(n=30)] * mult
    return sorted((abs(r) for r in roots), reverse=True)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 7, 12, 25, 60])
def test_matches_lapack_on_random_dense(n):
    rng = np.random.default_rng(n)
    for _ in range(5):
        a = rng.normal(size=(n, n))
        ours = np.sort_complex(eigvals(a))
        ref = np.sort_complex(np.linalg.eigvals(a))
        np.testing.assert_allclose(np.sort(np.abs(ours)), np.sort(np.abs(ref)), atol=1e-9)
        # same spectrum as a multiset: every reference eigenvalue has a close partner
        for z in ref:
            assert np.min(np.abs(ours - z)) < 1e-8


def test_identity_and_diagonal():
    assert eigen_moduli(np.eye(4)) == [1.0] * 4
    assert eigen_moduli(np.diag([3.0, -5.0, 0.5])) == [5.0, 3.0, 0.5]


def test_tomita6_circulant():
    t = np.ones((3, 3)) - np.eye(3)
    np.testing.assert_allclose(eigen_moduli(t), [2, 1, 1], atol=1e-8)


def test_complex_pair_from_rotation():
    theta = 0.7
    r = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]) * 1.5
    ev = eigvals(r)
    np.testing.assert_allclose(sorted(ev.imag), [-1.5 * np.sin(theta), 1.5 * np.sin(theta)], atol=1e-12)
    np.testing.assert_allclose(np.abs(ev), [1.5, 1.5], atol=1e-12)


@pytest.mark.parametrize("n", [3, 8, 20, 64])
def test_permutation_matrices_unit_moduli(n):
    p = np.eye(n)[np.random.default_rng(n).permutation(n)]
    np.testing.assert_allclose(eigen_moduli(p), np.ones(n), atol=1e-10)


@pytest.mark.parametrize("seed", range(8))
def test_random_dfa_spectra_against_exact_charpoly(seed):
    d = minimize(build_random(9, "ab", 0.5, seed))
    t = transition_matrices(d).summed
    ours = eigen_moduli(t)
    assert ours[0] == pytest.approx(2.0, abs=1e-8)
    exact = exact_moduli(t)
    # defective zero eigenvalues are only resolved to ~eps**(1/m); compare the rest tightly
    big_ours = [m for m in ours if m > 1e-3]
    big_exact = [m for m in exact if m > 1e-3]
    np.testing.assert_allclose(big_ours, big_exact, atol=1e-8)


def test_hessenberg_is_similarity():
    a = np.random.default_rng(1).normal(size=(9, 9))
    h = hessenberg(a)
    assert np.allclose(np.tril(h, -2), 0)
    assert np.trace(h) == pytest.approx(np.trace(a))
    assert np.linalg.norm(h) == pytest.approx(np.linalg.norm(a))


def test_balance_preserves_spectrum():
    a = np.array([[1.0, 1e6, 0.0], [1e-6, 2.0, 1e5], [3e-4, 0.0, 4.0]])
    b = balance(a)
    np.testing.assert_allclose(np.sort(np.abs(np.linalg.eigvals(b))), np.sort(np.abs(np.linalg.eigvals(a))), rtol=1e-9)
    assert np.abs(b).max() < np.abs(a).max()


def test_non_convergence_is_explicit():
    a = np.random.default_rng(0).normal(size=(8, 8))
    with pytest.raises(ConvergenceError):
        hqr(hessenberg(a), max_iter=1)


def test_input_validation():
    with pytest.raises(ValueError):
        eigvals(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        eigvals(np.zeros((257, 257)))
