"""Generalized symmetric eigensolver: dense oracle, iterative path, guards."""

import numpy as np
import pytest
import scipy.sparse as sp

import veclap.eigensolve as es
from veclap.errors import ConvergenceError, InputError
from veclap.eigensolve import full_spectrum, solve_smallest


def random_spd_pencil(rng, n, spread=50.0):
    q = np.linalg.qr(rng.standard_normal((n, n)))[0]
    A = q @ np.diag(rng.uniform(0.5, spread, n)) @ q.T
    r = rng.standard_normal((n, n))
    B = r @ r.T + n * np.eye(n)
    return 0.5 * (A + A.T), 0.5 * (B + B.T)


class TestDense:
    def test_diagonal_problem(self):
        ep = solve_smallest(np.diag([3.0, 1.0, 2.0]), np.eye(3), 2, method="dense")
        np.testing.assert_allclose(ep.eigenvalues, [1.0, 2.0], atol=1e-14)
        # eigenvectors are signed coordinate vectors
        np.testing.assert_allclose(np.abs(ep.vectors),
                                   [[0, 0], [1, 0], [0, 1]], atol=1e-14)

    def test_identity_pencil(self):
        rng = np.random.default_rng(1)
        A, _ = random_spd_pencil(rng, 12)
        ep = solve_smallest(A, A.copy(), 3, method="dense")
        np.testing.assert_allclose(ep.eigenvalues, 1.0, atol=1e-12)

    def test_two_by_two(self):
        ep = full_spectrum(np.array([[2.0, 0.0], [0.0, 8.0]]), 2.0 * np.eye(2))
        np.testing.assert_allclose(ep.eigenvalues, [1.0, 4.0], atol=1e-14)

    def test_b_not_spd(self):
        with pytest.raises(InputError):
            solve_smallest(np.eye(3), np.diag([1.0, -1.0, 1.0]), 1, method="dense")

    def test_shape_mismatch(self):
        with pytest.raises(InputError):
            solve_smallest(np.eye(3), np.eye(4), 1)


class TestFullSpectrum:
    def test_trace_identity(self):
        rng = np.random.default_rng(5)
        A, B = random_spd_pencil(rng, 40)
        ep = full_spectrum(A, B)
        tr = np.trace(np.linalg.solve(B, A))
        assert ep.eigenvalues.sum() == pytest.approx(tr, rel=1e-9)

    def test_b_orthonormality(self):
        rng = np.random.default_rng(6)
        A, B = random_spd_pencil(rng, 30)
        ep = full_spectrum(A, B)
        gram = ep.vectors.T @ B @ ep.vectors
        assert np.abs(gram - np.eye(30)).max() <= 1e-10

    def test_size_guard(self):
        n = es.DENSE_LIMIT + 1
        A = sp.eye(n, format="csr")
        with pytest.raises(InputError):
            full_spectrum(A, A)


class TestIterative:
    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(5):
            n = int(rng.integers(30, 120))
            A, B = random_spd_pencil(rng, n)
            m = int(rng.integers(2, 8))
            dense = solve_smallest(A, B, m, method="dense")
            it = solve_smallest(sp.csr_matrix(A), sp.csr_matrix(B), m,
                                method="iterative")
            rel = np.abs(dense.eigenvalues - it.eigenvalues) / dense.eigenvalues
            assert rel.max() <= 1e-9
            gram = it.vectors.T @ B @ it.vectors
            assert np.abs(gram - np.eye(m)).max() <= 1e-9

    def test_residual_contract(self):
        rng = np.random.default_rng(9)
        A, B = random_spd_pencil(rng, 80)
        ep = solve_smallest(sp.csr_matrix(A), sp.csr_matrix(B), 4,
                            tol=1e-11, method="iterative")
        assert ep.residuals.max() <= 1e-11
        assert ep.method == "iterative" and ep.iterations > 0

    def test_pair_contracts(self):
        # X^T B X = I and X^T A X = diag(lambda) within 1e-8 scaled
        rng = np.random.default_rng(14)
        A, B = random_spd_pencil(rng, 90)
        ep = solve_smallest(sp.csr_matrix(A), sp.csr_matrix(B), 5,
                            method="iterative")
        m = ep.m
        assert np.abs(ep.vectors.T @ B @ ep.vectors - np.eye(m)).max() <= 1e-8
        diag_dev = np.abs(ep.vectors.T @ A @ ep.vectors
                          - np.diag(ep.eigenvalues)).max()
        assert diag_dev <= 1e-8 * ep.eigenvalues[-1]

    def test_deterministic_repeat(self):
        rng = np.random.default_rng(10)
        A, B = random_spd_pencil(rng, 60)
        e1 = solve_smallest(sp.csr_matrix(A), sp.csr_matrix(B), 3, method="iterative")
        e2 = solve_smallest(sp.csr_matrix(A), sp.csr_matrix(B), 3, method="iterative")
        np.testing.assert_array_equal(e1.eigenvalues, e2.eigenvalues)
        np.testing.assert_array_equal(e1.vectors, e2.vectors)

    def test_convergence_error_carries_residuals(self, monkeypatch):
        monkeypatch.setattr(es, "_MAX_ITER", 1)
        rng = np.random.default_rng(11)
        A, B = random_spd_pencil(rng, 100)
        with pytest.raises(ConvergenceError) as err:
            solve_smallest(sp.csr_matrix(A), sp.csr_matrix(B), 5,
                           tol=1e-14, method="iterative")
        assert err.value.residuals is not None


class TestInvariants:
    def test_auto_method_switch(self):
        rng = np.random.default_rng(12)
        A, B = random_spd_pencil(rng, 20)
        assert solve_smallest(A, B, 2, method="auto").method == "dense"

    def test_scaling_invariance(self):
        rng = np.random.default_rng(13)
        A, B = random_spd_pencil(rng, 50)
        base = solve_smallest(A, B, 4, method="dense")
        scaled = solve_smallest(3.7 * A, 3.7 * B, 4, method="dense")
        rel = np.abs(base.eigenvalues - scaled.eigenvalues) / base.eigenvalues
        assert rel.max() <= 1e-12

    def test_sphere_spectrum_monotone_convergence(self):
        from veclap.fem import assemble, build_space
        from veclap.geometry import Sphere
        from veclap.mesh import icosphere, parametric_lift

        s = Sphere()
        exact = np.array([1.0, 1.0, 1.0, 2.0, 2.0, 2.0])
        max_err = []
        for lvl in (1, 2, 3):
            mesh = icosphere(lvl, s)
            pmap = parametric_lift(mesh, 1, s)
            space = build_space(mesh, pmap, 1)
            forms = assemble(space, pmap, s)
            ep = solve_smallest(forms.A, forms.B, 6)
            max_err.append(np.abs(ep.eigenvalues - exact).max())
        assert max_err[2] < max_err[1] < max_err[0]

    def test_solver_paths_agree_on_fem_problem(self):
        from veclap.fem import assemble, build_space
        from veclap.geometry import Sphere
        from veclap.mesh import icosphere, parametric_lift

        s = Sphere()
        mesh = icosphere(2, s)
        pmap = parametric_lift(mesh, 2, s)
        space = build_space(mesh, pmap, 1)
        forms = assemble(space, pmap, s)
        dense = solve_smallest(forms.A, forms.B, 6, method="dense")
        it = solve_smallest(forms.A, forms.B, 6, method="iterative")
        rel = np.abs(dense.eigenvalues - it.eigenvalues) / dense.eigenvalues
        assert rel.max() <= 1e-8
