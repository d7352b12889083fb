"""FEM module: spaces, assembly, interpolation, analytic-field pairings."""

import math
import os

import numpy as np
import pytest

from veclap.analysis import eoc
from veclap.errors import InputError
from veclap.fem import (
    assemble,
    build_space,
    extended_pairings,
    interpolate,
    write_matrix_market,
)
from veclap.geometry import KillingField, Sphere
from veclap.mesh import icosphere, mesh_size, parametric_lift, surface_area
from veclap.runtime import THREADS_ENV

S = Sphere()
KF = KillingField("z", S)


def setup_forms(k, kg, level, jitter=0.0, **kw):
    mesh = icosphere(level, S, jitter=jitter)
    pmap = parametric_lift(mesh, kg, S)
    space = build_space(mesh, pmap, k)
    return space, pmap, assemble(space, pmap, S, **kw)


class ZeroField:
    def value(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def extension_jacobian(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (3, 3))


class TestBuildSpace:
    def test_dof_counts_level0(self):
        mesh = icosphere(0)
        pmap = parametric_lift(mesh, 1, S)
        sp1 = build_space(mesh, pmap, 1)
        assert sp1.n_scalar == 12 and sp1.n_dofs == 36
        sp2 = build_space(mesh, pmap, 2)
        assert sp2.n_scalar == 42  # 12 vertices + 30 edges

    def test_dof_counts_level2(self):
        mesh = icosphere(2)
        pmap = parametric_lift(mesh, 1, S)
        assert build_space(mesh, pmap, 1).n_scalar == 162

    def test_degree_guard(self):
        mesh = icosphere(0)
        pmap = parametric_lift(mesh, 1, S)
        with pytest.raises(InputError):
            build_space(mesh, pmap, 5)


class TestAssemble:
    def test_constant_field_mass_equals_area(self):
        for (k, kg) in ((1, 1), (2, 2)):
            space, pmap, forms = setup_forms(k, kg, 1)
            c = np.zeros(space.n_dofs)
            c[:space.n_scalar] = 1.0
            area = surface_area(pmap, forms.quad_degree)
            assert c @ (forms.B @ c) == pytest.approx(area, abs=1e-10)

    def test_symmetry(self):
        space, pmap, forms = setup_forms(2, 2, 1)
        for M in (forms.a_tilde, forms.k_a, forms.b_tilde, forms.k_b):
            diff = np.abs((M - M.T).toarray()).max()
            assert diff <= 1e-12 * np.abs(M.toarray()).max()

    def test_penalty_parts_psd_and_B_spd(self):
        space, pmap, forms = setup_forms(1, 1, 1)
        for M in (forms.k_a, forms.k_b):
            w = np.linalg.eigvalsh(M.toarray())
            assert w.min() >= -1e-12 * max(w.max(), 1.0)
        wb = np.linalg.eigvalsh(forms.B.toarray())
        assert wb.min() > 0

    def test_rayleigh_quotient_of_interpolated_killing_field(self):
        space, pmap, forms = setup_forms(1, 1, 3)
        x = interpolate(KF.value, space, pmap, S)
        rq = (x @ (forms.A @ x)) / (x @ (forms.B @ x))
        h = mesh_size(space.mesh)
        assert abs(rq - 1.0) <= h**2

    def test_quadrature_degree_guard(self):
        mesh = icosphere(0)
        pmap = parametric_lift(mesh, 2, S)
        space = build_space(mesh, pmap, 2)
        with pytest.raises(InputError):
            assemble(space, pmap, S, quad_degree=5)

    def test_quadrature_sufficiency(self):
        # doubling the exactness degree moves entries by <= 1e-10 relative
        space, pmap, forms = setup_forms(2, 2, 3)
        doubled = assemble(space, pmap, S, quad_degree=2 * forms.quad_degree)
        for a, b in ((forms.A, doubled.A), (forms.B, doubled.B)):
            rel = np.abs((a - b).data).max() / np.abs(a.data).max()
            assert rel <= 1e-10
        # with affine geometry the B parts are exactly integrated already
        space1, pmap1, f1 = setup_forms(1, 1, 2)
        d1 = assemble(space1, pmap1, S, quad_degree=2 * f1.quad_degree)
        assert np.abs((f1.B - d1.B).data).max() <= 1e-14

    def test_eta_scaling(self):
        space, pmap, f1 = setup_forms(1, 1, 1)
        f4 = assemble(space, pmap, S, eta_coeff=4.0)
        assert f4.eta == pytest.approx(4.0 * f1.eta, rel=1e-14)
        np.testing.assert_allclose(f4.k_a.toarray(), 4.0 * f1.k_a.toarray(),
                                   rtol=1e-13)

    def test_thread_count_does_not_change_bits(self):
        old = os.environ.get(THREADS_ENV)
        try:
            os.environ[THREADS_ENV] = "1"
            _, _, f1 = setup_forms(2, 2, 2, jitter=0.3)
            os.environ[THREADS_ENV] = "4"
            _, _, f4 = setup_forms(2, 2, 2, jitter=0.3)
        finally:
            if old is None:
                os.environ.pop(THREADS_ENV, None)
            else:
                os.environ[THREADS_ENV] = old
        for a, b in ((f1.A, f4.A), (f1.B, f4.B)):
            np.testing.assert_array_equal(a.data, b.data)
            np.testing.assert_array_equal(a.indices, b.indices)
            np.testing.assert_array_equal(a.indptr, b.indptr)


class TestSpectralProperties:
    def test_smallest_eigenvalue_bounded_below(self):
        # discrete ellipticity: lambda_1 >= 0.5 (exact value is 1)
        import scipy.linalg as sla
        for (k, kg, lvl) in ((1, 1, 1), (1, 1, 2), (2, 1, 1), (1, 2, 1), (2, 2, 1)):
            _, _, forms = setup_forms(k, kg, lvl)
            w = sla.eigh(forms.A.toarray(), forms.B.toarray(),
                         eigvals_only=True, subset_by_index=[0, 0])
            assert w[0] >= 0.5

    def test_friedrichs_constant_uniform(self):
        # c_F = 1/sqrt(lambda_1) stays bounded along refinement
        import scipy.linalg as sla
        cfs = []
        for lvl in (0, 1, 2):
            _, _, forms = setup_forms(1, 1, lvl)
            w = sla.eigh(forms.A.toarray(), forms.B.toarray(),
                         eigvals_only=True, subset_by_index=[0, 0])
            cfs.append(1.0 / math.sqrt(w[0]))
        assert max(cfs) <= 1.5


class TestInterpolate:
    def test_constant_reproduced(self):
        space, pmap, _ = setup_forms(3, 2, 0)
        const = np.array([0.3, -1.2, 0.7])
        x = interpolate(lambda p: np.broadcast_to(const, p.shape), space, pmap, S)
        for c in range(3):
            block = x[c * space.n_scalar:(c + 1) * space.n_scalar]
            np.testing.assert_allclose(block, const[c], atol=1e-14)

    def test_energy_norm_interpolation_rate(self):
        # degree-2 fields: energy-norm error of the interpolant decays ~ h^2
        errs, hs = [], []
        for lvl in (2, 3, 4):
            space, pmap, forms = setup_forms(2, 1, lvl, jitter=0.3)
            ep = extended_pairings(KF, 1.0, space, pmap, forms)
            x = interpolate(KF.value, space, pmap, S)
            errs.append(math.sqrt(max(
                ep.a_ee - 2.0 * (ep.a_vec @ x) + x @ (forms.A @ x), 0.0)))
            hs.append(mesh_size(space.mesh))
        rate = eoc(errs[-2], errs[-1], hs[-2], hs[-1])
        assert abs(rate - 2.0) <= 0.4

    def test_l2_interpolation_rate_k1(self):
        # L2 error decays ~ h^{k+1} = h^2 for k = 1
        errs, hs = [], []
        for lvl in (2, 3, 4):
            space, pmap, forms = setup_forms(1, 1, lvl, jitter=0.3)
            ep = extended_pairings(KF, 1.0, space, pmap, forms)
            x = interpolate(KF.value, space, pmap, S)
            errs.append(math.sqrt(max(
                ep.b_ee - 2.0 * (ep.b_vec @ x) + x @ (forms.B @ x), 0.0)))
            hs.append(mesh_size(space.mesh))
        rate = eoc(errs[-2], errs[-1], hs[-2], hs[-1])
        assert abs(rate - 2.0) <= 0.4

    def test_penalty_vanishes_on_interpolated_tangential_field(self):
        vals = []
        for lvl in (1, 2, 3):
            space, pmap, forms = setup_forms(1, 1, lvl)
            x = interpolate(KF.value, space, pmap, S)
            vals.append(x @ (forms.k_a @ x))
        assert vals[2] < vals[1] < vals[0]
        assert vals[2] <= 1e-4


class TestExtendedPairings:
    def test_killing_diagonal_limits(self):
        # int over the sphere of |u_1|^2 = int (x^2 + y^2) = 8 pi / 3;
        # the energy value converges to the same number since E(u_1) = 0
        target = 8.0 * math.pi / 3.0
        errs_b, errs_a = [], []
        for lvl in (2, 3):
            space, pmap, forms = setup_forms(1, 1, lvl)
            ep = extended_pairings(KF, 1.0, space, pmap, forms)
            errs_b.append(abs(ep.b_ee - target))
            errs_a.append(abs(ep.a_ee - target))
        assert errs_b[1] < errs_b[0] and errs_a[1] < errs_a[0]
        assert errs_b[1] <= 0.05 and errs_a[1] <= 0.05

    def test_zero_field(self):
        space, pmap, forms = setup_forms(1, 1, 0)
        ep = extended_pairings(ZeroField(), 1.0, space, pmap, forms)
        assert ep.a_ee == 0.0 and ep.b_ee == 0.0
        assert np.all(ep.a_vec == 0.0) and np.all(ep.r == 0.0)

    def test_defect_is_a_minus_lambda_b(self):
        space, pmap, forms = setup_forms(1, 1, 1)
        ep = extended_pairings(KF, 2.5, space, pmap, forms)
        np.testing.assert_allclose(ep.r, ep.a_vec - 2.5 * ep.b_vec, atol=1e-15)


def test_matrix_market_export(tmp_path):
    space, pmap, forms = setup_forms(1, 1, 0)
    path = tmp_path / "A.mtx"
    write_matrix_market(forms.A, path, comment="test")
    lines = path.read_text().splitlines()
    assert lines[0] == "%%MatrixMarket matrix coordinate real symmetric"
    n, m, nnz = (int(x) for x in lines[2].split())
    assert n == m == space.n_dofs
    entries = [ln.split() for ln in lines[3:]]
    assert len(entries) == nnz
    rows = np.array([int(e[0]) for e in entries])
    cols = np.array([int(e[1]) for e in entries])
    assert rows.min() >= 1 and cols.min() >= 1  # 1-based
    assert np.all(rows >= cols)                 # lower triangle
    # reconstruct and compare against the assembled matrix
    import scipy.sparse as sp
    vals = np.array([float(e[2]) for e in entries])
    low = sp.coo_matrix((vals, (rows - 1, cols - 1)), shape=(n, n)).tocsr()
    full = low + low.T - sp.diags(low.diagonal())
    assert np.abs((full - forms.A).toarray()).max() <= 1e-13
