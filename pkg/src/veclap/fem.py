"""Vector Lagrange elements on the lifted surface and assembly of the
penalized bilinear forms.

The discrete space is the degree-k continuous scalar Lagrange space on the
flat mesh pushed through the parametric map, taken component-wise for vector
fields (3 x scalar DOFs, blocked by component).  Assembled matrices:

* ``a_tilde``: tangential-symmetric-gradient stiffness plus tangential mass,
* ``k_a``:    normal-component penalty, scaled ``eta = eta_coeff / h^2``,
* ``b_tilde``: tangential mass,
* ``k_b``:    normal mass,

composed as ``A = a_tilde + k_a`` and ``B = b_tilde + k_b``; B equals the
plain L2 vector mass matrix on the lifted surface because the tangential and
normal parts add back to the identity.

For one quadrature point the integrands use, with ``g_i`` the scalar surface
gradient of basis function i, ``t_c`` the c-th column of the tangential
projector ``P_h``, ``m_i`` the basis value, and ``H`` the Weingarten map at
the lifted point:

    tr(E_T(phi_i e_c)^T E_T(phi_j e_d)) =
        1/2 g_i[d] g_j[c] + 1/2 (g_i . g_j) P_h[c,d]
        - m_j n_h[d] (P_h H g_i)[c] - m_i n_h[c] (P_h H g_j)[d]
        + tr(H^2) m_i m_j n_h[c] n_h[d]

which follows from expanding E_T(u) = sym(P_h grad(u) P_h) - (u.n_h) H.
The element loop runs over fixed-size chunks merged in chunk order, so the
assembled triplets (and therefore the CSR matrices) are bitwise independent
of the worker-thread count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import GeometryError, InputError
from .geometry import LevelSetSurface
from .lagrange import NodeNumbering, reference_triangle
from .mesh import LinearSurfaceMesh, ParametricMap, improved_normal_lift, mesh_size
from .quadrature import triangle_rule
from .runtime import map_ordered

__all__ = [
    "FeSpace",
    "AssembledForms",
    "ExtendedPairings",
    "build_space",
    "assemble",
    "interpolate",
    "extended_pairings",
    "write_matrix_market",
]

_CHUNK = 256  # elements per work item; fixed so chunking never affects output


@dataclass(frozen=True)
class FeSpace:
    """Degree-k vector Lagrange space on the lifted surface."""

    mesh: LinearSurfaceMesh
    degree: int
    numbering: NodeNumbering

    @property
    def n_scalar(self) -> int:
        return self.numbering.n_nodes

    @property
    def n_dofs(self) -> int:
        return 3 * self.numbering.n_nodes

    def vector_dof(self, component: int, scalar_dof):
        """Global vector DOF of a scalar DOF and component (blocked layout)."""
        return component * self.n_scalar + scalar_dof


def build_space(mesh: LinearSurfaceMesh, pmap: ParametricMap, k: int) -> FeSpace:
    if not (1 <= k <= 4):
        raise InputError(f"finite element degree k must be in [1, 4], got {k}")
    if pmap.mesh is not mesh:
        raise InputError("parametric map was built for a different mesh")
    return FeSpace(mesh=mesh, degree=k, numbering=NodeNumbering(mesh.vertices, mesh.triangles, k))


@dataclass(frozen=True)
class AssembledForms:
    """Sparse symmetric parts of the penalized forms and their composition."""

    space: FeSpace
    pmap: ParametricMap
    surface: LevelSetSurface
    a_tilde: sp.csr_matrix
    k_a: sp.csr_matrix
    b_tilde: sp.csr_matrix
    k_b: sp.csr_matrix
    A: sp.csr_matrix
    B: sp.csr_matrix
    eta: float
    h: float
    quad_degree: int
    normal_map: ParametricMap | None  # improved-normal geometry, None = exact


class _PointData:
    """Per-(element, quadrature point) geometry shared by all integrands."""

    __slots__ = ("w", "mu", "basis", "grads", "P", "n", "n_tilde", "QH", "hh",
                 "x", "x_lift", "H")

    def __init__(self, space, pmap, surface, elements, rule, normal_map=None):
        ref_fe = reference_triangle(space.degree)
        basis = ref_fe.eval_basis(rule.points)          # (nq, nk)
        fe_grads = ref_fe.eval_grads(rule.points)       # (nq, nk, 2)

        jac = pmap.jacobians(elements, rule.points)     # (ne, nq, 3, 2)
        x = pmap.evaluate(elements, rule.points)        # (ne, nq, 3)
        cross = np.cross(jac[..., 0], jac[..., 1])
        mu = np.linalg.norm(cross, axis=-1)
        if not np.all(mu > 0.0):
            raise GeometryError("degenerate element Jacobian (mu <= 0)")
        n = cross / mu[..., None]

        # metric inverse of J^T J (2x2 closed form)
        g11 = np.einsum("eqc,eqc->eq", jac[..., 0], jac[..., 0])
        g12 = np.einsum("eqc,eqc->eq", jac[..., 0], jac[..., 1])
        g22 = np.einsum("eqc,eqc->eq", jac[..., 1], jac[..., 1])
        det = g11 * g22 - g12 * g12
        if not np.all(det > 0.0):
            raise GeometryError("singular metric J^T J")
        ginv = np.empty(jac.shape[:2] + (2, 2))
        ginv[..., 0, 0] = g22 / det
        ginv[..., 1, 1] = g11 / det
        ginv[..., 0, 1] = -g12 / det
        ginv[..., 1, 0] = -g12 / det

        # scalar surface gradients J (J^T J)^-1 grad_ref(phi): (ne, nq, nk, 3)
        grads = np.einsum("eqcr,eqrs,qis->eqic", jac, ginv, fe_grads)

        p_lift = surface.closest_point(x)
        if normal_map is None:
            n_tilde = surface.normal(p_lift)
        else:
            # unit normal of the one-degree-higher lift at the same
            # reference point: accurate to one order beyond n_h
            jac_hi = normal_map.jacobians(elements, rule.points)
            cross_hi = np.cross(jac_hi[..., 0], jac_hi[..., 1])
            n_tilde = cross_hi / np.linalg.norm(cross_hi, axis=-1)[..., None]
        H = surface.weingarten(p_lift)                  # (ne, nq, 3, 3)

        eye = np.eye(3)
        P = eye - n[..., :, None] * n[..., None, :]
        Hg = np.einsum("eqcd,eqid->eqic", H, grads)
        QH = np.einsum("eqcd,eqid->eqic", P, Hg)
        self.w = rule.weights
        self.mu = mu
        self.basis = basis
        self.grads = grads
        self.P = P
        self.n = n
        self.n_tilde = n_tilde
        self.QH = QH
        self.hh = np.einsum("eqcd,eqcd->eq", H, H)
        self.x = x
        self.x_lift = p_lift
        self.H = H


def _local_matrices(pd: _PointData, eta: float):
    wmu = pd.w[None, :] * pd.mu                          # (ne, nq)
    m, g = pd.basis, pd.grads

    mass = np.einsum("eq,qi,qj->eqij", wmu, m, m)        # scalar mass density
    gdot = np.einsum("eqic,eqjc->eqij", g, g)

    # stiffness: tr(E_T^T E_T) terms
    t1 = 0.5 * np.einsum("eq,eqid,eqjc->eicjd", wmu, g, g)
    t2 = 0.5 * np.einsum("eqij,eqcd->eicjd", wmu[..., None, None] * gdot, pd.P)
    t3 = np.einsum("eq,eqd,qj,eqic->eicjd", wmu, pd.n, m, pd.QH)
    t3 = t3 + np.einsum("eicjd->ejdic", t3)
    t4 = np.einsum("eqij,eqc,eqd->eicjd", mass * pd.hh[..., None, None], pd.n, pd.n)
    tang_mass = np.einsum("eqij,eqcd->eicjd", mass, pd.P)

    a_loc = t1 + t2 - t3 + t4 + tang_mass
    ka_loc = eta * np.einsum("eqij,eqc,eqd->eicjd", mass, pd.n_tilde, pd.n_tilde)
    bt_loc = tang_mass
    kb_loc = np.einsum("eqij,eqc,eqd->eicjd", mass, pd.n, pd.n)
    return a_loc, ka_loc, bt_loc, kb_loc


def _chunks(n_items: int, size: int = _CHUNK):
    for start in range(0, n_items, size):
        yield np.arange(start, min(start + size, n_items))


def assemble(space: FeSpace, pmap: ParametricMap, surface: LevelSetSurface,
             eta_coeff: float = 1.0, quad_degree: int | None = None,
             penalty_normal: str = "lifted") -> AssembledForms:
    """Assemble the four form parts and their compositions A and B.

    ``penalty_normal`` selects the improved normal of the penalty term:
    ``lifted`` (default) uses the unit normal of the degree-``k_g + 1``
    parametric lift, which carries the generic one-order-better accuracy;
    ``exact`` uses the analytic normal at the lifted quadrature points.
    """
    min_degree = 2 * (space.degree + pmap.degree)
    if quad_degree is None:
        quad_degree = min_degree
    if quad_degree < min_degree:
        raise InputError(
            f"quadrature exactness {quad_degree} below required {min_degree}")
    if penalty_normal not in ("lifted", "exact"):
        raise InputError(f"unknown penalty normal mode {penalty_normal!r}")
    normal_map = (improved_normal_lift(space.mesh, pmap.degree, surface)
                  if penalty_normal == "lifted" else None)
    rule = triangle_rule(quad_degree)
    h = mesh_size(space.mesh)
    eta = eta_coeff / h**2
    n_scalar = space.n_scalar
    conn = space.numbering.connectivity
    nk = conn.shape[1]

    def work(elements):
        pd = _PointData(space, pmap, surface, elements, rule, normal_map)
        locs = _local_matrices(pd, eta)
        c = np.arange(3)
        vdofs = c[None, None, :] * n_scalar + conn[elements][:, :, None]  # (ne, nk, 3)
        rows = np.broadcast_to(vdofs[:, :, :, None, None],
                               vdofs.shape + (nk, 3)).ravel()
        cols = np.broadcast_to(vdofs[:, None, None, :, :],
                               (vdofs.shape[0], nk, 3, nk, 3)).ravel()
        return rows, cols, [loc.ravel() for loc in locs]

    results = map_ordered(work, _chunks(space.mesh.n_triangles))
    rows = np.concatenate([r for r, _, _ in results])
    cols = np.concatenate([c for _, c, _ in results])
    n = space.n_dofs

    def build(part):
        data = np.concatenate([vals[part] for _, _, vals in results])
        return sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()

    a_tilde, k_a, b_tilde, k_b = (build(i) for i in range(4))
    A = (a_tilde + k_a).tocsr()
    B = (b_tilde + k_b).tocsr()
    if np.any(B.diagonal() <= 0.0):
        raise GeometryError("assembled B has non-positive diagonal entries")
    return AssembledForms(space=space, pmap=pmap, surface=surface,
                          a_tilde=a_tilde, k_a=k_a, b_tilde=b_tilde, k_b=k_b,
                          A=A, B=B, eta=eta, h=h, quad_degree=quad_degree,
                          normal_map=normal_map)


def _node_positions(space: FeSpace, pmap: ParametricMap) -> np.ndarray:
    """Lifted positions of the FE nodes, each from its first owning element."""
    conn = space.numbering.connectivity
    nk = conn.shape[1]
    _, first = np.unique(conn.ravel(), return_index=True)
    owner = first // nk
    local = first % nk
    ref_pts = reference_triangle(space.degree).nodes[local]

    geom_ref = reference_triangle(pmap.degree)
    phi = geom_ref.eval_basis(ref_pts)                       # (n_nodes, n_g)
    coeffs = pmap.coeffs[pmap.numbering.connectivity[owner]]  # (n_nodes, n_g, 3)
    return np.einsum("nl,nlc->nc", phi, coeffs)


def interpolate(field, space: FeSpace, pmap: ParametricMap,
                surface: LevelSetSurface) -> np.ndarray:
    """Componentwise nodal interpolation of the extended field on Gamma_h.

    ``field`` is a callable taking points of shape (..., 3) and returning
    values of the same shape; it is evaluated at the closest-point lift of
    the FE nodes, per the constant-normal extension.
    """
    pos = _node_positions(space, pmap)
    values = np.asarray(field(surface.closest_point(pos)), dtype=float)
    coeff = np.empty(space.n_dofs)
    for c in range(3):
        coeff[c * space.n_scalar:(c + 1) * space.n_scalar] = values[:, c]
    return coeff


@dataclass(frozen=True)
class ExtendedPairings:
    """Quadrature pairings of an analytic extended field with the FE basis.

    ``a_vec[i] = a_h(u^e, phi_i)`` and ``b_vec[i] = b_h(u^e, phi_i)`` with the
    penalized forms; ``r = a_vec - lam * b_vec`` is the defect functional
    ``d_lam(u^e, .)`` on the space, and ``a_ee``/``b_ee`` are the diagonal
    values ``a_h(u^e, u^e)``, ``b_h(u^e, u^e)``.
    """

    lam: float
    r: np.ndarray
    a_ee: float
    b_ee: float
    a_vec: np.ndarray
    b_vec: np.ndarray


def extended_pairings(field, lam: float, space: FeSpace, pmap: ParametricMap,
                      forms: AssembledForms) -> ExtendedPairings:
    """Pair an extended field (value + ambient Jacobian) against the basis.

    ``field`` must provide ``value(x)`` and ``extension_jacobian(x)`` for
    batched points, e.g. a :class:`~veclap.geometry.KillingField`.
    """
    rule = triangle_rule(forms.quad_degree)
    surface = forms.surface
    eta = forms.eta
    n_scalar = space.n_scalar
    conn = space.numbering.connectivity

    def work(elements):
        pd = _PointData(space, pmap, surface, elements, rule, forms.normal_map)
        wmu = pd.w[None, :] * pd.mu
        # value and ambient Jacobian of the extension at the Gamma_h points
        u = field.value(pd.x)
        Ju = field.extension_jacobian(pd.x)

        grad_t = np.einsum("eqab,eqbc,eqcd->eqad", pd.P, Ju, pd.P)
        E = 0.5 * (grad_t + np.swapaxes(grad_t, -1, -2))
        uN = np.einsum("eqc,eqc->eq", u, pd.n)
        H = pd.H  # same lifted-point Weingarten approximation as the assembly
        W = E - uN[..., None, None] * H                     # E_T of the field
        Pu = np.einsum("eqcd,eqd->eqc", pd.P, u)
        un_t = np.einsum("eqc,eqc->eq", u, pd.n_tilde)

        # tr(W S_jd) = (P_h W g_j)[d] - m_j n_h[d] tr(W H)
        PWg = np.einsum("eqab,eqbc,eqjc->eqja", pd.P, W, pd.grads)
        trWH = np.einsum("eqcd,eqcd->eq", W, H)
        stiff = PWg - pd.n[:, :, None, :] * (pd.basis[None, :, :, None]
                                             * trWH[..., None, None])
        a_el = np.einsum("eq,eqjd->ejd", wmu, stiff)
        a_el += np.einsum("eq,eqd,qj->ejd", wmu, Pu, pd.basis)
        a_el += eta * np.einsum("eq,eq,eqd,qj->ejd", wmu, un_t, pd.n_tilde, pd.basis)
        # b-pairing integrand reduces to u itself: P_h u (P_h .) + u_N (n_h .)
        b_el = np.einsum("eq,eqd,qj->ejd", wmu, u, pd.basis)

        a_ee = float(np.einsum("eq,eqcd,eqcd->", wmu, W, W)
                     + np.einsum("eq,eqc,eqc->", wmu, Pu, Pu)
                     + eta * np.einsum("eq,eq,eq->", wmu, un_t, un_t))
        b_ee = float(np.einsum("eq,eqc,eqc->", wmu, u, u))

        a_vec = np.zeros(space.n_dofs)
        b_vec = np.zeros(space.n_dofs)
        dofs = (np.arange(3)[None, None, :] * n_scalar + conn[elements][:, :, None])
        np.add.at(a_vec, dofs.ravel(), a_el.ravel())
        np.add.at(b_vec, dofs.ravel(), b_el.ravel())
        return a_vec, b_vec, a_ee, b_ee

    results = map_ordered(work, _chunks(space.mesh.n_triangles))
    a_vec = np.zeros(space.n_dofs)
    b_vec = np.zeros(space.n_dofs)
    a_ee = 0.0
    b_ee = 0.0
    for av, bv, ae, be in results:
        a_vec += av
        b_vec += bv
        a_ee += ae
        b_ee += be
    return ExtendedPairings(lam=lam, r=a_vec - lam * b_vec,
                            a_ee=a_ee, b_ee=b_ee, a_vec=a_vec, b_vec=b_vec)


def write_matrix_market(matrix: sp.spmatrix, path, comment: str = "") -> None:
    """Write a symmetric sparse matrix in MatrixMarket coordinate format.

    Stores the lower triangle with 1-based indices, as the symmetric variant
    of the format requires.
    """
    m = sp.coo_matrix(matrix)
    keep = m.row >= m.col
    rows, cols, data = m.row[keep], m.col[keep], m.data[keep]
    order = np.lexsort((rows, cols))
    with open(path, "w", encoding="ascii") as f:
        f.write("%%MatrixMarket matrix coordinate real symmetric\n")
        if comment:
            f.write(f"% {comment}\n")
        f.write(f"{m.shape[0]} {m.shape[1]} {len(data)}\n")
        for i in order:
            f.write(f"{rows[i] + 1} {cols[i] + 1} {data[i]:.17e}\n")
