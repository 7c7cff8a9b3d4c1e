"""Linear-elastic equilibrium of film and substrate on the subgraph mesh.

Plane strain, isotropic film and substrate, P1 triangles.  The lattice
mismatch enters either as an eigenstrain ``e0 e1 (x) e1`` in the film or,
equivalently, as a prescribed displacement jump ``(e0 x, 0)`` across the
interface with no eigenstrain.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvalidMaterials, MeshMismatch, NonConvergence, SingularSystem
from .geometry import Mesh, Profile

log = logging.getLogger(__name__)

__all__ = [
    "Materials",
    "BoundaryMode",
    "ElasticState",
    "solve_equilibrium",
    "solve_transmission_formulation",
    "strain_energy_density",
    "boundary_trace_density",
    "elastic_shape_derivative",
    "zero_state",
]


@dataclass(frozen=True)
class Materials:
    mu_f: float
    lambda_f: float
    mu_s: float
    lambda_s: float
    e0: float = 0.0

    def __post_init__(self):
        if not (self.mu_f > 0 and self.mu_s > 0):
            raise InvalidMaterials("shear moduli must be positive")
        if not (self.mu_f + self.lambda_f > 0 and self.mu_s + self.lambda_s > 0):
            raise InvalidMaterials("need mu + lambda > 0 in film and substrate")
        if self.e0 < 0:
            raise InvalidMaterials("mismatch e0 must be >= 0")

    @property
    def quasi_monotone(self) -> bool:
        """Substrate at least as stiff as the film in both moduli."""
        return self.mu_s >= self.mu_f and self.mu_s + self.lambda_s >= self.mu_f + self.lambda_f

    def voigt(self, film: bool) -> np.ndarray:
        mu, lam = (self.mu_f, self.lambda_f) if film else (self.mu_s, self.lambda_s)
        return np.array([[2 * mu + lam, lam, 0.0], [lam, 2 * mu + lam, 0.0], [0.0, 0.0, mu]])

    def scaled(self, c: float) -> "Materials":
        return Materials(c * self.mu_f, c * self.lambda_f, c * self.mu_s, c * self.lambda_s, self.e0)


@dataclass(frozen=True)
class BoundaryMode:
    """Lateral condition plus the bottom clamp value.

    ``lateral`` is ``"periodic"``, ``"free"`` (traction-free sides) or
    ``"clamped"``.
    """

    lateral: str = "periodic"
    bottom_displacement: tuple = (0.0, 0.0)
    clamp_bottom: bool = True

    def __post_init__(self):
        if self.lateral not in ("periodic", "free", "clamped"):
            raise ValueError(f"unknown lateral mode {self.lateral!r}")


@dataclass(eq=False)
class ElasticState:
    """Solved displacement on a mesh.

    ``u`` is indexed by displacement nodes; ``tri_nodes`` maps triangles to
    them.  In the eigenstrain formulation displacement nodes are the mesh
    vertices, in the transmission formulation interface vertices carry an
    extra film copy.
    """

    mesh: Mesh
    u: np.ndarray
    tri_nodes: np.ndarray
    node_xy: np.ndarray
    formulation: str
    materials: Materials
    energy: float = 0.0
    residual: float = 0.0
    dofs: int = 0
    info: dict = field(default_factory=dict)

    def grad_u(self) -> np.ndarray:
        """Constant displacement gradient per triangle, shape ``(nt, 2, 2)``."""
        dphi, _ = _p1_gradients(self.mesh)
        ue = self.u[self.tri_nodes]  # (nt, 3, 2)
        return np.einsum("tai,taj->tij", ue, dphi)

    def summary(self) -> dict:
        return {"elastic": float(self.energy), "residual": float(self.residual), "dofs": int(self.dofs)}


def _p1_gradients(mesh: Mesh):
    p = mesh.vertices[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    area = 0.5 * det
    dphi = np.empty((p.shape[0], 3, 2))
    dphi[:, 0, 0] = y[:, 1] - y[:, 2]
    dphi[:, 1, 0] = y[:, 2] - y[:, 0]
    dphi[:, 2, 0] = y[:, 0] - y[:, 1]
    dphi[:, 0, 1] = x[:, 2] - x[:, 1]
    dphi[:, 1, 1] = x[:, 0] - x[:, 2]
    dphi[:, 2, 1] = x[:, 1] - x[:, 0]
    dphi /= det[:, None, None]
    return dphi, area


def _b_matrices(dphi):
    nt = dphi.shape[0]
    B = np.zeros((nt, 3, 6))
    B[:, 0, 0::2] = dphi[:, :, 0]
    B[:, 1, 1::2] = dphi[:, :, 1]
    B[:, 2, 0::2] = dphi[:, :, 1]
    B[:, 2, 1::2] = dphi[:, :, 0]
    return B


def _d_per_triangle(mesh: Mesh, mat: Materials):
    Df = mat.voigt(True)
    Ds = mat.voigt(False)
    return np.where(mesh.region[:, None, None] == 1, Df[None], Ds[None])


def _node_layout(mesh: Mesh, split_interface: bool):
    """Displacement nodes and triangle connectivity, splitting the interface if asked."""
    tri_nodes = mesh.triangles.copy()
    node_xy = mesh.vertices
    film_copy = {}
    if split_interface:
        iface = mesh.interface_vertices()
        extra = np.arange(mesh.n_vertices, mesh.n_vertices + iface.size)
        film_copy = dict(zip(iface.tolist(), extra.tolist()))
        lookup = np.arange(mesh.n_vertices)
        is_film = mesh.region == 1
        lut = lookup.copy()
        lut[iface] = extra
        ft = tri_nodes[is_film]
        tri_nodes[is_film] = np.where(mesh.vertices[ft][..., 1] == 0.0, lut[ft], ft)
        node_xy = np.vstack([mesh.vertices, mesh.vertices[iface]])
    return tri_nodes, node_xy, film_copy


def _resolve_constraints(n_nodes, fixed, links):
    """Map every dof to ``u = P w + g``.

    ``fixed`` maps dof -> value, ``links`` maps slave dof -> (master dof, offset).
    """
    ndof = 2 * n_nodes
    master = np.arange(ndof)
    offset = np.zeros(ndof)
    for s, (m, c) in links.items():
        master[s] = m
        offset[s] = c
    is_fixed = np.zeros(ndof, dtype=bool)
    fixed_val = np.zeros(ndof)
    for d, v in fixed.items():
        is_fixed[d] = True
        fixed_val[d] = v
        master[d] = d
        offset[d] = 0.0
    # follow link chains to their roots
    root = master.copy()
    acc = offset.copy()
    for _ in range(64):
        nxt = master[root]
        if np.array_equal(nxt, root):
            break
        acc = acc + offset[root]
        root = nxt
    else:
        raise SingularSystem("cyclic constraint chain")
    g = acc + np.where(is_fixed[root], fixed_val[root], 0.0)
    free_roots = np.unique(root[~is_fixed[root]])
    col = -np.ones(ndof, dtype=int)
    col[free_roots] = np.arange(free_roots.size)
    rows = np.nonzero(~is_fixed[root])[0]
    P = sp.csr_matrix((np.ones(rows.size), (rows, col[root[rows]])), shape=(ndof, free_roots.size))
    return P, g


def _assemble(mesh, mat, tri_nodes, n_nodes, eigenstrain, body_force=None):
    dphi, area = _p1_gradients(mesh)
    B = _b_matrices(dphi)
    D = _d_per_triangle(mesh, mat)
    Ke = area[:, None, None] * (np.swapaxes(B, 1, 2) @ D @ B)
    edofs = np.empty((mesh.n_triangles, 6), dtype=int)
    edofs[:, 0::2] = 2 * tri_nodes
    edofs[:, 1::2] = 2 * tri_nodes + 1
    rows = np.repeat(edofs, 6, axis=1).ravel()
    cols = np.tile(edofs, (1, 6)).ravel()
    ndof = 2 * n_nodes
    K = sp.csr_matrix((Ke.ravel(), (rows, cols)), shape=(ndof, ndof))
    f = np.zeros(ndof)
    const = 0.0
    if eigenstrain and mat.e0 != 0.0:
        eps0 = np.where(mesh.region[:, None] == 1, np.array([mat.e0, 0.0, 0.0])[None], 0.0)
        sig0 = np.einsum("tij,tj->ti", D, eps0)
        fe = np.einsum("t,tki,tk->ti", area, B, sig0)
        np.add.at(f, edofs.ravel(), fe.ravel())
        const = 0.5 * float(np.sum(area * np.einsum("ti,ti->t", eps0, sig0)))
    if body_force is not None:
        # edge-midpoint rule, exact for quadratics
        pts = mesh.vertices[mesh.triangles]
        mids = 0.5 * (pts + np.roll(pts, -1, axis=1))
        for k in range(3):
            fb = np.asarray(body_force(mids[:, k, 0], mids[:, k, 1]), dtype=float).reshape(2, -1).T
            # P1 basis at the midpoint of edge (k, k+1) is 1/2 on both ends
            for a in (k, (k + 1) % 3):
                w = area / 3.0 * 0.5
                np.add.at(f, 2 * tri_nodes[:, a], w * fb[:, 0])
                np.add.at(f, 2 * tri_nodes[:, a] + 1, w * fb[:, 1])
    return K, f, const, B, D, area


def _add_traction(f, mesh, tri_nodes, edges, traction):
    """Consistent nodal loads of a boundary traction, two-point Gauss per edge."""
    if traction is None or edges.size == 0:
        return
    # map mesh vertices to displacement nodes through any triangle using them
    vmap = np.empty(mesh.n_vertices, dtype=int)
    vmap[mesh.triangles.ravel()] = tri_nodes.ravel()
    p0 = mesh.vertices[edges[:, 0]]
    p1 = mesh.vertices[edges[:, 1]]
    t = p1 - p0
    length = np.linalg.norm(t, axis=1)
    keep = length > 0
    p0, p1, t, length, e = p0[keep], p1[keep], t[keep], length[keep], edges[keep]
    normal = np.column_stack([t[:, 1], -t[:, 0]]) / length[:, None]
    # make normals point away from the adjacent triangle centroid
    mid = 0.5 * (p0 + p1)
    cen = _edge_owner_centroids(mesh, e)
    flip = np.einsum("ij,ij->i", normal, mid - cen) < 0
    normal[flip] *= -1
    for s in (0.5 - 0.5 / np.sqrt(3), 0.5 + 0.5 / np.sqrt(3)):
        q = p0 + s * t
        tr = np.asarray(traction(q[:, 0], q[:, 1], normal[:, 0], normal[:, 1]), dtype=float).reshape(2, -1).T
        for node, phi in ((vmap[e[:, 0]], 1 - s), (vmap[e[:, 1]], s)):
            w = 0.5 * length * phi
            np.add.at(f, 2 * node, w * tr[:, 0])
            np.add.at(f, 2 * node + 1, w * tr[:, 1])


def _edge_owner_centroids(mesh, edges):
    key = {}
    tri = mesh.triangles
    for t in range(tri.shape[0]):
        for k in range(3):
            a, b = tri[t, k], tri[t, (k + 1) % 3]
            key[(min(a, b), max(a, b))] = t
    owners = np.array([key[(min(a, b), max(a, b))] for a, b in edges])
    return mesh.centroids()[owners]


def _solve(Kr, rhs, tol_direct=1e-10, tol_iter=1e-9, maxiter=20000):
    if Kr.shape[0] == 0:
        return np.zeros(0), 0.0
    nrm = np.linalg.norm(rhs)
    try:
        w = spla.spsolve(Kr.tocsc(), rhs, permc_spec="MMD_AT_PLUS_A")
        res = np.linalg.norm(Kr @ w - rhs) / nrm if nrm > 0 else float(np.linalg.norm(Kr @ w))
        if np.all(np.isfinite(w)) and res <= tol_direct:
            return w, float(res)
        log.warning("direct solve residual %.3g, falling back to CG", res)
    except (RuntimeError, MemoryError) as exc:  # pragma: no cover - depends on SuperLU
        log.warning("direct solve failed (%s), falling back to CG", exc)
    if nrm == 0:
        return np.zeros_like(rhs), 0.0
    M = sp.diags(1.0 / Kr.diagonal())
    w, info = spla.cg(Kr, rhs, rtol=tol_iter, maxiter=maxiter, M=M)
    if info != 0:
        raise NonConvergence(f"CG did not converge (info={info})")
    return w, float(np.linalg.norm(Kr @ w - rhs) / nrm)


def _build_constraints(mesh, mat, mode, node_xy, film_copy, jump):
    fixed = {}
    links = {}
    if not mode.clamp_bottom and mode.lateral != "clamped":
        raise SingularSystem("no Dirichlet part: rigid motions are not controlled")
    if mode.clamp_bottom:
        bots = np.unique(mesh.boundary["bottom"])
        for v in bots:
            fixed[2 * v] = mode.bottom_displacement[0]
            fixed[2 * v + 1] = mode.bottom_displacement[1]
    lateral_nodes = np.unique(np.concatenate([mesh.boundary["left"].ravel(), mesh.boundary["right"].ravel()]))
    if mode.lateral == "clamped":
        for v in lateral_nodes:
            fixed[2 * v] = 0.0
            fixed[2 * v + 1] = 0.0
            if v in film_copy:
                c = film_copy[v]
                fixed[2 * c] = jump * node_xy[v, 0]
                fixed[2 * c + 1] = 0.0
    if jump != 0.0 or film_copy:
        for v, c in film_copy.items():
            if 2 * c in fixed:
                continue
            links[2 * c] = (2 * v, jump * node_xy[v, 0])
            links[2 * c + 1] = (2 * v + 1, 0.0)
    if mode.lateral == "periodic":
        width = mesh.vertices[mesh.periodic_pairs[0, 1], 0] - mesh.vertices[mesh.periodic_pairs[0, 0], 0]
        for vl, vr in mesh.periodic_pairs:
            # film above the interface carries u+ = -u + (e0 x, 0): quasi-periodic
            shift = jump * width if mesh.vertices[vr, 1] > 0 else 0.0
            if 2 * vr not in fixed:
                links[2 * vr] = (2 * vl, shift)
            if 2 * vr + 1 not in fixed:
                links[2 * vr + 1] = (2 * vl + 1, 0.0)
    return fixed, links


def _natural_edges(mesh, mode):
    edges = [mesh.boundary["top"]]
    if mode.lateral == "free":
        edges += [mesh.boundary["left"], mesh.boundary["right"]]
    if not mode.clamp_bottom:
        edges.append(mesh.boundary["bottom"])
    return np.vstack(edges)


def _solve_generic(mesh, mat, mode, formulation, body_force=None, traction=None):
    split = formulation == "transmission-dirichlet"
    if mode.lateral == "periodic" and mesh.periodic_pairs is None:
        raise ValueError("periodic lateral mode needs a periodic mesh")
    tri_nodes, node_xy, film_copy = _node_layout(mesh, split)
    n_nodes = node_xy.shape[0]
    K, f, const, B, D, area = _assemble(mesh, mat, tri_nodes, n_nodes, eigenstrain=not split, body_force=body_force)
    _add_traction(f, mesh, tri_nodes, _natural_edges(mesh, mode), traction)
    fixed, links = _build_constraints(mesh, mat, mode, node_xy, film_copy, mat.e0 if split else 0.0)
    P, g = _resolve_constraints(n_nodes, fixed, links)
    Kr = (P.T @ K @ P).tocsr()
    rhs = P.T @ (f - K @ g)
    if mat.e0 == 0.0 and not np.any(g) and not np.any(f):
        w, res = np.zeros(P.shape[1]), 0.0
    else:
        w, res = _solve(Kr, rhs)
    u = (P @ w + g).reshape(-1, 2)
    state = ElasticState(
        mesh=mesh,
        u=u,
        tri_nodes=tri_nodes,
        node_xy=node_xy,
        formulation=formulation,
        materials=mat,
        residual=res,
        dofs=int(P.shape[1]),
    )
    state.energy = float(np.sum(area * strain_energy_density(state, mat)))
    if body_force is not None or traction is not None:
        uf = u.ravel()
        state.info["potential"] = float(0.5 * uf @ (K @ uf) - f @ uf + const)
    return state


def solve_equilibrium(mesh: Mesh, mat: Materials, mode: BoundaryMode | str = "periodic", *, body_force=None, traction=None) -> ElasticState:
    """Minimise the eigenstrain elastic energy over P1 displacements.

    The bottom ``y = -H`` is clamped, the free surface is traction-free
    unless ``traction(x, y, nx, ny)`` is given, and ``body_force(x, y)`` adds
    a volume load.  Continuity across ``y = 0`` is built into the space.
    """
    if isinstance(mode, str):
        mode = BoundaryMode(lateral=mode)
    return _solve_generic(mesh, mat, mode, "eigenstrain", body_force, traction)


def solve_transmission_formulation(mesh: Mesh, mat: Materials, mode: BoundaryMode | str = "periodic") -> ElasticState:
    """Same equilibrium without eigenstrain but with the jump ``u+ - u- = (e0 x, 0)`` on ``y = 0``."""
    if isinstance(mode, str):
        mode = BoundaryMode(lateral=mode)
    return _solve_generic(mesh, mat, mode, "transmission-dirichlet")


def zero_state(mesh: Mesh, mat: Materials) -> ElasticState:
    """``u = 0`` on the mesh, without solving (the exact answer when ``e0 = 0``)."""
    state = ElasticState(
        mesh=mesh,
        u=np.zeros((mesh.n_vertices, 2)),
        tri_nodes=mesh.triangles,
        node_xy=mesh.vertices,
        formulation="eigenstrain",
        materials=mat,
    )
    state.energy = float(np.sum(mesh.areas() * strain_energy_density(state, mat)))
    return state


def _strain_stress(state: ElasticState, mat: Materials):
    mesh = state.mesh
    gu = state.grad_u()
    eps = np.stack([gu[:, 0, 0], gu[:, 1, 1], gu[:, 0, 1] + gu[:, 1, 0]], axis=1)
    if state.formulation == "eigenstrain":
        eps = eps - np.where(mesh.region[:, None] == 1, np.array([mat.e0, 0.0, 0.0])[None], 0.0)
    D = _d_per_triangle(mesh, mat)
    sig = np.einsum("tij,tj->ti", D, eps)
    return gu, eps, sig


def strain_energy_density(state: ElasticState, mat: Materials | None = None) -> np.ndarray:
    """Per-triangle ``W0 = 1/2 (Eu - E0) : C (Eu - E0)``; ``E0`` is dropped in the transmission formulation."""
    mat = mat or state.materials
    _, eps, sig = _strain_stress(state, mat)
    return 0.5 * np.einsum("ti,ti->t", eps, sig)


def boundary_trace_density(state: ElasticState, mat: Materials | None = None, p: Profile | None = None) -> np.ndarray:
    """``W0`` on the triangle adjacent to each free-surface segment."""
    if p is not None and state.mesh.profile_key and p.fingerprint() != state.mesh.profile_key:
        raise MeshMismatch("state was solved on another profile")
    return strain_energy_density(state, mat)[state.mesh.surface_triangle]


def elastic_shape_derivative(state: ElasticState, mat: Materials | None = None) -> np.ndarray:
    """Exact derivative of the discrete equilibrium energy w.r.t. each nodal height.

    By the envelope property only the mesh motion contributes: moving the
    film vertices of line ``i`` (``y = h_i * frac``) changes each element
    energy by ``A (W I - grad(u)^T sigma) : grad(V)``.
    """
    mat = mat or state.materials
    mesh = state.mesh
    if mesh.lines is None:
        raise ValueError("mesh has no column structure")
    dphi, area = _p1_gradients(mesh)
    gu, eps, sig = _strain_stress(state, mat)
    W = 0.5 * np.einsum("ti,ti->t", eps, sig)
    S = np.empty((mesh.n_triangles, 2, 2))
    S[:, 0, 0], S[:, 1, 1] = sig[:, 0], sig[:, 1]
    S[:, 0, 1] = S[:, 1, 0] = sig[:, 2]
    esh = W[:, None, None] * np.eye(2)[None] - np.einsum("tij,tik->tjk", gu, S)
    # y-row of the Eshelby-type tensor applied to each basis gradient
    contrib = area[:, None] * np.einsum("tk,tak->ta", esh[:, 1, :], dphi)

    vert_line = -np.ones(mesh.n_vertices, dtype=int)
    vert_frac = np.zeros(mesh.n_vertices)
    for i, chain in enumerate(mesh.lines):
        film = chain[mesh.n_substrate_levels[i]:]
        if film.size:
            vert_line[film] = i
            vert_frac[film] = mesh.line_film_fraction[i]
    tl = vert_line[mesh.triangles]
    tf = vert_frac[mesh.triangles]
    grad = np.zeros(len(mesh.lines))
    mask = tl >= 0
    np.add.at(grad, tl[mask], (contrib * tf)[mask])
    return grad
