"""P1 finite elements on broken meshes: assembly, norms, evaluation.

Functions on a BrokenMesh carry one value per vertex; duplicated interface
vertices carry independent values, so the restrictions to the upper and
lower subdomains are single-valued P1 functions that may jump across the
interface polyline.

Quadrature: 3-point degree-2 Gauss on triangles, 2-point Gauss on
interface segments (exact for all linear terms); a 6-point degree-4 rule
is available for error integrals against smooth functions.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .coefficients import CoefficientField
from .errors import NoInterface, PointOutsideDomain, SingularAfterBC, ValidationError
from .geometry import BrokenMesh, mesh_hash
from .nonlinearities import Nonlinearity

# barycentric coordinates and weights of the interior 3-point rule
TRI3_BARY = np.array(
    [[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]
)
TRI3_W = np.full(3, 1 / 3)

# 6-point degree-4 rule (for error integrals)
_a1, _w1 = 0.445948490915965, 0.223381589678011
_a2, _w2 = 0.091576213509771, 0.109951743655322
TRI6_BARY = np.array(
    [
        [1 - 2 * _a1, _a1, _a1], [_a1, 1 - 2 * _a1, _a1], [_a1, _a1, 1 - 2 * _a1],
        [1 - 2 * _a2, _a2, _a2], [_a2, 1 - 2 * _a2, _a2], [_a2, _a2, 1 - 2 * _a2],
    ]
)
TRI6_W = np.array([_w1, _w1, _w1, _w2, _w2, _w2])

# 2-point Gauss on the unit segment
SEG2_T = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
SEG2_W = np.full(2, 0.5)


# ---------------------------------------------------------------------------
# element geometry
# ---------------------------------------------------------------------------

def tri_geometry(mesh: BrokenMesh):
    """Areas (nt,) and constant P1 gradients (nt, 3, 2) per triangle."""
    p = mesh.vertices[mesh.triangles]          # (nt, 3, 2)
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    area = 0.5 * det
    grads = np.empty(p.shape)
    # gradients of barycentric coordinates
    grads[:, 1, 0] = e2[:, 1] / det
    grads[:, 1, 1] = -e2[:, 0] / det
    grads[:, 2, 0] = -e1[:, 1] / det
    grads[:, 2, 1] = e1[:, 0] / det
    grads[:, 0] = -grads[:, 1] - grads[:, 2]
    return area, grads


def quad_points(mesh: BrokenMesh, bary=TRI3_BARY):
    """Physical quadrature points, shape (nq, nt, 2)."""
    p = mesh.vertices[mesh.triangles]
    return np.einsum("qi,tid->qtd", bary, p)


def _scatter(mesh, local):
    """Accumulate (nt, 3, 3) element matrices into a CSR matrix."""
    nv = mesh.num_vertices
    tris = mesh.triangles
    rows = np.repeat(tris, 3, axis=1).reshape(-1)
    cols = np.tile(tris, (1, 3)).reshape(-1)
    mat = sp.coo_matrix((local.reshape(-1), (rows, cols)), shape=(nv, nv))
    return mat.tocsr()


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def assemble_stiffness(mesh: BrokenMesh, D: CoefficientField, eps: float = 1.0):
    """Stiffness matrix of the broken bilinear form with coefficient D(x/eps)."""
    area, grads = tri_geometry(mesh)
    pts = quad_points(mesh)
    Dq = np.stack([D.at_points(pts[q], eps) for q in range(pts.shape[0])])
    Dbar = np.einsum("q,qtab->tab", TRI3_W, Dq)
    local = np.einsum("t,tia,tab,tjb->tij", area, grads, Dbar, grads)
    return _scatter(mesh, local)


def assemble_mass(mesh: BrokenMesh):
    """Exact P1 mass matrix."""
    area, _ = tri_geometry(mesh)
    base = (np.ones((3, 3)) + np.eye(3)) / 12.0
    local = area[:, None, None] * base
    return _scatter(mesh, local)


def assemble_load(mesh: BrokenMesh, f):
    """Load vector of a scalar field f(x) by the 3-point rule."""
    area, _ = tri_geometry(mesh)
    pts = quad_points(mesh)
    fq = np.stack([np.asarray(f(pts[q]), dtype=float) for q in range(3)])
    vec = np.zeros(mesh.num_vertices)
    contrib = np.einsum("q,qt,qi->ti", TRI3_W, fq, TRI3_BARY) * area[:, None]
    np.add.at(vec, mesh.triangles, contrib)
    return vec


def assemble_volume_nonlinearity(mesh: BrokenMesh, h: Nonlinearity, u: np.ndarray):
    """Residual vector int h(u) phi_i and Newton matrix int h'(u) phi_i phi_j."""
    area, _ = tri_geometry(mesh)
    ue = np.asarray(u)[mesh.triangles]                  # (nt, 3)
    uq = TRI3_BARY @ ue.T                               # (nq, nt)
    hq = h.value(uq)
    dq = h.derivative(uq)
    vec = np.zeros(mesh.num_vertices)
    contrib = np.einsum("q,qt,qi->ti", TRI3_W, hq, TRI3_BARY) * area[:, None]
    np.add.at(vec, mesh.triangles, contrib)
    local = np.einsum("q,qt,qi,qj->tij", TRI3_W, dq, TRI3_BARY, TRI3_BARY)
    local *= area[:, None, None]
    return vec, _scatter(mesh, local)


def _segment_dofs(mesh: BrokenMesh):
    if not mesh.has_interface:
        raise NoInterface("mesh has no duplicated interface nodes")
    pairs = mesh.interface_pairs[mesh.interface_segments]   # (ns, 2, 2)
    plus_l, minus_l = pairs[:, 0, 0], pairs[:, 0, 1]
    plus_r, minus_r = pairs[:, 1, 0], pairs[:, 1, 1]
    return plus_l, minus_l, plus_r, minus_r


def interface_jumps(mesh: BrokenMesh, u: np.ndarray) -> np.ndarray:
    """Jump u(+) - u(-) at each interface pair, ordered by x1."""
    if not mesh.has_interface:
        raise NoInterface("mesh has no duplicated interface nodes")
    return np.asarray(u)[mesh.interface_pairs[:, 0]] - np.asarray(u)[mesh.interface_pairs[:, 1]]


def assemble_interface_nonlinearity(
    mesh: BrokenMesh, h: Nonlinearity, u: np.ndarray, weight: float
):
    """Interface residual weight * int h([u]) [phi] dsigma and its Newton matrix.

    The physical polyline arclength measure is used per segment, which for
    the fitted mesh coincides exactly with the x1-parametrized measure
    carrying the sqrt(1 + eps^(2(k-1)) |g'|^2) Jacobian.
    """
    plus_l, minus_l, plus_r, minus_r = _segment_dofs(mesh)
    lens = mesh.segment_lengths
    u = np.asarray(u)
    jl = u[plus_l] - u[minus_l]
    jr = u[plus_r] - u[minus_r]

    vec = np.zeros(mesh.num_vertices)
    dofs = np.column_stack([plus_l, minus_l, plus_r, minus_r])   # (ns, 4)
    # signed P1 shape functions of the jump along the segment
    nmat = np.array(
        [[1 - t, -(1 - t), t, -t] for t in SEG2_T]
    )                                                            # (nq, 4)
    jq = np.outer(1 - SEG2_T, jl) + np.outer(SEG2_T, jr)         # (nq, ns)
    hq = h.value(jq)
    contrib = weight * np.einsum("q,qs,qi->si", SEG2_W, hq, nmat) * lens[:, None]
    np.add.at(vec, dofs, contrib)

    dq = h.derivative(jq)
    local = weight * np.einsum("q,qs,qi,qj->sij", SEG2_W, dq, nmat, nmat)
    local *= lens[:, None, None]
    rows = np.repeat(dofs, 4, axis=1).reshape(-1)
    cols = np.tile(dofs, (1, 4)).reshape(-1)
    nv = mesh.num_vertices
    mat = sp.coo_matrix((local.reshape(-1), (rows, cols)), shape=(nv, nv)).tocsr()
    return vec, mat


# ---------------------------------------------------------------------------
# potentials (for the energy line search)
# ---------------------------------------------------------------------------

def volume_potential(mesh: BrokenMesh, h: Nonlinearity, u: np.ndarray) -> float:
    """int_Q H(u) with H the antiderivative of h, same rule as the residual."""
    area, _ = tri_geometry(mesh)
    uq = TRI3_BARY @ np.asarray(u)[mesh.triangles].T
    return float(np.einsum("q,qt,t->", TRI3_W, h.antiderivative(uq), area))


def interface_potential(mesh: BrokenMesh, h: Nonlinearity, u: np.ndarray) -> float:
    """int_Gamma H([u]) with H the antiderivative of h."""
    plus_l, minus_l, plus_r, minus_r = _segment_dofs(mesh)
    u = np.asarray(u)
    jl = u[plus_l] - u[minus_l]
    jr = u[plus_r] - u[minus_r]
    jq = np.outer(1 - SEG2_T, jl) + np.outer(SEG2_T, jr)
    return float(np.einsum("q,qs,s->", SEG2_W, h.antiderivative(jq), mesh.segment_lengths))


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def norms(u: "BrokenFemFunction") -> dict:
    """L2, broken H1-seminorm and interface-jump L2 norm of a P1 function.

    All three are quadrature-exact for P1 inputs (mass and stiffness
    quadratic forms; per-segment Simpson for the jump).
    """
    mesh = u.mesh
    vals = u.values
    area, grads = tri_geometry(mesh)
    ue = vals[mesh.triangles]
    # element mass form: area/12 * ((sum e)^2 + sum e^2)
    l2sq = float(np.sum(area / 12.0 * (ue.sum(axis=1) ** 2 + (ue**2).sum(axis=1))))
    g = np.einsum("tid,ti->td", grads, ue)
    h1sq = float(np.sum(area * (g**2).sum(axis=1)))
    if mesh.has_interface:
        j = interface_jumps(mesh, vals)
        seg = mesh.interface_segments
        jl, jr = j[seg[:, 0]], j[seg[:, 1]]
        jumpsq = float(np.sum(mesh.segment_lengths * (jl**2 + jl * jr + jr**2) / 3.0))
    else:
        jumpsq = 0.0
    return {
        "l2": np.sqrt(l2sq),
        "broken_h1": np.sqrt(h1sq),
        "jump_l2": np.sqrt(jumpsq),
    }


def l2_error_vs_exact(u: "BrokenFemFunction", exact, side_aware: bool = False) -> float:
    """L2 distance between a P1 function and a callable, by the 6-point rule.

    With side_aware=True the callable receives (points, sides) so
    discontinuous reference solutions can resolve the interface side from
    the triangle tag.
    """
    mesh = u.mesh
    area, _ = tri_geometry(mesh)
    pts = quad_points(mesh, TRI6_BARY)                 # (6, nt, 2)
    uq = TRI6_BARY @ u.values[mesh.triangles].T        # (6, nt)
    acc = 0.0
    for q in range(6):
        if side_aware:
            ex = np.asarray(exact(pts[q], mesh.tri_side), dtype=float)
        else:
            ex = np.asarray(exact(pts[q]), dtype=float)
        acc += TRI6_W[q] * np.sum(area * (uq[q] - ex) ** 2)
    return float(np.sqrt(acc))


# ---------------------------------------------------------------------------
# broken FEM functions and point evaluation
# ---------------------------------------------------------------------------

@dataclass
class BrokenFemFunction:
    """P1 coefficient vector on a broken mesh."""

    mesh: BrokenMesh
    values: np.ndarray
    _interps: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.num_vertices,):
            raise ValidationError(
                f"expected {self.mesh.num_vertices} dof values, got {self.values.shape}"
            )

    def _interp(self, side: int):
        if side not in self._interps:
            import matplotlib.tri as mtri

            mesh = self.mesh
            if mesh.has_interface:
                tris = mesh.triangles[mesh.tri_side == side]
            else:
                tris = mesh.triangles
            tri = mtri.Triangulation(mesh.vertices[:, 0], mesh.vertices[:, 1], tris)
            self._interps[side] = mtri.LinearTriInterpolator(tri, self.values)
        return self._interps[side]

    def evaluate(self, points, side=None) -> np.ndarray:
        """P1 interpolation at points.

        side: None resolves each point against the mesh's own interface;
        a scalar or per-point array of +1/-1 forces the one-sided trace
        (required for points lying on the interface).
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if not self.mesh.has_interface:
            sides = np.ones(len(pts), dtype=int)
        elif side is None:
            sides = self.mesh.side_of(pts)
        else:
            sides = np.broadcast_to(np.asarray(side, dtype=int), (len(pts),))
        out = np.full(len(pts), np.nan)
        delta = 1e-11 * max(self.mesh.ell, self.mesh.omega_length)
        for s in (1, -1):
            sel = np.nonzero(sides == s)[0]
            if len(sel) == 0:
                continue
            interp = self._interp(s)
            vals = interp(pts[sel, 0], pts[sel, 1])
            bad = np.ma.getmaskarray(vals)
            vals = np.ma.filled(vals, np.nan)
            # points on the seam or outer boundary can fall between
            # triangulations by rounding; retry with tiny nudges
            for dx, dy in ((0.0, delta), (0.0, -delta), (delta, 0.0), (-delta, 0.0)):
                if not bad.any():
                    break
                retry = interp(pts[sel[bad], 0] + dx, pts[sel[bad], 1] + dy)
                rmask = np.ma.getmaskarray(retry)
                vals[bad] = np.where(rmask, vals[bad], np.ma.filled(retry, np.nan))
                bad = np.isnan(vals)
            if bad.any():
                i = sel[np.nonzero(bad)[0][0]]
                raise PointOutsideDomain(
                    f"point {tuple(pts[i])} lies outside the side-{s:+d} subdomain"
                )
            out[sel] = vals
        return out


def to_dict(u: BrokenFemFunction) -> dict:
    return {
        "schema": "homoglab-function@1",
        "mesh_hash": mesh_hash(u.mesh),
        "values": u.values.tolist(),
    }


def from_dict(data: dict, mesh: BrokenMesh) -> BrokenFemFunction:
    if data.get("schema") != "homoglab-function@1":
        raise ValidationError(f"unsupported function schema {data.get('schema')!r}")
    if data.get("mesh_hash") != mesh_hash(mesh):
        raise ValidationError("function was saved on a different mesh")
    return BrokenFemFunction(mesh, np.array(data["values"], dtype=float))


def save_function(u: BrokenFemFunction, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_dict(u), fh, sort_keys=True, separators=(",", ":"))


def load_function(path, mesh: BrokenMesh) -> BrokenFemFunction:
    with open(path, encoding="utf-8") as fh:
        return from_dict(json.load(fh), mesh)


# ---------------------------------------------------------------------------
# boundary conditions and matrix export
# ---------------------------------------------------------------------------

def reduce_system(mat, rhs, free_mask):
    """Restrict a symmetric system to non-Dirichlet dofs.

    Raises SingularAfterBC when elimination leaves an empty row.
    """
    red = mat[free_mask][:, free_mask].tocsr()
    diag = red.diagonal()
    if np.any(diag == 0.0):
        raise SingularAfterBC(
            f"{np.sum(diag == 0)} zero diagonal entries after Dirichlet elimination"
        )
    return red, rhs[free_mask]


def dump_coo(mat, path) -> None:
    """Write a sparse matrix as 'row col value' text, row-major order."""
    coo = sp.coo_matrix(mat)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"% {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for i in order:
            fh.write(f"{coo.row[i]} {coo.col[i]} {coo.data[i]:.17g}\n")


def function_hash(u: BrokenFemFunction) -> str:
    payload = json.dumps(to_dict(u), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()
