"""Cylinder geometry and interface-fitted broken meshes.

The domain is the rectangle Q = (0, omega_length) x (-ell, ell).  An
oscillating interface is the graph x2 = eps^k * g(x1/eps) of a positive,
periodic, piecewise-linear profile g on the unit cell (0, 1).  Meshes are
built by vertically shearing a tensor grid so the interface polyline is a
mesh line; every vertex on the interface is duplicated into a (+, -) pair
so finite-element functions may jump across it.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import (
    InterfaceEscapesDomain,
    NonPositiveProfile,
    NotPeriodic,
    ResolutionMismatch,
    ValidationError,
)


# ---------------------------------------------------------------------------
# interface profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InterfaceProfile:
    """Piecewise-linear periodic profile on the unit cell (0, 1).

    samples : breakpoints ((y0, g0), ..., (yB, gB)) with y0 = 0, yB = 1
    gbar    : max value
    gmin    : min value
    lip     : Lipschitz constant (max absolute segment slope)
    """

    samples: tuple
    gbar: float
    gmin: float
    lip: float

    @property
    def breakpoints(self) -> np.ndarray:
        return np.array([y for y, _ in self.samples])

    @property
    def values(self) -> np.ndarray:
        return np.array([g for _, g in self.samples])

    @property
    def slopes(self) -> np.ndarray:
        y = self.breakpoints
        g = self.values
        return np.diff(g) / np.diff(y)

    def evaluate(self, y) -> np.ndarray:
        """Evaluate g at points y, wrapped periodically into [0, 1)."""
        yw = np.mod(np.asarray(y, dtype=float), 1.0)
        return np.interp(yw, self.breakpoints, self.values)


def build_profile(breakpoints: Sequence) -> InterfaceProfile:
    """Validate breakpoints and compute gbar, gmin and the Lipschitz constant.

    Raises NonPositiveProfile if min value <= 0 and NotPeriodic if the
    endpoint values differ.
    """
    pts = [(float(y), float(g)) for y, g in breakpoints]
    if len(pts) < 2:
        raise ValidationError("profile needs at least 2 breakpoints")
    ys = np.array([y for y, _ in pts])
    gs = np.array([g for _, g in pts])
    if not (np.all(np.diff(ys) > 0) and ys[0] == 0.0 and ys[-1] == 1.0):
        raise ValidationError(
            "breakpoint y-values must strictly increase from 0 to 1"
        )
    if gs.min() <= 0.0:
        raise NonPositiveProfile(
            f"profile must be positive; min value {gs.min()} at y={ys[gs.argmin()]}"
        )
    if gs[0] != gs[-1]:
        raise NotPeriodic(
            f"profile must satisfy g(0) = g(1); got {gs[0]} and {gs[-1]}"
        )
    slopes = np.diff(gs) / np.diff(ys)
    lip = float(np.max(np.abs(slopes))) if len(slopes) else 0.0
    return InterfaceProfile(
        samples=tuple(pts), gbar=float(gs.max()), gmin=float(gs.min()), lip=lip
    )


#: Named profiles usable from configs and the command line.
PROFILE_REGISTRY = {
    "flat": ((0.0, 1.0), (1.0, 1.0)),
    "sawtooth": ((0.0, 0.5), (0.5, 1.5), (1.0, 0.5)),
}


def named_profile(name: str) -> InterfaceProfile:
    try:
        return build_profile(PROFILE_REGISTRY[name])
    except KeyError:
        raise ValidationError(
            f"unknown profile {name!r}; known: {sorted(PROFILE_REGISTRY)}"
        ) from None


# ---------------------------------------------------------------------------
# domain description
# ---------------------------------------------------------------------------

def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise ValidationError(
        f"scale exponents must be exact rationals (int, Fraction or 'p/q' string), got {x!r}"
    )


@dataclass(frozen=True)
class DomainSpec:
    """Cylinder Q = (0, omega_length) x (-ell, ell) with scale parameters.

    epsilon, k and gamma are exact rationals: the regime classification
    compares gamma against 0 and 1 - k exactly, and epsilon = 1/m
    guarantees the periodic profile tiles omega without remainder.
    """

    omega_length: float
    ell: float
    epsilon: Fraction
    k: Fraction
    gamma: Fraction

    def __post_init__(self):
        object.__setattr__(self, "epsilon", _as_fraction(self.epsilon))
        object.__setattr__(self, "k", _as_fraction(self.k))
        object.__setattr__(self, "gamma", _as_fraction(self.gamma))
        problems = []
        if not self.omega_length > 0:
            problems.append(f"omega_length must be > 0, got {self.omega_length}")
        if not self.ell > 0:
            problems.append(f"ell must be > 0, got {self.ell}")
        if not self.epsilon > 0:
            problems.append(f"epsilon must be > 0, got {self.epsilon}")
        elif self.epsilon.numerator != 1:
            problems.append(
                f"epsilon must be the reciprocal of an integer, got {self.epsilon}"
            )
        if not self.k > 0:
            problems.append(f"k must be > 0, got {self.k}")
        if problems:
            raise ValidationError(problems)

    @property
    def amplitude(self) -> float:
        """Interface oscillation amplitude eps^k."""
        return float(self.epsilon) ** float(self.k)


# ---------------------------------------------------------------------------
# broken meshes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BrokenMesh:
    """Triangulation of Q fitted to the interface, with duplicated nodes.

    vertices           : (nv, 2) float coordinates, ordered layer-by-layer
                         bottom to top, by x1 within a layer
    triangles          : (nt, 3) vertex indices, counterclockwise
    tri_side           : (nt,) +1 above the interface, -1 below
    interface_pairs    : (ni, 2) columns (plus_vertex, minus_vertex); both
                         members share coordinates; ordered by x1
    interface_segments : (ns, 2) indices into interface_pairs (left, right)
    segment_lengths    : (ns,) physical polyline lengths
    boundary_vertices  : sorted indices of Dirichlet vertices on the outer
                         boundary (both members of duplicated lateral
                         interface endpoints included)
    """

    omega_length: float
    ell: float
    vertices: np.ndarray
    triangles: np.ndarray
    tri_side: np.ndarray
    interface_pairs: np.ndarray
    interface_segments: np.ndarray
    segment_lengths: np.ndarray
    boundary_vertices: np.ndarray

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def has_interface(self) -> bool:
        return self.interface_pairs.shape[0] > 0

    def interface_height(self, x1) -> np.ndarray:
        """Interface polyline height at abscissae x1 (merged meshes: 0)."""
        if not self.has_interface:
            return np.zeros_like(np.asarray(x1, dtype=float))
        xs = self.vertices[self.interface_pairs[:, 0], 0]
        ys = self.vertices[self.interface_pairs[:, 0], 1]
        return np.interp(np.asarray(x1, dtype=float), xs, ys)

    def side_of(self, points) -> np.ndarray:
        """+1/-1 side of each point relative to this mesh's own interface."""
        pts = np.asarray(points, dtype=float)
        return np.where(pts[:, 1] >= self.interface_height(pts[:, 0]), 1, -1)

    @property
    def is_dirichlet(self) -> np.ndarray:
        mask = np.zeros(self.num_vertices, dtype=bool)
        mask[self.boundary_vertices] = True
        return mask


def _grid_mesh(x_cols, gamma_cols, ell, n_side, omega_length, merged=False):
    """Assemble a sheared-grid BrokenMesh from column abscissae and
    per-column interface heights."""
    ncols = len(x_cols)
    t = np.arange(n_side + 1) / n_side

    # heights: minus block bottom -> interface, plus block interface -> top
    minus_h = -ell + np.outer(t, gamma_cols + ell)          # (n_side+1, ncols)
    plus_h = gamma_cols + np.outer(t, ell - gamma_cols)     # (n_side+1, ncols)
    if merged:
        heights = np.vstack([minus_h, plus_h[1:]])
        interface_row_minus = n_side
        interface_row_plus = n_side
    else:
        heights = np.vstack([minus_h, plus_h])
        interface_row_minus = n_side
        interface_row_plus = n_side + 1
    nrows = heights.shape[0]

    xs = np.tile(x_cols, nrows)
    ys = heights.reshape(-1)
    vertices = np.column_stack([xs, ys])

    def idx(r, c):
        return r * ncols + c

    # triangles per quad row; the interface seam row is skipped for broken
    # meshes (no elements between the duplicated rows)
    tri_list = []
    side_list = []
    for r in range(nrows - 1):
        if not merged and r == interface_row_minus:
            continue
        side = -1 if r < interface_row_minus else 1
        c = np.arange(ncols - 1)
        v00 = idx(r, c)
        v10 = idx(r, c + 1)
        v11 = idx(r + 1, c + 1)
        v01 = idx(r + 1, c)
        tri_list.append(np.column_stack([v00, v10, v11]))
        tri_list.append(np.column_stack([v00, v11, v01]))
        side_list.append(np.full(ncols - 1, side, dtype=np.int8))
        side_list.append(np.full(ncols - 1, side, dtype=np.int8))
    triangles = np.vstack(tri_list).astype(np.int64)
    tri_side = np.concatenate(side_list)

    if merged:
        interface_pairs = np.zeros((0, 2), dtype=np.int64)
        interface_segments = np.zeros((0, 2), dtype=np.int64)
        segment_lengths = np.zeros(0)
    else:
        c = np.arange(ncols)
        interface_pairs = np.column_stack(
            [idx(interface_row_plus, c), idx(interface_row_minus, c)]
        ).astype(np.int64)
        interface_segments = np.column_stack(
            [np.arange(ncols - 1), np.arange(1, ncols)]
        ).astype(np.int64)
        dx = np.diff(x_cols)
        dy = np.diff(gamma_cols)
        segment_lengths = np.hypot(dx, dy)

    boundary = set(idx(0, c) for c in range(ncols))
    boundary |= set(idx(nrows - 1, c) for c in range(ncols))
    for r in range(nrows):
        boundary.add(idx(r, 0))
        boundary.add(idx(r, ncols - 1))
    boundary_vertices = np.array(sorted(boundary), dtype=np.int64)

    return BrokenMesh(
        omega_length=float(omega_length),
        ell=float(ell),
        vertices=vertices,
        triangles=triangles,
        tri_side=tri_side,
        interface_pairs=interface_pairs,
        interface_segments=interface_segments,
        segment_lengths=segment_lengths,
        boundary_vertices=boundary_vertices,
    )


def build_fitted_mesh(
    spec: DomainSpec,
    profile: InterfaceProfile,
    n_per_period: int,
    n_layers: int,
    layers_per_eps: int = 4,
) -> BrokenMesh:
    """Triangulate Q with a mesh line on the oscillating interface.

    The x1 subdivision refines each linear piece of the profile into
    equal parts, so every interface vertex lies exactly on the graph.
    The per-side vertical layer count is graded as
    max(n_layers, ceil(layers_per_eps * ell / eps)) to keep element
    aspect ratios bounded along eps-sweeps.
    """
    if n_per_period < 1 or n_layers < 1:
        raise ValidationError("n_per_period and n_layers must be positive")
    m = spec.epsilon.denominator
    n_periods = spec.omega_length * m
    if abs(n_periods - round(n_periods)) > 1e-12 or round(n_periods) < 1:
        raise ResolutionMismatch(
            f"omega_length {spec.omega_length} is not an integer number of "
            f"periods at epsilon = {spec.epsilon}"
        )
    n_periods = int(round(n_periods))

    n_segments = len(profile.samples) - 1
    if n_per_period % n_segments != 0:
        raise ResolutionMismatch(
            f"n_per_period = {n_per_period} must be a multiple of the "
            f"profile piece count {n_segments}"
        )
    sub = n_per_period // n_segments

    amp = spec.amplitude
    if amp * profile.gbar >= spec.ell:
        raise InterfaceEscapesDomain(
            f"eps^k * gbar = {amp * profile.gbar} must stay below ell = {spec.ell}"
        )

    # reference subdivision of one period: breakpoints plus equal splits
    by = profile.breakpoints
    bg = profile.values
    y_ref = []
    g_ref = []
    for i in range(n_segments):
        frac = np.arange(sub) / sub
        y_ref.append(by[i] + frac * (by[i + 1] - by[i]))
        g_ref.append(bg[i] + frac * (bg[i + 1] - bg[i]))
    y_ref = np.concatenate(y_ref)
    g_ref = np.concatenate(g_ref)

    eps = float(spec.epsilon)
    x_cols = np.concatenate(
        [eps * (j + y_ref) for j in range(n_periods)] + [[spec.omega_length]]
    )
    g_cols = np.concatenate([np.tile(g_ref, n_periods), [bg[0]]])
    gamma_cols = amp * g_cols

    n_side = max(int(n_layers), math.ceil(layers_per_eps * spec.ell / eps))
    return _grid_mesh(x_cols, gamma_cols, spec.ell, n_side, spec.omega_length)


def build_flat_mesh(
    omega_length: float,
    ell: float,
    nx: int,
    n_layers: int,
    merged: bool = False,
) -> BrokenMesh:
    """Triangulate Q with the flat interface x2 = 0.

    merged=False duplicates the interface row (limit space allowing jumps);
    merged=True produces single-valued interface nodes (the H^1_0(Q) space
    of the no-interface limit problem).
    """
    if nx < 1 or n_layers < 1:
        raise ValidationError("nx and n_layers must be positive")
    if not (omega_length > 0 and ell > 0):
        raise ValidationError("omega_length and ell must be positive")
    x_cols = np.linspace(0.0, omega_length, nx + 1)
    gamma_cols = np.zeros(nx + 1)
    return _grid_mesh(x_cols, gamma_cols, ell, n_layers, omega_length, merged=merged)


def merged_to_broken_values(
    merged: BrokenMesh, broken: BrokenMesh, values: np.ndarray
) -> np.ndarray:
    """Re-express a merged-mesh coefficient vector on the matching broken
    mesh (the interface row is duplicated; all other rows coincide)."""
    if merged.has_interface or not broken.has_interface:
        raise ValidationError("expected (merged, broken) flat meshes")
    out = np.empty(broken.num_vertices)
    # nearest merged vertex for every broken vertex: layouts coincide except
    # for the duplicated interface row, so match rows by coordinates
    ncols = np.sum(merged.vertices[:, 1] == merged.vertices[:, 1].min())
    nrows_broken = broken.num_vertices // ncols
    seam = broken.interface_pairs[0, 1] // ncols  # minus interface row
    for r in range(nrows_broken):
        rm = r if r <= seam else r - 1
        out[r * ncols:(r + 1) * ncols] = values[rm * ncols:(rm + 1) * ncols]
    return out


# ---------------------------------------------------------------------------
# validation and serialization
# ---------------------------------------------------------------------------

def signed_areas(mesh: BrokenMesh) -> np.ndarray:
    p = mesh.vertices[mesh.triangles]
    return 0.5 * (
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    )


def validate_mesh(mesh: BrokenMesh) -> None:
    """Structural sanity checks; raises ValidationError on defects."""
    problems = []
    areas = signed_areas(mesh)
    if np.any(areas <= 0):
        problems.append(f"{np.sum(areas <= 0)} non-positively-oriented triangles")
    if mesh.has_interface:
        dup = mesh.vertices[mesh.interface_pairs[:, 0]] - mesh.vertices[
            mesh.interface_pairs[:, 1]
        ]
        if np.max(np.abs(dup)) > 1e-14 * max(1.0, mesh.ell):
            problems.append("interface pair members do not coincide")
        xs = mesh.vertices[mesh.interface_pairs[:, 0], 0]
        if not np.all(np.diff(xs) > 0):
            problems.append("interface pairs not ordered by x1")
    if problems:
        raise ValidationError(problems)


def mesh_to_dict(mesh: BrokenMesh) -> dict:
    return {
        "schema": "homoglab-mesh@1",
        "omega_length": mesh.omega_length,
        "ell": mesh.ell,
        "vertices": mesh.vertices.tolist(),
        "triangles": mesh.triangles.tolist(),
        "tri_side": mesh.tri_side.tolist(),
        "interface_pairs": mesh.interface_pairs.tolist(),
        "interface_segments": mesh.interface_segments.tolist(),
        "segment_lengths": mesh.segment_lengths.tolist(),
        "boundary_vertices": mesh.boundary_vertices.tolist(),
    }


def mesh_from_dict(data: dict) -> BrokenMesh:
    if data.get("schema") != "homoglab-mesh@1":
        raise ValidationError(f"unsupported mesh schema {data.get('schema')!r}")
    mesh = BrokenMesh(
        omega_length=float(data["omega_length"]),
        ell=float(data["ell"]),
        vertices=np.array(data["vertices"], dtype=float).reshape(-1, 2),
        triangles=np.array(data["triangles"], dtype=np.int64).reshape(-1, 3),
        tri_side=np.array(data["tri_side"], dtype=np.int8),
        interface_pairs=np.array(data["interface_pairs"], dtype=np.int64).reshape(-1, 2),
        interface_segments=np.array(data["interface_segments"], dtype=np.int64).reshape(-1, 2),
        segment_lengths=np.array(data["segment_lengths"], dtype=float),
        boundary_vertices=np.array(data["boundary_vertices"], dtype=np.int64),
    )
    validate_mesh(mesh)
    return mesh


def mesh_json(mesh: BrokenMesh) -> str:
    return json.dumps(mesh_to_dict(mesh), sort_keys=True, separators=(",", ":"))


def mesh_hash(mesh: BrokenMesh) -> str:
    return hashlib.sha256(mesh_json(mesh).encode()).hexdigest()


def save_mesh(mesh: BrokenMesh, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(mesh_json(mesh))


def load_mesh(path) -> BrokenMesh:
    with open(path, encoding="utf-8") as fh:
        return mesh_from_dict(json.load(fh))
