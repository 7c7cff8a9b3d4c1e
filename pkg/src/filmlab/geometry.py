"""Film profiles, zero sets, contact angles and interface-fitted meshes.

A profile is a continuous piecewise-linear height function ``h >= 0`` on
``[a, b]``.  The region it bounds, the subgraph truncated at ``y = -H``, is
split by the film/substrate interface ``y = 0``.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MeshQualityError, NegativeHeight, NonPositiveInterval

__all__ = [
    "Profile",
    "ZeroSet",
    "ContactAngle",
    "Mesh",
    "make_profile",
    "profile_from_nodes",
    "default_h_tol",
    "zero_set",
    "contact_angles",
    "one_sided_slope",
    "mesh_subgraph",
    "internal_ball_radius",
]


@dataclass(frozen=True, eq=False)
class Profile:
    """Piecewise-linear film height on strictly increasing nodes."""

    x: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        h = np.array(self.h, dtype=float)
        if x.ndim != 1 or x.shape != h.shape or x.size < 2:
            raise ValueError("profile needs matching 1-D node arrays with at least 2 nodes")
        if not np.all(np.diff(x) > 0):
            raise ValueError("profile nodes must be strictly increasing")
        if np.any(h < 0) or not np.all(np.isfinite(h)):
            raise NegativeHeight("profile heights must be finite and >= 0")
        x.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "h", h)

    @property
    def a(self) -> float:
        return float(self.x[0])

    @property
    def b(self) -> float:
        return float(self.x[-1])

    @property
    def n_nodes(self) -> int:
        return self.x.size

    @property
    def dx(self) -> np.ndarray:
        return np.diff(self.x)

    def node_weights(self) -> np.ndarray:
        """Trapezoid weights ``w_i = dA/dh_i``."""
        dx = self.dx
        w = np.zeros_like(self.x)
        w[:-1] += 0.5 * dx
        w[1:] += 0.5 * dx
        return w

    def film_area(self) -> float:
        return float(np.sum(0.5 * (self.h[1:] + self.h[:-1]) * self.dx))

    def segment_lengths(self) -> np.ndarray:
        return np.hypot(self.dx, np.diff(self.h))

    def __call__(self, xq):
        return np.interp(xq, self.x, self.h)

    def with_heights(self, h) -> "Profile":
        return Profile(self.x, h)

    def mirrored(self) -> "Profile":
        return Profile(self.a + self.b - self.x[::-1], self.h[::-1])

    def refined(self, factor: int = 2) -> "Profile":
        """Insert ``factor - 1`` interpolated nodes in every interval."""
        t = np.arange(factor) / factor
        xs = (self.x[:-1, None] + t[None, :] * self.dx[:, None]).ravel()
        xs = np.append(xs, self.b)
        return Profile(xs, np.interp(xs, self.x, self.h))

    def refined_near(self, x0: float, depth: int = 8, ratio: float = 0.5) -> "Profile":
        """Insert nodes at ``x0 +- d ratio^k``, ``k = 1..depth``, with ``d`` the local spacing.

        The piecewise-linear graph is unchanged; only its sampling gets
        geometrically finer towards ``x0`` (for corner studies).
        """
        if not 0 < ratio < 1:
            raise ValueError("ratio must lie in (0, 1)")
        d = float(self.dx[min(max(np.searchsorted(self.x, x0) - 1, 0), self.dx.size - 1)])
        off = d * ratio ** np.arange(1, depth + 1)
        extra = np.concatenate([x0 - off, x0 + off])
        extra = extra[(extra > self.a) & (extra < self.b)]
        xs = np.union1d(self.x, extra)
        return Profile(xs, np.interp(xs, self.x, self.h))

    def fingerprint(self) -> str:
        m = hashlib.sha1()
        m.update(self.x.tobytes())
        m.update(self.h.tobytes())
        return m.hexdigest()

    def __repr__(self):
        return f"Profile(n={self.n_nodes}, a={self.a:g}, b={self.b:g}, max h={self.h.max():g})"


def make_profile(a: float, b: float, samples) -> Profile:
    """Uniformly spaced profile on ``[a, b]`` with the given nodal heights.

    Examples
    --------
    >>> p = make_profile(0.0, 2.0, [0, 1, 0])
    >>> p.x.tolist(), p.h.tolist()
    ([0.0, 1.0, 2.0], [0.0, 1.0, 0.0])
    """
    if not b > a:
        raise NonPositiveInterval(f"need b > a, got a={a}, b={b}")
    h = np.asarray(samples, dtype=float)
    if h.ndim != 1 or h.size < 2:
        raise ValueError("need at least two samples")
    if np.any(h < 0):
        raise NegativeHeight(f"negative sample at index {int(np.argmax(h < 0))}")
    return Profile(np.linspace(a, b, h.size), h)


def profile_from_nodes(x, h) -> Profile:
    return Profile(x, h)


def default_h_tol(p: Profile) -> float:
    return 1e-6 * max(1.0, float(p.h.max()))


@dataclass(frozen=True)
class ZeroSet:
    """Zero intervals (including degenerate ones at the domain ends) and valleys.

    ``runs`` keeps the node index range of every maximal zero run, which is
    what the angle and flow code actually iterates over.
    """

    intervals: tuple
    valleys: tuple
    runs: tuple = field(default=(), repr=False)

    def __len__(self):
        return len(self.intervals) + len(self.valleys)

    @property
    def is_empty(self) -> bool:
        return not self.intervals and not self.valleys


def _zero_runs(mask: np.ndarray):
    runs = []
    n = mask.size
    i = 0
    while i < n:
        if mask[i]:
            j = i
            while j + 1 < n and mask[j + 1]:
                j += 1
            runs.append((i, j))
            i = j + 1
        else:
            i += 1
    return runs


def zero_set(p: Profile, h_tol: float | None = None) -> ZeroSet:
    """Classify the zero nodes of ``p`` into intervals and valleys.

    A node is zero iff ``h_i <= h_tol``.  Runs of two or more zero nodes are
    intervals, interior singletons are valleys, and singletons at ``a`` or
    ``b`` are degenerate intervals.
    """
    if h_tol is None:
        h_tol = default_h_tol(p)
    if h_tol < 0:
        raise ValueError("h_tol must be >= 0")
    runs = _zero_runs(p.h <= h_tol)
    last = p.n_nodes - 1
    intervals, valleys = [], []
    for s, e in runs:
        if s == e and 0 < s < last:
            valleys.append(float(p.x[s]))
        else:
            intervals.append((float(p.x[s]), float(p.x[e])))
    return ZeroSet(tuple(intervals), tuple(valleys), tuple(runs))


@dataclass(frozen=True)
class ContactAngle:
    x0: float
    side: str  # film lies on this side of x0: "left" or "right"
    theta: float
    kind: str  # "border" or "valley"
    index: int = -1


def one_sided_slope(p: Profile, i: int, side: str, stencil: int = 2) -> float:
    """Derivative of ``h`` at node ``i`` seen from ``side``.

    ``stencil=3`` differentiates the quadratic through three nodes, which is
    second-order accurate for a smooth one-sided branch.
    """
    step = -1 if side == "left" else 1
    j1 = i + step
    if not 0 <= j1 < p.n_nodes:
        raise IndexError("no neighbour on that side")
    x0, h0 = p.x[i], p.h[i]
    x1, h1 = p.x[j1], p.h[j1]
    j2 = i + 2 * step
    if stencil == 3 and 0 <= j2 < p.n_nodes:
        x2, h2 = p.x[j2], p.h[j2]
        d1 = x1 - x0
        d2 = x2 - x0
        return float((h1 - h0) * d2 / (d1 * (d2 - d1)) - (h2 - h0) * d1 / (d2 * (d2 - d1)))
    return float((h1 - h0) / (x1 - x0))


def contact_angles(p: Profile, z: ZeroSet, stencil: int = 2) -> list[ContactAngle]:
    """Film-side contact angles at every zero run adjacent to film.

    At the left end of a zero run the film lies to the left, at the right
    end to the right.  Angles are ``arctan|slope|`` clamped to ``[0, pi/2]``.
    """
    out = []
    last = p.n_nodes - 1
    for s, e in z.runs:
        kind = "valley" if (s == e and 0 < s < last) else "border"
        if s > 0:
            sl = one_sided_slope(p, s, "left", _usable_stencil(p, s, -1, stencil, z))
            out.append(ContactAngle(float(p.x[s]), "left", _angle(sl), kind, s))
        if e < last:
            sl = one_sided_slope(p, e, "right", _usable_stencil(p, e, 1, stencil, z))
            out.append(ContactAngle(float(p.x[e]), "right", _angle(sl), kind, e))
    return out


def _usable_stencil(p, i, step, stencil, z):
    if stencil < 3:
        return 2
    j2 = i + 2 * step
    if not 0 <= j2 < p.n_nodes:
        return 2
    # the far node must still belong to the same film branch
    for s, e in z.runs:
        if s <= j2 <= e:
            return 2
    return 3


def _angle(slope: float) -> float:
    return float(min(max(math.atan(abs(slope)), 0.0), 0.5 * math.pi))


@dataclass(eq=False)
class Mesh:
    """Triangulation of the truncated subgraph.

    ``region`` is 1 for film triangles and 0 for substrate triangles.
    ``boundary`` maps ``"top"``, ``"bottom"``, ``"left"``, ``"right"`` to edge
    arrays.  ``surface_triangle[j]`` is the triangle whose edge is the
    ``j``-th profile segment.  ``lines[i]`` lists the vertex chain on the
    vertical line through profile node ``i`` from bottom to top and
    ``line_film_fraction[i]`` gives ``y / h_i`` for its film vertices.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    region: np.ndarray
    boundary: dict
    H: float
    periodic: bool
    profile_key: str = ""
    surface_triangle: np.ndarray | None = None
    lines: list | None = None
    n_substrate_levels: np.ndarray | None = None  # per line
    periodic_pairs: np.ndarray | None = None

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def min_angle(self) -> float:
        p = self.vertices[self.triangles]
        angs = []
        for k in range(3):
            u = p[:, (k + 1) % 3] - p[:, k]
            v = p[:, (k + 2) % 3] - p[:, k]
            c = np.einsum("ij,ij->i", u, v) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            angs.append(np.arccos(np.clip(c, -1.0, 1.0)))
        return float(np.min(angs)) if angs else math.pi

    def interface_vertices(self) -> np.ndarray:
        """Vertices on ``y = 0`` touched by at least one film triangle."""
        tri = self.triangles[self.region == 1]
        v = np.unique(tri.ravel())
        return v[self.vertices[v, 1] == 0.0]


def _grow_levels(s0: float, grade: float, smax: float, H: float) -> np.ndarray:
    """Depths ``0 < d_1 < ... < d_m = H`` with geometrically growing spacing."""
    spacings = []
    s, total = s0, 0.0
    while total < H * (1 - 1e-12):
        spacings.append(s)
        total += s
        s = min(s * grade, smax)
    spacings = np.array(spacings) * (H / total)
    return np.cumsum(spacings)


def mesh_subgraph(
    p: Profile,
    H: float | None = None,
    target: float | None = None,
    *,
    periodic: bool = True,
    grade: float = 1.25,
    max_aspect: float = 16.0,
    min_angle_deg: float = 0.01,
) -> Mesh:
    """Column-based triangulation of ``{a < x < b, -H < y < h(x)}``.

    Every profile interval spawns a vertical column.  On the line through
    node ``i`` let ``t_i`` be the smaller of ``target`` and the adjacent node
    spacing.  The substrate part of the line has depth levels graded from
    ``t_i`` at the interface by ``grade`` up to ``max_aspect * target``; the
    film part has ``ceil(h_i / t_i)`` layers.
    Neighbouring chains are zipped together by normalised height, so no
    triangle straddles ``y = 0`` and none is inverted.
    """
    if H is None:
        H = 2.0 * (p.b - p.a)
    dx = p.dx
    if target is None:
        target = float(dx.max())
    if not H > 0 or not target > 0:
        raise ValueError("H and target must be positive")
    h = np.array(p.h, dtype=float)
    # sub-target slivers are flattened rather than meshed
    h[(h > 0) & (h < target * 1e-6)] = 0.0
    if periodic and h[0] != h[-1]:
        raise ValueError("periodic mesh needs equal end heights")

    n = p.n_nodes
    local = np.empty(n)
    local[0] = dx[0]
    local[-1] = dx[-1]
    local[1:-1] = np.minimum(dx[:-1], dx[1:])
    t_loc = np.minimum(target, local)
    if periodic:
        if not math.isclose(t_loc[0], t_loc[-1], rel_tol=1e-9):
            raise ValueError("periodic mesh needs equal spacing at both ends")
        t_loc[-1] = t_loc[0]
    # substrate levels per line, graded from the local spacing; lines with the
    # same spacing share levels, and the zipper below merges differing ones
    level_cache = {}

    def substrate_levels(s0):
        if s0 not in level_cache:
            depths = _grow_levels(s0, grade, max(max_aspect * target, s0), H)
            level_cache[s0] = np.concatenate([-depths[::-1], [0.0]])  # bottom .. 0
        return level_cache[s0]

    verts = []
    keys = []
    lines = []
    fractions = []
    n_subs = np.empty(n, dtype=int)
    nv = 0
    for i in range(n):
        sub_y = substrate_levels(float(t_loc[i]))
        n_subs[i] = sub_y.size
        nf = 0 if h[i] <= 0 else max(1, int(math.ceil(h[i] / t_loc[i] - 1e-9)))
        frac = np.arange(1, nf + 1) / nf if nf else np.zeros(0)
        ys = np.concatenate([sub_y, h[i] * frac])
        if nf:
            ys[-1] = h[i]
        chain = np.arange(nv, nv + ys.size)
        verts.append(np.column_stack([np.full(ys.size, p.x[i]), ys]))
        keys.append(np.concatenate([sub_y, frac]))
        lines.append(chain)
        fractions.append(frac)
        nv += ys.size
    vertices = np.vstack(verts)

    tris = []
    surface_tri = np.empty(n - 1, dtype=int)
    for j in range(n - 1):
        L, R = lines[j], lines[j + 1]
        kL, kR = keys[j], keys[j + 1]
        a_i = b_i = 0
        left_first = j % 2 == 0
        while a_i < L.size - 1 or b_i < R.size - 1:
            if a_i == L.size - 1:
                adv_left = False
            elif b_i == R.size - 1:
                adv_left = True
            else:
                nl, nr = kL[a_i + 1], kR[b_i + 1]
                adv_left = nl < nr or (nl == nr and left_first)
            if adv_left:
                tris.append((L[a_i], R[b_i], L[a_i + 1]))
                a_i += 1
            else:
                tris.append((L[a_i], R[b_i], R[b_i + 1]))
                b_i += 1
        surface_tri[j] = len(tris) - 1
    triangles = np.array(tris, dtype=int)
    # orient counter-clockwise
    pts = vertices[triangles]
    d1 = pts[:, 1] - pts[:, 0]
    d2 = pts[:, 2] - pts[:, 0]
    neg = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0
    triangles[neg] = triangles[neg][:, [0, 2, 1]]
    region = (vertices[triangles][:, :, 1].mean(axis=1) > 0).astype(np.int8)

    tops = np.array([c[-1] for c in lines])
    bots = np.array([c[0] for c in lines])
    boundary = {
        "top": np.column_stack([tops[:-1], tops[1:]]),
        "bottom": np.column_stack([bots[:-1], bots[1:]]),
        "left": np.column_stack([lines[0][:-1], lines[0][1:]]),
        "right": np.column_stack([lines[-1][:-1], lines[-1][1:]]),
    }
    pairs = np.column_stack([lines[0], lines[-1]]) if periodic else None

    mesh = Mesh(
        vertices=vertices,
        triangles=triangles,
        region=region,
        boundary=boundary,
        H=float(H),
        periodic=periodic,
        profile_key=p.fingerprint(),
        surface_triangle=surface_tri,
        lines=lines,
        n_substrate_levels=n_subs,
        periodic_pairs=pairs,
    )
    mesh.line_film_fraction = fractions
    mesh.flattened_heights = h
    if mesh.min_angle() < math.radians(min_angle_deg):
        raise MeshQualityError(
            f"minimum angle {math.degrees(mesh.min_angle()):.3g} deg below floor {min_angle_deg} deg"
        )
    return mesh


def internal_ball_radius(p: Profile, n_grid: int = 64, rho_min: float | None = None, fan: int = 9) -> float:
    """Largest radius on a log grid for which every graph vertex has an interior touching disc.

    The discrete test places the centre at ``z - rho * n`` for a fan of
    outward directions ``n`` spanning the adjacent segment normals, and
    requires every profile node and every segment not incident to the vertex
    to lie outside the open disc, and the centre to lie below the graph.  The grid is searched by bisection, which
    assumes the test is monotone in ``rho``.
    """
    width = p.b - p.a
    rho_max = 0.5 * width
    if rho_min is None:
        rho_min = 1e-6 * width
    grid = np.geomspace(rho_max, rho_min, n_grid)

    pts = np.column_stack([p.x, p.h])
    seg = np.diff(pts, axis=0)
    seg_n = np.column_stack([-seg[:, 1], seg[:, 0]]) / np.linalg.norm(seg, axis=1)[:, None]
    # per-vertex normals from the neighbouring segments
    left_n = np.vstack([seg_n[:1], seg_n])
    right_n = np.vstack([seg_n, seg_n[-1:]])
    ang_l = np.arctan2(left_n[:, 1], left_n[:, 0])
    ang_r = np.arctan2(right_n[:, 1], right_n[:, 0])
    diff = np.angle(np.exp(1j * (ang_r - ang_l)))
    t = np.linspace(0.0, 1.0, fan)
    angs = ang_l[:, None] + diff[:, None] * t[None, :]
    normals = np.stack([np.cos(angs), np.sin(angs)], axis=-1)  # (n, fan, 2)

    # segments touching vertex i are exempt from the segment test (the disc
    # touches them at z); all other segments must stay outside the disc
    n = pts.shape[0]
    j = np.arange(n - 1)
    adjacent = (j[None, :] == np.arange(n)[:, None]) | (j[None, :] == np.arange(n)[:, None] - 1)
    seg_len2 = np.einsum("ij,ij->i", seg, seg)

    def ok(rho):
        centres = pts[:, None, :] - rho * normals  # (n, fan, 2)
        below = centres[..., 1] < np.interp(centres[..., 0], p.x, p.h)
        d2 = ((centres[:, :, None, :] - pts[None, None, :, :]) ** 2).sum(-1)
        r2 = (rho * (1 - 1e-9)) ** 2
        clear = (d2 >= r2).all(axis=2)
        rel = centres[:, :, None, :] - pts[None, None, :-1, :]
        s = np.clip(np.einsum("ifjk,jk->ifj", rel, seg) / seg_len2, 0.0, 1.0)
        ds2 = ((rel - s[..., None] * seg[None, None]) ** 2).sum(-1)
        clear &= ((ds2 >= r2) | adjacent[:, None, :]).all(axis=2)
        return bool(np.all((below & clear).any(axis=1)))

    lo, hi = -1, grid.size  # grid[hi] passes (sentinel), grid[lo] fails
    if ok(grid[0]):
        return float(grid[0])
    lo = 0
    if not ok(grid[-1]):
        return 0.0
    hi = grid.size - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(grid[mid]):
            hi = mid
        else:
            lo = mid
    return float(grid[hi])
