"""Checks of converged profiles against the equilibrium conditions.

Contact angles against ``arccos(beta)``, the dichotomy between wetting and
dewetting zero sets, the local decay of the elastic energy at a corner, the
constant-curvature balance on the film surface, and explicit competitors
near island borders.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .elasticity import BoundaryMode, ElasticState, Materials, boundary_trace_density, solve_equilibrium
from .energy import Tensions, beta as beta_of, penalized_energy, theta_star, total_energy
from .errors import EmptyBall, NoBorder, TooFewSegments
from .geometry import Profile, contact_angles, default_h_tol, mesh_subgraph, zero_set

__all__ = [
    "AngleEntry",
    "AngleReport",
    "check_young_dupre",
    "DecayFit",
    "disc_triangle_area",
    "fit_decay_exponent",
    "ELResidual",
    "discrete_curvature",
    "el_residual",
    "CompetitorRow",
    "CompetitorReport",
    "hep_competitor",
    "competitor_test",
]


# ---------------------------------------------------------------- angles


@dataclass
class AngleEntry:
    x: float
    kind: str  # "border-left", "border-right" or "valley"
    theta: float
    target: float
    deviation: float


@dataclass
class AngleReport:
    """Measured contact angles with their target ``arccos(beta)``.

    ``border-left`` is the left end of an island (film to the right of
    ``x``), ``border-right`` its right end.  A valley contributes one entry
    per side.
    """

    entries: list
    beta: float
    regime: str  # "wetting" or "dewetting"
    valley_count: int
    tol: float
    violations: list = field(default_factory=list)

    @property
    def max_deviation(self) -> float:
        return max((e.deviation for e in self.entries if e.kind != "valley"), default=0.0)

    @property
    def passed(self) -> bool:
        return not self.violations

    def rows(self) -> list:
        return [
            {
                "x": e.x,
                "kind": e.kind,
                "theta_deg": math.degrees(e.theta),
                "target_deg": math.degrees(e.target),
                "deviation_deg": math.degrees(e.deviation),
            }
            for e in self.entries
        ]

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "regime": self.regime,
            "valley_count": self.valley_count,
            "tol_deg": math.degrees(self.tol),
            "max_deviation_deg": math.degrees(self.max_deviation),
            "passed": self.passed,
            "violations": list(self.violations),
            "entries": self.rows(),
        }


def check_young_dupre(p: Profile, t: Tensions, tol: float = math.radians(3.0), *, h_tol: float | None = None, stencil: int = 3) -> AngleReport:
    """Compare every border angle of ``p`` with ``arccos(beta)``.

    Angles use the three-node one-sided stencil.  In the dewetting regime
    (``beta < 1``) any valley is reported as a violation, as is a border
    deviating by more than ``tol`` radians.
    """
    b = beta_of(t)
    target = theta_star(t)
    wetting = b >= 1.0
    z = zero_set(p, h_tol)
    entries, violations = [], []
    for c in contact_angles(p, z, stencil=stencil):
        if c.kind == "valley":
            kind = "valley"
        else:
            kind = "border-right" if c.side == "left" else "border-left"
        dev = abs(c.theta - target)
        entries.append(AngleEntry(c.x0, kind, c.theta, target, dev))
        if kind != "valley" and dev > tol:
            violations.append(f"{kind} at x={c.x0:.6g}: deviation {math.degrees(dev):.3f} deg")
    entries.sort(key=lambda e: (e.x, e.kind))
    if not wetting:
        for xv in z.valleys:
            violations.append(f"valley at x={xv:.6g} in the dewetting regime")
    return AngleReport(entries, b, "wetting" if wetting else "dewetting", len(z.valleys), tol, violations)


# ---------------------------------------------------------------- decay


@dataclass
class DecayFit:
    center: tuple
    radii: np.ndarray
    integrals: np.ndarray
    two_alpha: float
    r2: float
    intercept: float = 0.0

    @property
    def alpha(self) -> float:
        return 0.5 * self.two_alpha

    @property
    def reliable(self) -> bool:
        return self.r2 >= 0.98

    def to_dict(self) -> dict:
        return {
            "center": list(self.center),
            "radii": self.radii.tolist(),
            "integrals": self.integrals.tolist(),
            "two_alpha": self.two_alpha,
            "r2": self.r2,
            "reliable": self.reliable,
        }


def _segment_disc_area(p, q, r):
    """Signed area of ``triangle(0, p, q) ∩ disc(0, r)``, vectorised over rows."""
    d = q - p
    A = np.sum(d * d, 1)
    B = 2 * np.sum(p * d, 1)
    C = np.sum(p * p, 1) - r * r
    disc = B * B - 4 * A * C
    sq = np.sqrt(np.maximum(disc, 0.0))
    safe = np.where(A > 0, A, 1.0)
    t1 = np.where(disc > 0, (-B - sq) / (2 * safe), 0.0)
    t2 = np.where(disc > 0, (-B + sq) / (2 * safe), 0.0)
    t1 = np.clip(t1, 0.0, 1.0)
    t2 = np.clip(t2, 0.0, 1.0)
    total = np.zeros(p.shape[0])
    for ta, tb in ((np.zeros_like(t1), t1), (t1, t2), (t2, np.ones_like(t2))):
        a = p + ta[:, None] * d
        b = p + tb[:, None] * d
        mid = 0.5 * (a + b)
        cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        dot = np.sum(a * b, 1)
        inside = np.sum(mid * mid, 1) <= r * r
        tri = 0.5 * cross
        sector = 0.5 * r * r * np.arctan2(cross, dot)
        total += np.where(tb > ta, np.where(inside, tri, sector), 0.0)
    return total


def disc_triangle_area(tri: np.ndarray, center, r: float) -> np.ndarray:
    """Exact areas of ``T ∩ B(center, r)`` for triangles ``tri`` of shape ``(m, 3, 2)``."""
    tri = np.asarray(tri, dtype=float) - np.asarray(center, dtype=float)[None, None, :]
    if tri.ndim == 2:
        tri = tri[None]
    total = np.zeros(tri.shape[0])
    for k in range(3):
        total += _segment_disc_area(tri[:, k], tri[:, (k + 1) % 3], r)
    return np.abs(total)


def fit_decay_exponent(s: ElasticState, z0, r_max: float, n_radii: int = 8, *, field: np.ndarray | None = None) -> DecayFit:
    """Fit ``int_{B(z0, r)} |grad u|^2 ~ C r^(2 alpha)`` on ``r_k = r_max 2^-k``.

    The P1 gradient is constant per triangle, so each integral is
    ``sum |grad u_T|^2 |T ∩ B|`` with the intersection area computed exactly.
    ``field`` overrides the per-triangle ``|grad u|^2``.
    """
    if n_radii < 4:
        raise ValueError("need n_radii >= 4")
    if not r_max > 0:
        raise ValueError("r_max must be positive")
    mesh = s.mesh
    if field is None:
        gu = s.grad_u()
        field = np.sum(gu * gu, axis=(1, 2))
    z0 = np.asarray(z0, dtype=float)
    radii = r_max * 0.5 ** np.arange(n_radii)
    tri = mesh.vertices[mesh.triangles]
    # only triangles that can touch the largest disc
    dist = np.linalg.norm(tri - z0[None, None, :], axis=2).min(1)
    ext = np.max(np.linalg.norm(tri - tri.mean(1, keepdims=True), axis=2), 1)
    near = dist <= r_max + ext
    tri, fld = tri[near], np.asarray(field)[near]
    integrals = np.empty(n_radii)
    for k, r in enumerate(radii):
        area = disc_triangle_area(tri, z0, r)
        if not np.any(area > 0):
            raise EmptyBall(f"ball of radius {r:.3g} meets no element; reduce n_radii")
        integrals[k] = float(np.sum(fld * area))
    if np.any(integrals <= 0):
        raise EmptyBall("vanishing energy in a ball; the field is zero near z0")
    X = np.log(radii)
    Y = np.log(integrals)
    slope, intercept = np.polyfit(X, Y, 1)
    resid = Y - (slope * X + intercept)
    ss = float(np.sum((Y - Y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0
    return DecayFit(tuple(map(float, z0)), radii, integrals, float(slope), r2, float(intercept))


# ---------------------------------------------------------------- Euler-Lagrange


@dataclass
class ELResidual:
    rms: float
    max: float
    lambda0: float
    relative_rms: float
    nodes: np.ndarray
    curvature: np.ndarray
    trace: np.ndarray

    def to_dict(self) -> dict:
        return {"rms": self.rms, "max": self.max, "lambda0": self.lambda0, "relative_rms": self.relative_rms, "n_nodes": int(self.nodes.size)}


def discrete_curvature(p: Profile) -> np.ndarray:
    """Signed curvature of the circle through consecutive node triples.

    Interior nodes only (the ends get NaN); concave-down arcs are negative,
    matching ``h'' / (1 + h'^2)^(3/2)``.
    """
    P = np.stack([p.x, p.h], 1)
    a = P[1:-1] - P[:-2]
    b = P[2:] - P[1:-1]
    c = P[2:] - P[:-2]
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    k = 2 * cross / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1) * np.linalg.norm(c, axis=1))
    return np.concatenate([[np.nan], k, [np.nan]])


def _regular_nodes(p: Profile, h_tol: float, margin: int) -> np.ndarray:
    film = p.h > h_tol
    n = p.n_nodes
    ok = np.zeros(n, dtype=bool)
    ok[1:-1] = film[1:-1]
    # stay `margin` nodes away from any zero node
    zero = np.flatnonzero(~film)
    for i in zero:
        ok[max(0, i - margin) : i + margin + 1] = False
    return np.flatnonzero(ok)


def el_residual(
    p: Profile,
    s: ElasticState | None,
    t: Tensions,
    *,
    h_tol: float | None = None,
    margin: int = 2,
    trace: np.ndarray | None = None,
) -> ELResidual:
    """Residual of ``gamma_f k = W0 + lambda0`` on the regular part of the graph.

    ``W0`` at a node is the mean of the surface densities on its two
    segments (zero when ``s`` is None, the ``e0 = 0`` case); ``trace``
    overrides the per-segment densities.  ``lambda0`` is the least-squares
    constant, i.e. the mean of ``gamma_f k - W0``.  Nodes within ``margin``
    of a zero node are excluded.
    """
    if h_tol is None:
        h_tol = default_h_tol(p)
    idx = _regular_nodes(p, h_tol, margin)
    if idx.size < 5:
        raise TooFewSegments(f"only {idx.size} regular interior nodes")
    k = discrete_curvature(p)[idx]
    if trace is None and s is None:
        tr = np.zeros(idx.size)
    else:
        seg = boundary_trace_density(s, None, p) if trace is None else np.asarray(trace, dtype=float)
        tr = 0.5 * (seg[idx - 1] + seg[idx])
    q = t.gamma_f * k - tr
    lam0 = float(q.mean())
    r = q - lam0
    rms = float(np.sqrt(np.mean(r**2)))
    return ELResidual(rms, float(np.abs(r).max()), lam0, rms / abs(lam0) if lam0 != 0 else math.inf, idx, k, tr)


# ---------------------------------------------------------------- competitors


@dataclass
class CompetitorRow:
    x0: float
    side: str
    eps: float
    variant: str
    energy: float
    reference: float
    gap: float
    slack: float
    ok: bool


@dataclass
class CompetitorReport:
    rows: list
    reference: float
    slack_c: float

    @property
    def passed(self) -> bool:
        return all(r.ok for r in self.rows)

    @property
    def beaten(self) -> bool:
        """Does some competitor strictly lower the energy?"""
        return any(r.gap < 0 for r in self.rows)

    def to_dict(self) -> dict:
        return {"reference": self.reference, "slack_c": self.slack_c, "passed": self.passed, "beaten": self.beaten, "rows": [asdict(r) for r in self.rows]}


def _borders(p: Profile, h_tol: float):
    """``(x0, index, film_side, run_end_index)`` for each island border."""
    z = zero_set(p, h_tol)
    out = []
    last = p.n_nodes - 1
    for s, e in z.runs:
        if s == e and 0 < s < last:
            continue
        if s > 0:
            out.append((float(p.x[s]), s, "left", e))
        if e < last:
            out.append((float(p.x[e]), e, "right", s))
    return out


def hep_competitor(p: Profile, i0: int, side: str, eps: float, theta: float, run_end: int | None = None) -> Profile:
    """Replace the film next to the border node ``i0`` by a ``theta`` wedge.

    With the film on the left of ``x0``, the new profile follows
    ``-tan(theta) (x - x0 + eps) + h(x0 - eps)`` from ``x0 - eps`` until it
    reaches the substrate, and is zero after that up to the end of the zero
    run.  ``side="right"`` is the mirror case.
    """
    x, h = p.x, p.h.copy()
    x0 = p.x[i0]
    sgn = -1.0 if side == "left" else 1.0  # direction from x0 into the film
    xs = x0 + sgn * eps
    hs = float(p(np.array([xs]))[0])
    tan = math.tan(theta)
    if run_end is None:
        run_end = p.n_nodes - 1 if side == "left" else 0
    lo, hi = (xs, p.x[run_end]) if side == "left" else (p.x[run_end], xs)
    sel = (x > lo) & (x < hi)
    line = hs - tan * np.abs(x - xs)
    h[sel] = np.maximum(0.0, line[sel])
    return p.with_heights(h)


def _restored(q: Profile, target: float, h_tol: float) -> Profile:
    film = q.h > h_tol
    if not np.any(film):
        return q
    w = q.node_weights()
    c = (target - q.film_area()) / float(w[film].sum())
    h = q.h.copy()
    h[film] = np.maximum(0.0, h[film] + c)
    return q.with_heights(h)


def _psi_probe(p: Profile, i0: int, side: str, delta: float, amp: float) -> Profile:
    """Tent of half-width ``delta`` on the film side of the border, scaled by ``amp``."""
    x0 = p.x[i0]
    sgn = -1.0 if side == "left" else 1.0
    c = x0 + sgn * delta
    tent = np.maximum(0.0, 1.0 - np.abs(p.x - c) / delta)
    tent[np.sign(p.x - x0) != sgn] = 0.0
    return p.with_heights(np.maximum(0.0, p.h + amp * tent))


def competitor_test(
    p: Profile,
    s: ElasticState | None,
    mat: Materials,
    t: Tensions,
    eps_list=(0.1, 0.05, 0.025),
    *,
    lam: float | None = None,
    target_area: float | None = None,
    slack_c: float | None = None,
    h_tol: float | None = None,
    probes: bool = True,
    lateral: str = "periodic",
    H: float | None = None,
) -> CompetitorReport:
    """Energy of explicit competitors near every island border of ``p``.

    ``eps_list`` is relative to the domain width.  For each border and each
    ``eps`` the wedge competitor is evaluated as built and with the film area
    restored by a uniform shift; with ``probes`` a tent bump and dent of
    width ``eps`` on the film side is tried too.  A row passes when its
    penalised energy is at least the reference minus ``slack_c * eps^2``.
    ``slack_c`` defaults to ``gamma_f`` times the largest regular curvature.
    The input profile is not modified.
    """
    if beta_of(t) >= 1.0:
        raise NoBorder("no border law in the wetting regime")
    if h_tol is None:
        h_tol = default_h_tol(p)
    width = p.b - p.a
    lam = 100.0 * t.gamma_f / width if lam is None else lam
    target_area = p.film_area() if target_area is None else target_area
    borders = _borders(p, h_tol)
    if not borders:
        raise NoBorder("the zero set has no island border")
    if slack_c is None:
        k = discrete_curvature(p)[_regular_nodes(p, h_tol, 2)]
        slack_c = t.gamma_f * float(np.nanmax(np.abs(k))) if k.size else t.gamma_f / width

    def energy(q: Profile, state=None) -> float:
        if mat.e0 != 0.0 and state is None:
            mesh = mesh_subgraph(q, H, periodic=lateral == "periodic")
            state = solve_equilibrium(mesh, mat, BoundaryMode(lateral=lateral))
        bd = total_energy(q, state if mat.e0 != 0.0 else None, mat, t, h_tol)
        return penalized_energy(bd, target_area, lam)

    ref = energy(p, s)
    th = theta_star(t)
    rows = []
    for x0, i0, side, run_end in borders:
        for e_rel in eps_list:
            eps = e_rel * width
            slack = slack_c * eps * eps
            base = hep_competitor(p, i0, side, eps, th, run_end)
            cands = [("hep", base), ("hep-area", _restored(base, target_area, h_tol))]
            if probes:
                amp = eps * math.tan(th) * 0.1
                for name, a in (("psi+", amp), ("psi-", -amp)):
                    cands.append((name, _restored(_psi_probe(p, i0, side, eps, a), target_area, h_tol)))
            for name, q in cands:
                G = energy(q)
                gap = G - ref
                rows.append(CompetitorRow(x0, side, eps, name, G, ref, gap, slack, gap >= -slack))
    return CompetitorReport(rows, ref, slack_c)
