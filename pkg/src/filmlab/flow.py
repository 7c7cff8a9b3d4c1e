"""Projected gradient descent of the penalised film energy over profiles.

Each outer iteration solves the elastic equilibrium on the current profile,
forms the shape gradient, and takes a backtracking step ``h <- max(0, h - t g)``
that must strictly lower ``G = F + lam |A - A_target|``.  Contact lines move
by discrete border moves (shift a film edge by one node), accepted under the
same strict-decrease rule.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .elasticity import BoundaryMode, ElasticState, Materials, elastic_shape_derivative, solve_equilibrium
from .energy import EnergyBreakdown, Tensions, penalized_energy, segment_densities, total_energy
from .errors import MeshMismatch
from .geometry import Profile, default_h_tol, mesh_subgraph, zero_set

log = logging.getLogger(__name__)

__all__ = [
    "FlowConfig",
    "Iterate",
    "FlowTrajectory",
    "Evaluator",
    "shape_gradient",
    "descend_step",
    "minimize",
    "symmetric_difference_area",
]


@dataclass
class FlowConfig:
    """Knobs of the descent.  ``None`` fields are resolved from the problem.

    ``lam`` defaults to ``100 gamma_f / (b - a)`` and ``target_area`` to the
    area of the starting profile.  ``grad_tol`` bounds the RMS of the nodal
    residual ``g_i / w_i`` (units of energy per area).
    """

    lam: float | None = None
    step0: float | None = None
    shrink: float = 0.5
    grow: float = 2.0
    max_outer: int = 20000
    grad_tol: float = 1e-3
    h_tol: float | None = None
    target_area: float | None = None
    locality_mu: float | None = None
    lateral: str = "periodic"
    H: float | None = None
    mesh_target: float | None = None
    border_moves: bool = True
    border_relax: int = 400
    restore_area: bool = True
    elastic_gradient: str = "exact"
    max_lambda_doublings: int = 4
    area_drift_tol: float = 0.01
    step_min: float = 1e-16
    bb: bool = True

    def __post_init__(self):
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if self.grow < 1:
            raise ValueError("grow must be >= 1")
        if self.max_outer < 0 or self.grad_tol <= 0:
            raise ValueError("max_outer must be >= 0 and grad_tol > 0")
        if self.elastic_gradient not in ("exact", "trace"):
            raise ValueError("elastic_gradient is 'exact' or 'trace'")

    def resolved(self, p: Profile, t: Tensions) -> "FlowConfig":
        width = p.b - p.a
        dx = float(p.dx.min())
        return replace(
            self,
            lam=100.0 * t.gamma_f / width if self.lam is None else self.lam,
            target_area=p.film_area() if self.target_area is None else self.target_area,
            h_tol=default_h_tol(p) if self.h_tol is None else self.h_tol,
            step0=0.25 * dx / t.gamma_f if self.step0 is None else self.step0,
        )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Iterate:
    profile: Profile
    breakdown: EnergyBreakdown
    penalized: float
    step: float
    grad_norm: float
    kind: str = "gradient"  # "start", "gradient" or "border"


@dataclass
class FlowTrajectory:
    iterates: list = field(default_factory=list)
    converged: bool = False
    reason: str = ""
    config: FlowConfig | None = None
    state: dict = field(default_factory=dict)

    @property
    def final(self) -> Iterate:
        return self.iterates[-1]

    @property
    def profile(self) -> Profile:
        return self.iterates[-1].profile

    def penalized_series(self) -> np.ndarray:
        return np.array([it.penalized for it in self.iterates])


class Evaluator:
    """Reduced energy ``G(h) = min_u F(u, h) + lam |A - A_target|`` with a one-profile cache."""

    def __init__(self, mat: Materials, t: Tensions, cfg: FlowConfig):
        self.mat = mat
        self.t = t
        self.cfg = cfg
        self.n_solves = 0
        self._key = None
        self._val = None
        self.reference = None
        self.symmetric = False

    @property
    def elastic(self) -> bool:
        return self.mat.e0 != 0.0

    def mesh_and_solve(self, p: Profile) -> ElasticState:
        mesh = mesh_subgraph(p, self.cfg.H, self.cfg.mesh_target, periodic=self.cfg.lateral == "periodic")
        self.n_solves += 1
        return solve_equilibrium(mesh, self.mat, BoundaryMode(lateral=self.cfg.lateral))

    def __call__(self, p: Profile):
        key = p.fingerprint()
        if key == self._key:
            return self._val
        state = self.mesh_and_solve(p) if self.elastic else None
        bd = total_energy(p, state, self.mat, self.t, self.cfg.h_tol)
        bd.penalty = self.cfg.lam * abs(bd.area_film - self.cfg.target_area)
        G = penalized_energy(bd, self.cfg.target_area, self.cfg.lam)
        self._key, self._val = key, (G, bd, state)
        return self._val


def _surface_gradient(p: Profile, t: Tensions, h_tol: float) -> np.ndarray:
    dens = segment_densities(p, t, h_tol)
    dh = np.diff(p.h)
    f = dens * dh / p.segment_lengths()
    g = np.zeros(p.n_nodes)
    g[1:] += f
    g[:-1] -= f
    return g


def _trace_gradient(p: Profile, state: ElasticState) -> np.ndarray:
    from .elasticity import boundary_trace_density

    tr = boundary_trace_density(state, state.materials)
    w = p.node_weights()
    node = np.zeros(p.n_nodes)
    cnt = np.zeros(p.n_nodes)
    node[:-1] += tr
    node[1:] += tr
    cnt[:-1] += 1
    cnt[1:] += 1
    return node / cnt * w


def shape_gradient(p: Profile, s: ElasticState | None, mat: Materials, t: Tensions, cfg: FlowConfig, *, return_info: bool = False):
    """Nodal gradient of the reduced penalised energy, projected on the obstacle.

    Surface part: ``d(sum density_j * length_j)/dh_i`` with densities frozen
    by the ``h_tol`` rule.  Elastic part: exact derivative of the discrete
    equilibrium energy (``cfg.elastic_gradient="exact"``) or the boundary
    trace of ``W0`` times the node weight (``"trace"``).  Penalty part:
    ``s * w_i`` with ``s = lam * sign(A - A_target)``; on the kink
    ``A = A_target`` the smallest-norm subgradient with ``|s| <= lam`` is used.
    Nodes with ``h_i <= h_tol`` and positive gradient are projected to zero;
    when bare substrate is cheaper than film, every such node is held fixed.
    """
    cfg = cfg if cfg.lam is not None and cfg.h_tol is not None and cfg.target_area is not None else cfg.resolved(p, t)
    g0 = _surface_gradient(p, t, cfg.h_tol)
    if s is not None:
        if s.mesh.profile_key and s.mesh.profile_key != p.fingerprint():
            raise MeshMismatch("elastic state belongs to a different profile")
        if cfg.elastic_gradient == "exact":
            g0 = g0 + elastic_shape_derivative(s, mat)
        else:
            g0 = g0 + _trace_gradient(p, s)
    periodic = cfg.lateral == "periodic"
    if periodic:
        g0[0] = g0[-1] = g0[0] + g0[-1]
    w = p.node_weights()
    if periodic:
        w = w.copy()
        w[0] = w[-1] = w[0] + w[-1]
    area_gap = p.film_area() - cfg.target_area
    band = 1e-11 * max(abs(cfg.target_area), 1e-300) + 1e-15 * (p.b - p.a)
    at_zero = p.h <= cfg.h_tol
    # with a density jump, lifting a bare node costs a finite amount: it can
    # only leave the substrate through a border move
    pinned = at_zero if t.exposed_density < t.gamma_f else np.zeros_like(at_zero)
    if abs(area_gap) > band:
        mult = cfg.lam * math.copysign(1.0, area_gap)
        active = pinned | (at_zero & (g0 + mult * w > 0))
    else:
        active = pinned | (at_zero & (g0 > 0))
        mult = 0.0
        for _ in range(20):
            free = ~active
            ww = w[free] @ w[free]
            mult = 0.0 if ww == 0 else float(np.clip(-(g0[free] @ w[free]) / ww, -cfg.lam, cfg.lam))
            new_active = pinned | (at_zero & (g0 + mult * w > 0))
            if np.array_equal(new_active, active):
                break
            active = new_active
    g = g0 + mult * w
    g[active] = 0.0
    if not return_info:
        return g
    free = ~active
    r = g[free] / w[free] if np.any(free) else np.zeros(0)
    norm = float(np.sqrt(np.mean(r**2))) if r.size else 0.0
    return g, {"active": active, "multiplier": mult, "norm": norm, "weights": w}


def descend_step(p: Profile, g, step: float, cfg: FlowConfig | None = None) -> Profile:
    """Projected explicit step ``h_i <- max(0, h_i - step * g_i)``."""
    if not step > 0:
        raise ValueError("step must be positive")
    return p.with_heights(np.maximum(0.0, p.h - step * np.asarray(g)))


def symmetric_difference_area(p: Profile, q: Profile) -> float:
    """``|Omega_p (sym diff) Omega_q| = int |h_p - h_q| dx`` on a shared grid."""
    x = np.union1d(p.x, q.x)
    d = p(x) - q(x)
    total = 0.0
    for x0, x1, d0, d1 in zip(x[:-1], x[1:], d[:-1], d[1:]):
        dx = x1 - x0
        if d0 * d1 >= 0:
            total += 0.5 * (abs(d0) + abs(d1)) * dx
        else:
            s = abs(d0) / (abs(d0) + abs(d1))
            total += 0.5 * dx * (abs(d0) * s + abs(d1) * (1 - s))
    return total


def _restore_area(p: Profile, target: float, h_tol: float) -> Profile:
    """Shift film nodes uniformly so the film area equals ``target``."""
    gap = target - p.film_area()
    if gap == 0.0:
        return p
    film = p.h > h_tol
    if not np.any(film):
        return p
    w = p.node_weights()
    # the trapezoid area is linear in h, so one shift is exact unless it clips
    c = gap / float(w[film].sum())
    h = p.h.copy()
    h[film] = np.maximum(h[film] + c, 0.0)
    return p.with_heights(h)


def _border_candidates(p: Profile, h_tol: float):
    """Profiles with one contact line moved by one node, grouped per border."""
    z = zero_set(p, h_tol)
    last = p.n_nodes - 1
    groups = []
    for s, e in z.runs:
        valley = s == e and 0 < s < last
        if valley:
            h = p.h.copy()
            h[s] = 0.5 * (h[s - 1] + h[s + 1])
            groups.append([("fill", s, h)])
            continue
        for end, step in ((s, -1), (e, 1)):
            i1 = end + step
            if not 0 <= i1 <= last or (end == s and s == 0) or (end == e and e == last):
                continue
            cands = []
            # recede: first film node drops to the substrate
            if p.h[i1] > h_tol:
                h = p.h.copy()
                h[i1] = 0.0
                cands.append(("recede", i1, h))
            # advance: the zero node next to the film rises half-way
            if (e - s) >= 1 or end in (0, last):
                h = p.h.copy()
                h[end] = 0.5 * p.h[i1]
                if h[end] > h_tol:
                    cands.append(("advance", end, h))
            if cands:
                groups.append(cands)
    return groups


def _candidate(p, h, cfg, periodic):
    if periodic:
        h[0] = h[-1] = max(h[0], h[-1]) if min(h[0], h[-1]) > 0 else 0.0
    q = p.with_heights(np.maximum(h, 0.0))
    if cfg.restore_area:
        q = _restore_area(q, cfg.target_area, cfg.h_tol)
    return q


def _try_border_moves(p, G, ev, cfg, periodic, relax):
    """Best improving border move, compared after relaxing each candidate.

    A freshly moved contact line leaves a kink whose cost hides the gain of
    the new position, so every candidate first runs a short descent with its
    borders held.  Improving moves on different borders are applied together
    when that also improves.  Mirror-symmetric starts only try joint moves
    (see ``_try_joint_moves``), so the iterates stay symmetric.
    """
    groups = _border_candidates(p, cfg.h_tol)
    if ev.symmetric:
        return _try_joint_moves(p, G, groups, ev, cfg, periodic, relax)
    best_per_group = []
    for cands in groups:
        best = None
        for _kind, _idx, h in cands:
            q = _candidate(p, h, cfg, periodic)
            if not _local_ok(q, ev.reference, cfg):
                continue
            q, Gq = relax(q)
            if Gq < G and (best is None or Gq < best[0]):
                best = (Gq, q, h - p.h)
        if best is not None:
            best_per_group.append(best)
    if not best_per_group:
        return None
    if len(best_per_group) > 1:
        q = _candidate(p, p.h + sum(d for _, _, d in best_per_group), cfg, periodic)
        if _local_ok(q, ev.reference, cfg):
            q, Gq = relax(q)
            if Gq < G:
                return q, Gq
    Gq, q, _ = min(best_per_group, key=lambda b: b[0])
    return q, Gq


def _try_joint_moves(p, G, groups, ev, cfg, periodic, relax):
    """Best improving move applying the same kind of change on every border.

    A single border move breaks the mirror symmetry, and on its own it can
    cost energy even when the mirrored pair gains, so only pairs are tried.
    """
    best = None
    kinds = {c[0] for cands in groups for c in cands}
    for kind in sorted(kinds):
        picks = [[c for c in cands if c[0] == kind] for cands in groups]
        if not all(picks):
            continue
        q = _candidate(p, p.h + sum(c[0][2] - p.h for c in picks), cfg, periodic)
        if not _local_ok(q, ev.reference, cfg):
            continue
        q, Gq = relax(q)
        if Gq < G and (best is None or Gq < best[1]):
            best = (q, Gq)
    return best


def minimize(p0: Profile, mat: Materials, t: Tensions, cfg: FlowConfig | None = None, *, resume: dict | None = None, callback=None) -> FlowTrajectory:
    """Descend ``G = F + lam |A - A_target|`` from ``p0``.

    Stops on ``grad_norm <= grad_tol`` with no improving border move
    (``reason="stationarity"``), on the iteration cap, or when backtracking
    underflows with no improving border move (``"step-underflow"``).
    Accepted iterates strictly decrease ``G``.  If the area drift at
    convergence exceeds ``area_drift_tol`` of the target, ``lam`` is doubled
    and the descent continues.

    ``resume`` takes the ``state`` dict of an earlier trajectory (or the one
    passed to ``callback(k, traj, state)``) and continues bit-for-bit.
    """
    cfg = (cfg or FlowConfig()).resolved(p0, t)
    if resume and resume.get("lam") is not None:
        cfg = replace(cfg, lam=float(resume["lam"]))
    traj = FlowTrajectory(config=cfg)
    ev = Evaluator(mat, t, cfg)
    ev.reference = p0
    ev.symmetric = _is_mirror_symmetric(p0)
    for _ in range(cfg.max_lambda_doublings + 1):
        _descend(ev, cfg, traj, resume, callback, p0)
        final = traj.final.breakdown
        drift = abs(final.area_film - cfg.target_area)
        if drift <= cfg.area_drift_tol * max(cfg.target_area, 1e-300) or traj.reason == "max-iterations":
            break
        log.info("area drift %.3g: doubling lambda to %g", drift, 2 * cfg.lam)
        cfg = replace(cfg, lam=2 * cfg.lam)
        ev = Evaluator(mat, t, cfg)
        ev.reference = p0
        ev.symmetric = _is_mirror_symmetric(p0)
        traj.config = cfg
        resume = dict(traj.state)
    traj.state["n_solves"] = ev.n_solves
    return traj


def _descend(ev, cfg, traj, resume, callback, p0, *, borders=True):
    mat, t = ev.mat, ev.t
    periodic = cfg.lateral == "periodic"
    p = p0
    step = cfg.step0
    k = 0
    prev = None
    if resume:
        p = resume["profile"]
        step = resume["step"]
        k = resume["iteration"]
        if resume.get("prev_h") is not None:
            prev = (np.asarray(resume["prev_h"]), np.asarray(resume["prev_g"]))
    G, bd, state = ev(p)
    if not traj.iterates:
        traj.iterates.append(Iterate(p, bd, G, 0.0, float("nan"), "start"))
    step_max = 1e3 * float(p.dx.min()) / t.gamma_f
    borders = borders and cfg.border_moves
    max_outer = cfg.max_outer if borders else min(cfg.max_outer, k + cfg.border_relax)

    def relax(q):
        sub = FlowTrajectory()
        _descend(ev, cfg, sub, None, None, q, borders=False)
        return sub.profile, sub.final.penalized

    reason = "max-iterations"
    converged = False
    while k < max_outer:
        g, info = shape_gradient(p, state, mat, t, cfg, return_info=True)
        if ev.symmetric:
            # the mesh and sparse solve are not bitwise mirror-symmetric; the
            # exact gradient of a symmetric profile is, so drop the roundoff
            g = 0.5 * (g + g[::-1])
        gnorm = info["norm"]
        traj.iterates[-1].grad_norm = gnorm
        accepted = False
        if gnorm > cfg.grad_tol:
            if cfg.bb and prev is not None:
                sh = p.h - prev[0]
                sg = g - prev[1]
                free = ~info["active"]
                sy = float(sh[free] @ sg[free])
                if sy > 0:
                    step = float(np.clip((sh[free] @ sh[free]) / sy, cfg.step_min, step_max))
                else:
                    step = min(step * cfg.grow, step_max)
            while step >= cfg.step_min:
                q = descend_step(p, g, step, cfg)
                q = q.with_heights(np.where(q.h <= cfg.h_tol, 0.0, q.h))
                if periodic:
                    q = q.with_heights(_tie_ends(q.h))
                if cfg.restore_area:
                    q = _restore_area(q, cfg.target_area, cfg.h_tol)
                if _local_ok(q, ev.reference, cfg):
                    Gq, bdq, stq = ev(q)
                    if Gq < G:
                        accepted = True
                        break
                step *= cfg.shrink
        if accepted:
            prev = (p.h, g)
            p, G, bd, state = q, Gq, bdq, stq
            kind = "gradient"
            if not cfg.bb:
                step = min(step * cfg.grow, step_max)
        else:
            moved = _try_border_moves(p, G, ev, cfg, periodic, relax) if borders else None
            if moved is None:
                if gnorm <= cfg.grad_tol:
                    converged, reason = True, "stationarity"
                else:
                    reason = "step-underflow"
                break
            p = moved[0]
            G, bd, state = ev(p)
            prev = None
            step = cfg.step0
            kind = "border"
        k += 1
        traj.iterates.append(Iterate(p, bd, G, step if kind == "gradient" else 0.0, float("nan"), kind))
        if callback:
            callback(k, traj, _resume_state(p, step, k, prev, cfg.lam))
    if math.isnan(traj.iterates[-1].grad_norm):
        traj.iterates[-1].grad_norm = shape_gradient(p, state, mat, t, cfg, return_info=True)[1]["norm"]
    traj.converged = converged
    traj.reason = reason
    traj.state = _resume_state(p, step, k, prev, cfg.lam)
    return traj


def _is_mirror_symmetric(p: Profile) -> bool:
    scale = max(1.0, float(np.abs(p.h).max()))
    return bool(
        np.allclose(p.x - p.a, (p.b - p.x)[::-1], rtol=0, atol=1e-12 * (p.b - p.a))
        and np.allclose(p.h, p.h[::-1], rtol=0, atol=1e-12 * scale)
    )


def _tie_ends(h):
    h = h.copy()
    h[0] = h[-1] = 0.5 * (h[0] + h[-1])
    return h


def _local_ok(q: Profile, p0: Profile, cfg: FlowConfig) -> bool:
    if cfg.locality_mu is None:
        return True
    return symmetric_difference_area(q, p0) <= cfg.locality_mu


def _resume_state(p, step, k, prev, lam):
    return {
        "lam": float(lam),
        "profile": p,
        "step": float(step),
        "iteration": int(k),
        "prev_h": None if prev is None else prev[0].tolist(),
        "prev_g": None if prev is None else np.asarray(prev[1]).tolist(),
    }
