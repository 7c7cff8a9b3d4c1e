"""Corner exponents of the plane Lamé transmission problem in a cone.

Separated solutions ``u = r^alpha Phi(theta)`` of ``div C grad u = 0`` in a
union of angular sectors reduce to a quadratic eigenproblem in ``alpha``
over functions of the angle.  Testing against ``Psi`` and integrating the
derivative terms by parts gives

    alpha^2 K_rr + alpha (K_rt - K_tr) - K_tt = 0,

    K_rr = int (Psi  (x) e_r):C(Phi  (x) e_r)     K_rt = int (Psi  (x) e_r):C(Phi' (x) e_t)
    K_tr = int (Psi' (x) e_t):C(Phi  (x) e_r)     K_tt = int (Psi' (x) e_t):C(Phi' (x) e_t)

with traction continuity across sector interfaces and zero traction on the
two outer rays as natural conditions.  ``Phi`` is piecewise linear in the
angle; the pencil is linearised to companion form and solved densely.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .elasticity import Materials
from .errors import BadSpec, EigenFailure

__all__ = [
    "SectorSpec",
    "Pencil",
    "ExponentReport",
    "assemble_pencil",
    "singular_exponents",
    "predicted_decay",
    "williams_exponents",
]

TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class SectorSpec:
    """Angles ``0 <= theta1 < theta2 <= theta3 <= 2 pi`` of a film/substrate cone.

    Sector 1 ``[0, theta1]`` and sector 3 ``[theta2, theta3]`` are film,
    sector 2 ``[theta1, theta2]`` is substrate; empty sectors are dropped.
    Both outer rays are traction free.  ``theta3 = 2 pi`` (a crack) is
    accepted but lies outside the cone hypothesis, see ``tau_condition``.
    """

    theta1: float
    theta2: float
    theta3: float

    def __post_init__(self):
        t1, t2, t3 = self.theta1, self.theta2, self.theta3
        if not all(math.isfinite(v) for v in (t1, t2, t3)):
            raise BadSpec("angles must be finite")
        if not (0.0 <= t1 < t2 <= t3 <= TWO_PI + 1e-12):
            raise BadSpec(f"need 0 <= theta1 < theta2 <= theta3 <= 2 pi, got {t1}, {t2}, {t3}")

    @classmethod
    def wedge(cls, omega: float) -> "SectorSpec":
        """Homogeneous wedge of opening ``omega`` (substrate material)."""
        return cls(0.0, omega, omega)

    @classmethod
    def border(cls, theta: float) -> "SectorSpec":
        """Film wedge of angle ``theta`` resting on a half-plane of substrate."""
        return cls(0.0, math.pi, math.pi + theta)

    @classmethod
    def valley(cls, theta_left: float, theta_right: float | None = None) -> "SectorSpec":
        """Two film wedges meeting the substrate surface at a single point."""
        theta_right = theta_left if theta_right is None else theta_right
        return cls(theta_right, theta_right + math.pi, theta_right + math.pi + theta_left)

    @property
    def sectors(self) -> list:
        """``(start, end, is_film)`` for each non-empty sector."""
        out = [(0.0, self.theta1, True), (self.theta1, self.theta2, False), (self.theta2, self.theta3, True)]
        return [s for s in out if s[1] > s[0]]

    @property
    def opening(self) -> float:
        return self.theta3

    def tau_condition(self) -> bool:
        """Is there a direction ``tau`` inside sector 2 with ``-tau`` outside the closed cone?"""
        lo, hi = self.theta1 + math.pi, self.theta2 + math.pi
        # -tau must avoid [0, theta3] modulo 2 pi, i.e. land in (theta3, 2 pi)
        for shift in (-TWO_PI, 0.0, TWO_PI):
            a, b = self.theta3 + shift, TWO_PI + shift
            if max(lo, a) < min(hi, b):
                return True
        return False


@dataclass
class Pencil:
    """``A0 + alpha A1 + alpha^2 A2`` acting on nodal angular vectors."""

    A0: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    nodes: np.ndarray
    spec: SectorSpec
    materials: Materials

    @property
    def size(self) -> int:
        return self.A0.shape[0]

    def __call__(self, alpha):
        return self.A0 + alpha * self.A1 + alpha**2 * self.A2


@dataclass
class ExponentReport:
    exponents: np.ndarray
    multiplicity: np.ndarray
    strip: tuple
    min_positive_real: float
    alpha_pred: float
    quasi_monotone: bool = False
    tau_condition: bool = True
    n_angular: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "exponents": [[float(z.real), float(z.imag), int(m)] for z, m in zip(self.exponents, self.multiplicity)],
            "strip": list(self.strip),
            "min_positive_real": self.min_positive_real,
            "alpha_pred": self.alpha_pred,
            "quasi_monotone": self.quasi_monotone,
            "tau_condition": self.tau_condition,
            "n_angular": self.n_angular,
        }


def _pair(a, b, c, d, mu, lam):
    """``(a (x) b) : C (c (x) d)`` for isotropic ``C``, vectors stacked on the last axis."""
    ac = np.sum(a * c, -1)
    bd = np.sum(b * d, -1)
    ad = np.sum(a * d, -1)
    bc = np.sum(b * c, -1)
    ab = np.sum(a * b, -1)
    cd = np.sum(c * d, -1)
    return mu * (ac * bd + ad * bc) + lam * ab * cd


def _element_counts(spec: SectorSpec, n_angular: int) -> list:
    widths = [e - s for s, e, _ in spec.sectors]
    total = sum(widths)
    return [max(16, int(round(n_angular * w / total))) for w in widths]


def assemble_pencil(spec: SectorSpec, mat: Materials, n_angular: int = 256, *, n_gauss: int = 4) -> Pencil:
    """Degree-1 angular elements; ``n_angular`` elements shared across the sectors.

    Each sector receives a share proportional to its opening, at least 16.
    Sector interfaces share a node, which imposes continuity of ``Phi``.
    """
    if not isinstance(spec, SectorSpec):
        raise BadSpec("expected a SectorSpec")
    n_sec = len(spec.sectors)
    if n_angular < 16 * n_sec:
        raise BadSpec(f"need n_angular >= 16 per sector ({16 * n_sec})")
    counts = _element_counts(spec, n_angular)
    nodes = [0.0]
    elem_mat = []
    for (s, e, film), n in zip(spec.sectors, counts):
        nodes.extend(np.linspace(s, e, n + 1)[1:])
        mu, lam = (mat.mu_f, mat.lambda_f) if film else (mat.mu_s, mat.lambda_s)
        elem_mat.extend([(mu, lam)] * n)
    nodes = np.array(nodes)
    elem_mat = np.array(elem_mat)
    n_el = len(nodes) - 1
    xg, wg = np.polynomial.legendre.leggauss(n_gauss)

    t0, t1 = nodes[:-1], nodes[1:]
    L = t1 - t0
    th = 0.5 * (t0 + t1)[:, None] + 0.5 * L[:, None] * xg[None, :]  # (e, q)
    wq = 0.5 * L[:, None] * wg[None, :]
    er = np.stack([np.cos(th), np.sin(th)], -1)
    et = np.stack([-np.sin(th), np.cos(th)], -1)
    # local shape values and angular derivatives
    N = np.stack([0.5 * (1 - xg), 0.5 * (1 + xg)], 0)  # (a, q)
    dN = np.stack([-1.0 / L, 1.0 / L], 0)  # (a, e)
    mu = elem_mat[:, 0][:, None]
    lam = elem_mat[:, 1][:, None]
    ndof = 2 * len(nodes)
    A0 = np.zeros((ndof, ndof))
    A1 = np.zeros((ndof, ndof))
    A2 = np.zeros((ndof, ndof))
    unit = np.eye(2)
    for a in range(2):
        for i in range(2):
            for b in range(2):
                for j in range(2):
                    psi = unit[i][None, None, :] * N[a][None, :, None]
                    dpsi = unit[i][None, None, :] * dN[a][:, None, None]
                    phi = unit[j][None, None, :] * N[b][None, :, None]
                    dphi = unit[j][None, None, :] * dN[b][:, None, None]
                    psi, dpsi, phi, dphi = (np.broadcast_to(v, er.shape) for v in (psi, dpsi, phi, dphi))
                    krr = np.sum(wq * _pair(psi, er, phi, er, mu, lam), 1)
                    krt = np.sum(wq * _pair(psi, er, dphi, et, mu, lam), 1)
                    ktr = np.sum(wq * _pair(dpsi, et, phi, er, mu, lam), 1)
                    ktt = np.sum(wq * _pair(dpsi, et, dphi, et, mu, lam), 1)
                    rows = 2 * (np.arange(n_el) + a) + i
                    cols = 2 * (np.arange(n_el) + b) + j
                    np.add.at(A2, (rows, cols), krr)
                    np.add.at(A1, (rows, cols), krt - ktr)
                    np.add.at(A0, (rows, cols), -ktt)
    return Pencil(A0, A1, A2, nodes, spec, mat)


def _cluster(values: np.ndarray, tol: float):
    """Merge values within ``tol``; returns representatives and counts."""
    reps, counts = [], []
    for z in values:
        for k, r in enumerate(reps):
            if abs(z - r) <= tol * max(1.0, abs(r)):
                counts[k] += 1
                break
        else:
            reps.append(z)
            counts.append(1)
    return np.array(reps, dtype=complex), np.array(counts, dtype=int)


def singular_exponents(pencil: Pencil, strip: tuple = (-0.75, 1.25), *, dedup_tol: float = 1e-8, zero_tol: float = 1e-6, ring_radius: float = 1e-4) -> ExponentReport:
    """Eigenvalues of the pencil with real part in ``strip``.

    Companion form ``[[0, I], [-A0, -A1]] z = alpha diag(I, A2) z`` after
    rescaling ``alpha`` so the three coefficients have comparable norms.  Values
    within ``zero_tol`` of 0 snap to 0, as does the cluster within
    ``ring_radius`` of 0 when its centroid is within ``zero_tol``; imaginary parts below ``dedup_tol``
    are dropped; values within ``dedup_tol`` merge with a multiplicity count.
    """
    n = pencil.size
    # Fan-Lin-Van Dooren scaling alpha = g * a balances the three blocks;
    # it keeps the (defective) zero exponent sharp
    n0, n1, n2 = (np.linalg.norm(M, 2) for M in (pencil.A0, pencil.A1, pencil.A2))
    g = math.sqrt(n0 / n2) if n0 > 0 and n2 > 0 else 1.0
    d = 2.0 / (n0 + n1 * g + n2 * g * g)
    I = np.eye(n)
    Z = np.zeros((n, n))
    A = np.block([[Z, I], [-d * pencil.A0, -d * g * pencil.A1]])
    B = np.block([[I, Z], [Z, d * g * g * pencil.A2]])
    try:
        w = sla.eig(A, B, right=False, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenFailure(f"eigensolver failed: {exc}") from exc
    w = g * w[np.isfinite(w)]
    if w.size == 0:
        raise EigenFailure("no finite eigenvalues")
    # alpha = 0 is defective (translations carry log r partners), so rounding
    # spreads it over a ring of radius ~ sqrt(eps cond); the ring centroid is
    # accurate, and the whole ring snaps when the centroid does
    ring = np.abs(w) < ring_radius
    if np.any(ring) and abs(w[ring].mean()) < zero_tol:
        w = np.where(ring, 0.0, w)
    w = np.where(np.abs(w) < zero_tol, 0.0, w)
    w = np.where(np.abs(w.imag) < dedup_tol, w.real + 0j, w)
    lo, hi = strip
    w = w[(w.real >= lo) & (w.real <= hi)]
    w = w[np.lexsort((w.imag, w.real))]
    reps, mult = _cluster(w, dedup_tol)
    pos = reps.real[reps.real > zero_tol]
    mpr = float(pos.min()) if pos.size else math.inf
    return ExponentReport(
        exponents=reps,
        multiplicity=mult,
        strip=(float(lo), float(hi)),
        min_positive_real=mpr,
        alpha_pred=mpr,
        quasi_monotone=pencil.materials.quasi_monotone,
        tau_condition=pencil.spec.tau_condition(),
        n_angular=len(pencil.nodes) - 1,
    )


def predicted_decay(spec: SectorSpec, mat: Materials, n_angular: int = 256) -> float:
    """``min(alpha_pred, 1)``: the decay exponent to compare with a field fit."""
    rep = singular_exponents(assemble_pencil(spec, mat, n_angular))
    return min(rep.alpha_pred, 1.0)


def williams_exponents(omega: float, nu: float | None = None, alpha_max: float = 2.0) -> np.ndarray:
    """Real roots in ``(0, alpha_max]`` of ``sin(alpha omega) = +-alpha sin(omega)``.

    Characteristic equation of a traction-free homogeneous wedge; it does not
    depend on the Lamé moduli.  Used as an oracle independent of the pencil.
    """
    from scipy.optimize import brentq

    roots = []
    grid = np.linspace(1e-9, alpha_max, 4000)
    for sgn in (1.0, -1.0):
        f = lambda a: math.sin(a * omega) - sgn * a * math.sin(omega)  # noqa: E731
        vals = np.array([f(a) for a in grid])
        for k in range(len(grid) - 1):
            if vals[k] == 0.0:
                roots.append(grid[k])
            elif vals[k] * vals[k + 1] < 0:
                roots.append(brentq(f, grid[k], grid[k + 1], xtol=1e-14))
    roots = np.sort(np.array(roots))
    keep = [r for i, r in enumerate(roots) if i == 0 or r - roots[i - 1] > 1e-9]
    return np.array(keep)
