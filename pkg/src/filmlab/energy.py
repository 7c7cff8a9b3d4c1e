"""Total film energy: elastic bulk term plus discontinuous surface tension."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .elasticity import ElasticState, Materials
from .errors import InvalidTensions, MeshMismatch
from .geometry import Profile, default_h_tol

__all__ = [
    "Tensions",
    "EnergyBreakdown",
    "beta",
    "theta_star",
    "segment_densities",
    "surface_energy",
    "surface_parts",
    "total_energy",
    "penalized_energy",
]


@dataclass(frozen=True)
class Tensions:
    gamma_f: float
    gamma_s: float
    gamma_fs: float

    def __post_init__(self):
        if not self.gamma_f > 0:
            raise InvalidTensions("gamma_f must be positive")
        if not self.gamma_s > 0:
            raise InvalidTensions("gamma_s must be positive")
        if self.gamma_s - self.gamma_fs < 0:
            raise InvalidTensions("need gamma_s - gamma_fs >= 0")

    @property
    def exposed_density(self) -> float:
        """Surface density of bare substrate, ``min(gamma_f, gamma_s - gamma_fs)``."""
        return min(self.gamma_f, self.gamma_s - self.gamma_fs)

    def scaled(self, c: float) -> "Tensions":
        return Tensions(c * self.gamma_f, c * self.gamma_s, c * self.gamma_fs)

    @classmethod
    def from_beta(cls, b: float, gamma_f: float = 1.0, gamma_fs: float = 1.0) -> "Tensions":
        """Tensions realising a given ``beta`` in ``[0, 1]``."""
        if not 0.0 <= b <= 1.0:
            raise InvalidTensions(f"beta must lie in [0, 1], got {b}")
        return cls(gamma_f, gamma_fs + b * gamma_f, gamma_fs)


def beta(t: Tensions) -> float:
    """Wetting ratio ``min(gamma_f, gamma_s - gamma_fs) / gamma_f``.

    >>> beta(Tensions(1.0, 1.5, 1.0))
    0.5
    """
    if not isinstance(t, Tensions):
        raise InvalidTensions("expected Tensions")
    return t.exposed_density / t.gamma_f


def theta_star(t: Tensions) -> float:
    """Equilibrium contact angle ``arccos(beta)`` in radians."""
    return math.acos(min(1.0, max(0.0, beta(t))))


def segment_densities(p: Profile, t: Tensions, h_tol: float | None = None) -> np.ndarray:
    """``gamma_f`` on segments with an endpoint above ``h_tol``, bare-substrate density otherwise."""
    if h_tol is None:
        h_tol = default_h_tol(p)
    up = p.h > h_tol
    film = up[1:] | up[:-1]
    return np.where(film, t.gamma_f, t.exposed_density)


def surface_parts(p: Profile, t: Tensions, h_tol: float | None = None):
    """Film and exposed-substrate parts of the surface energy."""
    if h_tol is None:
        h_tol = default_h_tol(p)
    dens = segment_densities(p, t, h_tol)
    lengths = p.segment_lengths()
    up = p.h > h_tol
    film = up[1:] | up[:-1]
    return float(np.sum((dens * lengths)[film])), float(np.sum((dens * lengths)[~film]))


def surface_energy(p: Profile, t: Tensions, h_tol: float | None = None) -> float:
    """Sum of segment length times segment density.

    >>> from filmlab.geometry import make_profile
    >>> round(surface_energy(make_profile(0, 1, [0, 0]), Tensions(1, 1.5, 1)), 12)
    0.5
    """
    return float(np.sum(segment_densities(p, t, h_tol) * p.segment_lengths()))


@dataclass
class EnergyBreakdown:
    elastic: float
    surface_film: float
    surface_wetting: float
    fs_constant: float
    cut_term: float
    penalty: float
    total: float
    area_film: float

    def to_dict(self, t: Tensions | None = None) -> dict:
        d = asdict(self)
        if t is not None:
            d["beta"] = beta(t)
            d["theta_star_deg"] = math.degrees(theta_star(t))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnergyBreakdown":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__})


def _breakdown(elastic, p, t, h_tol):
    film, wet = surface_parts(p, t, h_tol)
    fs = t.gamma_fs * (p.b - p.a)
    cut = 0.0  # no vertical cuts in the Lipschitz class
    total = math.fsum([elastic, film, wet, fs, cut])
    return EnergyBreakdown(elastic, film, wet, fs, cut, 0.0, total, p.film_area())


def total_energy(p: Profile, s: ElasticState | None, mat: Materials, t: Tensions, h_tol: float | None = None) -> EnergyBreakdown:
    """Energy breakdown of the configuration ``(u, h)``.

    ``s=None`` stands for ``u = 0`` evaluated in closed form: the film then
    stores ``1/2 (2 mu_f + lambda_f) e0^2`` per unit area.
    """
    if s is None:
        elastic = 0.5 * (2 * mat.mu_f + mat.lambda_f) * mat.e0**2 * p.film_area()
    else:
        if s.mesh.profile_key and s.mesh.profile_key != p.fingerprint():
            raise MeshMismatch("elastic state belongs to a different profile")
        elastic = float(s.energy)
    return _breakdown(elastic, p, t, h_tol)


def penalized_energy(bd: EnergyBreakdown, target_area: float, lam: float) -> float:
    """``total + lam * |area - target|``."""
    if lam < 0:
        raise ValueError("penalty weight must be >= 0")
    return bd.total + lam * abs(bd.area_film - target_area)
