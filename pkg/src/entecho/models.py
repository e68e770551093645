"""Two-band lattice models in Bloch and real-space form.

The Bloch Hamiltonian is ``H(k) = d0 + d1 sx + d2 sy + d3 sz``. Two families are
provided:

* the 1d class-BDI chain ``d(k) = (0, sin k, 0, m - cos k)``,
* the 2d Chern insulator ``d(k) = (0, sin kx, sin ky, m - cos kx - cos ky)``,

plus a 1d real-space variant where the mass ``m`` varies from site to site.
All lattices are periodic. Units: hbar = k_B = hopping = 1.

Index convention (shared by every module): the single-particle basis is
site-major, ``(site 0, up), (site 0, down), (site 1, up), ...``. In 2d the site
index is ``x * Ly + y``.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from ._validation import check_positive_int, check_real
from .exceptions import BadProfile, GapClosed, GaugeSingular

__all__ = [
    "Kind",
    "Gauge",
    "ModelSpec",
    "DVector",
    "BlochEigensystem",
    "momenta",
    "d_vector_1d",
    "d_vector_2d",
    "bloch_eigensystem",
    "choose_gauge",
    "build_real_space_hamiltonian",
]

GAP_TOL = 1e-12
GAUGE_DENOM_TOL = 1e-14

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class Kind(str, Enum):
    CHAIN1D = "chain1d"
    CHERN2D = "chern2d"
    PROFILE = "profile"


class Gauge(str, Enum):
    """Phase conventions for Bloch eigenvectors.

    ``A`` is regular wherever ``d3 != -|d|``, ``B`` wherever ``d3 != +|d|``.
    """

    A = "A"
    B = "B"


@dataclass(frozen=True)
class ModelSpec:
    """Immutable description of a periodic two-band lattice model.

    Use the constructors :meth:`chain`, :meth:`chern` and :meth:`profile`
    rather than building instances by hand.
    """

    kind: Kind
    L: int
    mass: Optional[float] = None
    mass_profile: Optional[Tuple[float, ...]] = None
    Ly: Optional[int] = None

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        check_positive_int(self.L, "L", minimum=1)
        if kind is Kind.PROFILE:
            if self.mass_profile is None:
                raise BadProfile("profile model needs mass_profile")
            prof = tuple(float(m) for m in self.mass_profile)
            if len(prof) != self.L:
                raise BadProfile(f"mass_profile has {len(prof)} entries, L = {self.L}")
            if not all(np.isfinite(prof)):
                raise BadProfile("mass_profile must be finite")
            object.__setattr__(self, "mass_profile", prof)
            object.__setattr__(self, "mass", None)
        else:
            object.__setattr__(self, "mass", check_real(self.mass, "mass"))
            object.__setattr__(self, "mass_profile", None)
        if kind is Kind.CHERN2D:
            check_positive_int(self.L, "Lx", minimum=2)
            ly = self.L if self.Ly is None else self.Ly
            object.__setattr__(self, "Ly", check_positive_int(ly, "Ly", minimum=2))
        else:
            object.__setattr__(self, "Ly", None)

    @classmethod
    def chain(cls, mass, L):
        return cls(Kind.CHAIN1D, L, mass=mass)

    @classmethod
    def chern(cls, mass, Lx, Ly=None):
        return cls(Kind.CHERN2D, Lx, mass=mass, Ly=Ly)

    @classmethod
    def profile(cls, masses):
        masses = tuple(masses)
        return cls(Kind.PROFILE, len(masses), mass_profile=masses)

    @property
    def uniform(self):
        """True when the model is translation invariant (has a Bloch form)."""
        return self.kind is not Kind.PROFILE

    @property
    def ndim(self):
        return 2 if self.kind is Kind.CHERN2D else 1

    @property
    def n_sites(self):
        return self.L * (self.Ly or 1)

    @property
    def lattice_shape(self):
        return (self.L, self.Ly) if self.kind is Kind.CHERN2D else (self.L,)

    def site_masses(self):
        """Per-site mass along x (constant for uniform models)."""
        if self.kind is Kind.PROFILE:
            return np.asarray(self.mass_profile, dtype=float)
        return np.full(self.L, self.mass)

    def d_vectors(self, ky=None):
        """d-vectors on the full k-grid (1d) or on the kx-grid at fixed ``ky``.

        For a 2d model without ``ky`` the result has shape ``(L, Ly)``.
        """
        if not self.uniform:
            raise ValueError("profile models have no Bloch form")
        kx = momenta(self.L)
        if self.kind is Kind.CHAIN1D:
            return d_vector_1d(kx, self.mass)
        if ky is None:
            KX, KY = np.meshgrid(kx, momenta(self.Ly), indexing="ij")
            return d_vector_2d(KX, KY, self.mass)
        return d_vector_2d(kx, np.full_like(kx, ky), self.mass)


@dataclass(frozen=True)
class DVector:
    """Components of ``H = d0 + d.sigma``; fields may be scalars or arrays."""

    d0: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray

    @property
    def norm(self):
        return np.sqrt(np.asarray(self.d1) ** 2 + np.asarray(self.d2) ** 2 + np.asarray(self.d3) ** 2)

    def as_tuple(self):
        return (self.d0, self.d1, self.d2, self.d3)

    def hamiltonian(self):
        """Bloch matrices with shape ``(..., 2, 2)``."""
        d0, d1, d2, d3 = (np.asarray(c, dtype=float)[..., None, None] for c in self.as_tuple())
        return d0 * SIGMA_0 + d1 * SIGMA_X + d2 * SIGMA_Y + d3 * SIGMA_Z


@dataclass(frozen=True)
class BlochEigensystem:
    """Gauge-fixed eigenpairs of a two-band Bloch Hamiltonian.

    ``u_minus`` and ``u_plus`` have shape ``(..., 2)``; energies are
    ``omega_minus = d0 - |d|`` and ``omega_plus = d0 + |d|``.
    """

    omega_minus: np.ndarray
    omega_plus: np.ndarray
    u_minus: np.ndarray
    u_plus: np.ndarray
    gauge: Gauge


def momenta(L):
    """Allowed momenta ``2 pi n / L`` of a periodic chain of length ``L``."""
    return 2.0 * np.pi * np.arange(L) / L


def d_vector_1d(k, m):
    k = np.asarray(k, dtype=float)
    zero = np.zeros_like(k)
    return DVector(zero, np.sin(k), zero.copy(), m - np.cos(k))


def d_vector_2d(kx, ky, m):
    kx, ky = np.broadcast_arrays(np.asarray(kx, dtype=float), np.asarray(ky, dtype=float))
    return DVector(np.zeros_like(kx), np.sin(kx), np.sin(ky), m - np.cos(kx) - np.cos(ky))


def choose_gauge(d):
    """Pick the gauge whose denominator stays furthest from zero over ``d``."""
    norm = d.norm
    d3 = np.asarray(d.d3)
    return Gauge.A if np.min(norm + d3) > np.min(norm - d3) else Gauge.B


def bloch_eigensystem(d, gauge=Gauge.A):
    """Eigenvalues and gauge-fixed eigenvectors of ``d0 + d.sigma``.

    Works elementwise on array-valued d-vectors. The gauge denominator
    ``|d| +/- d3`` is evaluated without cancellation, so the eigenvectors stay
    accurate close to the singular line; exactly on it (``d1 = d2 = 0``) the
    k -> 0+ limit of the gauge is substituted.

    Raises
    ------
    GapClosed
        if ``|d| < 1e-12`` anywhere.
    GaugeSingular
        if the denominator vanishes while ``(d1, d2)`` is not negligible.
    """
    gauge = Gauge(gauge)
    d0, d1, d2, d3 = (np.asarray(c, dtype=float) for c in d.as_tuple())
    d0, d1, d2, d3 = np.broadcast_arrays(d0, d1, d2, d3)
    norm = np.sqrt(d1**2 + d2**2 + d3**2)
    if np.any(norm < GAP_TOL):
        raise GapClosed(f"|d| = {np.min(norm):.3e} below {GAP_TOL:.0e}")
    rho2 = d1**2 + d2**2
    sign = 1.0 if gauge is Gauge.A else -1.0
    s3 = sign * d3
    # |d| + s3, computed as rho^2 / (|d| - s3) when s3 < 0
    with np.errstate(divide="ignore", invalid="ignore"):
        denom_part = np.where(s3 >= 0, norm + s3, rho2 / (norm - s3))
    denom = 2.0 * norm * denom_part
    singular = denom < GAUGE_DENOM_TOL
    removable = singular & (np.sqrt(rho2) <= GAP_TOL * np.maximum(norm, 1.0))
    if np.any(singular & ~removable):
        raise GaugeSingular(f"gauge {gauge.value} denominator vanishes at a non-removable point")
    safe = np.where(singular, 1.0, denom)
    inv = 1.0 / np.sqrt(safe)
    z = d1 + 1j * d2
    if gauge is Gauge.A:
        u_plus = np.stack([denom_part * inv, z * inv], axis=-1)
        u_minus = np.stack([np.conj(z) * inv, -denom_part * inv], axis=-1)
        lim_plus, lim_minus = (0.0, 1.0), (1.0, 0.0)
    else:
        u_plus = np.stack([np.conj(z) * inv, denom_part * inv], axis=-1)
        u_minus = np.stack([-denom_part * inv, z * inv], axis=-1)
        lim_plus, lim_minus = (1.0, 0.0), (0.0, 1.0)
    if np.any(removable):
        u_plus[removable] = lim_plus
        u_minus[removable] = lim_minus
    return BlochEigensystem(d0 - norm, d0 + norm, u_minus, u_plus, gauge)


def _hop_x():
    return -0.5 * SIGMA_Z + SIGMA_X / 2j


def _hop_y():
    return -0.5 * SIGMA_Z + SIGMA_Y / 2j


def build_real_space_hamiltonian(spec):
    """Dense single-particle Hamiltonian of ``spec`` on the periodic lattice.

    On-site block ``m_l sz``; the block from site ``l`` to ``l+1`` is
    ``-sz/2 + sx/(2i)`` (``sy`` for the y-bond in 2d), i.e. the inverse
    Fourier transform of the Bloch d-vector. Returns a ``(2N, 2N)`` array.
    """
    n = spec.n_sites
    H = np.zeros((2 * n, 2 * n), dtype=complex)
    Ly = spec.Ly or 1
    masses = spec.site_masses()

    def idx(x, y=0):
        return (x % spec.L) * Ly + (y % Ly)

    bonds = [(_hop_x(), 1, 0)]
    if spec.kind is Kind.CHERN2D:
        bonds.append((_hop_y(), 0, 1))
    for x in range(spec.L):
        for y in range(Ly):
            s = idx(x, y)
            H[2 * s:2 * s + 2, 2 * s:2 * s + 2] += masses[x] * SIGMA_Z
            for block, dx, dy in bonds:
                t = idx(x + dx, y + dy)
                H[2 * s:2 * s + 2, 2 * t:2 * t + 2] += block
                H[2 * t:2 * t + 2, 2 * s:2 * s + 2] += block.conj().T
    return H
