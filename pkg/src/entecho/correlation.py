"""Dynamical subsystem correlation matrices after a sudden quench.

``C[(l, s), (m, s')](t) = <c^dag_{l s}(t) c_{m s'}(t)>`` for ``l, m`` in the
subsystem, evaluated in the ground state (T = 0) or thermal state of the
pre-quench Hamiltonian and evolved with the post-quench one. Four routes are
available:

``correlation_general``
    real-space diagonalisation of both Hamiltonians; works for anything.
``correlation_translation_invariant``
    closed-form Bloch expressions when both models are uniform.
``correlation_partial_ti``
    mixed real/k-space route when exactly one side breaks translation symmetry.
``correlation_momentum_resolved``
    the ``ky`` block of a 2d torus cut along x.

Every route reduces to the same structure: a matrix ``W(t)`` whose columns are
the (occupation-weighted) time-evolved pre-quench orbitals restricted to the
subsystem, with ``C = conj(W W^dag)``. Eigensystems are cached per protocol,
so sweeping a time grid only pays for the assembly.
"""
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from scipy.special import expit

from ._validation import check_positive_int, check_real
from .exceptions import DegenerateFermiLevel, DimensionMismatch, WrongShape
from .models import (
    Gauge,
    Kind,
    ModelSpec,
    bloch_eigensystem,
    build_real_space_hamiltonian,
    choose_gauge,
    momenta,
)

__all__ = [
    "QuenchProtocol",
    "CorrelationSnapshot",
    "Broken",
    "fermi_weights",
    "correlation_general",
    "correlation_translation_invariant",
    "correlation_partial_ti",
    "correlation_momentum_resolved",
    "correlation",
    "select_pathway",
]

FERMI_TOL = 1e-12


class Broken(str, Enum):
    PRE = "pre"
    POST = "post"


@dataclass(frozen=True)
class QuenchProtocol:
    """Pre-quench model, post-quench model, temperature and subsystem.

    The subsystem is the contiguous x-range ``[start, start + length)``; in 2d
    it spans every y. ``gauge=None`` selects the Bloch gauge automatically.
    """

    pre: ModelSpec
    post: ModelSpec
    temperature: float = 0.0
    subsystem: Tuple[int, int] = (0, 1)
    gauge: Optional[Gauge] = None

    chemical_potential = 0.0

    def __post_init__(self):
        if self.pre.lattice_shape != self.post.lattice_shape:
            raise DimensionMismatch(
                f"pre lattice {self.pre.lattice_shape} != post lattice {self.post.lattice_shape}"
            )
        object.__setattr__(
            self, "temperature", check_real(self.temperature, "temperature", nonnegative=True)
        )
        start, length = self.subsystem
        start = check_positive_int(start, "subsystem start", minimum=0)
        length = check_positive_int(length, "subsystem length", minimum=1)
        if length >= self.L:
            raise ValueError(f"subsystem length {length} must be < L = {self.L}")
        if start >= self.L:
            raise ValueError(f"subsystem start {start} must be < L = {self.L}")
        object.__setattr__(self, "subsystem", (start, length))
        if self.gauge is not None:
            object.__setattr__(self, "gauge", Gauge(self.gauge))

    @property
    def L(self):
        return self.pre.L

    @property
    def Ly(self):
        return self.pre.Ly

    @property
    def ndim(self):
        return self.pre.ndim

    @property
    def subsystem_length(self):
        return self.subsystem[1]

    @property
    def subsystem_x(self):
        """x coordinates of the subsystem, wrapping around the ring."""
        start, length = self.subsystem
        return (start + np.arange(length)) % self.L

    @property
    def omega_A(self):
        """Number of sites in the subsystem."""
        return self.subsystem_length * (self.Ly or 1)

    def basis_indices(self):
        """Indices of subsystem rows in the full site-major basis."""
        Ly = self.Ly or 1
        sites = (self.subsystem_x[:, None] * Ly + np.arange(Ly)[None, :]).ravel()
        return (2 * sites[:, None] + np.arange(2)[None, :]).ravel()

    def with_subsystem(self, start, length):
        return QuenchProtocol(self.pre, self.post, self.temperature, (start, length), self.gauge)

    def with_temperature(self, temperature):
        return QuenchProtocol(self.pre, self.post, temperature, self.subsystem, self.gauge)


@dataclass(frozen=True)
class CorrelationSnapshot:
    """Subsystem correlation matrix at one time (optionally one ``ky`` block)."""

    time: float
    matrix: np.ndarray = field(repr=False)
    ky: Optional[float] = None

    @property
    def dim(self):
        return self.matrix.shape[0]


def fermi_weights(energies, temperature, mu=0.0):
    """Fermi-Dirac occupations; a step function at ``temperature == 0``."""
    e = np.asarray(energies, dtype=float) - mu
    if temperature == 0:
        if np.any(np.abs(e) < FERMI_TOL):
            raise DegenerateFermiLevel(
                f"level within {FERMI_TOL:.0e} of the chemical potential at T=0"
            )
        return (e < 0).astype(float)
    return expit(-e / temperature)


def _gauge_for(protocol, d):
    return protocol.gauge if protocol.gauge is not None else choose_gauge(d)


def _bloch(protocol, spec, d):
    return bloch_eigensystem(d, _gauge_for(protocol, d))


def _conj_gram(W):
    return (W @ W.conj().T).conj()


class _OrbitalEngine:
    """Evolves weighted pre-quench orbitals restricted to the subsystem.

    ``W(t) = (A * exp(-i E t)) @ B`` with ``A`` the subsystem rows of the
    post-quench eigenvectors and ``B`` their overlaps with the weighted
    pre-quench orbitals.
    """

    def __init__(self, A, energies, B):
        self.A = A
        self.energies = energies
        self.B = B

    def orbitals(self, t):
        return (self.A * np.exp(-1j * self.energies * t)) @ self.B

    def matrix(self, t):
        return _conj_gram(self.orbitals(t))


class _BlochEngine:
    """Evolves Bloch orbitals ``exp(i k.r) v_kb`` restricted to the subsystem.

    ``phases[r, k]`` carries the plane-wave factor and normalisation, ``u`` the
    post-quench eigenvectors ``(K, 2 spin, 2 band)``, ``omega`` their energies
    ``(K, 2)`` and ``overlap[k, band_post, col]`` the weighted projections of
    the pre-quench orbitals onto them.

    With ``coherent=False`` every ``(k, col)`` pair is its own orbital (the
    pre-quench state is diagonal in k). With ``coherent=True`` column ``col``
    is a single orbital spread over all k, so the k-sum is taken coherently.
    """

    def __init__(self, phases, u, omega, overlap, coherent=False):
        self.phases = phases
        self.u = u
        self.omega = omega
        self.overlap = overlap
        self.coherent = coherent

    def orbitals(self, t):
        # coeff[k, s, col] = sum_b u[k, s, b] exp(-i w_kb t) overlap[k, b, col]
        coeff = np.einsum("ksb,kbc->ksc", self.u * np.exp(-1j * self.omega * t)[:, None, :], self.overlap)
        n_rows = self.phases.shape[0] * 2
        if self.coherent:
            return np.einsum("xk,ksc->xsc", self.phases, coeff).reshape(n_rows, -1)
        W = self.phases[:, None, :, None] * coeff.transpose(1, 0, 2)[None, :, :, :]
        return W.reshape(n_rows, -1)

    def matrix(self, t):
        return _conj_gram(self.orbitals(t))


def _eig_real_space(spec):
    H = build_real_space_hamiltonian(spec)
    return np.linalg.eigh(H)


def _weighted(vectors, energies, temperature):
    w = fermi_weights(energies, temperature)
    keep = w > 0
    return vectors[:, keep] * np.sqrt(w[keep])


@lru_cache(maxsize=32)
def _general_engine(protocol):
    eps, phi = _eig_real_space(protocol.pre)
    E, V = _eig_real_space(protocol.post)
    occ = _weighted(phi, eps, protocol.temperature)
    rows = protocol.basis_indices()
    return _OrbitalEngine(V[rows], E, V.conj().T @ occ)


def _bloch_data(protocol, d_pre, d_post):
    """Post eigenvectors (K, 2, 2), energies (K, 2) and weighted overlaps."""
    pre = _bloch(protocol, protocol.pre, d_pre)
    post = _bloch(protocol, protocol.post, d_post)
    v = np.stack([pre.u_minus, pre.u_plus], axis=-1)
    u = np.stack([post.u_minus, post.u_plus], axis=-1)
    eps = np.stack([pre.omega_minus, pre.omega_plus], axis=-1)
    omega = np.stack([post.omega_minus, post.omega_plus], axis=-1)
    w = fermi_weights(eps, protocol.temperature)
    # overlap[k, b_post, b_pre] = <u_{k b_post} | v_{k b_pre}> sqrt(n_F)
    overlap = np.einsum("ksa,ksb->kab", u.conj(), v) * np.sqrt(w)[:, None, :]
    if protocol.temperature == 0:
        overlap = overlap[:, :, :1]  # only the lower band is filled
    return u, omega, overlap


def _phases_1d(x, k, norm):
    return np.exp(1j * np.outer(x, k)) / np.sqrt(norm)


@lru_cache(maxsize=32)
def _ti_engine(protocol):
    if protocol.ndim == 1:
        k = momenta(protocol.L)
        u, omega, overlap = _bloch_data(protocol, protocol.pre.d_vectors(), protocol.post.d_vectors())
        phases = _phases_1d(protocol.subsystem_x, k, protocol.L)
        return _BlochEngine(phases, u, omega, overlap)
    Lx, Ly = protocol.L, protocol.Ly
    KX, KY = np.meshgrid(momenta(Lx), momenta(Ly), indexing="ij")
    d_pre = protocol.pre.d_vectors()
    d_post = protocol.post.d_vectors()
    flat = lambda d: type(d)(*(np.ravel(c) for c in d.as_tuple()))  # noqa: E731
    u, omega, overlap = _bloch_data(protocol, flat(d_pre), flat(d_post))
    X = np.repeat(protocol.subsystem_x, Ly)
    Y = np.tile(np.arange(Ly), protocol.subsystem_length)
    phases = np.exp(1j * (np.outer(X, KX.ravel()) + np.outer(Y, KY.ravel()))) / np.sqrt(Lx * Ly)
    return _BlochEngine(phases, u, omega, overlap)


@lru_cache(maxsize=512)
def _ky_engine(protocol, ky):
    k = momenta(protocol.L)
    u, omega, overlap = _bloch_data(protocol, protocol.pre.d_vectors(ky), protocol.post.d_vectors(ky))
    phases = _phases_1d(protocol.subsystem_x, k, protocol.L)
    return _BlochEngine(phases, u, omega, overlap)


@lru_cache(maxsize=32)
def _partial_engine(protocol, broken):
    k = momenta(protocol.L)
    L = protocol.L
    x = np.arange(L)
    # fourier[k, l] = exp(-i k l) / sqrt(L)
    fourier = np.exp(-1j * np.outer(k, x)) / np.sqrt(L)
    if broken is Broken.PRE:
        eps, phi = _eig_real_space(protocol.pre)
        occ = _weighted(phi, eps, protocol.temperature)
        occ_k = np.einsum("kl,lsc->ksc", fourier, occ.reshape(L, 2, -1))
        post = _bloch(protocol, protocol.post, protocol.post.d_vectors())
        u = np.stack([post.u_minus, post.u_plus], axis=-1)
        omega = np.stack([post.omega_minus, post.omega_plus], axis=-1)
        overlap = np.einsum("ksb,ksc->kbc", u.conj(), occ_k)
        phases = _phases_1d(protocol.subsystem_x, k, L)
        return _BlochEngine(phases, u, omega, overlap, coherent=True)
    pre = _bloch(protocol, protocol.pre, protocol.pre.d_vectors())
    v = np.stack([pre.u_minus, pre.u_plus], axis=-1)
    eps = np.stack([pre.omega_minus, pre.omega_plus], axis=-1)
    w = fermi_weights(eps, protocol.temperature)
    E, V = _eig_real_space(protocol.post)
    # psi_k[k, s, E] = sum_l exp(-i k l) psi^E(l, s) / sqrt(L)
    psi_k = np.einsum("kl,lse->kse", fourier, V.reshape(L, 2, -1))
    # <psi^E | phi_{k b}> = psi_k^dag v_kb
    B = np.einsum("kse,ksb->ekb", psi_k.conj(), v * np.sqrt(w)[:, None, :])
    B = B.reshape(V.shape[1], -1)[:, (w > 0).ravel()]
    return _OrbitalEngine(V[protocol.basis_indices()], E, B)


def _check_time(t):
    t = check_real(t, "t")
    return t


def correlation_general(protocol, t):
    """Subsystem correlation matrix from real-space diagonalisation."""
    t = _check_time(t)
    return CorrelationSnapshot(t, _general_engine(protocol).matrix(t))


def correlation_translation_invariant(protocol, t):
    """Subsystem correlation matrix from the Bloch-space closed form.

    Raises ``WrongShape`` unless both models are uniform.
    """
    if not (protocol.pre.uniform and protocol.post.uniform):
        raise WrongShape("translation-invariant route needs uniform pre and post models")
    t = _check_time(t)
    return CorrelationSnapshot(t, _ti_engine(protocol).matrix(t))


def correlation_partial_ti(protocol, t, broken):
    """Mixed real/k-space route; ``broken`` names the non-uniform side."""
    broken = Broken(broken)
    if protocol.ndim != 1:
        raise WrongShape("partial translation invariance is implemented for 1d models")
    if not protocol.pre.uniform and not protocol.post.uniform:
        raise WrongShape("both models break translation symmetry; use correlation_general")
    other = protocol.post if broken is Broken.PRE else protocol.pre
    if not other.uniform:
        raise WrongShape(f"broken={broken.value} but the {'post' if broken is Broken.PRE else 'pre'} model is non-uniform")
    t = _check_time(t)
    return CorrelationSnapshot(t, _partial_engine(protocol, broken).matrix(t))


def correlation_momentum_resolved(protocol, ky, t):
    """``2 L_A x 2 L_A`` correlation block at transverse momentum ``ky``."""
    if protocol.pre.kind is not Kind.CHERN2D:
        raise WrongShape("momentum-resolved route needs 2d Chern models")
    ky = float(ky)
    t = _check_time(t)
    return CorrelationSnapshot(t, _ky_engine(protocol, ky).matrix(t), ky=ky)


def select_pathway(protocol):
    """Cheapest route that applies: ``ti``, ``partial-pre``, ``partial-post`` or ``general``."""
    pre_u, post_u = protocol.pre.uniform, protocol.post.uniform
    if pre_u and post_u:
        return "ti"
    if pre_u:
        return "partial-post"
    if post_u:
        return "partial-pre"
    return "general"


def correlation(protocol, t, pathway="auto"):
    """Dispatch to a correlation route by name (``auto`` picks the cheapest)."""
    if pathway == "auto":
        pathway = select_pathway(protocol)
    if pathway == "ti":
        return correlation_translation_invariant(protocol, t)
    if pathway == "partial-pre":
        return correlation_partial_ti(protocol, t, Broken.PRE)
    if pathway == "partial-post":
        return correlation_partial_ti(protocol, t, Broken.POST)
    if pathway == "general":
        return correlation_general(protocol, t)
    raise ValueError(f"unknown pathway {pathway!r}")
