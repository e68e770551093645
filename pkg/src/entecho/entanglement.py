"""Entanglement spectrum, entanglement echo and derived observables.

For a Gaussian state the reduced density matrix of a subsystem is fixed by the
eigenpairs ``(xi_i, |xi_i>)`` of its correlation matrix. The entanglement ground
state is the Slater determinant of all levels with ``xi >= 1/2``, and the echo
between two times is the determinant of the overlaps of those levels.
"""
import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.special import xlogy

from ._validation import check_hermitian, check_positive_int
from .correlation import CorrelationSnapshot, correlation_momentum_resolved
from .exceptions import DimensionMismatch, EigenvalueOutOfRange, NumericalError
from .models import momenta

__all__ = [
    "EntanglementSnapshot",
    "EchoPoint",
    "entanglement_spectrum",
    "entanglement_echo",
    "echo_rate",
    "momentum_resolved_echo",
    "entanglement_entropy",
    "particle_number_variance",
    "EPS_DEG",
    "GAMMA_CAP",
]

EPS_DEG = 1e-9
CLAMP_TOL = 1e-9
GAMMA_CAP = 50.0
MAX_DEGENERATE = 10
MIDGAP_KEEP = 8


@dataclass(frozen=True)
class EntanglementSnapshot:
    """Sorted single-particle entanglement spectrum at one time.

    ``xs`` is descending; ``vectors[:, i]`` is the eigenvector of ``xs[i]`` with
    its largest-magnitude component made real and positive.
    """

    time: float
    xs: np.ndarray
    vectors: np.ndarray = field(repr=False)
    occupied_count: int
    degenerate: bool
    eps_deg: float = EPS_DEG
    ky: Optional[float] = None

    @property
    def dim(self):
        return self.xs.shape[0]

    @property
    def midgap_distance(self):
        """Distance of the level closest to the entanglement Fermi level 1/2."""
        return float(np.min(np.abs(self.xs - 0.5)))

    def count_near_half(self, tol):
        return int(np.sum(np.abs(self.xs - 0.5) < tol))

    def midgap_levels(self, n=MIDGAP_KEEP):
        """The ``n`` smallest distances ``|xi - 1/2|``, ascending."""
        return tuple(float(d) for d in np.sort(np.abs(self.xs - 0.5))[:n])

    def occupied_vectors(self):
        return self.vectors[:, : self.occupied_count]


@dataclass(frozen=True)
class EchoPoint:
    """Entanglement echo at one time.

    ``log_magnitude`` is kept separately so echoes far below double-precision
    range (large 2d subsystems) still yield finite rates.
    """

    time: float
    echo: complex
    log_magnitude: float
    rate: float
    degenerate_flag: bool = False
    omega_A: int = 1
    occupied_count: int = 0
    midgap_distance: float = np.inf
    midgap_levels: tuple = ()

    def count_near_half(self, tol):
        """Number of levels within ``tol`` of 1/2 (among the closest few)."""
        return int(sum(d < tol for d in self.midgap_levels))

    @property
    def magnitude(self):
        return float(np.exp(self.log_magnitude))

    @property
    def is_zero(self):
        return self.log_magnitude == -np.inf

    @property
    def phase(self):
        return float(np.angle(self.echo)) if not self.is_zero else 0.0


def _fix_phases(vectors):
    """Rotate every column so its largest-magnitude entry is real positive."""
    if vectors.size == 0:
        return vectors
    idx = np.argmax(np.abs(vectors), axis=0)
    pivot = vectors[idx, np.arange(vectors.shape[1])]
    return vectors * (np.abs(pivot) / pivot)[None, :]


def entanglement_spectrum(snapshot, eps_deg=EPS_DEG):
    """Diagonalise a correlation snapshot.

    Eigenvalues within ``1e-9`` outside ``[0, 1]`` are clamped; anything further
    out raises ``EigenvalueOutOfRange``. Levels at exactly 1/2 count as occupied.
    """
    C = check_hermitian(snapshot.matrix, atol=1e-10, name="correlation matrix")
    C = 0.5 * (C + C.conj().T)
    xs, vecs = np.linalg.eigh(C)
    if xs.size and (xs[0] < -CLAMP_TOL or xs[-1] > 1 + CLAMP_TOL):
        raise EigenvalueOutOfRange(f"spectrum [{xs[0]:.3e}, {xs[-1]:.3e}] outside [0, 1]")
    xs = np.clip(xs[::-1], 0.0, 1.0)
    vecs = _fix_phases(vecs[:, ::-1])
    occupied = int(np.sum(xs >= 0.5))
    degenerate = bool(np.any(np.abs(xs - 0.5) < eps_deg))
    return EntanglementSnapshot(
        time=snapshot.time,
        xs=xs,
        vectors=vecs,
        occupied_count=occupied,
        degenerate=degenerate,
        eps_deg=eps_deg,
        ky=getattr(snapshot, "ky", None),
    )


def _slater_overlap(left, right):
    """``(phase, log|det|)`` of ``det(left^dag right)``; square blocks only."""
    if left.shape[1] != right.shape[1]:
        return 0.0, -np.inf
    if left.shape[1] == 0:
        return 1.0, 0.0
    sign, logabs = np.linalg.slogdet(left.conj().T @ right)
    return complex(sign), float(logabs)


def _manifold_levels(snap, n_free):
    """Firm occupied levels and the ``n_free`` levels closest to 1/2."""
    order = np.argsort(np.abs(snap.xs - 0.5), kind="stable")
    free = np.sort(order[:n_free])
    firm = np.setdiff1d(np.flatnonzero(snap.xs >= 0.5), free)
    return firm, free


def _manifold_overlap(initial, current, n_free):
    """Geometric mean of the principal cosines between two ground-state manifolds.

    Each manifold is spanned by the Slater determinants ``firm + S`` for every
    subset ``S`` of its ``n_free`` free levels; both have dimension
    ``2**n_free``. With ``n_free = 0`` this is the plain determinant overlap.
    """
    if n_free > MAX_DEGENERATE:
        raise NumericalError(f"too many degenerate entanglement levels ({n_free})")
    f0, d0 = _manifold_levels(initial, n_free)
    f1, d1 = _manifold_levels(current, n_free)

    def states(snap, firm, free):
        out = []
        for r in range(n_free + 1):
            for combo in itertools.combinations(free, r):
                out.append(snap.vectors[:, np.concatenate([firm, np.asarray(combo, dtype=int)])])
        return out

    left, right = states(initial, f0, d0), states(current, f1, d1)
    O = np.zeros((len(left), len(right)), dtype=complex)
    for i, a in enumerate(left):
        for j, b in enumerate(right):
            if a.shape[1] == b.shape[1]:
                O[i, j] = np.linalg.det(a.conj().T @ b) if a.shape[1] else 1.0
    sv = np.linalg.svd(O, compute_uv=False)
    if np.any(sv == 0):
        return -np.inf
    return float(np.mean(np.log(sv)))


def echo_rate(point, omega_A):
    """``-ln|E|^2 / omega_A``; exact zeros map to ``GAMMA_CAP``."""
    omega_A = check_positive_int(omega_A, "omega_A")
    log_mag = point.log_magnitude if isinstance(point, EchoPoint) else np.log(abs(point))
    if log_mag == -np.inf:
        return GAMMA_CAP
    return float(-2.0 * log_mag / omega_A)


def _make_point(time, echo, log_mag, omega_A, current, degenerate):
    rate = GAMMA_CAP if log_mag == -np.inf else float(-2.0 * log_mag / omega_A)
    return EchoPoint(
        time=time,
        echo=echo,
        log_magnitude=log_mag,
        rate=rate,
        degenerate_flag=degenerate,
        omega_A=omega_A,
        occupied_count=current.occupied_count,
        midgap_distance=current.midgap_distance,
        midgap_levels=current.midgap_levels(),
    )


def entanglement_echo(initial, current, omega_A=None):
    """Overlap of the entanglement ground states of two snapshots.

    Non-degenerate case: ``det <xi_i(0)|xi_j(t)>`` over the levels with
    ``xi >= 1/2``; exactly 0 when the occupied counts differ.

    If the initial snapshot has ``n`` levels within ``eps_deg`` of 1/2, its
    ground state is a ``2**n``-fold manifold. The current manifold is built
    from the ``n`` levels closest to 1/2 at time ``t``, and the echo magnitude
    is the geometric mean of the principal cosines between the two manifolds.
    Its phase is reported as 0.

    ``omega_A`` defaults to the number of sites of the block (``dim / 2``).
    """
    if initial.dim != current.dim:
        raise DimensionMismatch(f"snapshot dimensions differ: {initial.dim} vs {current.dim}")
    if omega_A is None:
        omega_A = max(initial.dim // 2, 1)
    flagged = initial.degenerate or current.degenerate
    n_free = int(np.sum(np.abs(initial.xs - 0.5) < initial.eps_deg))
    if n_free:
        log_mag = _manifold_overlap(initial, current, n_free)
        echo = 0j if log_mag == -np.inf else complex(np.exp(log_mag))
        return _make_point(current.time, echo, log_mag, omega_A, current, flagged)
    phase, log_mag = _slater_overlap(initial.occupied_vectors(), current.occupied_vectors())
    echo = 0j if log_mag == -np.inf else phase * np.exp(log_mag)
    return _make_point(current.time, complex(echo), log_mag, omega_A, current, flagged)


@lru_cache(maxsize=512)
def _initial_block(protocol, ky, eps_deg):
    return entanglement_spectrum(correlation_momentum_resolved(protocol, ky, 0.0), eps_deg)


def momentum_resolved_echo(protocol, t, eps_deg=EPS_DEG, with_spectra=False):
    """Per-``ky`` echoes of a 2d quench and their product.

    Returns ``(blocks, total)`` where ``blocks`` is a list of ``(ky, EchoPoint)``
    (each block rate normalised by ``L_A``) and ``total`` uses
    ``omega_A = L_A * Ly``. With ``with_spectra`` a third element lists the
    current ``EntanglementSnapshot`` of every block.
    """
    blocks, spectra = [], []
    log_total, phase_total, degenerate = 0.0, 1.0 + 0j, False
    for ky in momenta(protocol.Ly):
        init = _initial_block(protocol, float(ky), eps_deg)
        cur = entanglement_spectrum(correlation_momentum_resolved(protocol, ky, t), eps_deg)
        point = entanglement_echo(init, cur, omega_A=protocol.subsystem_length)
        blocks.append((float(ky), point))
        spectra.append(cur)
        log_total += point.log_magnitude
        phase_total *= np.exp(1j * point.phase)
        degenerate |= point.degenerate_flag
    omega = protocol.omega_A
    echo = 0j if log_total == -np.inf else phase_total * np.exp(log_total)
    rate = GAMMA_CAP if log_total == -np.inf else float(-2.0 * log_total / omega)
    total = EchoPoint(
        time=float(t),
        echo=complex(echo),
        log_magnitude=float(log_total),
        rate=rate,
        degenerate_flag=degenerate,
        omega_A=omega,
        occupied_count=sum(s.occupied_count for s in spectra),
        midgap_distance=min(s.midgap_distance for s in spectra),
        midgap_levels=tuple(sorted(d for s in spectra for d in s.midgap_levels()))[:MIDGAP_KEEP],
    )
    if with_spectra:
        return blocks, total, spectra
    return blocks, total


def entanglement_entropy(snapshot):
    """Von Neumann entropy (natural log) from the occupation spectrum."""
    xs = snapshot.xs if isinstance(snapshot, EntanglementSnapshot) else np.asarray(snapshot)
    return float(-np.sum(xlogy(xs, xs) + xlogy(1.0 - xs, 1.0 - xs)))


def particle_number_variance(snapshot):
    """Variance of the subsystem particle number, ``sum_i xi_i (1 - xi_i)``."""
    xs = snapshot.xs if isinstance(snapshot, EntanglementSnapshot) else np.asarray(snapshot)
    return float(np.sum(xs - xs**2))
