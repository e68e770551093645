"""Loschmidt amplitude and rate function of the whole system at T = 0.

Two routes: the determinant of the occupied-orbital return matrix (any
model), and the Bloch product over momenta (uniform models only).
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._validation import check_real
from .correlation import fermi_weights
from .exceptions import GapClosed, WrongShape
from .models import GAP_TOL, build_real_space_hamiltonian

__all__ = ["LoschmidtPoint", "loschmidt_general", "loschmidt_product", "critical_momenta"]


@dataclass(frozen=True)
class LoschmidtPoint:
    time: float
    amplitude: complex
    log_magnitude: float
    rate: float

    @property
    def magnitude(self):
        return float(np.exp(self.log_magnitude))


def _point(t, phase, log_mag, volume):
    amp = 0j if log_mag == -np.inf else phase * np.exp(log_mag)
    rate = np.inf if log_mag == -np.inf else -2.0 * log_mag / volume
    return LoschmidtPoint(t, complex(amp), float(log_mag), float(rate))


def _require_zero_temperature(protocol):
    if protocol.temperature != 0:
        raise WrongShape("the Loschmidt echo is only defined here for T = 0 initial states")


@lru_cache(maxsize=32)
def _return_engine(protocol):
    eps, phi = np.linalg.eigh(build_real_space_hamiltonian(protocol.pre))
    occ = phi[:, fermi_weights(eps, 0.0) > 0]
    E, V = np.linalg.eigh(build_real_space_hamiltonian(protocol.post))
    return V.conj().T @ occ, E


def loschmidt_general(protocol, t):
    """``det A`` with ``A_ij = sum_E <eps_i|E><E|eps_j> exp(-i E t)``."""
    _require_zero_temperature(protocol)
    t = check_real(t, "t")
    P, E = _return_engine(protocol)
    A = P.conj().T @ (np.exp(-1j * E * t)[:, None] * P)
    sign, logabs = np.linalg.slogdet(A)
    return _point(t, sign, logabs, protocol.pre.n_sites)


def _bloch_angles(protocol):
    if not (protocol.pre.uniform and protocol.post.uniform):
        raise WrongShape("product formula needs uniform pre and post models")
    di, df = protocol.pre.d_vectors(), protocol.post.d_vectors()
    ni, nf = di.norm, df.norm
    if np.min(ni) < GAP_TOL or np.min(nf) < GAP_TOL:
        raise GapClosed("|d| vanishes on the momentum grid")
    cos_theta = (di.d1 * df.d1 + di.d2 * df.d2 + di.d3 * df.d3) / (ni * nf)
    return np.ravel(nf), np.ravel(cos_theta), np.ravel(df.d0)


def loschmidt_product(protocol, t):
    """``prod_k [cos(d_k t) + i sin(d_k t) cos theta_k]`` over the k-grid.

    Accumulated as a sum of logs so large grids do not underflow. A nonzero
    post-quench ``d0`` contributes the extra phase ``exp(-i d0 t)``.
    """
    _require_zero_temperature(protocol)
    t = check_real(t, "t")
    d, cos_theta, d0 = _bloch_angles(protocol)
    factors = (np.cos(d * t) + 1j * np.sin(d * t) * cos_theta) * np.exp(-1j * d0 * t)
    mags = np.abs(factors)
    if np.any(mags == 0):
        return _point(t, 0.0, -np.inf, protocol.pre.n_sites)
    phase = np.exp(1j * np.sum(np.angle(factors)))
    return _point(t, phase, float(np.sum(np.log(mags))), protocol.pre.n_sites)


def critical_momenta(protocol):
    """Grid momenta bracketing ``cos theta_k = 0`` (sign changes), 1d only."""
    d, cos_theta, _ = _bloch_angles(protocol)
    change = np.flatnonzero(np.sign(cos_theta) != np.sign(np.roll(cos_theta, -1)))
    return change, d, cos_theta
