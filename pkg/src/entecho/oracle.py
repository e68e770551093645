"""Exact many-body reference for small lattices.

States live in the fixed-particle-number sector of ``2L`` fermionic modes
(mode ``2*site + spin``). A basis state is a bitmask ``S`` and stands for
``c+_{j1} c+_{j2} ... |0>`` with ``j1 < j2 < ...``. Nothing here uses the
correlation-matrix formalism: states are built, evolved and Schmidt-decomposed
directly in Fock space.
"""
import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._validation import check_positive_int, check_real
from .correlation import fermi_weights
from .exceptions import DimensionMismatch, SectorTooLarge
from .models import build_real_space_hamiltonian

__all__ = [
    "FockState",
    "SchmidtDecomposition",
    "MAX_MODES",
    "slater_state",
    "build_ground_state",
    "evolve",
    "schmidt",
    "oracle_echo",
    "oracle_manifold_echo",
    "one_body_density",
    "number_variance",
    "energy",
]

MAX_MODES = 16

# bit counts of every mask the oracle can produce
_POPCOUNT = np.zeros(1 << MAX_MODES, dtype=np.int64)
for _b in range(MAX_MODES):
    _POPCOUNT[1 << _b: 1 << (_b + 1)] = _POPCOUNT[: 1 << _b] + 1


def _popcount(masks):
    return _POPCOUNT[np.asarray(masks, dtype=np.int64)]


@lru_cache(maxsize=16)
def sector_basis(n_modes, n_particles):
    """All ``n_particles``-subsets of ``n_modes`` modes as ascending bitmasks."""
    if n_modes > MAX_MODES:
        raise SectorTooLarge(f"{n_modes} modes exceeds the oracle limit of {MAX_MODES}")
    if not 0 <= n_particles <= n_modes:
        raise ValueError(f"cannot place {n_particles} particles in {n_modes} modes")
    masks = [sum(1 << j for j in combo) for combo in itertools.combinations(range(n_modes), n_particles)]
    basis = np.array(sorted(masks), dtype=np.int64)
    basis.setflags(write=False)
    return basis


def _occupied_modes(basis, n_modes):
    """``(dim, N)`` array of the occupied mode indices of each mask, ascending."""
    bits = (basis[:, None] >> np.arange(n_modes)[None, :]) & 1
    return np.nonzero(bits)[1].reshape(basis.size, -1)


@dataclass(frozen=True)
class FockState:
    """Amplitudes over the ascending bitmask basis of one particle-number sector."""

    amplitudes: np.ndarray
    n_modes: int
    n_particles: int

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.basis.size,):
            raise DimensionMismatch(f"expected {self.basis.size} amplitudes, got {amps.shape}")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def basis(self):
        return sector_basis(self.n_modes, self.n_particles)

    @property
    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other):
        """``<self|other>``."""
        if (self.n_modes, self.n_particles) != (other.n_modes, other.n_particles):
            return 0j
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def slater_state(orbitals):
    """Fock expansion of ``prod_a (sum_j orbitals[j, a] c+_j) |0>``.

    The amplitude on mask ``S`` is the minor ``det(orbitals[S, :])``.
    """
    orbitals = np.asarray(orbitals, dtype=complex)
    n_modes, n = orbitals.shape
    basis = sector_basis(n_modes, n)
    if n == 0:
        return FockState(np.ones(1), n_modes, 0)
    occ = _occupied_modes(basis, n_modes)
    return FockState(np.linalg.det(orbitals[occ, :]), n_modes, n)


def build_ground_state(spec, N=None):
    """Slater ground state filling the ``N`` lowest orbitals (default: half filling).

    At half filling the negative-energy orbitals are selected through the same
    Fermi step as the correlation routes, so a zero mode raises
    ``DegenerateFermiLevel``.
    """
    n_modes = 2 * spec.n_sites
    if n_modes > MAX_MODES:
        raise SectorTooLarge(f"{n_modes} modes exceeds the oracle limit of {MAX_MODES}")
    eps, phi = np.linalg.eigh(build_real_space_hamiltonian(spec))
    if N is None or N == spec.n_sites:
        occ = phi[:, fermi_weights(eps, 0.0) > 0]
    else:
        N = check_positive_int(N, "N", minimum=0)
        occ = phi[:, :N]
    return slater_state(occ)


def _givens_sequence(U):
    """Adjacent rotations ``(p, g)`` and phases ``D`` with ``U = G_1 G_2 ... G_k D``.

    ``g`` acts on modes ``(p, p + 1)``. Found by zeroing the sub-diagonal of
    ``U`` column by column with left rotations on adjacent rows.
    """
    U = np.array(U, dtype=complex)
    n = U.shape[0]
    rotations = []
    for j in range(n - 1):
        for i in range(n - 1, j, -1):
            a, b = U[i - 1, j], U[i, j]
            r = np.hypot(abs(a), abs(b))
            if abs(b) < 1e-300:
                continue
            c, s = a / r, b / r
            # g^dag maps (a, b) to (r, 0); g is unitary
            g = np.array([[c, -np.conj(s)], [s, np.conj(c)]])
            U[[i - 1, i], :] = g.conj().T @ U[[i - 1, i], :]
            rotations.append((i - 1, g))
    return rotations, np.diag(U).copy()


def _apply_rotation(amps, basis, p, g):
    """Second-quantised action of the 2x2 unitary ``g`` on modes ``p, p+1``."""
    bp, bq = 1 << p, 1 << (p + 1)
    has_p = (basis & bp) != 0
    has_q = (basis & bq) != 0
    out = amps.copy()
    both = has_p & has_q
    out[both] *= np.linalg.det(g)
    only_p = np.flatnonzero(has_p & ~has_q)
    # partner of S (p occupied) is S with p moved to p+1: adjacent modes, no sign
    partner = np.searchsorted(basis, basis[only_p] - bp + bq)
    x, y = amps[only_p], amps[partner]
    out[only_p] = g[0, 0] * x + g[0, 1] * y
    out[partner] = g[1, 0] * x + g[1, 1] * y
    return out


def _apply_unitary(state, U):
    rotations, phases = _givens_sequence(U)
    basis = state.basis
    occ = _occupied_modes(basis, state.n_modes)
    amps = state.amplitudes * (np.prod(phases[occ], axis=1) if state.n_particles else 1.0)
    for p, g in reversed(rotations):
        amps = _apply_rotation(amps, basis, p, g)
    return FockState(amps, state.n_modes, state.n_particles)


@lru_cache(maxsize=16)
def _post_eigensystem(post):
    return np.linalg.eigh(build_real_space_hamiltonian(post))


def evolve(state, post, t):
    """``exp(-i H_post t) |state>`` for the quadratic post-quench Hamiltonian.

    The state is rotated into the post-quench orbital basis, each basis state
    is phased by ``exp(-i t sum E)`` over its occupied orbitals, and the state
    is rotated back.
    """
    t = check_real(t, "t")
    if 2 * post.n_sites != state.n_modes:
        raise DimensionMismatch("post-quench model does not match the state's mode count")
    E, V = _post_eigensystem(post)
    rotated = _apply_unitary(state, V.conj().T)
    occ = _occupied_modes(rotated.basis, rotated.n_modes)
    phased = rotated.amplitudes * np.exp(-1j * t * E[occ].sum(axis=1)) if state.n_particles else rotated.amplitudes
    return _apply_unitary(FockState(phased, state.n_modes, state.n_particles), V)


def one_body_density(state):
    """``rho[a, b] = <c+_a c_b>`` over all modes."""
    n, basis, amps = state.n_modes, state.basis, state.amplitudes
    prob = np.abs(amps) ** 2
    rho = np.zeros((n, n), dtype=complex)
    for b in range(n):
        src = np.flatnonzero(basis & (1 << b))
        for a in range(n):
            if a == b:
                rho[a, a] = prob[src].sum()
                continue
            keep = src[(basis[src] & (1 << a)) == 0]
            if keep.size == 0:
                continue
            removed = basis[keep] ^ (1 << b)
            target = removed | (1 << a)
            # c_b passes the occupied modes below b; c+_a those below a
            below_b = _popcount(basis[keep] & ((1 << b) - 1))
            below_a = _popcount(removed & ((1 << a) - 1))
            sign = 1 - 2 * ((below_a + below_b) & 1)
            rho[a, b] = np.sum(np.conj(amps[np.searchsorted(basis, target)]) * sign * amps[keep])
    return rho


def _mode_mask(sites):
    return sum(3 << (2 * int(s)) for s in sites)


def number_variance(state, sites):
    """``<N_A^2> - <N_A>^2`` for the particle number on ``sites``."""
    n_a = _popcount(state.basis & _mode_mask(sites)).astype(float)
    prob = np.abs(state.amplitudes) ** 2
    mean = float(np.sum(prob * n_a))
    return float(np.sum(prob * n_a**2) - mean**2)


def energy(state, spec):
    """``<H>`` of the quadratic Hamiltonian of ``spec``."""
    h = build_real_space_hamiltonian(spec)
    return float(np.real(np.sum(h * one_body_density(state))))


@dataclass(frozen=True)
class SchmidtDecomposition:
    """Schmidt values (descending) with lazily materialised vectors.

    ``sectors[s] = (a_masks, U, b_masks, Vh)`` is the SVD of the block with a
    fixed particle number on A; ``index[i] = (s, col)`` locates the ``i``-th
    value. Vectors are returned dense over the local Fock space of A (or B),
    whose basis is the bitmask over the region's modes in ascending order.
    """

    values: np.ndarray
    a_modes: tuple
    b_modes: tuple
    sectors: list = field(repr=False)
    index: list = field(repr=False)

    @property
    def probabilities(self):
        return self.values**2

    def entropy(self):
        p = self.probabilities
        p = p[p > 0]
        return float(-np.sum(p * np.log(p)))

    def left_vector(self, i):
        s, col = self.index[i]
        a_masks, U, _, _ = self.sectors[s]
        out = np.zeros(1 << len(self.a_modes), dtype=complex)
        out[a_masks] = U[:, col]
        return out

    def right_vector(self, i):
        s, col = self.index[i]
        _, _, b_masks, Vh = self.sectors[s]
        out = np.zeros(1 << len(self.b_modes), dtype=complex)
        out[b_masks] = Vh[col, :]
        return out


def _compress(masks, modes):
    """Re-index the bits of ``masks`` listed in ``modes`` to positions 0, 1, ..."""
    out = np.zeros_like(masks)
    for k, m in enumerate(modes):
        out |= ((masks >> m) & 1) << k
    return out


def schmidt(state, cut, order="A-first"):
    """Schmidt decomposition across a site bipartition.

    ``cut`` is either an integer (A = sites ``0 .. cut-1``) or an iterable of
    site indices forming A. Each basis state is rewritten as
    ``sign * (prod_A c+)(prod_B c+)|0>`` (``order="A-first"``) or with B first;
    the sign is the parity of the number of transpositions needed, counted as
    occupied B modes below each occupied A mode (A-first) or the reverse.
    """
    n_sites = state.n_modes // 2
    sites = range(cut) if isinstance(cut, (int, np.integer)) else sorted(set(int(s) for s in cut))
    sites = list(sites)
    if not sites or len(sites) >= n_sites or min(sites) < 0 or max(sites) >= n_sites:
        raise ValueError(f"subsystem {sites} is not a proper part of {n_sites} sites")
    if order not in ("A-first", "B-first"):
        raise ValueError("order must be 'A-first' or 'B-first'")
    a_modes = tuple(m for s in sites for m in (2 * s, 2 * s + 1))
    b_modes = tuple(m for m in range(state.n_modes) if m not in a_modes)
    basis, amps = state.basis, state.amplitudes
    a_part = basis & _mode_mask(sites)
    b_part = basis ^ a_part
    first, second = (a_modes, b_modes) if order == "A-first" else (b_modes, a_modes)
    first_bits = a_part if order == "A-first" else b_part
    second_bits = b_part if order == "A-first" else a_part
    swaps = np.zeros(basis.size, dtype=np.int64)
    for m in first:
        occupied = (first_bits >> m) & 1
        swaps += occupied * _popcount(second_bits & ((1 << m) - 1))
    signed = amps * (1 - 2 * (swaps & 1))
    a_local, b_local = _compress(a_part, a_modes), _compress(b_part, b_modes)
    n_a = _popcount(a_part)
    sectors, vals, index = [], [], []
    for n in np.unique(n_a):
        sel = np.flatnonzero(n_a == n)
        a_keys, a_inv = np.unique(a_local[sel], return_inverse=True)
        b_keys, b_inv = np.unique(b_local[sel], return_inverse=True)
        M = np.zeros((a_keys.size, b_keys.size), dtype=complex)
        M[a_inv, b_inv] = signed[sel]
        U, s, Vh = np.linalg.svd(M, full_matrices=False)
        sectors.append((a_keys, U, b_keys, Vh))
        for col, v in enumerate(s):
            vals.append(v)
            index.append((len(sectors) - 1, col))
    order_idx = np.argsort(-np.asarray(vals), kind="stable")
    return SchmidtDecomposition(
        values=np.asarray(vals)[order_idx],
        a_modes=a_modes,
        b_modes=b_modes,
        sectors=sectors,
        index=[index[i] for i in order_idx],
    )


def oracle_echo(initial, current, eps_deg=1e-9):
    """``|<lambda_0(0)|lambda_0(t)>|`` from the top Schmidt vectors.

    When the top initial value is degenerate within ``eps_deg`` the result is
    the norm of the projection of ``|lambda_0(t)>`` onto the whole degenerate
    initial subspace.
    """
    if initial.a_modes != current.a_modes:
        raise DimensionMismatch("Schmidt decompositions use different cuts")
    top = initial.values[0]
    k = int(np.sum(np.abs(initial.values - top) < eps_deg))
    now = current.left_vector(0)
    overlaps = [np.vdot(initial.left_vector(i), now) for i in range(k)]
    return float(np.sqrt(np.sum(np.abs(overlaps) ** 2)))


def _top_subspace(decomp, eps_deg):
    k = int(np.sum(np.abs(decomp.values - decomp.values[0]) < eps_deg))
    return np.stack([decomp.left_vector(i) for i in range(k)], axis=1)


def oracle_manifold_echo(initial, current, eps_deg=1e-9):
    """Geometric mean of the principal cosines between the top Schmidt subspaces.

    Matches the degenerate-case convention of
    :func:`entecho.entanglement.entanglement_echo`; reduces to
    :func:`oracle_echo` when both tops are non-degenerate.
    """
    if initial.a_modes != current.a_modes:
        raise DimensionMismatch("Schmidt decompositions use different cuts")
    P0, P1 = _top_subspace(initial, eps_deg), _top_subspace(current, eps_deg)
    if P0.shape[1] != P1.shape[1]:
        return 0.0
    cos = np.linalg.svd(P0.conj().T @ P1, compute_uv=False)
    if np.any(cos == 0):
        return 0.0
    return float(np.exp(np.mean(np.log(cos))))
