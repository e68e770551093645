"""Time series of echo-derived observables on a time grid.

A :class:`SeriesBundle` holds one record per grid time for a single echo
(a 1d subsystem, or one ``ky`` block / the product echo in 2d). The builders
here evaluate the grid through a bounded thread pool and merge results in grid
order, so output never depends on scheduling.
"""
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ._validation import as_time_array
from .correlation import correlation, correlation_momentum_resolved
from .entanglement import (
    EPS_DEG,
    GAMMA_CAP,
    MIDGAP_KEEP,
    EchoPoint,
    entanglement_echo,
    entanglement_entropy,
    entanglement_spectrum,
    particle_number_variance,
)
from .exceptions import NumericalError
from .loschmidt import loschmidt_general, loschmidt_product
from .models import momenta

__all__ = ["SeriesBundle", "EchoEvaluator", "BlockEvaluator", "build_series", "build_series_2d"]


@dataclass
class SeriesBundle:
    """Per-time records of one echo plus its spectrum and detected transitions.

    ``spectra[i]`` is the descending ``xi`` array at ``times[i]``. ``lambda_rate``
    is ``None`` unless the Loschmidt rate was requested.
    """

    times: np.ndarray
    points: list
    entropy: np.ndarray
    variance: np.ndarray
    spectra: List[np.ndarray] = field(repr=False)
    lambda_rate: Optional[np.ndarray] = None
    ky: Optional[float] = None
    label: str = ""
    transitions: list = field(default_factory=list)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or np.any(np.diff(self.times) <= 0):
            raise ValueError("series grid must be strictly increasing")
        if len(self.points) != self.times.size:
            raise ValueError("one echo record per grid time is required")

    def __len__(self):
        return self.times.size

    @property
    def gamma(self):
        return np.array([p.rate for p in self.points])

    @property
    def echo_mag(self):
        return np.array([p.magnitude for p in self.points])

    @property
    def echo_phase(self):
        return np.array([p.phase for p in self.points])

    @property
    def echo_zero(self):
        return np.array([p.is_zero for p in self.points])

    @property
    def occupied_count(self):
        return np.array([p.occupied_count for p in self.points])

    @property
    def degenerate(self):
        return np.array([p.degenerate_flag for p in self.points])

    @property
    def step(self):
        return float(np.median(np.diff(self.times))) if self.times.size > 1 else 0.0


@contextmanager
def _at_time(t, ky=None):
    """Re-raise numerical failures with the offending time attached."""
    try:
        yield
    except NumericalError as exc:
        where = f"t={float(t)!r}" + ("" if ky is None else f", ky={ky!r}")
        raise type(exc)(f"{where}: {exc}") from exc


class EchoEvaluator:
    """Callable ``t -> (EchoPoint, EntanglementSnapshot)`` for a 1d protocol.

    The initial snapshot is computed once. Calling with a bare time returns
    just the ``EchoPoint``, which is what the transition detector expects.
    """

    def __init__(self, protocol, pathway="auto", eps_deg=EPS_DEG):
        self.protocol = protocol
        self.pathway = pathway
        self.eps_deg = eps_deg
        with _at_time(0.0):
            self.initial = entanglement_spectrum(correlation(protocol, 0.0, pathway), eps_deg)

    def evaluate(self, t):
        with _at_time(t):
            snap = entanglement_spectrum(correlation(self.protocol, t, self.pathway), self.eps_deg)
            return entanglement_echo(self.initial, snap), snap

    def __call__(self, t):
        return self.evaluate(t)[0]


class BlockEvaluator(EchoEvaluator):
    """The same for one ``ky`` block of a 2d protocol (rates per ``L_A``)."""

    def __init__(self, protocol, ky, eps_deg=EPS_DEG):
        self.protocol = protocol
        self.ky = float(ky)
        self.eps_deg = eps_deg
        with _at_time(0.0, self.ky):
            self.initial = entanglement_spectrum(correlation_momentum_resolved(protocol, self.ky, 0.0), eps_deg)

    def evaluate(self, t):
        with _at_time(t, self.ky):
            snap = entanglement_spectrum(correlation_momentum_resolved(self.protocol, self.ky, t), self.eps_deg)
            return entanglement_echo(self.initial, snap, omega_A=self.protocol.subsystem_length), snap


def _map(fn, items, threads):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _loschmidt_rates(protocol, times, threads):
    if protocol.temperature != 0:
        return None
    fn = loschmidt_product if (protocol.pre.uniform and protocol.post.uniform) else loschmidt_general
    return np.array([p.rate for p in _map(lambda t: fn(protocol, t), times, threads)])


def _bundle(times, results, lam, ky=None, label=""):
    points = [r[0] for r in results]
    snaps = [r[1] for r in results]
    return SeriesBundle(
        times=times,
        points=points,
        entropy=np.array([entanglement_entropy(s) for s in snaps]),
        variance=np.array([particle_number_variance(s) for s in snaps]),
        spectra=[s.xs for s in snaps],
        lambda_rate=lam,
        ky=ky,
        label=label,
    )


def build_series(protocol, times, pathway="auto", threads=1, loschmidt=False, eps_deg=EPS_DEG, label=""):
    """Echo, entropy, variance and spectrum of a 1d protocol on ``times``.

    Returns ``(bundle, evaluator)``; the evaluator is reused to refine
    transition times off the grid.
    """
    times, _ = as_time_array(times)
    ev = EchoEvaluator(protocol, pathway, eps_deg)
    results = _map(ev.evaluate, times, threads)
    lam = _loschmidt_rates(protocol, times, threads) if loschmidt else None
    return _bundle(times, results, lam, label=label), ev


def build_series_2d(protocol, times, threads=1, loschmidt=False, eps_deg=EPS_DEG):
    """Per-``ky`` bundles and the product-echo bundle of a 2d protocol.

    Returns ``(blocks, total)`` where ``blocks`` is a list of
    ``(bundle, evaluator)`` in ``ky`` order. The total rate uses
    ``omega_A = L_A * Ly``; its spectrum is the union of the block spectra.
    """
    times, _ = as_time_array(times)
    evs = [BlockEvaluator(protocol, ky, eps_deg) for ky in momenta(protocol.Ly)]
    per_block = _map(lambda ev: [ev.evaluate(t) for t in times], evs, threads)
    blocks = [(_bundle(times, res, None, ky=ev.ky, label=f"ky={ev.ky:.6f}"), ev) for ev, res in zip(evs, per_block)]

    omega = protocol.omega_A
    points, entropy, variance, spectra = [], [], [], []
    for i, t in enumerate(times):
        pts = [res[i][0] for res in per_block]
        snaps = [res[i][1] for res in per_block]
        log_total = float(sum(p.log_magnitude for p in pts))
        phase = float(np.angle(np.prod([np.exp(1j * p.phase) for p in pts])))
        zero = log_total == -np.inf
        points.append(
            EchoPoint(
                time=float(t),
                echo=0j if zero else complex(np.exp(log_total + 1j * phase)),
                log_magnitude=log_total,
                rate=GAMMA_CAP if zero else -2.0 * log_total / omega,
                degenerate_flag=any(p.degenerate_flag for p in pts),
                omega_A=omega,
                occupied_count=sum(p.occupied_count for p in pts),
                midgap_distance=min(p.midgap_distance for p in pts),
                midgap_levels=tuple(sorted(d for p in pts for d in p.midgap_levels))[:MIDGAP_KEEP],
            )
        )
        entropy.append(sum(entanglement_entropy(s) for s in snaps))
        variance.append(sum(particle_number_variance(s) for s in snaps))
        spectra.append(np.concatenate([s.xs for s in snaps]))
    lam = _loschmidt_rates(protocol, times, threads) if loschmidt else None
    total = SeriesBundle(times, points, np.array(entropy), np.array(variance), spectra, lam, label="total")
    return blocks, total
