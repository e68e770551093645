"""Locate and classify non-analytic points of an echo rate series.

Two signatures are distinguished:

* **Jump**: Γ is discontinuous at ``t_c`` and entanglement levels cross
  ``xi = 1/2`` there (entanglement-type transition);
* **Cusp**: Γ is continuous but its one-sided slopes differ (bulk-type).

Candidates are grid brackets where the second difference of Γ is large. In
each bracket ``t_c`` is pinned to the level crossing if there is one, else to
the local extremum of Γ, else by bisection. The step across ``t_c`` is then
measured by one-sided linear extrapolation from distances ``h``, repeated for
successively halved ``h``: a step that stays above ``delta_jump`` is a Jump, a
vanishing step with a slope break above ``delta_slope`` is a Cusp. Anything
else is reported as ``Unclassifiable``.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

__all__ = ["EventKind", "TransitionEvent", "DetectorSettings", "detect_transitions"]


class EventKind(str, Enum):
    JUMP = "Jump"
    CUSP = "Cusp"
    UNCLASSIFIABLE = "Unclassifiable"


@dataclass(frozen=True)
class TransitionEvent:
    """One detected singularity.

    ``gamma_left``/``gamma_right`` are the one-sided limits of Γ at ``t_c``
    extrapolated from the finest ``h``; ``steps`` lists the extrapolated step
    for each ``h`` (coarse to fine). ``n_crossing`` counts levels within
    ``xi_tol`` of 1/2 at ``t_c`` beyond those already there at the bracket ends.
    """

    t_c: float
    kind: EventKind
    gamma_left: float
    gamma_right: float
    slope_left: float
    slope_right: float
    n_crossing: int
    ky: Optional[float] = None
    steps: tuple = field(default=(), repr=False)

    @property
    def discontinuity(self):
        return self.gamma_right - self.gamma_left


@dataclass(frozen=True)
class DetectorSettings:
    delta_jump: float = 0.01
    delta_slope: float = 0.5
    time_tol: float = 1e-4
    depth: int = 12
    xi_tol: float = 1e-3
    eps_deg: float = 1e-9
    halvings: int = 3


class _Cached:
    """Memoised refine callback; grid values seed the cache."""

    def __init__(self, refine, times, points):
        self.refine = refine
        self.memo = {float(t): p for t, p in zip(times, points)}
        self.fresh = set()

    def point(self, t):
        t = float(t)
        if t not in self.memo:
            self.memo[t] = self.refine(t)
            self.fresh.add(t)
        return self.memo[t]

    def full(self, t):
        # seeds read back from a file may carry the rate only
        t = float(t)
        p = self.point(t)
        if not hasattr(p, "midgap_distance") and t not in self.fresh:
            p = self.memo[t] = self.refine(t)
            self.fresh.add(t)
        return p

    def rate(self, t):
        return self.point(t).rate

    def near_half(self, t, tol):
        count = getattr(self.full(t), "count_near_half", None)
        return count(tol) if count else 0

    def midgap(self, t):
        return getattr(self.full(t), "midgap_distance", np.inf)


def _candidates(times, gamma, settings):
    """Grid brackets where Γ bends by more than ``delta_slope`` or steps by ``delta_jump / 2``."""
    slopes = np.diff(gamma) / np.diff(times)
    bend = np.abs(np.diff(slopes))
    step = np.abs(np.diff(gamma, 2))
    flagged = np.flatnonzero((bend > settings.delta_slope) | (step > 0.5 * settings.delta_jump)) + 1
    # a jump inside [t_i, t_i+1] flags both i and i+1: merge runs
    groups, run = [], []
    for j in flagged:
        if run and j > run[-1] + 1:
            groups.append(run)
            run = []
        run.append(int(j))
    if run:
        groups.append(run)
    return [(max(g[0] - 1, 0), min(g[-1] + 1, times.size - 1)) for g in groups]


def _crossing_time(cache, a0, b0, settings):
    """Time of a level crossing 1/2 inside ``(a0, b0)``, and how many levels cross."""
    if not np.isfinite(cache.midgap(a0)):
        return None, 0
    res = minimize_scalar(cache.midgap, bounds=(a0, b0), method="bounded",
                          options={"xatol": 0.1 * settings.time_tol})
    t_x = float(res.x)
    edge = max(cache.near_half(a0, settings.xi_tol), cache.near_half(b0, settings.xi_tol))
    extra = cache.near_half(t_x, settings.xi_tol) - edge
    return (t_x, extra) if extra > 0 else (None, 0)


def _extremum(cache, a0, b0, settings):
    """Local max/min of Γ strictly inside ``[a0, b0]``, or ``None``."""
    f = cache.rate
    grid = np.linspace(a0, b0, 9)
    vals = np.array([f(t) for t in grid])
    i = int(np.argmax(vals)) if vals.max() > max(vals[0], vals[-1]) else None
    sign = -1.0
    if i is None and vals.min() < min(vals[0], vals[-1]):
        i, sign = int(np.argmin(vals)), 1.0
    if i is None:
        return None
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, 8)]
    res = minimize_scalar(lambda t: sign * f(t), bounds=(lo, hi), method="bounded",
                          options={"xatol": 0.5 * settings.time_tol})
    return float(res.x)


def _bisect(cache, a, b, settings):
    """Halve toward the side whose linear extrapolation misses the midpoint most."""
    f = cache.rate
    for _ in range(settings.depth):
        w = b - a
        if w <= settings.time_tol:
            break
        m = 0.5 * (a + b)
        h = 0.5 * w
        left = abs(f(m) - (2.0 * f(a) - f(a - h)))
        right = abs(f(m) - (2.0 * f(b) - f(b + h)))
        a, b = (a, m) if left >= right else (m, b)
    return 0.5 * (a + b)


def _one_sided(cache, t_c, h):
    """Left and right limits of Γ at ``t_c`` by linear extrapolation from ``h``, ``2h``."""
    f = cache.rate
    left = 2.0 * f(t_c - h) - f(t_c - 2.0 * h)
    right = 2.0 * f(t_c + h) - f(t_c + 2.0 * h)
    return left, right


def _classify(cache, a0, b0, step, settings, ky):
    t_c, crossing = _crossing_time(cache, a0, b0, settings)
    if t_c is None:
        t_c = _extremum(cache, a0, b0, settings)
    if t_c is None:
        t_c = _bisect(cache, a0, b0, settings)

    hs = [step / 4.0 / 2**i for i in range(settings.halvings)]
    limits = [_one_sided(cache, t_c, h) for h in hs]
    steps = [r - l for l, r in limits]
    left, right = limits[-1]
    f = cache.rate
    eps = 0.5 * settings.time_tol
    h = hs[0]
    slope_l = (f(t_c - eps) - f(t_c - eps - h)) / h
    slope_r = (f(t_c + eps + h) - f(t_c + eps)) / h

    if all(abs(s) > settings.delta_jump for s in steps[-2:]):
        kind = EventKind.JUMP if crossing > 0 else EventKind.UNCLASSIFIABLE
    elif abs(steps[-1]) < settings.delta_jump:
        if abs(slope_r - slope_l) <= settings.delta_slope:
            return None
        kind = EventKind.CUSP
    else:
        kind = EventKind.UNCLASSIFIABLE
    return TransitionEvent(
        t_c=float(t_c),
        kind=kind,
        gamma_left=float(left),
        gamma_right=float(right),
        slope_left=float(slope_l),
        slope_right=float(slope_r),
        n_crossing=int(crossing),
        ky=ky,
        steps=tuple(float(s) for s in steps),
    )


def detect_transitions(series, refine, settings=None, ky=None):
    """Find Jump and Cusp singularities in a uniformly gridded rate series.

    Parameters
    ----------
    series : SeriesBundle
        Grid times and ``EchoPoint`` records.
    refine : callable
        ``t -> EchoPoint``, evaluated off the grid during refinement. Any
        record with a ``rate`` attribute works (a Loschmidt series too); level
        crossings are then simply not counted.
    settings : DetectorSettings, optional

    Returns
    -------
    list of TransitionEvent, in time order. Points where the rate is merely
    strongly curved (no slope break) are dropped.
    """
    settings = settings or DetectorSettings()
    times = np.asarray(series.times, dtype=float)
    if times.size < 4:
        return []
    points = list(series.points)
    gamma = np.array([p.rate for p in points])
    cache = _Cached(refine, times, points)
    step = float(np.median(np.diff(times)))
    ky = series.ky if ky is None else ky
    events = []
    for lo, hi in _candidates(times, gamma, settings):
        ev = _classify(cache, times[lo], times[hi], step, settings, ky)
        if ev is None:
            continue
        if events and abs(ev.t_c - events[-1].t_c) < step:
            continue
        events.append(ev)
    return events
