"""scikit-learn style facade: times in, echo features out."""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .correlation import QuenchProtocol
from .entanglement import EPS_DEG
from .models import ModelSpec
from .series import build_series, build_series_2d
from .transitions import DetectorSettings, detect_transitions

__all__ = ["EchoTransformer"]


class EchoTransformer(BaseEstimator, TransformerMixin):
    """Map a column of times to entanglement-echo features of a fixed quench.

    ``fit`` only builds the quench protocol (there is nothing to learn); ``X``
    is ignored there. ``transform(X)`` takes times of shape ``(n,)`` or
    ``(n, 1)`` and returns ``(n, 5)`` columns named by
    :meth:`get_feature_names_out`.

    Examples
    --------
    >>> est = EchoTransformer(pre_mass=1.5, post_mass=0.3, L=40, subsystem_length=10)
    >>> est.fit_transform([[0.0], [1.0]]).shape
    (2, 5)
    """

    feature_names = ("gamma", "echo_mag", "entropy", "variance", "midgap_distance")

    def __init__(self, pre_mass=1.5, post_mass=0.3, L=100, subsystem_length=30, subsystem_start=0,
                 temperature=0.0, kind="chain1d", Ly=None, pathway="auto", threads=1, eps_deg=EPS_DEG):
        self.pre_mass = pre_mass
        self.post_mass = post_mass
        self.L = L
        self.subsystem_length = subsystem_length
        self.subsystem_start = subsystem_start
        self.temperature = temperature
        self.kind = kind
        self.Ly = Ly
        self.pathway = pathway
        self.threads = threads
        self.eps_deg = eps_deg

    def _spec(self, mass):
        if self.kind == "chain1d":
            if np.ndim(mass) == 0:
                return ModelSpec.chain(float(mass), self.L)
            return ModelSpec.profile(mass)
        if self.kind == "chern2d":
            return ModelSpec.chern(float(mass), self.L, self.Ly)
        raise ValueError(f"kind must be 'chain1d' or 'chern2d', got {self.kind!r}")

    def fit(self, X=None, y=None):
        self.protocol_ = QuenchProtocol(
            self._spec(self.pre_mass),
            self._spec(self.post_mass),
            self.temperature,
            (self.subsystem_start, self.subsystem_length),
        )
        self.n_features_in_ = 1
        return self

    def _times(self, X):
        t = np.asarray(X, dtype=float)
        if t.ndim == 2:
            if t.shape[1] != 1:
                raise ValueError(f"expected one column of times, got shape {t.shape}")
            t = t[:, 0]
        return t.ravel()

    def _series(self, times):
        check_is_fitted(self, "protocol_")
        if self.protocol_.ndim == 2:
            pairs, total = build_series_2d(self.protocol_, times, self.threads, eps_deg=self.eps_deg)
            return total, pairs
        bundle, ev = build_series(self.protocol_, times, self.pathway, self.threads, eps_deg=self.eps_deg)
        return bundle, ev

    def transform(self, X):
        times = self._times(X)
        order = np.argsort(times, kind="stable")
        uniq, inverse = np.unique(times[order], return_inverse=True)
        bundle, _ = self._series(uniq)
        feats = np.column_stack([
            bundle.gamma,
            bundle.echo_mag,
            bundle.entropy,
            bundle.variance,
            [p.midgap_distance for p in bundle.points],
        ])
        out = np.empty((times.size, feats.shape[1]))
        out[order] = feats[inverse]
        return out

    def get_feature_names_out(self, input_features=None):
        return np.array(self.feature_names, dtype=object)

    def detect(self, times, settings=None):
        """Transition events on a strictly increasing grid (per ``ky`` block in 2d)."""
        bundle, ev = self._series(np.asarray(times, dtype=float))
        settings = settings or DetectorSettings(eps_deg=self.eps_deg)
        if self.protocol_.ndim == 2:
            events = [e for b, block_ev in ev for e in detect_transitions(b, block_ev, settings)]
            return sorted(events, key=lambda e: (e.t_c, e.ky))
        return detect_transitions(bundle, ev, settings)
