import numpy as np
import pytest

from entecho.correlation import QuenchProtocol
from entecho.entanglement import momentum_resolved_echo
from entecho.exceptions import GapClosed
from entecho.models import ModelSpec
from entecho.series import SeriesBundle, build_series, build_series_2d


@pytest.fixture
def small():
    return QuenchProtocol(ModelSpec.chain(1.5, 30), ModelSpec.chain(0.3, 30), 0.0, (0, 8))


def test_bundle_shapes(small):
    times = np.linspace(0, 5, 26)
    bundle, _ = build_series(small, times, loschmidt=True)
    assert len(bundle) == 26
    assert len(bundle.spectra) == 26 and all(s.shape == (16,) for s in bundle.spectra)
    assert bundle.lambda_rate.shape == (26,)
    assert bundle.gamma[0] == pytest.approx(0, abs=1e-12)
    assert bundle.step == pytest.approx(0.2)


def test_threads_do_not_change_results(small):
    times = np.linspace(0, 5, 26)
    a, _ = build_series(small, times, threads=1)
    b, _ = build_series(small, times, threads=4)
    np.testing.assert_array_equal(a.gamma, b.gamma)
    np.testing.assert_array_equal(a.entropy, b.entropy)


def test_grid_must_increase(small):
    bundle, _ = build_series(small, [0.0, 1.0])
    with pytest.raises(ValueError):
        SeriesBundle([1.0, 0.0], bundle.points, bundle.entropy, bundle.variance, bundle.spectra)
    with pytest.raises(ValueError):
        SeriesBundle([0.0, 1.0, 2.0], bundle.points, bundle.entropy, bundle.variance, bundle.spectra)


def test_numerical_errors_carry_the_time():
    p = QuenchProtocol(ModelSpec.chern(2.0, 6, 4), ModelSpec.chern(0.5, 6, 4), 0.0, (0, 2))
    with pytest.raises(GapClosed, match="t=0.0"):
        build_series_2d(p, [0.0, 1.0])


def test_2d_total_matches_momentum_resolved_echo():
    p = QuenchProtocol(ModelSpec.chern(0.5, 12, 4), ModelSpec.chern(-0.5, 12, 4), 0.0, (0, 4))
    times = np.linspace(0, 3, 7)
    blocks, total = build_series_2d(p, times, threads=2)
    assert len(blocks) == 4
    for i, t in enumerate(times):
        per_ky, ref = momentum_resolved_echo(p, t)
        assert total.points[i].rate == pytest.approx(ref.rate, abs=1e-12)
        for (b, _), (ky, point) in zip(blocks, per_ky):
            assert b.ky == ky
            assert b.points[i].rate == pytest.approx(point.rate, abs=1e-12)
        assert total.spectra[i].shape == (4 * 8,)
