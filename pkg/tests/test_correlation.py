import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from entecho.correlation import (
    Broken,
    QuenchProtocol,
    correlation,
    correlation_general,
    correlation_momentum_resolved,
    correlation_partial_ti,
    correlation_translation_invariant,
    fermi_weights,
    select_pathway,
)
from entecho.exceptions import DegenerateFermiLevel, DimensionMismatch, WrongShape
from entecho.models import Gauge, ModelSpec, momenta

from conftest import two_region_profiles

gapped = st.floats(-2.5, 2.5, allow_nan=False).filter(lambda m: min(abs(m - 1), abs(m + 1)) > 0.05)


def proto(pre, post, L=24, sub=(0, 8), T=0.0, gauge=None):
    def spec(m):
        return ModelSpec.chain(m, L) if np.ndim(m) == 0 else ModelSpec.profile(m)
    return QuenchProtocol(spec(pre), spec(post), T, sub, gauge)


def maxdiff(a, b):
    return float(np.max(np.abs(a.matrix - b.matrix)))


def test_trivial_quench_is_static():
    p = proto(1.5, 1.5)
    c0 = correlation_general(p, 0.0)
    for t in (0.7, 3.1, 12.0):
        assert maxdiff(correlation_general(p, t), c0) < 1e-10


def test_static_ti_matches_general_l100():
    p = QuenchProtocol(ModelSpec.chain(1.5, 100), ModelSpec.chain(0.3, 100), 0.0, (0, 30))
    assert maxdiff(correlation_general(p, 0.0), correlation_translation_invariant(p, 0.0)) < 1e-10


def test_ti_at_t0_is_pre_ground_state():
    p = proto(1.5, 0.3)
    q = proto(1.5, 1.5)
    assert maxdiff(correlation_translation_invariant(p, 0.0), correlation_general(q, 5.0)) < 1e-10


@given(pre=gapped, post=gapped, t=st.floats(0, 20))
def test_ti_matches_general(pre, post, t):
    p = proto(pre, post)
    assert maxdiff(correlation_general(p, t), correlation_translation_invariant(p, t)) < 1e-9


@pytest.mark.parametrize("broken", [Broken.PRE, Broken.POST])
def test_partial_reduces_to_ti_when_uniform(broken):
    p = proto(1.5, 0.3)
    for t in (0.0, 1.3, 7.7):
        assert maxdiff(correlation_partial_ti(p, t, broken), correlation_translation_invariant(p, t)) < 1e-10


def test_partial_pre_broken_two_region_profile():
    pre, _ = two_region_profiles(64)
    p = QuenchProtocol(ModelSpec.profile(pre), ModelSpec.chain(0.5, 64), 0.0, (10, 20))
    for t in (0.0, 0.9, 4.2, 11.0):
        assert maxdiff(correlation_partial_ti(p, t, Broken.PRE), correlation_general(p, t)) < 1e-9


def test_partial_post_broken_disorder(rng):
    post = 1.5 + 0.3 * (2 * rng.random(64) - 1)
    p = QuenchProtocol(ModelSpec.chain(0.3, 64), ModelSpec.profile(post), 0.0, (5, 20))
    for t in (0.0, 2.5, 9.0):
        assert maxdiff(correlation_partial_ti(p, t, Broken.POST), correlation_general(p, t)) < 1e-9


def test_partial_flag_must_match():
    p = QuenchProtocol(ModelSpec.profile([1.5] * 8 + [0.3] * 8), ModelSpec.chain(0.5, 16), 0.0, (0, 4))
    with pytest.raises(WrongShape):
        correlation_partial_ti(p, 1.0, Broken.POST)
    with pytest.raises(WrongShape):
        correlation_translation_invariant(p, 1.0)


def test_momentum_blocks_match_full_torus():
    Lx, Ly = 8, 4
    p = QuenchProtocol(ModelSpec.chern(0.5, Lx, Ly), ModelSpec.chern(-0.5, Lx, Ly), 0.0, (0, 3))
    for t in (0.0, 1.1, 2.9):
        full = np.linalg.eigvalsh(correlation_general(p, t).matrix)
        blocks = np.concatenate([
            np.linalg.eigvalsh(correlation_momentum_resolved(p, ky, t).matrix) for ky in momenta(Ly)
        ])
        np.testing.assert_allclose(np.sort(blocks), full, atol=1e-9)
        assert maxdiff(correlation_translation_invariant(p, t), correlation_general(p, t)) < 1e-9


def test_momentum_blocks_static_for_trivial_quench():
    p = QuenchProtocol(ModelSpec.chern(0.5, 10, 4), ModelSpec.chern(0.5, 10, 4), 0.0, (0, 4))
    for ky in momenta(4):
        c0 = correlation_momentum_resolved(p, ky, 0.0)
        assert maxdiff(correlation_momentum_resolved(p, ky, 6.0), c0) < 1e-10


def test_momentum_route_needs_2d():
    with pytest.raises(WrongShape):
        correlation_momentum_resolved(proto(1.5, 0.3), 0.0, 1.0)


@given(t=st.floats(0, 15), T=st.sampled_from([0.0, 0.1, 0.7]))
def test_hermitian_range_and_trace(t, T):
    pre, post = two_region_profiles(20)
    p = proto(pre, post, L=20, sub=(3, 7), T=T)
    C = correlation_general(p, t).matrix
    assert np.max(np.abs(C - C.conj().T)) < 1e-12
    xi = np.linalg.eigvalsh(C)
    assert xi.min() > -1e-9 and xi.max() < 1 + 1e-9
    assert abs(np.trace(C).real - np.trace(correlation_general(p, 0.0).matrix).real) < 1e-10


def test_half_filling_trace_is_subsystem_length():
    C = correlation_translation_invariant(proto(1.5, 0.3), 3.0).matrix
    assert abs(np.trace(C).real - 8) < 1e-10


@pytest.mark.parametrize("route", ["general", "ti"])
def test_gauge_invariance(route):
    pa, pb = proto(0.4, -1.6, gauge=Gauge.A), proto(0.4, -1.6, gauge=Gauge.B)
    for t in (0.0, 2.2, 5.5):
        assert maxdiff(correlation(pa, t, route), correlation(pb, t, route)) < 1e-10


def test_zero_temperature_limit():
    cold, warm = proto(1.5, 0.3), proto(1.5, 0.3, T=1e-8)
    assert maxdiff(correlation_translation_invariant(cold, 2.0), correlation_translation_invariant(warm, 2.0)) < 1e-6
    assert maxdiff(correlation_general(cold, 2.0), correlation_general(warm, 2.0)) < 1e-6


def test_zero_mode_at_t0_is_an_error():
    # m = 1 with L a multiple of ... has a k = 0 zero mode
    p = proto(1.0, 0.3, L=12)
    with pytest.raises(DegenerateFermiLevel):
        correlation_general(p, 0.0)


def test_fermi_weights():
    np.testing.assert_array_equal(fermi_weights([-1.0, 2.0], 0.0), [1.0, 0.0])
    np.testing.assert_allclose(fermi_weights([0.0], 0.3), [0.5])


def test_protocol_validation():
    with pytest.raises(DimensionMismatch):
        QuenchProtocol(ModelSpec.chain(1.5, 10), ModelSpec.chain(0.3, 12), 0.0, (0, 4))
    with pytest.raises(ValueError):
        QuenchProtocol(ModelSpec.chain(1.5, 10), ModelSpec.chain(0.3, 10), 0.0, (0, 10))


def test_select_pathway():
    pre, post = two_region_profiles(16)
    assert select_pathway(proto(1.5, 0.3, L=16)) == "ti"
    assert select_pathway(proto(pre, 0.3, L=16)) == "partial-pre"
    assert select_pathway(proto(1.5, post, L=16)) == "partial-post"
    assert select_pathway(proto(pre, post, L=16)) == "general"


def test_subsystem_wraps_around_ring():
    p = proto(1.5, 0.3, sub=(20, 8))
    assert maxdiff(correlation_general(p, 1.7), correlation_translation_invariant(p, 1.7)) < 1e-10
    # translation invariance: any start gives the same matrix
    assert maxdiff(correlation_general(p, 1.7), correlation_general(proto(1.5, 0.3), 1.7)) < 1e-10
