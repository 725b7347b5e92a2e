import math

import numpy as np
import pytest

from cosetlab import capacity as cap
from cosetlab import sources_channels as sc
from cosetlab.errors import CapExceededError


def h2(p):
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def z_capacity(p):
    # closed form for the asymmetric binary channel with a clean zero input
    return math.log2(1.0 + (1.0 - p) * p ** (p / (1.0 - p)))


@pytest.mark.parametrize("p", [0.05, 0.11, 0.2])
def test_bsc_capacity_closed_form(p):
    res = cap.blahut_arimoto(sc.make_bsc(p), tol=1e-10)
    assert abs(res.capacity - (1.0 - h2(p))) <= 1e-6
    assert res.residual <= 1e-10


def test_bsc_noiseless():
    res = cap.blahut_arimoto(sc.make_bsc(0.0))
    assert res.capacity == pytest.approx(1.0, abs=1e-9)
    assert res.input_dist == pytest.approx([0.5, 0.5], abs=1e-6)


@pytest.mark.parametrize("p", [0.5, 0.3])
def test_zchannel_capacity_closed_form(p):
    res = cap.blahut_arimoto(sc.make_zchannel(p), tol=1e-10)
    assert abs(res.capacity - z_capacity(p)) <= 1e-6


def test_zchannel_optimal_input_closed_form():
    # optimal mass on the noisy input: 1 / ((1-p) (1 + 2^(h(p)/(1-p))))
    p = 0.5
    res = cap.blahut_arimoto(sc.make_zchannel(p), tol=1e-12)
    expected = 1.0 / ((1.0 - p) * (1.0 + 2.0 ** (h2(p) / (1.0 - p))))
    assert res.input_dist[1] == pytest.approx(expected, abs=1e-5)


def test_bracket_is_monotone_and_valid():
    res = cap.blahut_arimoto(sc.make_zchannel(0.3), tol=1e-9)
    trace = res.bracket_trace
    for (lo1, hi1), (lo2, hi2) in zip(trace, trace[1:]):
        assert lo2 >= lo1 and hi2 <= hi1
    truth = z_capacity(0.3)
    for lo, hi in trace:
        assert lo <= truth + 1e-9 and hi >= truth - 1e-9


def test_support_restriction_pins_inputs():
    ch = sc.make_quantized_awgn(4.0, 8)
    res = cap.blahut_arimoto(ch, support=(0, 7), tol=1e-9)
    assert res.input_dist[1:7] == pytest.approx(np.zeros(6), abs=0)
    assert res.capacity > 0.5


def test_single_input_support_conveys_nothing():
    res = cap.blahut_arimoto(sc.make_bsc(0.11), support=(0,))
    assert res.capacity == 0.0


def test_entropy_difference_identity_random_pairs():
    rng = np.random.default_rng(0)
    for _ in range(100):
        nx, ny = rng.integers(2, 5, 2)
        w = rng.random((nx, ny))
        w /= w.sum(axis=1, keepdims=True)
        px = rng.random(nx)
        px /= px.sum()
        mutual, difference = cap.entropy_difference_check(sc.Channel(w), px)
        assert abs(mutual - difference) <= 1e-12


def test_entropy_difference_deterministic_channel():
    ch = sc.Channel(np.eye(3))
    px = np.array([0.2, 0.5, 0.3])
    mutual, difference = cap.entropy_difference_check(ch, px)
    h_x = -sum(p * math.log2(p) for p in px)
    assert mutual == pytest.approx(h_x, abs=1e-12)
    assert difference == pytest.approx(h_x, abs=1e-12)


def test_signaling_sweep_monotone():
    ch = sc.make_quantized_awgn(4.0, 8)
    caps = [r.capacity for r in cap.signaling_sweep(ch, [2, 4, 8])]
    assert caps[0] <= caps[1] <= caps[2]


def test_signaling_sweep_full_alphabet_matches_direct_solve():
    ch = sc.make_bsc(0.11)
    swept = cap.signaling_sweep(ch, [2])[0]
    direct = cap.blahut_arimoto(ch)
    assert swept.capacity == pytest.approx(direct.capacity, abs=2e-9)


def test_signaling_sweep_single_support():
    caps = [r.capacity for r in cap.signaling_sweep(sc.make_bsc(0.11), [1])]
    assert caps == [0.0]


def test_sweep_too_large_without_sampling():
    big = sc.Channel(np.full((20, 20), 0.05))
    with pytest.raises(CapExceededError, match="sampled_subsets"):
        cap.signaling_sweep(big, [2])
    res = cap.signaling_sweep(big, [2], sampled_subsets=3, seed=1)
    assert res[0].capacity == pytest.approx(0.0, abs=1e-6)


def test_invalid_arguments():
    with pytest.raises(ValueError):
        cap.blahut_arimoto(sc.make_bsc(0.1), tol=0.0)
    with pytest.raises(ValueError):
        cap.blahut_arimoto(sc.make_bsc(0.1), support=())
    with pytest.raises(ValueError):
        cap.signaling_sweep(sc.make_bsc(0.1), [3])
