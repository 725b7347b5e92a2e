import itertools

import numpy as np
import pytest

from cosetlab import channel_codec as cc
from cosetlab import ensembles as ens
from cosetlab import sources_channels as sc
from cosetlab import sw_codec as sw
from cosetlab.gf_linalg import FieldSpec, GfVector, LinearMap, matvec

F2 = FieldSpec(2)


def make_setup(seed=17, n=4, l_a=2, l_b=2, p=0.1):
    channel = sc.make_bsc(p)
    source = sc.joint_from_channel(np.full(2, 0.5), channel)
    rng = np.random.default_rng(seed)
    a = LinearMap.from_array(F2, rng.integers(0, 2, (l_a, n)))
    b = LinearMap.from_array(F2, rng.integers(0, 2, (l_b, n)))
    swc = sw.SwCodec(a, source)
    return channel, source, swc, b


def brute_force_error(codec, stochastic=False):
    """Loop-only evaluation of the two-term error expression."""
    q, n = 2, codec.n
    a = codec.sw.matrix.as_array()
    b = codec.b_map.as_array()
    c = tuple(codec.syndrome.entries)
    trans = codec.channel.transition
    px = codec.sw.source.x_marginal
    cond = codec.sw.source.cond_x_given_y
    all_x = list(itertools.product(range(q), repeat=n))
    all_y = list(itertools.product(range(codec.channel.output_size), repeat=n))
    apply_map = lambda mat, x: tuple(int(v) for v in (mat @ np.array(x)) % q)
    msgs = sorted(set(apply_map(b, x) for x in all_x))
    coset_c = [x for x in all_x if apply_map(a, x) == c]

    def posterior(x, y):
        return float(np.prod([cond[x[i], y[i]] for i in range(n)]))

    def p_decode(y, m):
        if stochastic:
            liks = [posterior(x, y) for x in coset_c]
            total = sum(liks)
            if total == 0.0:
                return 0.0
            return sum(l for x, l in zip(coset_c, liks) if apply_map(b, x) == m) / total
        best, best_x = None, None
        for x in coset_c:
            lik = posterior(x, y)
            if best is None or lik > best or (lik == best and x < best_x):
                best, best_x = lik, x
        return 1.0 if apply_map(b, best_x) == m else 0.0

    count = len(msgs)
    err = 0.0
    for m in msgs:
        coset = [x for x in coset_c if apply_map(b, x) == m]
        mass = sum(float(np.prod([px[xi] for xi in x])) for x in coset)
        if mass == 0.0:
            err += 1.0 / count
            continue
        for x in coset:
            mu_x = float(np.prod([px[xi] for xi in x]))
            for y in all_y:
                w_y = float(np.prod([trans[x[i], y[i]] for i in range(n)]))
                err += w_y * mu_x * (1.0 - p_decode(y, m)) / (count * mass)
    return err


def test_build_is_deterministic():
    channel, _, swc, b = make_setup()
    c1 = cc.build(swc, b, channel, seed=3).syndrome
    c2 = cc.build(swc, b, channel, seed=3).syndrome
    assert c1 == c2


def test_build_with_no_syndrome_rows():
    channel, source, _, b = make_setup()
    swc = sw.SwCodec(LinearMap(F2, (), cols=4), source)
    codec = cc.build(swc, b, channel, seed=0)
    assert codec.syndrome.entries == ()
    assert codec.sw.solver.solve(codec.syndrome).size == 16


def test_full_rank_syndrome_gives_singleton_cosets():
    channel, source, _, b = make_setup()
    swc = sw.SwCodec(LinearMap.identity(F2, 4), source)
    codec = cc.build(swc, b, channel, seed=1)
    solver = codec.stacked.solver()
    for m_row in codec.messages():
        rhs = GfVector(F2, codec.syndrome.entries + tuple(int(v) for v in m_row))
        sol = solver.solve(rhs)
        assert sol.size in (0, 1)


def test_rate_fields():
    channel, _, swc, b = make_setup(l_a=2, l_b=2)
    codec = cc.build(swc, b, channel, seed=3)
    assert codec.r == swc.rate
    assert codec.R == pytest.approx(b.rank / 4)
    assert codec.message_count == 2 ** b.rank


def test_encode_satisfies_both_constraints():
    channel, _, swc, b = make_setup()
    codec = cc.build(swc, b, channel, seed=3)
    for seed in range(12):
        m = codec.random_message(np.random.default_rng(seed))
        x = cc.encode(codec, m, seed=seed)
        if x is None:
            continue
        assert matvec(codec.sw.matrix, x) == codec.syndrome
        assert matvec(codec.b_map, x) == m


def test_encoder_error_marker_for_inconsistent_message():
    channel, _, swc, _ = make_setup()
    codec = cc.build(swc, swc.matrix, channel, seed=3)  # B == A
    for m_row in codec.messages():
        m = GfVector.from_array(F2, m_row)
        if m != codec.syndrome:
            assert cc.encode(codec, m, seed=0) is None
            return
    pytest.fail("expected an inconsistent message")


def test_encoder_conditional_is_uniform_on_coset():
    # independent rows: the conditional law on the 2-member coset is uniform
    channel = sc.make_bsc(0.1)
    source = sc.joint_from_channel(np.full(2, 0.5), channel)
    a = LinearMap(F2, ((1, 1, 0),))
    b = LinearMap(F2, ((0, 1, 1),))
    swc = sw.SwCodec(a, source)
    codec = cc.ChannelCodec(swc, b, GfVector(F2, (1,)), channel)
    m = GfVector(F2, (1,))
    dist = codec.encoder_distribution(m)
    from cosetlab.crng_sampler import exact_distribution, tv_distance_check
    members, probs = exact_distribution(dist)
    assert len(probs) == 2 and probs == pytest.approx([0.5, 0.5])
    assert tv_distance_check(dist, 100000, seed=4) <= 0.02


def test_decode_output_in_message_space():
    channel, _, swc, b = make_setup()
    codec = cc.build(swc, b, channel, seed=5)
    msg_set = {tuple(int(v) for v in row) for row in codec.messages()}
    for seed in range(8):
        y = tuple(np.random.default_rng(seed).integers(0, 2, 4))
        assert tuple(cc.decode(codec, y).entries) in msg_set


def test_noiseless_roundtrip():
    noiseless = sc.Channel(np.eye(2), kind="noiseless")
    source = sc.joint_from_channel(np.full(2, 0.5), noiseless)
    swc = sw.SwCodec(LinearMap(F2, (), cols=4), source)
    codec = cc.build(swc, LinearMap.identity(F2, 4), noiseless, seed=0)
    assert cc.error_probability(codec, "exact").value == 0.0
    for seed in range(6):
        m = codec.random_message(np.random.default_rng(seed))
        x = cc.encode(codec, m, seed=seed)
        y = tuple(int(v) for v in x.entries)
        assert cc.decode(codec, y) == m


def test_exact_error_matches_brute_force_map():
    channel, _, swc, b = make_setup(seed=17)
    codec = cc.build(swc, b, channel, seed=3)
    assert cc.error_probability(codec, "exact").value == pytest.approx(
        brute_force_error(codec), abs=1e-12)


def test_exact_error_matches_brute_force_stochastic():
    channel, source, _, b = make_setup(seed=17)
    a = LinearMap.from_array(F2, np.random.default_rng(17).integers(0, 2, (2, 4)))
    swc = sw.SwCodec(a, source, decoder=sw.STOCHASTIC)
    codec = cc.build(swc, b, channel, seed=3)
    assert cc.error_probability(codec, "exact").value == pytest.approx(
        brute_force_error(codec, stochastic=True), abs=1e-12)


def test_exact_error_matches_monte_carlo():
    channel, _, swc, b = make_setup()
    codec = cc.build(swc, b, channel, seed=3)
    exact = cc.error_probability(codec, "exact")
    mc = cc.error_probability(codec, "mc", trials=20000, seed=8)
    assert abs(exact.value - mc.value) <= 3 * mc.std_err


def test_error_with_zero_message_map():
    channel, _, swc, _ = make_setup()
    codec = cc.build(swc, LinearMap.zeros(F2, 2, 4), channel, seed=1)
    assert codec.message_count == 1
    assert cc.error_probability(codec, "exact").value == 0.0


def test_all_inconsistent_messages_dominate_error():
    channel, _, swc, _ = make_setup()
    codec = cc.build(swc, swc.matrix, channel, seed=3)  # B == A
    count = codec.message_count
    est = cc.error_probability(codec, "exact")
    assert est.value >= (count - 1) / count - 1e-12


def test_error_at_least_empty_coset_term():
    channel, _, swc, b = make_setup(seed=20, l_a=3, l_b=2)
    codec = cc.build(swc, b, channel, seed=9)
    msgs = codec.messages()
    solver = codec.stacked.solver()
    empty_term = 0.0
    for m_row in msgs:
        rhs = GfVector(F2, codec.syndrome.entries + tuple(int(v) for v in m_row))
        if solver.solve(rhs).is_empty:
            empty_term += 1.0 / len(msgs)
    assert cc.error_probability(codec, "exact").value >= empty_term - 1e-12


def test_search_single_candidate_reduces_to_one_build():
    channel, _, swc, _ = make_setup()
    spec_b = ens.uniform_ensemble(F2, 2, 4)
    result = cc.search_code(swc, spec_b, channel, candidates=1, trials=500, seed=21)
    b = ens.sample_map(spec_b, np.random.default_rng(sw.derived_seed(21, 1, 0)))
    codec = cc.build(swc, b, channel, np.random.default_rng(sw.derived_seed(21, 2, 0)))
    direct = cc.error_probability(codec, "mc", trials=500, seed=sw.derived_seed(21, 3, 0))
    assert result.best_error.value == direct.value
    assert result.best_codec.syndrome == codec.syndrome


def test_search_best_is_minimum():
    channel, _, swc, _ = make_setup()
    result = cc.search_code(swc, ens.uniform_ensemble(F2, 2, 4), channel,
                            candidates=6, trials=400, seed=2)
    values = [e.value for e in result.candidate_errors]
    assert result.best_error.value == min(values)
    assert len(result.rows()) == 6
    assert result.rows()[0]["delta_hat"] == pytest.approx(result.delta_hat)
    # rate sum 0.5 + 0.5 >= H(X) = 1: advisory warning, run still performed
    assert any("rate condition" in w for w in result.warnings)


def test_search_no_warning_inside_rate_window():
    channel, _, swc, _ = make_setup(n=8, l_a=4, l_b=2)
    result = cc.search_code(swc, ens.uniform_ensemble(F2, 2, 8), channel,
                            candidates=2, trials=200, seed=2)
    assert result.warnings == []


def test_search_threads_match_serial():
    channel, _, swc, _ = make_setup()
    serial = cc.search_code(swc, ens.uniform_ensemble(F2, 2, 4), channel,
                            candidates=4, trials=300, seed=5, threads=1)
    threaded = cc.search_code(swc, ens.uniform_ensemble(F2, 2, 4), channel,
                              candidates=4, trials=300, seed=5, threads=3)
    assert [e.value for e in serial.candidate_errors] == \
        [e.value for e in threaded.candidate_errors]


def test_noiseless_search_delta_is_non_positive():
    noiseless = sc.Channel(np.eye(2), kind="noiseless")
    source = sc.joint_from_channel(np.full(2, 0.5), noiseless)
    # r = 0 leaves the whole rate budget to messages; the noiseless
    # posterior is a point mass, so the baseline error is 0
    swc = sw.SwCodec(LinearMap(F2, (), cols=4), source)
    result = cc.search_code(swc, ens.uniform_ensemble(F2, 2, 4), noiseless,
                            candidates=4, trials=400, seed=3)
    assert result.baseline_error.value == 0.0
    assert result.delta_hat <= 0.05


def test_pipeline_runs_on_feasible_window():
    from cosetlab.capacity import blahut_arimoto

    channel = sc.make_bsc(0.11)
    cap = blahut_arimoto(channel)
    report = cc.end_to_end_pipeline(
        channel, cap,
        ensemble_a=ens.uniform_ensemble(F2, 5, 8),
        ensemble_b=ens.uniform_ensemble(F2, 2, 8),
        trials=400, seed=31, candidates=4)
    assert report.capacity == pytest.approx(0.5000840, abs=1e-5)
    assert report.h_x == pytest.approx(1.0, abs=1e-9)
    assert report.search.best_error.value <= 1.0
    assert report.rows()[0]["capacity"] == report.capacity


def test_pipeline_rejects_empty_window():
    from cosetlab.capacity import blahut_arimoto

    channel = sc.make_bsc(0.5)
    cap = blahut_arimoto(channel)
    with pytest.raises(ValueError, match="infeasible rate window"):
        cc.end_to_end_pipeline(channel, cap,
                               ensemble_a=ens.uniform_ensemble(F2, 5, 8),
                               ensemble_b=ens.uniform_ensemble(F2, 2, 8),
                               trials=100, seed=1)
