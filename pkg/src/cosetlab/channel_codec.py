"""Channel codes built from a source code with decoder side information.

A message m is encoded by drawing a channel input from the input law
conditioned on two linear constraints, A x = c (the syndrome shared with
the decoder) and B x = m (the message).  The decoder runs the underlying
side-information decoder on (c, y) and applies B to its output, so any
working syndrome decoder yields a channel code.

The error probability has two parts: messages whose constraint coset
carries no probability mass (a modeled encoder error), and decoding
failures weighted by the conditional input law on each coset.  Both are
computed exactly on small instances and by Monte Carlo otherwise.  The
code search samples random (B, c) pairs and reports the best candidate
against the baseline error of the underlying syndrome decoder on the
induced joint source.
"""

from __future__ import annotations

import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .capacity import CapacityResult
from .crng_sampler import EXACT, ConstrainedDistribution, ConstraintSet, draw, mass
from .errors import CapExceededError, EmptyCosetError
from .gf_linalg import (COSET_ENUMERATION_CAP, GfVector, LinearMap,
                        _row_reduce, coset_array, matvec, stack_maps)
from .rng import make_rng
from .sources_channels import Channel, info_measures, joint_from_channel
from .sw_codec import (MAP_EXACT, ErrorEstimate, SwCodec, _map_pick, decode_map,
                       decode_stochastic, derived_seed,
                       error_probability as sw_error_probability, wilson_std_err)

MESSAGE_ENUMERATION_CAP = 2 ** 16
EXACT_ERROR_CAP = 2 ** 24


class ChannelCodec:
    """Bundle (A via the SW codec, B, c) with the channel it is used on."""

    def __init__(self, sw: SwCodec, b_map: LinearMap, syndrome: GfVector,
                 channel: Channel, coset_cap: int = COSET_ENUMERATION_CAP):
        if b_map.field != sw.field or b_map.cols != sw.n:
            raise ValueError("message map must match the code field and length")
        if channel.input_size != sw.field.q:
            raise ValueError("channel input alphabet must match the code field")
        if len(syndrome) != sw.matrix.rows:
            raise ValueError("syndrome length must match the syndrome map")
        if sw.solver.solve(syndrome).is_empty:
            raise ValueError("syndrome lies outside the image of the syndrome map")
        self.sw = sw
        self.b_map = b_map
        self.syndrome = syndrome
        self.channel = channel
        self.coset_cap = coset_cap
        self.n = sw.n
        self.field = sw.field
        self.stacked = stack_maps([sw.matrix, b_map])
        self._msg_basis = self._column_space_basis()

    def _column_space_basis(self) -> np.ndarray:
        rref, _, pivots = _row_reduce(self.b_map.as_array().T, self.field)
        return rref[:len(pivots)]  # (rank, l) basis of Im B

    @property
    def r(self) -> float:
        return self.sw.rate

    @property
    def R(self) -> float:
        """(1/n) log2 |Im B| = (rank B / n) log2 q."""
        return self.b_map.rank / self.n * math.log2(self.field.q)

    @property
    def message_count(self) -> int:
        return self.field.q ** self.b_map.rank

    def messages(self, cap: int = MESSAGE_ENUMERATION_CAP) -> np.ndarray:
        """All of Im B as an (|M|, l) array, in deterministic order."""
        if self.message_count > cap:
            raise CapExceededError(
                f"message space of size {self.message_count} exceeds the cap {cap}")
        q = self.field.q
        d = self._msg_basis.shape[0]
        if d == 0:
            return np.zeros((1, self.b_map.rows), dtype=np.int64)
        coeffs = np.indices((q,) * d).reshape(d, -1).T
        return (coeffs @ self._msg_basis) % q

    def random_message(self, rng: np.random.Generator) -> GfVector:
        """Uniform over Im B: uniform coefficients of the image basis."""
        q = self.field.q
        d = self._msg_basis.shape[0]
        m = (rng.integers(0, q, size=d) @ self._msg_basis) % q if d else \
            np.zeros(self.b_map.rows, dtype=np.int64)
        return GfVector.from_array(self.field, m)

    def encoder_distribution(self, m: GfVector, mode: str = EXACT) -> ConstrainedDistribution:
        constraints = ConstraintSet(((self.sw.matrix, self.syndrome), (self.b_map, m)))
        return ConstrainedDistribution(self.sw.source.x_marginal, constraints,
                                       mode=mode, coset_cap=self.coset_cap)


def build(sw: SwCodec, b_map: LinearMap, channel: Channel, seed) -> ChannelCodec:
    """Fix (B, c): c = A x for an input block x drawn from the input law.

    Drawing x from the input law and applying A is exactly a draw of c
    from the image distribution of A, and both sides of the link share
    the resulting (B, c).
    """
    rng = make_rng(seed)
    x = rng.choice(sw.field.q, size=sw.n, p=sw.source.x_marginal)
    c = matvec(sw.matrix, GfVector.from_array(sw.field, x))
    return ChannelCodec(sw, b_map, c, channel)


def encode(codec: ChannelCodec, m: GfVector, seed, mode: str = EXACT) -> Optional[GfVector]:
    """Channel input for message m, or None when the coset has no mass.

    The None outcome is the modeled encoder error: it counts toward the
    error probability rather than raising.
    """
    dist = codec.encoder_distribution(m, mode=mode)
    if not dist.constraints.is_consistent:
        return None
    if mode == EXACT and mass(dist) <= 0.0:
        return None
    try:
        return draw(dist, seed)
    except EmptyCosetError:
        return None


def decode(codec: ChannelCodec, y, seed=0) -> GfVector:
    """Run the side-information decoder at the shared syndrome, then apply B."""
    if codec.sw.decoder == MAP_EXACT:
        x_hat = decode_map(codec.sw, codec.syndrome, y)
    else:
        x_hat = decode_stochastic(codec.sw, codec.syndrome, y, seed)
    return matvec(codec.b_map, x_hat)


def _all_y(ys: int, n: int) -> np.ndarray:
    idx = np.arange(ys ** n, dtype=np.int64)
    out = np.empty((ys ** n, n), dtype=np.int64)
    for pos in range(n):
        out[:, pos] = idx % ys
        idx //= ys
    return out


def _code_of_messages(codec: ChannelCodec, msgs: np.ndarray) -> np.ndarray:
    """Base-q integer encoding of message rows."""
    q = codec.field.q
    if codec.b_map.rows == 0:
        return np.zeros(msgs.shape[0], dtype=np.int64)
    return msgs @ (q ** np.arange(codec.b_map.rows, dtype=np.int64))


def _msg_codes(codec: ChannelCodec, vectors: np.ndarray) -> np.ndarray:
    """Base-q encoding of B x for each length-n row x."""
    q = codec.field.q
    if codec.b_map.rows == 0:
        return np.zeros(vectors.shape[0], dtype=np.int64)
    imgs = (vectors @ codec.b_map.as_array().T) % q
    return imgs @ (q ** np.arange(codec.b_map.rows, dtype=np.int64))


def _exact_error(codec: ChannelCodec, cap: int) -> ErrorEstimate:
    q, n = codec.field.q, codec.n
    ys = codec.channel.output_size
    msgs = codec.messages()
    stacked_solver = codec.stacked.solver()
    max_coset = q ** (n - codec.stacked.rank)
    if len(msgs) * max_coset * (ys ** n) > cap:
        raise CapExceededError(
            f"exact channel error needs {len(msgs) * max_coset * ys ** n} terms, "
            f"above the cap {cap}")

    # Decoded-message distribution for every channel output block.
    y_all = _all_y(ys, n)
    sol_c = codec.sw.solver.solve(codec.syndrome)
    members_a = codec.sw.coset_members(sol_c.particular.as_array())
    member_codes = _msg_codes(codec, members_a)
    cond = codec.sw.source.cond_x_given_y
    pos = np.arange(n)
    n_y = ys ** n
    if codec.sw.decoder == MAP_EXACT:
        decoded_code = np.empty(n_y, dtype=np.int64)
        for yi in range(n_y):
            with np.errstate(divide="ignore"):
                logw = np.log2(cond[:, y_all[yi]]).T
            decoded_code[yi] = member_codes[_map_pick(members_a, logw, n)]
        def msg_hit_prob(code):
            return (decoded_code == code).astype(float)
    else:
        hit = {}
        def msg_hit_prob(code):
            if code not in hit:
                prob = np.zeros(n_y)
                for yi in range(n_y):
                    post = cond[:, y_all[yi]].T
                    nu = post[pos[None, :], members_a].prod(axis=1)
                    total = nu.sum()
                    if total > 0.0:
                        prob[yi] = nu[member_codes == code].sum() / total
                hit[code] = prob
            return hit[code]

    px = codec.sw.source.x_marginal
    trans = codec.channel.transition
    m_count = len(msgs)
    err = 0.0
    for m_row in msgs:
        m_vec = GfVector.from_array(codec.field, m_row)
        rhs = GfVector(codec.field, codec.syndrome.entries + m_vec.entries)
        sol = stacked_solver.solve(rhs)
        if sol.is_empty:
            err += 1.0 / m_count
            continue
        members = coset_array(sol, cap=codec.coset_cap)
        weights = px[members].prod(axis=1)
        mass_m = weights.sum()
        if mass_m <= 0.0:
            err += 1.0 / m_count
            continue
        code = int(_code_of_messages(codec, m_row[None, :])[0])
        p_hit = msg_hit_prob(code)
        for x_row, w in zip(members, weights):
            if w == 0.0:
                continue
            wy = trans[x_row[:, None], y_all.T].prod(axis=0)  # W(y|x) over all y
            err += w / (m_count * mass_m) * float(wy @ (1.0 - p_hit))
    return ErrorEstimate(value=min(max(err, 0.0), 1.0), mode="exact")


def _mc_error(codec: ChannelCodec, trials: int, seed: int) -> ErrorEstimate:
    q, n = codec.field.q, codec.n
    msgs = codec.messages()
    stacked_solver = codec.stacked.solver()
    px = codec.sw.source.x_marginal
    cond = codec.sw.source.cond_x_given_y
    pos = np.arange(n)

    # Encoder cosets per message, solved once.
    coset_cache = {}
    for mi, m_row in enumerate(msgs):
        rhs = GfVector(codec.field, codec.syndrome.entries
                       + tuple(int(v) for v in m_row))
        sol = stacked_solver.solve(rhs)
        if sol.is_empty:
            coset_cache[mi] = None
            continue
        members = coset_array(sol, cap=codec.coset_cap)
        weights = px[members].prod(axis=1)
        total = weights.sum()
        coset_cache[mi] = None if total <= 0.0 else (members, weights / total)

    sol_c = codec.sw.solver.solve(codec.syndrome)
    members_a = codec.sw.coset_members(sol_c.particular.as_array())
    member_codes = _msg_codes(codec, members_a)
    msg_code = _code_of_messages(codec, msgs)

    failures = 0
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        mi = int(rng.integers(0, len(msgs)))
        cached = coset_cache[mi]
        if cached is None:
            failures += 1  # encoder error counts as a failure
            continue
        members, probs = cached
        x = members[rng.choice(len(probs), p=probs)]
        y = codec.channel.sample_outputs(x, rng)
        if codec.sw.decoder == MAP_EXACT:
            with np.errstate(divide="ignore"):
                logw = np.log2(cond[:, y]).T
            decoded = member_codes[_map_pick(members_a, logw, n)]
        else:
            post = cond[:, y].T
            nu = post[pos[None, :], members_a].prod(axis=1)
            total = nu.sum()
            if total <= 0.0:
                failures += 1
                continue
            decoded = member_codes[rng.choice(len(nu), p=nu / total)]
        if decoded != msg_code[mi]:
            failures += 1
    return ErrorEstimate(value=failures / trials, mode="monte-carlo",
                         trials=trials, std_err=wilson_std_err(failures, trials))


def error_probability(codec: ChannelCodec, mode: str = "exact", trials: int = 10000,
                      seed: int = 0, exact_cap: int = EXACT_ERROR_CAP) -> ErrorEstimate:
    """Message error probability of the assembled channel code.

    Exact mode evaluates both terms of the error expression: the uniform
    share of messages with mass-zero cosets, plus the conditional-law
    weighted probability of decoding to the wrong message.  Monte Carlo
    mode runs message -> encoder -> channel -> decoder trials; encoder
    errors count as failures.
    """
    if mode == "exact":
        return _exact_error(codec, exact_cap)
    if mode in ("mc", "monte-carlo"):
        if trials < 1:
            raise ValueError("trials must be positive")
        return _mc_error(codec, trials, seed)
    raise ValueError(f"unknown error mode {mode!r}")


@dataclass
class SearchResult:
    """Best (B, c) pair found by random search, with its context."""

    best_codec: ChannelCodec
    best_error: ErrorEstimate
    baseline_error: ErrorEstimate
    candidate_errors: List[ErrorEstimate]
    candidate_seeds: List[int]
    master_seed: int
    warnings: List[str]

    @property
    def best_index(self) -> int:
        vals = [e.value for e in self.candidate_errors]
        return int(np.argmin(vals))

    @property
    def delta_hat(self) -> float:
        return self.best_error.value - self.baseline_error.value

    @property
    def median_error(self) -> float:
        return float(statistics.median(e.value for e in self.candidate_errors))

    def rows(self) -> List[dict]:
        codec = self.best_codec
        out = []
        for k, est in enumerate(self.candidate_errors):
            out.append({
                "channel": codec.channel.kind,
                "p": codec.channel.param,
                "n": codec.n,
                "lA": codec.sw.matrix.rows,
                "lB": codec.b_map.rows,
                "r": codec.r,
                "R": codec.R,
                "candidate": k,
                "error": est.value,
                "std_err": est.std_err,
                "baseline_error": self.baseline_error.value,
                "delta_hat": self.delta_hat,
                "seed": self.candidate_seeds[k],
            })
        return out


def search_code(sw: SwCodec, ensemble_b, channel: Channel, candidates: int,
                trials: int, seed: int, threads: int = 1) -> SearchResult:
    """Random search over (B, c) pairs; returns the best with the baseline.

    The baseline is the error of the underlying syndrome decoder on the
    codec's own joint source (for a matched setup, the joint induced by
    the input law and the channel).  A nominal rate sum at or above the
    input entropy is recorded as an advisory warning, not an error.
    Candidate evaluations depend only on (seed, candidate index), so they
    may run in any order or in parallel.
    """
    from .ensembles import sample_map

    if candidates < 1:
        raise ValueError("need at least one candidate")
    warnings = []
    measures = info_measures(sw.source)
    nominal_R = ensemble_b.rows / sw.n * math.log2(sw.field.q)
    if sw.rate + nominal_R >= measures.h_x:
        warnings.append(f"r + R = {sw.rate + nominal_R:.4f} >= H(X) = "
                        f"{measures.h_x:.4f}: rate condition violated")
    baseline = sw_error_probability(sw, mode="mc", trials=trials,
                                    seed=derived_seed(seed, 0))

    def evaluate(k: int):
        b = sample_map(ensemble_b, np.random.default_rng(derived_seed(seed, 1, k)))
        codec = build(sw, b, channel, np.random.default_rng(derived_seed(seed, 2, k)))
        eval_seed = derived_seed(seed, 3, k)
        est = error_probability(codec, mode="mc", trials=trials, seed=eval_seed)
        return codec, est, eval_seed

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(evaluate, range(candidates)))
    else:
        results = [evaluate(k) for k in range(candidates)]

    errors = [est for _, est, _ in results]
    seeds = [s for _, _, s in results]
    best_k = int(np.argmin([e.value for e in errors]))  # ties: lowest index
    return SearchResult(best_codec=results[best_k][0], best_error=errors[best_k],
                        baseline_error=baseline, candidate_errors=errors,
                        candidate_seeds=seeds, master_seed=seed, warnings=warnings)


@dataclass
class PipelineReport:
    """End-to-end run: capacity target, rates, baseline, and search outcome."""

    capacity: float
    h_x: float
    h_x_given_y: float
    r: float
    R_nominal: float
    warnings: List[str]
    search: SearchResult

    def rows(self) -> List[dict]:
        out = self.search.rows()
        for row in out:
            row["capacity"] = self.capacity
        return out


def end_to_end_pipeline(channel: Channel, capacity_result: CapacityResult,
                        ensemble_a, ensemble_b, trials: int, seed: int,
                        candidates: int = 8, decoder: str = MAP_EXACT) -> PipelineReport:
    """Capacity-targeted construction: optimal input, sampled A, searched (B, c).

    The input law is the capacity result's optimizer; the rate window
    requires H(X) - H(X|Y) > 0 on the induced joint, and the nominal
    rates should satisfy r > H(X|Y) and r + R < H(X) (violations are
    reported as warnings, since converse-regime runs are legitimate).
    """
    from .ensembles import sample_map

    source = joint_from_channel(capacity_result.input_dist, channel)
    measures = info_measures(source)
    window = measures.h_x - measures.h_x_given_y
    if window <= 1e-9:
        raise ValueError(
            f"infeasible rate window: H(X) - H(X|Y) = {window} leaves no room for a message rate")
    n = ensemble_a.cols
    if ensemble_b.cols != n:
        raise ValueError("both ensembles must produce maps of the same length")
    q = ensemble_a.field.q
    a = sample_map(ensemble_a, np.random.default_rng(derived_seed(seed, 10)))
    sw = SwCodec(a, source, decoder=decoder)
    r = sw.rate
    R_nominal = ensemble_b.rows / n * math.log2(q)
    warnings = []
    if r <= measures.h_x_given_y:
        warnings.append(f"r = {r:.4f} <= H(X|Y) = {measures.h_x_given_y:.4f}: converse regime")
    if r + R_nominal >= measures.h_x:
        warnings.append(f"r + R = {r + R_nominal:.4f} >= H(X) = {measures.h_x:.4f}: "
                        "rate condition violated")
    search = search_code(sw, ensemble_b, channel, candidates, trials, seed)
    return PipelineReport(capacity=capacity_result.capacity, h_x=measures.h_x,
                          h_x_given_y=measures.h_x_given_y, r=r, R_nominal=R_nominal,
                          warnings=warnings, search=search)
