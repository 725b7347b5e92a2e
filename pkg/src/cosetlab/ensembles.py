"""Ensembles of linear maps with certified hash-property parameters.

An ensemble is a distribution over l x n matrices.  Its quality as a
universal-hash-style family is summarized by a pair (alpha, beta)
computed from the type spectrum

    S(p, t) = sum_A p(A) |{x : A x = 0, type(x) = t}|,

the expected number of kernel words of each type t:

    alpha = (|Im ensemble| / q^l) * max over heavy types of S(p, t) / S(uniform, t)
    beta  = sum over light types of S(p, t)

where "heavy" means Hamming weight > gamma * n.  The pair certifies the
collision bound: for every x, the total probability of x' colliding with
x more often than alpha / |Im ensemble| is at most beta.

Expurgation conditions the ensemble on the kernel containing no light
(low-weight) words, which drives beta to exactly 0 at the price of a
larger alpha.  The closed-form bound alpha / (1 - beta) from the parent
ensemble requires beta < 1; the exact expurgated alpha is available from
the expurgated spectrum whenever full enumeration is feasible and is
what the certifier uses.

Exact enumeration is capped at 2^20 ensemble members; beyond the cap
only sampled spectrum estimates (with standard errors) are offered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import CapExceededError, ExpurgationError
from .gf_linalg import (COSET_ENUMERATION_CAP, FieldSpec, GfVector, LinearMap,
                        coset_array, solve_affine)
from .rng import make_rng

UNIFORM = "uniform-linear"
SYSTEMATIC_SPARSE = "systematic-sparse"
EXPURGATED = "expurgated"

BALANCED_COLORING = "balanced-coloring"
COLLISION_RESISTANCE = "collision-resistance"

ENSEMBLE_ENUMERATION_CAP = 2 ** 20

# Strict comparisons against float thresholds get this much relative slack,
# so borderline-equal collision probabilities are not misread as violations.
_REL_SLACK = 1e-12


@dataclass(frozen=True)
class EnsembleSpec:
    """A named distribution over l x n matrices over GF(q)."""

    kind: str
    field: FieldSpec
    rows: int
    cols: int
    row_weight: Optional[int] = None          # systematic-sparse only
    inner: Optional["EnsembleSpec"] = None    # expurgated only
    gamma: Optional[float] = None             # expurgated only

    def __post_init__(self):
        if self.kind not in (UNIFORM, SYSTEMATIC_SPARSE, EXPURGATED):
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        if not 1 <= self.rows <= self.cols:
            raise ValueError("need 1 <= rows <= cols")
        if self.kind == SYSTEMATIC_SPARSE:
            if self.rows >= self.cols:
                raise ValueError("systematic-sparse needs rows < cols")
            if self.row_weight is None or self.row_weight < 1:
                raise ValueError("systematic-sparse needs row_weight >= 1")
        if self.kind == EXPURGATED:
            if self.inner is None:
                raise ValueError("expurgated ensembles wrap an inner ensemble")
            if self.gamma is None or not 0.0 < self.gamma < 1.0:
                raise ValueError("expurgation weight fraction must satisfy 0 < gamma < 1")
            if (self.inner.field, self.inner.rows, self.inner.cols) != (
                    self.field, self.rows, self.cols):
                raise ValueError("inner ensemble shape must match")


def uniform_ensemble(field: FieldSpec, rows: int, cols: int) -> EnsembleSpec:
    return EnsembleSpec(UNIFORM, field, rows, cols)


def sparse_ensemble(field: FieldSpec, rows: int, cols: int, row_weight: int) -> EnsembleSpec:
    return EnsembleSpec(SYSTEMATIC_SPARSE, field, rows, cols, row_weight=row_weight)


def expurgate(inner: EnsembleSpec, gamma: float) -> EnsembleSpec:
    return EnsembleSpec(EXPURGATED, inner.field, inner.rows, inner.cols,
                        inner=inner, gamma=gamma)


@dataclass(frozen=True)
class HashParams:
    """(alpha, beta) pair certifying a collision/partition bound."""

    alpha: float
    beta: float
    kind: str = COLLISION_RESISTANCE

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError("alpha and beta must be finite")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if self.kind not in (BALANCED_COLORING, COLLISION_RESISTANCE):
            raise ValueError(f"unknown hash-property kind {self.kind!r}")


@dataclass(frozen=True)
class TypeVector:
    """Empirical symbol counts of a length-n word; counts sum to n."""

    counts: tuple

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts):
            raise ValueError("type counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def weight(self) -> int:
        """Number of non-zero symbols."""
        return self.n - self.counts[0]

    @classmethod
    def of(cls, x, q: int) -> "TypeVector":
        entries = x.entries if isinstance(x, GfVector) else x
        counts = [0] * q
        for e in entries:
            counts[int(e)] += 1
        return cls(tuple(counts))


def all_types(q: int, n: int):
    """Every symbol-count vector of length q summing to n."""
    out = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            out.append(TypeVector(tuple(prefix + [remaining])))
            return
        for c in range(remaining + 1):
            rec(prefix + [c], remaining - c, slots - 1)

    rec([], n, q)
    return out


def zero_type(q: int, n: int) -> TypeVector:
    return TypeVector((n,) + (0,) * (q - 1))


def type_class_size(t: TypeVector) -> int:
    """Number of words with the given type (multinomial coefficient)."""
    size = math.factorial(t.n)
    for c in t.counts:
        size //= math.factorial(c)
    return size


def ensemble_image_size(spec: EnsembleSpec) -> int:
    """|Im| of the ensemble as a set of maps.

    Both supported base kinds contain full-rank members (the sparse kind
    by its identity block, the uniform kind because l <= n), and
    expurgation shrinks only the distribution, never the set, so the
    union of images is always the whole of GF(q)^l.
    """
    return spec.field.q ** spec.rows


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def kernel_min_weight(a: LinearMap, cap: int = COSET_ENUMERATION_CAP) -> float:
    """Minimum weight over non-zero kernel words; inf for a trivial kernel."""
    sol = solve_affine(a, GfVector.zeros(a.field, a.rows))
    members = coset_array(sol, cap=cap)
    weights = np.count_nonzero(members, axis=1)
    nz = weights[weights > 0]
    return float(nz.min()) if nz.size else math.inf


def _sample_sparse_block(rng, q, rows, cols_random, row_weight):
    """Random block built from row_weight (column, non-zero value) picks per row.

    Picks may repeat a column, so accumulated values can cancel: each row
    carries at most row_weight non-zeros.
    """
    block = np.zeros((rows, cols_random), dtype=np.int64)
    cols = rng.integers(0, cols_random, size=(rows, row_weight))
    vals = rng.integers(1, q, size=(rows, row_weight))
    for r in range(rows):
        for c, v in zip(cols[r], vals[r]):
            block[r, c] = (block[r, c] + v) % q
    return block


def sample_map(spec: EnsembleSpec, seed, max_rejections: int = 10000) -> LinearMap:
    """Draw one matrix from the ensemble (deterministic per seed)."""
    rng = make_rng(seed)
    q = spec.field.q
    if spec.kind == UNIFORM:
        return LinearMap.from_array(spec.field, rng.integers(0, q, size=(spec.rows, spec.cols)))
    if spec.kind == SYSTEMATIC_SPARSE:
        ident = np.eye(spec.rows, dtype=np.int64)
        block = _sample_sparse_block(rng, q, spec.rows, spec.cols - spec.rows, spec.row_weight)
        return LinearMap.from_array(spec.field, np.hstack([ident, block]))
    # expurgated: reject until the kernel clears the weight threshold
    threshold = spec.gamma * spec.cols
    for _ in range(max_rejections):
        cand = sample_map(spec.inner, rng)
        if kernel_min_weight(cand) > threshold:
            return cand
    raise ExpurgationError(
        f"expurgation infeasible at gamma={spec.gamma}: no matrix with kernel "
        f"minimum weight > {threshold} found in {max_rejections} attempts")


# ---------------------------------------------------------------------------
# exact enumeration
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class EnumeratedEnsemble:
    """All members of a (tiny) ensemble with their probabilities."""

    spec: EnsembleSpec
    arrays: np.ndarray   # (count, rows, cols) residues
    probs: np.ndarray    # (count,) summing to 1

    @property
    def count(self) -> int:
        return self.arrays.shape[0]

    def maps(self):
        for arr in self.arrays:
            yield LinearMap.from_array(self.spec.field, arr)


def _digit_expand(count: int, positions: int, base: int) -> np.ndarray:
    idx = np.arange(count, dtype=np.int64)
    digits = np.empty((count, positions), dtype=np.int64)
    for pos in range(positions):
        digits[:, pos] = idx % base
        idx //= base
    return digits


def enumerate_ensemble(spec: EnsembleSpec,
                       cap: int = ENSEMBLE_ENUMERATION_CAP) -> EnumeratedEnsemble:
    """Materialize the full ensemble; raises CapExceededError beyond the cap."""
    q, l, n = spec.field.q, spec.rows, spec.cols
    if spec.kind == UNIFORM:
        count = q ** (l * n)
        if count > cap:
            raise CapExceededError(
                f"uniform ensemble has {count} members, above the cap {cap}; "
                "use the sampled spectrum instead")
        digits = _digit_expand(count, l * n, q)
        arrays = digits.reshape(count, l, n)
        probs = np.full(count, 1.0 / count)
        return EnumeratedEnsemble(spec, arrays, probs)
    if spec.kind == SYSTEMATIC_SPARSE:
        m = n - l
        base = m * (q - 1)
        picks = spec.row_weight * l
        count = base ** picks
        if count > cap:
            raise CapExceededError(
                f"sparse ensemble enumeration needs {count} pick sequences, above the cap {cap}")
        digits = _digit_expand(count, picks, base)
        arrays = np.zeros((count, l, n), dtype=np.int64)
        arrays[:, :, :l] = np.eye(l, dtype=np.int64)[None, :, :]
        rows_of_pick = np.repeat(np.arange(l), spec.row_weight)
        ar = np.arange(count)
        for p in range(picks):
            col = l + digits[:, p] // (q - 1)
            val = 1 + digits[:, p] % (q - 1)
            r = rows_of_pick[p]
            arrays[ar, r, col] = (arrays[ar, r, col] + val) % q
        probs = np.full(count, 1.0 / count)
        return EnumeratedEnsemble(spec, arrays, probs)
    # expurgated
    inner = enumerate_ensemble(spec.inner, cap=cap)
    threshold = spec.gamma * n
    keep = np.array([kernel_min_weight(LinearMap.from_array(spec.field, arr)) > threshold
                     for arr in inner.arrays])
    if not keep.any():
        raise ExpurgationError(
            f"expurgation invalid at gamma={spec.gamma}: no ensemble member survives")
    arrays = inner.arrays[keep]
    probs = inner.probs[keep]
    return EnumeratedEnsemble(spec, arrays, probs / probs.sum())


def members(spec: EnsembleSpec, cap: int = ENSEMBLE_ENUMERATION_CAP):
    """(LinearMap, probability) pairs of the full ensemble."""
    ens = enumerate_ensemble(spec, cap=cap)
    for arr, p in zip(ens.arrays, ens.probs):
        yield LinearMap.from_array(spec.field, arr), float(p)


# ---------------------------------------------------------------------------
# type spectrum and (alpha, beta)
# ---------------------------------------------------------------------------

def _kernel_type_counts(a: LinearMap) -> dict:
    sol = solve_affine(a, GfVector.zeros(a.field, a.rows))
    counts: dict = {}
    for row in coset_array(sol):
        t = TypeVector.of(row, a.field.q)
        counts[t] = counts.get(t, 0) + 1
    return counts


def type_spectrum(spec: EnsembleSpec, cap: int = ENSEMBLE_ENUMERATION_CAP) -> dict:
    """Expected number of kernel words per type, S(p, t), exactly.

    Closed form for the uniform kind; full enumeration otherwise.
    """
    q, l, n = spec.field.q, spec.rows, spec.cols
    if spec.kind == UNIFORM:
        out = {}
        for t in all_types(q, n):
            if t.weight == 0:
                out[t] = 1.0  # the zero word is in every kernel
            else:
                out[t] = type_class_size(t) * float(q) ** (-l)
        return out
    ens = enumerate_ensemble(spec, cap=cap)
    out = {t: 0.0 for t in all_types(q, n)}
    for arr, p in zip(ens.arrays, ens.probs):
        for t, c in _kernel_type_counts(LinearMap.from_array(spec.field, arr)).items():
            out[t] += p * c
    return out


def type_spectrum_sampled(spec: EnsembleSpec, samples: int, seed):
    """Monte Carlo spectrum estimate: per-type mean and standard error."""
    if samples < 2:
        raise ValueError("need at least 2 samples for a standard error")
    q, n = spec.field.q, spec.cols
    types = all_types(q, n)
    counts = np.zeros((samples, len(types)))
    index = {t: i for i, t in enumerate(types)}
    # per-sample generators keep the estimate independent of evaluation order
    base = seed if isinstance(seed, int) else 0
    for s in range(samples):
        a = sample_map(spec, np.random.default_rng([base, s]))
        for t, c in _kernel_type_counts(a).items():
            counts[s, index[t]] = c
    mean = counts.mean(axis=0)
    se = counts.std(axis=0, ddof=1) / math.sqrt(samples)
    return ({t: float(mean[i]) for t, i in index.items()},
            {t: float(se[i]) for t, i in index.items()})


def _heavy_types(q: int, n: int, gamma: float):
    """Split of the non-zero types into heavy (weight > gamma n) and light."""
    threshold = gamma * n
    heavy, light = [], []
    for t in all_types(q, n):
        if t.weight == 0:
            continue
        (heavy if t.weight > threshold else light).append(t)
    return heavy, light


def compute_hash_params(spec: EnsembleSpec, gamma: Optional[float] = None,
                        kind: str = COLLISION_RESISTANCE,
                        cap: int = ENSEMBLE_ENUMERATION_CAP) -> HashParams:
    """(alpha, beta) of the ensemble's own distribution at the given gamma.

    For an expurgated spec the threshold is the spec's own gamma and the
    spectrum is the expurgated one, so beta comes out exactly 0 and alpha
    is the exact expurgated value (not the alpha/(1-beta) upper bound,
    which is available from :func:`expurgated_params_bound` when the
    parent's beta is below 1).

    The pair certifies the collision bound only when the collision
    probability is type-invariant; for the systematic-sparse kind use
    :func:`certified_collision_params` instead.
    """
    if spec.kind == EXPURGATED:
        if gamma is not None and gamma != spec.gamma:
            raise ValueError("gamma of an expurgated spec is fixed at construction")
        gamma = spec.gamma
    elif gamma is None:
        raise ValueError("gamma is required for non-expurgated ensembles")
    q, l, n = spec.field.q, spec.rows, spec.cols
    heavy, light = _heavy_types(q, n, gamma)
    if not heavy:
        raise ValueError("no types above the weight threshold; gamma too large")
    spectrum = type_spectrum(spec, cap=cap)
    ratio = 0.0
    for t in heavy:
        ref = type_class_size(t) * float(q) ** (-l)
        ratio = max(ratio, spectrum.get(t, 0.0) / ref)
    alpha = ensemble_image_size(spec) / float(q) ** l * ratio
    beta = sum(spectrum.get(t, 0.0) for t in light)
    if spec.kind == EXPURGATED:
        # expurgation empties the light types by construction
        assert beta == 0.0, "expurgated ensemble kept a light kernel word"
        return HashParams(alpha=alpha, beta=0.0, kind=kind)
    return HashParams(alpha=alpha, beta=beta, kind=kind)


def certified_collision_params(spec: EnsembleSpec, kind: str = COLLISION_RESISTANCE,
                               cap: int = ENSEMBLE_ENUMERATION_CAP) -> HashParams:
    """Tightest (alpha, 0) pair from the exact pairwise collision probabilities.

    alpha = |Im| * max over x != x' of P(A x = A x'), which certifies the
    collision bound by construction.  For ensembles whose collision
    probability depends on x - x' only through its type (uniform,
    expurgated-uniform) this equals the type-spectrum alpha; the
    systematic-sparse kind is not type-invariant (its identity block
    pins the first coordinates), so this direct pair is the one to
    certify it with.
    """
    ens = enumerate_ensemble(spec, cap=cap)
    q, n = spec.field.q, spec.cols
    if ens.count * q ** n > 2 ** 24:
        raise CapExceededError("collision-probability table too large; shrink l, n")
    codes = _image_codes(ens, _all_words(q, n))
    worst = 0.0
    for i in range(q ** n):
        pc = ens.probs @ (codes == codes[:, i:i + 1])
        pc[i] = 0.0
        worst = max(worst, float(pc.max()))
    return HashParams(alpha=ensemble_image_size(spec) * worst, beta=0.0, kind=kind)


def expurgated_params_bound(inner: EnsembleSpec, gamma: float,
                            kind: str = COLLISION_RESISTANCE,
                            cap: int = ENSEMBLE_ENUMERATION_CAP) -> HashParams:
    """Closed-form pair (alpha/(1-beta), 0) for the expurgated ensemble.

    Valid only when the parent ensemble's beta at this gamma is below 1;
    otherwise the bound degenerates and an ExpurgationError is raised.
    """
    parent = compute_hash_params(inner, gamma=gamma, kind=kind, cap=cap)
    if parent.beta >= 1.0:
        raise ExpurgationError(
            f"expurgation invalid: beta={parent.beta} >= 1 at gamma={gamma}, "
            "the closed-form expurgated alpha is undefined")
    return HashParams(alpha=parent.alpha / (1.0 - parent.beta), beta=0.0, kind=kind)


# ---------------------------------------------------------------------------
# exact certification
# ---------------------------------------------------------------------------

def _all_words(q: int, n: int) -> np.ndarray:
    return _digit_expand(q ** n, n, q)


def _image_codes(ens: EnumeratedEnsemble, words: np.ndarray) -> np.ndarray:
    """codes[b, i] = base-q encoding of member b applied to word i."""
    q, l = ens.spec.field.q, ens.spec.rows
    images = np.einsum("blk,ik->bli", ens.arrays, words) % q
    pow_q = q ** np.arange(l, dtype=np.int64)
    return np.tensordot(images, pow_q, axes=([1], [0]))


@dataclass
class PairCheck:
    """One exact two-sided bound evaluation."""

    label: str
    lhs: float
    rhs: float

    @property
    def ok(self) -> bool:
        return self.lhs <= self.rhs * (1.0 + _REL_SLACK) + _REL_SLACK


@dataclass
class CertificationReport:
    spec: EnsembleSpec
    params: HashParams
    collision_checked: int
    collision_violations: list
    partition_checks: list       # balanced-coloring style (Q, T) bounds
    collision_set_checks: list   # collision-resistance style (G, u) bounds
    gamma: Optional[float] = None  # weight threshold behind the certified pair

    @property
    def passed(self) -> bool:
        return (not self.collision_violations
                and all(c.ok for c in self.partition_checks)
                and all(c.ok for c in self.collision_set_checks))

    def csv_row(self) -> dict:
        checked = (self.collision_checked + len(self.partition_checks)
                   + len(self.collision_set_checks))
        violations = (len(self.collision_violations)
                      + sum(1 for c in self.partition_checks if not c.ok)
                      + sum(1 for c in self.collision_set_checks if not c.ok))
        return {
            "kind": self.spec.kind,
            "q": self.spec.field.q,
            "l": self.spec.rows,
            "n": self.spec.cols,
            "gamma": "" if self.gamma is None else self.gamma,
            "alpha": self.params.alpha,
            "beta": self.params.beta,
            "violations": violations,
            "checked": checked,
        }


def random_partition_pairs(field: FieldSpec, n: int, count: int, seed):
    """(Q, T) pairs: Q a random non-negative weighting, T a random non-empty set."""
    rng = make_rng(seed)
    size = field.q ** n
    pairs = []
    for _ in range(count):
        q_fn = rng.random(size)
        t_mask = rng.random(size) < 0.5
        if not t_mask.any():
            t_mask[rng.integers(0, size)] = True
        pairs.append((q_fn, t_mask))
    return pairs


def random_collision_pairs(field: FieldSpec, n: int, count: int, seed):
    """(G, u) pairs: G a random subset of words, u a random word index."""
    rng = make_rng(seed)
    size = field.q ** n
    pairs = []
    for _ in range(count):
        g_mask = rng.random(size) < 0.5
        u = int(rng.integers(0, size))
        pairs.append((g_mask, u))
    return pairs


def certify_hash_property(spec: EnsembleSpec, params: HashParams,
                          partition_pairs: Sequence = (),
                          collision_pairs: Sequence = (),
                          gamma: Optional[float] = None,
                          cap: int = ENSEMBLE_ENUMERATION_CAP) -> CertificationReport:
    """Exhaustively verify the collision bound and the two derived bounds.

    For every word x the certified inequality is checked exactly: the
    total collision probability restricted to partners exceeding
    alpha / |Im| must stay within beta.  Each supplied (Q, T) pair is
    checked against the partition bound

        E[ sum_m | Q(T n C(m))/Q(T) - 1/|Im| | ]
            <= sqrt(alpha - 1 + (beta + 1) |Im| max_{u in T} Q(u) / Q(T))

    and each (G, u) pair against the collision-set bound

        P( (G \\ {u}) meets C(A u) ) <= |G| alpha / |Im| + beta.

    Violations are collected in the report, never raised.
    """
    ens = enumerate_ensemble(spec, cap=cap)
    q, l, n = spec.field.q, spec.rows, spec.cols
    n_words = q ** n
    if ens.count * n_words > 2 ** 24:
        raise CapExceededError("certification workload too large; shrink l, n")
    words = _all_words(q, n)
    codes = _image_codes(ens, words)
    probs = ens.probs
    im_size = ensemble_image_size(spec)
    threshold = params.alpha / im_size

    violations = []
    for i in range(n_words):
        pc = probs @ (codes == codes[:, i:i + 1])
        pc[i] = 0.0
        mass = float(pc[pc > threshold * (1.0 + _REL_SLACK)].sum())
        if mass > params.beta * (1.0 + _REL_SLACK) + _REL_SLACK:
            violations.append(f"x={tuple(int(v) for v in words[i])}: "
                              f"excess collision mass {mass} > beta {params.beta}")

    im_mask = np.zeros(q ** l, dtype=bool)
    im_mask[np.unique(codes)] = True

    partition_checks = []
    for k, (q_fn, t_mask) in enumerate(partition_pairs):
        qt = np.asarray(q_fn, dtype=np.float64) * t_mask
        q_total = float(qt.sum())
        if q_total <= 0.0:
            raise ValueError("Q must put positive mass on T")
        lhs = 0.0
        for b in range(ens.count):
            bc = np.bincount(codes[b], weights=qt, minlength=q ** l)
            lhs += probs[b] * float(np.abs(bc[im_mask] / q_total - 1.0 / im_size).sum())
        q_max = float(np.asarray(q_fn)[t_mask].max())
        arg = params.alpha - 1.0 + (params.beta + 1.0) * im_size * q_max / q_total
        rhs = math.sqrt(max(arg, 0.0))
        partition_checks.append(PairCheck(label=f"partition-{k}", lhs=lhs, rhs=rhs))

    collision_set_checks = []
    for k, (g_mask, u) in enumerate(collision_pairs):
        g_idx = np.flatnonzero(g_mask)
        g_minus_u = g_idx[g_idx != u]
        if g_minus_u.size:
            hit = (codes[:, g_minus_u] == codes[:, u:u + 1]).any(axis=1)
            lhs = float(probs[hit].sum())
        else:
            lhs = 0.0
        rhs = len(g_idx) * params.alpha / im_size + params.beta
        collision_set_checks.append(PairCheck(label=f"collision-set-{k}", lhs=lhs, rhs=rhs))

    return CertificationReport(spec=spec, params=params,
                               collision_checked=n_words,
                               collision_violations=violations,
                               partition_checks=partition_checks,
                               collision_set_checks=collision_set_checks,
                               gamma=spec.gamma if gamma is None else gamma)
