"""Constrained random number generation.

Draw x from an i.i.d. (or per-letter) distribution conditioned on a set
of linear constraints A x = c, B x = m, ...  Exact mode enumerates the
solution coset and samples from the renormalized weights; MCMC mode runs
a lazy sequential-scan Metropolis walk whose proposals add a random
scalar multiple of a null-space basis vector, so every state of the
chain satisfies the constraints by construction and the acceptance ratio
needs only single-letter weight products.

Exact mode is capped at cosets of 2^16 members.  Whether the constraint
set is empty is always decided exactly by a rank test, never sampled.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import CapExceededError, EmptyCosetError
from .gf_linalg import (COSET_ENUMERATION_CAP, FieldSpec, GfVector,
                        concat_vectors, coset_array, matvec, stack_maps)
from .rng import make_rng

EXACT = "exact"
MCMC = "mcmc"

# Default MCMC schedule: 50 n sweeps of burn-in, one proposal per
# null-basis vector per sweep.  Mixing is an empirical knob, not a claim.
BURN_IN_SWEEPS_PER_LETTER = 50
SWEEPS_PER_LETTER = 50


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Conjunction of linear constraints {(A, c), (B, m), ...} on GF(q)^n."""

    pairs: tuple

    def __post_init__(self):
        pairs = tuple(self.pairs)
        if not pairs:
            raise ValueError("at least one constraint pair is required")
        field = pairs[0][0].field
        n = pairs[0][0].cols
        for a, c in pairs:
            if a.field != field or a.cols != n:
                raise ValueError("all constraint maps must share field and length")
            if len(c) != a.rows or c.field != field:
                raise ValueError("constraint value does not match its map")
        object.__setattr__(self, "pairs", pairs)
        stacked = stack_maps([a for a, _ in pairs])
        rhs = concat_vectors([c for _, c in pairs], field)
        object.__setattr__(self, "stacked", stacked)
        object.__setattr__(self, "rhs", rhs)
        object.__setattr__(self, "solution", stacked.solver().solve(rhs))

    @property
    def field(self) -> FieldSpec:
        return self.pairs[0][0].field

    @property
    def n(self) -> int:
        return self.pairs[0][0].cols

    @property
    def is_consistent(self) -> bool:
        return not self.solution.is_empty

    @property
    def coset_size(self) -> int:
        return self.solution.size

    def satisfied_by(self, x: GfVector) -> bool:
        return all(matvec(a, x) == c for a, c in self.pairs)


def _normalize_weights(weights, n: int, q: int) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim == 1:
        if w.shape[0] != q:
            raise ValueError("single-letter weights must have one entry per symbol")
        w = np.tile(w, (n, 1))
    if w.shape != (n, q):
        raise ValueError(f"weights must have shape ({n}, {q}) or ({q},)")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    rows = w.sum(axis=1)
    if np.any(np.abs(rows - 1.0) > 1e-9):
        raise ValueError("per-letter weights must each sum to 1")
    w = w.copy()
    w.flags.writeable = False
    return w


@dataclass(eq=False)
class ConstrainedDistribution:
    """mu restricted to a constraint coset.

    ``weights`` is either a length-q single-letter distribution shared by
    all positions (the i.i.d. case) or an (n, q) array of per-letter
    distributions.  ``mode`` selects exact coset enumeration or the MCMC
    walk; the MCMC schedule is in sweeps (one proposal per null-basis
    vector per sweep).
    """

    weights: np.ndarray
    constraints: ConstraintSet
    mode: str = EXACT
    sweeps: Optional[int] = None
    burn_in: Optional[int] = None
    coset_cap: int = COSET_ENUMERATION_CAP

    def __post_init__(self):
        if self.mode not in (EXACT, MCMC):
            raise ValueError(f"unknown sampling mode {self.mode!r}")
        n, q = self.constraints.n, self.constraints.field.q
        self.weights = _normalize_weights(self.weights, n, q)
        if self.sweeps is None:
            self.sweeps = SWEEPS_PER_LETTER * n
        if self.burn_in is None:
            self.burn_in = BURN_IN_SWEEPS_PER_LETTER * n

    @property
    def field(self) -> FieldSpec:
        return self.constraints.field

    @property
    def n(self) -> int:
        return self.constraints.n


def _member_weights(dist: ConstrainedDistribution) -> Tuple[np.ndarray, np.ndarray]:
    """(members, unnormalized probabilities) of the enumerated coset."""
    sol = dist.constraints.solution
    if sol.size > dist.coset_cap:
        raise CapExceededError(
            f"coset of size {sol.size} exceeds the exact-mode cap {dist.coset_cap}; "
            "switch the distribution to mcmc mode (mass unavailable there)")
    members = coset_array(sol, cap=dist.coset_cap)
    if members.shape[0] == 0:
        return members, np.zeros(0)
    probs = dist.weights[np.arange(dist.n)[None, :], members].prod(axis=1)
    return members, probs


def mass(dist: ConstrainedDistribution) -> float:
    """Total probability the unconstrained law puts on the coset (exact mode)."""
    if not dist.constraints.is_consistent:
        return 0.0
    _, probs = _member_weights(dist)
    return float(probs.sum())


def _mcmc_state(dist: ConstrainedDistribution, rng: np.random.Generator,
                sweeps: int, state: Optional[np.ndarray] = None) -> np.ndarray:
    """Advance the Metropolis walk; the start is the particular solution."""
    sol = dist.constraints.solution
    q = dist.field.q
    basis = np.array([b.entries for b in sol.null_basis], dtype=np.int64)
    if state is None:
        state = sol.particular.as_array().copy()
    if basis.shape[0] == 0:
        return state
    supports = [np.flatnonzero(b) for b in basis]
    w = dist.weights
    for _ in range(sweeps):
        for j in range(basis.shape[0]):
            s = int(rng.integers(0, q))
            if s == 0:
                continue  # lazy step, keeps the chain aperiodic
            idx = supports[j]
            new_vals = (state[idx] + s * basis[j, idx]) % q
            num = w[idx, new_vals].prod()
            den = w[idx, state[idx]].prod()
            if den == 0.0:
                accept = True  # move freely off zero-mass states
            else:
                accept = rng.random() < min(1.0, num / den)
            if accept:
                state[idx] = new_vals
    return state


def draw(dist: ConstrainedDistribution, seed) -> GfVector:
    """One sample; every output is asserted to satisfy all constraints."""
    if not dist.constraints.is_consistent:
        raise EmptyCosetError("constraints are inconsistent: encoder error")
    rng = make_rng(seed)
    if dist.mode == EXACT:
        members, probs = _member_weights(dist)
        total = probs.sum()
        if total <= 0.0:
            raise EmptyCosetError("coset carries zero probability mass: encoder error")
        i = rng.choice(len(probs), p=probs / total)
        out = GfVector.from_array(dist.field, members[i])
    else:
        state = _mcmc_state(dist, rng, dist.burn_in + dist.sweeps)
        out = GfVector.from_array(dist.field, state)
    assert dist.constraints.satisfied_by(out)
    return out


def exact_distribution(dist: ConstrainedDistribution) -> Tuple[np.ndarray, np.ndarray]:
    """(members, normalized probabilities); the reference law for TV checks."""
    members, probs = _member_weights(dist)
    total = probs.sum()
    if total <= 0.0:
        raise EmptyCosetError("coset carries zero probability mass")
    return members, probs / total


def tv_distance_check(dist: ConstrainedDistribution, draws: int, seed,
                      thin: int = 1) -> float:
    """Total-variation distance of empirical draws from the exact conditional.

    Exact mode samples i.i.d.  MCMC mode runs a single chain (burn-in from
    the distribution's schedule, then ``thin`` sweeps between retained
    states) so the check measures the stationary marginal; ``thin=0``
    degenerates the chain to its start point, which is useful as a
    negative control.
    """
    if draws < 1:
        raise ValueError("need at least one draw")
    members, exact = exact_distribution(dist)
    rng = make_rng(seed)
    counts = np.zeros(len(exact))
    if dist.mode == EXACT:
        picks = rng.choice(len(exact), size=draws, p=exact)
        counts = np.bincount(picks, minlength=len(exact)).astype(float)
    else:
        index = {tuple(int(v) for v in row): i for i, row in enumerate(members)}
        state = _mcmc_state(dist, rng, dist.burn_in)
        for _ in range(draws):
            state = _mcmc_state(dist, rng, thin, state=state)
            counts[index[tuple(int(v) for v in state)]] += 1
    emp = counts / draws
    return float(0.5 * np.abs(emp - exact).sum())
