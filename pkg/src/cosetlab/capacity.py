"""Channel capacity by alternating maximization, with support restrictions.

The solver keeps the standard two-sided bracket: at input law r the
per-input divergences D_x = KL(W(.|x) || p_y) give I(r) = sum r_x D_x as
a lower bound and max_x D_x as an upper bound on the capacity over the
allowed support.  Iteration stops when the (running) bracket gap is
within the tolerance, so the returned value is within the tolerance of
the true restricted capacity.

Restricting the support to at most q symbols and maximizing over all
such supports gives the finite-signaling-alphabet capacity, which is
non-decreasing in q and approaches the unrestricted value.  Exhaustive
support search is capped at alphabet size 16; larger alphabets need the
sampled-subset fallback.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import CapExceededError
from .rng import make_rng
from .sources_channels import Channel, info_measures, joint_from_channel

SUPPORT_SEARCH_CAP = 16


@dataclass(eq=False)
class CapacityResult:
    """Capacity value with its optimizing input and convergence evidence."""

    capacity: float
    input_dist: np.ndarray
    iterations: int
    residual: float
    support: tuple
    bracket_trace: tuple = ()

    def __post_init__(self):
        if self.capacity < -1e-12:
            raise ValueError("capacity cannot be negative")


def blahut_arimoto(channel: Channel, support: Optional[Sequence[int]] = None,
                   tol: float = 1e-9, max_iter: int = 200000) -> CapacityResult:
    """Capacity of a discrete memoryless channel, inputs outside ``support`` pinned to 0."""
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    w_full = channel.transition
    nx = channel.input_size
    support = tuple(range(nx)) if support is None else tuple(sorted(set(int(s) for s in support)))
    if not support or any(not 0 <= s < nx for s in support):
        raise ValueError("support must be a non-empty subset of the input alphabet")
    w = w_full[list(support)]
    k = len(support)
    mask = w > 0.0
    logw = np.where(mask, np.log2(np.where(mask, w, 1.0)), 0.0)

    r = np.full(k, 1.0 / k)
    best_lo, best_hi = -math.inf, math.inf
    trace = []
    for it in range(1, max_iter + 1):
        p_y = r @ w
        with np.errstate(divide="ignore", invalid="ignore"):
            log_py = np.where(p_y > 0.0, np.log2(np.where(p_y > 0.0, p_y, 1.0)), 0.0)
        d = (w * (logw - log_py[None, :])).sum(axis=1)  # KL(W(.|x) || p_y) in bits
        lo = float(r @ d)
        hi = float(d.max())
        best_lo = max(best_lo, lo)
        best_hi = min(best_hi, hi)
        trace.append((best_lo, best_hi))
        if best_hi - best_lo <= tol:
            full = np.zeros(nx)
            full[list(support)] = r
            return CapacityResult(capacity=max(best_lo, 0.0), input_dist=full,
                                  iterations=it, residual=best_hi - best_lo,
                                  support=support, bracket_trace=tuple(trace))
        r = r * np.exp2(d - d.max())
        r /= r.sum()
    raise RuntimeError(f"no convergence to tol={tol} within {max_iter} iterations")


def entropy_difference_check(channel: Channel, input_dist) -> Tuple[float, float]:
    """(I(X;Y), H(X) - H(X|Y)) computed along independent routes."""
    px = np.asarray(input_dist, dtype=np.float64)
    w = channel.transition
    p_y = px @ w
    mask = (w > 0.0) & (px[:, None] > 0.0) & (p_y[None, :] > 0.0)
    ratio = np.where(mask, w / np.where(p_y[None, :] > 0.0, p_y[None, :], 1.0), 1.0)
    mutual = float((px[:, None] * np.where(mask, w * np.log2(ratio), 0.0)).sum())
    src = joint_from_channel(px, channel)
    measures = info_measures(src)
    return mutual, measures.h_x - measures.h_x_given_y


def signaling_sweep(channel: Channel, q_values: Sequence[int], tol: float = 1e-9,
                    sampled_subsets: Optional[int] = None, seed: int = 0):
    """Best capacity over supports of size at most q, for each requested q.

    Exhaustive over all supports for alphabets up to 16 symbols (each
    support solved once, cached per size, so the sweep is exactly
    non-decreasing in q); larger alphabets must opt into random subset
    sampling via ``sampled_subsets``, which loses that guarantee.
    """
    nx = channel.input_size
    for qv in q_values:
        if not 1 <= qv <= nx:
            raise ValueError("support size bound must lie in [1, input alphabet size]")
    if nx > SUPPORT_SEARCH_CAP and sampled_subsets is None:
        raise CapExceededError(
            f"alphabet of size {nx} is too large for exhaustive support search "
            f"(cap {SUPPORT_SEARCH_CAP}); pass sampled_subsets=<count> to sample")

    def best_of(supports):
        best = None
        for s in supports:
            res = blahut_arimoto(channel, support=s, tol=tol)
            if best is None or res.capacity > best.capacity:
                best = res
        return best

    results = []
    if nx <= SUPPORT_SEARCH_CAP:
        by_size = {}
        for qv in q_values:
            for k in range(1, qv + 1):
                if k not in by_size:
                    by_size[k] = best_of(itertools.combinations(range(nx), k))
            results.append(max((by_size[k] for k in range(1, qv + 1)),
                               key=lambda r: r.capacity))
    else:
        rng = make_rng(seed)
        for qv in q_values:
            supports = [tuple(sorted(rng.choice(nx, size=qv, replace=False)))
                        for _ in range(sampled_subsets)]
            results.append(best_of(supports))
    return results
