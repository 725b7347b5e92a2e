"""Exact linear algebra over prime fields GF(q).

Everything downstream (syndrome codes, cosets, constrained samplers)
reduces to residue arithmetic mod a prime q.  Vectors and matrices are
immutable; a matrix computes its rank once at construction (bit-packed
elimination for GF(2), plain modular elimination otherwise) and lazily
caches a reusable solver so many right-hand sides can be solved against
the same matrix cheaply.

Matrix text format: first line ``q l n``, then ``l`` lines of ``n``
space-separated residues.  Round-trips are bit-exact.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import CapExceededError

# Cosets larger than this are never materialized; callers fall back to MCMC.
COSET_ENUMERATION_CAP = 2 ** 16


def _is_prime(m: int) -> bool:
    if m < 2:
        return False
    for d in range(2, int(m ** 0.5) + 1):
        if m % d == 0:
            return False
    return True


@dataclass(frozen=True)
class FieldSpec:
    """Prime field GF(q), 2 <= q <= 257."""

    q: int

    def __post_init__(self):
        if not (2 <= self.q <= 257) or not _is_prime(self.q):
            raise ValueError(f"field modulus must be a prime in [2, 257], got {self.q}")

    def inv(self, a: int) -> int:
        a %= self.q
        if a == 0:
            raise ZeroDivisionError("0 has no multiplicative inverse")
        return pow(a, self.q - 2, self.q)


@dataclass(frozen=True)
class GfVector:
    """Immutable vector of residues mod q.

    Zero-length vectors are allowed: a matrix with no rows produces an
    empty syndrome (a vacuous constraint).
    """

    field: FieldSpec
    entries: tuple

    def __post_init__(self):
        ent = tuple(int(e) for e in self.entries)
        q = self.field.q
        if any(not 0 <= e < q for e in ent):
            raise ValueError("vector entries must be residues in [0, q)")
        object.__setattr__(self, "entries", ent)

    @classmethod
    def from_array(cls, field: FieldSpec, arr) -> "GfVector":
        return cls(field, tuple(int(v) % field.q for v in arr))

    @classmethod
    def zeros(cls, field: FieldSpec, n: int) -> "GfVector":
        return cls(field, (0,) * n)

    def as_array(self) -> np.ndarray:
        return np.array(self.entries, dtype=np.int64)

    @property
    def weight(self) -> int:
        """Number of non-zero entries (Hamming weight)."""
        return sum(1 for e in self.entries if e)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i: int) -> int:
        return self.entries[i]

    def __add__(self, other: "GfVector") -> "GfVector":
        if self.field != other.field or len(self) != len(other):
            raise ValueError("field or length mismatch")
        q = self.field.q
        return GfVector(self.field, tuple((a + b) % q for a, b in zip(self.entries, other.entries)))


def _rank_gf2_bitpacked(rows: Sequence[int]) -> int:
    """Rank over GF(2) with rows packed into Python ints (bit i = column i)."""
    pivots = {}  # highest set bit -> reduced row
    rank = 0
    for row in rows:
        while row:
            h = row.bit_length() - 1
            if h in pivots:
                row ^= pivots[h]
            else:
                pivots[h] = row
                rank += 1
                break
    return rank


def _row_reduce(arr: np.ndarray, field: FieldSpec):
    """Full RREF of ``arr`` with the transform applied to an identity.

    Returns (rref, transform, pivot_cols) with transform @ arr == rref
    (mod q).  Pivot rows come first; remaining rows of rref are zero.
    """
    q = field.q
    a = arr.astype(np.int64) % q
    rows = a.shape[0]
    t = np.eye(rows, dtype=np.int64)
    pivots = []
    r = 0
    for col in range(a.shape[1]):
        if r == rows:
            break
        nz = np.nonzero(a[r:, col])[0]
        if nz.size == 0:
            continue
        p = r + int(nz[0])
        if p != r:
            a[[r, p]] = a[[p, r]]
            t[[r, p]] = t[[p, r]]
        inv = field.inv(int(a[r, col]))
        a[r] = (a[r] * inv) % q
        t[r] = (t[r] * inv) % q
        factors = a[:, col].copy()
        factors[r] = 0
        a = (a - np.outer(factors, a[r])) % q
        t = (t - np.outer(factors, t[r])) % q
        pivots.append(col)
        r += 1
    return a, t, pivots


@dataclass(frozen=True, eq=False)
class LinearMap:
    """An l x n matrix over GF(q), rank cached at construction.

    ``cols`` only needs to be passed for matrices with zero rows, where
    it cannot be inferred from the entries.
    """

    field: FieldSpec
    entries: tuple
    cols: Optional[int] = None

    def __post_init__(self):
        q = self.field.q
        rows = tuple(tuple(int(e) % q for e in row) for row in self.entries)
        object.__setattr__(self, "entries", rows)
        if rows:
            n = len(rows[0])
            if any(len(r) != n for r in rows):
                raise ValueError("ragged matrix")
            if self.cols is not None and self.cols != n:
                raise ValueError("cols inconsistent with entries")
            object.__setattr__(self, "cols", n)
        else:
            if self.cols is None or self.cols < 1:
                raise ValueError("a matrix with no rows needs an explicit column count")
        arr = np.array(rows, dtype=np.int64).reshape(len(rows), self.cols)
        arr.flags.writeable = False
        object.__setattr__(self, "_arr", arr)
        object.__setattr__(self, "_rank", self._compute_rank())
        object.__setattr__(self, "_solver", None)

    def _compute_rank(self) -> int:
        if self.rows == 0:
            return 0
        if self.field.q == 2:
            packed = [int("".join(str(b) for b in reversed(row)), 2) if any(row) else 0
                      for row in self.entries]
            return _rank_gf2_bitpacked(packed)
        _, _, pivots = _row_reduce(self._arr, self.field)
        return len(pivots)

    @classmethod
    def from_array(cls, field: FieldSpec, arr) -> "LinearMap":
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise ValueError("expected a 2-d array")
        return cls(field, tuple(tuple(int(v) for v in row) for row in arr), cols=arr.shape[1])

    @classmethod
    def identity(cls, field: FieldSpec, n: int) -> "LinearMap":
        return cls.from_array(field, np.eye(n, dtype=np.int64))

    @classmethod
    def zeros(cls, field: FieldSpec, rows: int, cols: int) -> "LinearMap":
        if rows == 0:
            return cls(field, (), cols=cols)
        return cls.from_array(field, np.zeros((rows, cols), dtype=np.int64))

    @property
    def rows(self) -> int:
        return len(self.entries)

    @property
    def rank(self) -> int:
        return self._rank

    def image_size(self) -> int:
        """|Im A| = q^rank, the true image size even for rank-deficient maps."""
        return self.field.q ** self._rank

    def as_array(self) -> np.ndarray:
        return self._arr

    def solver(self) -> "AffineSolver":
        if self._solver is None:
            object.__setattr__(self, "_solver", AffineSolver(self))
        return self._solver

    def __eq__(self, other):
        return (isinstance(other, LinearMap) and self.field == other.field
                and self.cols == other.cols and self.entries == other.entries)

    def __hash__(self):
        return hash((self.field, self.cols, self.entries))


@dataclass(frozen=True)
class AffineSolution:
    """Solution set of A x = c: a particular solution plus a null-space basis.

    ``particular is None`` marks an inconsistent (empty) system.  When
    non-empty, the coset is particular + span(null_basis) and has exactly
    q^(n - rank) members.
    """

    field: FieldSpec
    n: int
    particular: Optional[GfVector]
    null_basis: tuple

    @property
    def is_empty(self) -> bool:
        return self.particular is None

    @property
    def size(self) -> int:
        if self.is_empty:
            return 0
        return self.field.q ** len(self.null_basis)


class AffineSolver:
    """Solves A x = c for many right-hand sides from a single elimination."""

    def __init__(self, a: LinearMap):
        self.map = a
        self.field = a.field
        self.n = a.cols
        rref, transform, pivots = _row_reduce(a.as_array(), a.field) if a.rows else (
            np.zeros((0, a.cols), dtype=np.int64), np.zeros((0, 0), dtype=np.int64), [])
        self._rref = rref
        self._transform = transform
        self._pivots = pivots
        q = a.field.q
        free = [c for c in range(a.cols) if c not in pivots]
        basis = []
        for f in free:
            v = np.zeros(a.cols, dtype=np.int64)
            v[f] = 1
            for j, p in enumerate(pivots):
                v[p] = (-rref[j, f]) % q
            basis.append(GfVector.from_array(a.field, v))
        self.null_basis = tuple(basis)
        self._basis_arr = (np.array([b.entries for b in basis], dtype=np.int64)
                           if basis else np.zeros((0, a.cols), dtype=np.int64))

    def solve(self, c: GfVector) -> AffineSolution:
        if len(c) != self.map.rows or c.field != self.field:
            raise ValueError("right-hand side does not match the matrix")
        r = len(self._pivots)
        if self.map.rows:
            t = (self._transform @ c.as_array()) % self.field.q
            if np.any(t[r:]):
                return AffineSolution(self.field, self.n, None, self.null_basis)
        else:
            t = np.zeros(0, dtype=np.int64)
        x = np.zeros(self.n, dtype=np.int64)
        for j, p in enumerate(self._pivots):
            x[p] = t[j]
        return AffineSolution(self.field, self.n, GfVector.from_array(self.field, x),
                              self.null_basis)

    def null_basis_array(self) -> np.ndarray:
        return self._basis_arr


def matvec(a: LinearMap, x: GfVector) -> GfVector:
    """A x mod q.  Dimensions and fields must match."""
    if a.field != x.field:
        raise ValueError("field mismatch")
    if a.cols != len(x):
        raise ValueError(f"dimension mismatch: {a.rows}x{a.cols} map, length-{len(x)} vector")
    if a.rows == 0:
        return GfVector(a.field, ())
    out = (a.as_array() @ x.as_array()) % a.field.q
    return GfVector.from_array(a.field, out)


def rank(a: LinearMap) -> int:
    return a.rank


def solve_affine(a: LinearMap, c: GfVector) -> AffineSolution:
    """Solution set of A x = c (empty marker when inconsistent)."""
    return a.solver().solve(c)


def enumerate_coset(sol: AffineSolution, cap: int = COSET_ENUMERATION_CAP) -> Iterator[GfVector]:
    """Yield each coset member exactly once, in a deterministic order."""
    if sol.is_empty:
        return
    if sol.size > cap:
        raise CapExceededError(f"coset of size {sol.size} is too large to enumerate (cap {cap})")
    q = sol.field.q
    part = sol.particular.as_array()
    basis = [b.as_array() for b in sol.null_basis]
    for coeffs in itertools.product(range(q), repeat=len(basis)):
        v = part.copy()
        for coef, b in zip(coeffs, basis):
            if coef:
                v = v + coef * b
        yield GfVector.from_array(sol.field, v % q)


def coset_array(sol: AffineSolution, cap: int = COSET_ENUMERATION_CAP) -> np.ndarray:
    """All coset members as a (size, n) array, same order as enumerate_coset."""
    if sol.is_empty:
        return np.zeros((0, sol.n), dtype=np.int64)
    if sol.size > cap:
        raise CapExceededError(f"coset of size {sol.size} is too large to enumerate (cap {cap})")
    q = sol.field.q
    d = len(sol.null_basis)
    part = sol.particular.as_array()
    if d == 0:
        return part[None, :].copy()
    coeffs = np.indices((q,) * d).reshape(d, -1).T  # (q^d, d), row-major counting
    basis = np.array([b.entries for b in sol.null_basis], dtype=np.int64)
    return (part[None, :] + coeffs @ basis) % q


def stack_maps(maps: Sequence[LinearMap]) -> LinearMap:
    """Vertically stack maps sharing a field and column count."""
    if not maps:
        raise ValueError("nothing to stack")
    field, cols = maps[0].field, maps[0].cols
    if any(m.field != field or m.cols != cols for m in maps):
        raise ValueError("maps must share field and column count")
    rows = tuple(row for m in maps for row in m.entries)
    return LinearMap(field, rows, cols=cols)


def concat_vectors(vectors: Sequence[GfVector], field: FieldSpec) -> GfVector:
    entries = tuple(e for v in vectors for e in v.entries)
    return GfVector(field, entries)


def format_matrix(a: LinearMap) -> str:
    lines = [f"{a.field.q} {a.rows} {a.cols}"]
    lines += [" ".join(str(e) for e in row) for row in a.entries]
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> LinearMap:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty matrix text")
    q, rows, cols = (int(tok) for tok in lines[0].split())
    if len(lines) != rows + 1:
        raise ValueError(f"expected {rows} matrix rows, found {len(lines) - 1}")
    field = FieldSpec(q)
    entries = []
    for ln in lines[1:]:
        row = tuple(int(tok) for tok in ln.split())
        if len(row) != cols:
            raise ValueError("row length does not match the header")
        entries.append(row)
    return LinearMap(field, tuple(entries), cols=cols)


def write_matrix(path, a: LinearMap) -> None:
    with open(path, "w") as fh:
        fh.write(format_matrix(a))


def read_matrix(path) -> LinearMap:
    with open(path) as fh:
        return parse_matrix(fh.read())
