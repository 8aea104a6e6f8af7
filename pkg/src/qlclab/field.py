"""Exact arithmetic over prime fields GF(q).

Scalars, vectors and matrices are thin immutable wrappers around integer
numpy arrays.  All linear algebra (rank, kernels, row-space intersections)
is done with exact modular elimination; nothing goes through floats.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Union

import numpy as np

MAX_Q = 256

SeedLike = Union[int, np.random.Generator, np.random.SeedSequence, None]


class FieldError(ValueError):
    """Invalid modulus, mismatched moduli or incompatible shapes."""


@lru_cache(maxsize=None)
def is_prime(q: int) -> bool:
    if q < 2:
        return False
    if q < 4:
        return True
    if q % 2 == 0:
        return False
    d = 3
    while d * d <= q:
        if q % d == 0:
            return False
        d += 2
    return True


def check_modulus(q: int) -> int:
    q = int(q)
    if not is_prime(q):
        raise FieldError(f"modulus {q} is not prime")
    if q > MAX_Q:
        raise FieldError(f"modulus {q} exceeds the supported maximum {MAX_Q}")
    return q


@lru_cache(maxsize=None)
def inverse_table(q: int) -> np.ndarray:
    """inv[a] = a^{-1} mod q for a != 0 (inv[0] is left at 0)."""
    inv = np.zeros(q, dtype=np.int64)
    for a in range(1, q):
        inv[a] = pow(a, q - 2, q)
    inv.setflags(write=False)
    return inv


def make_rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.int64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FieldElem:
    value: int
    q: int

    def __post_init__(self):
        check_modulus(self.q)
        if not 0 <= int(self.value) < self.q:
            raise FieldError(f"{self.value} is not a residue mod {self.q}")
        object.__setattr__(self, "value", int(self.value))

    def _other(self, other) -> int:
        if isinstance(other, FieldElem):
            if other.q != self.q:
                raise FieldError(f"modulus mismatch: {self.q} vs {other.q}")
            return other.value
        return int(other) % self.q

    def __add__(self, other):
        return FieldElem((self.value + self._other(other)) % self.q, self.q)

    __radd__ = __add__

    def __sub__(self, other):
        return FieldElem((self.value - self._other(other)) % self.q, self.q)

    def __mul__(self, other):
        if isinstance(other, FieldVec):
            return field_scale_mul(self, other)
        return FieldElem((self.value * self._other(other)) % self.q, self.q)

    __rmul__ = __mul__

    def __neg__(self):
        return FieldElem((-self.value) % self.q, self.q)

    def inverse(self) -> "FieldElem":
        if self.value == 0:
            raise ZeroDivisionError("zero has no inverse")
        return FieldElem(int(inverse_table(self.q)[self.value]), self.q)

    def __int__(self):
        return self.value


@dataclass(frozen=True, eq=False)
class FieldVec:
    data: np.ndarray
    q: int

    def __post_init__(self):
        check_modulus(self.q)
        arr = np.asarray(self.data)
        if arr.ndim != 1:
            raise FieldError("a field vector must be one-dimensional")
        if arr.size and (arr.min() < 0 or arr.max() >= self.q):
            raise FieldError(f"entries must lie in [0, {self.q - 1}]")
        object.__setattr__(self, "data", _frozen(arr))

    @classmethod
    def zeros(cls, n: int, q: int) -> "FieldVec":
        return cls(np.zeros(n, dtype=np.int64), q)

    def __len__(self):
        return len(self.data)

    def __getitem__(self, i) -> FieldElem:
        return FieldElem(int(self.data[i]), self.q)

    def __iter__(self):
        return (FieldElem(int(v), self.q) for v in self.data)

    def _check(self, other: "FieldVec"):
        if other.q != self.q:
            raise FieldError(f"modulus mismatch: {self.q} vs {other.q}")
        if len(other) != len(self):
            raise FieldError(f"length mismatch: {len(self)} vs {len(other)}")

    def __add__(self, other: "FieldVec") -> "FieldVec":
        self._check(other)
        return FieldVec((self.data + other.data) % self.q, self.q)

    def __sub__(self, other: "FieldVec") -> "FieldVec":
        self._check(other)
        return FieldVec((self.data - other.data) % self.q, self.q)

    def __neg__(self):
        return FieldVec((-self.data) % self.q, self.q)

    def __eq__(self, other):
        return (
            isinstance(other, FieldVec)
            and other.q == self.q
            and np.array_equal(other.data, self.data)
        )

    def __hash__(self):
        return hash((self.q, self.data.tobytes()))

    def __repr__(self):
        return f"FieldVec({self.data.tolist()}, q={self.q})"


@dataclass(frozen=True, eq=False)
class FieldMatrix:
    data: np.ndarray
    q: int

    def __post_init__(self):
        check_modulus(self.q)
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise FieldError("a field matrix must be two-dimensional")
        if arr.size and (arr.min() < 0 or arr.max() >= self.q):
            raise FieldError(f"entries must lie in [0, {self.q - 1}]")
        object.__setattr__(self, "data", _frozen(arr))

    @classmethod
    def identity(cls, n: int, q: int) -> "FieldMatrix":
        return cls(np.eye(n, dtype=np.int64), q)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape

    def rank(self) -> int:
        return rank(self.data, self.q)

    def __eq__(self, other):
        return (
            isinstance(other, FieldMatrix)
            and other.q == self.q
            and np.array_equal(other.data, self.data)
        )

    def __hash__(self):
        return hash((self.q, self.data.shape, self.data.tobytes()))

    def __repr__(self):
        return f"FieldMatrix({self.data.tolist()}, q={self.q})"


def field_add(a: FieldElem, b: FieldElem) -> FieldElem:
    if a.q != b.q:
        raise FieldError(f"modulus mismatch: {a.q} vs {b.q}")
    return FieldElem((a.value + b.value) % a.q, a.q)


def field_scale_mul(alpha: FieldElem, v: FieldVec) -> FieldVec:
    if alpha.q != v.q:
        raise FieldError(f"modulus mismatch: {alpha.q} vs {v.q}")
    return FieldVec((alpha.value * v.data) % v.q, v.q)


def encode_affine(u: FieldVec, G: FieldMatrix, b: FieldVec) -> FieldVec:
    """Return uG + b over GF(q)."""
    if not (u.q == G.q == b.q):
        raise FieldError("modulus mismatch between u, G and b")
    if len(u) != G.rows or len(b) != G.cols:
        raise FieldError(
            f"dimension mismatch: u has {len(u)}, G is {G.rows}x{G.cols}, b has {len(b)}"
        )
    return FieldVec((u.data @ G.data + b.data) % G.q, G.q)


def encode_many(U: np.ndarray, G: np.ndarray, q: int) -> np.ndarray:
    """Row-wise U @ G mod q for an (N, k) batch of messages."""
    U = np.asarray(U, dtype=np.int64)
    G = np.asarray(G, dtype=np.int64)
    if U.shape[1] != G.shape[0]:
        raise FieldError(f"dimension mismatch: {U.shape} @ {G.shape}")
    if G.shape[0] == 0:
        return np.zeros((U.shape[0], G.shape[1]), dtype=np.int64)
    return (U @ G) % q


def random_matrix(k: int, n: int, q: int, seed: SeedLike = None) -> FieldMatrix:
    q = check_modulus(q)
    if k < 1 or n < 1:
        raise FieldError("matrix dimensions must be positive")
    rng = make_rng(seed)
    return FieldMatrix(rng.integers(0, q, size=(k, n), dtype=np.int64), q)


def random_vec(n: int, q: int, seed: SeedLike = None) -> FieldVec:
    q = check_modulus(q)
    if n < 1:
        raise FieldError("vector length must be positive")
    rng = make_rng(seed)
    return FieldVec(rng.integers(0, q, size=n, dtype=np.int64), q)


def _as_array(M) -> np.ndarray:
    if isinstance(M, (FieldMatrix, FieldVec)):
        return np.asarray(M.data, dtype=np.int64)
    return np.asarray(M, dtype=np.int64)


def rref(M, q: int):
    """Reduced row echelon form mod q.  Returns (R, pivot_columns)."""
    R = np.array(_as_array(M), dtype=np.int64, copy=True) % q
    if R.ndim != 2:
        raise FieldError("rref expects a matrix")
    inv = inverse_table(q)
    rows, cols = R.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.nonzero(R[r:, c])[0]
        if nz.size == 0:
            continue
        p = r + nz[0]
        if p != r:
            R[[r, p]] = R[[p, r]]
        R[r] = (R[r] * inv[R[r, c]]) % q
        others = np.nonzero(R[:, c])[0]
        others = others[others != r]
        if others.size:
            R[others] = (R[others] - np.outer(R[others, c], R[r])) % q
        pivots.append(c)
        r += 1
    return R, pivots


def rank(M, q: int) -> int:
    arr = _as_array(M)
    if arr.size == 0:
        return 0
    return len(rref(arr, q)[1])


def row_basis(M, q: int) -> np.ndarray:
    """A basis (as rows) of the row space of M."""
    arr = _as_array(M)
    if arr.shape[0] == 0:
        return arr.reshape(0, arr.shape[1])
    R, piv = rref(arr, q)
    return R[: len(piv)]


def left_kernel(M, q: int) -> np.ndarray:
    """Basis (rows) of {x : xM = 0}."""
    arr = _as_array(M)
    k = arr.shape[0]
    aug = np.concatenate([arr % q, np.eye(k, dtype=np.int64)], axis=1)
    R, piv = rref(aug, q)
    ncols = arr.shape[1]
    zero_left = [i for i in range(k) if not R[i, :ncols].any()]
    return R[zero_left, ncols:]


def solve_left(A, y, q: int) -> Optional[np.ndarray]:
    """Some x with xA = y (mod q), or None when y is outside the row space."""
    A = _as_array(A) % q
    y = _as_array(y).reshape(-1) % q
    k, n = A.shape
    if k == 0:
        return np.zeros(0, dtype=np.int64) if not y.any() else None
    # Solve A^T x^T = y^T by eliminating the augmented system.
    aug = np.concatenate([A.T, y.reshape(n, 1)], axis=1)
    R, piv = rref(aug, q)
    if k in piv:
        return None
    x = np.zeros(k, dtype=np.int64)
    for row, c in enumerate(piv):
        x[c] = R[row, k]
    return x


def row_space_intersection(G1, G2, q: int) -> np.ndarray:
    """Basis of rowspace(G1) ∩ rowspace(G2) (Zassenhaus)."""
    A = _as_array(G1) % q
    B = _as_array(G2) % q
    if A.shape[1] != B.shape[1]:
        raise FieldError(f"column mismatch: {A.shape[1]} vs {B.shape[1]}")
    n = A.shape[1]
    top = np.concatenate([A, A], axis=1)
    bottom = np.concatenate([B, np.zeros_like(B)], axis=1)
    R, _ = rref(np.concatenate([top, bottom], axis=0), q)
    out = [R[i, n:] for i in range(R.shape[0]) if not R[i, :n].any() and R[i, n:].any()]
    if not out:
        return np.zeros((0, n), dtype=np.int64)
    return np.array(out, dtype=np.int64)


def row_space_intersection_dim(G1: FieldMatrix, G2: FieldMatrix) -> int:
    if G1.q != G2.q:
        raise FieldError(f"modulus mismatch: {G1.q} vs {G2.q}")
    if G1.cols != G2.cols:
        raise FieldError(f"shape mismatch: {G1.shape} vs {G2.shape}")
    return row_space_intersection(G1.data, G2.data, G1.q).shape[0]


def pack(vectors, q: int) -> np.ndarray:
    """Pack (N, n) base-q digit rows into int64 words (digit j has weight q^j)."""
    V = np.asarray(vectors, dtype=np.int64)
    if V.ndim == 1:
        V = V.reshape(1, -1)
    n = V.shape[1]
    if n * np.log2(q) > 62:
        raise FieldError(f"q^n = {q}^{n} does not fit in a packed word")
    weights = q ** np.arange(n, dtype=np.int64)
    return V @ weights


def unpack(words, n: int, q: int) -> np.ndarray:
    w = np.asarray(words, dtype=np.int64).reshape(-1)
    weights = q ** np.arange(n, dtype=np.int64)
    return (w[:, None] // weights[None, :]) % q
