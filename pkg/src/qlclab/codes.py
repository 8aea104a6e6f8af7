"""Coset codes, quasi-linear codes (QLCs) and nested QLC pairs/ensembles.

Codeword sets are kept as sorted, deduplicated int64 arrays of packed
base-q words (see :func:`qlclab.field.pack`), which makes set algebra and
Minkowski sums cheap at the blocklengths this package targets.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from . import prob
from .errors import CapExceededError, DEFAULT_CAP, EmptyTypicalSetError, PAIR_CAP
from .field import (
    FieldError,
    FieldMatrix,
    FieldVec,
    check_modulus,
    encode_many,
    make_rng,
    pack,
    random_matrix,
    random_vec,
    row_basis,
    row_space_intersection,
    solve_left,
    unpack,
)
from .prob import Pmf

# Above this ambient size sums fall back to explicit pair enumeration.
DENSE_LIMIT = 2**20


@dataclass(frozen=True, eq=False)
class CodewordSet:
    words: np.ndarray
    n: int
    q: int

    def __post_init__(self):
        w = np.unique(np.asarray(self.words, dtype=np.int64).reshape(-1))
        w.setflags(write=False)
        object.__setattr__(self, "words", w)

    @classmethod
    def from_vectors(cls, vectors, q: int) -> "CodewordSet":
        V = np.asarray(vectors, dtype=np.int64)
        if V.ndim == 1:
            V = V.reshape(1, -1)
        return cls(pack(V, q), V.shape[1], q)

    @property
    def size(self) -> int:
        return int(self.words.size)

    def __len__(self):
        return self.size

    @property
    def rate(self) -> float:
        """(1/n) log2 |C|."""
        return math.log2(self.size) / self.n if self.size else -math.inf

    def vectors(self) -> np.ndarray:
        return unpack(self.words, self.n, self.q)

    def __contains__(self, v) -> bool:
        data = v.data if isinstance(v, FieldVec) else v
        w = int(pack(np.asarray(data).reshape(1, -1), self.q)[0])
        i = np.searchsorted(self.words, w)
        return bool(i < self.size and self.words[i] == w)

    def __eq__(self, other):
        return (
            isinstance(other, CodewordSet)
            and (self.n, self.q) == (other.n, other.q)
            and np.array_equal(self.words, other.words)
        )

    def __hash__(self):
        return hash((self.n, self.q, self.words.tobytes()))

    def __repr__(self):
        return f"CodewordSet(size={self.size}, n={self.n}, q={self.q})"

    def translate(self, b) -> "CodewordSet":
        bvec = np.asarray(b.data if isinstance(b, FieldVec) else b, dtype=np.int64)
        return CodewordSet.from_vectors((self.vectors() + bvec) % self.q, self.q) \
            if self.size else self

    def scale(self, alpha: int) -> "CodewordSet":
        a = int(alpha) % self.q
        if a == 1:
            return self
        return CodewordSet(pack((self.vectors() * a) % self.q, self.q), self.n, self.q)


def _check_compatible(A: CodewordSet, B: CodewordSet):
    if A.q != B.q:
        raise FieldError(f"modulus mismatch: {A.q} vs {B.q}")
    if A.n != B.n:
        raise FieldError(f"blocklength mismatch: {A.n} vs {B.n}")


def _sum_dense(A: CodewordSet, B: CodewordSet) -> CodewordSet:
    # Convolve indicator functions over the group Z_q^n.  Counts are
    # integers bounded by |A||B|, so rounding the FFT result is exact here.
    size = A.q**A.n
    shape = (A.q,) * A.n
    ia = np.zeros(size)
    ib = np.zeros(size)
    ia[A.words] = 1.0
    ib[B.words] = 1.0
    fa = np.fft.fftn(ia.reshape(shape))
    fb = np.fft.fftn(ib.reshape(shape))
    conv = np.fft.ifftn(fa * fb).real.reshape(-1)
    return CodewordSet(np.nonzero(conv > 0.5)[0], A.n, A.q)


def _sum_pairs(A: CodewordSet, B: CodewordSet, pair_cap: int) -> CodewordSet:
    if A.size * B.size > pair_cap:
        raise CapExceededError(
            f"sumset needs {A.size * B.size} pair operations (cap {pair_cap})"
        )
    small, big = (A, B) if A.size <= B.size else (B, A)
    parts = []
    chunk = max(1, 2**22 // max(big.size, 1))
    if A.q == 2:
        for i in range(0, small.size, chunk):
            parts.append(np.unique(np.bitwise_xor.outer(small.words[i:i + chunk], big.words)))
    else:
        bv = big.vectors()
        sv = small.vectors()
        weights = A.q ** np.arange(A.n, dtype=np.int64)
        for i in range(0, small.size, chunk):
            s = (sv[i:i + chunk, None, :] + bv[None, :, :]) % A.q
            parts.append(np.unique(s.reshape(-1, A.n) @ weights))
    words = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
    return CodewordSet(words, A.n, A.q)


def sumset(A: CodewordSet, B: CodewordSet, pair_cap: int = PAIR_CAP,
           method: str = "auto") -> CodewordSet:
    """Minkowski sum {a + b} over GF(q)^n."""
    _check_compatible(A, B)
    if A.size == 0 or B.size == 0:
        return CodewordSet(np.zeros(0, dtype=np.int64), A.n, A.q)
    if method == "auto":
        dense_ok = A.n * math.log2(A.q) <= math.log2(DENSE_LIMIT)
        method = "dense" if dense_ok and A.size * B.size > 4096 else "pairs"
    if method == "dense":
        return _sum_dense(A, B)
    if method == "pairs":
        return _sum_pairs(A, B, pair_cap)
    raise ValueError(f"unknown sumset method {method!r}")


def sumset_l_copies(C: CodewordSet, l: int, cap: int = DEFAULT_CAP,
                    pair_cap: int = PAIR_CAP) -> CodewordSet:
    """The l-fold Minkowski sum C + C + ... + C."""
    if l < 1:
        raise ValueError("l must be at least 1")
    S = C
    for _ in range(l - 1):
        S = sumset(S, C, pair_cap=pair_cap)
        if S.size > cap:
            raise CapExceededError(f"intermediate sumset of size {S.size} exceeds cap {cap}")
    return S


def scaled_sum(alpha, C1: CodewordSet, beta, C2: CodewordSet,
               pair_cap: int = PAIR_CAP) -> CodewordSet:
    """{alpha*c1 + beta*c2 : c1 in C1, c2 in C2}."""
    _check_compatible(C1, C2)
    return sumset(C1.scale(int(alpha)), C2.scale(int(beta)), pair_cap=pair_cap)


# ---------------------------------------------------------------------------
# Code specifications


@dataclass(frozen=True)
class CosetCodeSpec:
    G: FieldMatrix
    b: FieldVec

    def __post_init__(self):
        if self.G.q != self.b.q:
            raise FieldError("modulus mismatch between G and b")
        if self.G.cols != len(self.b):
            raise FieldError(f"G has {self.G.cols} columns but b has length {len(self.b)}")

    @property
    def q(self):
        return self.G.q

    @property
    def n(self):
        return self.G.cols

    @property
    def nominal_rate(self) -> float:
        return self.G.rows / self.n * math.log2(self.q)


def materialize_coset(spec: CosetCodeSpec, cap: int = DEFAULT_CAP) -> CodewordSet:
    """{uG + b : u in GF(q)^k}, enumerated over a basis of the row space."""
    q = spec.q
    basis = row_basis(spec.G, q)
    r = basis.shape[0]
    if q**r > cap:
        raise CapExceededError(f"coset code has {q}^{r} codewords (cap {cap})")
    msgs = unpack(np.arange(q**r, dtype=np.int64), r, q) if r else np.zeros((1, 0), dtype=np.int64)
    words = (encode_many(msgs, basis.reshape(r, spec.n), q) + spec.b.data) % q
    return CodewordSet.from_vectors(words, q)


EpsLike = Union[float, Sequence[float]]


def _eps_tuple(eps: EpsLike, m: int) -> Tuple[float, ...]:
    if np.isscalar(eps):
        out = (float(eps),) * m
    else:
        out = tuple(float(e) for e in eps)
    if len(out) != m or min(out) <= 0:
        raise ValueError("need one positive epsilon per component")
    return out


@dataclass(frozen=True)
class QlcSpec:
    """C = {sum_i u_i G_i + b : u_i in A_eps^{k_i}(U_i)}.

    ``eps`` may be a single value or one value per component.
    """

    n: int
    k: Tuple[int, ...]
    U: Tuple[Pmf, ...]
    G: Tuple[FieldMatrix, ...]
    b: FieldVec
    eps: EpsLike = 0.05

    def __post_init__(self):
        object.__setattr__(self, "k", tuple(int(x) for x in self.k))
        object.__setattr__(self, "U", tuple(self.U))
        object.__setattr__(self, "G", tuple(self.G))
        m = self.m
        if m < 1:
            raise ValueError("a QLC needs at least one component")
        if not (len(self.U) == len(self.G) == m):
            raise ValueError("k, U and G must have one entry per component")
        q = self.b.q
        if len(self.b) != self.n:
            raise FieldError(f"dither length {len(self.b)} != n = {self.n}")
        for i, (ki, Ui, Gi) in enumerate(zip(self.k, self.U, self.G)):
            if Gi.q != q or Ui.size != q:
                raise FieldError(f"component {i} is not over GF({q})")
            if Gi.shape != (ki, self.n):
                raise FieldError(f"G_{i} has shape {Gi.shape}, expected {(ki, self.n)}")
        object.__setattr__(self, "eps", _eps_tuple(self.eps, m))
        if self.nominal_rate > math.log2(q) + 1e-12:
            warnings.warn(
                f"nominal rate {self.nominal_rate:.4f} exceeds log2 q = {math.log2(q):.4f}; "
                "the index map will not be injective",
                stacklevel=3,
            )

    @property
    def m(self) -> int:
        return len(self.k)

    @property
    def q(self) -> int:
        return self.b.q

    @property
    def nominal_rate(self) -> float:
        """sum_i (k_i/n) H(U_i): the large-n rate."""
        return sum(ki / self.n * prob.entropy(Ui) for ki, Ui in zip(self.k, self.U))

    def stacked_generator(self) -> FieldMatrix:
        return FieldMatrix(np.concatenate([G.data for G in self.G], axis=0), self.q)

    def predicted_sumset_rate(self, l: int) -> float:
        return sum(ki / self.n * prob.entropy(prob.convolve_power(Ui, l))
                   for ki, Ui in zip(self.k, self.U))


@dataclass(frozen=True, eq=False)
class QlcCodebook:
    spec: QlcSpec
    codewords: CodewordSet
    index_count: int

    @property
    def rate(self) -> float:
        return self.codewords.rate

    @property
    def size(self) -> int:
        return self.codewords.size

    @property
    def injective(self) -> bool:
        return self.codewords.size == self.index_count


def component_images(spec: QlcSpec, cap: int = DEFAULT_CAP):
    """Per-component typical index sets and their images under G_i."""
    sets = []
    for i, (ki, Ui, ei) in enumerate(zip(spec.k, spec.U, spec.eps)):
        A = prob.enumerate_typical(ki, Ui, ei, cap=cap)
        if A.shape[0] == 0:
            raise EmptyTypicalSetError(
                f"component {i}: A_eps^{ki}(U_{i}) is empty at eps={ei}"
            )
        sets.append(A)
    return sets


def materialize_qlc(spec: QlcSpec, cap: int = DEFAULT_CAP,
                    pair_cap: int = PAIR_CAP) -> QlcCodebook:
    index_sets = component_images(spec, cap)
    count = math.prod(A.shape[0] for A in index_sets)
    if count > cap:
        raise CapExceededError(f"{count} index tuples exceed the enumeration cap {cap}")
    q = spec.q
    total = None
    for A, G in zip(index_sets, spec.G):
        img = CodewordSet.from_vectors(encode_many(A, G.data, q), q)
        total = img if total is None else sumset(total, img, pair_cap=pair_cap)
    return QlcCodebook(spec, total.translate(spec.b), count)


def coset_as_qlc(G: FieldMatrix, b: FieldVec) -> QlcSpec:
    """The coset code {uG + b} written as a one-component QLC with vacuous typicality."""
    return QlcSpec(G.cols, (G.rows,), (Pmf.uniform(G.q),), (G,), b, eps=1.0)


def random_qlc(n: int, k: Sequence[int], U: Sequence[Pmf], q: int, eps: EpsLike,
               seed=None) -> QlcSpec:
    rng = make_rng(seed)
    G = tuple(random_matrix(ki, n, q, rng) for ki in k)
    b = random_vec(n, q, rng)
    return QlcSpec(n, tuple(k), tuple(U), G, b, eps)


# ---------------------------------------------------------------------------
# Nested pairs and ensembles


@dataclass(frozen=True)
class NqlcEnsembleSpec:
    """l QLCs sharing generator matrices G_i; each member has its own dither and index PMFs."""

    n: int
    k: Tuple[int, ...]
    G: Tuple[FieldMatrix, ...]
    dithers: Tuple[FieldVec, ...]
    U: Tuple[Tuple[Pmf, ...], ...]
    eps: EpsLike = 0.05

    def __post_init__(self):
        object.__setattr__(self, "k", tuple(int(x) for x in self.k))
        object.__setattr__(self, "G", tuple(self.G))
        object.__setattr__(self, "dithers", tuple(self.dithers))
        object.__setattr__(self, "U", tuple(tuple(u) for u in self.U))
        if len(self.dithers) != len(self.U):
            raise ValueError("one dither per member is required")
        for j in range(len(self.dithers)):
            self.member(j)  # validates

    @property
    def size(self) -> int:
        return len(self.dithers)

    @property
    def m(self) -> int:
        return len(self.k)

    @property
    def q(self) -> int:
        return self.dithers[0].q

    def member(self, j: int) -> QlcSpec:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return QlcSpec(self.n, self.k, self.U[j], self.G, self.dithers[j], self.eps)

    def materialize(self, cap: int = DEFAULT_CAP):
        return [materialize_qlc(self.member(j), cap) for j in range(self.size)]


class NqlcPairSpec(NqlcEnsembleSpec):
    """An ensemble with exactly two members."""

    def __post_init__(self):
        super().__post_init__()
        if self.size != 2:
            raise ValueError("an NQLC pair has exactly two members")

    @property
    def b1(self):
        return self.dithers[0]

    @property
    def b2(self):
        return self.dithers[1]

    @property
    def U1(self):
        return self.U[0]

    @property
    def U2(self):
        return self.U[1]


def random_nqlc_pair(n: int, k: Sequence[int], U1: Sequence[Pmf], U2: Sequence[Pmf],
                     q: int, eps: EpsLike, seed=None) -> NqlcPairSpec:
    """Draw shared G_i and independent dithers b1, b2 uniformly."""
    rng = make_rng(seed)
    G = tuple(random_matrix(ki, n, q, rng) for ki in k)
    b1 = random_vec(n, q, rng)
    b2 = random_vec(n, q, rng)
    return NqlcPairSpec(n, tuple(k), G, (b1, b2), (tuple(U1), tuple(U2)), eps)


def nlc_pair_as_nqlc(k_inner: int, k_outer: int, k_outer2: int, n: int, q: int,
                     seed=None, dithers: Optional[Tuple[FieldVec, FieldVec]] = None) -> NqlcPairSpec:
    """Embed a nested-linear-code pair as an m=3 NQLC pair.

    Components: the shared inner generator (uniform in both members), the
    first outer increment (uniform in member 1, constant in member 2) and
    the second outer increment (constant in member 1, uniform in member 2).
    """
    q = check_modulus(q)
    if not (0 < k_inner < min(k_outer, k_outer2) and max(k_outer, k_outer2) <= n):
        raise ValueError("need 0 < k_inner < min(k_outer, k_outer2) and max(...) <= n")
    rng = make_rng(seed)
    k = (k_inner, k_outer - k_inner, k_outer2 - k_inner)
    G = tuple(random_matrix(ki, n, q, rng) for ki in k)
    if dithers is None:
        dithers = (FieldVec.zeros(n, q), FieldVec.zeros(n, q))
    uni, const = Pmf.uniform(q), Pmf.point_mass(q, 0)
    U = ((uni, uni, const), (uni, const, uni))
    # eps = 1 makes uniform components vacuous; constants stay pinned at 0.
    return NqlcPairSpec(n, k, G, tuple(dithers), U, eps=1.0)


# ---------------------------------------------------------------------------
# Binning


@dataclass(frozen=True, eq=False)
class BinnedCodebook:
    base: QlcCodebook
    bins: np.ndarray
    bin_count: int
    bin_rate: float

    def bin_of(self, word: int) -> int:
        words = self.base.codewords.words
        i = int(np.searchsorted(words, word))
        if i >= words.size or words[i] != word:
            raise KeyError(word)
        return int(self.bins[i])

    def members(self, index: int) -> np.ndarray:
        return self.base.codewords.words[self.bins == index]

    def occupancy(self) -> np.ndarray:
        return np.bincount(self.bins, minlength=self.bin_count)


def bin_count_for_rate(n: int, bin_rate: float) -> int:
    return max(1, int(round(2.0 ** (n * bin_rate))))


def bin_codebook(C: QlcCodebook, bin_rate: float, seed=None) -> BinnedCodebook:
    """Assign every codeword an i.i.d. uniform bin among round(2^{n*bin_rate})."""
    if bin_rate < 0:
        raise ValueError("bin rate must be nonnegative")
    rng = make_rng(seed)
    count = bin_count_for_rate(C.spec.n, bin_rate)
    bins = rng.integers(0, count, size=C.size, dtype=np.int64)
    bins.setflags(write=False)
    return BinnedCodebook(C, bins, count, bin_rate)


# ---------------------------------------------------------------------------
# Ensemble intersections


def _coset_intersection(o1, B1, o2, B2, q):
    """(o1 + span B1) ∩ (o2 + span B2) as (offset, basis), or None if empty."""
    stacked = np.concatenate([B1, B2], axis=0)
    x = solve_left(stacked, (o2 - o1) % q, q)
    if x is None:
        return None
    s = (x[: B1.shape[0]] @ B1) % q if B1.shape[0] else np.zeros_like(o1)
    return (o1 + s) % q, row_space_intersection(B1, B2, q)


def ensemble_intersection_rates(specs: Sequence[CosetCodeSpec]) -> Dict[Tuple[int, ...], float]:
    """r_J = (1/n) log2 |∩_{j in J} C_j| for every nonempty J.

    Disjoint cosets get the sentinel ``-inf``.
    """
    if not specs:
        return {}
    if len(specs) > 4:
        raise ValueError("at most four codes are supported")
    q, n = specs[0].q, specs[0].n
    for s in specs:
        if (s.q, s.n) != (q, n):
            raise FieldError("all codes must share q and n")
    cosets = [(np.asarray(s.b.data) % q, row_basis(s.G, q)) for s in specs]
    out = {}
    for size in range(1, len(specs) + 1):
        for J in itertools.combinations(range(len(specs)), size):
            o, B = cosets[J[0]]
            cur = (o, B)
            for j in J[1:]:
                cur = _coset_intersection(cur[0], cur[1], *cosets[j], q)
                if cur is None:
                    break
            out[J] = -math.inf if cur is None else cur[1].shape[0] * math.log2(q) / n
    return out


# ---------------------------------------------------------------------------
# Text interchange


def export_codebook(C: CodewordSet) -> str:
    """Header line ``q n count`` then one codeword per line (position 0 first)."""
    lines = [f"{C.q} {C.n} {C.size}"]
    sep = "" if C.q <= 10 else ","
    for row in C.vectors():
        lines.append(sep.join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"


def import_codebook(text: str) -> CodewordSet:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ValueError("empty codebook file")
    q, n, count = (int(t) for t in lines[0].split())
    check_modulus(q)
    body = lines[1:]
    if len(body) != count:
        raise ValueError(f"header says {count} codewords, found {len(body)}")
    rows = []
    for ln in body:
        digits = [int(t) for t in (ln.split(",") if "," in ln or q > 10 else ln)]
        if len(digits) != n or min(digits, default=0) < 0 or max(digits, default=0) >= q:
            raise ValueError(f"bad codeword line {ln!r}")
        rows.append(digits)
    if not rows:
        return CodewordSet(np.zeros(0, dtype=np.int64), n, q)
    return CodewordSet.from_vectors(np.array(rows), q)
