"""Finite PMFs, entropies, GF(q) convolutions and frequency typicality.

Typicality is robust frequency typicality: a sequence is epsilon-typical
for p when every letter frequency is within epsilon of p (absolute
deviation) and letters of probability zero never occur.  Entropies are in
bits throughout.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import CapExceededError, DEFAULT_CAP
from .field import FieldError, FieldVec, check_modulus, make_rng

PROB_TOL = 1e-12
# Slack on count comparisons so that exact-rational boundaries are inclusive.
_COUNT_TOL = 1e-9


def _validate(p: np.ndarray) -> np.ndarray:
    if p.size == 0:
        raise ValueError("empty distribution")
    if not np.all(np.isfinite(p)):
        raise ValueError("probabilities must be finite")
    if p.min() < 0:
        raise ValueError("probabilities must be nonnegative")
    s = p.sum()
    if abs(s - 1.0) > PROB_TOL:
        raise ValueError(f"probabilities sum to {s!r}, not 1")
    return p


@dataclass(frozen=True, eq=False)
class Pmf:
    probs: np.ndarray
    labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        p = np.array(self.probs, dtype=float, copy=True).reshape(-1)
        _validate(p)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        if self.labels is not None:
            labels = tuple(str(x) for x in self.labels)
            if len(labels) != p.size:
                raise ValueError("one label per letter is required")
            object.__setattr__(self, "labels", labels)

    @classmethod
    def uniform(cls, a: int) -> "Pmf":
        return cls(np.full(a, 1.0 / a))

    @classmethod
    def point_mass(cls, a: int, at: int = 0) -> "Pmf":
        p = np.zeros(a)
        p[at] = 1.0
        return cls(p)

    @classmethod
    def normalized(cls, weights) -> "Pmf":
        w = np.asarray(weights, dtype=float)
        return cls(w / w.sum())

    @property
    def size(self) -> int:
        return self.probs.size

    def is_uniform(self) -> bool:
        return bool(np.allclose(self.probs, 1.0 / self.size, atol=PROB_TOL))

    def __getitem__(self, i):
        return self.probs[i]

    def __eq__(self, other):
        return isinstance(other, Pmf) and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())

    def __repr__(self):
        return f"Pmf({np.round(self.probs, 6).tolist()})"


@dataclass(frozen=True, eq=False)
class JointPmf:
    """A probability tensor, one axis per component variable."""

    tensor: np.ndarray
    names: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        t = np.array(self.tensor, dtype=float, copy=True)
        _validate(t.reshape(-1))
        t.setflags(write=False)
        object.__setattr__(self, "tensor", t)
        if self.names is not None:
            names = tuple(self.names)
            if len(names) != t.ndim or len(set(names)) != len(names):
                raise ValueError("need one distinct name per axis")
            object.__setattr__(self, "names", names)

    @property
    def ndim(self) -> int:
        return self.tensor.ndim

    @property
    def shape(self):
        return self.tensor.shape

    def axis(self, ref) -> int:
        if isinstance(ref, str):
            if self.names is None or ref not in self.names:
                raise ValueError(f"unknown component {ref!r}")
            return self.names.index(ref)
        ax = int(ref)
        if not 0 <= ax < self.ndim:
            raise ValueError(f"component index {ref} out of range")
        return ax

    def axes(self, refs) -> Tuple[int, ...]:
        if isinstance(refs, (str, int, np.integer)):
            refs = [refs]
        out = tuple(self.axis(r) for r in refs)
        if len(set(out)) != len(out):
            raise ValueError("repeated component")
        return out

    def marginal_array(self, refs) -> np.ndarray:
        keep = self.axes(refs)
        drop = tuple(a for a in range(self.ndim) if a not in keep)
        m = self.tensor.sum(axis=drop) if drop else self.tensor
        # Sum keeps axes in increasing order; permute to the requested order.
        order = np.argsort(np.argsort(keep))
        return np.transpose(m, order) if len(keep) > 1 else m

    def marginal(self, refs) -> "JointPmf":
        keep = self.axes(refs)
        names = None if self.names is None else tuple(self.names[a] for a in keep)
        return JointPmf(self.marginal_array(keep), names)

    def marginal_pmf(self, ref) -> Pmf:
        return Pmf(self.marginal_array([ref]))


def _h(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=float).reshape(-1)
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def entropy(p) -> float:
    """Shannon entropy in bits of a Pmf, JointPmf or raw probability array."""
    if isinstance(p, Pmf):
        return _h(p.probs)
    if isinstance(p, JointPmf):
        return _h(p.tensor)
    return _h(np.asarray(p))


def joint_entropy(j: JointPmf, refs) -> float:
    if isinstance(refs, (list, tuple)) and len(refs) == 0:
        return 0.0
    return _h(j.marginal_array(refs))


def conditional_entropy(j: JointPmf, targets, given=()) -> float:
    """H(targets | given) = H(targets, given) - H(given)."""
    t = j.axes(targets) if not (isinstance(targets, (list, tuple)) and not targets) else ()
    g = j.axes(given) if not (isinstance(given, (list, tuple)) and not given) else ()
    if set(t) & set(g):
        raise ValueError("target and conditioning components overlap")
    if not t:
        return 0.0
    return joint_entropy(j, t + g) - joint_entropy(j, g)


def _field_size(p: Pmf) -> int:
    try:
        return check_modulus(p.size)
    except FieldError as exc:
        raise FieldError(f"alphabet of size {p.size} is not a prime field") from exc


def _cyclic_conv(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    q = a.size
    out = np.zeros(q)
    for s in range(q):
        out += a[s] * np.roll(b, s)
    return out


def convolve_power(p: Pmf, l: int) -> Pmf:
    """Distribution of the GF(q) sum of l i.i.d. copies of p."""
    _field_size(p)
    if l < 1:
        raise ValueError("l must be at least 1")
    acc = p.probs.copy()
    for _ in range(l - 1):
        acc = _cyclic_conv(acc, p.probs)
    return Pmf(acc / acc.sum())


def scale_pmf(alpha: int, p: Pmf) -> Pmf:
    """Distribution of alpha * U for U ~ p over GF(q)."""
    q = _field_size(p)
    alpha %= q
    out = np.zeros(q)
    for u in range(q):
        out[(alpha * u) % q] += p.probs[u]
    return Pmf(out)


def linear_combo_pmf(alpha, p1: Pmf, beta, p2: Pmf) -> Pmf:
    """Distribution of alpha*U + beta*W for independent U ~ p1, W ~ p2."""
    q = _field_size(p1)
    if p2.size != q:
        raise FieldError(f"modulus mismatch: {q} vs {p2.size}")
    a, b = int(alpha) % q, int(beta) % q
    out = np.zeros(q)
    for u in range(q):
        for w in range(q):
            out[(a * u + b * w) % q] += p1.probs[u] * p2.probs[w]
    return Pmf(out / out.sum())


def extend_with_combination(j: JointPmf, coeffs, q: int, name: Optional[str] = None) -> JointPmf:
    """Append the derived variable sum_c coeffs[c] * component_c (mod q) as a new last axis.

    ``coeffs`` maps component references to field coefficients.  Referenced
    components take their symbol index as the field value, so their
    alphabets must fit inside GF(q).
    """
    q = check_modulus(q)
    items = [(j.axis(ref), int(c) % q) for ref, c in dict(coeffs).items()]
    for ax, _ in items:
        if j.shape[ax] > q:
            raise ValueError(f"component {ax} has alphabet larger than GF({q})")
    grids = np.indices(j.shape)
    w = np.zeros(j.shape, dtype=np.int64)
    for ax, c in items:
        w = (w + c * grids[ax]) % q
    out = j.tensor[..., None] * np.eye(q)[w]
    names = None
    if j.names is not None:
        names = j.names + (name or f"W{len(j.names)}",)
    return JointPmf(out, names)


# ---------------------------------------------------------------------------
# Typicality


def _letter_counts(seq: np.ndarray, a: int) -> np.ndarray:
    return np.bincount(seq, minlength=a)


def _as_symbols(seq) -> np.ndarray:
    if isinstance(seq, FieldVec):
        return np.asarray(seq.data, dtype=np.int64)
    return np.asarray(seq, dtype=np.int64).reshape(-1)


def _counts_typical(counts: np.ndarray, probs: np.ndarray, n: int, eps: float) -> np.ndarray:
    """Vectorized check over the last axis of ``counts``."""
    dev = np.abs(counts - n * probs)
    ok = np.all(dev <= n * eps + _COUNT_TOL, axis=-1)
    forbidden = probs <= 0
    if forbidden.any():
        ok &= ~np.any(counts[..., forbidden] > 0, axis=-1)
    return ok


def is_typical(seq, p: Pmf, eps: float) -> bool:
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    s = _as_symbols(seq)
    if s.size == 0:
        return False
    if s.min() < 0 or s.max() >= p.size:
        return False
    return bool(_counts_typical(_letter_counts(s, p.size), p.probs, s.size, eps))


def typical_mask(seqs: np.ndarray, p: Pmf, eps: float) -> np.ndarray:
    """Row-wise typicality of an (N, n) array of symbol sequences."""
    S = np.asarray(seqs, dtype=np.int64)
    N, n = S.shape
    counts = np.zeros((N, p.size), dtype=np.int64)
    for a in range(p.size):
        counts[:, a] = (S == a).sum(axis=1)
    in_range = (S >= 0).all(axis=1) & (S < p.size).all(axis=1)
    return _counts_typical(counts, p.probs, n, eps) & in_range


def joint_cell_index(seqs: Sequence[np.ndarray], shape) -> np.ndarray:
    idx = np.zeros_like(np.asarray(seqs[0], dtype=np.int64))
    for s, a in zip(seqs, shape):
        idx = idx * a + np.asarray(s, dtype=np.int64)
    return idx


def is_jointly_typical(seqs, j: JointPmf, eps: float) -> bool:
    """Joint frequency typicality of a tuple of equal-length sequences.

    Conditional typicality of (v1, v2) given x is the joint typicality of
    the triple (x, v1, v2).
    """
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    arrs = [_as_symbols(s) for s in seqs]
    if len(arrs) != j.ndim:
        raise ValueError(f"expected {j.ndim} sequences, got {len(arrs)}")
    n = arrs[0].size
    if any(a.size != n for a in arrs):
        raise ValueError("sequence lengths differ")
    for a, size in zip(arrs, j.shape):
        if a.size and (a.min() < 0 or a.max() >= size):
            return False
    cells = joint_cell_index(arrs, j.shape)
    counts = np.bincount(cells, minlength=j.tensor.size)
    return bool(_counts_typical(counts, j.tensor.reshape(-1), n, eps))


def typical_types(k: int, p: Pmf, eps: float) -> list:
    """All letter-count vectors of length-k typical sequences."""
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    probs = p.probs
    ranges = []
    for pa in probs:
        if pa <= 0:
            ranges.append(range(0, 1))
            continue
        lo = max(0, math.ceil(k * (pa - eps) - _COUNT_TOL))
        hi = min(k, math.floor(k * (pa + eps) + _COUNT_TOL))
        ranges.append(range(lo, hi + 1))
    types = []
    for combo in itertools.product(*ranges[:-1]):
        last = k - sum(combo)
        if last in ranges[-1]:
            types.append(tuple(combo) + (last,))
    return types


def _multinomial(counts) -> int:
    out = math.factorial(sum(counts))
    for c in counts:
        out //= math.factorial(c)
    return out


def typical_set_size(k: int, p: Pmf, eps: float) -> int:
    return sum(_multinomial(t) for t in typical_types(k, p, eps))


def typical_log_size(k: int, p: Pmf, eps: float) -> float:
    """log2 |A_eps^k(p)|, exact (no enumeration needed)."""
    size = typical_set_size(k, p, eps)
    return math.log2(size) if size else -math.inf


def _type_class(counts: Tuple[int, ...]) -> np.ndarray:
    """All sequences with exactly the given letter counts, shape (N, k)."""
    k = sum(counts)
    live = [a for a, c in enumerate(counts) if c > 0]
    if k == 0:
        return np.zeros((1, 0), dtype=np.int8)
    if len(live) == 1:
        return np.full((1, k), live[0], dtype=np.int8)
    s0 = min(live, key=lambda a: math.comb(k, counts[a]))
    c0 = counts[s0]
    combos = np.array(list(itertools.combinations(range(k), c0)), dtype=np.int64)
    rest_counts = tuple(0 if a == s0 else c for a, c in enumerate(counts))
    sub = _type_class(rest_counts)
    C, M = combos.shape[0], sub.shape[0]
    mask = np.ones((C, k), dtype=bool)
    mask[np.arange(C)[:, None], combos] = False
    rest = np.nonzero(mask)[1].reshape(C, k - c0)
    out = np.full((C, M, k), s0, dtype=np.int8)
    out[np.arange(C)[:, None, None], np.arange(M)[None, :, None], rest[:, None, :]] = sub[None, :, :]
    return out.reshape(C * M, k)


def enumerate_typical(k: int, p: Pmf, eps: float, cap: int = DEFAULT_CAP) -> np.ndarray:
    """The exact typical set A_eps^k(p) as a lexicographically sorted (N, k) array.

    Generated type class by type class, so only typical sequences are ever
    materialized; ``cap`` bounds the size of the result.
    """
    types = typical_types(k, p, eps)
    total = sum(_multinomial(t) for t in types)
    if total > cap:
        raise CapExceededError(
            f"typical set of size {total} exceeds the cap {cap}; "
            "use sample_typical for a Monte Carlo subset instead"
        )
    if total == 0:
        return np.zeros((0, k), dtype=np.int8)
    out = np.concatenate([_type_class(t) for t in types], axis=0)
    order = np.lexsort(out.T[::-1]) if k else np.arange(out.shape[0])
    return out[order]


def sample(p: Pmf, n: int, seed=None, size: Optional[int] = None) -> np.ndarray:
    rng = make_rng(seed)
    shape = n if size is None else (size, n)
    return rng.choice(p.size, size=shape, p=p.probs).astype(np.int64)


def sample_joint(j: JointPmf, n: int, seed=None) -> Tuple[np.ndarray, ...]:
    """n i.i.d. draws of the joint; returns one sequence per component."""
    rng = make_rng(seed)
    flat = rng.choice(j.tensor.size, size=n, p=j.tensor.reshape(-1))
    return tuple(np.asarray(a, dtype=np.int64) for a in np.unravel_index(flat, j.shape))


def sample_typical(k: int, p: Pmf, eps: float, count: int, seed=None, max_draws: int = 10**7) -> np.ndarray:
    """Rejection-sample ``count`` typical sequences (with repetition)."""
    rng = make_rng(seed)
    kept = []
    have = drawn = 0
    batch = max(64, 2 * count)
    while have < count:
        if drawn >= max_draws:
            raise RuntimeError("typical set too thin for rejection sampling")
        draws = sample(p, k, rng, size=batch)
        drawn += batch
        ok = draws[typical_mask(draws, p, eps)]
        kept.append(ok)
        have += ok.shape[0]
    return np.concatenate(kept)[:count]


def pmf_from_config(obj) -> Pmf:
    """Build a Pmf from a config value: a bare float list or {probs, labels}."""
    if isinstance(obj, Pmf):
        return obj
    if isinstance(obj, dict):
        return Pmf(obj["probs"], obj.get("labels"))
    return Pmf(list(obj))
