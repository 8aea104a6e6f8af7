"""Covering-bound inequality systems and second-moment exponents.

A scenario fixes a joint PMF of (X, V1, V2) with V1, V2 over GF(q) plus a
coding scheme and its rates.  Each evaluator returns one record per
inequality with ``slack = lhs - rhs``; a system holds when every slack is
nonnegative.  All quantities are in bits and evaluated at epsilon = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from . import prob
from .errors import InvalidScenarioError
from .field import check_modulus
from .prob import JointPmf, Pmf

SCHEMES = ("unstructured", "nlc", "nqlc")
X, V1, V2 = 0, 1, 2


@dataclass(frozen=True)
class CoveringScenario:
    joint: JointPmf
    scheme: str
    r1: Optional[float] = None
    r2: Optional[float] = None
    r_inner: Optional[float] = None
    k_ratios: Tuple[float, ...] = ()
    u1: Tuple[Pmf, ...] = ()
    u2: Tuple[Pmf, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "k_ratios", tuple(float(k) for k in self.k_ratios))
        object.__setattr__(self, "u1", tuple(self.u1))
        object.__setattr__(self, "u2", tuple(self.u2))
        self.validate()

    @property
    def q(self) -> int:
        return self.joint.shape[1]

    def validate(self):
        j = self.joint
        if j.ndim != 3 or j.shape[1] != j.shape[2]:
            raise InvalidScenarioError("joint must live on X x GF(q) x GF(q)")
        try:
            check_modulus(j.shape[1])
        except ValueError as exc:
            raise InvalidScenarioError(str(exc)) from exc
        if self.scheme not in SCHEMES:
            raise InvalidScenarioError(f"unknown scheme {self.scheme!r}")
        if self.scheme in ("unstructured", "nlc"):
            needed = ["r1", "r2"] + (["r_inner"] if self.scheme == "nlc" else [])
            for name in needed:
                v = getattr(self, name)
                if v is None or v < 0 or not math.isfinite(v):
                    raise InvalidScenarioError(f"{self.scheme} scheme needs a nonnegative {name}")
        else:
            m = len(self.k_ratios)
            if m == 0 or len(self.u1) != m or len(self.u2) != m:
                raise InvalidScenarioError("nqlc scheme needs k_ratios, u1 and u2 of equal length")
            if min(self.k_ratios) < 0:
                raise InvalidScenarioError("k_i/n must be nonnegative")
            for u in self.u1 + self.u2:
                if u.size != self.q:
                    raise InvalidScenarioError("index PMFs must live on GF(q)")

    def member_rate(self, which: int) -> float:
        """sum_i (k_i/n) H(U_{which,i})."""
        us = self.u1 if which == 1 else self.u2
        return sum(k * prob.entropy(u) for k, u in zip(self.k_ratios, us))

    def combo_rate(self, alpha: int, beta: int) -> float:
        """sum_i (k_i/n) H(alpha U_{1,i} + beta U_{2,i})."""
        return sum(
            k * prob.entropy(prob.linear_combo_pmf(alpha, a, beta, b))
            for k, a, b in zip(self.k_ratios, self.u1, self.u2)
        )


@dataclass(frozen=True)
class BoundRecord:
    label: str
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.lhs - self.rhs

    def as_dict(self):
        return {"label": self.label, "lhs": self.lhs, "rhs": self.rhs, "slack": self.slack}


@dataclass(frozen=True)
class CoveringBoundReport:
    scheme: str
    records: Tuple[BoundRecord, ...]

    @property
    def satisfied(self) -> bool:
        return all(r.slack >= 0 for r in self.records)

    @property
    def strictly_satisfied(self) -> bool:
        return all(r.slack > 0 for r in self.records)

    def __getitem__(self, label: str) -> BoundRecord:
        for r in self.records:
            if r.label == label:
                return r
        raise KeyError(label)

    def labels(self):
        return [r.label for r in self.records]

    def slack_vector(self) -> np.ndarray:
        return np.array([r.slack for r in self.records])

    def binding(self) -> BoundRecord:
        return min(self.records, key=lambda r: r.slack)

    def as_records(self):
        return [dict(r.as_dict(), scheme=self.scheme) for r in self.records]


def nonzero_pairs(q: int):
    return [(a, b) for a in range(1, q) for b in range(1, q)]


def combo_label(a: int, b: int) -> str:
    return f"combo[{a},{b}]"


def cond_combo_entropy(j: JointPmf, alpha: int, beta: int) -> float:
    """H(alpha V1 + beta V2 | X)."""
    ext = prob.extend_with_combination(j, {V1: alpha, V2: beta}, j.shape[1])
    return prob.conditional_entropy(ext, [3], [X])


def _require(s: CoveringScenario, scheme: str):
    if s.scheme != scheme:
        raise InvalidScenarioError(f"expected a {scheme} scenario, got {s.scheme}")


def eval_unstructured_bounds(s: CoveringScenario) -> CoveringBoundReport:
    _require(s, "unstructured")
    j = s.joint
    h = prob.conditional_entropy
    recs = (
        BoundRecord("rate-1", s.r1, prob.joint_entropy(j, [V1]) - h(j, [V1], [X])),
        BoundRecord("rate-2", s.r2, prob.joint_entropy(j, [V2]) - h(j, [V2], [X])),
        BoundRecord("sum-rate", s.r1 + s.r2, prob.joint_entropy(j, [V1, V2]) - h(j, [V1, V2], [X])),
    )
    return CoveringBoundReport("unstructured", recs)


def _structured_common(s: CoveringScenario, r1: float, r2: float) -> List[BoundRecord]:
    j = s.joint
    logq = math.log2(s.q)
    h = prob.conditional_entropy
    return [
        BoundRecord("rate-1", r1, logq - h(j, [V1], [X])),
        BoundRecord("rate-2", r2, logq - h(j, [V2], [X])),
        BoundRecord("sum-rate", r1 + r2, 2 * logq - h(j, [V1, V2], [X])),
    ]


def eval_nlc_bounds(s: CoveringScenario) -> CoveringBoundReport:
    _require(s, "nlc")
    logq = math.log2(s.q)
    recs = _structured_common(s, s.r1, s.r2)
    lhs = s.r1 + s.r2 - s.r_inner
    combos = [
        BoundRecord(combo_label(a, b), lhs, logq - cond_combo_entropy(s.joint, a, b))
        for a, b in nonzero_pairs(s.q)
    ]
    recs += combos
    recs.append(BoundRecord("combo-max", lhs, max(r.rhs for r in combos)))
    return CoveringBoundReport("nlc", tuple(recs))


def eval_nqlc_bounds(s: CoveringScenario) -> CoveringBoundReport:
    _require(s, "nqlc")
    logq = math.log2(s.q)
    recs = _structured_common(s, s.member_rate(1), s.member_rate(2))
    for a, b in nonzero_pairs(s.q):
        recs.append(BoundRecord(combo_label(a, b), s.combo_rate(a, b),
                                logq - cond_combo_entropy(s.joint, a, b)))
    return CoveringBoundReport("nqlc", tuple(recs))


def eval_bounds(s: CoveringScenario) -> CoveringBoundReport:
    return {
        "unstructured": eval_unstructured_bounds,
        "nlc": eval_nlc_bounds,
        "nqlc": eval_nqlc_bounds,
    }[s.scheme](s)


@dataclass(frozen=True)
class ExponentReport:
    """Growth rate of the expected covering-pair count and the decay rates of
    the variance-to-squared-mean terms (all per symbol, in bits).
    """

    expected_count_exponent: float
    variance_terms: Tuple[Tuple[str, float], ...]

    @property
    def covering_predicted(self) -> bool:
        return all(v < 0 for _, v in self.variance_terms)

    def as_records(self):
        out = [{"label": "expected-count", "exponent": self.expected_count_exponent}]
        out += [{"label": lab, "exponent": v} for lab, v in self.variance_terms]
        out.append({"label": "covering-predicted", "value": self.covering_predicted})
        return out


def eval_second_moment_exponents(s: CoveringScenario) -> ExponentReport:
    """Exponents of E[theta] and of var[theta]/E[theta]^2 for an NQLC pair.

    theta(x) counts codeword pairs jointly typical with x.  Each codeword
    pair is uniform on GF(q)^{2n}, so
    E[theta] ~ 2^{n(r1 + r2 + H(V1,V2|X) - 2 log q)}.  The variance terms
    come from pairs of index tuples that share the first codeword, the
    second codeword, or the value of V1 + alpha V2; covering needs all of
    them to decay.
    """
    _require(s, "nqlc")
    j = s.joint
    logq = math.log2(s.q)
    h = prob.conditional_entropy
    r1, r2 = s.member_rate(1), s.member_rate(2)
    h12 = h(j, [V1, V2], [X])
    expected = r1 + r2 + h12 - 2 * logq
    terms = [
        ("pair", -expected),
        ("member-1", -(r1 + h(j, [V1], [X]) - logq)),
        ("member-2", -(r2 + h(j, [V2], [X]) - logq)),
    ]
    for a in range(1, s.q):
        ext = prob.extend_with_combination(j, {V1: 1, V2: a}, s.q)
        # H(V1,V2|X) - H(V1,V2|X,W) = H(W|X) since W is a function of (V1, V2).
        info = h12 - h(ext, [V1, V2], [X, 3])
        terms.append((f"combo[{a}]", -s.combo_rate(1, a) + logq - info))
    return ExponentReport(expected, tuple(terms))


def scenario_from_config(cfg: dict) -> CoveringScenario:
    """Build a scenario from a parsed config section.

    Keys: ``joint`` (nested |X| x q x q list), ``scheme``, and the scheme's
    rates (``r1``/``r2``/``r_inner`` or ``k_ratios``/``u1``/``u2``).
    """
    joint = JointPmf(np.array(cfg["joint"], dtype=float), ("X", "V1", "V2"))
    scheme = cfg.get("scheme", "nqlc")
    kw = {}
    for key in ("r1", "r2", "r_inner"):
        if key in cfg:
            kw[key] = float(cfg[key])
    if scheme == "nqlc":
        kw["k_ratios"] = tuple(cfg["k_ratios"])
        kw["u1"] = tuple(prob.pmf_from_config(u) for u in cfg["u1"])
        kw["u2"] = tuple(prob.pmf_from_config(u) for u in cfg["u2"])
    return CoveringScenario(joint, scheme, **kw)
