"""The three-descriptions example: a binary symmetric source, two NQLC
descriptions over GF(3) and a third description carrying V1 + 2 V2.

Also houses a small data-driven evaluator for entropy inequality systems
(covering bounds of the form H(. | X) >= RHS and packing bounds of the form
H(. | .) <= RHS), with the example's instantiation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from . import prob
from .bounds import CoveringBoundReport, CoveringScenario, eval_nqlc_bounds
from .errors import DEFAULT_CAP, InvalidScenarioError
from .prob import JointPmf, Pmf

SQRT2 = math.sqrt(2.0)
LOG3 = math.log2(3)
D0_LO, D0_HI = 1e-6, 0.5 - 1e-6


def hb(p: float) -> float:
    """Binary entropy in bits; arguments outside [0, 1] are rejected."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"binary entropy argument {p} outside [0, 1]")
    return prob.entropy([p, 1.0 - p])


def _check_d0(d0: float) -> float:
    d0 = float(d0)
    if not 0.0 < d0 < 0.5:
        raise InvalidScenarioError(f"D0 must lie in (0, 1/2), got {d0}")
    return d0


def table1(d0: float) -> np.ndarray:
    """2 x 4 table of P(X = x, (V1, V2) = v) with columns 00, 01, 10, 11."""
    d0 = _check_d0(d0)
    a, c = (SQRT2 - 1) / 2, (3 - 2 * SQRT2) / 2
    return np.array([
        [(1 - d0) / 2, a * d0, a * d0, c * d0],
        [d0 / 2, a * (1 - d0), a * (1 - d0), c * (1 - d0)],
    ])


def build_table1_joint(d0: float) -> JointPmf:
    """The example's joint on X x GF(3) x GF(3); V-values 2 carry no mass."""
    t = table1(d0)
    out = np.zeros((2, 3, 3))
    for col, (v1, v2) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
        out[:, v1, v2] = t[:, col]
    return JointPmf(out, ("X", "V1", "V2"))


def implied_distortions(joint: JointPmf) -> Dict[str, float]:
    """Hamming distortions of V1, V2 and V1 OR V2 as estimates of X."""
    P = joint.tensor
    x, v1, v2 = np.indices(P.shape)
    return {
        "D1": float(P[x != v1].sum()),
        "D2": float(P[x != v2].sum()),
        "D12": float(P[x != ((v1 + v2) > 0)].sum()),
    }


# ---------------------------------------------------------------------------
# The D0 constraint


def d0_residual(d0: float) -> float:
    """h(D0) + 2 h(sqrt2/2) + h(2(sqrt2-1) D0) + h(2(sqrt2-1)(1-D0)) - 1.

    The last argument exceeds 1 for small D0; there the term is undefined
    and the residual is reported as nan.
    """
    c = 2 * (SQRT2 - 1)
    args = (d0, SQRT2 / 2, c * d0, c * (1 - d0))
    if any(not 0.0 <= a <= 1.0 for a in args):
        return math.nan
    return hb(d0) + 2 * hb(SQRT2 / 2) + hb(c * d0) + hb(c * (1 - d0)) - 1.0


@dataclass(frozen=True)
class D0Root:
    d0: float
    residual: float

    def as_dict(self):
        return {"status": "root", "d0": self.d0, "residual": self.residual}


@dataclass(frozen=True)
class NoRoot:
    """Diagnostic for a constraint with no sign change on the search interval."""

    lo: float
    hi: float
    residual_lo: float
    residual_hi: float
    grid_min: float
    grid_max: float
    argmin: float
    monotone: str
    undefined_points: int
    grid_points: int

    def as_dict(self):
        d = {"status": "no-root"}
        d.update({k: getattr(self, k) for k in self.__dataclass_fields__})
        return d


def _monotonicity(values: np.ndarray) -> str:
    diff = np.diff(values)
    if diff.size == 0:
        return "constant"
    if np.all(diff >= 0):
        return "nondecreasing"
    if np.all(diff <= 0):
        return "nonincreasing"
    return "non-monotone"


def solve_d0_constraint(grid_points: int = 1000, tol: float = 1e-10) -> Union[D0Root, NoRoot]:
    """Find D0 in (0, 1/2) with zero residual, or explain why there is none.

    The residual is scanned on a uniform grid; a bracketed sign change is
    refined with Brent's method.  Without one, a NoRoot diagnostic reports
    endpoint residuals, the grid range and the monotonicity of the scan.
    """
    grid = np.linspace(D0_LO, D0_HI, grid_points)
    vals = np.array([d0_residual(d) for d in grid])
    ok = np.isfinite(vals)
    for i in range(grid_points - 1):
        if ok[i] and ok[i + 1] and vals[i] * vals[i + 1] <= 0:
            if vals[i] == 0:
                return D0Root(float(grid[i]), 0.0)
            root = brentq(d0_residual, grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15)
            res = d0_residual(root)
            if abs(res) <= tol:
                return D0Root(float(root), float(res))
    fin = vals[ok]
    return NoRoot(
        lo=D0_LO, hi=D0_HI,
        residual_lo=float(vals[0]), residual_hi=float(vals[-1]),
        grid_min=float(fin.min()) if fin.size else math.nan,
        grid_max=float(fin.max()) if fin.size else math.nan,
        argmin=float(grid[ok][np.argmin(fin)]) if fin.size else math.nan,
        monotone=_monotonicity(fin),
        undefined_points=int((~ok).sum()),
        grid_points=grid_points,
    )


# ---------------------------------------------------------------------------
# Parameters and rates


@dataclass(frozen=True)
class MdExampleParams:
    eps: float = 1e-4
    lam: float = 1e-3
    k1: float = 0.8
    k2: float = 0.2665
    u1_table: Tuple[float, ...] = (0.33, 0.48, 0.19)
    u2_table: Tuple[float, ...] = (0.33, 0.19, 0.48)
    q: int = 3

    def __post_init__(self):
        if self.q != 3:
            raise InvalidScenarioError("the example lives over GF(3)")
        if self.k1 <= 0 or self.k2 <= 0:
            raise InvalidScenarioError("k1/n and k2/n must be positive")
        if self.eps <= 0 or self.lam < 0:
            raise InvalidScenarioError("eps must be positive and lambda nonnegative")
        Pmf(self.u1_table)
        Pmf(self.u2_table)

    @property
    def U1(self) -> Pmf:
        return Pmf(self.u1_table)

    @property
    def U2(self) -> Pmf:
        return Pmf(self.u2_table)

    def scenario(self, d0: float) -> CoveringScenario:
        uni = Pmf.uniform(3)
        return CoveringScenario(build_table1_joint(d0), "nqlc", k_ratios=(self.k1, self.k2),
                                u1=(uni, self.U1), u2=(uni, self.U2))


@dataclass(frozen=True)
class MdRates:
    """Target rate-distortion projections plus the scheme's own rate formulas.

    ``R1``..``D23`` are the targets.  ``scheme_*`` are the coding scheme's
    description rates in two unit conventions: ``bits`` counts the uniform
    component as (k1/n) log2 3, ``printed`` counts it as k1/n.
    """

    R1: float
    R2: float
    R3: float
    D1: float
    D2: float
    D12: float
    D13: float
    D23: float
    R3_alt: float
    scheme: Dict[str, float] = field(default_factory=dict)
    entropies: Dict[str, float] = field(default_factory=dict)

    def as_dict(self):
        d = {k: getattr(self, k) for k in ("R1", "R2", "R3", "D1", "D2", "D12", "D13", "D23", "R3_alt")}
        d["scheme"] = dict(self.scheme)
        d["entropies"] = dict(self.entropies)
        return d


def example_entropies(p: MdExampleParams, d0: float) -> Dict[str, float]:
    j = build_table1_joint(d0)
    h = prob.conditional_entropy
    w12 = prob.extend_with_combination(j, {"V1": 1, "V2": 2}, 3, "W12")
    w11 = prob.extend_with_combination(j, {"V1": 1, "V2": 1}, 3, "W11")
    return {
        "H(X)": prob.joint_entropy(j, ["X"]),
        "H(V1)": prob.joint_entropy(j, ["V1"]),
        "H(V2)": prob.joint_entropy(j, ["V2"]),
        "H(V1,V2)": prob.joint_entropy(j, ["V1", "V2"]),
        "H(V1,V2|X)": h(j, ["V1", "V2"], ["X"]),
        "H(V1|X)": h(j, ["V1"], ["X"]),
        "H(V2|X)": h(j, ["V2"], ["X"]),
        "H(V1+2V2)": prob.joint_entropy(w12, ["W12"]),
        "H(V1+2V2|X)": h(w12, ["W12"], ["X"]),
        "H(V1+V2|X)": h(w11, ["W11"], ["X"]),
        "H(U1)": prob.entropy(p.U1),
        "H(U2)": prob.entropy(p.U2),
        "H(U1+2U2)": prob.entropy(prob.linear_combo_pmf(1, p.U1, 2, p.U2)),
    }


def compute_md_rates(p: MdExampleParams, d0: float) -> MdRates:
    d0 = _check_d0(d0)
    e = example_entropies(p, d0)
    r12 = (1 - hb(d0)) / 2
    d1 = 0.5 * (1 - (1 - 2 * d0) * (2 - SQRT2))
    # Two readings of the third-description target: as printed, and with
    # both terms conditioned consistently on the combination V1 + 2 V2.
    r3 = e["H(V1+2V2)"] - e["H(V1+V2|X)"] - p.eps
    r3_alt = e["H(V1+2V2)"] - e["H(V1+2V2|X)"] - p.eps
    bin12 = LOG3 - e["H(V1,V2)"] / 2 - p.lam
    bin3 = LOG3 - e["H(V1+2V2)"] - p.lam
    scheme = {}
    for conv, unit in (("bits", LOG3), ("printed", 1.0)):
        scheme[f"R1_{conv}"] = p.k1 * unit + p.k2 * e["H(U1)"] - bin12
        scheme[f"R2_{conv}"] = p.k1 * unit + p.k2 * e["H(U2)"] - bin12
        scheme[f"R3_{conv}"] = p.k1 * unit + p.k2 * e["H(U1+2U2)"] - bin3
    scheme["bin_size_12"] = bin12
    scheme["bin_size_3"] = bin3
    return MdRates(r12, r12, r3, d1, d1, d0, d0, d0, r3_alt, scheme, e)


# ---------------------------------------------------------------------------
# Covering check and sweeps


def verify_example_covering(p: MdExampleParams, d0: float) -> CoveringBoundReport:
    return eval_nqlc_bounds(p.scenario(_check_d0(d0)))


def _scenario_with(p: MdExampleParams, d0: float, which: str, value: float) -> CoveringScenario:
    if which not in ("k1", "k2"):
        raise InvalidScenarioError(f"unknown ratio {which!r}")
    base = p.scenario(d0)
    k = (value, p.k2) if which == "k1" else (p.k1, value)
    return CoveringScenario(base.joint, "nqlc", k_ratios=k, u1=base.u1, u2=base.u2)


def ratio_sweep(p: MdExampleParams, d0: float, grid: Sequence[float], which: str = "k2") -> List[dict]:
    out = []
    for v in grid:
        rep = eval_nqlc_bounds(_scenario_with(p, d0, which, float(v)))
        b = rep.binding()
        out.append({which: float(v), "binding": b.label, "min_slack": b.slack,
                    "satisfied": rep.satisfied})
    return out


def ratio_threshold(p: MdExampleParams, d0: float, which: str = "k2", tol: float = 1e-12) -> dict:
    """Lower ``which`` (k1/n or k2/n) from its configured value until a
    covering slack reaches zero; report the crossing and the binding label.
    ``value`` is None when the bounds hold all the way down to zero.
    """

    def min_slack(v):
        return eval_nqlc_bounds(_scenario_with(p, d0, which, v)).binding().slack

    hi = p.k1 if which == "k1" else p.k2
    if min_slack(hi) < 0:
        raise InvalidScenarioError(f"covering bounds already fail at the configured {which}")
    if min_slack(0.0) >= 0:
        return {"ratio": which, "value": None, "binding": None}
    v = brentq(min_slack, 0.0, hi, xtol=tol)
    label = eval_nqlc_bounds(_scenario_with(p, d0, which, v)).binding().label
    return {"ratio": which, "value": float(v), "binding": label}


# ---------------------------------------------------------------------------
# Inequality systems


@dataclass(frozen=True)
class Template:
    """H(targets | given) >= rhs (sense ">=") or <= rhs (sense "<=").

    ``rhs`` maps term names to coefficients.  Term names are rate
    parameters, ``log_q``, or ``qlc[a,b]`` for the combination rate
    sum_i (k_i/n) H(a U_{1,i} + b U_{2,i}) of the system's NQLC pair.
    """

    label: str
    targets: Tuple[str, ...]
    given: Tuple[str, ...]
    rhs: Tuple[Tuple[str, float], ...]
    sense: str = ">="

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "given", tuple(self.given))
        rhs = self.rhs.items() if isinstance(self.rhs, dict) else self.rhs
        object.__setattr__(self, "rhs", tuple((str(k), float(v)) for k, v in rhs))
        if self.sense not in (">=", "<="):
            raise InvalidScenarioError(f"unknown sense {self.sense!r}")
        if not self.targets:
            raise InvalidScenarioError(f"template {self.label} has no targets")


@dataclass(frozen=True)
class RegionConstraintSystem:
    """Named variables with a joint PMF, derived GF(q) combinations and templates."""

    joint: JointPmf
    q: int
    derived: Tuple[Tuple[str, Tuple[Tuple[str, int], ...]], ...] = ()
    templates: Tuple[Template, ...] = ()
    qlc: Optional[CoveringScenario] = None

    def __post_init__(self):
        if self.joint.names is None:
            raise InvalidScenarioError("the joint must name its variables")
        derived = self.derived.items() if isinstance(self.derived, dict) else self.derived
        derived = tuple((str(name), tuple((str(v), int(c)) for v, c in dict(coeffs).items()))
                        for name, coeffs in derived)
        object.__setattr__(self, "derived", derived)
        object.__setattr__(self, "templates", tuple(self.templates))
        known = set(self.joint.names)
        for name, coeffs in derived:
            for v, _ in coeffs:
                if v not in known:
                    raise InvalidScenarioError(f"derived {name} references undefined variable {v}")
            known.add(name)
        for t in self.templates:
            for v in t.targets + t.given:
                if v not in known:
                    raise InvalidScenarioError(f"template {t.label} references undefined variable {v}")

    def extended_joint(self) -> JointPmf:
        j = self.joint
        for name, coeffs in self.derived:
            j = prob.extend_with_combination(j, dict(coeffs), self.q, name)
        return j

    def term_value(self, term: str, rates: Dict[str, float]) -> float:
        if term == "log_q":
            return math.log2(self.q)
        if term.startswith("qlc[") and term.endswith("]"):
            if self.qlc is None:
                raise InvalidScenarioError(f"{term} needs an NQLC pair on the system")
            a, b = (int(s) for s in term[4:-1].split(","))
            return self.qlc.combo_rate(a, b)
        if term not in rates:
            raise InvalidScenarioError(f"missing rate parameter {term}")
        return float(rates[term])


@dataclass(frozen=True)
class RegionRecord:
    label: str
    sense: str
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.lhs - self.rhs if self.sense == ">=" else self.rhs - self.lhs

    def as_dict(self):
        return {"label": self.label, "sense": self.sense, "lhs": self.lhs,
                "rhs": self.rhs, "slack": self.slack}


@dataclass(frozen=True)
class RegionReport:
    records: Tuple[RegionRecord, ...]

    @property
    def feasible(self) -> bool:
        return all(r.slack >= -1e-12 for r in self.records)

    def __getitem__(self, label: str) -> RegionRecord:
        for r in self.records:
            if r.label == label:
                return r
        raise KeyError(label)

    def binding(self) -> Optional[RegionRecord]:
        return min(self.records, key=lambda r: r.slack) if self.records else None

    def as_records(self):
        return [r.as_dict() for r in self.records]


def eval_region_constraints(sys: RegionConstraintSystem, rates: Dict[str, float]) -> RegionReport:
    j = sys.extended_joint()
    recs = []
    for t in sys.templates:
        lhs = prob.conditional_entropy(j, list(t.targets), list(t.given))
        rhs = sum(c * sys.term_value(term, rates) for term, c in t.rhs)
        recs.append(RegionRecord(t.label, t.sense, lhs, rhs))
    return RegionReport(tuple(recs))


def _subsets(items):
    items = list(items)
    for mask in range(1, 1 << len(items)):
        yield [items[i] for i in range(len(items)) if mask >> i & 1]


def three_descriptions_system(p: MdExampleParams, d0: float) -> Tuple[RegionConstraintSystem, Dict[str, float]]:
    """Covering and packing templates for the example, with rates in bits.

    Covering (encoder): H(V_E | X) >= sum_{e in E} (log q - r_e) for nonempty
    E of {V1, V2}, and H(W[a,b] | X) >= log q - qlc[a,b].  Packing (decoders
    {1}, {2}, {3}, {1,2}, {1,3}, {2,3}): for every nonempty subset A of the
    decoder's codewords, H(A | rest) <= sum_{c in A} (log q + rho_c - r_c).
    Bin rates rho follow the scheme: descriptions 1 and 2 keep bins of size
    log 3 - H(V1,V2)/2 - lambda, description 3 of size log 3 - H(V1+2V2) - lambda.
    """
    d0 = _check_d0(d0)
    scen = p.scenario(d0)
    q = 3
    pairs = [(a, b) for a in range(1, q) for b in range(1, q)]
    derived = {f"W[{a},{b}]": {"V1": a, "V2": b} for a, b in pairs}
    rate_term = {"V1": "r[1]", "V2": "r[2]", "W[1,2]": "qlc[1,2]"}
    bin_term = {"V1": "rho[1]", "V2": "rho[2]", "W[1,2]": "rho[3]"}
    temps = []
    for E in _subsets(["V1", "V2"]):
        rhs: Dict[str, float] = {"log_q": float(len(E))}
        for v in E:
            rhs[rate_term[v]] = -1.0
        temps.append(Template(f"cover:{','.join(E)}", E, ("X",), rhs))
    for a, b in pairs:
        temps.append(Template(f"cover:W[{a},{b}]", (f"W[{a},{b}]",), ("X",),
                              {"log_q": 1.0, f"qlc[{a},{b}]": -1.0}))
    decoders = {"1": ["V1"], "2": ["V2"], "3": ["W[1,2]"], "12": ["V1", "V2"],
                "13": ["V1", "W[1,2]"], "23": ["V2", "W[1,2]"]}
    for dec, cw in decoders.items():
        for A in _subsets(cw):
            rest = tuple(c for c in cw if c not in A)
            rhs = {"log_q": float(len(A))}
            for c in A:
                rhs[bin_term[c]] = rhs.get(bin_term[c], 0.0) + 1.0
                rhs[rate_term[c]] = rhs.get(rate_term[c], 0.0) - 1.0
            temps.append(Template(f"pack{{{dec}}}:{','.join(A)}", A, rest, rhs, "<="))
    sys = RegionConstraintSystem(build_table1_joint(d0), q, derived, temps, scen)
    mr = compute_md_rates(p, d0)
    r1, r2 = scen.member_rate(1), scen.member_rate(2)
    r3 = scen.combo_rate(1, 2)
    rates = {
        "r[1]": r1, "r[2]": r2,
        "rho[1]": r1 - mr.scheme["bin_size_12"],
        "rho[2]": r2 - mr.scheme["bin_size_12"],
        "rho[3]": r3 - mr.scheme["bin_size_3"],
    }
    return sys, rates


# ---------------------------------------------------------------------------
# Scaled-down simulation


@dataclass(frozen=True)
class MdSimConfig:
    n: int = 6
    k: Tuple[int, int] = (4, 2)
    d0: float = 0.1
    eps: float = 0.2
    index_eps: float = 0.2
    trials: int = 50
    seed: int = 0
    cap: int = DEFAULT_CAP


def simulate_md_example(p: MdExampleParams, cfg: MdSimConfig) -> dict:
    """Encode i.i.d. source blocks with a small NQLC pair of the example's shape.

    Per trial: draw the pair, draw x, search for a pair (v1, v2) jointly
    typical with x under the example's joint, and score the decoders
    {1}: v1, {2}: v2 and {1,2}: v1 OR v2 by Hamming distortion.  Binning is
    not simulated; the full-size rates are far beyond exhaustive search.
    """
    from .experiments import covering_codebooks, find_covering_pair, trial_rng

    scen = p.scenario(cfg.d0)
    scen = CoveringScenario(scen.joint, "nqlc", k_ratios=tuple(k / cfg.n for k in cfg.k),
                            u1=scen.u1, u2=scen.u2)
    hits, d = 0, {"D1": [], "D2": [], "D12": []}
    for t in range(cfg.trials):
        rng = trial_rng(cfg.seed, t)
        C1, C2 = covering_codebooks(scen, cfg.n, cfg.index_eps, rng, cfg.cap)
        x = prob.sample(scen.joint.marginal_pmf(0), cfg.n, rng)
        found = find_covering_pair(x, C1, C2, scen.joint, cfg.eps)
        if found is None:
            continue
        hits += 1
        v1, v2 = found
        d["D1"].append(float(np.mean(v1 != x)))
        d["D2"].append(float(np.mean(v2 != x)))
        d["D12"].append(float(np.mean(((v1 + v2) > 0).astype(int) != x)))
    out = {"n": cfg.n, "k": list(cfg.k), "trials": cfg.trials,
           "coverage": hits / cfg.trials}
    for key, vals in d.items():
        out[key] = float(np.mean(vals)) if vals else math.nan
    return out
