"""Seeded Monte Carlo experiments: covering, sumset growth and point-to-point coding.

Every trial draws its randomness from ``trial_rng(master, *key)``, a
SeedSequence keyed by the master seed and the trial's coordinates, so
results do not depend on execution order or worker count.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import codes, prob
from .bounds import CoveringScenario
from .codes import materialize_qlc, random_nqlc_pair
from .errors import CapExceededError, DEFAULT_CAP, InvalidScenarioError
from .field import random_matrix, random_vec
from .prob import JointPmf, Pmf

DEFAULT_SLACK = 0.1


def trial_rng(master: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _stderr(values) -> float:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return 0.0
    return float(v.std(ddof=1) / math.sqrt(v.size))


def index_eps(U: Sequence[Pmf], eps: float) -> Tuple[float, ...]:
    """Per-component typicality slack: uniform components are left unconstrained."""
    return tuple(1.0 if u.is_uniform() else float(eps) for u in U)


@dataclass
class RunReport:
    command: str
    seed: int
    config: dict
    records: List[dict]
    rows: List[dict] = field(default_factory=list)
    wall_time: Dict[str, float] = field(default_factory=dict)

    def trend_rows(self):
        """(n, metric, value, stderr) tuples for the CSV trend table."""
        out = []
        for rec in self.records:
            for metric, value in rec.items():
                if metric in ("n", "trials", "l") or metric.endswith("_stderr"):
                    continue
                if not isinstance(value, (int, float)) or isinstance(value, bool):
                    continue
                prefix = rec.get("family", rec.get("label"))
                name = metric if prefix is None else f"{prefix}:{metric}"
                if "l" in rec and metric != "l":
                    name = f"{name}@l={rec['l']}"
                out.append((rec.get("n", ""), name, value, rec.get(f"{metric}_stderr", "")))
        return out


# ---------------------------------------------------------------------------
# Joint typicality counting


def joint_typical_matrix(x: np.ndarray, V1: np.ndarray, V2: np.ndarray,
                         joint: JointPmf, eps: float) -> np.ndarray:
    """Boolean (N1, N2) matrix: is (x, V1[a], V2[b]) jointly eps-typical?

    Each joint cell count is a product of two indicator matrices, so the
    whole table costs one matrix product per cell.
    """
    n = x.size
    nx, q1, q2 = joint.shape
    P = joint.tensor
    tol = n * eps + 1e-9
    N1, N2 = V1.shape[0], V2.shape[0]
    ok = np.ones((N1, N2), dtype=bool)
    if N1 == 0 or N2 == 0:
        return ok[:N1, :N2]
    ind2 = [(V2 == c).astype(np.float64) for c in range(q2)]
    for a in range(nx):
        xa = x == a
        for b in range(q1):
            m1 = ((V1 == b) & xa).astype(np.float64)
            for c in range(q2):
                counts = m1 @ ind2[c].T
                target = n * P[a, b, c]
                if P[a, b, c] <= 0:
                    ok &= counts < 0.5
                else:
                    ok &= np.abs(counts - target) <= tol
    return ok


def _prefilter(x, V, joint2: np.ndarray, eps: float, q_other: int) -> np.ndarray:
    """Necessary condition on one codebook: its pairwise cells with x deviate by at
    most q_other * n * eps (a sum of q_other joint cells)."""
    n = x.size
    keep = np.ones(V.shape[0], dtype=bool)
    for a in range(joint2.shape[0]):
        xa = x == a
        for b in range(joint2.shape[1]):
            cnt = ((V == b) & xa).sum(axis=1)
            if joint2[a, b] <= 0:
                keep &= cnt == 0
            else:
                keep &= np.abs(cnt - n * joint2[a, b]) <= q_other * n * eps + 1e-9
    return keep


def count_covering_pairs(x: np.ndarray, C1: np.ndarray, C2: np.ndarray, joint: JointPmf,
                         eps: float, chunk: int = 4096) -> int:
    """theta(x): the number of (c1, c2) in C1 x C2 jointly typical with x."""
    P = joint.tensor
    V1 = C1[_prefilter(x, C1, P.sum(axis=2), eps, P.shape[2])]
    V2 = C2[_prefilter(x, C2, P.sum(axis=1), eps, P.shape[1])]
    total = 0
    for i in range(0, V1.shape[0], chunk):
        total += int(joint_typical_matrix(x, V1[i:i + chunk], V2, joint, eps).sum())
    return total


def find_covering_pair(x: np.ndarray, C1: np.ndarray, C2: np.ndarray, joint: JointPmf,
                       eps: float, chunk: int = 4096):
    """Rows (c1, c2) of the first jointly typical pair in scan order, or None."""
    P = joint.tensor
    i1 = np.nonzero(_prefilter(x, C1, P.sum(axis=2), eps, P.shape[2]))[0]
    i2 = np.nonzero(_prefilter(x, C2, P.sum(axis=1), eps, P.shape[1]))[0]
    for s in range(0, i1.size, chunk):
        ok = joint_typical_matrix(x, C1[i1[s:s + chunk]], C2[i2], joint, eps)
        hits = np.argwhere(ok)
        if hits.size:
            a, b = hits[0]
            return C1[i1[s + a]], C2[i2[b]]
    return None


# ---------------------------------------------------------------------------
# Covering experiment


@dataclass(frozen=True)
class CoveringExperimentConfig:
    scenario: CoveringScenario
    n_grid: Tuple[int, ...]
    eps: float
    trials: int
    seed: int
    index_eps: float = 0.1
    cap: int = DEFAULT_CAP

    def to_dict(self):
        s = self.scenario
        d = {
            "scheme": s.scheme,
            "joint": s.joint.tensor.tolist(),
            "n_grid": list(self.n_grid),
            "eps": self.eps,
            "index_eps": self.index_eps,
            "trials": self.trials,
            "seed": self.seed,
            "cap": self.cap,
        }
        if s.scheme == "nqlc":
            d.update(k_ratios=list(s.k_ratios), u1=[u.probs.tolist() for u in s.u1],
                     u2=[u.probs.tolist() for u in s.u2])
        else:
            d.update(r1=s.r1, r2=s.r2, r_inner=s.r_inner)
        return d


def _k_for_ratio(ratio: float, n: int) -> int:
    return int(round(ratio * n))


def _random_code(n: int, size: int, q: int, rng) -> np.ndarray:
    return rng.integers(0, q, size=(size, n), dtype=np.int64)


def covering_codebooks(s: CoveringScenario, n: int, index_eps_value: float, rng,
                       cap: int = DEFAULT_CAP) -> Tuple[np.ndarray, np.ndarray]:
    """Draw one code pair of blocklength n for the scenario's scheme."""
    q = s.q
    logq = math.log2(q)
    if s.scheme == "unstructured":
        sizes = [max(1, int(round(2 ** (n * r)))) for r in (s.r1, s.r2)]
        if max(sizes) > cap:
            raise CapExceededError(f"codebook of size {max(sizes)} exceeds cap {cap}")
        return _random_code(n, sizes[0], q, rng), _random_code(n, sizes[1], q, rng)
    if s.scheme == "nlc":
        ki = int(round(s.r_inner * n / logq))
        k1 = int(round(s.r1 * n / logq))
        k2 = int(round(s.r2 * n / logq))
        G = random_matrix(max(ki, 1), n, q, rng).data[:ki]
        D1 = random_matrix(max(k1 - ki, 1), n, q, rng).data[: max(k1 - ki, 0)]
        D2 = random_matrix(max(k2 - ki, 1), n, q, rng).data[: max(k2 - ki, 0)]
        out = []
        for D in (D1, D2):
            Gm = np.concatenate([G, D], axis=0)
            b = random_vec(n, q, rng)
            if q ** Gm.shape[0] > cap:
                raise CapExceededError(f"coset code of dimension {Gm.shape[0]} exceeds cap")
            spec = codes.CosetCodeSpec(codes.FieldMatrix(Gm.reshape(-1, n), q), b)
            out.append(codes.materialize_coset(spec, cap).vectors())
        return out[0], out[1]
    k = tuple(_k_for_ratio(r, n) for r in s.k_ratios)
    keep = [i for i, ki in enumerate(k) if ki > 0]
    k = tuple(k[i] for i in keep)
    u1 = tuple(s.u1[i] for i in keep)
    u2 = tuple(s.u2[i] for i in keep)
    pair = random_nqlc_pair(n, k, u1, u2, q, 1.0, rng)
    books = []
    for j, us in enumerate((u1, u2)):
        spec = codes.QlcSpec(n, k, us, pair.G, pair.dithers[j], index_eps(us, index_eps_value))
        books.append(materialize_qlc(spec, cap))
    return books[0].codewords.vectors(), books[1].codewords.vectors()


def covering_trial(s: CoveringScenario, n: int, eps: float, index_eps_value: float,
                   rng, cap: int = DEFAULT_CAP) -> dict:
    C1, C2 = covering_codebooks(s, n, index_eps_value, rng, cap)
    x = prob.sample(s.joint.marginal_pmf(0), n, rng)
    theta = count_covering_pairs(x, C1, C2, s.joint, eps)
    return {"hit": theta > 0, "theta": theta, "size1": C1.shape[0], "size2": C2.shape[0]}


def run_covering_experiment(cfg: CoveringExperimentConfig, threads: int = 1) -> RunReport:
    s = cfg.scenario
    records, wall = [], {}
    for n in cfg.n_grid:
        t0 = time.perf_counter()
        res = _map(lambda t: covering_trial(s, n, cfg.eps, cfg.index_eps,
                                            trial_rng(cfg.seed, n, t), cfg.cap),
                   range(cfg.trials), threads)
        hits = np.array([r["hit"] for r in res], dtype=float)
        theta = np.array([r["theta"] for r in res], dtype=float)
        records.append({
            "n": n,
            "trials": cfg.trials,
            "coverage": float(hits.mean()),
            "coverage_stderr": _stderr(hits),
            "mean_theta": float(theta.mean()),
            "mean_theta_stderr": _stderr(theta),
            "mean_size1": float(np.mean([r["size1"] for r in res])),
            "mean_size2": float(np.mean([r["size2"] for r in res])),
        })
        wall[str(n)] = time.perf_counter() - t0
    return RunReport("covering", cfg.seed, cfg.to_dict(), records, wall_time=wall)


# ---------------------------------------------------------------------------
# Sumset experiment


@dataclass(frozen=True)
class QlcFamily:
    """A QLC shape that scales with n: k_i = round(ratio_i * n)."""

    name: str
    k_ratios: Tuple[float, ...]
    U: Tuple[Pmf, ...]
    eps: float = 0.05

    def spec_at(self, n: int, q: int, rng) -> codes.QlcSpec:
        k = tuple(max(1, _k_for_ratio(r, n)) for r in self.k_ratios)
        return codes.random_qlc(n, k, self.U, q, index_eps(self.U, self.eps), rng)

    def to_dict(self):
        return {"name": self.name, "k_ratios": list(self.k_ratios),
                "U": [u.probs.tolist() for u in self.U], "eps": self.eps}


@dataclass(frozen=True)
class SumsetExperimentConfig:
    families: Tuple[QlcFamily, ...]
    n_grid: Tuple[int, ...]
    l_values: Tuple[int, ...]
    seeds: int
    seed: int
    q: int = 2
    cap: int = DEFAULT_CAP

    def to_dict(self):
        return {"families": [f.to_dict() for f in self.families], "n_grid": list(self.n_grid),
                "l_values": list(self.l_values), "seeds": self.seeds, "seed": self.seed,
                "q": self.q, "cap": self.cap}


def sumset_trial(family: QlcFamily, n: int, l_values, q: int, rng, cap: int) -> List[dict]:
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        spec = family.spec_at(n, q, rng)
    book = materialize_qlc(spec, cap)
    R = book.rate
    logq = math.log2(q)
    rows = []
    S = book.codewords
    done = 1
    for l in sorted(l_values):
        while done < l:
            S = codes.sumset(S, book.codewords)
            done += 1
        measured = S.rate
        predicted = spec.predicted_sumset_rate(l)
        rows.append({
            "n": n, "l": l, "k": list(spec.k), "rate": R,
            "nominal_rate": spec.nominal_rate, "measured": measured,
            "predicted": predicted, "gap": measured - predicted,
            "envelope_lo": R, "envelope_hi": min(logq, l * R),
        })
    return rows


def run_sumset_experiment(cfg: SumsetExperimentConfig, threads: int = 1) -> RunReport:
    rows, wall = [], {}
    jobs = [(fi, s, n) for fi in range(len(cfg.families)) for s in range(cfg.seeds) for n in cfg.n_grid]

    def work(job):
        fi, s, n = job
        fam = cfg.families[fi]
        out = sumset_trial(fam, n, cfg.l_values, cfg.q, trial_rng(cfg.seed, fi, s, n), cfg.cap)
        for r in out:
            r.update(family=fam.name, seed_index=s)
        return out

    t0 = time.perf_counter()
    for out in _map(work, jobs, threads):
        rows.extend(out)
    wall["total"] = time.perf_counter() - t0
    records = []
    for fam in cfg.families:
        for n in cfg.n_grid:
            for l in cfg.l_values:
                sel = [r for r in rows if r["family"] == fam.name and r["n"] == n and r["l"] == l]
                meas = [r["measured"] for r in sel]
                gap = [r["gap"] for r in sel]
                records.append({
                    "family": fam.name, "n": n, "l": l, "trials": len(sel),
                    "measured": float(np.mean(meas)), "measured_stderr": _stderr(meas),
                    "predicted": float(np.mean([r["predicted"] for r in sel])),
                    "gap": float(np.mean(gap)), "gap_stderr": _stderr(gap),
                    "abs_gap": float(np.mean(np.abs(gap))),
                    "rate": float(np.mean([r["rate"] for r in sel])),
                })
    return RunReport("sumset", cfg.seed, cfg.to_dict(), records, rows=rows, wall_time=wall)


# ---------------------------------------------------------------------------
# Point-to-point experiment


@dataclass(frozen=True)
class PtpConfig:
    """Source P_X and test channel P_{Y|X} (rows indexed by x) over GF(q).

    ``eps`` is the joint-typicality slack used by the encoder; ``decoder_eps``
    is the P_Y-typicality slack used by the decoder (defaults to ``eps``).
    ``selection`` picks among admissible codewords: the lowest distortion, or
    the joint type closest to P_XY in total absolute deviation.
    """

    source: Pmf
    channel: np.ndarray
    n_grid: Tuple[int, ...]
    eps: float
    trials: int
    seed: int
    slack: float = DEFAULT_SLACK
    decoder_eps: Optional[float] = None
    distortion: Optional[np.ndarray] = None
    selection: str = "min-distortion"
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.selection not in ("min-distortion", "closest-type"):
            raise InvalidScenarioError(f"unknown selection rule {self.selection!r}")
        W = np.array(self.channel, dtype=float)
        if W.shape != (self.source.size, self.source.size):
            raise InvalidScenarioError("channel must be a q x q row-stochastic matrix")
        if np.any(W < 0) or np.any(np.abs(W.sum(axis=1) - 1) > 1e-12):
            raise InvalidScenarioError("channel rows must be PMFs")
        object.__setattr__(self, "channel", W)
        if self.distortion is None:
            object.__setattr__(self, "distortion", 1.0 - np.eye(self.source.size))
        else:
            object.__setattr__(self, "distortion", np.array(self.distortion, dtype=float))

    @property
    def q(self):
        return self.source.size

    @property
    def joint(self) -> JointPmf:
        return JointPmf(self.source.probs[:, None] * self.channel, ("X", "Y"))

    @property
    def dec_eps(self) -> float:
        return self.eps if self.decoder_eps is None else self.decoder_eps

    def rates(self):
        """(codebook rate target, per-bin residual rate, target distortion), in bits."""
        j = self.joint
        logq = math.log2(self.q)
        hy = prob.joint_entropy(j, [1])
        hyx = prob.conditional_entropy(j, [1], [0])
        target_d = float((j.tensor * self.distortion).sum())
        return logq - hyx + self.slack, logq - hy, target_d

    def to_dict(self):
        return {"source": self.source.probs.tolist(), "channel": self.channel.tolist(),
                "n_grid": list(self.n_grid), "eps": self.eps, "decoder_eps": self.dec_eps,
                "trials": self.trials, "seed": self.seed, "slack": self.slack,
                "distortion": self.distortion.tolist(), "selection": self.selection,
                "cap": self.cap}


def _joint_deviation(x: np.ndarray, Y: np.ndarray, joint: np.ndarray):
    """Per row of Y: (max-cell and total absolute deviation of the joint type of
    (x, y) from ``joint``); zero-probability cells that occur give inf."""
    n = x.size
    worst = np.zeros(Y.shape[0])
    total = np.zeros(Y.shape[0])
    for a in range(joint.shape[0]):
        xa = x == a
        for b in range(joint.shape[1]):
            cnt = ((Y == b) & xa).sum(axis=1)
            if joint[a, b] <= 0:
                worst = np.where(cnt > 0, np.inf, worst)
            else:
                d = np.abs(cnt / n - joint[a, b])
                worst = np.maximum(worst, d)
                total += d
    return worst, np.where(np.isinf(worst), np.inf, total)


def ptp_trial(cfg: PtpConfig, n: int, rng) -> dict:
    """One block: build and bin a coset code, encode x by joint typicality, decode.

    The encoder only considers codewords jointly typical with x that also pass
    the decoder's P_Y-typicality test.  It knows the binning, so it prefers a
    candidate that is the only P_Y-typical codeword in its bin; among those it
    applies ``cfg.selection``.  Encoder failure: no candidate.  Decoder failure:
    no candidate is unique in its bin.
    """
    q = cfg.q
    code_rate, residual, target_d = cfg.rates()
    k = max(1, math.ceil(n * code_rate / math.log2(q) - 1e-9))
    G = random_matrix(k, n, q, rng)
    b = random_vec(n, q, rng)
    book = materialize_qlc(codes.coset_as_qlc(G, b), cfg.cap)
    # Each bin keeps about 2^{n(residual - slack)} codewords.
    index_rate = max(0.0, book.rate - residual + cfg.slack)
    binned = codes.bin_codebook(book, index_rate, rng)
    Y = book.codewords.vectors()
    x = prob.sample(cfg.source, n, rng)
    worst, total = _joint_deviation(x, Y, cfg.joint.tensor)
    y_ok = prob.typical_mask(Y, cfg.joint.marginal_pmf(1), cfg.dec_eps)
    candidates = np.nonzero((worst <= cfg.eps + 1e-12) & y_ok)[0]
    out = {"encoder_fail": False, "decoder_fail": False, "distortion": math.nan,
           "code_rate": book.rate, "index_rate": math.log2(binned.bin_count) / n}
    if candidates.size == 0:
        out["encoder_fail"] = True
        return out
    occupancy = np.bincount(binned.bins[y_ok], minlength=binned.bin_count)
    unique = occupancy[binned.bins[candidates]] == 1
    out["decoder_fail"] = not unique.any()
    pool = candidates[unique] if unique.any() else candidates
    dist = cfg.distortion[x, Y[pool]].mean(axis=1)
    if cfg.selection == "min-distortion":
        order = np.lexsort((total[pool], dist))
    else:
        order = np.lexsort((dist, total[pool]))
    out["distortion"] = float(dist[order[0]])
    return out


def run_ptp_experiment(cfg: PtpConfig, threads: int = 1) -> RunReport:
    records, wall = [], {}
    code_rate, residual, target_d = cfg.rates()
    for n in cfg.n_grid:
        t0 = time.perf_counter()
        res = _map(lambda t: ptp_trial(cfg, n, trial_rng(cfg.seed, n, t)), range(cfg.trials), threads)
        enc = np.array([r["encoder_fail"] for r in res], dtype=float)
        dec = np.array([r["decoder_fail"] for r in res], dtype=float)
        fail = np.maximum(enc, dec)
        d = np.array([r["distortion"] for r in res if not r["encoder_fail"]])
        records.append({
            "n": n,
            "trials": cfg.trials,
            "encoder_failure": float(enc.mean()),
            "encoder_failure_stderr": _stderr(enc),
            "decoder_failure": float(dec.mean()),
            "decoder_failure_stderr": _stderr(dec),
            "failure": float(fail.mean()),
            "failure_stderr": _stderr(fail),
            "distortion": float(d.mean()) if d.size else math.nan,
            "distortion_stderr": _stderr(d),
            "target_distortion": target_d,
            "code_rate": float(np.mean([r["code_rate"] for r in res])),
            "transmitted_rate": float(np.mean([r["index_rate"] for r in res])),
        })
        wall[str(n)] = time.perf_counter() - t0
    return RunReport("ptp", cfg.seed, cfg.to_dict(), records, wall_time=wall)
