import itertools
import math

import numpy as np
import pytest

from qlclab import experiments as ex
from qlclab import prob
from qlclab.bounds import CoveringScenario
from qlclab.errors import CapExceededError, InvalidScenarioError
from qlclab.prob import JointPmf, Pmf

BSC = np.array([[0.75, 0.25], [0.25, 0.75]])


def bsc_joint(p1=0.25, p2=0.25):
    t = np.zeros((2, 2, 2))
    for x, a, b in itertools.product(range(2), repeat=3):
        t[x, a, b] = 0.5 * (p1 if a != x else 1 - p1) * (p2 if b != x else 1 - p2)
    return JointPmf(t, ("X", "V1", "V2"))


def nqlc(joint, k, u1=None, u2=None):
    u = (Pmf.uniform(2),) * len(k)
    return CoveringScenario(joint, "nqlc", k_ratios=k, u1=u1 or u, u2=u2 or u)


def brute_theta(x, C1, C2, joint, eps):
    return sum(prob.is_jointly_typical((x, a, b), joint, eps) for a in C1 for b in C2)


def test_trial_rng_splitting():
    a = ex.trial_rng(5, 10, 3).integers(0, 1 << 30, 4)
    assert np.array_equal(a, ex.trial_rng(5, 10, 3).integers(0, 1 << 30, 4))
    assert not np.array_equal(a, ex.trial_rng(5, 10, 4).integers(0, 1 << 30, 4))
    assert not np.array_equal(a, ex.trial_rng(6, 10, 3).integers(0, 1 << 30, 4))


def test_index_eps_uniform_vacuous():
    assert ex.index_eps((Pmf.uniform(3), Pmf([0.2, 0.3, 0.5])), 0.1) == (1.0, 0.1)


@pytest.mark.parametrize("seed", range(5))
def test_count_covering_pairs_bruteforce(seed):
    rng = np.random.default_rng(seed)
    n = 8
    j = bsc_joint(0.25, 0.25)
    x = prob.sample(j.marginal_pmf(0), n, rng)
    C1 = rng.integers(0, 2, (40, n))
    C2 = rng.integers(0, 2, (30, n))
    C1[:5] = x
    C2[:5] = x
    for eps in (0.1, 0.2):
        want = brute_theta(x, C1, C2, j, eps)
        assert ex.count_covering_pairs(x, C1, C2, j, eps, chunk=7) == want
        hit = ex.find_covering_pair(x, C1, C2, j, eps, chunk=7)
        if want == 0:
            assert hit is None
        else:
            assert prob.is_jointly_typical((x, hit[0], hit[1]), j, eps)


def test_joint_typical_matrix_respects_zero_cells():
    t = np.zeros((2, 2, 2))
    t[0, 0, 0] = t[1, 1, 1] = 0.5
    j = JointPmf(t)
    x = np.array([0, 1, 0, 1])
    V = np.array([[0, 1, 0, 1], [1, 1, 0, 1]])
    M = ex.joint_typical_matrix(x, V, V, j, 0.9)
    assert M.tolist() == [[True, False], [False, False]]


def test_covering_vacuous_typicality_always_covers():
    s = nqlc(bsc_joint(), (0.25,))
    cfg = ex.CoveringExperimentConfig(s, (4, 8), eps=1.0, trials=20, seed=0, index_eps=0.2)
    rep = ex.run_covering_experiment(cfg)
    assert [r["coverage"] for r in rep.records] == [1.0, 1.0]


def test_covering_monotone_in_eps():
    s = nqlc(bsc_joint(), (0.3,))
    cov = []
    for eps in (0.05, 0.1, 0.2, 0.3):
        cfg = ex.CoveringExperimentConfig(s, (8,), eps=eps, trials=40, seed=2, index_eps=0.2)
        cov.append(ex.run_covering_experiment(cfg).records[0]["coverage"])
    assert cov == sorted(cov)
    assert cov[-1] > cov[0]


def test_covering_reproducible_and_thread_independent():
    s = nqlc(bsc_joint(), (0.3,))
    cfg = ex.CoveringExperimentConfig(s, (6, 8), eps=0.15, trials=15, seed=9, index_eps=0.2)
    a = ex.run_covering_experiment(cfg)
    b = ex.run_covering_experiment(cfg, threads=3)
    assert a.records == b.records and a.config == b.config


def test_covering_other_schemes_run():
    j = bsc_joint()
    for s in (CoveringScenario(j, "unstructured", r1=0.5, r2=0.5),
              CoveringScenario(j, "nlc", r1=0.5, r2=0.5, r_inner=0.25)):
        rep = ex.run_covering_experiment(ex.CoveringExperimentConfig(s, (8,), 0.2, 5, 0))
        assert 0 <= rep.records[0]["coverage"] <= 1
        assert rep.records[0]["mean_size1"] == 16


def test_covering_cap():
    s = CoveringScenario(bsc_joint(), "unstructured", r1=0.9, r2=0.5)
    with pytest.raises(CapExceededError):
        ex.run_covering_experiment(ex.CoveringExperimentConfig(s, (16,), 0.2, 1, 0, cap=1000))


def test_sumset_coset_family_is_closed():
    fam = ex.QlcFamily("coset", (0.5,), (Pmf.uniform(2),))
    rep = ex.run_sumset_experiment(ex.SumsetExperimentConfig((fam,), (8, 10), (1, 2, 3), 5, 0))
    for r in rep.rows:
        assert r["measured"] == pytest.approx(r["rate"], abs=1e-12)


def test_sumset_low_entropy_doubles_rate():
    fam = ex.QlcFamily("low", (1.5,), (Pmf([0.95, 0.05]),), 0.05)
    rep = ex.run_sumset_experiment(ex.SumsetExperimentConfig((fam,), (10,), (2,), 20, 0))
    for r in rep.rows:
        assert abs(r["measured"] - 2 * r["rate"]) <= 0.2


def test_sumset_prediction_inside_envelope():
    fams = (ex.QlcFamily("skew", (0.75,), (Pmf([0.8, 0.2]),), 0.1),
            ex.QlcFamily("mixed", (0.25, 0.5), (Pmf.uniform(2), Pmf([0.75, 0.25])), 0.1))
    rep = ex.run_sumset_experiment(ex.SumsetExperimentConfig(fams, (8, 12), (2, 3), 5, 1))
    for r in rep.rows:
        lo, hi = r["nominal_rate"], min(1.0, r["l"] * r["nominal_rate"])
        assert lo - 0.05 <= r["predicted"] <= hi + 0.05
        assert r["envelope_lo"] - 0.2 <= r["measured"] <= r["envelope_hi"] + 0.05


def test_ptp_rates_and_config():
    cfg = ex.PtpConfig(Pmf.uniform(2), BSC, (10,), 0.2, 10, 0)
    code_rate, residual, d = cfg.rates()
    h = -0.75 * math.log2(0.75) - 0.25 * math.log2(0.25)
    assert code_rate == pytest.approx(1 - h + 0.1)
    assert residual == pytest.approx(0.0) and d == pytest.approx(0.25)
    with pytest.raises(InvalidScenarioError):
        ex.PtpConfig(Pmf.uniform(2), [[0.5, 0.6], [0.5, 0.5]], (10,), 0.2, 10, 0)
    with pytest.raises(InvalidScenarioError):
        ex.PtpConfig(Pmf.uniform(2), BSC, (10,), 0.2, 10, 0, selection="random")


def test_ptp_slack_sensitivity():
    out = {}
    for s in (0.1, 0.0):
        cfg = ex.PtpConfig(Pmf.uniform(2), BSC, (10,), 0.2, 100, 3, slack=s, decoder_eps=0.1)
        out[s] = ex.run_ptp_experiment(cfg).records[0]
    assert out[0.0]["failure"] > out[0.1]["failure"] + 0.1
    assert out[0.1]["code_rate"] > out[0.0]["code_rate"]
    r = out[0.1]
    assert r["failure"] >= max(r["encoder_failure"], r["decoder_failure"])


def test_ptp_identity_channel_trend():
    cfg = ex.PtpConfig(Pmf([0.9, 0.1]), np.eye(2), (8, 14), 0.1, 30, 0, decoder_eps=0.1)
    rec = ex.run_ptp_experiment(cfg).records
    assert all(r["distortion"] == 0.0 for r in rec)
    assert rec[-1]["failure"] <= rec[0]["failure"]
    hx = prob.entropy(Pmf([0.9, 0.1]))
    assert rec[-1]["code_rate"] == pytest.approx(1.0, abs=0.05)
    assert rec[-1]["transmitted_rate"] >= hx


def test_trend_rows_shape():
    s = nqlc(bsc_joint(), (0.3,))
    rep = ex.run_covering_experiment(ex.CoveringExperimentConfig(s, (6,), 0.2, 4, 0, index_eps=0.2))
    rows = rep.trend_rows()
    names = [r[1] for r in rows]
    assert "coverage" in names and "mean_theta" in names
    assert all(r[0] == 6 for r in rows)
    cov = rows[names.index("coverage")]
    assert cov[3] == rep.records[0]["coverage_stderr"]
