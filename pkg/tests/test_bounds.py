import itertools
import math

import numpy as np
import pytest

from qlclab import bounds, prob
from qlclab.bounds import CoveringScenario
from qlclab.errors import InvalidScenarioError
from qlclab.md_example import MdExampleParams, build_table1_joint, table1
from qlclab.prob import JointPmf, Pmf


def joint_from(f, q=2, px=None):
    px = px if px is not None else [1 / q] * q
    t = np.zeros((len(px), q, q))
    for x, a, b in itertools.product(range(len(px)), range(q), range(q)):
        t[x, a, b] = px[x] * f(x, a, b)
    return JointPmf(t / t.sum(), ("X", "V1", "V2"))


def H(p):
    p = np.ravel(p)
    return -sum(v * math.log2(v) for v in p if v > 0)


def random_joint(rng, q, xs=2):
    w = rng.random((xs, q, q)) ** 2
    return JointPmf(w / w.sum())


def test_unstructured_examples():
    indep = joint_from(lambda x, a, b: 0.25)
    rep = bounds.eval_bounds(CoveringScenario(indep, "unstructured", r1=0.0, r2=0.0))
    assert all(abs(r.rhs) < 1e-12 for r in rep.records) and rep.satisfied
    same = joint_from(lambda x, a, b: float(a == x and b == x))
    rep = bounds.eval_unstructured_bounds(CoveringScenario(same, "unstructured", r1=1, r2=1))
    assert rep["rate-1"].rhs == pytest.approx(1.0)
    assert rep.labels() == ["rate-1", "rate-2", "sum-rate"]


def test_unstructured_table1_matches_direct_entropies():
    t = table1(0.1)
    j = build_table1_joint(0.1)
    rep = bounds.eval_bounds(CoveringScenario(j, "unstructured", r1=1, r2=1))
    jt = j.tensor
    hx = H(jt.sum(axis=(1, 2)))
    i1 = H(jt.sum(axis=(0, 2))) + hx - H(jt.sum(axis=2))
    i2 = H(jt.sum(axis=(0, 1))) + hx - H(jt.sum(axis=1))
    i12 = H(jt.sum(axis=0)) + hx - H(t)
    assert rep["rate-1"].rhs == pytest.approx(i1, abs=1e-12)
    assert rep["rate-2"].rhs == pytest.approx(i2, abs=1e-12)
    assert rep["sum-rate"].rhs == pytest.approx(i12, abs=1e-12)


def test_nlc_examples():
    indep = joint_from(lambda x, a, b: 0.25)
    rep = bounds.eval_bounds(CoveringScenario(indep, "nlc", r1=0.5, r2=0.5, r_inner=0.2))
    assert rep["rate-1"].rhs == pytest.approx(0.0)
    assert [l for l in rep.labels() if l.startswith("combo[")] == ["combo[1,1]"]
    assert rep["combo-max"].rhs == rep["combo[1,1]"].rhs


def test_nlc_q3_max_matches_bruteforce():
    rng = np.random.default_rng(4)
    for _ in range(20):
        j = random_joint(rng, 3)
        rep = bounds.eval_bounds(CoveringScenario(j, "nlc", r1=1, r2=1, r_inner=0.5))
        t = j.tensor
        best = -math.inf
        for a, b in itertools.product((1, 2), repeat=2):
            tw = np.zeros((2, 3))
            for x, v1, v2 in itertools.product(range(2), range(3), range(3)):
                tw[x, (a * v1 + b * v2) % 3] += t[x, v1, v2]
            rhs = math.log2(3) - (H(tw) - H(tw.sum(axis=1)))
            assert rep[f"combo[{a},{b}]"].rhs == pytest.approx(rhs, abs=1e-12)
            best = max(best, rhs)
        assert rep["combo-max"].rhs == pytest.approx(best, abs=1e-12)


def test_q3_symmetric_joint_combos_differ():
    # V2 = V1 + X on GF(3) given X uniform on {0,1}
    j = joint_from(lambda x, a, b: float(b == (a + x) % 3) / 3, q=3, px=[0.5, 0.5])
    assert bounds.cond_combo_entropy(j, 1, 1) != pytest.approx(bounds.cond_combo_entropy(j, 1, 2))


def test_nqlc_uniform_degenerates_to_nlc():
    rng = np.random.default_rng(0)
    for q in (2, 3):
        j = random_joint(rng, q)
        k = (0.3, 0.45)
        uni = (Pmf.uniform(q),) * 2
        nq = bounds.eval_bounds(CoveringScenario(j, "nqlc", k_ratios=k, u1=uni, u2=uni))
        r = sum(k) * math.log2(q)
        nl = bounds.eval_bounds(CoveringScenario(j, "nlc", r1=r, r2=r, r_inner=r))
        for rec in nq.records:
            other = nl[rec.label]
            assert rec.rhs == pytest.approx(other.rhs, abs=1e-12)
            assert rec.lhs == pytest.approx(other.lhs, abs=1e-12)


def test_nqlc_member_two_uniform_given_x():
    j = joint_from(lambda x, a, b: float(a == x) / 2)
    s = CoveringScenario(j, "nqlc", k_ratios=(0.5,), u1=(Pmf.uniform(2),), u2=(Pmf.uniform(2),))
    assert bounds.eval_bounds(s)["rate-2"].rhs == pytest.approx(0.0, abs=1e-12)


def test_scheme_rhs_agree_between_unstructured_and_structured():
    rng = np.random.default_rng(2)
    j = random_joint(rng, 3)
    un = bounds.eval_bounds(CoveringScenario(j, "unstructured", r1=1, r2=1))
    st = bounds.eval_bounds(CoveringScenario(j, "nqlc", k_ratios=(0.5,), u1=(Pmf.uniform(3),),
                                             u2=(Pmf.uniform(3),)))
    # structured rhs replaces H(V) by log q, so they are never smaller
    for lab in ("rate-1", "rate-2", "sum-rate"):
        assert st[lab].rhs >= un[lab].rhs - 1e-12


def test_example_parameters_satisfy_nqlc_bounds():
    p = MdExampleParams()
    rep = bounds.eval_bounds(p.scenario(0.1))
    assert rep.satisfied
    assert rep["rate-1"].slack == pytest.approx(0.740, abs=1e-3)
    assert rep["sum-rate"].slack == pytest.approx(1.375, abs=1e-3)
    assert rep["combo[1,1]"].slack == pytest.approx(0.9035, abs=1e-3)
    assert rep["combo[1,2]"].slack == pytest.approx(1.133, abs=1e-3)
    ex = bounds.eval_second_moment_exponents(p.scenario(0.1))
    assert ex.expected_count_exponent > 0
    assert ex.covering_predicted


def test_exponents_far_above_bounds():
    j = joint_from(lambda x, a, b: 0.25)
    s = CoveringScenario(j, "nqlc", k_ratios=(0.9,), u1=(Pmf.uniform(2),), u2=(Pmf.uniform(2),))
    ex = bounds.eval_second_moment_exponents(s)
    assert all(v < 0 for _, v in ex.variance_terms)
    assert [lab for lab, _ in ex.variance_terms] == ["pair", "member-1", "member-2", "combo[1]"]
    assert ex.expected_count_exponent == pytest.approx(1.8)


def test_exponents_are_negated_slacks():
    rng = np.random.default_rng(5)
    j = random_joint(rng, 3)
    U = lambda: Pmf.normalized(rng.random(3) + 0.1)
    s = CoveringScenario(j, "nqlc", k_ratios=(0.4, 0.3), u1=(U(), U()), u2=(U(), U()))
    rep, ex = bounds.eval_bounds(s), bounds.eval_second_moment_exponents(s)
    terms = dict(ex.variance_terms)
    assert terms["pair"] == pytest.approx(-rep["sum-rate"].slack, abs=1e-12)
    assert terms["member-1"] == pytest.approx(-rep["rate-1"].slack, abs=1e-12)
    assert terms["member-2"] == pytest.approx(-rep["rate-2"].slack, abs=1e-12)
    for a in (1, 2):
        assert terms[f"combo[{a}]"] == pytest.approx(-rep[f"combo[1,{a}]"].slack, abs=1e-12)


def test_covering_predicted_agrees_with_strict_satisfaction():
    rng = np.random.default_rng(11)
    agree = 0
    seen = set()
    for _ in range(100):
        q = int(rng.choice([2, 3]))
        j = random_joint(rng, q, xs=int(rng.integers(2, 4)))
        m = int(rng.integers(1, 3))
        U = lambda: Pmf.normalized(rng.random(q) ** 2 + 0.01)
        s = CoveringScenario(j, "nqlc", k_ratios=tuple(rng.uniform(0, 1, m)),
                             u1=tuple(U() for _ in range(m)), u2=tuple(U() for _ in range(m)))
        pred = bounds.eval_second_moment_exponents(s).covering_predicted
        sat = bounds.eval_bounds(s).strictly_satisfied
        agree += pred == sat
        seen.add(sat)
    assert agree == 100
    assert seen == {True, False}


def test_reports_deterministic():
    s = MdExampleParams().scenario(0.1)
    a, b = bounds.eval_bounds(s).as_records(), bounds.eval_bounds(s).as_records()
    assert a == b


def test_invalid_scenarios():
    j = joint_from(lambda x, a, b: 0.25)
    with pytest.raises(InvalidScenarioError):
        CoveringScenario(j, "unstructured", r1=-1, r2=0)
    with pytest.raises(InvalidScenarioError):
        CoveringScenario(j, "nqlc", k_ratios=(0.5,), u1=(), u2=())
    with pytest.raises(InvalidScenarioError):
        CoveringScenario(j, "lattice", r1=1, r2=1)
    with pytest.raises(InvalidScenarioError):
        CoveringScenario(JointPmf(np.full((2, 4, 4), 1 / 32)), "unstructured", r1=1, r2=1)
    with pytest.raises(InvalidScenarioError):
        bounds.eval_nlc_bounds(CoveringScenario(j, "unstructured", r1=1, r2=1))


def test_scenario_from_config():
    cfg = {"joint": table1(0.1).reshape(2, 2, 2).tolist(), "scheme": "unstructured", "r1": 1, "r2": 1}
    s = bounds.scenario_from_config(cfg)
    assert s.joint.names == ("X", "V1", "V2") and s.r1 == 1.0
