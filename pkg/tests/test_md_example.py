import itertools
import math

import numpy as np
import pytest

from qlclab import md_example as md
from qlclab import prob
from qlclab.errors import InvalidScenarioError
from qlclab.md_example import MdExampleParams, Template, RegionConstraintSystem
from qlclab.prob import JointPmf, Pmf

R2 = math.sqrt(2)


def test_table1_at_point_one():
    t = md.table1(0.1)
    want = [[0.45, 0.020711, 0.020711, 0.008579], [0.05, 0.186396, 0.186396, 0.077208]]
    assert np.allclose(t, want, atol=1e-6)
    assert t.sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("d0", np.linspace(0.02, 0.48, 10))
def test_table1_structure(d0):
    t = md.table1(d0)
    assert abs(t.sum() - 1) <= 1e-12
    assert np.allclose(t.sum(axis=1), 0.5, atol=1e-12)
    assert t[0, 1] == t[0, 2] and t[1, 1] == t[1, 2]
    assert t[0, 1] / t[0, 3] == pytest.approx((R2 - 1) / (3 - 2 * R2))
    j = md.build_table1_joint(d0)
    assert j.tensor[:, 2, :].sum() == 0 and j.tensor[:, :, 2].sum() == 0
    assert np.allclose(j.tensor, j.tensor.transpose(0, 2, 1))


def test_table1_range():
    for bad in (0.0, 0.5, -0.1, 0.7):
        with pytest.raises(InvalidScenarioError):
            md.table1(bad)


def test_implied_distortions():
    for d0 in (0.05, 0.1, 0.3):
        d = md.implied_distortions(md.build_table1_joint(d0))
        assert d["D1"] == pytest.approx(0.5 * (1 - (1 - 2 * d0) * (2 - R2)), abs=1e-12)
        assert d["D1"] == d["D2"]
        assert d["D12"] == pytest.approx(d0, abs=1e-12)


def test_d0_constraint_has_no_root():
    res = md.solve_d0_constraint()
    assert isinstance(res, md.NoRoot)
    assert res.residual_lo == pytest.approx(md.d0_residual(res.lo))
    assert res.residual_hi == pytest.approx(md.d0_residual(res.hi))
    assert res.grid_min > 1.4 and res.monotone == "nondecreasing"
    assert res.grid_points == 1000
    # 2 h(sqrt2/2) alone already exceeds one bit
    assert 2 * md.hb(R2 / 2) > 1
    d = res.as_dict()
    assert d["status"] == "no-root" and "residual_lo" in d


def test_rates_at_point_one():
    r = md.compute_md_rates(MdExampleParams(), 0.1)
    assert r.R1 == r.R2 == pytest.approx((1 - md.hb(0.1)) / 2, abs=1e-12)
    assert r.R1 == pytest.approx(0.26550, abs=1e-5)
    assert r.D1 == pytest.approx(0.5 * (1 - 0.8 * (2 - R2)), abs=1e-12)
    assert r.D1 == pytest.approx(0.26568, abs=1e-5)
    assert r.D12 == r.D13 == r.D23 == 0.1
    e = r.entropies
    assert e["H(U1+2U2)"] == pytest.approx(1.579, abs=1e-3)
    assert r.R3 == pytest.approx(e["H(V1+2V2)"] - e["H(V1+V2|X)"] - 1e-4, abs=1e-12)
    assert r.R3_alt == pytest.approx(e["H(V1+2V2)"] - e["H(V1+2V2|X)"] - 1e-4, abs=1e-12)
    s = r.scheme
    assert s["R1_bits"] == pytest.approx(0.8 * math.log2(3) + 0.2665 * e["H(U1)"] - s["bin_size_12"])
    assert s["R1_printed"] == pytest.approx(0.8 + 0.2665 * e["H(U1)"] - s["bin_size_12"])


def test_rates_small_d0_limit():
    r = md.compute_md_rates(MdExampleParams(), 1e-9)
    assert r.R1 == pytest.approx(0.5, abs=1e-6)
    assert r.D1 == pytest.approx((R2 - 1) / 2, abs=1e-6)


def test_combo_entropy_bruteforce():
    p = MdExampleParams()
    w = np.zeros(3)
    for u, v in itertools.product(range(3), repeat=2):
        w[(u + 2 * v) % 3] += p.U1.probs[u] * p.U2.probs[v]
    assert np.allclose(w, [0.2913, 0.3529, 0.3558], atol=1e-12)
    h = -sum(x * math.log2(x) for x in w)
    assert md.example_entropies(p, 0.1)["H(U1+2U2)"] == pytest.approx(h, abs=1e-12)


def test_example_covering_slacks():
    rep = md.verify_example_covering(MdExampleParams(), 0.1)
    assert rep.satisfied
    assert rep.labels() == ["rate-1", "rate-2", "sum-rate", "combo[1,1]", "combo[1,2]",
                            "combo[2,1]", "combo[2,2]"]
    assert rep["combo[1,2]"].slack == pytest.approx(1.133, abs=1e-3)


def test_example_covering_uniform_tables():
    p = MdExampleParams(u1_table=(1 / 3,) * 3, u2_table=(1 / 3,) * 3)
    rep = md.verify_example_covering(p, 0.1)
    assert rep["combo[1,2]"].lhs == pytest.approx((0.8 + 0.2665) * math.log2(3), abs=1e-12)


def test_ratio_sweep_and_thresholds():
    p = MdExampleParams()
    k2 = md.ratio_threshold(p, 0.1, "k2")
    assert k2["value"] is None
    k1 = md.ratio_threshold(p, 0.1, "k1")
    assert k1["value"] == pytest.approx(0.3663, abs=1e-4)
    assert k1["binding"] == "sum-rate"
    sweep = md.ratio_sweep(p, 0.1, [0.8, 0.5, k1["value"] - 0.01], "k1")
    assert [r["satisfied"] for r in sweep] == [True, True, False]
    assert sweep[-1]["binding"] == "sum-rate"


def test_derived_variable_is_deterministic():
    sys, _ = md.three_descriptions_system(MdExampleParams(), 0.1)
    j = sys.extended_joint()
    for name, _ in sys.derived:
        assert prob.conditional_entropy(j, [name], ["V1", "V2"]) == pytest.approx(0, abs=1e-12)


def test_region_trivial_cases():
    j = md.build_table1_joint(0.1)
    assert md.eval_region_constraints(RegionConstraintSystem(j, 3), {}).feasible
    t = Template("one", ("V1",), ("X",), {"log_q": 1.0, "r": -1.0})
    rep = md.eval_region_constraints(RegionConstraintSystem(j, 3, templates=(t,)), {"r": math.log2(3)})
    assert rep.feasible and rep["one"].rhs == pytest.approx(0.0)
    with pytest.raises(InvalidScenarioError):
        RegionConstraintSystem(j, 3, templates=(Template("bad", ("V9",), (), {}),))
    with pytest.raises(InvalidScenarioError):
        md.eval_region_constraints(RegionConstraintSystem(j, 3, templates=(t,)), {})


def test_three_descriptions_consistent_with_covering():
    p = MdExampleParams()
    sys, rates = md.three_descriptions_system(p, 0.1)
    rep = md.eval_region_constraints(sys, rates)
    cov = md.verify_example_covering(p, 0.1)
    assert rep.feasible and cov.satisfied
    assert rep["cover:V1"].slack == pytest.approx(cov["rate-1"].slack, abs=1e-12)
    assert rep["cover:V1,V2"].slack == pytest.approx(cov["sum-rate"].slack, abs=1e-12)
    for a, b in ((1, 1), (1, 2), (2, 1), (2, 2)):
        assert rep[f"cover:W[{a},{b}]"].slack == pytest.approx(cov[f"combo[{a},{b}]"].slack, abs=1e-12)
    assert rep["pack{1}:V1"].slack == pytest.approx(1e-3, abs=1e-9)


def test_covering_templates_monotone_in_rates():
    sys, rates = md.three_descriptions_system(MdExampleParams(), 0.1)
    base = md.eval_region_constraints(sys, rates)
    for key in ("r[1]", "r[2]"):
        bumped = dict(rates, **{key: rates[key] + 0.05})
        rep = md.eval_region_constraints(sys, bumped)
        for a, b in zip(base.records, rep.records):
            if a.label.startswith("cover:"):
                assert b.slack >= a.slack - 1e-12


def test_simulation_small():
    out = md.simulate_md_example(MdExampleParams(), md.MdSimConfig(trials=20))
    assert 0 <= out["coverage"] <= 1
    assert out["coverage"] > 0.5
    assert 0 <= out["D1"] <= 1 and 0 <= out["D12"] <= 1
