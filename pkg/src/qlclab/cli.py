"""Command-line front end.

    qlclab <command> [--config FILE] [--seed N] [--out DIR] [--threads N]
                     [--cap N] [--format text|records|csv] [-v]

Commands: entropy, sumset, covering, ptp, md-example, region-check, bounds.
Config files are TOML.  Exit codes: 0 ok, 1 usage or config error,
2 infeasible system or enumeration cap exceeded, 3 internal error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Callable, Dict, Optional, Tuple

import numpy as np

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from . import bounds, experiments, md_example, prob, report
from .errors import CapExceededError, DEFAULT_CAP, EmptyTypicalSetError, InvalidScenarioError
from .experiments import RunReport
from .prob import JointPmf, Pmf

log = logging.getLogger("qlclab")

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"malformed config {path}: {exc}") from exc


def _tuple(v):
    return tuple(v) if isinstance(v, (list, tuple)) else (v,)


# ---------------------------------------------------------------------------
# Commands.  Each returns (report, feasible).


def cmd_entropy(cfg: dict, seed: int, args) -> Tuple[RunReport, bool]:
    """Entropies of PMFs, their convolution powers and GF(q) linear combinations,
    plus conditional entropies of an optional named joint."""
    pmfs = {name: prob.pmf_from_config(v) for name, v in cfg.get("pmfs", {"U": [0.5, 0.5]}).items()}
    recs = []
    for name, p in pmfs.items():
        recs.append({"label": f"H({name})", "value": prob.entropy(p)})
        for l in cfg.get("powers", []):
            recs.append({"label": f"H({name}^{l})", "l": int(l),
                         "value": prob.entropy(prob.convolve_power(p, int(l)))})
    for a, n1, b, n2 in cfg.get("combos", []):
        c = prob.linear_combo_pmf(int(a), pmfs[n1], int(b), pmfs[n2])
        recs.append({"label": f"H({a}{n1}+{b}{n2})", "value": prob.entropy(c),
                     "pmf": c.probs.tolist()})
    if "joint" in cfg:
        jc = cfg["joint"]
        j = JointPmf(np.array(jc["tensor"], dtype=float), tuple(jc["names"]))
        for qd in jc.get("queries", []):
            t, g = list(qd["targets"]), list(qd.get("given", []))
            label = f"H({','.join(t)}|{','.join(g)})" if g else f"H({','.join(t)})"
            recs.append({"label": label, "value": prob.conditional_entropy(j, t, g)})
    resolved = {"pmfs": {k: v.probs.tolist() for k, v in pmfs.items()},
                "powers": list(cfg.get("powers", [])), "combos": cfg.get("combos", []),
                "joint": cfg.get("joint")}
    return RunReport("entropy", seed, resolved, recs), True


def _family(d: dict) -> experiments.QlcFamily:
    return experiments.QlcFamily(d["name"], tuple(float(k) for k in d["k_ratios"]),
                                 tuple(prob.pmf_from_config(u) for u in d["U"]),
                                 float(d.get("eps", 0.1)))


def cmd_sumset(cfg: dict, seed: int, args) -> Tuple[RunReport, bool]:
    fams = cfg.get("family") or [
        {"name": "mixed", "k_ratios": [0.25, 0.5], "U": [[0.5, 0.5], [0.8, 0.2]]},
        {"name": "skewed", "k_ratios": [0.5], "U": [[0.75, 0.25]]},
    ]
    sc = experiments.SumsetExperimentConfig(
        tuple(_family(f) for f in fams),
        tuple(int(n) for n in cfg.get("n_grid", [8, 12, 16])),
        tuple(int(l) for l in cfg.get("l_values", [2, 3])),
        int(cfg.get("seeds", 10)), seed, int(cfg.get("q", 2)), args.cap,
    )
    return experiments.run_sumset_experiment(sc, args.threads), True


def _scenario(cfg: dict) -> bounds.CoveringScenario:
    if "scenario" not in cfg:
        raise UsageError("config needs a [scenario] section")
    try:
        return bounds.scenario_from_config(cfg["scenario"])
    except KeyError as exc:
        raise UsageError(f"scenario is missing {exc}") from exc


def cmd_covering(cfg: dict, seed: int, args) -> Tuple[RunReport, bool]:
    s = _scenario(cfg)
    cc = experiments.CoveringExperimentConfig(
        s, tuple(int(n) for n in cfg.get("n_grid", [8, 12, 16])), float(cfg.get("eps", 0.1)),
        int(cfg.get("trials", 200)), seed, float(cfg.get("index_eps", 0.1)), args.cap,
    )
    rep = experiments.run_covering_experiment(cc, args.threads)
    b = bounds.eval_bounds(s)
    rep.config["bounds"] = b.as_records()
    if s.scheme == "nqlc":
        rep.config["exponents"] = bounds.eval_second_moment_exponents(s).as_records()
    return rep, True


def cmd_ptp(cfg: dict, seed: int, args) -> Tuple[RunReport, bool]:
    dist = cfg.get("distortion")
    pc = experiments.PtpConfig(
        prob.pmf_from_config(cfg.get("source", [0.5, 0.5])),
        np.array(cfg.get("channel", [[0.75, 0.25], [0.25, 0.75]]), dtype=float),
        tuple(int(n) for n in cfg.get("n_grid", [14])),
        float(cfg.get("eps", 0.2)), int(cfg.get("trials", 200)), seed,
        slack=float(cfg.get("slack", experiments.DEFAULT_SLACK)),
        decoder_eps=cfg.get("decoder_eps", 0.1),
        distortion=None if dist is None else np.array(dist, dtype=float),
        selection=cfg.get("selection", "min-distortion"), cap=args.cap,
    )
    return experiments.run_ptp_experiment(pc, args.threads), True


def _md_params(cfg: dict) -> md_example.MdExampleParams:
    keys = ("eps", "lam", "k1", "k2")
    kw = {k: float(cfg[k]) for k in keys if k in cfg}
    for k in ("u1_table", "u2_table"):
        if k in cfg:
            kw[k] = tuple(float(v) for v in cfg[k])
    return md_example.MdExampleParams(**kw)


def cmd_md_example(cfg: dict, seed: int, args) -> Tuple[RunReport, bool]:
    p = _md_params(cfg)
    solved = md_example.solve_d0_constraint()
    if "d0" in cfg:
        d0, source = float(cfg["d0"]), "supplied"
    elif isinstance(solved, md_example.D0Root):
        d0, source = solved.d0, "solved"
    else:
        d0, source = float(cfg.get("d0_fallback", 0.1)), "fallback"
    rates = md_example.compute_md_rates(p, d0)
    cover = md_example.verify_example_covering(p, d0)
    sys_, rate_vals = md_example.three_descriptions_system(p, d0)
    region = md_example.eval_region_constraints(sys_, rate_vals)
    recs = [{"label": "d0", "value": d0, "source": source}, dict(solved.as_dict(), label="d0-constraint")]
    recs.append({"label": "table1", "table": md_example.table1(d0).tolist()})
    recs.append(dict(md_example.implied_distortions(md_example.build_table1_joint(d0)), label="implied-distortions"))
    recs.append(dict(rates.as_dict(), label="rates"))
    recs += [dict(r, label=f"covering:{r['label']}") for r in cover.as_records()]
    recs += [dict(r, label=f"region:{r['label']}") for r in region.as_records()]
    recs.append({"label": "region-feasible", "value": region.feasible})
    for which in ("k1", "k2"):
        recs.append(dict(md_example.ratio_threshold(p, d0, which), label=f"threshold:{which}"))
    if cfg.get("simulate", False):
        sim = md_example.MdSimConfig(d0=d0, seed=seed, cap=args.cap,
                                     **{k: cfg["sim"][k] for k in cfg.get("sim", {})})
        recs.append(dict(md_example.simulate_md_example(p, sim), label="simulation"))
    resolved = {"eps": p.eps, "lam": p.lam, "k1": p.k1, "k2": p.k2, "u1_table": list(p.u1_table),
                "u2_table": list(p.u2_table), "d0": d0, "simulate": bool(cfg.get("simulate", False)),
                "sim": cfg.get("sim", {})}
    return RunReport("md-example", seed, resolved, recs), True


def _template(d: dict) -> md_example.Template:
    return md_example.Template(d["label"], tuple(d["targets"]), tuple(d.get("given", [])),
                               dict(d["rhs"]), d.get("sense", ">="))


def cmd_region_check(cfg: dict, seed: int, args) -> Tuple[RunReport, bool]:
    """Either the three-descriptions instance (``instance = "three-descriptions"``)
    or a user system: [joint] tensor/names/q, [derived], [[template]], [rates]."""
    if cfg.get("instance", "three-descriptions") == "three-descriptions" and "joint" not in cfg:
        p = _md_params(cfg)
        d0 = float(cfg.get("d0", 0.1))
        sys_, rates = md_example.three_descriptions_system(p, d0)
        rates.update({k: float(v) for k, v in cfg.get("rates", {}).items()})
        resolved = {"instance": "three-descriptions", "d0": d0, "rates": rates}
    else:
        jc = cfg["joint"]
        qlc = _scenario(cfg) if "scenario" in cfg else None
        sys_ = md_example.RegionConstraintSystem(
            JointPmf(np.array(jc["tensor"], dtype=float), tuple(jc["names"])), int(jc["q"]),
            cfg.get("derived", {}), tuple(_template(t) for t in cfg.get("template", [])), qlc)
        rates = {k: float(v) for k, v in cfg.get("rates", {}).items()}
        resolved = dict(cfg)
    rep = md_example.eval_region_constraints(sys_, rates)
    recs = rep.as_records() + [{"label": "feasible", "value": rep.feasible}]
    return RunReport("region-check", seed, resolved, recs), rep.feasible


def cmd_bounds(cfg: dict, seed: int, args) -> Tuple[RunReport, bool]:
    s = _scenario(cfg)
    b = bounds.eval_bounds(s)
    recs = b.as_records()
    if s.scheme == "nqlc":
        recs += bounds.eval_second_moment_exponents(s).as_records()
    recs.append({"label": "satisfied", "value": b.satisfied})
    return RunReport("bounds", seed, dict(cfg["scenario"]), recs), b.satisfied


COMMANDS: Dict[str, Callable] = {
    "entropy": cmd_entropy,
    "sumset": cmd_sumset,
    "covering": cmd_covering,
    "ptp": cmd_ptp,
    "md-example": cmd_md_example,
    "region-check": cmd_region_check,
    "bounds": cmd_bounds,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="qlclab", description="Quasi-linear code laboratory.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="TOML config file")
    ap.add_argument("--seed", type=int, help="master seed (overrides the config)")
    ap.add_argument("--out", help=f"report directory (default ${report.OUT_ENV} or ./reports)")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--cap", type=int, default=DEFAULT_CAP, help="enumeration cap")
    ap.add_argument("--format", choices=("text", "records", "csv"), default="text")
    ap.add_argument("--no-write", action="store_true", help="print only, write no files")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    return ap


def dispatch(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else int(cfg.pop("seed", 0))
        cfg.pop("seed", None)
        if args.threads < 1 or args.cap < 1:
            raise UsageError("--threads and --cap must be positive")
        rep, feasible = COMMANDS[args.command](cfg, seed, args)
    except UsageError as exc:
        print(f"qlclab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvalidScenarioError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, (CapExceededError, EmptyTypicalSetError)):
            print(f"qlclab: infeasible: {exc}", file=sys.stderr)
            return EXIT_INFEASIBLE
        print(f"qlclab: bad config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapExceededError as exc:
        print(f"qlclab: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL

    if args.format == "records":
        sys.stdout.write(report.records_text(rep))
    elif args.format == "csv":
        sys.stdout.write(report.csv_text(rep))
    else:
        sys.stdout.write(report.summary_text(rep))
        for k, v in rep.wall_time.items():
            log.info("wall time %s: %.2fs", k, v)
    if not args.no_write:
        paths = report.write_report(rep, args.out)
        log.info("wrote %s", ", ".join(str(p) for p in paths))
    return EXIT_OK if feasible else EXIT_INFEASIBLE


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
