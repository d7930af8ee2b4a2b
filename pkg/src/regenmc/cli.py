"""Seeded, reproducible experiment runner.

Subcommands: simulate, blocks, rademacher, bounds, kde-rate, mh-credible,
verify-lemmas.  Every run takes a JSON config (documented in the README),
writes CSV/JSON outputs plus a run manifest with content digests, and prints
a one-line summary.  Exit codes: 0 pass, 2 acceptance-threshold failure,
1 error.  Identical configs reproduce identical output digests.
"""

import argparse
import hashlib
import json
import math
import sys
import time
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from .chains import (finite_atom_chain, finite_doeblin_chain, simulate, two_state_chain,
                     wrapped_doeblin_chain)
from .function_classes import (BlockMeasure, check_lifted_covering_bound,
                               check_truncated_covering_bound, halfline_class,
                               kernel_class, table_class)
from .kde import KDEConfig, KERNELS, rate_experiment
from .metropolis import (TARGETS, build_minorization, credible_interval_experiment,
                         gaussian_step_proposal, uniform_step_proposal)
from .parallel import pool_map
from .rademacher import (compare_bound_vs_empirical, empirical_block_rademacher,
                         empirical_rademacher_iid, block_variance_proxy)
from .regeneration import extract_blocks, regen_stats, simulate_split_retrospective
from .rng import child_seed

EXPERIMENTS = ("simulate", "blocks", "rademacher", "bounds", "kde-rate",
               "mh-credible", "verify-lemmas")


# ---------------------------------------------------------------------------
# Config -> objects
# ---------------------------------------------------------------------------


def build_model(spec):
    kind = spec.get("kind")
    if kind == "two_state":
        return two_state_chain(spec.get("p01", 0.5), spec.get("p10", 0.2))
    if kind == "finite_atom":
        return finite_atom_chain(np.asarray(spec["matrix"], dtype=float), spec.get("atom", 0))
    if kind == "finite_doeblin":
        return finite_doeblin_chain(spec["delta"], np.asarray(spec["matrix"], dtype=float),
                                    np.asarray(spec["psi"], dtype=float))
    if kind == "doeblin_uniform":
        return wrapped_doeblin_chain(spec["delta"], spec.get("width", 0.25))
    raise ValueError(f"unknown model kind {kind!r}")


def build_target(spec):
    kind = spec.get("kind")
    if kind not in TARGETS:
        raise ValueError(f"unknown target kind {kind!r}")
    params = {k: v for k, v in spec.items() if k != "kind"}
    return TARGETS[kind](**params)


def build_proposal(spec, d=1):
    kind = spec.get("kind", "uniform_step")
    if kind == "uniform_step":
        return uniform_step_proposal(spec["a"], d)
    if kind == "gaussian_step":
        return gaussian_step_proposal(spec["s"], spec["eps"], d)
    raise ValueError(f"unknown proposal kind {kind!r}")


def build_class(spec):
    kind = spec.get("kind")
    if kind == "halfline":
        if "thresholds" in spec:
            thresholds = np.asarray(spec["thresholds"], dtype=float)
        else:
            thresholds = np.linspace(spec.get("lo", 0.0), spec.get("hi", 1.0),
                                     int(spec.get("size", 21)))
        return halfline_class(thresholds, spec.get("coordinate", 0))
    if kind == "table":
        return table_class(np.asarray(spec["tables"], dtype=float),
                           vc_c=spec.get("vc_C"), vc_v=spec.get("vc_v", 2.0))
    if kind == "kernel":
        kernel = KERNELS[spec.get("kernel", "epanechnikov")]()
        centers = np.asarray(spec["centers"], dtype=float)
        return kernel_class(kernel, spec["h"], centers, vc_c=spec.get("vc_C"),
                            vc_v=spec.get("vc_v", 2.0))
    raise ValueError(f"unknown class kind {kind!r}")


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate(config) -> list:
    """All violations that would prevent a run; empty means runnable."""
    errs = []
    exp = config.get("experiment")
    if exp not in EXPERIMENTS:
        errs.append(f"experiment must be one of {EXPERIMENTS}, got {exp!r}")
    if not isinstance(config.get("seed"), int):
        errs.append("seed is mandatory and must be an integer")
    consts = config.get("constants", {})
    for name in ("M_const", "K_const", "tau_param"):
        if name in consts and not (isinstance(consts[name], (int, float)) and consts[name] > 0):
            errs.append(f"constants.{name} must be a positive number")
    vc_v = consts.get("vc_v")
    if vc_v is not None and vc_v < 1:
        errs.append("constants.vc_v must be >= 1")
    vc_c = consts.get("vc_C")
    if vc_c is not None and vc_v is not None and vc_c < (3 * math.sqrt(math.e)) ** vc_v:
        errs.append(f"constants.vc_C must be >= (3 sqrt(e))^v = {(3 * math.sqrt(math.e)) ** vc_v:.6g}")
    if exp in ("simulate", "blocks", "rademacher"):
        if not isinstance(config.get("n"), int) or config.get("n", 0) < 1:
            errs.append("n must be a positive integer")
        if "model" not in config:
            errs.append("model spec is required")
    if exp in ("bounds", "kde-rate", "mh-credible"):
        grid = config.get("n_grid")
        if not isinstance(grid, list) or len(grid) < 3:
            errs.append("n_grid must be a list with at least 3 sizes")
        if not isinstance(config.get("replications"), int) or config.get("replications", 0) < 1:
            errs.append("replications must be a positive integer")
    if exp == "kde-rate":
        beta = config.get("beta")
        d = config.get("d", 1)
        if not isinstance(beta, (int, float)) or beta < 0:
            errs.append("beta must be a nonnegative number")
        p = config.get("p")
        if p is not None and isinstance(beta, (int, float)):
            # polynomial-moment regime couples beta, p and the dimension
            coupling = beta * p / (p - 1.0)
            if not 0 < coupling < 1.0 / d:
                errs.append(
                    f"need 0 < beta*p/(p-1) < 1/d for the polynomial-moment rate; got {coupling:.6g}")
    if exp == "bounds":
        sig = config.get("sigma_prime")
        trunc = config.get("L")
        u = config.get("U", 1.0)
        if sig is not None and trunc is not None and sig > trunc * u:
            errs.append("sigma_prime must satisfy sigma' <= L*U (block-bound hypothesis)")
        if config.get("mode", "em") not in ("pm", "em"):
            errs.append("mode must be 'pm' or 'em'")
        if "M_const" not in consts:
            errs.append("constants.M_const must be explicit for bound experiments")
    if exp == "mh-credible":
        gamma = config.get("gamma")
        if not isinstance(gamma, (int, float)) or not 0 < gamma < 0.25:
            errs.append("gamma must lie in (0, 0.25)")
        if "target" not in config:
            errs.append("target spec is required")
    if exp == "verify-lemmas":
        if not isinstance(config.get("trials"), int) or config.get("trials", 0) < 1:
            errs.append("trials must be a positive integer")
    return errs


# ---------------------------------------------------------------------------
# Experiment runners (each returns (summary, passed, outputs dict))
# ---------------------------------------------------------------------------


def _run_simulate(config, out, jobs):
    model = build_model(config["model"])
    traj = simulate(model, config["n"], config["seed"])
    path = out / "trajectory.csv"
    traj.to_csv(path)
    return f"simulated {traj.n} steps of {model.model_id}", None, {"trajectory.csv": path}


def _run_blocks(config, out, jobs):
    model = build_model(config["model"])
    traj = simulate_split_retrospective(model, config["n"], config["seed"])
    blocks = extract_blocks(traj)
    (out / "blocks.json").write_text(blocks.to_json())
    outputs = {"blocks.json": out / "blocks.json"}
    if blocks.n_complete > 0:
        stats = regen_stats(blocks, min_blocks=config.get("min_blocks", 30))
        (out / "regen_stats.json").write_text(stats.to_json())
        outputs["regen_stats.json"] = out / "regen_stats.json"
    traj.to_csv(out / "trajectory.csv")
    outputs["trajectory.csv"] = out / "trajectory.csv"
    return f"l_n={blocks.l_n}, complete blocks={blocks.n_complete}", None, outputs


def _run_rademacher(config, out, jobs):
    model = build_model(config["model"])
    cls = build_class(config["class"])
    n_mc = config.get("n_mc", 2000)
    traj = simulate_split_retrospective(model, config["n"], config["seed"])
    blocks = extract_blocks(traj)
    iid = empirical_rademacher_iid(cls, traj.states, n_mc, child_seed(config["seed"], 1))
    blk = empirical_block_rademacher(cls, blocks, n_mc, child_seed(config["seed"], 2))
    payload = {
        "iid": {"mean": iid.mean, "mc_std_error": iid.mc_std_error, "n_data": iid.n_data},
        "block": {"mean": blk.mean, "mc_std_error": blk.mc_std_error, "n_data": blk.n_data},
        "sigma_prime_sq": block_variance_proxy(cls, blocks),
    }
    (out / "rademacher.json").write_text(json.dumps(payload, indent=2))
    return (f"iid={iid.mean:.6g}±{iid.mc_std_error:.2g} "
            f"block={blk.mean:.6g}±{blk.mc_std_error:.2g}"), None, \
        {"rademacher.json": out / "rademacher.json"}


def _run_bounds(config, out, jobs):
    model = build_model(config["model"])
    cls = build_class(config["class"])
    consts = config.get("constants", {})
    report = compare_bound_vs_empirical(
        model, cls, config["n_grid"], config["replications"], config["seed"],
        n_mc=config.get("n_mc", 2000), mode=config.get("mode", "em"),
        m_const=consts["M_const"], p=config.get("p", 2.0),
        lam=config.get("lambda"))
    report.to_csv(out / "bound_report.csv")
    (out / "bound_report.json").write_text(report.to_json())
    lo, hi = config.get("exponent_range", [0.45, 0.60])
    passed = lo <= report.growth_exponent <= hi
    return (f"growth exponent {report.growth_exponent:.3f} "
            f"(target [{lo}, {hi}]), M_min={report.m_min:.4g}"), passed, \
        {"bound_report.csv": out / "bound_report.csv",
         "bound_report.json": out / "bound_report.json"}


def _run_kde_rate(config, out, jobs):
    model = build_model(config["model"])
    kernel = KERNELS[config.get("kernel", "epanechnikov")]()
    cfg = KDEConfig(beta=config["beta"], scale=config.get("bandwidth_scale", 1.0),
                    support=tuple(config.get("support", (0.0, 1.0))))
    report = rate_experiment(model, kernel, cfg, config["n_grid"],
                             config["replications"], config["seed"], jobs=jobs)
    report.to_csv(out / "kde_rate.csv")
    tol = config.get("slope_tolerance", 0.1)
    passed = report.slope_within(tol)
    payload = json.loads(report.to_json())
    payload["pass"] = passed
    (out / "kde_rate.json").write_text(json.dumps(payload, indent=2))
    return (f"slope {report.slope:.3f} vs theory {report.theory_slope:.3f} "
            f"(tol {tol})"), passed, \
        {"kde_rate.csv": out / "kde_rate.csv", "kde_rate.json": out / "kde_rate.json"}


def _run_mh_credible(config, out, jobs):
    target = build_target(config["target"])
    proposal = build_proposal(config.get("proposal", {"kind": "uniform_step", "a": 0.25}),
                              target.dim)
    cert = build_minorization(target, proposal, center=config.get("center"))
    (out / "certificate.json").write_text(cert.to_json())
    series = credible_interval_experiment(
        target, proposal, cert, config.get("coordinate", 0), config["gamma"],
        config["n_grid"], config["replications"], config["seed"],
        n_u=config.get("n_u", 17), jobs=jobs)
    series.to_csv(out / "quantile_report.csv")
    (out / "quantile_report.json").write_text(series.to_json())
    tol = config.get("slope_tolerance", 0.15)
    monotone = all(r.monotone for r in series.reports)
    passed = bool(series.rate_checked and abs(series.slope + 0.5) <= tol and monotone)
    return (f"slope {series.slope:.3f} vs -0.5 (tol {tol}), monotone={monotone}"), passed, \
        {"certificate.json": out / "certificate.json",
         "quantile_report.csv": out / "quantile_report.csv",
         "quantile_report.json": out / "quantile_report.json"}


def _lemma_trial(limits, task):
    trial, trial_seed = task
    rng = np.random.default_rng(trial_seed)
    n_states = int(rng.integers(2, limits["max_states"] + 1))
    n_members = int(rng.integers(1, limits["max_members"] + 1))
    n_blocks = int(rng.integers(1, limits["max_blocks"] + 1))
    tables = rng.uniform(-1, 1, (n_members, n_states))
    blocks = tuple(rng.integers(0, n_states, int(rng.integers(1, limits["max_len"] + 1)))
                   for _ in range(n_blocks))
    weights = rng.dirichlet(np.ones(n_blocks))
    bm = BlockMeasure(blocks=blocks, weights=weights)
    cls = table_class(tables)
    rows = []
    for eps in limits["eps_grid"]:
        c1 = check_lifted_covering_bound(cls, bm, eps, method="exact")
        trunc = int(rng.integers(1, limits["max_len"] + 1))
        c2 = check_truncated_covering_bound(cls, bm, eps, trunc, method="exact")
        rows.append((trial, eps, "lift", c1.lhs, c1.rhs, c1.holds))
        rows.append((trial, eps, f"trunc{trunc}", c2.lhs, c2.rhs, c2.holds))
    return rows


def _run_verify_lemmas(config, out, jobs):
    limits = {
        "max_states": config.get("max_states", 4),
        "max_members": config.get("max_members", 6),
        "max_blocks": config.get("max_blocks", 5),
        "max_len": config.get("max_len", 4),
        "eps_grid": config.get("eps_grid", [round(0.1 * k, 10) for k in range(1, 21)]),
    }
    tasks = [(t, child_seed(config["seed"], t)) for t in range(config["trials"])]
    all_rows = pool_map(partial(_lemma_trial, limits), tasks, jobs)
    n_checks = 0
    n_holds = 0
    with open(out / "lemma_checks.csv", "w") as fh:
        fh.write("instance,eps,side,lhs,rhs,pass\n")
        for rows in all_rows:
            for trial, eps, side, lhs, rhs, holds in rows:
                fh.write(f"{trial},{format(eps, '.17g')},{side},{lhs},"
                         f"{'' if rhs is None else rhs},{int(holds)}\n")
                n_checks += 1
                n_holds += int(holds)
    passed = n_holds == n_checks
    (out / "lemma_summary.json").write_text(json.dumps(
        {"trials": config["trials"], "checks": n_checks, "holds": n_holds,
         "pass": passed}, indent=2))
    return f"{n_holds}/{n_checks} covering comparisons hold", passed, \
        {"lemma_checks.csv": out / "lemma_checks.csv",
         "lemma_summary.json": out / "lemma_summary.json"}


_RUNNERS = {
    "simulate": _run_simulate,
    "blocks": _run_blocks,
    "rademacher": _run_rademacher,
    "bounds": _run_bounds,
    "kde-rate": _run_kde_rate,
    "mh-credible": _run_mh_credible,
    "verify-lemmas": _run_verify_lemmas,
}


# ---------------------------------------------------------------------------
# Manifest and entry point
# ---------------------------------------------------------------------------


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run(config: dict, out_dir, jobs: int = 1):
    """Validate, execute, and write the manifest; returns (manifest, passed)."""
    violations = validate(config)
    if violations:
        raise ValueError("invalid config:\n  " + "\n  ".join(violations))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    summary, passed, outputs = _RUNNERS[config["experiment"]](config, out, jobs)
    manifest = {
        "artifact_version": __version__,
        "config_hash": hashlib.sha256(
            json.dumps(config, sort_keys=True).encode()).hexdigest(),
        "seed": config["seed"],
        "replication_seeds": _replication_seeds(config),
        "wall_clock_s": round(time.time() - t0, 3),
        "outputs": {name: _sha256(path) for name, path in sorted(outputs.items())},
        "summary": summary,
        "pass": passed,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return manifest, passed


def _replication_seeds(config):
    """The derived per-replication seeds this run used, for the manifest."""
    seed = config["seed"]
    if "n_grid" in config and "replications" in config:
        return [[child_seed(seed, i, r) for r in range(config["replications"])]
                for i in range(len(config["n_grid"]))]
    if config.get("experiment") == "verify-lemmas":
        return [child_seed(seed, t) for t in range(config["trials"])]
    return None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(1)


def main(argv=None) -> int:
    parser = _Parser(prog="regenmc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--jobs", type=int, default=1, help="parallel replications")
        p.add_argument("--out", default="out", help="output directory")
    p = sub.add_parser("validate")
    p.add_argument("--config", required=True)
    args = parser.parse_args(argv)

    try:
        config = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 1

    if args.command == "validate":
        violations = validate(config)
        if violations:
            for v in violations:
                print(v)
            return 1
        print("config ok")
        return 0

    config.setdefault("experiment", args.command)
    if config["experiment"] != args.command:
        print(f"error: config experiment {config['experiment']!r} does not match "
              f"subcommand {args.command!r}", file=sys.stderr)
        return 1
    if args.seed is not None:
        config["seed"] = args.seed
    try:
        manifest, passed = run(config, args.out, jobs=args.jobs)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    status = "PASS" if passed in (True, None) else "FAIL"
    print(f"[{status}] {manifest['summary']}")
    return 0 if passed in (True, None) else 2


if __name__ == "__main__":
    sys.exit(main())
