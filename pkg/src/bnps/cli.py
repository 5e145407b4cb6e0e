"""Command-line interface: ``bnps <command> ...``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

from bnps import __version__
from bnps.data import CategoricalDataset, ingest_csv
from bnps.errors import BnpsError, DataError
from bnps.estimators import (
    DEFAULT_CLIP,
    PropensityModel,
    binary_vector,
    hajek_ate,
    horvitz_thompson_ate,
    propensity_scores,
    reject_null,
)
from bnps.groundtruth import SCENARIOS, Scenario, generate_dataset, scenario_table_csv, true_ate
from bnps.montecarlo import METHODS, DEFAULT_SIZES, McConfig, run_grid
from bnps.network import BIC_CONVENTION, GENERATOR_FAMILY, BayesianNetwork, bic_score, fit_mle, log_likelihood
from bnps.search import SearchConfig, learn_structure

log = logging.getLogger("bnps")

EXIT_USAGE = 2
OUTCOME_NAMES = {"y", "outcome"}


class UsageError(Exception):
    pass


def _seed(value) -> int:
    if value is not None:
        return int(value)
    env = os.environ.get("BNPS_SEED")
    return int(env) if env else 0


def _search_dict(cfg: SearchConfig) -> dict:
    d = asdict(cfg)
    d["blacklist"] = sorted(map(list, cfg.blacklist))
    d["whitelist"] = sorted(map(list, cfg.whitelist))
    return d


def manifest(args, config: dict, seed: int) -> dict:
    blob = json.dumps(config, sort_keys=True, default=str)
    return {
        "command_line": ["bnps"] + list(args.argv),
        "config": config,
        "config_digest": hashlib.sha256(blob.encode()).hexdigest(),
        "master_seed": seed,
        "generator_family": GENERATOR_FAMILY,
        "version": __version__,
        "bic_convention": BIC_CONVENTION,
        "variance": "linearized",
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def _write_manifest(path: Path, doc: dict) -> None:
    Path(str(path) + ".manifest.json").write_text(json.dumps(doc, indent=1) + "\n")


# -- learn ------------------------------------------------------------------

def cmd_learn(args) -> int:
    data = ingest_csv(args.data)
    exclude = args.exclude or []
    for c in exclude:
        data.index(c)
    if not exclude and not args.force:
        suspicious = [nm for nm in data.names if nm.lower() in OUTCOME_NAMES]
        if suspicious:
            print(f"warning: outcome included in structure learning? column {suspicious[0]!r} "
                  "is not excluded; pass --exclude or --force", file=sys.stderr)
            return EXIT_USAGE
    cols = [nm for nm in data.names if nm not in exclude]
    seed = _seed(args.seed)
    cfg = SearchConfig(
        algorithm="tabu" if args.algorithm == "tabu" else "hill_climb",
        tabu_length=args.tabu_length,
        max_degrading_steps=args.max_degrading_steps,
        seed=seed,
    )
    sub, res = learn_structure(data, cols, cfg)
    bn = fit_mle(sub, res.dag)
    meta = manifest(args, {"data": str(args.data), "columns": cols, "search": _search_dict(cfg)}, seed)
    meta["bic"] = res.score
    bn.save(args.out, metadata=meta)
    if args.dot:
        Path(args.dot).write_text(res.dag.to_dot(sub.names))
    if args.trace:
        Path(args.trace).write_text(res.trace_csv())
    for w in res.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"BIC {res.score:.6f}")
    for u, v in res.dag.arcs:
        print(f"{sub.names[u]} -> {sub.names[v]}")
    return 0


# -- score ------------------------------------------------------------------

def cmd_score(args) -> int:
    bn = BayesianNetwork.load(args.model)
    data = ingest_csv(args.data).select(bn.names)
    data = _recode(data, bn)
    total, fam = bic_score(data, bn.dag)
    print(f"loglik {log_likelihood(bn, data):.6f}")
    print(f"BIC {total:.6f}")
    for nm, f in zip(bn.names, fam):
        print(f"  {nm} {f:.6f}")
    return 0


def _recode(data, bn: BayesianNetwork):
    """Re-encode ``data`` columns onto the model's state lists."""
    rows = data.labels()
    return CategoricalDataset.from_labels(data.names, rows, bn.variables)


# -- ate --------------------------------------------------------------------

def cmd_ate(args) -> int:
    bn = BayesianNetwork.load(args.model)
    raw = ingest_csv(args.data)
    for col in (args.treatment, args.outcome):
        raw.index(col)
    if raw.variables[raw.index(args.treatment)].cardinality != 2:
        raise DataError("treatment must be binary")
    if args.treatment not in bn.names:
        raise DataError(f"treatment {args.treatment!r} is not a model node")
    covs = _recode(raw.select(bn.names), bn)
    model = PropensityModel(bn, args.treatment, args.clip, args.treated_state)
    ps = propensity_scores(model, covs)
    t = binary_vector(raw, args.treatment, args.treated_state)
    y = binary_vector(raw, args.outcome, args.positive_outcome)
    names = ["hajek", "ht"] if args.estimator == "both" else [args.estimator]
    first = True
    for nm in names:
        fn = hajek_ate if nm == "hajek" else horvitz_thompson_ate
        est = fn(y, t, ps.scores, ps.clipped)
        sys.stdout.write(est.to_csv(header=first, digits=6))
        first = False
        verdict = "reject" if reject_null(est) else "fail_to_reject"
        print(f"# {est.method}: {verdict} H0 (no treatment effect) at 5%")
    return 0


# -- simulate ---------------------------------------------------------------

def _split(s, cast=str):
    if isinstance(s, (list, tuple)):
        return [cast(x) for x in s]
    return [cast(x) for x in str(s).split(",") if x]


def _expand_scenarios(spec) -> list[str]:
    out = []
    for part in _split(spec):
        part = part.upper()
        if ".." in part:
            a, b = part.split("..")
            lo, hi = int(a.lstrip("S")), int(b.lstrip("S"))
            out += [f"S{k}" for k in range(lo, hi + 1)]
        else:
            out.append(part)
    bad = [s for s in out if s not in SCENARIOS]
    if bad:
        raise UsageError(f"unknown scenario(s) {bad}")
    return out


def cmd_simulate(args) -> int:
    file_cfg = {}
    if args.config:
        file_cfg = json.loads(Path(args.config).read_text())

    def pick(name, default):
        val = getattr(args, name)
        return val if val is not None else file_cfg.get(name, default)

    try:
        seed = int(pick("seed", _seed(None)))
        scenarios = _expand_scenarios(pick("scenarios", "S1..S15"))
        sizes = _split(pick("sizes", list(DEFAULT_SIZES)), int)
        methods = _split(pick("methods", list(METHODS)))
        cfg = McConfig(scenarios=tuple(scenarios), sizes=tuple(sizes),
                       replicates=int(pick("replicates", 1000)), methods=tuple(methods),
                       master_seed=seed, workers=int(pick("workers", 1)))
    except (ValueError, TypeError) as e:
        raise UsageError(str(e)) from None
    resolved = {k: v for k, v in asdict(cfg).items() if k not in ("workers", "search")}
    resolved["search"] = _search_dict(cfg.search)
    meta = manifest(args, resolved, seed)
    if args.manifest_only:
        print(json.dumps(meta, indent=1, default=str))
        return 0
    res = run_grid(cfg)
    out = Path(args.out)
    out.write_text(res.to_csv())
    _write_manifest(out, meta)
    flagged = sum(c.flagged for c in res.cells)
    print(f"wrote {len(res.cells)} rows to {out}" + (f" ({flagged} flagged)" if flagged else ""))
    return 0


# -- true-ate / scenarios / generate ----------------------------------------

def cmd_true_ate(args) -> int:
    if args.params:
        try:
            a0, a1, b1, b2 = (float(x) for x in args.params.split(","))
        except ValueError:
            raise UsageError("--params expects four comma-separated numbers") from None
        s = Scenario("custom", a0, a1, b1, b2)
    else:
        key = args.scenario.upper()
        if key not in SCENARIOS:
            raise UsageError(f"unknown scenario {args.scenario!r}")
        s = SCENARIOS[key]
    print(f"{true_ate(s):.6f}")
    return 0


def cmd_scenarios(args) -> int:
    text = scenario_table_csv()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_generate(args) -> int:
    key = args.scenario.upper()
    if key not in SCENARIOS:
        raise UsageError(f"unknown scenario {args.scenario!r}")
    seed = _seed(args.seed)
    sample = generate_dataset(SCENARIOS[key], args.n, seed)
    sample.data.to_csv(args.out)
    _write_manifest(Path(args.out), manifest(args, {"scenario": key, "n": args.n}, seed))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bnps", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("learn", help="learn a network structure and fit its CPTs")
    q.add_argument("--data", required=True)
    q.add_argument("--exclude", action="append", help="column to leave out (repeatable)")
    q.add_argument("--algorithm", choices=["tabu", "hc"], default="tabu")
    q.add_argument("--out", required=True)
    q.add_argument("--dot")
    q.add_argument("--trace")
    q.add_argument("--tabu-length", type=int, default=10)
    q.add_argument("--max-degrading-steps", type=int, default=10)
    q.add_argument("--seed", type=int)
    q.add_argument("--force", action="store_true")
    q.set_defaults(func=cmd_learn)

    q = sub.add_parser("score", help="log-likelihood and BIC of a model on data")
    q.add_argument("--data", required=True)
    q.add_argument("--model", required=True)
    q.set_defaults(func=cmd_score)

    q = sub.add_parser("ate", help="propensity-weighted ATE from a fitted model")
    q.add_argument("--data", required=True)
    q.add_argument("--model", required=True)
    q.add_argument("--treatment", required=True)
    q.add_argument("--outcome", required=True)
    q.add_argument("--estimator", choices=["hajek", "ht", "both"], default="hajek")
    q.add_argument("--clip", type=float, default=DEFAULT_CLIP)
    q.add_argument("--treated-state", default="1")
    q.add_argument("--positive-outcome", default="1")
    q.set_defaults(func=cmd_ate)

    q = sub.add_parser("simulate", help="Monte Carlo grid over scenarios and sample sizes")
    q.add_argument("--scenarios")
    q.add_argument("--sizes")
    q.add_argument("--replicates", type=int)
    q.add_argument("--methods")
    q.add_argument("--seed", type=int)
    q.add_argument("--workers", type=int)
    q.add_argument("--out", default="results.csv")
    q.add_argument("--config", help="JSON file; flags take precedence")
    q.add_argument("--manifest-only", action="store_true")
    q.set_defaults(func=cmd_simulate)

    q = sub.add_parser("true-ate", help="analytic true ATE of a scenario")
    g = q.add_mutually_exclusive_group(required=True)
    g.add_argument("--scenario")
    g.add_argument("--params", help="alpha0,alpha1,beta1,beta2")
    q.set_defaults(func=cmd_true_ate)

    q = sub.add_parser("scenarios", help="export the scenario registry as CSV")
    q.add_argument("--out")
    q.set_defaults(func=cmd_scenarios)

    q = sub.add_parser("generate", help="sample a dataset from the ground-truth model")
    q.add_argument("--scenario", required=True)
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--seed", type=int)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_generate)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # "--params -2,1,0,0" would otherwise be parsed as an option
    for i, tok in enumerate(argv[:-1]):
        if tok == "--params" and argv[i + 1].startswith("-"):
            argv[i:i + 2] = [f"--params={argv[i + 1]}"]
            break
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    if args.command == "simulate":
        logging.getLogger("bnps.montecarlo").setLevel(logging.INFO)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except BnpsError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
