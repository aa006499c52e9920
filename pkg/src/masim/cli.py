"""``masim`` command line: run scenarios, experiments, the protocol demo, bounds and costs.

Exit codes: 0 success, 1 failed self-check, 2 bad input or config,
3 structural error, 4 agent step failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

SEED_ENV = "MASIM_SEED"
DEFAULT_SEED = 42


def resolve_seed(flag, fallback: int = DEFAULT_SEED) -> int:
    """``--seed`` wins, then ``$MASIM_SEED``, then ``fallback``."""
    if flag is not None:
        return int(flag)
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError:
            raise SystemExit(f"error: {SEED_ENV}={env!r} is not an integer") from None
    return fallback


def _emit(text: str, out) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _floats(s: str) -> list[float]:
    return [float(x) for x in s.split(",") if x.strip()]


def _ints(s: str) -> list[int]:
    return [int(x) for x in s.split(",") if x.strip()]


def _fail(code: int, msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


# --- subcommands --------------------------------------------------------------

def cmd_run(args) -> int:
    from .config import ConfigError, load_scenario, resolve_scenario
    from .core import StructuralError
    from .runtime import RunError, run

    try:
        sc = load_scenario(resolve_scenario(args.config))
        sc = sc.with_overrides(seed=resolve_seed(args.seed, sc.run.seed), workers=args.workers,
                               mode=args.mode, max_steps=args.max_steps)
    except (ConfigError, FileNotFoundError) as exc:
        return _fail(2, str(exc))
    except ValueError as exc:
        return _fail(2, f"invalid override: {exc}")
    try:
        trace = run(*sc.build())
    except StructuralError as exc:
        return _fail(3, str(exc))
    except RunError as exc:
        return _fail(4, str(exc))
    _emit(trace.to_jsonl(), args.out)
    return 0


def cmd_ensemble(args) -> int:
    from .ensemble.data import builtin_blobs, load_csv
    from .ensemble.experiment import run_overlap_experiment
    from .ensemble.trees import WeakLearnerParams

    seed = resolve_seed(args.seed)
    try:
        source = builtin_blobs() if args.dataset == "builtin" else load_csv(args.dataset)
        params = WeakLearnerParams(args.max_depth, args.min_leaf)
        rho, k = _floats(args.rho), _ints(args.k)
    except (OSError, ValueError) as exc:
        return _fail(2, str(exc))
    result = run_overlap_experiment(source, rho, k, args.replicates, params, seed,
                                    args.n_per_agent, args.eval_size, args.workers or 1)
    for c in result.cells.values():
        if c.error:
            print(f"warning: rho={c.rho:g} k={c.k}: {c.error}", file=sys.stderr)
    _emit(result.to_csv(), args.out)
    return 0


def _vuln_attribution(args, cfg: dict, seed: int) -> int:
    from .vulnerability.attribution import ARMS, SyntheticCellsConfig, run_attribution_experiment

    try:
        config = SyntheticCellsConfig(**cfg)
    except (TypeError, ValueError) as exc:
        return _fail(2, f"attribution config: {exc}")
    res = run_attribution_experiment(config, args.replicates, seed)
    _emit(res.to_csv(), args.out)
    m = {arm: res.mean(arm) for arm in ARMS}
    report = {
        "experiment": "attribution",
        "seed": seed,
        "replicates": args.replicates,
        "mean_macro_f1": m,
        "std_macro_f1": {arm: res.std(arm) for arm in ARMS},
        "mean_signal_recall": {arm: float(sum(v) / len(v)) for arm, v in res.signal_recall.items()},
        "ordering_holds": m["clean_selected"] > m["all_features"] > m["corrupted_selected"],
    }
    text = _dumps(report)
    if args.report:
        Path(args.report).write_text(text)
    else:
        (sys.stderr if args.out in (None, "-") else sys.stdout).write(text)
    return 0


def _vuln_star(cfg: dict):
    from .vulnerability import constructions as C
    from .vulnerability.propagation import accuracy_metric, eval_star

    builders = {"one_sensitive": C.one_sensitive_star, "shared_trigger": C.shared_trigger_star,
                "identical": C.identical_star}
    name = cfg.get("construction", "one_sensitive")
    if name not in builders:
        raise ValueError(f"unknown star construction {name!r}; expected one of {sorted(builders)}")
    star, samples, delta = builders[name]()
    rep = eval_star(star, accuracy_metric, samples, delta, float(cfg.get("tolerance", 0.0)))
    return {"experiment": "star", "construction": name, **rep.to_json()}


def _vuln_cascade(cfg: dict, seed: int):
    import numpy as np

    from .vulnerability import constructions as C
    from .vulnerability.propagation import displacement_metric, eval_cascade

    name = cfg.get("construction", "aligned")
    gain = float(cfg.get("gain", 1.0))
    if name == "aligned":
        stages = C.aligned_cascade(int(cfg.get("stages", 2)), gain)
    elif name == "orthogonal":
        stages = C.orthogonal_cascade(gain)
    else:
        raise ValueError(f"unknown cascade construction {name!r}; expected aligned or orthogonal")
    mixture = C.trigger_mixture(float(cfg.get("alpha", 0.3)), float(cfg.get("shift", 1.0)))
    rep = eval_cascade(stages, displacement_metric, mixture, n_samples=int(cfg.get("n_samples", 2000)),
                       rng=np.random.default_rng(seed), tolerance=float(cfg.get("tolerance", 1e-9)))
    return {"experiment": "cascade", "construction": name, "stages": [s.id for s in stages], **rep.to_json()}


def cmd_vuln(args) -> int:
    from .config import ConfigError, load_json

    seed = resolve_seed(args.seed)
    try:
        cfg = load_json(args.config) if args.config else {}
    except (ConfigError, OSError) as exc:
        return _fail(2, str(exc))
    if not isinstance(cfg, dict):
        return _fail(2, "vuln config must be a JSON object")
    if args.experiment == "attribution":
        return _vuln_attribution(args, cfg, seed)
    try:
        report = _vuln_star(cfg) if args.experiment == "star" else _vuln_cascade(cfg, seed)
    except ValueError as exc:
        return _fail(2, str(exc))
    _emit(_dumps(report), args.out)
    return 0


def cmd_iomas_demo(args) -> int:
    from .config import ConfigError, load_json, resolve_scenario
    from .iomas import run_demo

    try:
        scenario = load_json(resolve_scenario(args.scenario))
        result = run_demo(scenario)
    except (ConfigError, OSError, KeyError, ValueError, LookupError) as exc:
        return _fail(2, f"{type(exc).__name__}: {exc}")
    _emit(result.events_jsonl(), args.out)
    (sys.stderr if args.out in (None, "-") else sys.stdout).write(_dumps(result.summary()))
    return 0


def cmd_bounds(args) -> int:
    from .ensemble.voting import EXACT_MAX_AGENTS, exact_majority_error, hoeffding_error_bound

    if args.k < 1 or not 0.0 <= args.e <= 1.0:
        return _fail(2, "need k >= 1 and 0 <= e <= 1")
    bound = hoeffding_error_bound(args.k, args.e)
    out = {"k": args.k, "e": args.e, "tie_rule": args.tie_rule, "bound": bound}
    if args.k > EXACT_MAX_AGENTS:
        out.update(exact=None, note=f"exact oracle skipped: k exceeds budget of {EXACT_MAX_AGENTS}")
        _emit(_dumps(out), args.out)
        return 0
    exact = exact_majority_error([args.e] * args.k, args.tie_rule)
    out.update(exact=exact, bound_ge_exact=bound >= exact)
    _emit(_dumps(out), args.out)
    return 0 if bound >= exact else 1


def cmd_cost(args) -> int:
    from .costmodel import CostParams, advantage, cost_single, cost_two_agent

    try:
        p = CostParams(args.c_single, args.c1, args.c2, args.delta_comm,
                       args.steps_multi, args.steps_y1, args.steps_y2)
    except ValueError as exc:
        return _fail(2, str(exc))
    out = {"cost_single": cost_single(p), "cost_two_agent": cost_two_agent(p),
           **advantage(p, args.ratio).to_json()}
    _emit(_dumps(out), args.out)
    return 0


# --- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help=f"RNG seed (else ${SEED_ENV}, else 42)")
    common.add_argument("--out", default=None, help="output file (default: stdout)")
    # run falls back to the scenario's worker count, everything else to 1
    common.add_argument("--workers", type=int, default=None)

    p = argparse.ArgumentParser(prog="masim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="run a scenario and write its JSON-lines trace")
    r.add_argument("config", help="scenario file, or a bundled name: flight_booking, warehouse")
    r.add_argument("--mode", choices=("synchronous", "dag_ordered"), default=None)
    r.add_argument("--max-steps", type=int, default=None)
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("ensemble", parents=[common], help="overlap-ratio ensemble experiment")
    e.add_argument("--rho", default="0,0.25,0.5,0.75,1")
    e.add_argument("--k", default="1,5,7,11,15")
    e.add_argument("--replicates", type=int, default=50)
    e.add_argument("--dataset", default="builtin", help="'builtin' or a CSV path with a label column")
    e.add_argument("--n-per-agent", type=int, default=100)
    e.add_argument("--eval-size", type=int, default=None)
    e.add_argument("--max-depth", type=int, default=4)
    e.add_argument("--min-leaf", type=int, default=2)
    e.set_defaults(func=cmd_ensemble)

    v = sub.add_parser("vuln", parents=[common], help="vulnerability experiments")
    v.add_argument("--experiment", choices=("attribution", "star", "cascade"), default="attribution")
    v.add_argument("--config", default=None, help="JSON object of experiment settings")
    v.add_argument("--replicates", type=int, default=10)
    v.add_argument("--report", default=None, help="attribution: path for the summary JSON")
    v.set_defaults(func=cmd_vuln)

    d = sub.add_parser("iomas-demo", parents=[common], help="directory, gateway and dispatch demo")
    d.add_argument("scenario", nargs="?", default="iomas_flight")
    d.set_defaults(func=cmd_iomas_demo)

    b = sub.add_parser("bounds", parents=[common], help="Hoeffding bound vs exact majority error")
    b.add_argument("--k", type=int, required=True)
    b.add_argument("--e", type=float, required=True)
    b.add_argument("--tie-rule", choices=("one_wins", "zero_wins", "random"), default="one_wins")
    b.set_defaults(func=cmd_bounds)

    c = sub.add_parser("cost", parents=[common], help="single vs two-agent expected cost")
    c.add_argument("--c-single", type=float, required=True)
    c.add_argument("--c1", type=float, required=True)
    c.add_argument("--c2", type=float, required=True)
    c.add_argument("--delta-comm", type=float, default=0.0)
    c.add_argument("--steps-multi", type=float, required=True)
    c.add_argument("--steps-y1", type=float, required=True)
    c.add_argument("--steps-y2", type=float, required=True)
    c.add_argument("--ratio", type=float, default=0.1, help="threshold standing in for 'much less than'")
    c.set_defaults(func=cmd_cost)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.workers is not None and args.workers < 1:
        return _fail(2, "--workers must be >= 1")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
