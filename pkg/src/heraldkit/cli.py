"""Command line interface.

Exit codes: 0 on success, 1 when an operation fails (a regression check
or a diverged training run), 2 for usage and configuration errors.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import classifier as clf
from . import search as srch
from . import targets
from .config import SearchConfig, env_output_dir, env_threads
from .errors import ConfigError, HeraldkitError
from .fock import fidelity, run_experiment

log = logging.getLogger("heraldkit")


def _add_common(p):
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    p.add_argument(
        "--output-dir",
        default=None,
        help="directory for outputs (default: $HERALDKIT_OUTPUT_DIR or ./heraldkit-out)",
    )


def _out_dir(args) -> str:
    d = args.output_dir or env_output_dir()
    os.makedirs(d, exist_ok=True)
    return d


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="heraldkit",
        description="Heralded photonic state engineering toolkit",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-table", help="recompute the reference settings table")
    _add_common(p)
    p.add_argument("--tol", type=float, default=1e-6, help="allowed drift from the stored fidelities")
    p.add_argument("--json", default=None, help="write the table to this JSON file")

    p = sub.add_parser("synth-dataset", help="synthesise a labelled feature dataset")
    _add_common(p)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--truncation", type=int, default=clf.FEATURE_TRUNCATION)
    p.add_argument("--out", required=True, help="output .npz path")

    p = sub.add_parser("train-classifier", help="train the surrogate classifier")
    _add_common(p)
    p.add_argument("--data", required=True, help="dataset .npz from synth-dataset")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output model .json path")
    p.add_argument("--steps", type=int, default=None, help="minibatch steps (overrides epochs)")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument(
        "--reference",
        action="store_true",
        help="use the reference training recipe (5000 shuffled passes)",
    )

    p = sub.add_parser("classify", help="classify states from an amplitudes file")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--states", required=True, help=".npz with an 'amplitudes' array")
    p.add_argument("--json", default=None, help="write predictions to this JSON file")

    p = sub.add_parser("search", help="run the staged search for one target family")
    _add_common(p)
    p.add_argument("--config", default=None, help="JSON file of SearchConfig overrides")
    p.add_argument("--target", default=None, help="target family")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--model", default=None, help="surrogate classifier for stage 1")
    p.add_argument("--no-surrogate", action="store_true", help="score stage 1 by grid fidelity")
    p.add_argument("--report", default=None, help="JSONL report path")
    p.add_argument("--resume", action="store_true", help="reuse completed stages from the report")
    p.add_argument("--dump-config", action="store_true", help="print the effective config and exit")
    p.add_argument("--dry-run", action="store_true", help="validate inputs and exit")

    p = sub.add_parser("inspect-report", help="summarise a search report")
    _add_common(p)
    p.add_argument("report", help="JSONL report path")

    return ap


# ---------------------------------------------------------------------------
# subcommands


def cmd_verify_table(args) -> int:
    rows = targets.verification_rows()
    worst = 0.0
    out = []
    failed = False
    for row in rows:
        res = run_experiment(row.experiment, targets.VERIFICATION_TRUNCATION)
        target = targets.make_target(
            row.family, row.target_params, targets.VERIFICATION_TRUNCATION
        )
        f = fidelity(res.amplitudes, target)
        drift = abs(f - row.reference_fidelity)
        worst = max(worst, drift)
        ok = drift <= args.tol
        failed = failed or not ok
        out.append(
            {
                "name": row.name,
                "fidelity": f,
                "herald_probability": res.herald_probability,
                "reference_fidelity": row.reference_fidelity,
                "drift": drift,
                "ok": ok,
            }
        )
        print(
            f"{row.name:<14s} fidelity {f:.9f}  herald {res.herald_probability:.3e}  "
            f"drift {drift:.2e}  {'ok' if ok else 'FAIL'}"
        )
    print(f"worst drift {worst:.2e} (tol {args.tol:.2e})")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(
                {
                    "truncation": targets.VERIFICATION_TRUNCATION,
                    "tol": args.tol,
                    "rows": out,
                },
                fh,
                indent=2,
            )
    return 1 if failed else 0


def cmd_synth_dataset(args) -> int:
    X, y = clf.synthesize_dataset(args.size, args.seed, args.truncation)
    meta = {
        "size": args.size,
        "seed": args.seed,
        "truncation": args.truncation,
        "categories": list(targets.CATEGORIES),
    }
    clf.save_dataset(args.out, X, y, meta)
    print(f"wrote {args.size} samples to {args.out}")
    return 0


def cmd_train_classifier(args) -> int:
    X, y, meta = clf.load_dataset(args.data)
    if args.reference:
        cfg = clf.TrainConfig.reference()
    else:
        cfg = clf.TrainConfig()
    if args.steps is not None:
        cfg.steps = args.steps
    if args.epochs is not None:
        cfg.epochs = args.epochs
        if args.steps is None:
            cfg.steps = 0
    if args.batch_size is not None:
        cfg.batch_size = args.batch_size
    if args.learning_rate is not None:
        cfg.learning_rate = args.learning_rate
    model = clf.init_model(args.seed)
    try:
        history = clf.train(model, X, y, cfg, args.seed)
    except HeraldkitError as e:
        print(f"training failed: {e}", file=sys.stderr)
        return 1
    stats = clf.evaluate(model, X, y)
    clf.save_model(
        args.out,
        model,
        meta={
            "train_config": cfg.to_dict(),
            "seed": args.seed,
            "dataset": meta,
            "final_loss": history["loss"][-1],
            "train_accuracy": stats["accuracy"],
        },
    )
    print(
        f"trained {history['steps']} steps, final loss {history['loss'][-1]:.4f}, "
        f"train accuracy {stats['accuracy']:.4f}, wrote {args.out}"
    )
    return 0


def cmd_classify(args) -> int:
    model = clf.load_model(args.model)
    with np.load(args.states, allow_pickle=False) as f:
        amps = f["amplitudes"]
    feats = np.stack([clf.state_features(a) for a in np.atleast_2d(amps)])
    probs = clf.predict_proba(model, feats)
    labels = np.argmax(probs, axis=1)
    preds = []
    for i, lab in enumerate(labels):
        name = targets.CATEGORIES[lab]
        preds.append(
            {"index": i, "category": name, "probabilities": [float(p) for p in probs[i]]}
        )
        print(f"{i:>5d}  {name:<14s} p={probs[i][lab]:.4f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"model": args.model, "predictions": preds}, fh, indent=2)
    return 0


def _search_config(args) -> SearchConfig:
    if args.config:
        cfg = SearchConfig.from_file(args.config)
    else:
        cfg = SearchConfig()
    if args.target is not None:
        cfg.target = args.target
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    elif "HERALDKIT_THREADS" in os.environ:
        cfg.threads = env_threads()
    cfg.validate()
    return cfg


def cmd_search(args) -> int:
    cfg = _search_config(args)
    if args.dump_config:
        print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
        return 0
    model = None
    if not args.no_surrogate:
        if not args.model:
            print(
                "search needs --model for the stage-1 surrogate (or --no-surrogate)",
                file=sys.stderr,
            )
            return 2
        model = clf.load_model(args.model)
    if args.dry_run:
        print("config and inputs look valid")
        return 0
    report = args.report or os.path.join(
        _out_dir(args), f"search_{cfg.target}_seed{cfg.seed}.jsonl"
    )
    result = srch.run_pipeline(cfg, model=model, report_path=report, resume=args.resume)
    print(
        f"target {cfg.target} seed {cfg.seed}: grid fidelity {result.grid_fidelity:.6f}, "
        f"polished {result.polished_fidelity:.6f}, herald {result.herald_probability:.3e}"
    )
    print(f"report written to {report}")
    return 0


def cmd_inspect_report(args) -> int:
    records = srch._load_jsonl(args.report)
    if not records:
        print(f"no records in {args.report}", file=sys.stderr)
        return 1
    for rec in records:
        kind = rec.get("kind")
        if kind == "header":
            cfg = rec["config"]
            print(f"header: target {cfg['target']} seed {cfg['seed']}")
        elif kind == "seed_stage":
            print(
                f"stage 1: pool {rec['pool_size']}, mean score {rec['pool_mean_score']:.4g}, "
                f"top-100 mean {rec['top100_mean_score']:.4g}, {rec['wall_time_s']:.1f}s"
            )
        elif kind == "ga_stage":
            print(
                f"stage {rec['stage']}: truncation {rec['truncation']}, "
                f"best {rec['best_fitness']:.6f}, mean {rec['mean_fitness']:.6f}, "
                f"{rec['evaluations']} evaluations, {rec['wall_time_s']:.1f}s"
            )
        elif kind == "result":
            print(
                f"result: grid {rec['grid_fidelity']:.6f}, polished "
                f"{rec['polished_fidelity']:.6f}, herald {rec['herald_probability']:.3e}"
            )
    return 0


COMMANDS = {
    "verify-table": cmd_verify_table,
    "synth-dataset": cmd_synth_dataset,
    "train-classifier": cmd_train_classifier,
    "classify": cmd_classify,
    "search": cmd_search,
    "inspect-report": cmd_inspect_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"file error: {e}", file=sys.stderr)
        return 2
    except HeraldkitError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
