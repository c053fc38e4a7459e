"""Command-line entry point: ingest, synth, stats, train, eval, gradcheck.

Hyperparameters can come from a ``key = value`` file given with
``--config``; explicit flags override file values. Exit status is 0 on
success, 1 for data errors, 2 for usage errors and 3 when training
produced a non-finite loss.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

from credinfer.graph import THETA_GRID, HsnError, derive_entity_labels, load_dir, load_hsn, save_dir, split_folds

EXIT_OK, EXIT_DATA, EXIT_USAGE, EXIT_NONFINITE = 0, 1, 2, 3

GRADCHECK_TOLERANCE = 1e-4


class UsageFailure(Exception):
    pass


def _train_fields():
    from credinfer.train import TrainConfig

    return {f.name: f for f in fields(TrainConfig)}


def read_config_file(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment, dashes in keys become underscores."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageFailure(f"cannot read config {path}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageFailure(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def parse_theta_grid(text: str) -> tuple[float, ...]:
    try:
        grid = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise UsageFailure(f"bad theta grid {text!r}") from None
    if not grid or any(not 0 < t <= 1 for t in grid):
        raise UsageFailure("theta values must lie in (0, 1]")
    return grid


def _coerce(name: str, value):
    ftype = _train_fields()[name].type
    if isinstance(value, str):
        try:
            if ftype in ("int", int):
                return int(value)
            if ftype in ("float", float):
                return float(value)
            if ftype in ("bool", bool):
                if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(value)
                return value.lower() in ("true", "1", "yes")
        except ValueError:
            raise UsageFailure(f"bad value for {name}: {value!r}") from None
    return value


def build_config(args, **fixed):
    """TrainConfig from defaults, then the config file, then flags, then ``fixed``."""
    from credinfer.train import TrainConfig

    known = _train_fields()
    values = {}
    extra = {}
    if getattr(args, "config", None):
        for key, value in read_config_file(args.config).items():
            if key in known:
                values[key] = _coerce(key, value)
            else:
                extra[key] = value
    for name in known:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    values.update(fixed)
    try:
        return TrainConfig(**values), extra
    except ValueError as exc:
        raise UsageFailure(str(exc)) from None


def _add_hyper(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("hyperparameters")
    g.add_argument("--config", help="key = value file; flags override it")
    for name, typ in (("d", int), ("e_dim", int), ("hidden_dim", int), ("latent_dim", int),
                      ("state_dim", int), ("q", int), ("K", int), ("alpha", float),
                      ("learning_rate", float), ("momentum", float), ("epochs", int),
                      ("grad_clip", float), ("seed", int)):
        g.add_argument("--" + name.replace("_", "-"), dest=name, type=typ)
    g.add_argument("--train-space", dest="train_space", choices=("matched", "multi"))


def _load_labelled(directory):
    return derive_entity_labels(load_dir(directory))


def cmd_ingest(args) -> int:
    hsn = load_hsn(args.articles, args.creators, args.subjects, args.edges)
    for key, value in hsn.counts().items():
        print(f"{key}: {value}")
    return EXIT_OK


def cmd_synth(args) -> int:
    from credinfer.synth import generate_synthetic

    hsn = generate_synthetic(args.articles, args.creators, args.subjects, signal_strength=args.strength,
                             seed=args.seed, zipf_exponent=args.zipf_exponent)
    save_dir(hsn, args.out)
    print(f"wrote {len(hsn.articles)} articles, {len(hsn.creators)} creators, "
          f"{len(hsn.subjects)} subjects to {args.out}")
    return EXIT_OK


def cmd_stats(args) -> int:
    from credinfer.stats import compute_stats, format_summary

    report = compute_stats(_load_labelled(args.data), top_k=args.top_k)
    report.write(args.out)
    print(format_summary(report))
    for section in report.empty_sections:
        print(f"section {section} is empty")
    return EXIT_OK


def cmd_train(args) -> int:
    from credinfer.features import build_vocab
    from credinfer.train import FoldData, fit, write_trace

    cfg, _ = build_config(args, mode=args.mode, theta=args.theta, fold=args.fold)
    hsn = _load_labelled(args.data)
    if not 0 <= args.fold < args.folds:
        raise UsageFailure(f"fold must lie in [0, {args.folds})")
    try:
        fold = split_folds(hsn, args.folds, args.theta, cfg.seed).folds[args.fold]
        vocab = build_vocab(hsn, cfg.d, train_ids=fold.sampled)
    except ValueError as exc:
        raise UsageFailure(str(exc)) from None
    data = FoldData.build(hsn, vocab, fold.sampled, cfg.q)
    result = fit(hsn, vocab, fold.sampled, cfg, data=data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result.params.save(out / "model.ckpt")
    vocab.save(out / "vocab.txt")
    write_trace(out / "trace.csv", result.trace)
    print(f"final loss {result.trace[-1][1]:.6f}; wrote {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from credinfer.evaluation import run_experiment

    grid = parse_theta_grid(args.theta_grid)
    modes = ("bi", "multi") if args.mode == "both" else (args.mode,)
    # the per-cell mode is set by the harness; --mode here only selects which ones run
    cfg, _ = build_config(args, mode=modes[0])
    if args.parallel < 1:
        raise UsageFailure("--parallel must be at least 1")
    hsn = _load_labelled(args.data)
    try:
        split_folds(hsn, args.folds, 1.0, cfg.seed)
    except ValueError as exc:
        raise UsageFailure(str(exc)) from None
    report = run_experiment(hsn, grid, args.folds, cfg, cfg.seed, modes=modes, parallel=args.parallel)
    per_fold, agg = report.write(args.out)
    print(f"{len(report.records)} records; wrote {per_fold} and {agg}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from credinfer.train import gradient_suite

    worst = 0.0
    for K in (1, 2):
        for mode in ("bi", "multi"):
            err = gradient_suite(K=K, mode=mode, seed=args.seed)
            print(f"K={K} mode={mode} max relative error {err:.3e}")
            worst = max(worst, err)
    print(f"max relative error {worst:.3e}")
    return EXIT_OK if worst < GRADCHECK_TOLERANCE else EXIT_DATA


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="credinfer", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a dataset and print node/edge counts")
    for name in ("articles", "creators", "subjects", "edges"):
        p.add_argument("--" + name, required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--articles", type=int, default=600)
    p.add_argument("--creators", type=int, default=100)
    p.add_argument("--subjects", type=int, default=20)
    p.add_argument("--strength", type=float, default=0.8)
    p.add_argument("--zipf-exponent", type=float, default=1.6)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("stats", help="write descriptive statistics CSVs")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--top-k", type=int, default=20)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="fit one (theta, fold) cell")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--fold", type=int, default=0)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--mode", choices=("bi", "multi"), default="bi")
    _add_hyper(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="cross-validated experiment over a theta grid")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--theta-grid", default=",".join(str(t) for t in THETA_GRID))
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--mode", choices=("bi", "multi", "both"), default="both")
    p.add_argument("--parallel", type=int, default=1)
    _add_hyper(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of the full loss on a toy graph")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from credinfer.train import NonFiniteLossError

    try:
        return args.func(args)
    except UsageFailure as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (HsnError, OSError) as exc:
        print(f"{parser.prog}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NonFiniteLossError as exc:
        print(f"{parser.prog}: {exc}", file=sys.stderr)
        return EXIT_NONFINITE


if __name__ == "__main__":
    sys.exit(main())
