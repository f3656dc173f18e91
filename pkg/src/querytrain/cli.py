"""Command-line entry point.

Every subcommand accepts ``--config FILE`` (JSON whose keys mirror the flag
names); explicit flags override it.  ``--seed`` is mandatory, from either
source.  Commands that write an output directory also write
``manifest.json``, which can be passed back as ``--config`` to reproduce
the run.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import CheckpointError, DataError, DimensionError, DomainError, NumericalError, OracleSizeError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("querytrain")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _float_list(text):
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _common(p):
    p.add_argument("--config", help="JSON file with default values for any flag")
    p.add_argument("--seed", type=int, help="global random seed (mandatory)")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="worker threads; results do not depend on it")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="querytrain", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", help="generate synthetic data from a random RBM")
    _common(p)
    p.add_argument("--visible", type=int, default=16)
    p.add_argument("--hidden", type=int, default=8)
    p.add_argument("--scale", type=float, default=1.5)
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--fractions", type=_float_list, default=[0.8, 0.1, 0.1])
    p.add_argument("--pl-failure", action="store_true",
                   help="generate the correlated a/b/z dataset instead of an RBM sample")
    p.add_argument("--out", required=False)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train-qt", help="query-train an unrolled BP network")
    _common(p)
    p.add_argument("--train")
    p.add_argument("--valid")
    p.add_argument("--hidden", type=int, default=8)
    p.add_argument("--layers", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=500)
    p.add_argument("--lr", type=_float_list, default=[3e-2, 1e-2, 3e-3, 1e-3],
                   help="learning rate, or comma-separated grid selected on validation NCE")
    p.add_argument("--max-epochs", type=int, default=100)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--clamp", type=float, default=20.0)
    p.add_argument("--queries", default="bernoulli:0.5", help="bernoulli:P or pl")
    p.add_argument("--out")
    p.set_defaults(func=cmd_train_qt)

    p = sub.add_parser("pcd-train", aliases=["train-pcd"], help="train a standard RBM with persistent CD")
    _common(p)
    p.add_argument("--train")
    p.add_argument("--valid")
    p.add_argument("--hidden", type=int, default=8)
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--lr", type=_float_list, default=[1e-1, 3e-2, 1e-2, 3e-3])
    p.add_argument("--batch-size", type=int, default=500)
    p.add_argument("--chains", type=int, default=None, help="persistent chains (default: batch size)")
    p.add_argument("--gibbs-steps", type=int, default=1)
    p.add_argument("--eval-samples", type=int, default=1000)
    p.add_argument("--eval-burn-in", type=int, default=100)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train_pcd)

    p = sub.add_parser("eval", help="normalized cross-entropy of a checkpoint on random queries")
    _common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--data")
    p.add_argument("--backend", default="qtnn",
                   help="comma-separated subset of qtnn,pcd-bp,pcd-gibbs,oracle,uniform")
    p.add_argument("--query-seed", type=int, default=None, help="defaults to --seed")
    p.add_argument("--queries", default="bernoulli:0.5")
    p.add_argument("--layers", type=int, default=10)
    p.add_argument("--clamp", type=float, default=20.0)
    p.add_argument("--gibbs-samples", type=int, default=1000)
    p.add_argument("--gibbs-burn-in", type=int, default=100)
    p.add_argument("--dataset-name", default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("oracle", help="exact NCE by enumeration (V+H <= 24)")
    _common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--data")
    p.add_argument("--query-seed", type=int, default=None)
    p.add_argument("--queries", default="bernoulli:0.5")
    p.add_argument("--dataset-name", default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("gradcheck", help="compare analytic gradients with central differences")
    _common(p)
    p.add_argument("--visible", type=int, default=6)
    p.add_argument("--hidden", type=int, default=3)
    p.add_argument("--layers", type=int, default=3)
    p.add_argument("--temperatures", type=_float_list, default=[0.5, 1.0, 2.0])
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)
    return parser


# argument resolution ---------------------------------------------------------------

_NOT_RECORDED = {"func", "config", "verbose"}


def _subparser(parser, command):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise UsageError(f"unknown command {command!r}")


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("a command is required (see --help)")
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
        sub = _subparser(parser, args.command)
        known = {a.dest for a in sub._actions}
        defaults = {}
        for key, value in doc.items():
            dest = key.replace("-", "_")
            if dest == "command":
                continue
            if dest not in known or dest in _NOT_RECORDED:
                raise UsageError(f"config {path}: unknown key {key!r}")
            defaults[dest] = value
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    if args.seed is None:
        raise UsageError("--seed is mandatory")
    if args.threads < 1:
        raise UsageError("--threads must be >= 1")
    return args


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) in (None, ""):
            raise UsageError(f"--{name.replace('_', '-')} is required")


def _existing(path, what):
    if not Path(path).exists():
        raise FileNotFoundError(f"{what} not found: {path}")
    return path


def manifest(args) -> dict:
    doc = {"command": args.command}
    for key, value in sorted(vars(args).items()):
        if key not in _NOT_RECORDED and key != "command":
            doc[key] = value
    return doc


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str):
    path.write_text(text, encoding="utf-8")


def _write_manifest(args, out: Path):
    _write(out / "manifest.json", json.dumps(manifest(args), indent=2, sort_keys=True) + "\n")


# commands --------------------------------------------------------------------------

def cmd_synth(args) -> int:
    from .data_io import generate_synthetic, make_pl_failure_dataset, save_dataset, split_dataset
    from .model import save_checkpoint

    _require(args, "out")
    out = _outdir(args)
    if args.pl_failure:
        data = make_pl_failure_dataset(args.samples, args.seed)
        truth = None
    else:
        data, truth = generate_synthetic(args.visible, args.hidden, args.scale, args.samples, args.seed)
    parts = split_dataset(data, args.fractions, args.seed)
    save_dataset(data, out / "data.csv")
    for part in parts:
        save_dataset(part, out / f"{part.split}.csv")
    if truth is not None:
        save_checkpoint(truth, out / "truth.json")
    _write_manifest(args, out)
    print(f"wrote {data.n_samples} samples ({' / '.join(str(p.n_samples) for p in parts)}) to {out}")
    return EXIT_OK


def cmd_train_qt(args) -> int:
    from .data_io import load_dataset
    from .model import save_checkpoint
    from .queries import QueryDistribution
    from .training import TrainConfig, train_qt, train_qt_lr_search

    _require(args, "train", "valid", "out")
    train = load_dataset(_existing(args.train, "training data"))
    valid = load_dataset(_existing(args.valid, "validation data"))
    if not args.lr:
        raise UsageError("--lr needs at least one value")
    try:
        dist = QueryDistribution.parse(args.queries)
        config = TrainConfig(
            hidden_units=args.hidden, n_layers=args.layers, batch_size=args.batch_size,
            learning_rate=args.lr[0], max_epochs=args.max_epochs, patience=args.patience,
            seed=args.seed, clamp_l=args.clamp, threads=args.threads,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if len(args.lr) == 1:
        params, history = train_qt(train.data, valid.data, config, dist)
    else:
        params, history = train_qt_lr_search(train.data, valid.data, config, dist, grid=args.lr)
    out = _outdir(args)
    save_checkpoint(params, out / "checkpoint.json")
    _write(out / "history.csv", history.to_csv())
    _write_manifest(args, out)
    print(f"lr={history.learning_rate:g} best_epoch={history.best_epoch} "
          f"valid_nce={history.best_valid_nce:.6f} temperature={params.temperature:.6f}")
    return EXIT_OK


def cmd_train_pcd(args) -> int:
    from .baselines import PcdConfig, pcd_train_lr_search
    from .data_io import load_dataset
    from .model import save_checkpoint

    _require(args, "train", "valid", "out")
    train = load_dataset(_existing(args.train, "training data"))
    valid = load_dataset(_existing(args.valid, "validation data"))
    try:
        config = PcdConfig(
            hidden_units=args.hidden, epochs=args.epochs, learning_rate=args.lr[0], batch_size=args.batch_size,
            n_chains=args.chains, gibbs_steps_per_update=args.gibbs_steps, seed=args.seed,
            eval_samples=args.eval_samples, eval_burn_in=args.eval_burn_in,
        )
    except (ValueError, IndexError) as exc:
        raise UsageError(str(exc)) from exc
    std, history = pcd_train_lr_search(train.data, valid.data, config, grid=args.lr)
    out = _outdir(args)
    save_checkpoint(std, out / "checkpoint.json")
    lines = ["lr,valid_nce"] + [f"{lr!r},{score!r}" for lr, score in history.lr_scores.items()]
    _write(out / "history.csv", "\n".join(lines) + "\n")
    _write_manifest(args, out)
    print(f"lr={history.learning_rate:g} valid_nce={history.valid_nce:.6f}")
    return EXIT_OK


def _eval_inputs(args):
    from .data_io import load_dataset
    from .model import load_checkpoint
    from .queries import QueryDistribution, generate_query_set

    _require(args, "checkpoint", "data")
    params = load_checkpoint(_existing(args.checkpoint, "checkpoint"))
    data = load_dataset(_existing(args.data, "evaluation data"))
    if data.n_visible != params.n_visible:
        raise DataError(f"data has {data.n_visible} columns but the checkpoint has {params.n_visible} visible units")
    try:
        dist = QueryDistribution.parse(args.queries)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    seed = args.seed if args.query_seed is None else args.query_seed
    queries = generate_query_set(data.n_samples, data.n_visible, dist, seed)
    return params, data, queries, seed, args.dataset_name or data.name


def _emit_reports(args, reports) -> int:
    from .evaluation import format_report

    text = format_report(reports)
    sys.stdout.write(text)
    if args.out:
        out = _outdir(args)
        _write(out / "report.csv", text)
        _write_manifest(args, out)
    return EXIT_OK


def cmd_eval(args) -> int:
    from .evaluation import BACKENDS, compare, make_backend

    params, data, queries, qseed, name = _eval_inputs(args)
    kinds = [k.strip() for k in args.backend.split(",") if k.strip()]
    for kind in kinds:
        if kind not in BACKENDS:
            raise UsageError(f"unknown backend {kind!r}; choose from {', '.join(BACKENDS)}")
    backends = [
        make_backend(k, params, n_layers=args.layers, clamp_l=args.clamp, gibbs_samples=args.gibbs_samples,
                     gibbs_burn_in=args.gibbs_burn_in, seed=args.seed)
        for k in kinds
    ]
    reports = compare(backends, data.data, queries, dataset=name, query_seed=qseed, threads=args.threads)
    return _emit_reports(args, reports)


def cmd_oracle(args) -> int:
    from .evaluation import nce
    from .oracle import ExactBackend

    params, data, queries, qseed, name = _eval_inputs(args)
    report = nce(ExactBackend(params), data.data, queries, dataset=name, query_seed=qseed, threads=args.threads)
    return _emit_reports(args, [report])


def cmd_gradcheck(args) -> int:
    from .grad import finite_diff_check
    from .model import RbmParamsQT
    from .queries import QueryDistribution, sample_queries

    worst = 0.0
    ok = True
    for i in range(args.instances):
        for t in args.temperatures:
            rng = np.random.default_rng(np.random.SeedSequence([args.seed, i]))
            params = RbmParamsQT(
                rng.uniform(-1, 1, (args.hidden, args.visible)),
                rng.uniform(-1, 1, args.visible),
                rng.uniform(-1, 1, args.hidden),
                float(np.log(t)),
            )
            v = rng.integers(0, 2, (args.batch, args.visible))
            q = sample_queries(args.batch, args.visible, QueryDistribution(), rng)
            report = finite_diff_check(params, v, q, args.layers, step=args.step, tolerance=args.tol)
            log.info("instance %d T=%g %s", i, t, report.summary())
            worst = max(worst, report.max_rel_error)
            ok &= report.passed
    status = "PASS" if ok else "FAIL"
    print(f"max_rel_error={worst:.3e} tol={args.tol:.0e} {status}")
    return EXIT_OK if ok else EXIT_NUMERIC


# entry point -----------------------------------------------------------------------

def _fail(code: int, exc: BaseException) -> int:
    msg = str(exc).replace("\n", " ").replace('"', "'")
    print(f'querytrain: error code={code} kind={type(exc).__name__} msg="{msg}"', file=sys.stderr)
    return code


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        from threadpoolctl import threadpool_limits

        # single-threaded BLAS keeps matrix products bit-reproducible
        with threadpool_limits(limits=1):
            return args.func(args)
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc)
    except (FileNotFoundError, DataError, CheckpointError, OracleSizeError, DimensionError, DomainError) as exc:
        return _fail(EXIT_DATA, exc)
    except NumericalError as exc:
        return _fail(EXIT_NUMERIC, exc)


if __name__ == "__main__":
    sys.exit(main())
