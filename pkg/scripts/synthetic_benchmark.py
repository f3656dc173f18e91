"""Desk-scale benchmark: QT-NN vs PCD (BP and Gibbs inference) vs the exact floor.

Data come from a random ground-truth RBM, so the Bayes-optimal NCE is known.

    python3 scripts/synthetic_benchmark.py --seed 1 --out runs/bench
"""
import argparse
import json
import logging
import time
from dataclasses import asdict
from pathlib import Path

from threadpoolctl import threadpool_limits

from querytrain.baselines import PCD_LR_GRID, GibbsBackend, PcdConfig, pcd_to_bp_backend, pcd_train_lr_search
from querytrain.data_io import generate_synthetic, split_dataset
from querytrain.evaluation import QTNNBackend, UniformBackend, compare, format_report
from querytrain.model import save_checkpoint
from querytrain.oracle import ExactBackend
from querytrain.queries import QueryDistribution, generate_query_set
from querytrain.training import LR_GRID, TrainConfig, train_qt_lr_search


def parse():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--visible", type=int, default=16)
    p.add_argument("--hidden", type=int, default=8)
    p.add_argument("--scale", type=float, default=1.5)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--qt-epochs", type=int, default=100)
    p.add_argument("--pcd-epochs", type=int, default=1000)
    p.add_argument("--quick", action="store_true", help="one learning rate each, 40 QT epochs")
    p.add_argument("--query-seed", type=int, default=123)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default="runs/bench")
    return p.parse_args()


def main():
    args = parse()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    ds, truth = generate_synthetic(args.visible, args.hidden, args.scale, args.samples, args.seed)
    train, valid, test = split_dataset(ds, (0.8, 0.1, 0.1), args.seed)
    queries = generate_query_set(test.n_samples, test.n_visible, QueryDistribution(), args.query_seed)

    qt_cfg = TrainConfig(hidden_units=args.hidden, max_epochs=40 if args.quick else args.qt_epochs,
                         seed=args.seed, threads=args.threads)
    pcd_cfg = PcdConfig(hidden_units=args.hidden, epochs=args.pcd_epochs, seed=args.seed)
    timings = {}
    with threadpool_limits(limits=1):
        t0 = time.perf_counter()
        qt, qt_hist = train_qt_lr_search(train.data, valid.data, qt_cfg, grid=(3e-2,) if args.quick else LR_GRID)
        timings["qt"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        std, pcd_hist = pcd_train_lr_search(train.data, valid.data, pcd_cfg,
                                            grid=(1e-1,) if args.quick else PCD_LR_GRID)
        timings["pcd"] = time.perf_counter() - t0

        backends = [
            QTNNBackend(qt, qt_cfg.n_layers),
            pcd_to_bp_backend(std),
            GibbsBackend(std, pcd_cfg.eval_samples, pcd_cfg.eval_burn_in, seed=args.seed),
            ExactBackend(truth),
            UniformBackend(),
        ]
        reports = compare(backends, test.data, queries, dataset="synthetic", query_seed=args.query_seed,
                          threads=args.threads)

    save_checkpoint(qt, out / "qt.json")
    save_checkpoint(std, out / "pcd.json")
    save_checkpoint(truth, out / "truth.json")
    (out / "qt_history.csv").write_text(qt_hist.to_csv(include_time=True))
    (out / "report.csv").write_text(format_report(reports))
    meta = {"args": vars(args), "qt_config": asdict(qt_cfg), "pcd_config": asdict(pcd_cfg),
            "qt_lr": qt_hist.learning_rate, "pcd_lr": pcd_hist.learning_rate,
            "pcd_lr_scores": {str(k): v for k, v in pcd_hist.lr_scores.items()}, "seconds": timings}
    (out / "run.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(format_report(reports), end="")


if __name__ == "__main__":
    main()
