"""Train on PL-style queries (one output, rest observed) vs random Bernoulli queries,
then score both on predicting ``a`` from ``z`` alone with its near-copy ``b`` hidden.

    python3 scripts/pl_failure.py --seeds 0 1 2
"""
import argparse

import numpy as np

from querytrain.data_io import PL_COLUMNS, make_pl_failure_dataset, split_dataset
from querytrain.qtnn import infer
from querytrain.queries import QueryDistribution
from querytrain.training import TrainConfig, train_qt


def ce_a_given_z(params, data, n_layers):
    a, z = PL_COLUMNS["a"], PL_COLUMNS["z"]
    q = np.zeros_like(data)
    q[:, z] = 1
    p = infer(params, data.astype(float), q, n_layers).v_hat[:, a]
    y = data[:, a]
    return float(np.mean(-(y * np.log(p) + (1 - y) * np.log1p(-p))))


def optimal_ce(agreement=0.75):
    return float(-(agreement * np.log(agreement) + (1 - agreement) * np.log(1 - agreement)))


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--samples", type=int, default=6000)
    p.add_argument("--hidden", type=int, default=4)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=3e-2)
    args = p.parse_args()

    print(f"seed,ce_pl,ce_bernoulli  (optimum {optimal_ce():.4f} nats)")
    wins = 0
    for seed in args.seeds:
        ds = make_pl_failure_dataset(args.samples, seed=seed)
        train, valid, test = split_dataset(ds, (0.7, 0.15, 0.15), seed=seed)
        cfg = TrainConfig(hidden_units=args.hidden, learning_rate=args.lr, max_epochs=args.epochs,
                          patience=args.epochs, seed=seed)
        pl, _ = train_qt(train.data, valid.data, cfg, QueryDistribution("pl"))
        bern, _ = train_qt(train.data, valid.data, cfg, QueryDistribution())
        a, b = ce_a_given_z(pl, test.data, cfg.n_layers), ce_a_given_z(bern, test.data, cfg.n_layers)
        wins += b < a
        print(f"{seed},{a:.4f},{b:.4f}")
    print(f"bernoulli lower on {wins}/{len(args.seeds)} seeds")


if __name__ == "__main__":
    main()
