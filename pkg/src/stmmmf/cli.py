"""Command-line surface tying the pipeline together.

Subcommands: ingest, split, selftrain, evaluate, gridsearch,
baseline-rounds.  The STMMMF_OUT_DIR environment variable supplies the
default output directory.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baseline import BaselineConfig, rounds_experiment, strip_overlap
from .evaluation import confusion, hr_table, snapshot, split
from .ingest import (
    ParseError,
    load_matrix,
    parse_ml100k,
    parse_ml1m,
    preprocess,
    save_matrix,
)
from .selftrain import REPORT_CSV_COLUMNS, SelfTrainConfig, selftrain_loop
from .trainer import load_checkpoint, predict_ratings, save_checkpoint

DEFAULT_LAMBDA_GRID = [10 ** (i / 16) for i in range(1, 41, 4)]
DEFAULT_TAU1_GRID = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 49.99]
DEFAULT_S_GRID = [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0]


@dataclass(frozen=True)
class RunConfig:
    """A full self-training run: loop settings plus dataset plumbing."""

    selftrain: SelfTrainConfig
    dataset: str
    flavor: str
    out_dir: str
    split_frac: float = 0.8
    runs: int = 1
    deterministic: bool = True

    def __post_init__(self):
        if self.flavor not in ("ml100k", "ml1m", "stmat"):
            raise ValueError(f"unknown dataset flavor {self.flavor!r}")
        if not self.dataset or not self.out_dir:
            raise ValueError("dataset and output paths must be non-empty")
        if not 0.0 < self.split_frac < 1.0:
            raise ValueError("split fraction must lie in (0, 1)")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")


def _default_out_dir() -> str:
    return os.environ.get("STMMMF_OUT_DIR", ".")


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def cmd_ingest(args) -> int:
    parse = {"ml100k": parse_ml100k, "ml1m": parse_ml1m}[args.flavor]
    if not os.path.exists(args.input):
        return _fail(f"input file not found: {args.input}")
    try:
        raw = parse(args.input)
        result = preprocess(raw, min_ratings=args.min_ratings)
    except ParseError as exc:
        return _fail(str(exc))
    y = result.matrix
    save_matrix(y, args.out)
    print(f"{y.n_users} {y.n_items} {y.max_rating} {y.n_observed}")
    print(f"sparsity {1.0 - y.n_observed / (y.n_users * y.n_items):.4f}")
    if result.n_duplicates:
        print(f"dropped {result.n_duplicates} duplicate pairs", file=sys.stderr)
    return 0


def cmd_split(args) -> int:
    if not os.path.exists(args.input):
        return _fail(f"input file not found: {args.input}")
    try:
        y = load_matrix(args.input)
    except ValueError as exc:
        return _fail(str(exc))
    train, test = split(y, args.frac, args.seed)
    save_matrix(train, args.train_out)
    save_matrix(test, args.test_out)
    print(f"train {train.n_observed}")
    print(f"test {test.n_observed}")
    return 0


def _selftrain_config(args, parser) -> SelfTrainConfig:
    try:
        return SelfTrainConfig(
            n_factors=args.dim,
            reg=args.reg,
            lr=args.lr,
            gd_iters=args.gd_iters,
            tol=args.tol,
            seed=args.seed,
            tau_augment=args.tau1 / 100.0,
            tau_refine=args.tau2 / 100.0,
            sample_pct=args.sample_pct,
            cap=args.cap,
            max_rounds=args.iters,
            patience=args.patience,
        )
    except ValueError as exc:
        parser.error(str(exc))


def cmd_selftrain(args, parser) -> int:
    cfg = _selftrain_config(args, parser)
    try:
        run = RunConfig(
            selftrain=cfg, dataset=str(args.input), flavor="stmat",
            out_dir=str(args.out_dir), deterministic=args.deterministic,
        )
    except ValueError as exc:
        parser.error(str(exc))
    if not os.path.exists(run.dataset):
        return _fail(f"input file not found: {run.dataset}")
    y = load_matrix(run.dataset)
    test = load_matrix(args.test) if args.test else None
    out_dir = Path(run.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    print(
        f"tau_augment={cfg.tau_augment:.6g} tau_refine={cfg.tau_refine:.6g} "
        f"sample_pct={cfg.sample_pct:g} cap={cfg.cap} rounds={cfg.max_rounds} "
        f"seed={cfg.seed} deterministic={args.deterministic}"
    )
    snap_dir = out_dir / "snapshots"
    if args.snapshot_every > 0:
        snap_dir.mkdir(exist_ok=True)
        save_matrix(y, snap_dir / "round_000.stmat")
    jsonl = open(out_dir / "reports.jsonl", "w")
    csv = open(out_dir / "reports.csv", "w", newline="")
    csv.write(",".join(REPORT_CSV_COLUMNS) + "\n")

    def on_round(report, model, y_in, y_out):
        jsonl.write(report.to_json() + "\n")
        jsonl.flush()
        csv.write(",".join(report.to_csv_row()) + "\n")
        csv.flush()
        if args.snapshot_every > 0 and report.iteration % args.snapshot_every == 0:
            save_matrix(y_out, snap_dir / f"round_{report.iteration:03d}.stmat")

    try:
        result = selftrain_loop(y, cfg, test, callback=on_round)
    finally:
        jsonl.close()
        csv.close()
    if result.model is not None:
        save_checkpoint(result.model, out_dir / "model.stmmmf")
    print(f"stopped after {len(result.reports)} rounds ({result.stop_reason})")
    if result.stop_reason == "diverged":
        return _fail("inner solver diverged; partial reports kept")
    return 0


def cmd_evaluate(args) -> int:
    try:
        model = load_checkpoint(args.checkpoint)
        test = load_matrix(args.test)
    except (OSError, ValueError) as exc:
        return _fail(str(exc))
    if model.n_users != test.n_users or model.n_items != test.n_items:
        return _fail("checkpoint and matrix dimensions differ")
    if model.max_rating != test.max_rating:
        return _fail("checkpoint and matrix rating scales differ")
    train = load_matrix(args.train) if args.train else None
    preds = predict_ratings(model, test.users, test.items, trained_on=train)
    pairs = np.column_stack([test.ratings, preds])
    metrics = snapshot(pairs)
    print(f"MAE {metrics.mae:.4f}")
    print(f"RMSE {metrics.rmse:.4f}")
    cm = confusion(pairs.astype(np.int64), test.max_rating)
    print("confusion (rows: actual, columns: predicted 1..R)")
    for actual in range(1, test.max_rating + 1):
        row = " ".join(str(v) for v in cm.counts[actual - 1])
        print(f"actual {actual}: {row}")
    print("HR@K (columns: K = 0..R-1, * where not applicable)")
    for actual, row in enumerate(hr_table(cm), start=1):
        cells = " ".join("*" if v is None else f"{v:.4f}" for v in row)
        print(f"actual {actual}: {cells}")
    return 0


def _parse_grid(text, fallback):
    if text is None:
        return list(fallback)
    return [float(v) for v in text.split(",") if v.strip()]


def _grid_cell(payload):
    (y, lam, tau1, s, args_dict) = payload
    maes, rmses = [], []
    for run in range(args_dict["runs"]):
        seed = args_dict["seed"] + run
        inner_train, holdout = split(y, 1.0 - args_dict["val_frac"], seed)
        if holdout.n_observed == 0:
            raise ValueError("validation carve-out is empty; matrix too small for val-frac")
        cfg = SelfTrainConfig(
            n_factors=args_dict["dim"],
            reg=lam,
            lr=args_dict["lr"],
            gd_iters=args_dict["gd_iters"],
            tol=args_dict["tol"],
            seed=seed,
            tau_augment=tau1 / 100.0,
            tau_refine=args_dict["tau2"] / 100.0,
            sample_pct=s,
            cap=args_dict["cap"],
            max_rounds=args_dict["iters"],
        )
        result = selftrain_loop(inner_train, cfg, holdout)
        last = result.reports[-1]
        maes.append(last.test_mae)
        rmses.append(last.test_rmse)
    return float(np.mean(maes)), float(np.mean(rmses))


def cmd_gridsearch(args, parser) -> int:
    if args.tau2 >= 50.0:
        parser.error("tau2 must be below 50 (percent of the average gap)")
    if not 0.0 < args.val_frac < 1.0:
        parser.error("val-frac must lie in (0, 1)")
    if not os.path.exists(args.input):
        return _fail(f"input file not found: {args.input}")
    y = load_matrix(args.input)
    lambdas = _parse_grid(args.lambda_grid, DEFAULT_LAMBDA_GRID)
    tau1s = _parse_grid(args.tau1_grid, DEFAULT_TAU1_GRID)
    ss = _parse_grid(args.s_grid, DEFAULT_S_GRID)
    cells = [(lam, tau1, s) for lam in lambdas for tau1 in tau1s for s in ss]
    args_dict = {
        "runs": args.runs, "seed": args.seed, "val_frac": args.val_frac,
        "dim": args.dim, "lr": args.lr, "gd_iters": args.gd_iters,
        "tol": args.tol, "tau2": args.tau2, "cap": args.cap, "iters": args.iters,
    }
    payloads = [(y, lam, tau1, s, args_dict) for (lam, tau1, s) in cells]
    out = open(args.out, "w", newline="")
    out.write("lambda,tau1,s,mae,rmse\n")
    best = None
    try:
        if args.workers > 1:
            with ProcessPoolExecutor(max_workers=args.workers) as pool:
                results = pool.map(_grid_cell, payloads)
                for (lam, tau1, s), (mae_v, rmse_v) in zip(cells, results):
                    out.write(f"{lam:.6g},{tau1:g},{s:g},{mae_v:.6f},{rmse_v:.6f}\n")
                    out.flush()
                    if best is None or mae_v < best[3]:
                        best = (lam, tau1, s, mae_v, rmse_v)
        else:
            for payload, (lam, tau1, s) in zip(payloads, cells):
                mae_v, rmse_v = _grid_cell(payload)
                out.write(f"{lam:.6g},{tau1:g},{s:g},{mae_v:.6f},{rmse_v:.6f}\n")
                out.flush()
                if best is None or mae_v < best[3]:
                    best = (lam, tau1, s, mae_v, rmse_v)
    except Exception as exc:  # keep the partial CSV
        out.close()
        return _fail(f"grid search aborted: {exc}; partial CSV kept at {args.out}")
    out.close()
    lam, tau1, s, mae_v, rmse_v = best
    print(f"best lambda={lam:.6g} tau1={tau1:g} s={s:g} mae={mae_v:.6f} rmse={rmse_v:.6f}")
    return 0


def cmd_baseline_rounds(args) -> int:
    snap_dir = Path(args.snapshots)
    files = sorted(snap_dir.glob("round_*.stmat"))
    if not files:
        return _fail(
            f"no round_*.stmat snapshots in {snap_dir}; "
            "run `stmmmf selftrain --snapshot-every 1` first"
        )
    try:
        test = load_matrix(args.test)
        matrices = [strip_overlap(load_matrix(f), test) for f in files]
    except (OSError, ValueError) as exc:
        return _fail(str(exc))
    cfg = BaselineConfig(
        n_factors=args.dim, reg=args.reg, epochs=args.epochs,
        lr=args.lr, seed=args.seed,
    )
    snapshots = rounds_experiment(matrices, test, cfg)
    with open(args.out, "w", newline="") as out:
        out.write("round,mae,rmse\n")
        for path, metrics in zip(files, snapshots):
            round_no = int(path.stem.split("_")[1])
            out.write(f"{round_no},{metrics.mae:.6f},{metrics.rmse:.6f}\n")
    for path, metrics in zip(files, snapshots):
        round_no = int(path.stem.split("_")[1])
        print(f"round {round_no}: mae {metrics.mae:.6f} rmse {metrics.rmse:.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stmmmf",
        description="Margin factorization with self-training augmentation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a rating file into an STMAT matrix")
    p.add_argument("input")
    p.add_argument("--flavor", choices=["ml100k", "ml1m"], default="ml100k")
    p.add_argument("--out", required=True)
    p.add_argument("--min-ratings", type=int, default=20)
    p.set_defaults(func=lambda a: cmd_ingest(a))

    p = sub.add_parser("split", help="seeded train/test partition of a matrix")
    p.add_argument("input")
    p.add_argument("--frac", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-out", default=None)
    p.add_argument("--test-out", default=None)
    p.set_defaults(func=lambda a: cmd_split(a))

    p = sub.add_parser("selftrain", help="run the augment-and-refine loop")
    p.add_argument("input")
    p.add_argument("--test", default=None)
    p.add_argument("--dim", type=int, default=10)
    p.add_argument("--lambda", dest="reg", type=float, default=15.0)
    p.add_argument("--lr", type=float, default=0.002)
    p.add_argument("--gd-iters", type=int, default=150)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--tau1", type=float, default=49.99,
                   help="augmentation band shift, percent of the average gap")
    p.add_argument("--tau2", type=float, default=10.0,
                   help="refinement band half-width, percent of the average gap")
    p.add_argument("--sample-pct", type=float, default=100.0)
    p.add_argument("--cap", type=int, default=5000)
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--out-dir", default=_default_out_dir())
    p.add_argument("--snapshot-every", type=int, default=0)
    p.add_argument("--deterministic", action="store_true",
                   help="sequential reductions (this implementation always is)")
    p.set_defaults(needs_parser=True, func=cmd_selftrain)

    p = sub.add_parser("evaluate", help="score a checkpoint against a matrix")
    p.add_argument("checkpoint")
    p.add_argument("--test", required=True)
    p.add_argument("--train", default=None,
                   help="training matrix for the cold-user fallback")
    p.set_defaults(func=lambda a: cmd_evaluate(a))

    p = sub.add_parser("gridsearch", help="sweep lambda, tau1, and sample percent")
    p.add_argument("input")
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--val-frac", type=float, default=0.1)
    p.add_argument("--dim", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.002)
    p.add_argument("--gd-iters", type=int, default=150)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--tau2", type=float, default=10.0)
    p.add_argument("--cap", type=int, default=5000)
    p.add_argument("--iters", type=int, default=3)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--lambda-grid", default=None,
                   help="comma-separated values overriding the default grid")
    p.add_argument("--tau1-grid", default=None)
    p.add_argument("--s-grid", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(needs_parser=True, func=cmd_gridsearch)

    p = sub.add_parser("baseline-rounds",
                       help="retrain the biased-MF baseline on saved snapshots")
    p.add_argument("snapshots", help="directory of round_*.stmat files")
    p.add_argument("--test", required=True)
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--reg", type=float, default=0.02)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=0.005)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=lambda a: cmd_baseline_rounds(a))

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "split":
        if not 0.0 < args.frac < 1.0:
            parser.error("--frac must lie strictly between 0 and 1")
        base = Path(_default_out_dir())
        args.train_out = args.train_out or str(base / "train.stmat")
        args.test_out = args.test_out or str(base / "test.stmat")
    if args.command == "gridsearch" and args.out is None:
        args.out = str(Path(_default_out_dir()) / "gridsearch.csv")
    if args.command == "baseline-rounds" and args.out is None:
        args.out = str(Path(_default_out_dir()) / "baseline_rounds.csv")
    if getattr(args, "needs_parser", False):
        return args.func(args, parser)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
