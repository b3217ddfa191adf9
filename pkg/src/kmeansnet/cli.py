"""Command-line interface.

Reports go to stdout as JSON; ``--pretty`` adds a readable table on stderr.
Exit codes: 0 success, 1 an asserted diagnostic failed, 2 usage or input
error, 3 numeric failure during training, 4 exhaustive-search capacity
exceeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time

import numpy as np

from . import diagnostics
from .baseline import lloyd
from .core import loss
from .data import concat, load_csv, load_idx, make_blobs, normalize_l2
from .errors import CapacityError, TrainingError
from .init import InitMethod, initialize
from .metrics import clustering_report
from .modelio import load_model, save_model
from .optim import OptimizerConfig, TrainConfig, predict, train

EXIT_ASSERT, EXIT_USAGE, EXIT_NUMERIC, EXIT_CAPACITY = 1, 2, 3, 4

OPTIMIZERS = {
    "sgd": "sgd_fixed_step",
    "sgd-length": "sgd_fixed_length",
    "adadelta": "adadelta",
    "adagrad": "adagrad",
    "adam": "adam",
    "rmsprop": "rmsprop",
}
ALPHA_GRID = [m * 10.0**p for p in range(-5, 1) for m in (1, 5)]


class UsageError(Exception):
    pass


def _positive(name):
    def parse(text):
        try:
            value = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
        if not value > 0 or value == float("inf"):
            raise argparse.ArgumentTypeError(f"{name} must satisfy {name} > 0, got {value}")
        return value
    parse.__name__ = name
    return parse


alpha_type, eta_type, h_type = _positive("alpha"), _positive("eta"), _positive("h")


def positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def parse_blobs(spec: str, default_seed: int) -> dict:
    """``k=3,n=600,d=2[,sep=10][,sigma=0.5][,seed=7]``; n is the total sample count."""
    fields = {"k": 3, "n": 600, "d": 2, "sep": 10.0, "sigma": None, "seed": default_seed}
    for part in filter(None, spec.split(",")):
        key, _, value = part.partition("=")
        key = key.strip()
        if key not in fields:
            raise UsageError(f"--blobs: unknown key {key!r}")
        try:
            fields[key] = float(value) if key in ("sep", "sigma") else int(value)
        except ValueError:
            raise UsageError(f"--blobs: bad value for {key}: {value!r}") from None
    if fields["sigma"] is None:
        fields["sigma"] = fields["sep"] / 20
    if fields["k"] < 2 or fields["n"] < fields["k"]:
        raise UsageError("--blobs: need k >= 2 and n >= k")
    return fields


def _add_data_flags(p):
    g = p.add_argument_group("data")
    g.add_argument("--data", help="CSV file")
    g.add_argument("--labels-last", action="store_true", help="CSV last column holds labels")
    g.add_argument("--delimiter", default=",")
    g.add_argument("--idx-images", action="append", default=[], help="IDX image file (repeatable)")
    g.add_argument("--idx-labels", action="append", default=[], help="IDX label file (repeatable)")
    g.add_argument("--blobs", help="synthetic blobs, e.g. k=3,n=600,d=2")
    g.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True,
                   help="scale rows to unit l2 norm (default on)")


def _add_train_flags(p):
    g = p.add_argument_group("training")
    g.add_argument("--k", type=positive_int)
    g.add_argument("--alpha", type=alpha_type, default=1e-3)
    g.add_argument("--alpha-grid", action="store_true",
                   help="sweep alpha over {1,5} x 10^p, p = -5..0, keep the most accurate")
    g.add_argument("--init", choices=[m.value for m in InitMethod], default="kmeans++")
    g.add_argument("--opt", choices=list(OPTIMIZERS), default="adadelta")
    g.add_argument("--eta", type=eta_type)
    g.add_argument("--batch", type=positive_int, default=256)
    g.add_argument("--epochs", type=positive_int, default=3000)
    g.add_argument("--tol", type=float, default=1e-3)
    g.add_argument("--project", action=argparse.BooleanOptionalAction, default=True)
    g.add_argument("--tie-bias", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kmeansnet", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--pretty", action="store_true", help="human-readable table on stderr")
    common.add_argument("--report", help="also write the JSON report to this file")

    p = sub.add_parser("train", parents=[common], help="train a model")
    _add_data_flags(p)
    _add_train_flags(p)
    p.add_argument("--model-out", default="model.kmnt")

    p = sub.add_parser("compare", parents=[common],
                       help="k-means vs. the network under each initializer")
    _add_data_flags(p)
    _add_train_flags(p)

    p = sub.add_parser("predict", parents=[common], help="label data with a saved model")
    _add_data_flags(p)
    p.add_argument("--model", required=True)

    p = sub.add_parser("diagnose", parents=[common], help="gradient, Lipschitz and convergence checks")
    p.add_argument("--gradcheck", action="store_true")
    p.add_argument("--lipschitz", action="store_true")
    p.add_argument("--trials", type=positive_int)
    p.add_argument("--h", type=h_type, default=1e-5)
    p.add_argument("--curve", nargs=3, metavar=("ZMIN", "ZMAX", "SAMPLES"))
    p.add_argument("--theorem2", action="store_true")
    p.add_argument("--blobs", default="k=2,n=16,d=2")
    p.add_argument("--alpha", type=alpha_type, default=0.5)
    p.add_argument("--eta", type=eta_type, default=0.01)
    p.add_argument("--epochs", type=positive_int, default=500)
    return parser


def load_dataset(args):
    sources = sum(bool(s) for s in (args.data, args.idx_images, args.blobs))
    if sources != 1:
        raise UsageError("give exactly one of --data, --idx-images, --blobs")
    if args.blobs:
        b = parse_blobs(args.blobs, args.seed)
        ds = make_blobs(b["k"], b["n"] // b["k"], b["d"], b["sep"], b["sigma"], b["seed"])
    elif args.data:
        ds = load_csv(args.data, has_labels=args.labels_last, delimiter=args.delimiter)
    else:
        if args.idx_labels and len(args.idx_labels) != len(args.idx_images):
            raise UsageError("--idx-labels must be given once per --idx-images")
        labels = args.idx_labels or [None] * len(args.idx_images)
        ds = concat([load_idx(i, l) for i, l in zip(args.idx_images, labels)])
    if args.normalize:
        ds.features = normalize_l2(ds.features)
        ds.normalized = True
    return ds


def _resolve_k(args, ds) -> int:
    k = args.k or ds.n_classes
    if k is None:
        raise UsageError("--k is required for unlabeled data")
    if k < 2:
        raise UsageError("k must be >= 2")
    return k


def _configs(args):
    opt = OptimizerConfig(OPTIMIZERS[args.opt], eta=args.eta)
    cfg = TrainConfig(max_epochs=args.epochs, tol=args.tol, batch_size=args.batch,
                      seed=args.seed, project=args.project, tie_bias=args.tie_bias)
    return opt, cfg


def _dataset_summary(ds, k):
    return {"n": ds.n, "d": ds.d, "k": k, "source": ds.source, "normalized": ds.normalized,
            "labeled": ds.labels is not None}


def _fit(ds, k, init, opt, cfg, alpha):
    model, trace = train(ds.features, k, init, opt, cfg, alpha=alpha)
    labels = predict(model, ds.features)
    metrics = clustering_report(ds.labels, labels).as_dict() if ds.labels is not None else None
    return model, trace, labels, metrics


def cmd_train(args) -> int:
    ds = load_dataset(args)
    k = _resolve_k(args, ds)
    opt, cfg = _configs(args)
    start = time.perf_counter()

    grid = None
    if args.alpha_grid:
        if ds.labels is None:
            raise UsageError("--alpha-grid needs labeled data to pick alpha")
        grid, best = [], None
        for a in ALPHA_GRID:
            fit = _fit(ds, k, args.init, opt, cfg, a)
            grid.append({"alpha": a, "accuracy": fit[3]["accuracy"], "nmi": fit[3]["nmi"],
                         "ari": fit[3]["ari"]})
            if best is None or fit[3]["accuracy"] > best[1][3]["accuracy"]:
                best = (a, fit)
        alpha, (model, trace, _, metrics) = best
    else:
        alpha = args.alpha
        model, trace, _, metrics = _fit(ds, k, args.init, opt, cfg, alpha)

    save_model(args.model_out, model, normalized=ds.normalized)
    final = trace.loss_per_epoch[-1]
    report = {
        "command": "train",
        "config": {"alpha": alpha, "init": args.init, "opt": args.opt, "eta": opt.eta,
                   "batch": cfg.batch_size, "epochs": cfg.max_epochs, "tol": cfg.tol,
                   "project": cfg.project, "tie_bias": cfg.tie_bias, "normalize": args.normalize},
        "dataset": _dataset_summary(ds, k),
        "final_loss": final,
        "final_loss_mean": final / ds.n,
        "metrics": metrics,
        "trace": {"epochs": trace.epochs, "initial_loss": trace.initial_loss,
                  "best_loss": trace.best_loss, "best_epoch": trace.best_epoch,
                  "converged": trace.converged, "final_grad_norm": trace.grad_norm_per_epoch[-1]},
        "alpha_grid": grid,
        "model_file": str(args.model_out),
        "seed": args.seed,
        "wall_seconds": time.perf_counter() - start,
    }
    emit(report, args)
    if args.pretty:
        rows = [("epochs", trace.epochs), ("final loss", f"{final:.6g}"),
                ("loss / sample", f"{final / ds.n:.6g}")]
        if metrics:
            rows += [(m, f"{metrics[m]:.4f}") for m in
                     ("accuracy", "nmi", "ari", "ami", "homogeneity", "completeness", "v_measure")]
        print_table(["field", "value"], rows)
    return 0


def cmd_compare(args) -> int:
    ds = load_dataset(args)
    if ds.labels is None:
        raise UsageError("compare needs labeled data")
    k = _resolve_k(args, ds)
    opt, cfg = _configs(args)
    start = time.perf_counter()
    cells = []
    for init in InitMethod:
        omega = initialize(ds.features, k, init, args.seed)
        base = lloyd(ds.features, k, omega)
        rep = clustering_report(ds.labels, base.labels)
        cells.append({"method": "kmeans", "init": init.value, "accuracy": rep.accuracy,
                      "nmi": rep.nmi, "ari": rep.ari})
    for init in InitMethod:
        _, _, _, m = _fit(ds, k, init, opt, cfg, args.alpha)
        cells.append({"method": "kmeansnet", "init": init.value, "accuracy": m["accuracy"],
                      "nmi": m["nmi"], "ari": m["ari"]})
    report = {"command": "compare", "dataset": _dataset_summary(ds, k),
              "config": {"alpha": args.alpha, "opt": args.opt, "eta": opt.eta},
              "table": cells, "seed": args.seed, "wall_seconds": time.perf_counter() - start}
    emit(report, args)
    if args.pretty:
        print_table(["method", "init", "ACC", "NMI", "ARI"],
                    [(c["method"], c["init"], f"{100 * c['accuracy']:.2f}",
                      f"{100 * c['nmi']:.2f}", f"{100 * c['ari']:.2f}") for c in cells])
    return 0


def cmd_predict(args) -> int:
    model, normalized = load_model(args.model)
    args.normalize = normalized
    ds = load_dataset(args)
    labels = predict(model, ds.features)
    report = {"command": "predict", "dataset": _dataset_summary(ds, model.k),
              "labels": labels.tolist(),
              "loss": loss(model, ds.features).total,
              "metrics": clustering_report(ds.labels, labels).as_dict()
              if ds.labels is not None else None,
              "seed": args.seed}
    emit(report, args)
    return 0


def cmd_diagnose(args) -> int:
    if not (args.gradcheck or args.lipschitz or args.curve or args.theorem2):
        raise UsageError("choose at least one of --gradcheck, --lipschitz, --curve, --theorem2")
    report = {"command": "diagnose", "seed": args.seed}
    failed = False
    rows = []

    if args.gradcheck:
        trials = args.trials or 100
        errs = diagnostics.gradcheck_audit(trials, seed=args.seed, h=args.h)
        ok = bool(errs.max() < 1e-5)
        report["gradcheck"] = {"trials": trials, "h": args.h, "max_rel_error": float(errs.max()),
                               "threshold": 1e-5, "passed": ok}
        rows.append(("gradcheck", f"max rel err {errs.max():.3g}", "PASS" if ok else "FAIL"))
        failed |= not ok

    if args.lipschitz:
        trials = args.trials or 1000
        records = diagnostics.lipschitz_audit(trials, seed=args.seed)
        bad = sum(not r.holds for r in records)
        worst = max(r.observed / r.bound for r in records)
        report["lipschitz"] = {"trials": trials, "violations": bad,
                               "max_observed_over_bound": worst, "passed": bad == 0}
        rows.append(("lipschitz", f"{bad} violations, max ratio {worst:.3g}",
                     "PASS" if bad == 0 else "FAIL"))
        failed |= bad > 0

    if args.curve:
        try:
            z_min, z_max, samples = float(args.curve[0]), float(args.curve[1]), int(args.curve[2])
            curve = diagnostics.boundedness_curve(z_min, z_max, samples)
        except ValueError as exc:
            raise UsageError(f"--curve: {exc}") from None
        report["curve"] = curve.tolist()
        rows.append(("curve", f"{samples} points on [{z_min:g}, {z_max:g}]", "-"))

    if args.theorem2:
        b = parse_blobs(args.blobs, args.seed)
        ds = make_blobs(b["k"], b["n"] // b["k"], b["d"], b["sep"], b["sigma"], b["seed"])
        X = ds.features
        diagnostics_k = b["k"]
        if diagnostics_k ** len(X) > diagnostics.BRUTE_FORCE_LIMIT:
            raise CapacityError(f"blob instance too large for exhaustive search "
                                f"({diagnostics_k}**{len(X)} labelings)")
        opt = OptimizerConfig("sgd_fixed_step", eta=args.eta)
        cfg = TrainConfig(max_epochs=args.epochs, tol=0.0, batch_size=len(X), seed=args.seed)
        _, trace = train(X, diagnostics_k, "kmeans++", opt, cfg, alpha=args.alpha)
        check = diagnostics.theorem2_check(trace, X, diagnostics_k, args.eta)
        report["theorem2"] = {
            "holds": check.holds, "epsilon": check.epsilon, "optimal_loss": check.optimal_loss,
            "plateau_radius": check.plateau_radius, "violations": check.violations,
            "table": [{"T": int(t), "lhs": float(l), "rhs": float(r), "margin": float(r - l)}
                      for t, l, r in zip(check.T, check.lhs, check.rhs)],
        }
        rows.append(("theorem2", f"{len(check.T)} epochs, min margin {check.margins.min():.4g}",
                     "holds" if check.holds else "violated (reported)"))

    emit(report, args)
    if args.pretty:
        print_table(["check", "result", "status"], rows)
    return EXIT_ASSERT if failed else 0


def emit(report: dict, args) -> None:
    text = json.dumps(report, sort_keys=True, indent=2)
    print(text)
    if getattr(args, "report", None):
        with open(args.report, "w") as f:
            f.write(text + "\n")


def print_table(header, rows) -> None:
    rows = [tuple(str(c) for c in r) for r in rows]
    widths = [max(len(str(h)), *(len(r[i]) for r in rows)) for i, h in enumerate(header)]
    line = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths))
    print(line(header), file=sys.stderr)
    print(line(["-" * w for w in widths]), file=sys.stderr)
    for r in rows:
        print(line(r), file=sys.stderr)


COMMANDS = {"train": cmd_train, "compare": cmd_compare, "predict": cmd_predict,
            "diagnose": cmd_diagnose}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ValueError, OSError) as exc:
        if isinstance(exc, CapacityError):
            print(f"kmeansnet: {exc}", file=sys.stderr)
            return EXIT_CAPACITY
        print(f"kmeansnet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingError as exc:
        print(f"kmeansnet: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
