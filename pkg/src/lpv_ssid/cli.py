"""Command-line entry point: ``lpv-ssid <subcommand> [flags]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Config files are flat JSON objects keyed by TrainConfig field names
(``lambda`` is accepted for ``lam``); explicit flags override them.
"""

import argparse
import csv
import json
import logging
import sys
from dataclasses import fields

import numpy as np

from . import checkpoint, checks, data, evaluation
from .numkernel import NoConvergence, SingularMatrix
from .schurparam import fit_to_target
from .train import DegenerateWindow, NonFiniteLoss, TrainConfig, WindowTooLong, fit, make_windows

logger = logging.getLogger("lpv_ssid")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(s):
    return tuple(float(x) for x in s.split(","))


def _ints(s):
    return tuple(int(x) for x in s.split(","))


# flag dest -> TrainConfig field
_TRAIN_FLAGS = {
    "order": "order_n", "L": "L", "stride": "stride", "batch": "batch_size", "lr": "learning_rate",
    "epochs": "epochs", "lam": "lam", "seed": "seed", "gamma": "gamma", "patience": "patience",
    "normalization": "normalization", "enc_hidden": "enc_hidden", "gen_hidden": "gen_hidden",
    "activation": "activation",
}


def _add_train_flags(p):
    p.add_argument("--data", required=True, help="CSV with header y1..ym,u1..ur")
    p.add_argument("--config", help="flat JSON config of TrainConfig fields")
    p.add_argument("--order", type=int)
    p.add_argument("--L", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--normalization", choices=("printed", "natural"))
    p.add_argument("--enc-hidden", dest="enc_hidden", type=_ints)
    p.add_argument("--gen-hidden", dest="gen_hidden", type=_ints)
    p.add_argument("--activation", choices=("sigmoid", "tanh", "relu"))
    p.add_argument("--split", type=_floats, default=(0.6, 0.2, 0.2), help="train,val,test fractions")


def config_from_args(args):
    """Defaults, then the config file, then explicit flags."""
    values = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise UsageError("config file must hold a flat JSON object")
        known = {f.name for f in fields(TrainConfig)}
        for k, v in raw.items():
            k = "lam" if k == "lambda" else k
            if k not in known:
                raise UsageError(f"unknown config key {k!r}")
            values[k] = tuple(v) if isinstance(v, list) else v
    for flag, name in _TRAIN_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[name] = v
    cfg = TrainConfig(**values)
    try:
        return cfg.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def load_splits(path, fractions, L):
    """Load, split chronologically, and z-score with training statistics."""
    raw = data.load_csv(path)
    parts = data.chrono_split(raw, fractions, min_len=L)
    norm = data.zscore_fit(parts[0])
    return dict(zip(evaluation.SPLITS, (norm.apply(p) for p in parts))), norm


def _write_train_report(path, report):
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, ["epoch", "train_loss", "val_rmse", "max_spectral_radius"],
                           lineterminator="\n")
        w.writeheader()
        for row in report.rows():
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def _train(args, kind):
    cfg = config_from_args(args)
    splits, norm = load_splits(args.data, args.split, cfg.L)
    init = None
    if kind == "baseline" and args.init:
        init = read_matrix(args.init)
        if init.shape != (cfg.order_n, cfg.order_n):
            raise data.DataError(f"init matrix has shape {init.shape}, expected n x n with n={cfg.order_n}")
    tr = splits["train"]
    model = evaluation.build_model(kind, cfg.order_n, tr.m, tr.r, cfg, init=init)
    windows = make_windows(tr.outputs, tr.inputs, cfg.L, cfg.stride)
    model, report = fit(model, windows, (splits["val"].outputs, splits["val"].inputs), cfg)
    checkpoint.save(args.out, model, norm, cfg, cfg.seed)
    report_path = args.report or args.out.rsplit(".", 1)[0] + "_report.csv"
    _write_train_report(report_path, report)
    ev, _ = evaluation.simulate_and_report(model, splits, seed=cfg.seed)
    print(f"windows: {len(windows)}  epochs run: {len(report.val_rmse)}  best epoch: {report.best_epoch}")
    print("rmse " + "  ".join(f"{k}={v:.6g}" for k, v in ev.rmse.items()))
    print(f"spectral radius range: [{ev.radius_min:.6g}, {ev.radius_max:.6g}] (gamma={cfg.gamma})")
    print(f"checkpoint: {args.out}\nreport: {report_path}")


def cmd_train(args):
    _train(args, "nnss")


def cmd_baseline_train(args):
    _train(args, "baseline")


def cmd_gen_data(args):
    u = None
    if args.input == "multisine":
        u = data.input_signal(args.steps, "multisine", seed=args.seed)
    series = data.synth_two_tank(args.steps, u=u, noise_std=args.noise, seed=args.seed)
    data.save_csv(series, args.out)
    print(f"wrote {series.K} rows to {args.out}")


def _load_model(path):
    model, norm, cfg, seed = checkpoint.load(path)
    if norm is None:
        raise data.DataError(f"{path} has no normalizer statistics")
    return model, norm, cfg, seed


def cmd_eval(args):
    model, norm, _, seed = _load_model(args.checkpoint)
    raw = data.load_csv(args.data)
    # simulation needs more than one step per split
    parts = data.chrono_split(raw, args.split, min_len=2)
    splits = dict(zip(evaluation.SPLITS, (norm.apply(p) for p in parts)))
    report, preds = evaluation.simulate_and_report(model, splits, norm, args.denormalize, seed=seed)
    if args.results:
        evaluation.write_results_csv(args.results, [report], evaluation.SPLITS, per_channel=True)
    y, yhat = preds[args.on]
    if args.predictions:
        evaluation.write_predictions_csv(args.predictions, y, yhat)
    if args.plot:
        evaluation.plot_predictions(args.plot, y, yhat, raw.sample_time, title=f"{args.on} split")
    units = "physical" if args.denormalize else "normalized"
    print(f"rmse ({units}) " + "  ".join(f"{k}={v:.6g}" for k, v in report.rmse.items()))
    print(f"spectral radius range: [{report.radius_min:.6g}, {report.radius_max:.6g}]")


def cmd_simulate(args):
    model, norm, _, _ = _load_model(args.checkpoint)
    raw = data.load_csv(args.data)
    s = norm.apply(raw)
    yhat, _ = evaluation.simulate_split(model, s, audit=False)
    yhat = norm.invert_outputs(yhat)
    evaluation.write_predictions_csv(args.out, raw.outputs, yhat)
    if args.plot:
        evaluation.plot_predictions(args.plot, raw.outputs, yhat, raw.sample_time)
    _, avg = evaluation.rmse(raw.outputs, yhat)
    print(f"simulated {raw.K} steps; rmse (physical units) {avg:.6g}; predictions: {args.out}")


def cmd_sweep(args):
    cfg = config_from_args(args)
    splits, _ = load_splits(args.data, args.split, cfg.L)
    reports = evaluation.sweep(args.orders, args.seeds, cfg, splits, kind=args.model)
    evaluation.write_results_csv(args.out, reports, evaluation.SPLITS if args.all_splits else ("test",),
                                 per_channel=args.all_splits)
    for rep in reports:
        status = rep.error or f"test rmse {rep.rmse['test']:.6g}"
        print(f"order {rep.order} seed {rep.seed}: {status}")
    print(f"results: {args.out}")


def cmd_grad_check(args):
    errs = checks.grad_check(args.samples, args.seed, args.model)
    print(f"configurations: {len(errs)}")
    print(f"max relative error: {max(errs):.3e}")
    return EXIT_OK if max(errs) < args.tol else EXIT_NUMERIC


def cmd_stability_check(args):
    ns = (args.n,) if args.n else (1, 2, 3, 4, 5, 6)
    gammas = (args.gamma,) if args.gamma else (0.5, 0.9, 1.0)
    res = checks.stability_check(args.samples, ns, gammas, seed=args.seed)
    print(f"samples: {res.samples}")
    print(f"violations: {res.violations}")
    print(f"singular: {res.singular}")
    print(f"max radius/gamma: {res.max_ratio:.12f}")
    return EXIT_OK if res.violations == 0 and res.singular == 0 else EXIT_NUMERIC


def read_matrix(path):
    try:
        M = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise data.DataError(f"{path}: {exc}") from None
    if M.shape[0] != M.shape[1] or not np.all(np.isfinite(M)):
        raise data.DataError(f"{path}: expected a finite square matrix, got shape {M.shape}")
    return M


def cmd_fit_init(args):
    import warnings

    A = read_matrix(args.matrix)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        f, res = fit_to_target(A, args.gamma, args.seed, max_iter=args.iters)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    rel = res / max(np.linalg.norm(A), 1e-300)
    print(f"residual: {res:.6e}\nrelative residual: {rel:.6e}")
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            json.dump({"W": f.W.tolist(), "V": f.V.tolist(), "eps_tilde": f.eps_tilde,
                       "gamma": f.gamma, "residual": res}, fh, indent=1)
            fh.write("\n")


def build_parser():
    p = _Parser(prog="lpv-ssid", description="Stable-by-design neural LPV state-space identification")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    s = sub.add_parser("gen-data", help="write a synthetic two-tank CSV")
    s.add_argument("--steps", type=int, default=4000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise", type=float, default=0.01)
    s.add_argument("--input", choices=("prbs", "multisine"), default="prbs")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_data)

    for name, func, help_ in (("train", cmd_train, "train an NN-SS model"),
                              ("baseline-train", cmd_baseline_train, "train the constant-matrix baseline")):
        s = sub.add_parser(name, help=help_)
        _add_train_flags(s)
        s.add_argument("--out", required=True, help="checkpoint path (.json)")
        s.add_argument("--report", help="TrainReport CSV path")
        if name == "baseline-train":
            s.add_argument("--init", help="CSV n x n matrix used to initialize A")
        s.set_defaults(func=func)

    s = sub.add_parser("eval", help="simulation-mode RMSE on train/val/test")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--split", type=_floats, default=(0.6, 0.2, 0.2))
    s.add_argument("--on", choices=evaluation.SPLITS, default="test")
    s.add_argument("--denormalize", action="store_true")
    s.add_argument("--results")
    s.add_argument("--predictions")
    s.add_argument("--plot")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("simulate", help="free-run a checkpoint over a whole CSV")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--plot")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", help="grid over model orders and seeds")
    _add_train_flags(s)
    s.add_argument("--orders", type=_ints, required=True)
    s.add_argument("--seeds", type=_ints, required=True)
    s.add_argument("--model", choices=("nnss", "baseline"), default="nnss")
    s.add_argument("--all-splits", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("grad-check", help="finite-difference gradient suite")
    s.add_argument("--samples", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--model", choices=("nnss", "baseline"), default="nnss")
    s.add_argument("--tol", type=float, default=1e-5)
    s.set_defaults(func=cmd_grad_check)

    s = sub.add_parser("stability-check", help="sample Schur factors and count violations")
    s.add_argument("--samples", type=int, default=10000)
    s.add_argument("--n", type=int)
    s.add_argument("--gamma", type=float)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_stability_check)

    s = sub.add_parser("fit-init", help="fit Schur factors to a target matrix")
    s.add_argument("--matrix", required=True)
    s.add_argument("--gamma", type=float, default=0.99)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--iters", type=int, default=5000)
    s.add_argument("--out")
    s.set_defaults(func=cmd_fit_init)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        code = args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (data.DataError, WindowTooLong, DegenerateWindow, FileNotFoundError,
            checkpoint.CheckpointError, json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NonFiniteLoss, SingularMatrix, NoConvergence, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK if code is None else code


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
