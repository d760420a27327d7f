"""Command-line entry point for the verification suites and the toy experiments.

Commands
--------
- ``verify geometry`` / ``verify signal [--wav FILE]``: invariant suites.
- ``gradcheck``: finite-difference check of the network gradients.
- ``train``: fit one model on a task and write loss curve + checkpoint.
- ``sample``: load a checkpoint and integrate it from fresh noise.
- ``compare``: train both modes over seeds, score at several step budgets.
- ``ablate-vcs``: the {mode} x {calibration} ablation table.

Option values resolve as: command-line flag > config file > built-in default.
Config files are plain ``key = value`` lines ('#' starts a comment); keys are
the long option names without the leading dashes, e.g. ``epochs = 500``.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import bench, flow, net, spectral, tasks, verify
from .estimator import FlowMatchingSampler
from .report import write_key_values, write_loss_csv, write_rows_csv
from .sampler import trajectory_to_csv

__all__ = ["main", "parse_config_file"]


def parse_config_file(path) -> dict[str, str]:
    """Read ``key = value`` lines; '#' comments and blank lines are skipped."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


class _Resolver:
    """Applies the flag > config file > default precedence."""

    def __init__(self, args: argparse.Namespace):
        self.args = vars(args)
        config_path = self.args.get("config")
        self.file_values = parse_config_file(config_path) if config_path else {}

    def get(self, key: str, default, cast=str):
        flag_value = self.args.get(key.replace("-", "_"))
        if flag_value is not None:
            return flag_value
        if key in self.file_values:
            raw = self.file_values[key]
            if cast is bool:
                return raw.lower() in ("1", "true", "yes", "on")
            return cast(raw)
        return default


def _add_config_flag(parser) -> None:
    parser.add_argument("--config", metavar="FILE",
                        help="key = value config file (flags take precedence)")


def _add_train_flags(parser, require_mode: bool) -> None:
    parser.add_argument("--mode", choices=["lp", "ot"], required=require_mode)
    parser.add_argument("--lambda", dest="sigma", type=float, metavar="F",
                        help="target width: orthogonal (lp) or isotropic (ot); "
                             "defaults to the task's value")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--batches-per-epoch", type=int)
    parser.add_argument("--learning-rate", type=float)
    parser.add_argument("--lr-decay", type=float)
    parser.add_argument("--optimizer", choices=["adam", "sgd"])
    parser.add_argument("--hidden-width", type=int)
    parser.add_argument("--hidden-depth", type=int)
    parser.add_argument("--time-embedding", type=int)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linecfm",
        description="Line-targeted flow matching: verification suites and toy experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="run an invariant suite")
    p_verify.add_argument("suite", choices=["geometry", "signal"])
    p_verify.add_argument("--wav", metavar="FILE", help="16-bit PCM mono WAV to check")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--cases", type=int, default=1000)

    p_grad = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p_grad.add_argument("--models", type=int, default=20)
    p_grad.add_argument("--seed", type=int, default=0)

    p_train = sub.add_parser("train", help="train one model on a toy task")
    p_train.add_argument("--task", choices=list(tasks.TASK_NAMES))
    _add_train_flags(p_train, require_mode=True)
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--out", required=True, metavar="DIR")
    _add_config_flag(p_train)

    p_sample = sub.add_parser("sample", help="sample from a trained checkpoint")
    p_sample.add_argument("--checkpoint", required=True, metavar="FILE")
    p_sample.add_argument("--task", choices=list(tasks.TASK_NAMES))
    p_sample.add_argument("--steps", type=int)
    p_sample.add_argument("--vcs", action="store_true", default=None)
    p_sample.add_argument("--n", type=int)
    p_sample.add_argument("--seed", type=int)
    p_sample.add_argument("--out", required=True, metavar="DIR")
    _add_config_flag(p_sample)

    p_compare = sub.add_parser("compare", help="lp vs ot across seeds and budgets")
    p_compare.add_argument("--task", choices=list(tasks.TASK_NAMES))
    p_compare.add_argument("--seeds", metavar="S1,S2,...")
    p_compare.add_argument("--budgets", metavar="N1,N2,...")
    p_compare.add_argument("--n-eval", type=int)
    _add_train_flags(p_compare, require_mode=False)
    p_compare.add_argument("--out", required=True, metavar="DIR")
    _add_config_flag(p_compare)

    p_ablate = sub.add_parser("ablate-vcs", help="{mode} x {calibration} table")
    p_ablate.add_argument("--task", choices=list(tasks.TASK_NAMES))
    p_ablate.add_argument("--steps", type=int)
    p_ablate.add_argument("--n-eval", type=int)
    p_ablate.add_argument("--seed", type=int)
    _add_train_flags(p_ablate, require_mode=False)
    p_ablate.add_argument("--out", required=True, metavar="DIR")
    _add_config_flag(p_ablate)
    return parser


def _cmd_verify(args) -> int:
    if args.suite == "geometry":
        results = verify.geometry_checks(seed=args.seed, cases=args.cases)
        results.append(verify.ot_reduction_check(seed=args.seed, cases=args.cases))
        results.extend(verify.moment_checks(seed=args.seed))
    else:
        signal = None
        label = "synthetic"
        if args.wav:
            signal, rate = spectral.read_wav(args.wav)
            label = f"{Path(args.wav).name}@{rate}Hz"
        results = verify.signal_checks(seed=args.seed, signal=signal, label=label)
    ok = verify.print_results(results)
    return 0 if ok else 1


def _cmd_gradcheck(args) -> int:
    ok = verify.print_results(verify.gradient_checks(seed=args.seed, n_models=args.models))
    return 0 if ok else 1


def _resolve_estimator(res: _Resolver, task: tasks.ToyTask, mode: str,
                       seed: int) -> FlowMatchingSampler:
    # defaults are the tuned toy-harness settings (see README); the library
    # level TrainConfig keeps the production training schedule instead
    return FlowMatchingSampler(
        mode=mode,
        sigma=res.get("lambda", task.default_sigma, float),
        hidden_width=res.get("hidden-width", 64, int),
        hidden_depth=res.get("hidden-depth", 2, int),
        time_embedding_width=res.get("time-embedding", 1, int),
        epochs=res.get("epochs", 500, int),
        batch_size=res.get("batch-size", 128, int),
        batches_per_epoch=res.get("batches-per-epoch", 16, int),
        learning_rate=res.get("learning-rate", 2e-3, float),
        lr_decay=res.get("lr-decay", 0.99, float),
        optimizer=res.get("optimizer", "adam", str),
        random_state=seed,
    )


def _cmd_train(args) -> int:
    res = _Resolver(args)
    task = tasks.get_task(res.get("task", "2d"))
    seed = res.get("seed", 0, int)
    est = _resolve_estimator(res, task, args.mode, seed)
    started = time.perf_counter()
    est.fit(task)
    elapsed = time.perf_counter() - started
    out = Path(res.get("out", args.out))
    out.mkdir(parents=True, exist_ok=True)
    write_loss_csv(est.report_, out / "loss.csv")
    net.save_checkpoint(est.model_, out / "model.ckpt")
    snapshot = dict(est.report_.config)
    snapshot["task"] = task.name
    snapshot.update({"hidden_width": est.hidden_width, "hidden_depth": est.hidden_depth,
                     "time_embedding_width": est.time_embedding_width})
    write_key_values(out / "config.txt", snapshot)
    print(f"trained {args.mode} on task {task.name}: "
          f"final loss {est.report_.final_loss:.6g} "
          f"({len(est.report_.loss_curve)} epochs, {elapsed:.1f}s)")
    print(f"wrote {out / 'loss.csv'}, {out / 'model.ckpt'}, {out / 'config.txt'}")
    return 0


def _cmd_sample(args) -> int:
    res = _Resolver(args)
    task = tasks.get_task(res.get("task", "2d"))
    model = net.load_checkpoint(args.checkpoint)
    if model.output_width != task.dim or model.cond_width != task.cond_dim:
        raise SystemExit(
            f"checkpoint widths (out={model.output_width}, cond={model.cond_width}) "
            f"do not match task {task.name!r} (dim={task.dim}, cond={task.cond_dim})"
        )
    steps = res.get("steps", 6, int)
    vcs = bool(res.get("vcs", False, bool))
    n_samples = res.get("n", 64, int)
    seed = res.get("seed", bench.DEFAULT_EVAL_SEED, int)
    run = bench.run_sampler(model, task, n_samples=n_samples, steps=steps,
                            seed=seed, vcs=vcs)
    metrics = bench.evaluate_run(run, task)
    out = Path(res.get("out", args.out))
    out.mkdir(parents=True, exist_ok=True)
    endpoint_fields = ["sample"] + [f"x{i}" for i in range(task.dim)]
    endpoint_rows = [
        {"sample": i, **{f"x{j}": float(v) for j, v in enumerate(point)}}
        for i, point in enumerate(run.endpoints)
    ]
    write_rows_csv(out / "endpoints.csv", endpoint_fields, endpoint_rows)
    trajectory_to_csv(run.trajectories, out / "trajectories.csv")
    write_rows_csv(out / "metrics.csv", sorted(metrics), [metrics])
    for key in sorted(metrics):
        print(f"{key} = {metrics[key]:.6g}")
    if run.degenerate_steps:
        print(f"calibration guard fired at steps {run.degenerate_steps}")
    print(f"wrote {out / 'endpoints.csv'}, {out / 'trajectories.csv'}, "
          f"{out / 'metrics.csv'}")
    return 0


def _parse_int_list(text: str, what: str) -> list[int]:
    try:
        return [int(piece) for piece in text.split(",") if piece.strip()]
    except ValueError:
        raise SystemExit(f"could not parse {what} list {text!r}") from None


def _cmd_compare(args) -> int:
    res = _Resolver(args)
    task = tasks.get_task(res.get("task", "2d"))
    seeds = _parse_int_list(res.get("seeds", "0,1,2"), "seeds")
    budgets = _parse_int_list(res.get("budgets", "1,2,6"), "budgets")
    base = _resolve_estimator(res, task, "lp", seeds[0])
    cfg_lp = base.train_config(task)
    cfg_ot = replace(cfg_lp, mode="ot")
    out = Path(res.get("out", args.out))
    rows = bench.compare(
        task, seeds, cfg_lp, cfg_ot, budgets,
        n_eval=res.get("n-eval", 4096, int), out_dir=out, verbose=True,
    )
    for row in rows:
        print(f"mode={row['mode']} seed={row['seed']} budget={row['budget']}: "
              f"distance {row['mean_distance']:.6g} [{row['status']}]")
    print(f"wrote {out / 'compare.csv'}, {out / 'compare_distance.svg'}")
    return 0


def _cmd_ablate(args) -> int:
    res = _Resolver(args)
    task = tasks.get_task(res.get("task", "2d"))
    base = _resolve_estimator(res, task, "lp", res.get("seed", 0, int))
    cfg = base.train_config(task)
    out = Path(res.get("out", args.out))
    rows = bench.vcs_ablation(
        task, cfg, steps=res.get("steps", 6, int),
        n_eval=res.get("n-eval", 4096, int), out_dir=out,
    )
    for row in rows:
        print(f"mode={row['mode']} vcs={'on' if row['vcs'] else 'off'}: "
              f"distance {row['mean_distance']:.6g} [{row['status']}]")
    print(f"wrote {out / 'vcs_ablation.csv'}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "verify": _cmd_verify,
        "gradcheck": _cmd_gradcheck,
        "train": _cmd_train,
        "sample": _cmd_sample,
        "compare": _cmd_compare,
        "ablate-vcs": _cmd_ablate,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
