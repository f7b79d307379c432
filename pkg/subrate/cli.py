"""
Command line front end.

```
subrate gen -o synth.jsonl --n-blocks 2000 --seed 1
subrate fit synth.jsonl --model subblock -o model.json
subrate eval model.json synth.jsonl
subrate cv synth.jsonl --folds 5 --seed 7
```

Outputs are rendered in memory and written only when the whole command succeeded.
Exit codes are 0 on success, 1 on usage errors, 2 on data errors and 3 on numerical failures.
"""
from argparse import ArgumentParser, Namespace
from collections.abc import Sequence
import io
import logging
import os
from pathlib import Path
import sys
import tempfile
from typing import Optional

from .batch import RecordBatch, fit_model
from .config import EstimationConfiguration, GradientDescentSettings, default_config
from .dataset import read_dataset, write_dataset, write_features_csv
from .evaluation import ablate, compare, cross_qp_matrix, evaluate, kfold_cv, scatter_dump, select_qp
from .failures import RateFailure, UsageFailure
from .models import FeatureMask, ModelFile, ModelKind, dumps_model, load_model
from .report import FORMATS, render_ablation, render_comparison, render_cv, render_fit, render_metrics, scatter_csv
from .synth import SynthConfig, generate


__all__ = [
    "parse_args",
    "main",
]


logger = logging.getLogger(__name__)


class _Parser(ArgumentParser):
    """
    Reports usage errors as `UsageFailure` so they share the exit code path of other failures.
    """
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageFailure(message)


def _size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise UsageFailure(f"Block size must be written as WIDTHxHEIGHT, got '{text}'.")


def _common(parser: ArgumentParser) -> None:
    parser.add_argument(
        "--verbose", "-v", default=0, action="count",
        help="Log progress to the error stream. Repeat for debug output.",
    )
    parser.add_argument(
        "--output", "-o", default=None,
        help="File to write the result to. Defaults to the standard output.",
    )
    parser.add_argument(
        "--format", choices=FORMATS, default="table",
        help="Rendering of reports.",
    )
    parser.add_argument(
        "--seed", type=int, default=None,
        help="Seed of every random choice. Defaults to 0.",
    )
    parser.add_argument(
        "--timing", action="store_true",
        help="Report wall time per block. Without it the time column shows '-' and outputs are reproducible.",
    )


def _model_options(parser: ArgumentParser, multiple: bool = False) -> None:
    if multiple:
        parser.add_argument(
            "--model", action="append", choices=[k.value for k in ModelKind], default=None,
            help="Model kind to evaluate. Repeat for several kinds. Defaults to every kind.",
        )
    else:
        parser.add_argument(
            "--model", choices=[k.value for k in ModelKind], default=ModelKind.SUBBLOCK.value,
            help="Model kind.",
        )
    parser.add_argument(
        "--features", default="SLZE",
        help="Features of the sub-block model, a subset of SLZE such as 'SL' or 'S+Z'.",
    )
    parser.add_argument(
        "--no-bias", dest="bias", action="store_false",
        help="Fit linear models without an offset.",
    )


def _descent_options(parser: ArgumentParser) -> None:
    defaults = GradientDescentSettings()
    parser.add_argument("--step", type=float, default=defaults.step, help="Initial gradient descent step.")
    parser.add_argument("--step-growth", type=float, default=defaults.step_growth, help="Step factor after an accepted iteration.")
    parser.add_argument("--momentum", type=float, default=defaults.momentum, help="Momentum of gradient descent.")
    parser.add_argument("--max-iterations", type=int, default=defaults.max_iterations, help="Iteration limit of gradient descent.")
    parser.add_argument("--tolerance", type=float, default=defaults.tolerance, help="Relative improvement below which descent stops.")
    parser.add_argument(
        "--window", type=int, default=defaults.window,
        help="Accepted iterations the improvement is averaged over. 1 checks every iteration.",
    )


def _cv_options(parser: ArgumentParser) -> None:
    parser.add_argument("--folds", type=int, default=None, help="Number of cross validation folds. Defaults to 5.")
    parser.add_argument(
        "--group-by-source", action="store_true",
        help="Keep blocks of one source image, the part of source_id before ':', in the same fold.",
    )


def parse_args(args: Optional[Sequence[str]] = None) -> Namespace:
    parser = _Parser(prog="subrate", description="""
        Estimate bit rates of quantized transform coefficient blocks, and fit and evaluate rate models.
    """)
    commands = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = commands.add_parser("gen", help="Generate a synthetic dataset labelled by a reference bit counter.")
    _common(p)
    p.add_argument("--n-blocks", "--blocks", dest="n_blocks", type=int, default=1000, help="Number of blocks.")
    p.add_argument("--sizes", default="4x4,8x8,16x16,32x32", help="Comma separated block sizes drawn uniformly.")
    p.add_argument("--sparsity", type=float, default=0.7, help="Probability that a coefficient is zero.")
    p.add_argument("--magnitude-scale", type=float, default=2.0, help="Mean nonzero magnitude minus one.")
    p.add_argument("--qp", type=int, default=22, help="QP label of every record.")
    p.add_argument("--frequency-decay", type=float, default=0.0, help="Decay of the nonzero probability toward high frequencies.")
    p.add_argument("--blocks-per-source", type=int, default=64, help="Number of consecutive blocks sharing a source id.")

    p = commands.add_parser("features", help="Dump the features of every block as CSV.")
    _common(p)
    p.add_argument("dataset", help="Dataset file.")

    p = commands.add_parser("fit", help="Fit a model and write it as JSON.")
    _common(p)
    p.add_argument("dataset", help="Training dataset file.")
    _model_options(p)
    _descent_options(p)

    p = commands.add_parser("eval", help="Evaluate a fitted model on a dataset.")
    _common(p)
    p.add_argument("model_file", help="Model file written by 'fit'.")
    p.add_argument("dataset", help="Evaluation dataset file.")
    p.add_argument("--clamp", action="store_true", help="Clamp negative estimates to 0.")

    p = commands.add_parser("cv", help="Cross-validate a model.")
    _common(p)
    p.add_argument("dataset", help="Dataset file.")
    _model_options(p)
    _descent_options(p)
    _cv_options(p)

    p = commands.add_parser("cross-qp", help="Train on some QPs and evaluate on others.")
    _common(p)
    p.add_argument("--train", required=True, help="Training dataset file.")
    p.add_argument("--test", required=True, help="Evaluation dataset file.")
    p.add_argument("--train-qp", type=int, action="append", default=None, help="Training QP. Repeatable. Defaults to every QP of the training set.")
    p.add_argument("--eval-qp", type=int, action="append", default=None, help="Evaluation QP. Repeatable. Defaults to every QP of the evaluation set.")
    _model_options(p, multiple=True)
    _descent_options(p)

    p = commands.add_parser("ablate", help="Cross-validate bias-free linear models on every feature subset.")
    _common(p)
    p.add_argument("dataset", help="Dataset file.")
    _cv_options(p)

    p = commands.add_parser("plot", help="Dump actual and estimated rates as CSV for a scatter plot.")
    _common(p)
    p.add_argument("paths", nargs="+", metavar="PATH", help="MODEL DATASET, or DATASET alone with --features.")
    p.add_argument("--features", default=None, help="Fit a bias-free model on these features of the dataset instead of loading a model.")

    p = commands.add_parser("compare", help="Cross-validate every model on each QP of a dataset.")
    _common(p)
    p.add_argument("dataset", help="Dataset file.")
    p.add_argument("--model", action="append", choices=[k.value for k in ModelKind], default=None, help="Model kind. Repeatable. Defaults to every kind.")
    _descent_options(p)
    _cv_options(p)

    return parser.parse_args(args)


#------------------------------------------------------------
# Helpers
#------------------------------------------------------------
def _configure_logging(verbose: int) -> None:
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger("subrate").setLevel(level)


def _config(args: Namespace) -> EstimationConfiguration:
    settings = {}
    if args.seed is not None:
        if args.seed < 0:
            raise UsageFailure(f"--seed must not be negative, got {args.seed}.", seed=args.seed)
        settings["seed"] = args.seed
    if getattr(args, "folds", None) is not None:
        settings["folds"] = args.folds
    if getattr(args, "group_by_source", False):
        settings["group_by_source"] = True
    if getattr(args, "clamp", False):
        settings["clamp_predictions"] = True
    if hasattr(args, "step"):
        settings["gradient"] = GradientDescentSettings(
            step=args.step,
            step_growth=args.step_growth,
            momentum=args.momentum,
            max_iterations=args.max_iterations,
            tolerance=args.tolerance,
            window=args.window,
        )
    return default_config().derive(**settings)


def _inputs(args: Namespace) -> list[str]:
    if args.command == "plot":
        return list(args.paths)
    names = ("dataset", "model_file", "train", "test")
    return [getattr(args, n) for n in names if getattr(args, n, None) is not None]


def _check_paths(args: Namespace) -> None:
    for path in _inputs(args):
        if not os.path.isfile(path):
            raise UsageFailure(f"Input file does not exist: {path}", path=path)
    if args.output is not None:
        parent = Path(args.output).resolve().parent
        if not parent.is_dir():
            raise UsageFailure(f"Output directory does not exist: {parent}", path=args.output)


def _write(output: Optional[str], text: str) -> None:
    """
    Writes the result to the standard output, or replaces the output file atomically.
    """
    if output is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    target = Path(output).resolve()
    fd, temp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(temp, target)
    except BaseException:
        if os.path.exists(temp):
            os.unlink(temp)
        raise


def _kinds(values: Optional[list[str]]) -> list[ModelKind]:
    return [ModelKind.parse(v) for v in values] if values else list(ModelKind)


#------------------------------------------------------------
# Commands
#------------------------------------------------------------
def _gen(args: Namespace, cfg: EstimationConfiguration) -> str:
    synth = SynthConfig(
        n_blocks=args.n_blocks,
        seed=cfg.seed,
        size_set=tuple(_size(s) for s in args.sizes.split(",") if s.strip()),
        sparsity=args.sparsity,
        magnitude_scale=args.magnitude_scale,
        qp_label=args.qp,
        frequency_decay=args.frequency_decay,
        blocks_per_source=args.blocks_per_source,
    )
    out = io.StringIO()
    write_dataset(generate(synth), out)
    return out.getvalue()


def _features(args: Namespace, cfg: EstimationConfiguration) -> str:
    out = io.StringIO()
    write_features_csv(read_dataset(args.dataset), out)
    return out.getvalue()


def _fit(args: Namespace, cfg: EstimationConfiguration) -> str:
    batch = RecordBatch(read_dataset(args.dataset).records)
    model, report = fit_model(args.model, batch, FeatureMask.parse(args.features), args.bias, cfg)
    model_file = ModelFile(model, batch.qps, len(batch), report.final_mse)
    logger.info(render_fit(model_file, report))
    return dumps_model(model_file)


def _eval(args: Namespace, cfg: EstimationConfiguration) -> str:
    model_file = load_model(args.model_file)
    batch = RecordBatch(read_dataset(args.dataset).records)
    report = evaluate(model_file.model, batch, cfg, qp_train=model_file.qp_train)
    return render_metrics([report], args.format, args.timing)


def _cv(args: Namespace, cfg: EstimationConfiguration) -> str:
    batch = RecordBatch(read_dataset(args.dataset).records)
    report = kfold_cv(batch, args.model, feature_mask=FeatureMask.parse(args.features), bias=args.bias, config=cfg)
    return render_cv(report, args.format, args.timing)


def _cross_qp(args: Namespace, cfg: EstimationConfiguration) -> str:
    train = RecordBatch(read_dataset(args.train).records)
    test = RecordBatch(read_dataset(args.test).records)
    train_qps = args.train_qp or list(train.qps)
    eval_qps = args.eval_qp or list(test.qps)
    for label, qps, batch in (("training", train_qps, train), ("evaluation", eval_qps, test)):
        missing = [q for q in qps if len(select_qp(batch, [q])) == 0]
        if missing:
            raise UsageFailure(f"The {label} set has no records with QP {', '.join(map(str, missing))}.", qps=missing)
    reports = cross_qp_matrix(
        train, test, train_qps, eval_qps, _kinds(args.model), FeatureMask.parse(args.features), args.bias, cfg,
    )
    return render_metrics(reports, args.format, args.timing)


def _ablate(args: Namespace, cfg: EstimationConfiguration) -> str:
    batch = RecordBatch(read_dataset(args.dataset).records)
    return render_ablation(ablate(batch, config=cfg), args.format)


def _plot(args: Namespace, cfg: EstimationConfiguration) -> str:
    if args.features is not None:
        if len(args.paths) != 1:
            raise UsageFailure("With --features, plot takes the dataset only.")
        batch = RecordBatch(read_dataset(args.paths[0]).records)
        model, _ = fit_model(ModelKind.SUBBLOCK, batch, FeatureMask.parse(args.features), False, cfg)
    else:
        if len(args.paths) != 2:
            raise UsageFailure("plot takes a model file and a dataset.")
        model = load_model(args.paths[0]).model
        batch = RecordBatch(read_dataset(args.paths[1]).records)
    return scatter_csv(scatter_dump(batch, model, cfg))


def _compare(args: Namespace, cfg: EstimationConfiguration) -> str:
    batch = RecordBatch(read_dataset(args.dataset).records)
    return render_comparison(compare(batch, model_kinds=_kinds(args.model), config=cfg), args.format, args.timing)


COMMANDS = {
    "gen": _gen,
    "features": _features,
    "fit": _fit,
    "eval": _eval,
    "cv": _cv,
    "cross-qp": _cross_qp,
    "ablate": _ablate,
    "plot": _plot,
    "compare": _compare,
}


def main(args: Optional[Sequence[str]] = None) -> int:
    """
    Runs a command and returns the exit code.
    """
    try:
        parsed = parse_args(args)
        _configure_logging(parsed.verbose)
        _check_paths(parsed)
        cfg = _config(parsed)
        text = COMMANDS[parsed.command](parsed, cfg)
        _write(parsed.output, text)
    except RateFailure as e:
        print(f"subrate: error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"subrate: error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
