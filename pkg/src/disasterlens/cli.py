"""Command-line surface for the pipeline.

Subcommands:

    train             split a manifest, fine-tune the head, write metrics + head weights
    eval              accuracy, confusion matrix, and misclassification listing
    predict           class name and probabilities for one image
    sweep             best-epoch accuracy across train/test split ratios
    curve             per-epoch loss/precision table with the best epoch flagged
    validate-weights  CNWF integrity check, optionally bound against an arch file
    init-weights      write a seeded random frozen backbone as CNWF
    synth             generate the bundled 5-class texture dataset

Every option may also come from a ``--config`` file of ``key = value``
lines (``#`` comments allowed); command-line flags override file values.
``--threads`` falls back to the ``DISASTERLENS_THREADS`` environment
variable; ``--deterministic`` forces single-threaded reductions and
zeroes wall-clock columns so reruns are byte-identical.

Exit codes: 0 success, 1 domain error (one-line diagnostic on stderr),
2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

# Holds the threadpoolctl limiter so the cap lasts for the process.
_THREAD_LIMITER = None


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_ratios(text: str) -> tuple[float, ...]:
    parts = [p for p in text.replace(",", " ").split() if p]
    if not parts:
        raise ValueError("expected a comma-separated list of ratios")
    return tuple(float(p) for p in parts)


def _opt(parser, registry, *flags, convert=str, default=None, help="", metavar=None, choices=None):
    """Register an option that participates in config-file layering."""
    dest = flags[0].lstrip("-").replace("-", "_")
    registry[dest] = (convert, default)
    if default is not None:
        help = f"{help} (default: {default})"
    kwargs = {"dest": dest, "type": convert, "default": None, "help": help}
    if metavar is not None:
        kwargs["metavar"] = metavar
    if choices is not None:
        kwargs["choices"] = choices
    parser.add_argument(*flags, **kwargs)


def _switch(parser, registry, flag, default: bool, help=""):
    """Register an on/off option (``--x`` / ``--no-x``) with config layering."""
    dest = flag.lstrip("-").replace("-", "_")
    registry[dest] = (_parse_bool, default)
    parser.add_argument(
        flag,
        dest=dest,
        action=argparse.BooleanOptionalAction,
        default=None,
        help=f"{help} (default: {'on' if default else 'off'})",
    )


def _common(parser, registry, seed: bool = True):
    _opt(parser, registry, "--out", default=".", metavar="DIR",
         help="directory for output files")
    _opt(parser, registry, "--config", metavar="FILE",
         help="key=value file supplying defaults for any flag")
    _opt(parser, registry, "--threads", convert=int, metavar="N",
         help="cap math-library worker threads (env DISASTERLENS_THREADS)")
    _switch(parser, registry, "--deterministic", False,
            help="single-threaded reductions, zeroed timing columns")
    if seed:
        _opt(parser, registry, "--seed", convert=int, default=0, metavar="N",
             help="master seed; all randomness derives from it by name")


def _split_options(parser, registry):
    _opt(parser, registry, "--train-fraction", convert=float, metavar="F",
         help="train share of the manifest, in (0, 1)")
    _opt(parser, registry, "--test-count", convert=int, metavar="N",
         help="absolute test-set size (remainder trains)")
    _switch(parser, registry, "--stratified", False,
            help="apportion the split per class")


def _train_options(parser, registry):
    _opt(parser, registry, "--epochs", convert=int, default=35, metavar="N",
         help="training epochs")
    _opt(parser, registry, "--batch-size", convert=int, default=16, metavar="N",
         help="mini-batch size")
    _opt(parser, registry, "--lr", convert=float, default=0.01, metavar="F",
         help="learning rate")
    _opt(parser, registry, "--momentum", convert=float, default=0.9, metavar="F",
         help="momentum coefficient")
    _switch(parser, registry, "--augment", True,
            help="per-epoch training-set augmentation")
    _opt(parser, registry, "--translation", convert=float, default=0.1, metavar="F",
         help="max augmentation shift as a fraction of image side")
    _opt(parser, registry, "--jitter", convert=float, default=0.1, metavar="F",
         help="RGB intensity jitter stddev (0 disables)")
    _opt(parser, registry, "--head-init", default="glorot", metavar="SCHEME",
         choices=("glorot", "zeros"), help="head weight init scheme")


def _model_options(parser, registry, head: bool = False):
    _opt(parser, registry, "--arch", metavar="FILE",
         help="architecture file, or a bundled name: vgg16, smallnet "
              "(default: vgg16, the 224x224 16-layer network)")
    _opt(parser, registry, "--weights", metavar="FILE",
         help="CNWF weights file with the frozen backbone")
    if head:
        _opt(parser, registry, "--head", metavar="FILE",
             help="CNWF file with trained head weights (merged over --weights)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="disasterlens",
        description="Frozen-backbone transfer learning for 5-class aerial scene classification.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    def command(name, handler, help):
        registry = {}
        p = sub.add_parser(name, help=help, description=help)
        p.set_defaults(_handler=handler, _registry=registry, _parser=p)
        return p, registry

    p, reg = command("train", _cmd_train, "Split a manifest, fine-tune the head, write metrics and head weights.")
    _opt(p, reg, "--manifest", metavar="FILE", help="path,label CSV listing the dataset")
    _model_options(p, reg)
    _split_options(p, reg)
    _train_options(p, reg)
    _common(p, reg)

    p, reg = command("eval", _cmd_eval, "Accuracy, confusion matrix, and misclassification listing.")
    _opt(p, reg, "--manifest", metavar="FILE", help="path,label CSV listing the dataset")
    _model_options(p, reg, head=True)
    _split_options(p, reg)
    _common(p, reg)

    p, reg = command("predict", _cmd_predict, "Class name and probabilities for one image.")
    p.add_argument("image", help="image file (PPM or PNG)")
    _model_options(p, reg, head=True)
    _common(p, reg, seed=False)

    p, reg = command("sweep", _cmd_sweep, "Best-epoch accuracy across train/test split ratios.")
    _opt(p, reg, "--manifest", metavar="FILE", help="path,label CSV listing the dataset")
    _model_options(p, reg)
    _opt(p, reg, "--ratios", convert=_parse_ratios, default="0.70,0.75,0.80,0.85,0.90",
         metavar="LIST", help="comma-separated train fractions")
    _opt(p, reg, "--repeats", convert=int, default=1, metavar="N",
         help="independently seeded runs per ratio")
    _train_options(p, reg)
    _common(p, reg)

    p, reg = command("curve", _cmd_curve, "Per-epoch loss/precision table with the best epoch flagged.")
    _opt(p, reg, "--metrics", metavar="FILE", help="metrics CSV from a training run")
    _common(p, reg, seed=False)

    p, reg = command("validate-weights", _cmd_validate, "CNWF integrity check, optionally bound against an arch file.")
    p.add_argument("file", help="CNWF weights file")
    _opt(p, reg, "--arch", metavar="FILE",
         help="also check entries against this architecture's slots")
    _common(p, reg, seed=False)

    p, reg = command("init-weights", _cmd_init_weights, "Write a seeded random frozen backbone as CNWF.")
    _model_options(p, reg)
    _common(p, reg)

    p, reg = command("synth", _cmd_synth, "Generate the 5-class texture dataset with a manifest.")
    _opt(p, reg, "--count", convert=int, default=500, metavar="N", help="number of images")
    _opt(p, reg, "--side", convert=int, default=64, metavar="N", help="image side in pixels")
    _common(p, reg)

    return parser


def _load_config(path: str, registry) -> dict:
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{line_no}: expected key=value, got {line!r}")
            key = key.strip().replace("-", "_")
            value = value.strip()
            if key not in registry or key == "config":
                raise ValueError(f"{path}:{line_no}: unknown config key {key!r}")
            convert, _ = registry[key]
            try:
                values[key] = convert(value)
            except ValueError as exc:
                raise ValueError(f"{path}:{line_no}: bad value for {key!r}: {exc}") from exc
    return values


def _resolve(ns: argparse.Namespace) -> None:
    """Layer values: command line > config file > built-in default."""
    registry = ns._registry
    config = _load_config(ns.config, registry) if getattr(ns, "config", None) else {}
    for dest, (convert, default) in registry.items():
        if getattr(ns, dest, None) is None:
            if dest in config:
                setattr(ns, dest, config[dest])
            elif isinstance(default, str) and convert is not str:
                setattr(ns, dest, convert(default))
            else:
                setattr(ns, dest, default)


def _apply_threads(ns: argparse.Namespace) -> None:
    n = getattr(ns, "threads", None)
    if n is None:
        env = os.environ.get("DISASTERLENS_THREADS")
        if env is not None:
            try:
                n = int(env)
            except ValueError as exc:
                raise ValueError(f"DISASTERLENS_THREADS: {exc}") from exc
    if n is None and getattr(ns, "deterministic", False):
        n = 1
    if n is None:
        return
    if n < 1:
        raise ValueError("threads must be >= 1")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return
    global _THREAD_LIMITER
    _THREAD_LIMITER = threadpool_limits(limits=n)


def _require(ns: argparse.Namespace, *dests: str) -> None:
    for dest in dests:
        if getattr(ns, dest, None) is None:
            flag = "--" + dest.replace("_", "-")
            ns._parser.error(f"{flag} is required (flag or config file)")


def _out_dir(ns: argparse.Namespace) -> Path:
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_spec(ns: argparse.Namespace):
    from .arch import default_arch, load_arch, parse_arch, synthetic_arch_text

    if not ns.arch:
        return default_arch()
    if not Path(ns.arch).exists():  # existing files shadow the bundled names
        if ns.arch == "vgg16":
            return default_arch()
        if ns.arch == "smallnet":
            return parse_arch(synthetic_arch_text())
    return load_arch(ns.arch)


def _load_model(ns: argparse.Namespace):
    """Spec plus weights, with an optional separate head file merged in."""
    from .weights import load_weights

    spec = _load_spec(ns)
    weights = load_weights(ns.weights)
    if getattr(ns, "head", None):
        weights = weights.merged_with(load_weights(ns.head))
    return spec, weights


def _split_spec(ns: argparse.Namespace):
    from .data import SplitSpec

    if ns.train_fraction is not None and ns.test_count is not None:
        raise ValueError("give either --train-fraction or --test-count, not both")
    if ns.train_fraction is None and ns.test_count is None:
        return None
    return SplitSpec(
        train_fraction=ns.train_fraction,
        test_count=ns.test_count,
        seed=ns.seed,
        stratified=ns.stratified,
    )


def _train_config(ns: argparse.Namespace):
    from .data import AugmentationConfig
    from .training import TrainConfig

    augmentation = AugmentationConfig(
        max_translation_fraction=ns.translation,
        rgb_jitter_stddev=ns.jitter,
    )
    return TrainConfig(
        epochs=ns.epochs,
        batch_size=ns.batch_size,
        lr=ns.lr,
        momentum=ns.momentum,
        augment=ns.augment,
        augmentation=augmentation,
        seed=ns.seed,
        deterministic=ns.deterministic,
        head_init=ns.head_init,
    )


def _cmd_train(ns: argparse.Namespace) -> int:
    from .data import load_manifest, split_dataset
    from .network import head_entries
    from .training import train_head, write_metrics_csv
    from .weights import ModelWeights, save_weights

    _require(ns, "manifest", "weights")
    spec, weights = _load_model(ns)
    manifest = load_manifest(ns.manifest)
    if manifest.missing_files:
        print(f"warning: {manifest.missing_files} manifest entries point to missing files",
              file=sys.stderr)
    split = _split_spec(ns)
    if split is None:
        raise ValueError("train needs a split: give --train-fraction or --test-count")
    train_samples, test_samples = split_dataset(manifest.samples, split)
    print(f"training on {len(train_samples)} images, testing on {len(test_samples)}",
          file=sys.stderr)

    def progress(m):
        print(
            f"epoch {m.epoch}/{ns.epochs} loss {m.loss:.6f} "
            f"precision {m.precision:.6f} ({m.seconds:.1f}s)",
            file=sys.stderr,
        )

    result = train_head(spec, weights, train_samples, test_samples, _train_config(ns),
                        progress=progress)
    out = _out_dir(ns)
    metrics_path = out / "metrics.csv"
    head_path = out / "head.cnwf"
    write_metrics_csv(result.metrics, metrics_path, zero_seconds=ns.deterministic)
    save_weights(ModelWeights(head_entries(spec, result.head)), head_path)
    best = result.metrics[result.best_epoch - 1]
    print(f"best_epoch {result.best_epoch}")
    print(f"best_precision {best.precision:.6f}")
    print(f"metrics {metrics_path}")
    print(f"head {head_path}")
    return 0


def _cmd_eval(ns: argparse.Namespace) -> int:
    from .data import load_manifest, split_dataset
    from .evaluation import evaluate, misclassification_rows, write_misclassification_csv

    _require(ns, "manifest", "weights")
    spec, weights = _load_model(ns)
    manifest = load_manifest(ns.manifest)
    split = _split_spec(ns)
    samples = manifest.samples if split is None else split_dataset(manifest.samples, split)[1]
    result = evaluate(spec, weights, samples)
    rows = misclassification_rows(samples, result)
    out = _out_dir(ns)
    miss_path = out / "misclassified.csv"
    write_misclassification_csv(rows, miss_path)
    print(f"samples {len(samples)}")
    print(f"accuracy {result.accuracy:.6f}")
    print()
    print(result.confusion.render())
    print()
    print(f"misclassified {len(rows)} (listing: {miss_path})")
    return 0


def _cmd_predict(ns: argparse.Namespace) -> int:
    from .data import CLASS_NAMES, decode_image, preprocess
    from .network import forward_features, forward_head, head_params_from_weights

    _require(ns, "weights")
    spec, weights = _load_model(ns)
    img = preprocess(decode_image(ns.image), target=spec.input_shape[1])
    features = forward_features(spec, weights, img[None, ...])
    probs = forward_head(features, head_params_from_weights(spec, weights))[0]
    print(f"prediction {CLASS_NAMES[int(probs.argmax())]}")
    for name, p in zip(CLASS_NAMES, probs):
        print(f"{name} {float(p):.6f}")
    return 0


def _cmd_sweep(ns: argparse.Namespace) -> int:
    from .data import load_manifest
    from .evaluation import split_sweep, write_sweep_csv

    _require(ns, "manifest", "weights")
    spec, weights = _load_model(ns)
    manifest = load_manifest(ns.manifest)
    rows = split_sweep(
        manifest.samples, spec, weights, _train_config(ns),
        ratios=ns.ratios, repeats=ns.repeats,
    )
    out = _out_dir(ns)
    sweep_path = out / "sweep.csv"
    write_sweep_csv(rows, sweep_path, with_stddev=ns.repeats > 1)
    for r in rows:
        extra = f" stddev {r.stddev:.6f}" if ns.repeats > 1 else ""
        print(f"ratio {r.ratio:.2f} accuracy {r.accuracy:.6f}{extra}")
    print(f"sweep {sweep_path}")
    return 0


def _cmd_curve(ns: argparse.Namespace) -> int:
    from .evaluation import epoch_curve, write_curve_csv
    from .training import read_metrics_csv, select_best_epoch

    _require(ns, "metrics")
    metrics = read_metrics_csv(ns.metrics)
    rows = epoch_curve(metrics)
    out = _out_dir(ns)
    curve_path = out / "curve.csv"
    write_curve_csv(rows, curve_path)
    best = select_best_epoch(metrics)
    print(f"epochs {len(rows)}")
    print(f"best_epoch {best}")
    print(f"best_precision {metrics[best - 1].precision:.6f}")
    print(f"curve {curve_path}")
    return 0


def _cmd_validate(ns: argparse.Namespace) -> int:
    from .weights import bind_check, load_weights

    weights = load_weights(ns.file)
    params = sum(e.tensor.size for e in weights.entries())
    frozen = sum(1 for e in weights.entries() if e.frozen)
    print(f"entries {len(weights)}")
    print(f"parameters {params}")
    print(f"frozen {frozen}")
    print(f"backbone_digest {weights.backbone_digest()}")
    if ns.arch:
        spec = _load_spec(ns)
        report = bind_check(spec, weights)
        if not report.ok:
            problems = []
            if report.mismatched:
                problems.append("mismatched " + ", ".join(sorted(report.mismatched)))
            if report.extra:
                problems.append("unknown " + ", ".join(sorted(report.extra)))
            raise ValueError(f"weights do not bind to {ns.arch}: " + "; ".join(problems))
        print(f"bound {len(report.matched)}/{len(spec.weight_slots())} slots"
              + (f" (missing: {', '.join(sorted(report.missing))})" if report.missing else ""))
    print(f"ok {ns.file}")
    return 0


def _cmd_init_weights(ns: argparse.Namespace) -> int:
    from .weights import random_backbone, save_weights

    spec = _load_spec(ns)
    weights = random_backbone(spec, seed=ns.seed)
    out = _out_dir(ns)
    path = out / "backbone.cnwf"
    save_weights(weights, path)
    print(f"entries {len(weights)}")
    print(f"backbone_digest {weights.backbone_digest()}")
    print(f"weights {path}")
    return 0


def _cmd_synth(ns: argparse.Namespace) -> int:
    from .data import CLASS_NAMES
    from .synthetic import generate_dataset

    out = _out_dir(ns)
    manifest = generate_dataset(out, count=ns.count, side=ns.side, seed=ns.seed)
    for name, count in zip(CLASS_NAMES, manifest.class_counts):
        print(f"{name} {count}")
    print(f"manifest {out / 'manifest.csv'}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        _resolve(ns)
        _apply_threads(ns)
        return ns._handler(ns)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
