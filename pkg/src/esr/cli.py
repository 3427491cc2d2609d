"""``esr`` command line: synth, train, predict, eval, visualize.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
Training progress is printed as ``stage=<t> train_error=<e>`` lines.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .cascade import TestParams, TrainParams, predict_one, train
from .dataio import (
    ImageFormatError,
    LandmarkFormatError,
    ModelFormatError,
    draw_landmarks,
    evaluate,
    generate_synthetic_dataset,
    load_dataset,
    load_image,
    load_landmarks,
    load_model,
    save_landmarks,
    save_model,
    save_ppm,
)
from .fern import DegenerateFeatureError
from .geometry import DegenerateShapeError
from .selection import SelectionError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

DATA_ERRORS = (OSError, ImageFormatError, LandmarkFormatError, ModelFormatError,
               DegenerateShapeError, DegenerateFeatureError, SelectionError, ValueError)

# config-file key -> (dest, type)
TRAIN_KEYS = {
    "stages": ("stages", int), "ferns": ("ferns", int), "pixels": ("pixels", int),
    "features": ("features", int), "aug": ("aug", int), "kappa": ("kappa", float),
    "beta": ("beta", float), "seed": ("seed", int), "n_init": ("n_init", int),
    "n-init": ("n_init", int),
}
TRAIN_DEFAULTS = {"stages": 10, "ferns": 500, "pixels": 400, "features": 5, "aug": 20,
                  "kappa": 0.3, "beta": 1000.0, "seed": 0}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def read_config(path) -> dict:
    """Parse a ``key=value`` file; blank lines and ``#`` comments are skipped."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in TRAIN_KEYS:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            dest, typ = TRAIN_KEYS[key]
            try:
                out[dest] = typ(value)
            except ValueError:
                raise UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return out


def _merged(args, defaults: dict) -> dict:
    """Flag value if given, else config-file value, else default."""
    conf = read_config(args.config) if getattr(args, "config", None) else {}
    out = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        out[key] = flag if flag is not None else conf.get(key, default)
    return out


def _pair(text):
    if text.lower() == "none":
        return None
    try:
        i, j = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected 'i,j' or 'none'") from None
    return (i, j)


def cmd_synth(args) -> int:
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    if args.n_fp < 4:
        raise UsageError("--n-fp must be >= 4")
    entries = generate_synthetic_dataset(args.count, args.n_fp, args.size, args.noise, args.seed, args.out)
    print(f"out={args.out} count={len(entries)} n_fp={args.n_fp} size={args.size} "
          f"noise={args.noise:g} seed={args.seed}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _merged(args, TRAIN_DEFAULTS)
    try:
        params = TrainParams(n_aug=cfg["aug"], t_stages=cfg["stages"], k_ferns=cfg["ferns"],
                             p_pixels=cfg["pixels"], f_features=cfg["features"],
                             kappa=cfg["kappa"], beta=cfg["beta"], seed=cfg["seed"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    data = load_dataset(args.data)
    print(" ".join(f"{k}={v}" for k, v in (
        ("n_images", len(data)), ("n_fp", data.shapes.shape[1]), ("stages", params.t_stages),
        ("ferns", params.k_ferns), ("pixels", params.p_pixels), ("features", params.f_features),
        ("aug", params.n_aug), ("kappa", params.kappa), ("beta", params.beta), ("seed", params.seed))),
        flush=True)

    def on_stage(t, err):
        print(f"stage={t} train_error={err:.9g}", flush=True)

    model = train(data.images, data.shapes, params, boxes=data.boxes, on_stage=on_stage)
    save_model(model, args.model)
    print(f"model={args.model} ferns={model.n_ferns}")
    return EXIT_OK


def cmd_predict(args) -> int:
    if args.n_init < 1:
        raise UsageError("--n-init must be >= 1")
    model = load_model(args.model)
    image = load_image(args.image)
    box = args.box
    if box is None and args.box_from:
        _, box = load_landmarks(args.box_from)
    shape = predict_one(model, image, TestParams(args.n_init), rng=args.seed, box=box)
    save_landmarks(args.out, shape, box)
    print(f"out={args.out} n_fp={model.n_fp}")
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.n_init < 1:
        raise UsageError("--n-init must be >= 1")
    model = load_model(args.model)
    data = load_dataset(args.data)
    if data.shapes.shape[1] != model.n_fp:
        raise ValueError(f"dataset has {data.shapes.shape[1]} landmarks, model expects {model.n_fp}")
    report = evaluate(model, data, TestParams(args.n_init), normalizer_pair=args.normalizer, seed=args.seed)
    with open(args.report, "w") as fh:
        fh.write(report.to_text())
    print(f"report={args.report} n_images={len(data)} mean={report.mean:.9g} median={report.median:.9g}")
    return EXIT_OK


def cmd_visualize(args) -> int:
    image = load_image(args.image)
    shape, _ = load_landmarks(args.landmarks)
    save_ppm(args.out, draw_landmarks(image, shape, args.radius))
    print(f"out={args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="esr", description="Explicit shape regression with boosted random ferns.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("synth", help="write a synthetic landmark dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--n-fp", type=int, default=29)
    s.add_argument("--size", type=int, default=128)
    s.add_argument("--noise", type=float, default=2.0)
    s.add_argument("--seed", type=int, default=7)
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", help="train a model on a dataset directory")
    t.add_argument("--data", required=True)
    t.add_argument("--model", required=True)
    t.add_argument("--config")
    t.add_argument("--stages", type=int)
    t.add_argument("--ferns", type=int)
    t.add_argument("--pixels", type=int)
    t.add_argument("--features", type=int)
    t.add_argument("--aug", type=int)
    t.add_argument("--kappa", type=float)
    t.add_argument("--beta", type=float)
    t.add_argument("--seed", type=int)
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="predict landmarks for one image")
    pr.add_argument("--model", required=True)
    pr.add_argument("--image", required=True)
    pr.add_argument("--out", required=True)
    pr.add_argument("--n-init", type=int, default=5)
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--box", type=float, nargs=4, metavar=("X", "Y", "W", "H"))
    pr.add_argument("--box-from", metavar="LANDMARKS", help="take the box line of a landmark file")
    pr.set_defaults(func=cmd_predict)

    e = sub.add_parser("eval", help="evaluate a model on a labeled dataset")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--report", required=True)
    e.add_argument("--n-init", type=int, default=5)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--normalizer", type=_pair, default=(0, 1),
                   help="landmark pair 'i,j' normalizing errors, or 'none'")
    e.set_defaults(func=cmd_eval)

    v = sub.add_parser("visualize", help="draw landmarks onto an image (PPM output)")
    v.add_argument("--image", required=True)
    v.add_argument("--landmarks", required=True)
    v.add_argument("--out", required=True)
    v.add_argument("--radius", type=float, default=2.0)
    v.set_defaults(func=cmd_visualize)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"esr {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as exc:
        print(f"esr {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"esr {args.command}: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
