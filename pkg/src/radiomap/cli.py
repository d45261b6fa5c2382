"""``radiomap`` command line: features, fuse, eval, curve, stats, phantom.

Structured results go to stdout as JSON with a ``schema_version`` field.
Failures print one JSON object on stderr (``{"error": kind, "message": ...,
"exit_code": n}``) and exit with:

* 2 - usage error (unknown subcommand, bad flag)
* 3 - invalid configuration or parameters
* 4 - I/O error
* 5 - malformed or inconsistent input data
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from radiomap import fuse as fuse_mod
from radiomap import metrics, phantom, stability, stats
from radiomap.cr import CrParams, cr_map_fast, cr_map_naive
from radiomap.glcm import GlcmParams, re_map_fast, re_map_naive
from radiomap.imgio import (
    FormatError,
    GrayImage,
    load_mask_pgm,
    load_nifti_slice,
    load_pgm,
    load_raster,
    save_pgm,
    save_raster,
)
from radiomap.preprocess import minmax_normalize, quantize

SCHEMA_VERSION = 1

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_IO, EXIT_DATA = 0, 2, 3, 4, 5

#: Defaults for the tunable flags; ``--config`` overrides these, explicit flags override both.
DEFAULTS = {
    "features": {"s": 2, "num": 15, "m": 5, "re_s": 5, "alpha": 7.0, "distances": [1, 2], "threads": None},
    "fuse": {"normalize_features": True},
    "phantom": {"seed": None},
    "stats": {"comparisons": 1, "alternative": "two-sided"},
}


class CliError(Exception):
    def __init__(self, kind: str, message: str, code: int):
        super().__init__(message)
        self.kind, self.code = kind, code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", message, EXIT_USAGE)


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2))


# ---------------------------------------------------------------- loading


def load_image(path: str, slice_index: int = 0, channel: str | None = None) -> GrayImage:
    """Read a slice from ``.pgm``, ``.nii`` or a raster stem (``.json``/``.bin`` or bare)."""
    p = Path(path)
    suffix = p.suffix.lower()
    if suffix == ".pgm":
        return load_pgm(p.read_bytes())
    if suffix == ".nii":
        image, _ = load_nifti_slice(p.read_bytes(), slice_index)
        return image
    stem = p.with_suffix("") if suffix in (".json", ".bin") else p
    channels = load_raster(stem)
    if channel is None:
        return GrayImage(channels[0][1])
    for name, arr in channels:
        if name == channel:
            return GrayImage(arr)
    raise FormatError(f"raster {stem} has no channel {channel!r}")


def _resolve(args: argparse.Namespace, command: str) -> dict:
    settings = dict(DEFAULTS.get(command, {}))
    if getattr(args, "config", None):
        try:
            config = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise CliError("config", f"{args.config}: {exc}", EXIT_CONFIG) from None
        if not isinstance(config, dict):
            raise CliError("config", "config file must hold a JSON object", EXIT_CONFIG)
        config = config.get(command, config)
        unknown = set(config) - set(settings)
        if unknown:
            raise CliError("config", f"unknown {command} settings: {sorted(unknown)}", EXIT_CONFIG)
        settings.update(config)
    for key in settings:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


# ------------------------------------------------------------ subcommands


def compute_features(
    values: np.ndarray, cr_params: CrParams | None, re_params: GlcmParams | None, threads=1, naive=False
) -> list[tuple[str, np.ndarray]]:
    """Normalize, quantize and compute the requested maps, in ``cr``, ``re`` order."""
    levels = quantize(minmax_normalize(values))
    out = []
    if cr_params is not None:
        out.append(("cr", cr_map_naive(levels, cr_params) if naive else cr_map_fast(levels, cr_params, threads)))
    if re_params is not None:
        out.append(("re", (re_map_naive if naive else re_map_fast)(levels, re_params, threads)))
    return out


def cmd_features(args) -> int:
    cfg = _resolve(args, "features")
    want_cr, want_re = args.cr, args.re
    if not (want_cr or want_re):
        want_cr = want_re = True
    try:
        cr_params = CrParams(cfg["s"], cfg["num"], cfg["m"]) if want_cr else None
        re_params = GlcmParams(s=cfg["re_s"], alpha=float(cfg["alpha"]), distances=tuple(cfg["distances"])) if want_re else None
    except (TypeError, ValueError) as exc:
        raise CliError("config", str(exc), EXIT_CONFIG) from None
    image = load_image(args.input, args.slice, args.channel)
    channels = compute_features(image.values, cr_params, re_params, cfg["threads"], args.naive)
    payload, sidecar = save_raster(channels, args.out)
    _emit({
        "schema_version": SCHEMA_VERSION,
        "payload": str(payload),
        "sidecar": str(sidecar),
        "channels": [name for name, _ in channels],
        "width": image.width,
        "height": image.height,
    })
    return EXIT_OK


def cmd_fuse(args) -> int:
    cfg = _resolve(args, "fuse")
    raw = minmax_normalize(load_image(args.raw, args.slice).values)
    maps = []
    for stem in args.maps:
        maps.extend(load_raster(Path(stem)))
    try:
        stack = fuse_mod.build_stack(raw, maps, normalize_features=cfg["normalize_features"])
    except ValueError as exc:
        raise CliError("data", str(exc), EXIT_DATA) from None
    payload, sidecar = fuse_mod.export_stack(stack, args.out)
    _emit({"schema_version": SCHEMA_VERSION, "payload": str(payload), "sidecar": str(sidecar), "channels": stack.names})
    return EXIT_OK


def pair_masks(pred: Path, gt: Path) -> list[tuple[str, Path, Path]]:
    """Pair prediction and ground-truth files; directories pair by basename."""
    if pred.is_dir() != gt.is_dir():
        raise CliError("data", "--pred and --gt must both be files or both directories", EXIT_DATA)
    if not pred.is_dir():
        return [(pred.name, pred, gt)]
    preds = {p.name: p for p in sorted(pred.iterdir()) if p.is_file()}
    gts = {p.name: p for p in sorted(gt.iterdir()) if p.is_file()}
    unpaired = sorted(set(preds) ^ set(gts))
    if unpaired:
        raise CliError("data", f"unpaired mask files: {unpaired}", EXIT_DATA)
    if not preds:
        raise CliError("data", f"no mask files in {pred}", EXIT_DATA)
    return [(name, preds[name], gts[name]) for name in sorted(preds)]


def evaluate_pairs(pairs) -> tuple[list[dict], dict]:
    rows = []
    for name, p, g in pairs:
        pm, gm = load_mask_pgm(p.read_bytes()), load_mask_pgm(g.read_bytes())
        try:
            c = metrics.confusion(pm, gm)
        except ValueError as exc:
            raise CliError("data", f"{name}: {exc}", EXIT_DATA) from None
        rows.append({
            "name": name,
            "dice": metrics.dice(c),
            "precision": metrics.precision(c),
            "sensitivity": metrics.sensitivity(c),
            "tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn,
        })
    summary = {"schema_version": SCHEMA_VERSION, "n": len(rows)}
    for key in ("dice", "precision", "sensitivity"):
        agg = metrics.aggregate([r[key] for r in rows], with_sd=True)
        summary[key] = {"mean": agg["mean"], "sd": agg["sd"]}
    return rows, summary


def cmd_eval(args) -> int:
    rows, summary = evaluate_pairs(pair_masks(Path(args.pred), Path(args.gt)))
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
    if args.out:
        Path(args.out).write_text(json.dumps(summary, indent=2) + "\n")
    _emit(summary)
    return EXIT_OK


def cmd_curve(args) -> int:
    curve = stability.load_curve(Path(args.input).read_text(), label=args.input)
    value = stability.sdd(curve)
    if args.json:
        _emit({"schema_version": SCHEMA_VERSION, "sdd": value, "n_points": len(curve.scores)})
    else:
        print(f"{value:.6f}")
    return EXIT_OK


def cmd_stats(args) -> int:
    cfg = _resolve(args, "stats")
    base, treat = stats.load_pairs(Path(args.input).read_text())
    try:
        res = stats.wilcoxon_signed_rank(base, treat, alternative=cfg["alternative"])
        (adjusted,) = stats.bonferroni([res.pvalue], int(cfg["comparisons"]))
    except ValueError as exc:
        raise CliError("config", str(exc), EXIT_CONFIG) from None
    _emit({
        "schema_version": SCHEMA_VERSION,
        "n_pairs": int(base.size),
        "n_nonzero": res.n,
        "statistic": res.statistic,
        "pvalue": res.pvalue,
        "pvalue_adjusted": adjusted,
        "comparisons": int(cfg["comparisons"]),
        "alternative": cfg["alternative"],
        "method": res.method,
    })
    return EXIT_OK


def cmd_phantom(args) -> int:
    cfg = _resolve(args, "phantom")
    text = Path(args.spec).read_text()
    try:
        spec = phantom.PhantomSpec.from_json(text)
        if cfg["seed"] is not None:
            spec.seed = int(cfg["seed"])
    except (TypeError, ValueError) as exc:
        raise CliError("config", str(exc), EXIT_CONFIG) from None
    image, mask = phantom.generate(spec)
    stem = Path(args.out)
    payload, sidecar = save_raster([("flair", image)], stem)
    mask_path = stem.with_name(stem.name + "_mask.pgm")
    mask_path.write_bytes(save_pgm(mask))
    _emit({
        "schema_version": SCHEMA_VERSION,
        "payload": str(payload),
        "sidecar": str(sidecar),
        "mask": str(mask_path),
        "seed": spec.seed,
        "lesion_pixels": int(mask.sum()),
    })
    return EXIT_OK


# ----------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="radiomap", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("features", help="compute CR and/or RE maps for one slice")
    p.add_argument("--in", dest="input", required=True, help=".pgm, .nii or raster stem")
    p.add_argument("--slice", type=int, default=0, help="axial slice index for NIfTI input")
    p.add_argument("--channel", help="channel name for raster input (default: first)")
    p.add_argument("--cr", action="store_true", help="compute the concentration-rate map")
    p.add_argument("--re", action="store_true", help="compute the Renyi-entropy map")
    p.add_argument("--out", required=True, help="output stem (writes STEM.bin and STEM.json)")
    p.add_argument("--s", type=int, help="CR window half-size (default 2)")
    p.add_argument("--num", type=int, help="CR summed count (default 15)")
    p.add_argument("--m", type=int, help="CR excluded top count (default 5)")
    p.add_argument("--re-s", dest="re_s", type=int, help="RE window half-size (default 5)")
    p.add_argument("--alpha", type=float, help="Renyi order (default 7)")
    p.add_argument("--distances", type=int, nargs="+", help="GLCM pixel distances (default 1 2)")
    p.add_argument("--threads", type=int, help="row workers (capped by RADIOMAP_THREADS)")
    p.add_argument("--naive", action="store_true", help="use the reference implementations")
    p.add_argument("--config", help="JSON file overriding defaults")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("fuse", help="stack a raw slice with feature rasters")
    p.add_argument("--raw", required=True)
    p.add_argument("--slice", type=int, default=0)
    p.add_argument("--maps", nargs="*", default=[], help="raster stems whose channels are appended in order")
    p.add_argument("--out", required=True)
    p.add_argument("--no-normalize-features", dest="normalize_features", action="store_const", const=False)
    p.add_argument("--config")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("eval", help="Dice, precision and sensitivity of mask pairs")
    p.add_argument("--pred", required=True, help="PGM mask or directory")
    p.add_argument("--gt", required=True, help="PGM mask or directory (paired by basename)")
    p.add_argument("--csv", help="write per-slice metrics here")
    p.add_argument("--out", help="also write the aggregate JSON here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("curve", help="SDD of a validation curve CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--json", action="store_true", help="full-precision JSON instead of a 6-decimal line")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("stats", help="Wilcoxon signed-rank test with Bonferroni adjustment")
    p.add_argument("--in", dest="input", required=True, help="CSV with baseline,treatment columns")
    p.add_argument("--comparisons", type=int, help="number of comparisons m (default 1)")
    p.add_argument("--alternative", choices=["two-sided", "greater"])
    p.add_argument("--config")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("phantom", help="render a synthetic slice and its lesion mask")
    p.add_argument("--spec", required=True, help="PhantomSpec JSON")
    p.add_argument("--out", required=True, help="writes STEM.bin/.json and STEM_mask.pgm")
    p.add_argument("--seed", type=int, help="override the spec's seed")
    p.add_argument("--config")
    p.set_defaults(func=cmd_phantom)
    return parser


def run(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except CliError as exc:
        err = (exc.kind, str(exc), exc.code)
    except (FormatError, stability.CurveParseError) as exc:
        err = ("format", str(exc), EXIT_DATA)
    except (OSError, IndexError) as exc:
        kind, code = ("io", EXIT_IO) if isinstance(exc, OSError) else ("data", EXIT_DATA)
        err = (kind, str(exc), code)
    except ValueError as exc:
        err = ("data", str(exc), EXIT_DATA)
    kind, message, code = err
    print(json.dumps({"error": kind, "message": message, "exit_code": code}), file=sys.stderr)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
