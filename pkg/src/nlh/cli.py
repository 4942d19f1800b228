"""Command-line front end: ``nlh <command> ...``.

Noise levels are given and printed on the 0-255 scale.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .grouping import apd_csv, apd_statistics
from .image import ColorImage, ColorSpace, add_awgn, metrics, rgb_to_ycbcr
from .io import read_image, write_image
from .noise import estimate_channels
from .params import PROFILES, check_profile_sigma, profile
from .parallel import resolve_workers
from .pipeline import denoise

IMAGE_SUFFIXES = {".png", ".pgm", ".ppm", ".pnm", ".bmp", ".tif", ".tiff", ".jpg", ".jpeg"}
REPORT_SCHEMA = 1


class CliError(Exception):
    """Failure that maps to a nonzero exit code with a one-line message."""


class UsageError(CliError):
    """Invalid parameters; reported through argparse with exit code 2."""


def _warn(msg: str):
    print(f"nlh: warning: {msg}", file=sys.stderr)


def _pixels(img) -> np.ndarray:
    return img.planes if isinstance(img, ColorImage) else img


def _read(path):
    try:
        return read_image(path)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read {path}: {exc}") from exc


def _write(path, img):
    try:
        write_image(path, img)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot write {path}: {exc}") from exc


def _params(args):
    overrides = dict(
        patch_side=args.patch_side, window=args.window, m1=args.m1, q1=args.q1,
        m2=args.m2, q2=args.q2, tau=args.tau, lam=args.lam,
        iterations=args.iterations, stride=args.stride,
        threshold_law=args.threshold_law,
    )
    if getattr(args, "sigma", None) is not None:
        overrides["sigma_override"] = args.sigma
    if getattr(args, "reestimate", False):
        overrides["reestimate_sigma_per_iter"] = True
    try:
        check_profile_sigma(args.profile, getattr(args, "sigma", None))
        return profile(args.profile, stage2_small=getattr(args, "stage2_small", False),
                       **overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _emit(rows: list[dict], fmt: str, out, extra: dict | None = None):
    """Print a list of flat records as text, CSV or versioned JSON."""
    if fmt == "json":
        doc = {"schema": REPORT_SCHEMA, "rows": rows}
        doc.update(extra or {})
        json.dump(doc, out, indent=2)
        out.write("\n")
        return
    if not rows:
        if fmt == "csv":
            out.write("\n")
        return
    keys = list(rows[0])
    if fmt == "csv":
        writer = csv.DictWriter(out, fieldnames=keys, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return
    for row in rows:
        out.write("  ".join(f"{k}={_fmt(v)}" for k, v in row.items()) + "\n")


def _fmt(v):
    return f"{v:.4f}" if isinstance(v, float) else str(v)


def cmd_denoise(args) -> int:
    p = _params(args)
    img = _read(args.input)
    result = denoise(img, p, workers=args.workers)
    _write(args.output, result.output)
    if args.basic:
        _write(args.basic, result.basic)
    row = {"input": str(args.input), "mode": "non-blind" if p.sigma_override is not None else "blind"}
    for ch, s in enumerate(result.sigma_255):
        row[f"sigma_{ch}"] = round(s, 4)
    row.update({f"t_{k}": round(v, 3) for k, v in result.timings.items()})
    _emit([row], args.report_format, sys.stdout, {"params": p.as_dict()})
    return 0


def cmd_estimate(args) -> int:
    p = _params(args)
    img = _read(args.input)
    if isinstance(img, ColorImage):
        planes = rgb_to_ycbcr(img).planes
        names = ["Y", "Cb", "Cr"]
    else:
        planes = img[None]
        names = ["gray"]
    estimates = estimate_channels(planes, planes[0], p, workers=args.workers)
    for name, est in zip(names, estimates):
        print(f"{name},{est.sigma_255:.2f}")
    print(f"global,{np.mean([e.sigma_255 for e in estimates]):.2f}")
    if args.csv:
        coords = estimates[0].coords
        try:
            with open(args.csv, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["row", "col"] + [f"sigma_{n}" for n in names])
                for i, (r, c) in enumerate(coords[:, 0]):
                    writer.writerow([int(r), int(c)] + [f"{255 * e.sigma_locals[i]:.6f}" for e in estimates])
        except OSError as exc:
            raise CliError(f"cannot write {args.csv}: {exc}") from exc
    return 0


def cmd_add_noise(args) -> int:
    img = _read(args.input)
    if isinstance(img, ColorImage):
        noisy = ColorImage(add_awgn(img.planes, args.sigma, args.seed), ColorSpace.RGB)
    else:
        noisy = add_awgn(img, args.sigma, args.seed)
    _write(args.output, noisy)
    return 0


def _luma(img) -> np.ndarray:
    if isinstance(img, ColorImage):
        return rgb_to_ycbcr(img).planes[0]
    return img


def cmd_metrics(args) -> int:
    ref, test = _read(args.reference), _read(args.test)
    try:
        rep = metrics(_pixels(ref), _pixels(test))
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    _emit([{"psnr": round(rep.psnr, 4), "ssim": round(rep.ssim, 4)}], args.report_format, sys.stdout)
    return 0


def cmd_nss_stats(args) -> int:
    plane = _luma(_read(args.input))
    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create {out_dir}: {exc}") from exc
    stem = Path(args.input).stem
    for mode in ("patch", "pixel"):
        counts, edges, apd = apd_statistics(
            plane, mode, patch_side=args.patch_side, window=args.window, m=args.m,
            q=args.q, stride=args.stride, workers=args.workers)
        target = out_dir / f"{stem}_{mode}.csv"
        try:
            target.write_text(apd_csv(counts, edges, apd))
        except OSError as exc:
            raise CliError(f"cannot write {target}: {exc}") from exc
        print(f"{mode},apd,{apd:.6f}")
    return 0


def find_pairs(directory: Path):
    """Pair ``<name>_noisy.*`` with ``<name>_mean.*``; return ``(pairs, unpaired)``."""
    noisy, mean = {}, {}
    for f in sorted(directory.iterdir()):
        if f.suffix.lower() not in IMAGE_SUFFIXES:
            continue
        if f.stem.endswith("_noisy"):
            noisy[f.stem[:-6]] = f
        elif f.stem.endswith("_mean"):
            mean[f.stem[:-5]] = f
    pairs = [(name, noisy[name], mean[name]) for name in sorted(noisy) if name in mean]
    unpaired = sorted([noisy[k] for k in noisy if k not in mean] + [mean[k] for k in mean if k not in noisy])
    return pairs, unpaired


def cmd_bench(args) -> int:
    directory = Path(args.directory)
    if not directory.is_dir():
        raise CliError(f"{directory} is not a directory")
    pairs, unpaired = find_pairs(directory)
    for f in unpaired:
        _warn(f"skipping unpaired file {f}")
    if not pairs:
        _warn(f"no <name>_noisy / <name>_mean pairs found in {directory}")
    p = _params(args) if pairs else None
    rows = []
    for name, noisy_path, mean_path in pairs:
        noisy, ref = _read(noisy_path), _read(mean_path)
        start = time.perf_counter()
        if args.no_denoise:
            out = noisy
        else:
            out = denoise(noisy, p, workers=args.workers).output
        elapsed = time.perf_counter() - start
        try:
            rep = metrics(_pixels(ref), _pixels(out))
        except ValueError as exc:
            raise CliError(f"{name}: {exc}") from exc
        rows.append({"image": name, "psnr": round(rep.psnr, 4), "ssim": round(rep.ssim, 4),
                     "seconds": round(elapsed, 3)})
    summary = {}
    if rows:
        summary = {"mean_psnr": round(float(np.mean([r["psnr"] for r in rows])), 4),
                   "mean_ssim": round(float(np.mean([r["ssim"] for r in rows])), 4),
                   "mean_seconds": round(float(np.mean([r["seconds"] for r in rows])), 3)}
    buf = io.StringIO()
    _emit(rows, args.report_format, buf, {"summary": summary})
    if rows and args.report_format != "json":
        if args.report_format == "csv":
            buf.write(f"average,{summary['mean_psnr']},{summary['mean_ssim']},{summary['mean_seconds']}\n")
        else:
            buf.write("average  " + "  ".join(f"{k}={v}" for k, v in summary.items()) + "\n")
    sys.stdout.write(buf.getvalue())
    return 0


def _add_param_flags(sp):
    sp.add_argument("--profile", default="real", choices=sorted(PROFILES) + ["custom"],
                    help="parameter profile (default: real)")
    g = sp.add_argument_group("parameter overrides")
    g.add_argument("--patch-side", type=int, help="patch side length (sqrt(n))")
    g.add_argument("--window", type=int, help="search window side W")
    g.add_argument("--m1", type=int)
    g.add_argument("--q1", type=int)
    g.add_argument("--m2", type=int)
    g.add_argument("--q2", type=int)
    g.add_argument("--tau", type=float)
    g.add_argument("--lam", type=float, help="re-injection weight lambda")
    g.add_argument("--iterations", type=int, help="stage-1 iterations K")
    g.add_argument("--stride", type=int, help="reference patch stride")
    g.add_argument("--threshold-law", choices=["sigma", "sigma2"])


def _add_workers(sp):
    sp.add_argument("--workers", type=int, default=None,
                    help="worker threads, 0 = one per CPU (default: $NLH_WORKERS or 1)")


def _add_format(sp):
    sp.add_argument("--report-format", choices=["text", "csv", "json"], default="text")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nlh", description="Blind NLH image denoising.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("denoise", help="denoise an image")
    sp.add_argument("input")
    sp.add_argument("output")
    _add_param_flags(sp)
    sp.add_argument("--sigma", type=float, help="known noise level (0-255); disables estimation")
    sp.add_argument("--basic", help="also write the stage-1 estimate here")
    sp.add_argument("--stage2-small", action="store_true", help="use q2=4, m2=16 in stage 2")
    sp.add_argument("--reestimate", action="store_true",
                    help="re-estimate sigma at every stage-1 iteration")
    _add_workers(sp)
    _add_format(sp)
    sp.set_defaults(func=cmd_denoise)

    sp = sub.add_parser("estimate-noise", help="print the estimated noise level")
    sp.add_argument("input")
    _add_param_flags(sp)
    sp.add_argument("--csv", help="write the local levels of every patch group here")
    _add_workers(sp)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("add-noise", help="add white Gaussian noise")
    sp.add_argument("input")
    sp.add_argument("output")
    sp.add_argument("--sigma", type=float, required=True, help="noise std (0-255)")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_add_noise)

    sp = sub.add_parser("metrics", help="PSNR and SSIM of test against reference")
    sp.add_argument("reference")
    sp.add_argument("test")
    _add_format(sp)
    sp.set_defaults(func=cmd_metrics)

    sp = sub.add_parser("nss-stats", help="patch vs pixel APD histograms")
    sp.add_argument("input")
    sp.add_argument("--out-dir", default=".", help="where <stem>_patch.csv and <stem>_pixel.csv go")
    sp.add_argument("--patch-side", type=int, default=8)
    sp.add_argument("--window", type=int, default=39)
    sp.add_argument("--m", type=int, default=16)
    sp.add_argument("--q", type=int, default=4)
    sp.add_argument("--stride", type=int, default=1)
    _add_workers(sp)
    sp.set_defaults(func=cmd_nss_stats)

    sp = sub.add_parser("bench", help="denoise <name>_noisy.* and score against <name>_mean.*")
    sp.add_argument("directory")
    _add_param_flags(sp)
    sp.add_argument("--no-denoise", action="store_true", help="score the noisy inputs as-is")
    _add_workers(sp)
    _add_format(sp)
    sp.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        if hasattr(args, "workers"):
            args.workers = resolve_workers(args.workers)
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (CliError, ValueError) as exc:
        print(f"nlh: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
