"""Command line entry point (``mstld``)."""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from . import bench
from . import multiscale as ms
from .datasets import CLASSIC, classic_dir, fetch_classic, find_image
from .imgcore import read_image, write_image
from .tld import TLD, TldConfig


def _tld_config(args) -> TldConfig:
    kw = {"deterministic": args.deterministic}
    if args.patch is not None:
        kw["p"] = args.patch
    if args.c is not None:
        kw["c"] = args.c
    if args.iters is not None:
        kw["iters"] = args.iters
    return TldConfig(**kw)


def cmd_denoise(args) -> int:
    from .imgcore import NoiseSpec, add_gaussian_noise, psnr, ssim

    img = read_image(args.input)
    cfg = ms.MsConfig(J=args.scales, K=args.mix_scales or args.scales, literal=args.literal)
    d = TLD(_tld_config(args))
    noisy = img
    if args.add_noise:
        noisy = add_gaussian_noise(img, NoiseSpec(args.sigma, args.seed))
    t0 = time.perf_counter()
    out = ms.run_method(args.method, noisy, args.sigma, cfg, d, args.version)
    elapsed = time.perf_counter() - t0
    write_image(args.output, out)
    msg = f"{args.method}: {elapsed:.1f} s -> {args.output}"
    if args.add_noise:
        msg += f"  psnr {psnr(img, noisy):.2f} -> {psnr(img, out):.2f} dB, ssim {ssim(img, out):.4f}"
    print(msg)
    return 0


def cmd_bench_run(args) -> int:
    spec = bench.load_spec(args.spec)
    table = bench.run_experiment(
        spec, progress=lambda r: print(f"  {r.image} sigma={r.sigma:g} {r.method}: "
                                       f"{r.psnr:.2f} dB {r.runtime:.1f} s", flush=True))
    print(table.format_text())
    print(f"reports written to {spec.output}")
    return 0


def cmd_bench_checkerboard(args) -> int:
    cfg = ms.MsConfig(J=args.scales, K=args.scales)
    res = bench.checkerboard_study(args.sigma, args.seed, TLD(_tld_config(args)), cfg)
    path = bench.write_rows(Path(args.out) / f"checkerboard_s{args.sigma:g}.csv", res.header(), res.rows())
    print(",".join(res.header()))
    for row in res.rows():
        print(",".join(f"{v:.3f}" if isinstance(v, float) else str(v) for v in row))
    print(f"written to {path}")
    return 0


def _sweep_image(args):
    if args.image:
        return Path(args.image).stem, read_image(args.image)
    found = fetch_classic(classic_dir())
    for name in CLASSIC:
        if found.get(name) is not None:
            return name, read_image(find_image(classic_dir(), name))
    raise SystemExit("no image available; pass --image")


def cmd_bench_sweep(args) -> int:
    name, img = _sweep_image(args)
    res = bench.scale_sweep(img, args.sigma, args.max_scales, TLD(_tld_config(args)), args.seed, name)
    path = bench.write_rows(Path(args.out) / f"sweep_{name}_s{args.sigma:g}.csv", res.header(), res.table())
    print(f"{name} sigma={args.sigma:g}: single-scale {res.base_psnr:.2f} dB")
    print(",".join(res.header()))
    for row in res.table():
        print(",".join(f"{v:.3f}" if isinstance(v, float) else str(v) for v in row))
    print(f"written to {path}")
    return 0


def cmd_fetch(args) -> int:
    found = fetch_classic(args.dest)
    for name, path in found.items():
        print(f"{name:12s} {path if path else 'unavailable'}")
    return 0


def _add_tld_args(p):
    p.add_argument("--patch", type=int, help="patch side (default 11)")
    p.add_argument("--c", type=float, help="sparsity constant (default 1.04)")
    p.add_argument("--iters", type=int, help="learning iterations (default 12)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--deterministic", action="store_true", help="single-threaded BLAS")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mstld", description="Transform-learning denoising, single and multiscale.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("denoise", help="denoise one image")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--method", choices=ms.METHODS, default="mmtld")
    p.add_argument("--version", type=int, choices=(1, 2), default=2)
    p.add_argument("--scales", type=int, default=1, help="J")
    p.add_argument("--mix-scales", type=int, help="K (defaults to J)")
    p.add_argument("--literal", action="store_true", help="fmmtld: re-denoise every level it touches")
    p.add_argument("--add-noise", action="store_true",
                   help="treat the input as clean, add seeded noise first and report PSNR")
    _add_tld_args(p)
    p.set_defaults(func=cmd_denoise)

    b = sub.add_parser("bench", help="experiments").add_subparsers(dest="bench_command", required=True)
    r = b.add_parser("run", help="run an experiment spec file")
    r.add_argument("spec")
    r.set_defaults(func=cmd_bench_run)

    c = b.add_parser("checkerboard", help="regional PSNR on the synthetic checkerboard")
    c.add_argument("--sigma", type=float, default=50.0)
    c.add_argument("--scales", type=int, default=1)
    c.add_argument("--out", default="reports")
    _add_tld_args(c)
    c.set_defaults(func=cmd_bench_checkerboard)

    s = b.add_parser("sweep", help="PSNR gain against the number of scales")
    s.add_argument("--max-scales", type=int, required=True)
    s.add_argument("--sigma", type=float, default=50.0)
    s.add_argument("--image", help="defaults to the first available classic image")
    s.add_argument("--out", default="reports")
    _add_tld_args(s)
    s.set_defaults(func=cmd_bench_sweep)

    f = sub.add_parser("fetch", help="download the redistributable classic test images")
    f.add_argument("--dest", default=None)
    f.set_defaults(func=cmd_fetch)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
