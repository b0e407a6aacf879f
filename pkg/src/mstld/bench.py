"""Experiment harness: seeded corruption, the method matrix and reports.

An experiment is described by a small key-value file::

    dataset = classic            # classic | csr | path to a directory
    sigmas  = 15, 25, 50
    methods = tld, mtld, mmtld, fmmtld(version=1), mmtld(J=2, K=2)
    seed    = 0
    output  = reports/run1
    tld.c   = 1.04               # any TldConfig field
    ms.J    = 1                  # any MsConfig field, default for all methods
    deterministic = true
    reuse   = true               # share identical denoiser calls across methods
    save_images = false

Noise for ``(image, sigma)`` is seeded with the first 8 bytes (little
endian) of ``blake2b(f"{seed}:{image}:{sigma:.17g}", digest_size=8)``, so
it is the same on every platform and independent of the method list.

Reports: ``results.csv`` (per image PSNR/SSIM, byte-stable across runs),
``summary.csv`` (means), ``runtimes.csv`` (wall-clock, machine dependent)
and ``report.txt``.
"""
from __future__ import annotations

import configparser
import csv
import hashlib
import json
import logging
import os
import re
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import multiscale as ms
from .datasets import load_dataset
from .imgcore import NoiseSpec, add_gaussian_noise, as_image, psnr, ssim, write_image, DimensionError
from .tld import TLD, TldConfig

log = logging.getLogger(__name__)

DEFAULT_SIGMAS = (15.0, 25.0, 50.0)
CHECKER_SIDES = (4, 8, 11, 16, 32)
RNG_NAME = "PCG64"


def derive_seed(base: int, image: str, sigma: float) -> int:
    """Platform-stable 64-bit seed for one (image, sigma) cell."""
    msg = f"{int(base)}:{image}:{float(sigma):.17g}".encode()
    return int.from_bytes(hashlib.blake2b(msg, digest_size=8).digest(), "little")


# --------------------------------------------------------------------------
# experiment description
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MethodSpec:
    """One column of the method matrix."""

    label: str
    composition: str
    version: int = 2
    denoiser: str = "tld"
    ms: ms.MsConfig = field(default_factory=ms.MsConfig)
    tld: TldConfig = field(default_factory=TldConfig)

    def __post_init__(self):
        if self.composition not in ms.METHODS:
            raise ValueError(f"unknown method {self.composition!r}; expected one of {', '.join(ms.METHODS)}")
        if self.version not in (1, 2):
            raise ValueError(f"version must be 1 or 2, got {self.version}")
        if self.denoiser not in ("tld", "identity"):
            raise ValueError(f"unknown denoiser {self.denoiser!r}")

    def make_denoiser(self):
        return TLD(self.tld) if self.denoiser == "tld" else ms.IdentityDenoiser()

    def run(self, img, sigma, d):
        return ms.run_method(self.composition, img, sigma, self.ms, d, self.version)

    def as_dict(self) -> dict:
        return {"label": self.label, "composition": self.composition, "version": self.version,
                "denoiser": self.denoiser, "ms": self.ms.as_dict(), "tld": self.tld.as_dict()}


@dataclass(frozen=True)
class ExperimentSpec:
    dataset: str
    methods: tuple[MethodSpec, ...]
    sigmas: tuple[float, ...] = DEFAULT_SIGMAS
    seed: int = 0
    output: str = "reports"
    reuse: bool = True
    save_images: bool = False

    def __post_init__(self):
        if not self.dataset:
            raise ValueError("dataset must be given")
        if not self.methods:
            raise ValueError("at least one method is required")
        if not self.sigmas:
            raise ValueError("sigma list is empty")
        if any(not s > 0 for s in self.sigmas):
            raise ValueError(f"sigmas must be positive, got {self.sigmas}")
        labels = [m.label for m in self.methods]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate method labels in {labels}")

    def config_hash(self) -> str:
        d = {"dataset": self.dataset, "sigmas": list(self.sigmas), "seed": self.seed,
             "methods": [m.as_dict() for m in self.methods]}
        return hashlib.blake2b(json.dumps(d, sort_keys=True).encode(), digest_size=8).hexdigest()


_METHOD_RE = re.compile(r"^\s*([A-Za-z0-9_]+)\s*(?:\((.*)\))?\s*$")
_SPLIT_RE = re.compile(r",(?![^()]*\))")


def _coerce(cls, name, value: str):
    """Convert ``value`` to the type of dataclass field ``name`` of ``cls``."""
    known = {f.name: f for f in fields(cls)}
    if name not in known:
        raise ValueError(f"unknown {cls.__name__} field {name!r}")
    default = getattr(cls(), name)
    v = value.strip()
    if isinstance(default, bool) or name in ("deterministic", "literal"):
        return _parse_bool(v)
    if isinstance(default, int) and not isinstance(default, bool):
        return int(v)
    if isinstance(default, float):
        return float(v)
    if v.lower() == "none":
        return None
    if name == "l0":
        return int(v)
    return v


def _parse_bool(v: str) -> bool:
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def parse_method(token: str, ms_cfg: ms.MsConfig, tld_cfg: TldConfig) -> MethodSpec:
    """``mmtld`` or ``mmtld(J=2, K=2, version=1, c=1.0)``."""
    m = _METHOD_RE.match(token)
    if not m:
        raise ValueError(f"cannot parse method {token!r}")
    comp, args = m.group(1), m.group(2)
    version, denoiser = 2, "tld"
    ms_kw, tld_kw = {}, {}
    if args:
        for item in args.split(","):
            if not item.strip():
                continue
            key, _, val = item.partition("=")
            key = key.strip()
            if key == "version":
                version = int(val)
            elif key == "denoiser":
                denoiser = val.strip()
            elif key in {f.name for f in fields(ms.MsConfig)}:
                ms_kw[key] = _coerce(ms.MsConfig, key, val)
            elif key in {f.name for f in fields(TldConfig)}:
                tld_kw[key] = _coerce(TldConfig, key, val)
            else:
                raise ValueError(f"unknown option {key!r} in method {token!r}")
    label = re.sub(r"\s+", "", token)
    return MethodSpec(label, comp, version, denoiser, replace(ms_cfg, **ms_kw), replace(tld_cfg, **tld_kw))


def parse_spec(text: str, base_dir=None) -> ExperimentSpec:
    """Parse the key-value experiment format (``#`` and ``;`` start comments)."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str
    cp.read_string("[experiment]\n" + text)
    kv = dict(cp["experiment"])
    tld_kw, ms_kw = {}, {}
    for key in [k for k in kv if k.startswith(("tld.", "ms."))]:
        prefix, _, name = key.partition(".")
        if prefix == "tld":
            tld_kw[name] = _coerce(TldConfig, name, kv.pop(key))
        else:
            ms_kw[name] = _coerce(ms.MsConfig, name, kv.pop(key))
    if "deterministic" in kv:
        tld_kw.setdefault("deterministic", _parse_bool(kv.pop("deterministic")))
    tld_cfg = TldConfig(**tld_kw)
    ms_cfg = ms.MsConfig(**ms_kw)
    methods = tuple(parse_method(t, ms_cfg, tld_cfg)
                    for t in _SPLIT_RE.split(kv.pop("methods", "")) if t.strip())
    sigmas = kv.pop("sigmas", None)
    sigmas = DEFAULT_SIGMAS if sigmas is None else tuple(float(s) for s in sigmas.split(",") if s.strip())
    output = kv.pop("output", "reports")
    dataset = kv.pop("dataset", "")
    if base_dir is not None:
        output = str(Path(base_dir) / output) if not Path(output).is_absolute() else output
        if dataset not in ("classic", "csr") and dataset and not Path(dataset).is_absolute():
            dataset = str(Path(base_dir) / dataset)
    spec = ExperimentSpec(dataset=dataset, methods=methods, sigmas=sigmas,
                          seed=int(kv.pop("seed", 0)), output=output,
                          reuse=_parse_bool(kv.pop("reuse", "true")),
                          save_images=_parse_bool(kv.pop("save_images", "false")))
    if kv:
        raise ValueError(f"unknown keys in experiment spec: {', '.join(sorted(kv))}")
    return spec


def load_spec(path) -> ExperimentSpec:
    path = Path(path)
    return parse_spec(path.read_text(encoding="utf-8"), base_dir=path.parent)


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------

@dataclass
class ResultRow:
    image: str
    sigma: float
    method: str
    psnr: float
    ssim: float
    runtime: float = 0.0


@dataclass
class ReportTable:
    dataset: str
    rows: list[ResultRow] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def methods(self) -> list[str]:
        return list(dict.fromkeys(r.method for r in self.rows))

    def sigmas(self) -> list[float]:
        return list(dict.fromkeys(r.sigma for r in self.rows))

    def select(self, method=None, sigma=None) -> list[ResultRow]:
        return [r for r in self.rows
                if (method is None or r.method == method) and (sigma is None or r.sigma == sigma)]

    def mean(self, method, sigma, metric="psnr") -> float:
        vals = [getattr(r, metric) for r in self.select(method, sigma)]
        if not vals:
            raise KeyError(f"no rows for {method} at sigma {sigma}")
        return float(np.mean(vals))

    def summary(self) -> list[dict]:
        out = []
        for sigma in self.sigmas():
            for m in self.methods():
                sel = self.select(m, sigma)
                out.append({"sigma": sigma, "method": m, "images": len(sel),
                            "psnr": self.mean(m, sigma), "ssim": self.mean(m, sigma, "ssim"),
                            "runtime": self.mean(m, sigma, "runtime")})
        return out

    def format_text(self) -> str:
        methods = self.methods()
        width = max(10, *(len(m) for m in methods)) + 2
        lines = [f"dataset: {self.dataset}"]
        lines += [f"{k}: {v}" for k, v in sorted(self.metadata.items())]
        for metric, fmt in (("psnr", "{:.2f}"), ("ssim", "{:.4f}"), ("runtime", "{:.1f}")):
            lines.append("")
            lines.append(f"mean {metric}" + ("" if metric != "runtime" else " (s)"))
            lines.append("sigma".ljust(8) + "".join(m.rjust(width) for m in methods))
            for sigma in self.sigmas():
                lines.append(f"{sigma:<8g}" + "".join(fmt.format(self.mean(m, sigma, metric)).rjust(width)
                                                      for m in methods))
        lines.append("")
        lines.append("per image psnr")
        for sigma in self.sigmas():
            for img in dict.fromkeys(r.image for r in self.select(sigma=sigma)):
                vals = {r.method: r.psnr for r in self.select(sigma=sigma) if r.image == img}
                lines.append(f"{sigma:<8g}{img:<14}" + "".join(f"{vals.get(m, float('nan')):.2f}".rjust(width)
                                                              for m in methods))
        return "\n".join(lines) + "\n"

    def write(self, directory) -> dict[str, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = {k: directory / f"{k}.csv" for k in ("results", "summary", "runtimes")}
        paths["report"] = directory / "report.txt"
        _write_csv(paths["results"], ["dataset", "image", "sigma", "method", "psnr", "ssim"],
                   [[self.dataset, r.image, _num(r.sigma), r.method, _num(r.psnr), _num(r.ssim)]
                    for r in self.rows])
        _write_csv(paths["summary"], ["sigma", "method", "images", "mean_psnr", "mean_ssim"],
                   [[_num(s["sigma"]), s["method"], s["images"], _num(s["psnr"]), _num(s["ssim"])]
                    for s in self.summary()])
        _write_csv(paths["runtimes"], ["image", "sigma", "method", "runtime_s"],
                   [[r.image, _num(r.sigma), r.method, _num(r.runtime)] for r in self.rows])
        paths["report"].write_text(self.format_text(), encoding="utf-8")
        return paths


def _num(x) -> str:
    # repr round-trips float64 exactly
    return repr(float(x))


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def read_report(directory) -> ReportTable:
    """Rebuild a :class:`ReportTable` (without metadata) from a report directory."""
    directory = Path(directory)
    with open(directory / "results.csv", newline="", encoding="utf-8") as fh:
        results = list(csv.DictReader(fh))
    runtimes = {}
    rt_path = directory / "runtimes.csv"
    if rt_path.exists():
        with open(rt_path, newline="", encoding="utf-8") as fh:
            for r in csv.DictReader(fh):
                runtimes[(r["image"], float(r["sigma"]), r["method"])] = float(r["runtime_s"])
    table = ReportTable(results[0]["dataset"] if results else "")
    for r in results:
        key = (r["image"], float(r["sigma"]), r["method"])
        table.rows.append(ResultRow(key[0], key[1], key[2], float(r["psnr"]), float(r["ssim"]),
                                    runtimes.get(key, 0.0)))
    return table


# --------------------------------------------------------------------------
# running
# --------------------------------------------------------------------------

class _Timed:
    """Cache wrapper that also remembers what each cached call cost.

    On a hit the original cost is charged back, so reported runtimes match
    what the method would take without sharing.
    """

    def __init__(self, inner):
        self.cache = ms.CachedDenoiser(inner)
        self.name = inner.name
        self.charged = 0.0
        self._cost = {}

    def denoise(self, img, sigma):
        key = self.cache._key(img, sigma)
        if key in self._cost and key in self.cache._store:
            self.charged += self._cost[key]
            return self.cache.denoise(img, sigma)
        t0 = time.perf_counter()
        out = self.cache.denoise(img, sigma)
        self._cost[key] = time.perf_counter() - t0
        return out


def _environment() -> dict:
    from .kernels import _pick
    try:
        from threadpoolctl import threadpool_info
        threads = sorted({i.get("num_threads") for i in threadpool_info()} - {None})
    except Exception:  # pragma: no cover - metadata only
        threads = []
    return {"backend": _pick(None), "cpu_count": os.cpu_count(), "blas_threads": threads, "rng": RNG_NAME}


def run_experiment(spec: ExperimentSpec, progress=None, write: bool = True) -> ReportTable:
    label, images = load_dataset(spec.dataset)
    table = ReportTable(label, metadata={"config_hash": spec.config_hash(), "seed": spec.seed,
                                         "checkerboard_sides": ",".join(map(str, CHECKER_SIDES)),
                                         **_environment()})
    out_dir = Path(spec.output)
    for sigma in spec.sigmas:
        for name, img in images:
            noisy = add_gaussian_noise(img, NoiseSpec(sigma, derive_seed(spec.seed, name, sigma)))
            shared = {}
            for m in spec.methods:
                if spec.reuse:
                    key = (m.denoiser, m.tld)
                    if key not in shared:
                        shared[key] = _Timed(m.make_denoiser())
                    d = shared[key]
                    before = d.charged
                else:
                    d = m.make_denoiser()
                t0 = time.perf_counter()
                out = m.run(noisy, sigma, d)
                runtime = time.perf_counter() - t0
                if spec.reuse:
                    runtime += d.charged - before
                row = ResultRow(name, float(sigma), m.label, psnr(img, out), ssim(img, out), runtime)
                table.rows.append(row)
                if spec.save_images:
                    (out_dir / "images").mkdir(parents=True, exist_ok=True)
                    write_image(out_dir / "images" / f"{name}_s{sigma:g}_{m.label}.png", out)
                if progress is not None:
                    progress(row)
                log.info("%s sigma=%g %s: %.2f dB (%.1f s)", name, sigma, m.label, row.psnr, runtime)
    if write:
        table.write(out_dir)
    return table


# --------------------------------------------------------------------------
# checkerboard study
# --------------------------------------------------------------------------

def checkerboard_regions(sides=CHECKER_SIDES, region_height: int = 96, width: int = 352):
    """``[(side, row slice)]`` for the stacked horizontal regions."""
    return [(t, slice(i * region_height, (i + 1) * region_height)) for i, t in enumerate(sides)]


def make_checkerboard(sides=CHECKER_SIDES, region_height: int = 96, width: int = 352) -> np.ndarray:
    """Horizontal bands of 0/255 checkerboards, one tile side per band."""
    if region_height < 1 or width < 1 or not sides:
        raise ValueError("region_height, width and sides must be positive/non-empty")
    rows = []
    c = np.arange(width)
    r = np.arange(region_height)
    for t in sides:
        rows.append(255.0 * (((r[:, None] // t) + (c[None, :] // t)) % 2))
    return np.vstack(rows)


def region_masks(shape, regions) -> list[np.ndarray]:
    """Turn row slices, ``(row slice, col slice)`` pairs or masks into boolean masks."""
    out = []
    for reg in regions:
        if isinstance(reg, np.ndarray):
            m = reg.astype(bool)
            if m.shape != tuple(shape):
                raise DimensionError(f"mask shape {m.shape} != image shape {tuple(shape)}")
        else:
            m = np.zeros(shape, dtype=bool)
            m[reg] = True
        out.append(m)
    return out


def regional_psnr(ref, test, regions, peak: float = 255.0) -> list[float]:
    """PSNR inside each region; the regions must partition the image."""
    ref, test = as_image(ref), as_image(test)
    if ref.shape != test.shape:
        raise DimensionError(f"shape mismatch {ref.shape} vs {test.shape}")
    masks = region_masks(ref.shape, regions)
    cover = np.sum(masks, axis=0) if masks else np.zeros(ref.shape)
    if np.any(cover > 1):
        raise ValueError("regions overlap")
    if np.any(cover == 0):
        raise ValueError("regions do not cover the image")
    sq = (ref - test) ** 2
    out = []
    for m in masks:
        e = float(sq[m].mean())
        out.append(float("inf") if e == 0 else float(10.0 * np.log10(peak * peak / e)))
    return out


@dataclass
class CheckerboardResult:
    sides: tuple[int, ...]
    psnr: dict[str, list[float]]

    def gain(self, method, base="tld") -> list[float]:
        return [a - b for a, b in zip(self.psnr[method], self.psnr[base])]

    def rows(self) -> list[list]:
        methods = list(self.psnr)
        out = []
        for i, t in enumerate(self.sides):
            out.append([t] + [self.psnr[m][i] for m in methods]
                       + [self.psnr[m][i] - self.psnr["tld"][i] for m in methods if m != "tld"])
        return out

    def header(self) -> list[str]:
        methods = list(self.psnr)
        return ["tile_side"] + [f"psnr_{m}" for m in methods] + [f"gain_{m}" for m in methods if m != "tld"]


def checkerboard_study(sigma: float = 50.0, seed: int = 0, d=None, cfg: ms.MsConfig | None = None,
                       methods=("tld", "mtld", "mmtld", "fmmtld"), sides=CHECKER_SIDES) -> CheckerboardResult:
    img = make_checkerboard(sides)
    regions = [sl for _, sl in checkerboard_regions(sides)]
    noisy = add_gaussian_noise(img, NoiseSpec(sigma, derive_seed(seed, "checkerboard", sigma)))
    d = ms.CachedDenoiser(d if d is not None else TLD())
    res = {}
    for m in methods:
        res[m] = regional_psnr(img, ms.run_method(m, noisy, sigma, cfg, d), regions)
    return CheckerboardResult(tuple(sides), res)


# --------------------------------------------------------------------------
# scale sweep
# --------------------------------------------------------------------------

@dataclass
class SweepResult:
    base_psnr: float
    rows: list[dict]   # {"J": j, "mtld": gain, "mmtld": gain, "fmmtld": gain}

    def header(self) -> list[str]:
        return ["J", "gain_mtld", "gain_mmtld", "gain_fmmtld"]

    def table(self) -> list[list]:
        return [[r["J"], r["mtld"], r["mmtld"], r["fmmtld"]] for r in self.rows]


def scale_sweep(img, sigma: float, max_j: int, d=None, seed: int = 0, name: str = "image") -> SweepResult:
    """PSNR gain of each composition over the single-scale denoiser at J = K = 1..max_j."""
    if max_j < 1:
        raise ValueError(f"max_j must be >= 1, got {max_j}")
    img = as_image(img)
    noisy = add_gaussian_noise(img, NoiseSpec(sigma, derive_seed(seed, name, sigma)))
    d = ms.CachedDenoiser(d if d is not None else TLD())
    base = psnr(img, ms.run_method("tld", noisy, sigma, None, d))
    rows = []
    for j in range(1, max_j + 1):
        cfg = ms.MsConfig(J=j, K=j)
        row = {"J": j}
        for m in ("mtld", "mmtld", "fmmtld"):
            p = psnr(img, ms.run_method(m, noisy, sigma, cfg, d))
            # identical outputs should give an exact zero, including inf - inf
            row[m] = 0.0 if p == base else p - base
        rows.append(row)
    return SweepResult(base, rows)


def write_rows(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(path, header, [[_num(v) if isinstance(v, float) else v for v in r] for r in rows])
    return path
