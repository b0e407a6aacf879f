"""Test-image sets: the classic grayscale set and user directories.

The classic images are not vendored. :func:`fetch_classic` pulls the ones
that are redistributed inside pinned PyPI archives, checks SHA-256 of both the
archive and the member, and writes 8-bit PGMs. Images with no redistributable
source (fingerprint, hill, couple, pentagon, man) can be dropped into the
classic directory by hand as ``<name>.png`` or ``<name>.pgm``.
"""
from __future__ import annotations

import hashlib
import io
import logging
import os
import tarfile
import urllib.request
import zipfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .imgcore import read_image, write_image

log = logging.getLogger(__name__)

CLASSIC = ("barbara", "boat", "cameraman", "fingerprint", "hill", "lena", "couple", "pentagon", "man")
IMAGE_SUFFIXES = (".pgm", ".png", ".f64")
_PYPI = "https://files.pythonhosted.org/packages/"


@dataclass(frozen=True)
class Source:
    url: str
    archive_sha256: str
    member: str
    member_sha256: str
    convert: Callable[[bytes], np.ndarray]


def _png_gray(data: bytes) -> np.ndarray:
    from PIL import Image
    with Image.open(io.BytesIO(data)) as im:
        return np.asarray(im.convert("L"), dtype=np.float64)


def _npz_gray(data: bytes) -> np.ndarray:
    with np.load(io.BytesIO(data)) as z:
        return np.asarray(z[z.files[0]], dtype=np.float64)


def _barbara(data: bytes) -> np.ndarray:
    # 702x574 colour frame -> luma, centred 512x512 crop
    a = _png_gray(data)
    r0 = (a.shape[0] - 512) // 2
    c0 = (a.shape[1] - 512) // 2
    return a[r0:r0 + 512, c0:c0 + 512]


_SPAMS = (_PYPI + "e4/26/7a47021754e8020ac82c1ba8d0b719198ec28cdc922152caea16b7512864/spams-2.6.5.4.tar.gz",
          "4c15b01268b15d20dca1e29b04d08268775ad7aae5883891454de110b571c9a7")
_PYWT = (_PYPI + "48/45/bfaaab38545a33a9f06c61211fc3bea2e23e8a8e00fedeb8e57feda722ff/pywavelets-1.8.0.tar.gz",
         "f3800245754840adc143cbc29534a1b8fc4b8cff6e9d403326bd52b7bb5c35aa")
_SPORCO = (_PYPI + "40/55/0e34478be4cd365a85853f82e3d4f2b09da9d20b27c98649c1448e21d7c5/"
           "sporco-0.2.2.post1-py3-none-any.whl",
           "a5b600be67a062e8efc5e90484cd7043c72f04f84209f435ae711e4fd33f87f8")

SOURCES = {
    "boat": Source(*_SPAMS, "spams-2.6.5.4/spams/data/boat.png",
                   "18bea4de1634456f5791d16301863fc974401d144cd6afb86f09a6be4620fe54", _png_gray),
    "lena": Source(*_SPAMS, "spams-2.6.5.4/spams/data/lena.png",
                   "9cbb1d0874d97d38f8da91ec3f7aef5612ac7eb10eea7cf22c5dbd6eb6f8c255", _png_gray),
    "cameraman": Source(*_PYWT, "pywavelets-1.8.0/pywt/data/camera.npz",
                        "2be8195e9680ccb3c804fee19ca0b69a097eae9c9b2ab97474c7f1438171f074", _npz_gray),
    "barbara": Source(*_SPORCO, "sporco/data/barbara.png",
                      "61ce3bead097f17d7359b5466975b91938f5ba03822c3771707e42891576842b", _barbara),
}


def data_root() -> Path:
    return Path(os.environ.get("MSTLD_DATA", Path.cwd() / "data"))


def classic_dir() -> Path:
    return data_root() / "classic"


def _sha(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _download(url: str, sha: str, cache: Path) -> bytes:
    target = cache / url.rsplit("/", 1)[-1]
    if target.exists():
        data = target.read_bytes()
        if _sha(data) == sha:
            return data
    log.info("downloading %s", url)
    with urllib.request.urlopen(url, timeout=120) as resp:
        data = resp.read()
    if _sha(data) != sha:
        raise IOError(f"checksum mismatch for {url}")
    cache.mkdir(parents=True, exist_ok=True)
    target.write_bytes(data)
    return data


def _member(archive: bytes, url: str, name: str) -> bytes:
    if url.endswith(".whl") or url.endswith(".zip"):
        with zipfile.ZipFile(io.BytesIO(archive)) as z:
            return z.read(name)
    with tarfile.open(fileobj=io.BytesIO(archive)) as t:
        return t.extractfile(name).read()


def fetch_classic(dest=None, names=CLASSIC) -> dict:
    """Materialise what can be fetched; returns ``{name: path or None}``."""
    dest = Path(dest) if dest is not None else classic_dir()
    dest.mkdir(parents=True, exist_ok=True)
    cache = dest / ".cache"
    found = {}
    for name in names:
        existing = find_image(dest, name)
        if existing is not None:
            found[name] = existing
            continue
        src = SOURCES.get(name)
        if src is None:
            log.warning("%s: no pinned public source; place %s.png in %s", name, name, dest)
            found[name] = None
            continue
        data = _member(_download(src.url, src.archive_sha256, cache), src.url, src.member)
        if _sha(data) != src.member_sha256:
            raise IOError(f"{name}: checksum mismatch for {src.member}")
        path = dest / f"{name}.pgm"
        write_image(path, src.convert(data))
        found[name] = path
    return found


def find_image(directory, name: str):
    for suffix in IMAGE_SUFFIXES:
        path = Path(directory) / f"{name}{suffix}"
        if path.exists():
            return path
    return None


def list_images(directory) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"dataset directory {directory} does not exist")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def load_dataset(dataset: str) -> tuple[str, list[tuple[str, np.ndarray]]]:
    """Resolve ``classic``, ``csr`` or a directory to ``(label, [(name, image)])``.

    The label records which members were actually available, so a partial
    classic set is never reported as the full one.
    """
    if dataset == "classic":
        d = classic_dir()
        if d.is_dir():
            present = [n for n in CLASSIC if find_image(d, n) is not None]
        else:
            present = []
        if len(present) < len(CLASSIC):
            fetch_classic(d)
            present = [n for n in CLASSIC if find_image(d, n) is not None]
        if not present:
            raise FileNotFoundError("no classic images available")
        missing = [n for n in CLASSIC if n not in present]
        label = "classic" if not missing else f"classic[{len(present)}/{len(CLASSIC)}: missing {','.join(missing)}]"
        return label, [(n, read_image(find_image(d, n))) for n in present]
    if dataset == "csr":
        d = data_root() / "csr"
        if not d.is_dir() or not list_images(d):
            raise FileNotFoundError(f"CSR images not found in {d}; pass a custom directory instead")
        return "csr", [(p.stem, read_image(p)) for p in list_images(d)]
    d = Path(dataset)
    paths = list_images(d)
    if not paths:
        raise FileNotFoundError(f"no images in {d}")
    return f"custom:{d.name}", [(p.stem, read_image(p)) for p in paths]
