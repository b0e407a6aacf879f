"""Single-scale denoising by sparsifying transform learning.

Patches are coded by a learned square transform ``W``: alternating exact
sparse coding (hard thresholding of ``W @ Y``) and the closed-form transform
update, followed by a per-patch variable sparsity pass whose stopping rule is
``||y_i - W^-1 x_i||^2 <= n c^2 sigma^2``.
"""
from __future__ import annotations

import contextlib
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg
from scipy.fft import dct

from . import kernels
from .imgcore import DimensionError, aggregate_patches, as_image, extract_patches, write_raw

log = logging.getLogger(__name__)


class TransformUpdateError(RuntimeError):
    pass


@dataclass(frozen=True)
class TldConfig:
    p: int = 11
    c: float = 1.04
    lambda0: float = 0.031
    mu: float = 1.0
    iters: int = 12
    l0: int | None = None   # None -> round(p*p / 10)
    deterministic: bool = False
    backend: str | None = None
    dump_dir: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.p < 2:
            raise ValueError(f"patch side must be >= 2, got {self.p}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if self.iters < 1:
            raise ValueError(f"iters must be >= 1, got {self.iters}")
        if self.l0 is not None and not 1 <= self.l0 <= self.p * self.p:
            raise ValueError(f"l0 must lie in [1, {self.p * self.p}], got {self.l0}")

    @property
    def n(self) -> int:
        return self.p * self.p

    @property
    def sparsity(self) -> int:
        return self.l0 if self.l0 is not None else max(1, int(round(self.n / 10)))

    def as_dict(self) -> dict:
        d = asdict(self)
        d["l0"] = self.sparsity
        d.pop("dump_dir")
        return d


@dataclass
class SparseCodes:
    X: np.ndarray
    sizes: np.ndarray


def dct_transform(p: int) -> np.ndarray:
    """Orthonormal 2-D DCT acting on column-major vectorised p x p patches."""
    d = dct(np.eye(p), norm="ortho", axis=0)
    return np.kron(d, d)


def sparse_code(W, Y, l, backend=None) -> SparseCodes:
    """Keep the ``l`` (scalar or per-column) largest magnitudes of ``W @ Y``."""
    W = np.asarray(W, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n = W.shape[0]
    levels = np.broadcast_to(np.clip(np.asarray(l, dtype=np.int64), 0, n), (Y.shape[1],))
    X = kernels.threshold_columns(W @ Y, levels, backend=backend)
    return SparseCodes(X, levels.copy())


def regularizer_weight(Y, lambda0: float) -> float:
    """``lambda0 * ||Y||_F^2``: keeps the two objective terms on the same scale."""
    Y = np.asarray(Y)
    return float(lambda0 * np.einsum("ij,ij->", Y, Y))


def learning_objective(W, Y, X, lam: float, mu: float) -> float:
    """``||W Y - X||_F^2 + lam * (-log|det W| + mu ||W||_F^2)``."""
    R = W @ Y - X
    _, logdet = np.linalg.slogdet(W)
    return float(np.einsum("ij,ij->", R, R) + lam * (-logdet + mu * np.sum(W * W)))


def transform_update(Y, X, lam: float, mu: float, gram=None) -> np.ndarray:
    """Exact minimiser over W of :func:`learning_objective` for fixed X.

    With ``Y Y^T + lam mu I = L L^T`` and ``L^-1 Y X^T = Q S R^T``:
    ``W = 1/2 R (S + (S^2 + 2 lam I)^1/2) Q^T L^-1``.
    """
    Y = np.asarray(Y, dtype=float)
    X = np.asarray(X, dtype=float)
    if not lam > 0 or not mu > 0:
        raise TransformUpdateError(f"need lam > 0 and mu > 0 (got {lam}, {mu})")
    n = Y.shape[0]
    if gram is None:
        gram = Y @ Y.T
    try:
        L = linalg.cholesky(gram + lam * mu * np.eye(n), lower=True)
        Linv = linalg.solve_triangular(L, np.eye(n), lower=True)
        Q, s, Rt = linalg.svd(Linv @ (Y @ X.T), lapack_driver="gesdd")
    except (linalg.LinAlgError, ValueError) as exc:
        raise TransformUpdateError(f"closed-form transform update failed: {exc}") from exc
    W = 0.5 * (Rt.T * (s + np.sqrt(s * s + 2.0 * lam))) @ Q.T @ Linv
    if not np.all(np.isfinite(W)):
        raise TransformUpdateError("transform update produced non-finite entries")
    return W


def variable_sparsity_update(W, Y, sigma: float, c: float, backend=None):
    """Grow each patch's support until its residual meets ``n c^2 sigma^2``.

    Returns ``(U, codes)`` with ``U[:, i] = W^-1 codes.X[:, i]``.
    """
    W = np.asarray(W, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n = W.shape[0]
    try:
        Winv = np.linalg.inv(W)
    except np.linalg.LinAlgError as exc:
        raise TransformUpdateError(f"transform is singular: {exc}") from exc
    Z = W @ Y
    bound = n * c * c * sigma * sigma
    resid, sizes = kernels.grow_supports(Z, Winv, Y, bound, backend=backend)
    U = Y - resid
    X = kernels.threshold_columns(Z, sizes, backend=backend)
    return U, SparseCodes(X, sizes)


@dataclass
class LearnResult:
    W: np.ndarray
    lam: float
    objective: list = field(default_factory=list)


def learn_transform(Y, cfg: TldConfig, W0=None, track: bool = False, backend=None) -> LearnResult:
    """Alternate sparse coding at fixed sparsity with transform updates.

    With ``track`` the learning objective is recorded after every half-step
    (coding, update, coding, update, ...).
    """
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[0]
    W = dct_transform(cfg.p) if W0 is None else np.array(W0, dtype=float)
    if W.shape != (n, n):
        raise DimensionError(f"initial transform {W.shape} does not match patch dimension {n}")
    lam = regularizer_weight(Y, cfg.lambda0)
    res = LearnResult(W, lam)
    if lam == 0.0:
        return res  # flat input: nothing to learn
    gram = Y @ Y.T
    dump = Path(cfg.dump_dir) if cfg.dump_dir else None
    if dump is not None:
        dump.mkdir(parents=True, exist_ok=True)

    def objective(Z, X):
        R = Z - X
        _, logdet = np.linalg.slogdet(W)
        return float(np.einsum("ij,ij->", R, R) + lam * (-logdet + cfg.mu * np.sum(W * W)))

    Z = W @ Y
    for it in range(cfg.iters):
        if it > 0 and track:
            res.objective.append(objective(Z, X))
        X = kernels.threshold_columns(Z, cfg.sparsity, backend=backend)
        if track:
            res.objective.append(objective(Z, X))
        W = transform_update(Y, X, lam, cfg.mu, gram=gram)
        Z = W @ Y
        if dump is not None:
            write_raw(dump / f"W_iter{it + 1:03d}.f64", W)
    if track:
        res.objective.append(objective(Z, X))
    res.W = W
    return res


@contextlib.contextmanager
def _single_thread(enabled: bool):
    if not enabled:
        yield
        return
    from threadpoolctl import threadpool_limits
    with threadpool_limits(limits=1):
        yield


def tld_denoise(img, sigma: float, cfg: TldConfig | None = None) -> np.ndarray:
    cfg = cfg or TldConfig()
    img = as_image(img)
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if min(img.shape) < cfg.p:
        raise DimensionError(f"image {img.shape} smaller than patch size {cfg.p}")
    with _single_thread(cfg.deterministic):
        pm = extract_patches(img, cfg.p)
        learned = learn_transform(pm.columns, cfg, backend=cfg.backend)
        U, _ = variable_sparsity_update(learned.W, pm.columns, sigma, cfg.c, backend=cfg.backend)
        return aggregate_patches(pm, U, backend=cfg.backend)


class TLD:
    """:func:`tld_denoise` behind the ``Denoiser`` interface."""

    name = "tld"

    def __init__(self, cfg: TldConfig | None = None):
        self.cfg = cfg or TldConfig()

    def denoise(self, img, sigma):
        return tld_denoise(img, sigma, self.cfg)

    __call__ = denoise

    def __repr__(self):
        return f"TLD({self.cfg!r})"
