"""Closed-form semantic autoencoder over an enriched visual-semantic space.

A single matrix ``W`` (k x m) is both encoder (``W x' ~ s``) and decoder
(``W^T s ~ x'``). It minimises

    ||X' - W^T S||_F^2 + lam ||W X' - S||_F^2

whose stationarity condition is the Sylvester equation
``(S S^T) W + W (lam X' X'^T) = (1 + lam) S X'^T``. In enriched mode
``X'`` stacks the visual features on top of the per-sample attributes; in
original mode ``X' = X`` (the plain semantic autoencoder baseline).
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import linalg
from .data import ZslDataset, enrich, sample_attributes_for
from .errors import (
    DataIOError,
    DimensionMismatch,
    FormatError,
    MissingFile,
    NonPositiveLambda,
    NumericalError,
    UnseenLabelInTraining,
)

MODEL_MAGIC = b"IPSW"
MODEL_VERSION = 1
_HEADER = struct.Struct("<4sIIIBd")


class SpaceMode(str, enum.Enum):
    ENRICHED = "enriched"
    ORIGINAL = "original"


@dataclass(frozen=True)
class SylvesterSystem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    lam: float


@dataclass(frozen=True)
class IpSaeModel:
    W: np.ndarray
    lam: float
    d: int
    k: int
    space_mode: SpaceMode = SpaceMode.ENRICHED
    nullified_modes: int = 0
    residual: float = 0.0

    def __post_init__(self):
        W = linalg.as_matrix(self.W, "W")
        mode = SpaceMode(self.space_mode)
        m = self.d + self.k if mode is SpaceMode.ENRICHED else self.d
        if W.shape != (self.k, m):
            raise DimensionMismatch(f"W is {W.shape}, expected {(self.k, m)} for {mode.value} mode")
        W = W.copy()
        W.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "space_mode", mode)

    @property
    def m(self) -> int:
        return self.W.shape[1]

    @property
    def enriched(self) -> bool:
        return self.space_mode is SpaceMode.ENRICHED

    def diagnostics(self) -> dict:
        return {"nullified_modes": self.nullified_modes, "residual": self.residual,
                "rank_W": int(np.linalg.matrix_rank(self.W))}


def build_system(Xp, S, lam: float) -> SylvesterSystem:
    """Assemble ``A = S S^T``, ``B = lam Xp Xp^T``, ``C = (1 + lam) S Xp^T``."""
    Xp, S = linalg.as_matrix(Xp, "Xp"), linalg.as_matrix(S, "S")
    if Xp.shape[1] != S.shape[1]:
        raise DimensionMismatch(f"Xp has {Xp.shape[1]} samples, S has {S.shape[1]}")
    if not lam > 0:
        raise NonPositiveLambda(f"lambda must be positive, got {lam}")
    A = S @ S.T
    B = lam * (Xp @ Xp.T)
    # products of a matrix with its transpose can come out asymmetric in the last bit
    A = 0.5 * (A + A.T)
    B = 0.5 * (B + B.T)
    return SylvesterSystem(A, B, (1.0 + lam) * (S @ Xp.T), float(lam))


def residual_limit(A, B, W) -> float:
    """Largest acceptable ``||A W + W B - C||_F`` for a fully determined solve."""
    return 1e-8 * (np.linalg.norm(A) + np.linalg.norm(B)) * (1.0 + np.linalg.norm(W))


def input_space(dataset: ZslDataset, indices, space_mode: SpaceMode | str) -> np.ndarray:
    """The model's input matrix (``X'`` or ``X``) for the given samples."""
    idx = np.asarray(indices, dtype=np.int64)
    X = dataset.features[:, idx]
    if SpaceMode(space_mode) is SpaceMode.ENRICHED:
        return enrich(X, sample_attributes_for(dataset, idx))
    return np.array(X)


def fit(dataset: ZslDataset, train_indices, lam: float = 1.0,
        space_mode: SpaceMode | str = SpaceMode.ENRICHED,
        eps: float | None = None) -> IpSaeModel:
    """Fit ``W`` on seen-class training samples by solving the Sylvester system.

    Parameters
    ----------
    dataset : ZslDataset
    train_indices : sequence of int
        Sample columns to train on; every label must be a seen class.
    lam : float
        Regularisation weight, strictly positive.
    space_mode : SpaceMode or str
        ``"enriched"`` stacks the sample's class attributes under its
        features; ``"original"`` uses the features alone.
    eps : float, optional
        Threshold below which eigenvalue sums are treated as zero.

    Returns
    -------
    IpSaeModel
        Carries ``nullified_modes`` and the Sylvester ``residual``.

    Raises
    ------
    UnseenLabelInTraining
        A training sample belongs to a non-seen class.
    NumericalError
        A fully determined solve misses the residual bound.
    """
    idx = np.asarray(train_indices, dtype=np.int64).reshape(-1)
    if idx.size == 0:
        raise DimensionMismatch("no training samples")
    mode = SpaceMode(space_mode)
    S = sample_attributes_for(dataset, idx)
    bad = set(np.unique(dataset.labels[idx]).tolist()) - set(dataset.seen_classes)
    if bad:
        raise UnseenLabelInTraining(f"training samples from non-seen classes {sorted(bad)}")
    system = build_system(input_space(dataset, idx, mode), S, lam)
    sol = linalg.solve_sylvester_sym(system.A, system.B, system.C, eps=eps)
    if sol.nullified_modes == 0:
        limit = residual_limit(system.A, system.B, sol.W)
        if sol.residual > limit:
            raise NumericalError(
                f"Sylvester residual {sol.residual:.3e} exceeds contract bound {limit:.3e}")
    return IpSaeModel(sol.W, float(lam), dataset.d, dataset.k, mode,
                      sol.nullified_modes, sol.residual)


def encode(model: IpSaeModel, Xp) -> np.ndarray:
    Xp = linalg.as_matrix(Xp, "Xp")
    if Xp.shape[0] != model.m:
        raise DimensionMismatch(f"input has {Xp.shape[0]} rows, model expects {model.m}")
    return model.W @ Xp


def decode(model: IpSaeModel, S_cols) -> np.ndarray:
    """Project semantic columns back to the (enriched) visual space."""
    S_cols = linalg.as_matrix(S_cols, "S_cols")
    if S_cols.shape[0] != model.k:
        raise DimensionMismatch(f"input has {S_cols.shape[0]} rows, model expects {model.k}")
    return model.W.T @ S_cols


def hubness_bound(S, lam: float, tol: float = 1e-13) -> dict:
    """Contraction factor of the ridge hat matrix ``S^T (S S^T + lam I)^-1 S``.

    Returns ``alpha`` (largest singular value of ``S``), the closed form
    ``bound = alpha^2 / (alpha^2 + lam)`` and ``lhs``, the spectral norm of
    the hat matrix computed by power iteration without forming it.
    """
    S = linalg.as_matrix(S, "S")
    if not lam > 0:
        raise NonPositiveLambda(f"lambda must be positive, got {lam}")
    alpha = linalg.spectral_norm(S, tol=tol)
    G = S @ S.T
    G[np.diag_indices_from(G)] += lam
    lhs = linalg.operator_norm_psd(
        lambda V: S.T @ linalg.solve_spd(G, S @ V), S.shape[1], tol=tol)
    return {"alpha": alpha, "bound": alpha ** 2 / (alpha ** 2 + lam), "lhs": lhs}


# -- serialisation -------------------------------------------------------------

def save_model(model: IpSaeModel, path) -> None:
    mode = 0 if model.enriched else 1
    try:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, model.k, model.m, mode, model.lam))
            fh.write(np.ascontiguousarray(model.W, dtype="<f8").tobytes())
    except OSError as exc:
        raise DataIOError(f"cannot write model to {path}: {exc}") from exc


def load_model(path) -> IpSaeModel:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise MissingFile(f"{path} not found") from None
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise FormatError(path, "truncated header", offset=len(raw))
    magic, version, k, m, mode, lam = _HEADER.unpack_from(raw)
    if magic != MODEL_MAGIC:
        raise FormatError(path, f"bad magic {magic!r}", offset=0)
    if version != MODEL_VERSION:
        raise FormatError(path, f"unsupported version {version}", offset=4)
    if mode not in (0, 1):
        raise FormatError(path, f"bad space mode {mode}", offset=16)
    if len(raw) != _HEADER.size + 8 * k * m:
        raise FormatError(path, f"expected {_HEADER.size + 8 * k * m} bytes, found {len(raw)}")
    W = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(k, m).astype(np.float64)
    space = SpaceMode.ENRICHED if mode == 0 else SpaceMode.ORIGINAL
    d = m - k if space is SpaceMode.ENRICHED else m
    if d < 0:
        raise FormatError(path, f"enriched model with m={m} < k={k}")
    return IpSaeModel(W, lam, d, k, space)
