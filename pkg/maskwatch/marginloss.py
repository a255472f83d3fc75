"""
Combined-margin softmax loss family.

A single ``MarginSpec(m1, m2, m3, s)`` selects the loss: the target-class
logit becomes ``s * (cos(m1 * theta + m2) - m3)`` while every other class
keeps ``s * cos(theta_j)``. Plain softmax is ``(1, 0, 0)``, SphereFace-style
multiplicative margin varies ``m1``, ArcFace varies ``m2`` and CosFace varies
``m3``.

Forward and analytic gradients are computed on whole batches; the
single-sample functions are thin views over the batched ones.
"""

import csv
import math
from collections.abc import Iterator
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .base.exceptions import (
    DimensionMismatch,
    EmptyBatch,
    InvalidLabel,
    IoFailure,
    ValidationError,
)
from .base.types import BoolArray, Matrix, PathLike, Radians, Vector

# arccos input is kept inside [-1 + eps, 1 - eps]; its derivative is infinite at +-1.
ARCCOS_EPS = 1e-7
UNIT_NORM_TOL = 1e-6


class MarginSpec(BaseModel):
    """
    Margin parameters.

    Defaults are the additive angular margin ``m2 = 0.5`` with scale ``s = 64``.
    """

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    m1: float = Field(default=1.0, ge=1.0, description="multiplicative angular margin")
    m2: Radians = Field(default=0.5, ge=0.0, description="additive angular margin")
    m3: float = Field(default=0.0, ge=0.0, description="additive cosine margin")
    s: float = Field(default=64.0, gt=0.0, description="feature scale")

    @property
    def is_angular_identity(self) -> bool:
        """True when the target angle is not modified (``m1 = 1, m2 = 0``)."""
        return self.m1 == 1.0 and self.m2 == 0.0


def softmax(s: float = 64.0) -> MarginSpec:
    return MarginSpec(m1=1.0, m2=0.0, m3=0.0, s=s)


def sphereface(m1: float = 1.35, s: float = 64.0) -> MarginSpec:
    return MarginSpec(m1=m1, m2=0.0, m3=0.0, s=s)


def arcface(m2: Radians = 0.5, s: float = 64.0) -> MarginSpec:
    return MarginSpec(m1=1.0, m2=m2, m3=0.0, s=s)


def cosface(m3: float = 0.35, s: float = 64.0) -> MarginSpec:
    return MarginSpec(m1=1.0, m2=0.0, m3=m3, s=s)


def combined(m1: float, m2: Radians, m3: float, s: float = 64.0) -> MarginSpec:
    return MarginSpec(m1=m1, m2=m2, m3=m3, s=s)


@dataclass(frozen=True)
class ClassWeights:
    """C unit-norm class-center rows of dimension D."""

    rows: Matrix

    def __post_init__(self) -> None:
        if self.rows.ndim != 2 or self.rows.shape[0] == 0:
            raise DimensionMismatch(f"Class weights must be a non-empty C x D matrix, got {self.rows.shape}")
        norms = np.linalg.norm(self.rows, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
            raise ValidationError("Every class weight row must have unit L2 norm")

    @classmethod
    def from_raw(cls, raw: Matrix) -> "ClassWeights":
        """Normalize each row of ``raw`` to unit length."""
        raw = np.asarray(raw, dtype=np.float64)
        norms = np.linalg.norm(raw, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise ValidationError("Class weight rows must be nonzero")
        return cls(rows=raw / norms)

    @property
    def num_classes(self) -> int:
        return int(self.rows.shape[0])

    @property
    def dim(self) -> int:
        return int(self.rows.shape[1])


@dataclass(frozen=True)
class LossOutput:
    """Forward result for one sample."""

    loss: float
    probabilities: Vector
    modified_logits: Vector
    clamped: bool = False
    easy_margin: bool = False


@dataclass(frozen=True)
class GradOutput:
    """Analytic gradients; unpacks as ``dx, dW``."""

    dx: Vector
    dW: Matrix
    clamped: bool = False
    easy_margin: bool = False

    def __iter__(self) -> Iterator[Vector | Matrix]:
        yield self.dx
        yield self.dW


@dataclass(frozen=True)
class BatchForward:
    """Per-sample quantities for a batch of N samples over C classes."""

    losses: Vector  # (N,)
    probabilities: Matrix  # (N, C)
    logits: Matrix  # (N, C)
    dtarget_dcos: Vector  # (N,) derivative of the unscaled target logit
    clamped: BoolArray  # (N,)
    easy_margin: BoolArray  # (N,)

    @property
    def mean_loss(self) -> float:
        return float(np.mean(self.losses))


def _as_rows(W: ClassWeights | Matrix) -> Matrix:
    if isinstance(W, ClassWeights):
        return W.rows
    return np.asarray(W, dtype=np.float64)


def _check_batch(X: Matrix, W: Matrix, labels: np.ndarray) -> None:
    if X.ndim != 2 or W.ndim != 2:
        raise DimensionMismatch("Inputs must be 2-D (N x D) and weights 2-D (C x D)")
    if X.shape[1] != W.shape[1]:
        raise DimensionMismatch(
            f"Feature dim {X.shape[1]} does not match weight dim {W.shape[1]}",
            expected=int(W.shape[1]),
            actual=int(X.shape[1]),
        )
    if labels.shape != (X.shape[0],):
        raise DimensionMismatch(
            f"Expected {X.shape[0]} labels, got {labels.shape[0] if labels.ndim else 0}",
            expected=int(X.shape[0]),
            actual=int(labels.size),
        )
    num_classes = W.shape[0]
    bad = (labels < 0) | (labels >= num_classes)
    if np.any(bad):
        raise InvalidLabel(int(labels[bad][0]), int(num_classes))


def target_logit(theta: Radians, spec: MarginSpec) -> float:
    """Unscaled margin-modified target logit ``cos(m1 * theta + m2) - m3``."""
    if not 0.0 <= theta <= math.pi:
        raise ValidationError(f"theta must lie in [0, pi], got {theta}")
    return math.cos(spec.m1 * theta + spec.m2) - spec.m3


def _target_terms(
    cos_t: Vector, spec: MarginSpec
) -> tuple[Vector, Vector, BoolArray, BoolArray]:
    """Margin-modified target cosine, its derivative w.r.t. ``cos_t``, and flags."""
    n = cos_t.shape[0]
    if spec.is_angular_identity:
        # cos(arccos(c)) == c; skipping the round trip keeps the softmax reduction exact.
        return cos_t - spec.m3, np.ones(n), np.zeros(n, dtype=bool), np.zeros(n, dtype=bool)

    c = np.clip(cos_t, -1.0 + ARCCOS_EPS, 1.0 - ARCCOS_EPS)
    clamped = c != cos_t
    theta = np.arccos(c)
    arg = spec.m1 * theta + spec.m2
    easy = arg > math.pi

    value = np.where(easy, c - spec.m3, np.cos(arg) - spec.m3)
    # d cos(m1*theta + m2) / dc = m1 * sin(arg) / sqrt(1 - c^2)
    deriv = np.where(easy, 1.0, spec.m1 * np.sin(arg) / np.sqrt(1.0 - c * c))
    deriv = np.where(clamped, 0.0, deriv)
    return value, deriv, clamped, easy


def batch_forward(
    X: Matrix, W: ClassWeights | Matrix, labels: np.ndarray, spec: MarginSpec
) -> BatchForward:
    """
    Forward pass over a batch.

    Args:
        X: (N, D) features, expected unit-norm (not enforced)
        W: (C, D) class weights
        labels: (N,) integer class indices
        spec: Margin parameters

    Raises:
        DimensionMismatch: On inconsistent shapes
        InvalidLabel: On a label outside ``[0, C)``
    """
    X = np.asarray(X, dtype=np.float64)
    rows = _as_rows(W)
    labels = np.asarray(labels, dtype=np.intp)
    _check_batch(X, rows, labels)

    idx = np.arange(X.shape[0])
    cos = X @ rows.T
    target, deriv, clamped, easy = _target_terms(cos[idx, labels], spec)

    logits = spec.s * cos
    logits[idx, labels] = spec.s * target

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    log_probs = shifted - log_norm[:, None]
    losses = -log_probs[idx, labels]
    return BatchForward(
        losses=losses,
        probabilities=np.exp(log_probs),
        logits=logits,
        dtarget_dcos=deriv,
        clamped=clamped,
        easy_margin=easy,
    )


def batch_grad(
    X: Matrix,
    W: ClassWeights | Matrix,
    labels: np.ndarray,
    spec: MarginSpec,
    fwd: BatchForward | None = None,
) -> tuple[Matrix, Matrix, BatchForward]:
    """
    Gradients of the *mean* batch loss w.r.t. the inputs and weights as given.

    Normalization of ``X`` and ``W`` is the caller's responsibility; no
    gradient flows through it here.

    Returns:
        ``(dX, dW, fwd)`` with ``dX`` shaped (N, D) and ``dW`` shaped (C, D)
    """
    X = np.asarray(X, dtype=np.float64)
    rows = _as_rows(W)
    labels = np.asarray(labels, dtype=np.intp)
    if fwd is None:
        fwd = batch_forward(X, rows, labels, spec)

    n = X.shape[0]
    idx = np.arange(n)
    dlogits = fwd.probabilities.copy()
    dlogits[idx, labels] -= 1.0
    dcos = spec.s * dlogits
    dcos[idx, labels] *= fwd.dtarget_dcos
    dcos /= n
    return dcos @ rows, dcos.T @ X, fwd


def forward(x: Vector, W: ClassWeights | Matrix, label: int, spec: MarginSpec) -> LossOutput:
    """Margin-softmax cross-entropy for a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch(f"Expected a 1-D feature vector, got shape {x.shape}")
    fwd = batch_forward(x[None, :], W, np.array([label]), spec)
    return LossOutput(
        loss=float(fwd.losses[0]),
        probabilities=fwd.probabilities[0],
        modified_logits=fwd.logits[0],
        clamped=bool(fwd.clamped[0]),
        easy_margin=bool(fwd.easy_margin[0]),
    )


def grad(x: Vector, W: ClassWeights | Matrix, label: int, spec: MarginSpec) -> GradOutput:
    """Analytic ``(dL/dx, dL/dW)`` for a single sample."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch(f"Expected a 1-D feature vector, got shape {x.shape}")
    dX, dW, fwd = batch_grad(x[None, :], W, np.array([label]), spec)
    return GradOutput(
        dx=dX[0], dW=dW, clamped=bool(fwd.clamped[0]), easy_margin=bool(fwd.easy_margin[0])
    )


def batch_loss(
    xs: Matrix, labels: np.ndarray, W: ClassWeights | Matrix, spec: MarginSpec
) -> float:
    """Arithmetic mean of per-sample losses."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.size == 0 or len(xs) == 0:
        raise EmptyBatch("batch_loss needs at least one sample")
    return batch_forward(xs, W, np.asarray(labels), spec).mean_loss


def target_angles(X: Matrix, W: ClassWeights | Matrix, labels: np.ndarray) -> Vector:
    """Angle between every feature and its ground-truth class weight."""
    X = np.asarray(X, dtype=np.float64)
    rows = _as_rows(W)
    labels = np.asarray(labels, dtype=np.intp)
    _check_batch(X, rows, labels)
    cos = np.einsum("nd,nd->n", X, rows[labels])
    return np.arccos(np.clip(cos, -1.0, 1.0))


def boundary_curve(spec: MarginSpec, n_samples: int) -> list[tuple[Radians, Radians]]:
    """
    Binary decision boundary ``(theta_target, theta_other)`` sampled over
    ``theta_target`` in ``[0, pi]``: the locus where the margin-modified target
    logit equals the other class logit.
    """
    if n_samples < 2:
        raise ValidationError(f"n_samples must be at least 2, got {n_samples}")
    theta_t = np.linspace(0.0, math.pi, n_samples)
    if spec.is_angular_identity and spec.m3 == 0.0:
        theta_o = theta_t.copy()
    else:
        arg = spec.m1 * theta_t + spec.m2
        target = np.where(arg > math.pi, np.cos(theta_t), np.cos(arg)) - spec.m3
        theta_o = np.arccos(np.clip(target, -1.0, 1.0))
    return [(float(t), float(o)) for t, o in zip(theta_t, theta_o, strict=True)]


def write_boundary_csv(points: list[tuple[Radians, Radians]], path: PathLike) -> None:
    """Write ``theta_target,theta_other`` rows in radians with 6 decimals."""
    try:
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["theta_target", "theta_other"])
            for t, o in points:
                writer.writerow([f"{t:.6f}", f"{o:.6f}"])
    except OSError as e:
        raise IoFailure(f"Cannot write boundary CSV: {e}", path=str(path), cause=e) from e
