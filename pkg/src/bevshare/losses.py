"""Detection losses with analytic gradients.

No training loop lives here; the gradients exist so correctness can
be verified against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .confidence import PriorHeadOutput
from .selection import PriorMap

# interior clamp for probabilities entering a log
PROB_EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    """Weights for the classification, regression, and prior terms."""

    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if self.alpha < 0 or self.beta < 0 or self.gamma < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass(frozen=True)
class FocalParams:
    alpha: float = 0.25
    gamma: float = 2.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("focal alpha must lie in [0, 1]")
        if self.gamma < 0.0:
            raise ValueError("focal gamma must be non-negative")


def clamp_probs(p: np.ndarray, eps: float = PROB_EPS) -> np.ndarray:
    """Pull probabilities strictly inside (0, 1) before log-based losses."""
    return np.clip(p, eps, 1.0 - eps)


def focal_loss(
    probs: np.ndarray, targets: np.ndarray, params: FocalParams
) -> tuple[float, np.ndarray]:
    """Mean focal loss and its gradient with respect to the probabilities.

    Element loss is -alpha * (1 - p_t)^gamma * log(p_t) with
    p_t = p for positive targets and 1 - p otherwise.  Probabilities
    must already be strictly interior; see clamp_probs.
    """
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if p.shape != y.shape:
        raise ValueError("probs and targets must have the same shape")
    if np.any((p <= 0.0) | (p >= 1.0)):
        raise ValueError("probabilities must lie strictly inside (0, 1)")

    a, g = params.alpha, params.gamma
    pt = np.where(y == 1.0, p, 1.0 - p)
    one_m = 1.0 - pt
    loss = float(np.mean(-a * one_m**g * np.log(pt)))

    # d/dp_t of the element loss, then chain through dp_t/dp = +-1
    dl_dpt = a * g * one_m ** (g - 1.0) * np.log(pt) - a * one_m**g / pt
    grad = np.where(y == 1.0, dl_dpt, -dl_dpt) / p.size
    return loss, grad


def smooth_l1(
    pred: np.ndarray, target: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean smooth-L1 and its gradient with respect to the prediction."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError("pred and target must have the same shape")
    d = pred - target
    ad = np.abs(d)
    quadratic = ad < 1.0
    loss = float(np.mean(np.where(quadratic, 0.5 * d * d, ad - 0.5)))
    grad = np.where(quadratic, d, np.sign(d)) / pred.size
    return loss, grad


def total_loss(l_cls: float, l_reg: float, l_pk: float, w: LossWeights) -> float:
    """Weighted sum of the three loss terms."""
    return w.alpha * l_cls + w.beta * l_reg + w.gamma * l_pk


def prior_supervision_loss(
    head_out: PriorHeadOutput, gt_fg: PriorMap, params: FocalParams
) -> float:
    """Focal loss of the head's foreground probability against the
    prior-map labels.

    The two logits go through a softmax (equivalently a logistic on
    their margin); probabilities are clamped interior by PROB_EPS
    before the log.
    """
    logits = head_out.logits
    if gt_fg.binary.shape != logits.shape[1:]:
        raise ValueError("label grid does not match head output")
    margin = logits[1] - logits[0]
    fg_prob = clamp_probs(1.0 / (1.0 + np.exp(-margin)))
    loss, _ = focal_loss(fg_prob, gt_fg.binary.astype(np.float64), params)
    return loss
