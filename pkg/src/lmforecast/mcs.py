"""Model Confidence Set by sequential elimination with a moving-block bootstrap.

At each step the surviving models are tested for equal predictive ability
with either the range statistic

    T_R  = max_{i,j} |dbar_ij| / sqrt(var(dbar_ij))

or the semiquadratic statistic, used in the form

    T_SQ = sum_{i != j} dbar_ij**2 / sqrt(var(dbar_ij)).

Variances and the null distribution come from the same bootstrap draws.
If the null is rejected the model with the largest standardised excess
loss over the surviving-set average is removed.  MCS p-values are the
running maximum of the step p-values; the set at level ``alpha`` keeps
every model whose MCS p-value is at least ``alpha``.

With very short loss samples (a few forecast steps) the bootstrap has
little to resample and the procedure is fragile; nothing here tries to
hide that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BootstrapConfig",
    "LossPanel",
    "McsResult",
    "STATISTICS",
    "block_bootstrap_means",
    "mcs",
    "moving_block_indices",
]

STATISTICS = ("R", "SQ")
_TIE_RTOL = 1e-10
_ALIASES = {"R": "R", "RANGE": "R", "SQ": "SQ", "SEMIQUADRATIC": "SQ"}


@dataclass(frozen=True)
class BootstrapConfig:
    """``block_length=None`` means ``ceil(n ** (1/3))`` for a panel of ``n`` rows."""

    replications: int = 999
    block_length: int | None = None
    seed: int = 0

    def resolved_block(self, n: int) -> int:
        b = math.ceil(n ** (1.0 / 3.0)) if self.block_length is None else int(self.block_length)
        return max(1, min(b, n))


@dataclass
class LossPanel:
    losses: np.ndarray
    model_ids: list[str]
    loss_kind: str = "AD"

    def __post_init__(self) -> None:
        self.losses = np.asarray(self.losses, dtype=float)
        if self.losses.ndim != 2:
            raise ValueError("losses must be an n x m matrix")
        n, m = self.losses.shape
        if n < 2 or m < 1:
            raise ValueError(f"loss panel needs n >= 2 rows and m >= 1 models, got {n} x {m}")
        if len(self.model_ids) != m:
            raise ValueError("one model id per column is required")
        if len(set(self.model_ids)) != m:
            raise ValueError("model ids must be unique")
        if not np.all(np.isfinite(self.losses)) or np.any(self.losses < 0):
            raise ValueError("losses must be finite and non-negative")

    @property
    def shape(self) -> tuple[int, int]:
        return self.losses.shape


@dataclass
class McsResult:
    superior_set: list[str]
    elimination_order: list[tuple[str, float]]
    pvalues: dict[str, float]
    statistic: str
    alpha: float
    bootstrap: dict = field(default_factory=dict)

    def included(self, model_id: str) -> bool:
        return model_id in self.superior_set


def moving_block_indices(n: int, block_length: int, replications: int, rng: np.random.Generator) -> np.ndarray:
    """Row indices of ``replications`` moving-block resamples, shape ``(B, n)``."""
    b = max(1, min(int(block_length), n))
    k = -(-n // b)
    starts = rng.integers(0, n - b + 1, size=(replications, k))
    idx = (starts[:, :, None] + np.arange(b)[None, None, :]).reshape(replications, k * b)
    return idx[:, :n]


def block_bootstrap_means(losses: np.ndarray, block_length: int, replications: int, rng) -> np.ndarray:
    """Column means of each moving-block resample, shape ``(B, m)``.

    Draws the same block starts as :func:`moving_block_indices` but sums
    blocks through prefix sums instead of gathering rows.
    """
    n, m = losses.shape
    b = max(1, min(int(block_length), n))
    k = -(-n // b)
    starts = rng.integers(0, n - b + 1, size=(replications, k))
    csum = np.vstack([np.zeros((1, m)), np.cumsum(losses, axis=0)])
    tail = n - (k - 1) * b
    total = (csum[starts[:, :-1] + b] - csum[starts[:, :-1]]).sum(axis=1)
    total += csum[starts[:, -1] + tail] - csum[starts[:, -1]]
    return total / n


def _safe_t(num: np.ndarray, var: np.ndarray, tiny: float) -> np.ndarray:
    out = np.zeros_like(num)
    ok = var > tiny * tiny
    out[ok] = num[ok] / np.sqrt(var[ok])
    big = ~ok & (np.abs(num) > tiny)
    out[big] = np.sign(num[big]) * np.inf
    return out


def _step(Lbar: np.ndarray, Lstar: np.ndarray, stat: str, tiny: float):
    """p-value of the equivalence test and index of the model to drop."""
    m = Lbar.size
    dbar = Lbar[:, None] - Lbar[None, :]
    dstar = Lstar[:, :, None] - Lstar[:, None, :]
    dev = dstar - dbar[None]
    var = np.mean(dev * dev, axis=0)
    off = ~np.eye(m, dtype=bool)

    # rank by standardised excess loss over the surviving-set average
    di = Lbar - Lbar.mean()
    distar = Lstar - Lstar.mean(axis=1, keepdims=True)
    vi = np.mean((distar - di[None]) ** 2, axis=0)
    ti = _safe_t(di, vi, tiny)

    degenerate = off & (var <= tiny * tiny) & (np.abs(dbar) > tiny)
    if degenerate.any():
        # a constant non-zero differential: the worse model goes with p = 0
        worse = np.where(degenerate.any(axis=1))[0]
        drop = int(worse[np.argmax(Lbar[worse])])
        return 0.0, drop

    live = off & (var > tiny * tiny)
    if not live.any():
        return 1.0, int(np.argmax(ti))
    sd = np.sqrt(np.where(live, var, 1.0))
    if stat == "R":
        T = np.max(np.abs(dbar)[live] / sd[live])
        Tstar = np.max(np.where(live[None], np.abs(dev) / sd[None], 0.0), axis=(1, 2))
    else:
        T = np.sum((dbar * dbar)[live] / sd[live])
        Tstar = np.sum(np.where(live[None], dev * dev / sd[None], 0.0), axis=(1, 2))
    # draws equal to T up to rounding count as ties, so column order cannot flip them
    p = float(np.mean(Tstar >= T * (1.0 - _TIE_RTOL)))
    return p, int(np.argmax(ti))


def mcs(panel: LossPanel | np.ndarray, statistic: str = "R", alpha: float = 0.05,
        boot: BootstrapConfig | None = None, model_ids: list[str] | None = None) -> McsResult:
    """Run the Model Confidence Set procedure on an ``n x m`` loss panel.

    Parameters
    ----------
    panel : LossPanel or ndarray
        Per-step losses; a bare array needs ``model_ids`` or gets ``m0..``.
    statistic : {"R", "SQ"}
        Range or semiquadratic statistic (``"range"``/``"semiquadratic"``
        are accepted too).
    alpha : float
        Size of each equivalence test; the set has level ``1 - alpha``.
    boot : BootstrapConfig
        Replications (at least 500 recommended), block length and seed.

    Returns
    -------
    McsResult
        Surviving labels, elimination order with MCS p-values, and the
        configuration used.
    """
    if not isinstance(panel, LossPanel):
        arr = np.asarray(panel, dtype=float)
        ids = model_ids or [f"m{i}" for i in range(arr.shape[1])]
        panel = LossPanel(arr, list(ids))
    stat = _ALIASES.get(str(statistic).upper())
    if stat is None:
        raise ValueError(f"unknown statistic {statistic!r}")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    boot = boot or BootstrapConfig()
    if boot.replications < 1:
        raise ValueError("replications must be positive")
    L = panel.losses
    n, m = L.shape
    b = boot.resolved_block(n)
    rng = np.random.default_rng(np.random.SeedSequence(int(boot.seed)))
    Lstar_all = block_bootstrap_means(L, b, boot.replications, rng)
    Lbar_all = L.mean(axis=0)
    tiny = 1e-12 * max(float(np.mean(np.abs(L))), 1e-300)

    alive = list(range(m))
    order: list[tuple[str, float]] = []
    running = 0.0
    while len(alive) > 1:
        p, drop = _step(Lbar_all[alive], Lstar_all[:, alive], stat, tiny)
        running = max(running, p)
        order.append((panel.model_ids[alive[drop]], running))
        del alive[drop]
    order.append((panel.model_ids[alive[0]], 1.0))
    pvalues = dict(order)
    superior = [mid for mid in panel.model_ids if pvalues[mid] >= alpha]
    return McsResult(
        superior_set=superior,
        elimination_order=order,
        pvalues=pvalues,
        statistic=stat,
        alpha=alpha,
        bootstrap={"replications": boot.replications, "block_length": b, "seed": int(boot.seed)},
    )
