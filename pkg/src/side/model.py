"""Joint severity-impact forecasting network.

Two transformer-style sequence encoders (one for the impact channel,
one for severity) feed a bidirectional single-head cross-attention
block; the decoder flattens both cross-attended representations and
regresses the next ``horizon`` steps of severity plus the full impact
vector in one shot.  The two-task loss weighs the per-step severity and
impact MSE terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from . import numerics as nm
from .errors import ShapeError
from .numerics import Node

ABLATIONS = ("full", "no_social", "no_news", "no_attention")


@dataclass(frozen=True)
class ModelConfig:
    lookback: int = 52
    horizon: int = 5
    determinant_count: int = 11
    width: int = 32
    hidden: int = 64
    ablation: str = "full"

    def __post_init__(self):
        if self.ablation not in ABLATIONS:
            raise ValueError(f"unknown ablation {self.ablation!r}, expected one of {ABLATIONS}")

    @property
    def impact_dim(self) -> int:
        return 2 * self.determinant_count

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LossWeights:
    """Relative task weights; severity first, impact second."""

    severity: float = 1.0
    impact: float = 1.0

    def __post_init__(self):
        if self.severity < 0 or self.impact < 0:
            raise ValueError("loss weights must be non-negative")
        if self.severity == 0 and self.impact == 0:
            raise ValueError("at least one loss weight must be positive")


def sinusoidal_positions(length: int, width: int) -> np.ndarray:
    """Fixed sin/cos positional table, shape (length, width)."""
    pos = np.arange(length, dtype=np.float64)[:, None]
    i = np.arange(width, dtype=np.float64)[None, :]
    angles = pos / np.power(10000.0, 2.0 * (i // 2) / width)
    table = np.where(i % 2 == 0, np.sin(angles), np.cos(angles))
    return table


def _glorot(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    std = math.sqrt(2.0 / (rows + cols))
    return rng.normal(0.0, std, size=(rows, cols))


def init_params(cfg: ModelConfig, rng: np.random.Generator) -> dict[str, Node]:
    """Fresh parameter set; iteration order is fixed by insertion."""
    d = cfg.width
    params: dict[str, Node] = {}

    def par(name, rows, cols):
        params[name] = nm.parameter(_glorot(rng, rows, cols), name)

    for prefix, in_dim in (("enc_impact", cfg.impact_dim), ("enc_severity", 1)):
        par(f"{prefix}.proj", in_dim, d)
        for w in ("wq", "wk", "wv", "wo"):
            par(f"{prefix}.attn.{w}", d, d)
        par(f"{prefix}.ff.w1", d, 4 * d)
        par(f"{prefix}.ff.w2", 4 * d, d)
    for w in ("wq_m", "wk_d", "wv_d", "wq_d", "wk_m", "wv_m"):
        par(f"cross.{w}", d, d)
    par("dec.w1", cfg.lookback * 2 * d, cfg.hidden)
    par("dec.w2", cfg.hidden, cfg.horizon * (1 + cfg.impact_dim))
    return params


def encode(seq: Node, params: dict[str, Node], prefix: str, positions: Node, width: int) -> Node:
    """Project, add positions, then one self-attention + feed-forward block.

    Residual connections wrap both sub-blocks; each is followed by row
    layer normalization.
    """
    if seq.value.ndim != 2 or seq.value.shape[0] != positions.value.shape[0]:
        raise ShapeError(
            f"encode: sequence shape {seq.value.shape} does not match "
            f"positional table {positions.value.shape}"
        )
    x = nm.add(nm.matmul(seq, params[f"{prefix}.proj"]), positions)

    q = nm.matmul(x, params[f"{prefix}.attn.wq"])
    k = nm.matmul(x, params[f"{prefix}.attn.wk"])
    v = nm.matmul(x, params[f"{prefix}.attn.wv"])
    weights = nm.softmax_rows(nm.scale(nm.matmul(q, nm.transpose(k)), 1.0 / math.sqrt(width)))
    attended = nm.matmul(nm.matmul(weights, v), params[f"{prefix}.attn.wo"])
    x = nm.layer_norm_rows(nm.add(x, attended))

    ff = nm.matmul(nm.tanh(nm.matmul(x, params[f"{prefix}.ff.w1"])), params[f"{prefix}.ff.w2"])
    return nm.layer_norm_rows(nm.add(x, ff))


def cross_attend(h_impact: Node, h_severity: Node, params: dict[str, Node], width: int) -> tuple[Node, Node]:
    """Bidirectional single-head cross-attention between the two channels.

    Returns the impact representation cross-attended onto severity and
    vice versa.  No output projection; one head; rowwise softmax over
    scores scaled by 1/sqrt(width).
    """
    if h_impact.value.shape != h_severity.value.shape:
        raise ShapeError(f"cross_attend: {h_impact.value.shape} vs {h_severity.value.shape}")
    inv_sqrt_d = 1.0 / math.sqrt(width)

    q_m = nm.matmul(h_impact, params["cross.wq_m"])
    k_d = nm.matmul(h_severity, params["cross.wk_d"])
    v_d = nm.matmul(h_severity, params["cross.wv_d"])
    q_d = nm.matmul(h_severity, params["cross.wq_d"])
    k_m = nm.matmul(h_impact, params["cross.wk_m"])
    v_m = nm.matmul(h_impact, params["cross.wv_m"])

    a_md = nm.softmax_rows(nm.scale(nm.matmul(q_m, nm.transpose(k_d)), inv_sqrt_d))
    a_dm = nm.softmax_rows(nm.scale(nm.matmul(q_d, nm.transpose(k_m)), inv_sqrt_d))

    return nm.matmul(a_md, v_d), nm.matmul(a_dm, v_m)


def forward_no_attention(h_impact: Node, h_severity: Node) -> tuple[Node, Node]:
    """Ablation path: hand the encoder outputs straight to the decoder."""
    return h_impact, h_severity


def decode(h_md: Node, h_dm: Node, params: dict[str, Node], cfg: ModelConfig) -> tuple[Node, Node]:
    """Two-layer readout of the concatenated representations.

    Returns the severity forecast (standardized units, shape (horizon,))
    and the impact forecast (shape (horizon, 2 * determinant_count)).
    Impact outputs are plain linear; clamping to [0, 1] is a reporting
    concern, not a model one.
    """
    joined = nm.concat_last_dim(h_md, h_dm)
    flat = nm.reshape(joined, (1, joined.value.size))
    hidden = nm.tanh(nm.matmul(flat, params["dec.w1"]))
    out = nm.reshape(nm.matmul(hidden, params["dec.w2"]), (cfg.horizon, 1 + cfg.impact_dim))
    severity = nm.reshape(nm.slice2d(out, slice(None), slice(0, 1)), (cfg.horizon,))
    impact = nm.slice2d(out, slice(None), slice(1, None))
    return severity, impact


def apply_input_mask(impact_in: np.ndarray, ablation: str, determinant_count: int) -> np.ndarray:
    """Zero the social or news half of the impact inputs for ablation runs."""
    if ablation == "no_social":
        masked = impact_in.copy()
        masked[:, :determinant_count] = 0.0
        return masked
    if ablation == "no_news":
        masked = impact_in.copy()
        masked[:, determinant_count:] = 0.0
        return masked
    return impact_in


def forward(
    params: dict[str, Node],
    cfg: ModelConfig,
    severity_in: np.ndarray,
    impact_in: np.ndarray,
    positions: Node | None = None,
) -> tuple[Node, Node]:
    """Full network pass for one window.

    Args:
        severity_in: standardized severity lookback, shape (lookback,).
        impact_in: impact lookback, shape (lookback, 2 * determinant_count),
            already masked for input ablations.
        positions: optional precomputed positional table node (shared
            across samples to avoid rebuilding it).

    Returns:
        (severity forecast, impact forecast) nodes.
    """
    severity_in = np.asarray(severity_in, dtype=np.float64)
    impact_in = np.asarray(impact_in, dtype=np.float64)
    if severity_in.shape != (cfg.lookback,):
        raise ShapeError(f"severity_in shape {severity_in.shape}, expected ({cfg.lookback},)")
    if impact_in.shape != (cfg.lookback, cfg.impact_dim):
        raise ShapeError(
            f"impact_in shape {impact_in.shape}, expected ({cfg.lookback}, {cfg.impact_dim})"
        )
    if positions is None:
        positions = nm.constant(sinusoidal_positions(cfg.lookback, cfg.width))

    h_m = encode(nm.constant(impact_in), params, "enc_impact", positions, cfg.width)
    h_d = encode(nm.constant(severity_in.reshape(-1, 1)), params, "enc_severity", positions, cfg.width)

    if cfg.ablation == "no_attention":
        h_md, h_dm = forward_no_attention(h_m, h_d)
    else:
        h_md, h_dm = cross_attend(h_m, h_d, params, cfg.width)

    return decode(h_md, h_dm, params, cfg)


def joint_loss(
    severity_pred: Node,
    severity_true: np.ndarray,
    impact_pred: Node,
    impact_true: np.ndarray,
    weights: LossWeights,
) -> Node:
    """Weighted two-task objective, summed over the prediction window.

    Per step, the severity term is the squared error and the impact term
    is the MSE over vector components; steps are summed, not averaged.
    """
    severity_true = np.asarray(severity_true, dtype=np.float64)
    impact_true = np.asarray(impact_true, dtype=np.float64)
    if severity_pred.value.shape != severity_true.shape:
        raise ShapeError(f"joint_loss: {severity_pred.value.shape} vs {severity_true.shape}")
    if impact_pred.value.shape != impact_true.shape:
        raise ShapeError(f"joint_loss: {impact_pred.value.shape} vs {impact_true.shape}")
    horizon = severity_true.shape[0]

    sev_err = nm.square(nm.add(severity_pred, nm.constant(-severity_true)))
    imp_err = nm.square(nm.add(impact_pred, nm.constant(-impact_true)))
    sev_term = nm.scale(nm.mean_all(sev_err), weights.severity * horizon)
    imp_term = nm.scale(nm.mean_all(imp_err), weights.impact * horizon)
    return nm.add(sev_term, imp_term)
