"""Training loop, forecasting metrics, ablation harness, and baselines.

Severity is standardized by the training-set mean/std before entering
the network and de-standardized before any metric is computed, so
reported errors stay in DSCI points.  Impact targets already live in
[0, 1] and are left alone, which puts the two loss terms on comparable
scales.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import model as mdl
from . import numerics as nm
from .core import WindowedSample
from .errors import DivergenceError, NumericsError
from .model import LossWeights, ModelConfig

MFA_EPSILON = 1e-6

#: Consecutive epochs without validation improvement before halving the lr.
LR_PLATEAU_EPOCHS = 3


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 20
    patience: int = 10
    batch_size: int = 16
    learning_rate: float = 1e-3
    seed: int = 0
    lambda_severity: float = 1.0
    lambda_impact: float = 1.0
    lr_plateau: int = LR_PLATEAU_EPOCHS

    def __post_init__(self):
        if self.patience > self.max_epochs:
            raise ValueError(
                f"patience {self.patience} exceeds max_epochs {self.max_epochs}"
            )
        if self.max_epochs < 1 or self.batch_size < 1 or self.lr_plateau < 1:
            raise ValueError("max_epochs, batch_size and lr_plateau must be >= 1")

    def to_dict(self) -> dict:
        return {
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
            "lambda_severity": self.lambda_severity,
            "lambda_impact": self.lambda_impact,
        }


@dataclass(frozen=True)
class Standardizer:
    """Training-set severity mean/std; std must be positive."""

    mean: float
    std: float

    def __post_init__(self):
        if not self.std > 0:
            raise ValueError(f"standardizer std must be > 0, got {self.std}")

    @classmethod
    def fit(cls, samples: list[WindowedSample]) -> "Standardizer":
        values = np.array(
            [v for s in samples for v in s.severity_in + s.severity_out], dtype=np.float64
        )
        std = float(values.std())
        if std == 0.0:
            std = 1.0
        return cls(mean=float(values.mean()), std=std)

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def inverse(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) * self.std + self.mean


@dataclass(frozen=True)
class TargetMetrics:
    mae: float
    mse: float
    rmse: float
    mfa: float


@dataclass
class MetricReport:
    """MAE/MSE/RMSE/MFA per target, pooled over (sample, horizon-step) points."""

    per_target: dict[str, TargetMetrics] = field(default_factory=dict)

    def rows(self) -> list[tuple[str, float, float, float, float]]:
        return [
            (target, m.mae, m.mse, m.rmse, m.mfa) for target, m in self.per_target.items()
        ]


def compute_metrics(pred: np.ndarray, true: np.ndarray) -> TargetMetrics:
    """Pooled MAE/MSE/RMSE and median forecast accuracy.

    MFA is the median over points of ``max(0, 1 - |err| / max(|y|, eps))``,
    so 1 is a perfect forecast and the score never goes below 0.
    """
    pred = np.asarray(pred, dtype=np.float64).ravel()
    true = np.asarray(true, dtype=np.float64).ravel()
    if pred.shape != true.shape or pred.size == 0:
        raise ValueError(f"metric inputs misaligned or empty: {pred.shape} vs {true.shape}")
    err = pred - true
    mse = float(np.mean(err * err))
    accuracy = np.maximum(0.0, 1.0 - np.abs(err) / np.maximum(np.abs(true), MFA_EPSILON))
    return TargetMetrics(
        mae=float(np.mean(np.abs(err))),
        mse=mse,
        rmse=float(np.sqrt(mse)),
        mfa=float(np.median(accuracy)),
    )


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


@dataclass
class TrainResult:
    params: dict[str, np.ndarray]
    model_config: ModelConfig
    train_config: TrainConfig
    standardizer: Standardizer
    history: list[dict]
    best_val_loss: float
    best_epoch: int


def _prepare(samples, standardizer: Standardizer, cfg: ModelConfig):
    prepared = []
    for s in samples:
        impact_in = np.array([v.concatenated() for v in s.impact_in], dtype=np.float64)
        impact_in = mdl.apply_input_mask(impact_in, cfg.ablation, cfg.determinant_count)
        prepared.append(
            {
                "start": s.start,
                "severity_in": standardizer.transform(np.array(s.severity_in)),
                "impact_in": impact_in,
                "severity_out_std": standardizer.transform(np.array(s.severity_out)),
                "severity_out": np.array(s.severity_out, dtype=np.float64),
                "impact_out": np.array(
                    [v.concatenated() for v in s.impact_out], dtype=np.float64
                ),
            }
        )
    return prepared


def _mean_loss(params, cfg, weights, prepared, positions) -> float:
    total = 0.0
    for p in prepared:
        sev_pred, imp_pred = mdl.forward(
            params, cfg, p["severity_in"], p["impact_in"], positions
        )
        loss = mdl.joint_loss(
            sev_pred, p["severity_out_std"], imp_pred, p["impact_out"], weights
        )
        total += float(loss.value)
    return total / len(prepared)


def train(
    train_samples: list[WindowedSample],
    val_samples: list[WindowedSample],
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
) -> TrainResult:
    """Minibatch Adam with early stopping on validation loss.

    Runs at most ``max_epochs`` epochs, halves the learning rate after
    three stagnant epochs, stops after ``patience`` stagnant epochs, and
    returns the parameters from the best-validation epoch.

    Raises:
        DivergenceError: training loss went non-finite; the error carries
            the last good parameter snapshot and the history so far.
    """
    if not train_samples or not val_samples:
        raise ValueError("train and val splits must both be non-empty")
    standardizer = Standardizer.fit(train_samples)
    rng = np.random.default_rng(train_cfg.seed)
    params = mdl.init_params(model_cfg, rng)
    weights = LossWeights(train_cfg.lambda_severity, train_cfg.lambda_impact)
    positions = nm.constant(mdl.sinusoidal_positions(model_cfg.lookback, model_cfg.width))

    train_prep = _prepare(train_samples, standardizer, model_cfg)
    val_prep = _prepare(val_samples, standardizer, model_cfg)

    adam = nm.AdamState(learning_rate=train_cfg.learning_rate)
    best_values = {k: p.value.copy() for k, p in params.items()}
    best_val = float("inf")
    best_epoch = 0
    stale = 0
    decay_stale = 0
    history: list[dict] = []

    def snapshot():
        return {k: v.copy() for k, v in best_values.items()}

    for epoch in range(1, train_cfg.max_epochs + 1):
        order = rng.permutation(len(train_prep))
        epoch_loss = 0.0
        try:
            for lo in range(0, len(order), train_cfg.batch_size):
                batch = [train_prep[i] for i in order[lo : lo + train_cfg.batch_size]]
                nm.zero_grads(params.values())
                for p in batch:
                    sev_pred, imp_pred = mdl.forward(
                        params, model_cfg, p["severity_in"], p["impact_in"], positions
                    )
                    loss = mdl.joint_loss(
                        sev_pred, p["severity_out_std"], imp_pred, p["impact_out"], weights
                    )
                    value = float(loss.value)
                    if not np.isfinite(value):
                        raise DivergenceError(
                            f"non-finite training loss at epoch {epoch}",
                            checkpoint=snapshot(),
                            history=history,
                        )
                    epoch_loss += value
                    nm.backward(nm.scale(loss, 1.0 / len(batch)))
                nm.adam_step(params, adam)
        except NumericsError as exc:
            raise DivergenceError(
                f"aborted at epoch {epoch}: {exc}", checkpoint=snapshot(), history=history
            ) from exc

        train_loss = epoch_loss / len(train_prep)
        val_loss = _mean_loss(params, model_cfg, weights, val_prep, positions)
        history.append(
            {
                "epoch": epoch,
                "train_loss": train_loss,
                "val_loss": val_loss,
                "lr": adam.learning_rate,
            }
        )
        if not np.isfinite(val_loss):
            raise DivergenceError(
                f"non-finite validation loss at epoch {epoch}",
                checkpoint=snapshot(),
                history=history,
            )

        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_values = {k: p.value.copy() for k, p in params.items()}
            stale = 0
            decay_stale = 0
        else:
            stale += 1
            decay_stale += 1
            if decay_stale >= train_cfg.lr_plateau:
                nm.decay_learning_rate(adam)
                decay_stale = 0
            if stale >= train_cfg.patience:
                break

    return TrainResult(
        params=best_values,
        model_config=model_cfg,
        train_config=train_cfg,
        standardizer=standardizer,
        history=history,
        best_val_loss=best_val,
        best_epoch=best_epoch,
    )


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


@dataclass
class PredictionSet:
    """De-standardized severity and [0,1]-clamped impact forecasts."""

    starts: list[int]
    severity_true: np.ndarray  # (n, horizon)
    severity_pred: np.ndarray
    impact_true: np.ndarray  # (n, horizon, 2 * delta)
    impact_pred: np.ndarray


@dataclass
class EvalResult:
    report: MetricReport
    predictions: PredictionSet


def impact_target_names(determinants) -> list[str]:
    names = list(determinants.names)
    return [f"social:{n}" for n in names] + [f"news:{n}" for n in names]


def evaluate(
    params: dict[str, np.ndarray],
    model_cfg: ModelConfig,
    standardizer: Standardizer,
    test_samples: list[WindowedSample],
    determinants=None,
) -> EvalResult:
    """Metrics over every (test sample, horizon step) pair.

    Severity predictions are de-standardized first; impact predictions
    are clamped to [0, 1] at this reporting boundary.  The report holds
    one row per target: severity, each per-source determinant, and the
    pooled impact aggregate.
    """
    if not test_samples:
        raise ValueError("test split is empty")
    if determinants is None:
        from .dsiq import DeterminantSet

        determinants = DeterminantSet()

    nodes = {k: nm.parameter(v, k) for k, v in params.items()}
    positions = nm.constant(mdl.sinusoidal_positions(model_cfg.lookback, model_cfg.width))
    prepared = _prepare(test_samples, standardizer, model_cfg)

    starts, sev_true, sev_pred, imp_true, imp_pred = [], [], [], [], []
    for p in prepared:
        s_node, i_node = mdl.forward(nodes, model_cfg, p["severity_in"], p["impact_in"], positions)
        starts.append(p["start"])
        sev_true.append(p["severity_out"])
        sev_pred.append(standardizer.inverse(s_node.value))
        imp_true.append(p["impact_out"])
        imp_pred.append(np.clip(i_node.value, 0.0, 1.0))

    predictions = PredictionSet(
        starts=starts,
        severity_true=np.array(sev_true),
        severity_pred=np.array(sev_pred),
        impact_true=np.array(imp_true),
        impact_pred=np.array(imp_pred),
    )

    report = MetricReport()
    report.per_target["severity"] = compute_metrics(
        predictions.severity_pred, predictions.severity_true
    )
    for j, name in enumerate(impact_target_names(determinants)):
        report.per_target[name] = compute_metrics(
            predictions.impact_pred[:, :, j], predictions.impact_true[:, :, j]
        )
    report.per_target["impact_all"] = compute_metrics(
        predictions.impact_pred, predictions.impact_true
    )
    return EvalResult(report=report, predictions=predictions)


# ---------------------------------------------------------------------------
# Ablations and baselines
# ---------------------------------------------------------------------------

ABLATION_VARIANTS = ("full", "no_social", "no_news", "no_attention")


def run_ablation(
    train_samples, val_samples, test_samples, model_cfg: ModelConfig, train_cfg: TrainConfig
) -> dict[str, EvalResult]:
    """Train and evaluate the four variants on shared splits and seed."""
    results = {}
    for variant in ABLATION_VARIANTS:
        cfg = replace(model_cfg, ablation=variant)
        trained = train(train_samples, val_samples, cfg, train_cfg)
        results[variant] = evaluate(
            trained.params, cfg, trained.standardizer, test_samples
        )
    return results


def baseline_persistence(test_samples: list[WindowedSample]) -> MetricReport:
    """Repeat the last observed severity across the horizon; no training."""
    if not test_samples:
        raise ValueError("test split is empty")
    pred = np.array([[s.severity_in[-1]] * len(s.severity_out) for s in test_samples])
    true = np.array([s.severity_out for s in test_samples])
    report = MetricReport()
    report.per_target["severity"] = compute_metrics(pred, true)
    return report


def baseline_linear_ar(
    train_samples: list[WindowedSample], test_samples: list[WindowedSample]
) -> MetricReport:
    """Least-squares map from the raw severity lookback to the horizon."""
    if not train_samples or not test_samples:
        raise ValueError("both splits must be non-empty")

    def design(samples):
        x = np.array([s.severity_in for s in samples], dtype=np.float64)
        return np.hstack([x, np.ones((len(samples), 1))])

    y_train = np.array([s.severity_out for s in train_samples], dtype=np.float64)
    coef, *_ = np.linalg.lstsq(design(train_samples), y_train, rcond=None)
    pred = design(test_samples) @ coef
    true = np.array([s.severity_out for s in test_samples])
    report = MetricReport()
    report.per_target["severity"] = compute_metrics(pred, true)
    return report


# ---------------------------------------------------------------------------
# Checkpoint and CSV plumbing
# ---------------------------------------------------------------------------


def save_run_checkpoint(path, result: TrainResult) -> None:
    config = {
        "model": result.model_config.to_dict(),
        "train": result.train_config.to_dict(),
    }
    extras = {
        "standardizer": {"mean": result.standardizer.mean, "std": result.standardizer.std},
        "best_val_loss": result.best_val_loss,
        "best_epoch": result.best_epoch,
    }
    nm.save_checkpoint(path, result.params, config, extras)


def load_run_checkpoint(path):
    """Returns (params, ModelConfig, train config dict, Standardizer)."""
    payload = nm.load_checkpoint(path)
    model_cfg = ModelConfig(**payload["config"]["model"])
    std = payload["extras"]["standardizer"]
    return (
        payload["params"],
        model_cfg,
        payload["config"]["train"],
        Standardizer(mean=std["mean"], std=std["std"]),
    )


def write_history_csv(path, history: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("epoch,train_loss,val_loss,lr\n")
        for row in history:
            fh.write(
                f"{row['epoch']},{row['train_loss']!r},{row['val_loss']!r},{row['lr']!r}\n"
            )


def write_metrics_csv(path, reports: dict[str, MetricReport]) -> None:
    """One row per (variant, target); float cells use repr for determinism."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("variant,target,MAE,MSE,RMSE,MFA\n")
        for variant, report in reports.items():
            for target, mae, mse, rmse, mfa in report.rows():
                fh.write(f"{variant},{target},{mae!r},{mse!r},{rmse!r},{mfa!r}\n")
