"""
Joint severity + impact forecasting
===================================

Two transformer-style encoders (impact channel, severity channel) feed
a bidirectional cross-attention block; a dense decoder reads both
cross-attended representations and emits the next weeks of severity and
the full impact vector at once.  Training minimizes the weighted sum of
the per-step severity and impact MSE terms, with early stopping on the
validation loss.
"""

import numpy as np

from side.core import chronological_split, make_windows
from side.model import ModelConfig
from side.train_eval import (
    TrainConfig,
    baseline_linear_ar,
    baseline_persistence,
    evaluate,
    train,
)

# Reuse the quantification demo's machinery to build an aligned dataset.
import importlib.util
import pathlib

_spec = importlib.util.spec_from_file_location(
    "impact_demo", pathlib.Path(__file__).with_name("02_impact_quantification.py")
)
_demo = importlib.util.module_from_spec(_spec)
_spec.loader.exec_module(_demo)
series, impacts = _demo.series, _demo.impacts

# Sliding windows: 20 weeks in, 4 weeks out, split 7:1:2 in time order.
samples = make_windows(series, impacts, lookback=20, horizon=4)
train_s, val_s, test_s = chronological_split(samples)
print(f"\n{len(samples)} windows -> {len(train_s)} train / {len(val_s)} val / {len(test_s)} test")

model_cfg = ModelConfig(lookback=20, horizon=4, width=16, hidden=32)
train_cfg = TrainConfig(max_epochs=20, patience=10, learning_rate=3e-3, seed=0)
result = train(train_s, val_s, model_cfg, train_cfg)
print(f"best val loss {result.best_val_loss:.4f} at epoch {result.best_epoch}")

# Severity is standardized inside the loop and de-standardized before
# metrics, so the numbers below are in DSCI points.
ev = evaluate(result.params, model_cfg, result.standardizer, test_s)
severity = ev.report.per_target["severity"]
print(f"\nseverity  MAE {severity.mae:7.2f}  RMSE {severity.rmse:7.2f}  MFA {severity.mfa:.3f}")
impact = ev.report.per_target["impact_all"]
print(f"impact    MAE {impact.mae:7.4f}  RMSE {impact.rmse:7.4f}  MFA {impact.mfa:.3f}")

for name in ("persistence", "linear_ar"):
    report = (
        baseline_persistence(test_s)
        if name == "persistence"
        else baseline_linear_ar(train_s, test_s)
    )
    m = report.per_target["severity"]
    print(f"{name:9s} MAE {m.mae:7.2f}  RMSE {m.rmse:7.2f}")

# A peek at one forecast window.
i = 0
print("\nwindow", ev.predictions.starts[i])
print("  actual   ", np.round(ev.predictions.severity_true[i], 1))
print("  predicted", np.round(ev.predictions.severity_pred[i], 1))
