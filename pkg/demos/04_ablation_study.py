"""
Ablating the input channels and the attention block
====================================================

Four variants trained on shared splits and seed: the full model, one
with the social half of every input zeroed, one with the news half
zeroed, and one that hands the encoder outputs straight to the decoder
instead of cross-attending them.

This demo stays deliberately small (80 weeks, one seed), so single-run
variance can scramble the ranking.  The seed-averaged experiment in
tests/test_acceptance.py (330 weeks, 5 seeds, social leading severity
by 4 weeks) is where the expected ordering shows: the full model beats
the variant without social input, and removing attention does not help.
"""

import importlib.util
import pathlib

from side.core import chronological_split, make_windows
from side.model import ModelConfig
from side.train_eval import TrainConfig, run_ablation

_spec = importlib.util.spec_from_file_location(
    "impact_demo", pathlib.Path(__file__).with_name("02_impact_quantification.py")
)
_demo = importlib.util.module_from_spec(_spec)
_spec.loader.exec_module(_demo)

samples = make_windows(_demo.series, _demo.impacts, lookback=20, horizon=4)
train_s, val_s, test_s = chronological_split(samples)

model_cfg = ModelConfig(lookback=20, horizon=4, width=16, hidden=32)
train_cfg = TrainConfig(max_epochs=20, patience=10, learning_rate=3e-3, seed=0)

print("\ntraining 4 variants on shared splits ...")
results = run_ablation(train_s, val_s, test_s, model_cfg, train_cfg)

print(f"\n{'variant':14s} {'MAE':>8s} {'MSE':>10s} {'RMSE':>8s} {'MFA':>7s}")
for variant, res in results.items():
    m = res.report.per_target["severity"]
    print(f"{variant:14s} {m.mae:8.2f} {m.mse:10.1f} {m.rmse:8.2f} {m.mfa:7.3f}")
