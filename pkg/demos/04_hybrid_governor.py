"""Hybrid governor: a trained network proposes, the exact solver guarantees.

Pipeline in miniature: harvest (state, optimal shift) pairs from
exact-governed missions, fit a spline-edge network to the log shift
magnitude with the one-sided under-prediction penalty, then fly fresh
missions where the network's candidate is tried first and bisection only
runs when the candidate fails verification.  Safety is unchanged -- every
accepted shift is still rollout-verified -- but most bisections disappear.

Run from the repository root:  python3 demos/04_hybrid_governor.py
(three to four minutes; most of it is dataset generation)
"""

import numpy as np

from kanshift.governor import ScenarioFamily, generate_dataset, run_governed_mission
from kanshift.losses import LOG_MSRELU, LossSpec
from kanshift.network import KanNetwork
from kanshift.training import TrainConfig, evaluate_metrics, train

family = ScenarioFamily()
print("generating training data from exact-governed missions...")
dataset = generate_dataset(family, count=1200, seed=42)
print(
    f"  {dataset.t_star.size} samples from {dataset.missions} missions, "
    f"shift magnitudes {np.abs(dataset.t_star).min():.0f}..{np.abs(dataset.t_star).max():.0f} s"
)

spec = LossSpec(mode=LOG_MSRELU, theta_c=2.0, reg_weight=1e-5)
config = TrainConfig(epochs=450, batch_size=128, seed=5, lr=3e-3, weight_decay=1e-5, patience=80)
net = KanNetwork.build([dataset.features.shape[1], 8, 1], seed=5)
result = train(net, dataset.features, dataset.t_star, spec, config)
metrics = evaluate_metrics(net, dataset.features, dataset.t_star, spec)
print(
    f"trained: best val loss {result.best_val:.2e}, "
    f"log RMSE {metrics['rmse_log']:.4f}, shift RMSE {metrics['rmse_shift']:.1f} s, "
    f"under-prediction rate {metrics['under_prediction_rate']:.2f}"
)

rng = np.random.default_rng(7)
print("\nper-mission comparison on fresh initial conditions:")
print(f"{'mission':>8} {'exact oracle':>13} {'hybrid oracle':>14} {'NN accept':>10} {'violations':>11}")
for i in range(4):
    scenario = family.sample_scenario(rng)
    exact = run_governed_mission(scenario, "exact")
    hybrid = run_governed_mission(scenario, "hybrid", net=net, spec=spec)
    print(
        f"{i:>8} {exact.trace.oracle_rollouts:>13} {hybrid.trace.oracle_rollouts:>14} "
        f"{hybrid.trace.nn_accept_rate:>10.2f} {hybrid.violations:>11}"
    )
print("\nthe hybrid mode never skips verification: candidates are accepted only")
print("after their full-horizon rollout clears every constraint margin.")
