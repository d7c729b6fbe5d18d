"""Why optimization beats estimation, on the simplest possible scenario.

The Toy benchmark satisfies every textbook filter assumption except one: the
Doppler row of the observation matrix depends on the (estimated) target
position. Noise estimation recovers the true sensor covariance essentially
perfectly and still loses badly, because the linearization error acts as
extra, unaccounted Doppler noise. The optimizer discovers exactly that: it
inflates the Doppler variance relative to the position variances and cuts
the test MSE by well over half.

Runtime: about a minute.
"""

import numpy as np

from kftune import simulator
from kftune.estimation import estimate_Q, estimate_R
from kftune.evaluation import doppler_inflation_estimate, evaluate_model, paired_z
from kftune.filters import radar_variant
from kftune.optimizer import TrainConfig, tune

train = simulator.make_dataset("Toy", 120, seed=101)
test = simulator.make_dataset("Toy", 300, seed=9000)
cfg = radar_variant("KF")
R_TRUE = np.diag([100.0**2, 100.0**2, 100.0**2, 5.0**2])

Q_est = estimate_Q(train, cfg.motion)
R_est = estimate_R(train, cfg.obs)
print("estimated R diagonal :", np.round(np.diag(R_est), 1))
print("true sensor R diagonal:", np.diag(R_TRUE))
print("-> estimation is essentially perfect. Now evaluate it:\n")

ev_est = evaluate_model("KF", test, cfg, Q_est, R_est)
print(f"estimated-parameters test MSE: {ev_est.mse:,.0f} m^2")

print("\ntuning (Adam on the Cholesky parameters, ~1 min)...")
result = tune(train, cfg, TrainConfig(epochs=8, seed=17))
ev_opt = evaluate_model("OKF", test, cfg, result.Q, result.R)
print(f"optimized-parameters test MSE: {ev_opt.mse:,.0f} m^2")
z = paired_z(ev_est.per_target_rmse, ev_opt.per_target_rmse)
print(f"reduction: {100 * (1 - ev_opt.mse / ev_est.mse):.1f}%   paired z = {z:.1f}\n")

print("optimized R diagonal:", np.round(np.diag(result.R), 1))
ratio_est = R_est[3, 3] / np.mean(np.diag(R_est)[:3])
ratio_opt = result.R[3, 3] / np.mean(np.diag(result.R)[:3])
print(f"Doppler-to-position variance ratio: {ratio_est:.4f} -> {ratio_opt:.4f}")

diag = doppler_inflation_estimate(
    test, cfg, Q_est, R_est, R_true=R_TRUE, R_estimated=R_est, R_optimized=result.R
)
print(
    f"\neffective-noise analysis: measured linearization-induced Doppler "
    f"variance C = {diag['C']:.1f} (m/s)^2"
)
print("predicted effective R diagonal:", np.round(np.diag(diag["R_tilde"]), 1))
print("optimizer moved the Doppler variance in the predicted direction:",
      diag["shift_sign_matches"])
