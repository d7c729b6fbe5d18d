"""Kalman / extended-Kalman recursion with the radar and video observation
models, in both a plain numpy form (evaluation, tracking) and a tape-recorded
form whose backward pass yields exact gradients of the rollout loss with
respect to the Cholesky parameters of Q and R.

State layouts:
  radar / linear sanity: (px, py, pz, vx, vy, vz), meters and m/s
  video:                 (x, y, w, h, vx, vy), pixels and px/frame
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import autodiff as ad
from .errors import ConfigError, ContractError, DefinitenessError, ShapeError, SingularityError

LOG_2PI = float(np.log(2.0 * np.pi))

RADAR_KINDS = ("doppler_pseudo", "doppler_jacobian")
ALL_KINDS = RADAR_KINDS + ("linear_pos", "video")


@dataclass
class FilterState:
    """Gaussian belief over the target state."""

    x: np.ndarray
    P: np.ndarray

    def copy(self) -> "FilterState":
        return FilterState(self.x.copy(), self.P.copy())


@dataclass
class MotionModel:
    F: np.ndarray
    dt: float

    @staticmethod
    def constant_velocity(dt: float = 1.0) -> "MotionModel":
        F = np.eye(6)
        F[:3, 3:] = dt * np.eye(3)
        return MotionModel(F, dt)

    @staticmethod
    def video() -> "MotionModel":
        # constant velocity in (x, y), constant size; dt is one frame
        F = np.eye(6)
        F[0, 4] = 1.0
        F[1, 5] = 1.0
        return MotionModel(F, 1.0)


@dataclass
class ObservationModel:
    """Which observation matrix the filter runs, and in which frame R lives.

    kind:   doppler_pseudo | doppler_jacobian | linear_pos | video
    r_frame: cartesian | polar (polar only for the radar kinds)
    h_eval: state | observation -- where the Doppler row is linearized;
            "observation" substitutes the observed position for the
            predicted one (velocity still comes from the prediction).
    """

    kind: str
    r_frame: str = "cartesian"
    h_eval: str = "state"

    def __post_init__(self):
        if self.kind not in ALL_KINDS:
            raise ConfigError(f"unknown observation kind {self.kind!r}")
        if self.r_frame not in ("cartesian", "polar"):
            raise ConfigError(f"unknown R frame {self.r_frame!r}")
        if self.r_frame == "polar" and self.kind not in RADAR_KINDS:
            raise ConfigError("polar R is only defined for the radar models")
        if self.h_eval not in ("state", "observation"):
            raise ConfigError(f"unknown h_eval {self.h_eval!r}")

    @property
    def obs_dim(self) -> int:
        return 3 if self.kind == "linear_pos" else 4

    @property
    def pos_dim(self) -> int:
        return 2 if self.kind == "video" else 3


@dataclass
class Observation:
    """One measurement. `z` is Cartesian (radar: x, y, z, Doppler; video:
    x, y, w, h; linear: x, y, z); `polar` carries (range, az, el, Doppler)
    for radar observations."""

    z: np.ndarray
    t: int = 0
    polar: np.ndarray | None = None


@dataclass
class InitConfig:
    """Initial covariance for the educated first-observation initialization."""

    pos_var: float = 200.0**2
    vel_var: float = 150.0**2
    size_var: float = 100.0


@dataclass
class FilterConfig:
    motion: MotionModel
    obs: ObservationModel
    init: InitConfig = field(default_factory=InitConfig)

    @property
    def state_dim(self) -> int:
        return self.motion.F.shape[0]


RADAR_VARIANTS = {
    "KF": ("doppler_pseudo", "cartesian"),
    "KFp": ("doppler_pseudo", "polar"),
    "EKF": ("doppler_jacobian", "cartesian"),
    "EKFp": ("doppler_jacobian", "polar"),
}


def radar_variant(name: str, dt: float = 1.0, h_eval: str = "state") -> FilterConfig:
    """One of the four radar baselines: KF, KFp, EKF, EKFp."""
    try:
        kind, r_frame = RADAR_VARIANTS[name]
    except KeyError:
        raise ConfigError(f"unknown radar variant {name!r}") from None
    return FilterConfig(
        MotionModel.constant_velocity(dt), ObservationModel(kind, r_frame, h_eval)
    )


def video_variant() -> FilterConfig:
    return FilterConfig(
        MotionModel.video(),
        ObservationModel("video"),
        InitConfig(pos_var=100.0, vel_var=25.0, size_var=100.0),
    )


def linear_variant(dt: float = 1.0) -> FilterConfig:
    return FilterConfig(MotionModel.constant_velocity(dt), ObservationModel("linear_pos"))


# ---------------------------------------------------------------------------
# observation matrices


def doppler_h(pos: np.ndarray, vel: np.ndarray, jacobian: bool) -> np.ndarray:
    """4x6 radar observation matrix at the given linearization point.

    Pseudo-linear mode fills the Doppler row with the radial unit vector in
    the velocity slots; Jacobian mode is the full derivative of
    h(x) = (x, y, z, pos·vel/|pos|), adding the position-derivative terms.
    """
    r = float(np.linalg.norm(pos))
    if r < 1e-6:
        raise SingularityError("target at the radar origin (range < 1e-6 m)")
    H = np.zeros((4, 6))
    H[:3, :3] = np.eye(3)
    u = pos / r
    H[3, 3:] = u
    if jacobian:
        H[3, :3] = vel / r - pos * float(pos @ vel) / r**3
    return H


def doppler_observation_matrix(s: FilterState, z: Observation, om: ObservationModel) -> np.ndarray:
    """Radar H for this step, linearized per om.kind / om.h_eval."""
    pos = z.z[:3] if om.h_eval == "observation" else s.x[:3]
    return doppler_h(pos, s.x[3:], om.kind == "doppler_jacobian")


LINEAR_POS_H = np.hstack([np.eye(3), np.zeros((3, 3))])

VIDEO_H = np.hstack([np.eye(4), np.zeros((4, 2))])


def observation_matrix(s: FilterState, z: Observation, om: ObservationModel) -> np.ndarray:
    if om.kind in RADAR_KINDS:
        return doppler_observation_matrix(s, z, om)
    if om.kind == "linear_pos":
        return LINEAR_POS_H
    return VIDEO_H


def polar_jacobian(polar: np.ndarray) -> np.ndarray:
    """Jacobian of (range, az, el, Doppler) -> (x, y, z, Doppler) at a polar
    point. Conventions: x = r cos(el) cos(az), y = r cos(el) sin(az),
    z = r sin(el); Doppler passes through."""
    r, az, el = float(polar[0]), float(polar[1]), float(polar[2])
    lim = np.pi / 2 - 1e-6
    if abs(el) > lim:
        warnings.warn(
            f"elevation {el:.6f} degenerate for the polar Jacobian; clamping",
            stacklevel=2,
        )
        el = np.clip(el, -lim, lim)
    ca, sa = np.cos(az), np.sin(az)
    ce, se = np.cos(el), np.sin(el)
    J = np.zeros((4, 4))
    J[0, :3] = (ce * ca, -r * ce * sa, -r * se * ca)
    J[1, :3] = (ce * sa, r * ce * ca, -r * se * sa)
    J[2, :3] = (se, 0.0, r * ce)
    J[3, 3] = 1.0
    return J


def polar_R_to_cartesian(R_polar: np.ndarray, z: Observation) -> np.ndarray:
    """Push a polar-frame noise covariance through the local Jacobian of the
    polar-to-Cartesian map at the observed point."""
    if z.polar is None:
        raise ContractError("observation carries no polar coordinates")
    if z.polar[0] <= 0:
        raise ContractError("polar range must be positive")
    J = polar_jacobian(z.polar)
    out = J @ R_polar @ J.T
    return 0.5 * (out + out.T)


def init_state(z: Observation, cfg: FilterConfig) -> FilterState:
    """Educated initialization from the first observation: observed position,
    Doppler-projected radial velocity (radar) or zero velocity, and a
    diagonal prior covariance from cfg.init."""
    om, ic = cfg.obs, cfg.init
    if om.kind in RADAR_KINDS:
        pos = z.z[:3].astype(float)
        r = float(np.linalg.norm(pos))
        if r < 1e-6:
            raise SingularityError("first observation at the radar origin")
        vel = z.z[3] * pos / r
        P = np.diag([ic.pos_var] * 3 + [ic.vel_var] * 3)
        return FilterState(np.concatenate([pos, vel]), P)
    if om.kind == "linear_pos":
        x = np.concatenate([z.z[:3].astype(float), np.zeros(3)])
        P = np.diag([ic.pos_var] * 3 + [ic.vel_var] * 3)
        return FilterState(x, P)
    # video: (x, y, w, h) observed, velocities start at zero
    x = np.concatenate([z.z[:4].astype(float), np.zeros(2)])
    P = np.diag([ic.pos_var, ic.pos_var, ic.size_var, ic.size_var, ic.vel_var, ic.vel_var])
    return FilterState(x, P)


# ---------------------------------------------------------------------------
# plain recursion


def _spd_cho(S: np.ndarray):
    try:
        return cho_factor(0.5 * (S + S.T), lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise DefinitenessError(f"innovation/covariance matrix not SPD: {exc}") from exc


def predict(s: FilterState, m: MotionModel, Q: np.ndarray) -> FilterState:
    F = m.F
    if s.x.shape[0] != F.shape[0] or Q.shape != F.shape:
        raise ShapeError("predict: state/F/Q dimensions disagree")
    return FilterState(F @ s.x, F @ s.P @ F.T + Q)


@dataclass
class InnovationStats:
    y: np.ndarray
    S: np.ndarray
    H: np.ndarray
    R_used: np.ndarray


def kf_update_core(
    x: np.ndarray, P: np.ndarray, z: np.ndarray, H: np.ndarray, R: np.ndarray
) -> tuple[np.ndarray, np.ndarray, InnovationStats]:
    """Textbook measurement update for an arbitrary linear(ized) H:
    y = z - Hx, S = HPHᵀ + R, K = PHᵀS⁻¹, x += Ky, P = (I - KH)P,
    then explicit symmetrization of P."""
    HP = H @ P
    S = HP @ H.T + R
    c = _spd_cho(S)
    y = z - H @ x
    K = cho_solve(c, HP, check_finite=False).T
    x_new = x + K @ y
    P_new = P - K @ HP
    P_new = 0.5 * (P_new + P_new.T)
    return x_new, P_new, InnovationStats(y, S, H, R)


def update(
    s: FilterState, z: Observation, om: ObservationModel, R: np.ndarray
) -> tuple[FilterState, InnovationStats]:
    """Measurement update. Returns the posterior state and the innovation
    statistics (used by the matcher for assignment likelihoods)."""
    H = observation_matrix(s, z, om)
    R_used = polar_R_to_cartesian(R, z) if om.r_frame == "polar" else R
    x_new, P_new, stats = kf_update_core(s.x, s.P, z.z, H, R_used)
    return FilterState(x_new, P_new), stats


def gaussian_nll(err: np.ndarray, cov: np.ndarray) -> float:
    """Negative log density of a zero-mean Gaussian at `err`."""
    c = _spd_cho(cov)
    quad = float(err @ cho_solve(c, err, check_finite=False))
    ld = 2.0 * float(np.sum(np.log(np.diag(c[0]))))
    return 0.5 * (quad + ld + len(err) * LOG_2PI)


def nll_prediction(s_pred: FilterState, x_true_pos: np.ndarray, pos_dim: int = 3) -> float:
    """Gaussian NLL of the true position under the position marginal of the
    post-prediction state."""
    mu = s_pred.x[:pos_dim]
    sigma = s_pred.P[:pos_dim, :pos_dim]
    return gaussian_nll(np.asarray(x_true_pos, dtype=float) - mu, sigma)


def rollout(
    states: np.ndarray,
    observations: list[Observation],
    cfg: FilterConfig,
    Q: np.ndarray,
    R: np.ndarray,
    check_spd: bool = False,
    want_nll: bool = True,
):
    """Run the filter over one target. `states` holds the ground truth
    (T x state_dim); observation t is used to update at step t, with step 0
    consumed by the initialization.

    Returns a dict of per-step arrays over t = 1..T-1:
      sq_update -- squared position error after the update
      sq_pred   -- squared position error after the prediction
      nll_pred  -- position NLL after the prediction (NaN when want_nll=False)
    """
    T = len(observations)
    if states.shape[0] != T:
        raise ContractError("state and observation sequences differ in length")
    pos_dim = cfg.obs.pos_dim
    s = init_state(observations[0], cfg)
    sq_update = np.empty(T - 1)
    sq_pred = np.empty(T - 1)
    nll_pred = np.full(T - 1, np.nan)
    for t in range(1, T):
        s = predict(s, cfg.motion, Q)
        true_pos = states[t, :pos_dim]
        err_pred = true_pos - s.x[:pos_dim]
        sq_pred[t - 1] = float(err_pred @ err_pred)
        if want_nll:
            nll_pred[t - 1] = nll_prediction(s, true_pos, pos_dim)
        s, _ = update(s, observations[t], cfg.obs, R)
        if check_spd:
            np.linalg.cholesky(s.P)  # raises if covariance left the SPD cone
        err_upd = true_pos - s.x[:pos_dim]
        sq_update[t - 1] = float(err_upd @ err_upd)
    return {"sq_update": sq_update, "sq_pred": sq_pred, "nll_pred": nll_pred}


# ---------------------------------------------------------------------------
# differentiable recursion


def _doppler_h_var(x_eval: ad.Var, jacobian: bool) -> ad.Var:
    """Tape node for the radar observation matrix evaluated at a state Var.

    The backward rule propagates the dependence of the Doppler row on the
    linearization point, so gradients through the filter history are exact.
    """
    x = x_eval.value[:, 0]
    pos, vel = x[:3], x[3:]
    H = doppler_h(pos, vel, jacobian)
    r = float(np.linalg.norm(pos))
    u = pos / r
    M = (np.eye(3) - np.outer(u, u)) / r  # d(unit radial)/d(pos)

    def d_x(g):
        gp, gv = g[3, :3], g[3, 3:]
        dp = M @ gv
        dv = np.zeros(3)
        if jacobian:
            pv = float(pos @ vel)
            ddp = (
                -(np.outer(vel, pos) + np.outer(pos, vel) + pv * np.eye(3)) / r**3
                + 3.0 * pv * np.outer(pos, pos) / r**5
            )
            dp = dp + ddp @ gp
            dv = M @ gp
        return np.concatenate([dp, dv]).reshape(-1, 1)

    return x_eval.tape.record(H, (x_eval,), (d_x,))


_VEL_ONLY = np.diag([0.0, 0.0, 0.0, 1.0, 1.0, 1.0])


def _observation_matrix_var(
    tape: ad.Tape, x_pred: ad.Var, z: Observation, om: ObservationModel
) -> ad.Var:
    if om.kind == "linear_pos":
        return tape.constant(LINEAR_POS_H)
    if om.kind == "video":
        return tape.constant(VIDEO_H)
    if om.h_eval == "observation":
        # observed position, predicted velocity
        pos_part = np.concatenate([z.z[:3], np.zeros(3)])
        x_eval = ad.add(
            ad.matmul(tape.constant(_VEL_ONLY), x_pred), tape.constant(pos_part)
        )
    else:
        x_eval = x_pred
    return _doppler_h_var(x_eval, om.kind == "doppler_jacobian")


def rollout_loss_var(
    tape: ad.Tape,
    theta_q: ad.Var,
    theta_r: ad.Var,
    states: np.ndarray,
    observations: list[Observation],
    cfg: FilterConfig,
    w_mse: float = 1.0,
    w_nll: float = 1.0,
    mse_phase: str = "update",
) -> ad.Var:
    """Record the full rollout loss of one target on `tape`.

    loss = w_mse * mean_t(squared position error at `mse_phase`)
         + w_nll * mean_t(position NLL after prediction)
    """
    from .spd import spd_var

    if mse_phase not in ("update", "predict"):
        raise ConfigError(f"unknown mse_phase {mse_phase!r}")
    T = len(observations)
    if states.shape[0] != T:
        raise ContractError("state and observation sequences differ in length")
    n = cfg.state_dim
    pos_dim = cfg.obs.pos_dim
    Q = spd_var(tape, theta_q, n)
    R = spd_var(tape, theta_r, cfg.obs.obs_dim)

    F = tape.constant(cfg.motion.F)
    G = np.zeros((pos_dim, n))
    G[:, :pos_dim] = np.eye(pos_dim)
    Gv = tape.constant(G)

    s0 = init_state(observations[0], cfg)
    x = tape.constant(s0.x)
    P = tape.constant(s0.P)

    mse_terms: list[ad.Var] = []
    nll_terms: list[ad.Var] = []  # quad + logdet; the k*log(2pi) shift is added once
    for t in range(1, T):
        x = ad.matmul(F, x)
        P = ad.add(ad.sandwich(cfg.motion.F, P), Q)
        true_pos = tape.constant(states[t, :pos_dim])
        if w_nll != 0.0:
            mu = ad.matmul(Gv, x)
            sig = ad.sandwich(G, P)
            err = ad.sub(true_pos, mu)
            nll_terms.append(ad.add(ad.quadform(err, sig), ad.logdet(sig)))
        if w_mse != 0.0 and mse_phase == "predict":
            e = ad.sub(true_pos, ad.matmul(Gv, x))
            mse_terms.append(ad.sum_squares(e))

        z = observations[t]
        H = _observation_matrix_var(tape, x, z, cfg.obs)
        if cfg.obs.r_frame == "polar":
            R_used = ad.sandwich(polar_jacobian(z.polar), R)
        else:
            R_used = R
        HP = ad.matmul(H, P)
        S = ad.add(ad.matmul(HP, ad.transpose(H)), R_used)
        y = ad.sub(tape.constant(z.z), ad.matmul(H, x))
        K = ad.transpose(ad.solve(S, HP))
        x = ad.add(x, ad.matmul(K, y))
        P = ad.symmetrize(ad.sub(P, ad.matmul(K, HP)))
        if w_mse != 0.0 and mse_phase == "update":
            e = ad.sub(true_pos, ad.matmul(Gv, x))
            mse_terms.append(ad.sum_squares(e))

    steps = T - 1
    parts: list[ad.Var] = []
    if mse_terms:
        parts.append(ad.scale(ad.add_n(mse_terms), w_mse / steps))
    if nll_terms:
        nll = ad.scale(ad.add_n(nll_terms), 0.5 * w_nll / steps)
        parts.append(ad.add(nll, tape.constant(0.5 * w_nll * pos_dim * LOG_2PI)))
    if not parts:
        return tape.constant(0.0)
    return parts[0] if len(parts) == 1 else ad.add(parts[0], parts[1])


def rollout_loss(
    states: np.ndarray,
    observations: list[Observation],
    cfg: FilterConfig,
    theta_q: np.ndarray,
    theta_r: np.ndarray,
    w_mse: float = 1.0,
    w_nll: float = 1.0,
    mse_phase: str = "update",
) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss of one target and its exact gradients w.r.t. both parameter
    vectors. Convenience wrapper building a fresh tape."""
    tape = ad.Tape()
    tq = tape.variable(theta_q)
    tr = tape.variable(theta_r)
    loss = rollout_loss_var(
        tape, tq, tr, states, observations, cfg, w_mse, w_nll, mse_phase
    )
    grads = ad.backward(loss)
    zq = np.zeros(len(theta_q))
    zr = np.zeros(len(theta_r))
    gq = grads.get(tq.index)
    gr = grads.get(tr.index)
    return (
        float(loss.value[0, 0]),
        zq if gq is None else gq[:, 0],
        zr if gr is None else gr[:, 0],
    )
