"""Grey-box load model, innovation predictor and parameter estimation.

The continuous model has states (dE'x, dE'y, ds), inputs (dV, dtheta) and
outputs (dP, dQ); every matrix entry is an explicit function of the physical
parameters, obtained by linearizing the third-order motor model plus the
static constant-impedance part at the operating point.  Discretization is
exact zero-order hold.  The one-step predictor comes from the steady-state
Kalman gain of the discrete model, and identification minimizes the mean
squared prediction error over the free physical parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize

from loadsysid.constants import OMEGA_S
from loadsysid.errors import (
    CaseValidationError,
    IdentificationError,
    RiccatiError,
    ToolkitError,
)
from loadsysid.motor import LoadParameters, emf_steady_state

# Default free parameters.  The equilibrium EMF pair is tied to the motor
# steady-state relation at (X, Xp, Td0p, s0, V0, theta0) unless explicitly
# freed; untying it opens a flat escape direction in which the optimizer
# shrinks the deterministic path and inflates the noise gain.
FREE_DEFAULT = ("X", "Xp", "Td0p", "Tj", "s0")
FREE_ALL = ("X", "Xp", "Td0p", "Tj", "s0", "Exp0", "Eyp0", "Pz", "Qz")

NOISE_CHANNELS = ("torque", "emf-wrong", "custom")


@dataclass
class GreyBoxContinuous:
    a: np.ndarray  # 3x3
    b: np.ndarray  # 3x2
    c: np.ndarray  # 2x3
    d: np.ndarray  # 2x2
    g: np.ndarray  # 3xm disturbance input
    h: np.ndarray  # 2xm disturbance feedthrough

    def __post_init__(self):
        shapes = (self.a.shape, self.b.shape, self.c.shape, self.d.shape)
        if shapes != ((3, 3), (3, 2), (2, 3), (2, 2)):
            raise ToolkitError(f"bad grey-box dimensions {shapes}")
        for m in (self.a, self.b, self.c, self.d, self.g, self.h):
            if not np.all(np.isfinite(m)):
                raise ToolkitError("non-finite grey-box matrix entry")


@dataclass
class GreyBoxDiscrete:
    """Sampled model.  ``bd`` is the total zero-order-hold input matrix;
    when ``bd_ramp`` is set the state update adds bd_ramp (u(k+1) - u(k)),
    the first-order-hold correction for smooth intersample inputs."""

    ad: np.ndarray
    bd: np.ndarray
    cd: np.ndarray
    dd: np.ndarray
    gd: np.ndarray
    hd: np.ndarray
    ts: float
    bd_ramp: np.ndarray | None = None


@dataclass
class NoiseConfig:
    """Disturbance and measurement noise description.

    ``channel`` selects the pattern of the disturbance input: "torque"
    enters the slip equation scaled by 1/Tj, "emf-wrong" enters the EMF-y
    equation scaled by 1/T'd0 (a deliberately misplaced channel), "custom"
    uses explicitly supplied G and H.  ``rm`` is a conditioning floor for
    the measurement covariance; it is kept far below the innovation
    variances so it does not distort their relative weighting.
    """

    q: np.ndarray = field(default_factory=lambda: np.array([[0.002]]))
    rm: np.ndarray = field(default_factory=lambda: 1e-10 * np.eye(2))
    ncross: np.ndarray | None = None
    channel: str = "torque"
    g_custom: np.ndarray | None = None
    h_custom: np.ndarray | None = None
    # Measurement-noise variances of the two input channels (dV, dtheta).
    # Input noise reaches the state through Bd and the outputs through Dd;
    # the gain solver folds both paths into the noise model, so noised
    # inputs do not bias the estimate.
    input_variance: tuple = (0.0, 0.0)

    def __post_init__(self):
        self.q = np.atleast_2d(np.asarray(self.q, dtype=float))
        self.rm = np.atleast_2d(np.asarray(self.rm, dtype=float))
        self.input_variance = tuple(np.broadcast_to(
            np.asarray(self.input_variance, dtype=float), (2,)))
        if any(v < 0 for v in self.input_variance):
            raise ToolkitError("input variances must be non-negative")
        if self.ncross is None:
            self.ncross = np.zeros((self.q.shape[0], self.rm.shape[0]))
        self.ncross = np.atleast_2d(np.asarray(self.ncross, dtype=float))
        if self.channel not in NOISE_CHANNELS:
            raise ToolkitError(f"unknown noise channel {self.channel!r}")
        for m, name in ((self.q, "q"), (self.rm, "rm")):
            if not np.allclose(m, m.T, atol=1e-12):
                raise ToolkitError(f"{name} must be symmetric")
            if np.min(np.linalg.eigvalsh(m)) < -1e-12:
                raise ToolkitError(f"{name} must be positive semidefinite")
        stacked = np.block([[self.q, self.ncross], [self.ncross.T, self.rm]])
        if np.min(np.linalg.eigvalsh(stacked)) < -1e-10:
            raise ToolkitError("stacked noise covariance must be PSD")

    @property
    def m(self):
        return self.q.shape[0]


@dataclass
class InnovationPredictor:
    kd: np.ndarray
    p: np.ndarray
    ad_k: np.ndarray  # Ad - Kd Cd
    bd_k: np.ndarray  # Bd - Kd Dd
    cd: np.ndarray
    dd: np.ndarray
    residual: float
    ts: float
    innovation_cov: np.ndarray | None = None

    def spectral_radius(self):
        return float(np.max(np.abs(np.linalg.eigvals(self.ad_k))))


@dataclass
class IdentResult:
    """Estimation outcome.  ``loss`` is the minimized criterion (Gaussian
    likelihood rate for the innovation predictor, quadratic output error
    for the baseline); ``quad_loss`` is always the mean squared innovation
    norm at the estimate."""

    params: LoadParameters
    loss: float
    initial_loss: float
    quad_loss: float
    trace: list
    fit: dict
    converged: bool
    at_bound: list
    method: str
    starts: list
    seed: int | None = None
    meta: dict = field(default_factory=dict)


def noise_channel_matrices(noise, params):
    """Disturbance input pattern G (3xm) and feedthrough H (2xm)."""
    m = noise.m
    if noise.channel == "torque":
        g = np.zeros((3, m))
        g[2, 0] = 1.0 / params.Tj
        h = np.zeros((2, m))
    elif noise.channel == "emf-wrong":
        g = np.zeros((3, m))
        g[1, 0] = 1.0 / params.Td0p
        h = np.zeros((2, m))
    else:
        if noise.g_custom is None:
            raise ToolkitError("custom channel requires g_custom")
        g = np.atleast_2d(np.asarray(noise.g_custom, dtype=float))
        h = (
            np.zeros((2, m))
            if noise.h_custom is None
            else np.atleast_2d(np.asarray(noise.h_custom, dtype=float))
        )
    return g, h


def assemble_continuous(params, noise):
    """Continuous grey-box matrices at the operating point of ``params``."""
    params.validate()
    X, Xp, Td0p, Tj = params.X, params.Xp, params.Td0p, params.Tj
    s0, ex0, ey0 = params.s0, params.Exp0, params.Eyp0
    v0, th0 = params.V0, params.theta0
    ct, st = math.cos(th0), math.sin(th0)
    k_emf = 1.0 / (Xp * Td0p)

    a = np.array([
        [-X * k_emf, s0 * OMEGA_S, ey0 * OMEGA_S],
        [-s0 * OMEGA_S, -X * k_emf, -ex0 * OMEGA_S],
        [-v0 * st / (Xp * Tj), v0 * ct / (Xp * Tj), 0.0],
    ])
    kb = (X - Xp) * k_emf
    b = np.array([
        [kb * ct, -kb * v0 * st],
        [kb * st, kb * v0 * ct],
        [-(ex0 * st - ey0 * ct) / (Xp * Tj), -v0 * (ex0 * ct + ey0 * st) / (Xp * Tj)],
    ])
    c = np.array([
        [v0 * st / Xp, -v0 * ct / Xp, 0.0],
        [-v0 * ct / Xp, -v0 * st / Xp, 0.0],
    ])
    d = np.array([
        [(ex0 * st - ey0 * ct) / Xp + 2.0 * params.Pz / v0,
         v0 * (ex0 * ct + ey0 * st) / Xp],
        [(2.0 * v0 - ex0 * ct - ey0 * st) / Xp + 2.0 * params.Qz / v0,
         v0 * (ex0 * st - ey0 * ct) / Xp],
    ])
    g, h = noise_channel_matrices(noise, params)
    return GreyBoxContinuous(a=a, b=b, c=c, d=d, g=g, h=h)


def discretize_zoh(cont, ts, input_hold="zoh"):
    """Exact zero-order-hold discretization via the augmented exponential.

    With ``input_hold="foh"`` the deterministic input path additionally gets
    the first-order-hold ramp matrix (``bd_ramp``); the disturbance path is
    always zero-order hold, matching how the disturbance is realized.
    """
    if ts <= 0:
        raise ToolkitError(f"sample period must be positive, got {ts}")
    nx = cont.a.shape[0]
    eye = np.eye(nx)
    # Van Loan triple block: exp gives e^{A ts}, W0 = int e^{A(ts-s)} ds and
    # W1s = int e^{A(ts-s)} s ds, all robust to singular A.
    m = np.zeros((3 * nx, 3 * nx))
    m[:nx, :nx] = cont.a * ts
    m[:nx, nx:2 * nx] = eye * ts
    m[nx:2 * nx, 2 * nx:] = eye * ts
    phi = expm(m)
    ad = phi[:nx, :nx]
    w0 = phi[:nx, nx:2 * nx]
    w1s = phi[:nx, 2 * nx:]
    bd_ramp = None
    if input_hold == "foh":
        bd_ramp = (w1s / ts) @ cont.b
    elif input_hold != "zoh":
        raise ToolkitError(f"unknown input hold {input_hold!r}")
    return GreyBoxDiscrete(
        ad=ad,
        bd=w0 @ cont.b,
        cd=cont.c.copy(),
        dd=cont.d.copy(),
        gd=w0 @ cont.g,
        hd=cont.h.copy(),
        ts=float(ts),
        bd_ramp=bd_ramp,
    )


def dare_step(p, ad, cd, nbar, rbar, qbar):
    """One fixed-point application of the Riccati map."""
    s = cd @ p @ cd.T + rbar
    k = np.linalg.solve(s.T, (ad @ p @ cd.T + nbar).T).T
    return ad @ p @ ad.T - k @ (ad @ p @ cd.T + nbar).T + qbar


def solve_dare(disc, noise, tol=1e-12, max_iter=120):
    """Stabilizing solution of the steady-state Riccati equation.

    Uses the structure-preserving doubling iteration after absorbing the
    cross covariance, then forms the steady-state Kalman gain.
    """
    ad, cd, gd, hd = disc.ad, disc.cd, disc.gd, disc.hd
    q, rm, ncr = noise.q, noise.rm, noise.ncross
    nbar = gd @ (q @ hd.T + ncr)
    rbar = rm + hd @ ncr + ncr.T @ hd.T + hd @ q @ hd.T
    qbar = gd @ q @ gd.T
    if any(v > 0 for v in noise.input_variance):
        siu = np.diag(noise.input_variance)
        nbar = nbar + disc.bd @ siu @ disc.dd.T
        rbar = rbar + disc.dd @ siu @ disc.dd.T
        qbar = qbar + disc.bd @ siu @ disc.bd.T
    if np.linalg.cond(rbar) > 1e14:
        raise RiccatiError(
            "effective measurement covariance is singular; raise the Rm floor"
        )
    rbar_inv = np.linalg.inv(rbar)
    a_hat = ad - nbar @ rbar_inv @ cd
    q_hat = qbar - nbar @ rbar_inv @ nbar.T

    # Doubling iteration on the transformed filter Riccati equation.
    a_k = a_hat.T.copy()
    g_k = cd.T @ rbar_inv @ cd
    h_k = q_hat.copy()
    eye = np.eye(ad.shape[0])
    converged = False
    for _ in range(max_iter):
        try:
            w_inv_a = np.linalg.solve(eye + g_k @ h_k, a_k)
            wt_inv_a = np.linalg.solve(eye + h_k @ g_k, a_k)
        except np.linalg.LinAlgError as exc:
            raise RiccatiError(f"doubling iteration broke down: {exc}") from exc
        h_next = h_k + a_k.T @ np.linalg.solve(eye + h_k @ g_k, h_k @ a_k)
        g_next = g_k + a_k @ np.linalg.solve(eye + g_k @ h_k, g_k @ a_k.T)
        a_next = a_k @ w_inv_a
        step = np.linalg.norm(h_next - h_k)
        h_k, g_k, a_k = h_next, g_next, a_next
        if step <= tol * max(1.0, np.linalg.norm(h_k)):
            converged = True
            break
    p = 0.5 * (h_k + h_k.T)
    residual = float(np.linalg.norm(p - dare_step(p, ad, cd, nbar, rbar, qbar)))
    if not converged or residual > 1e-9:
        raise RiccatiError(
            f"Riccati iteration did not converge (residual {residual:.3e})"
        )
    s = cd @ p @ cd.T + rbar
    kd = np.linalg.solve(s.T, (ad @ p @ cd.T + nbar).T).T
    ad_k = ad - kd @ cd
    rho = float(np.max(np.abs(np.linalg.eigvals(ad_k))))
    if rho >= 1.0:
        raise RiccatiError(f"predictor spectral radius {rho:.6f} is not stable")
    if np.min(np.linalg.eigvalsh(p)) < -1e-10 * max(1.0, np.linalg.norm(p)):
        raise RiccatiError("Riccati solution is not positive semidefinite")
    return InnovationPredictor(
        kd=kd,
        p=p,
        ad_k=ad_k,
        bd_k=disc.bd - kd @ disc.dd,
        cd=cd.copy(),
        dd=disc.dd.copy(),
        residual=residual,
        ts=disc.ts,
        innovation_cov=s,
    )


def open_loop_predictor(disc):
    """Predictor with zero gain: the pure simulation of the discrete model."""
    return InnovationPredictor(
        kd=np.zeros((disc.ad.shape[0], disc.cd.shape[0])),
        p=np.zeros_like(disc.ad),
        ad_k=disc.ad.copy(),
        bd_k=disc.bd.copy(),
        cd=disc.cd.copy(),
        dd=disc.dd.copy(),
        residual=0.0,
        ts=disc.ts,
    )


def predict(pred, disc, u, y=None, ts=None):
    """One-step-ahead predictions and innovations from zero initial state.

    ``u`` and ``y`` are (N, 2) arrays of input and output deltas; ``u`` may
    also be a detrended MeasurementSeries, in which case both are extracted.
    """
    if hasattr(u, "deltas"):
        series = u
        if ts is None:
            ts = series.ts
        u = np.column_stack([series.delta("v"), series.delta("theta")])
        y = np.column_stack([series.delta("p"), series.delta("q")])
    if ts is not None and abs(ts - pred.ts) > 1e-12:
        raise ToolkitError(
            f"series sample period {ts} does not match the model's {pred.ts}"
        )
    u = np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(u)
    ramp = disc.bd_ramp if disc is not None else None
    x = np.zeros(pred.ad_k.shape[0])
    yhat = np.empty((n, 2))
    for k in range(n):
        yhat[k] = pred.cd @ x + pred.dd @ u[k]
        x = pred.ad_k @ x + pred.bd_k @ u[k] + pred.kd @ y[k]
        if ramp is not None:
            du = (u[k + 1] - u[k]) if k + 1 < n else np.zeros_like(u[k])
            x = x + ramp @ du
    return yhat, y - yhat


def simulate_discrete(disc, u, e=None, v=None, x0=None):
    """Propagate the discrete stochastic model; returns the output record."""
    u = np.asarray(u, dtype=float)
    n = len(u)
    x = np.zeros(disc.ad.shape[0]) if x0 is None else np.asarray(x0, float)
    y = np.empty((n, disc.cd.shape[0]))
    for k in range(n):
        ek = e[k] if e is not None else np.zeros(disc.gd.shape[1])
        y[k] = disc.cd @ x + disc.dd @ u[k] + disc.hd @ ek
        if v is not None:
            y[k] += v[k]
        x = disc.ad @ x + disc.bd @ u[k] + disc.gd @ ek
    return y


def loss(innovations):
    """Mean squared two-norm of the per-sample innovations."""
    eps = np.asarray(innovations, dtype=float)
    if eps.size == 0:
        raise ToolkitError("empty innovation sequence")
    return float(np.mean(np.sum(eps**2, axis=1)))


def fit_percent(y, yhat):
    """Normalized fit per channel: 100 (1 - ||y - yhat|| / ||y - mean(y)||)."""
    y = np.asarray(y, float)
    yhat = np.asarray(yhat, float)
    out = []
    for j in range(y.shape[1]):
        den = np.linalg.norm(y[:, j] - y[:, j].mean())
        out.append(100.0 * (1.0 - np.linalg.norm(y[:, j] - yhat[:, j]) / den))
    return np.array(out)


def _series_arrays(series):
    if not getattr(series, "detrended", False):
        raise ToolkitError("identification requires a detrended series")
    u = np.column_stack([series.delta("v"), series.delta("theta")])
    y = np.column_stack([series.delta("p"), series.delta("q")])
    v0 = float(series.means[0])
    theta0 = float(series.means[1])
    return u, y, v0, theta0


def gaussian_criterion(eps, pred, noise):
    """Innovation-form Gaussian negative log-likelihood rate (constants
    dropped): mean of eps' S^-1 eps plus log det S, with S the model-implied
    innovation covariance.  The log-det term charges a model for claiming a
    larger innovation floor than its predictions achieve, which pins the
    noise-path parameters that the plain quadratic loss leaves free."""
    s = pred.innovation_cov
    if s is None:
        s = pred.cd @ pred.p @ pred.cd.T + noise.rm
    s_inv = np.linalg.inv(s)
    sign, logdet = np.linalg.slogdet(s)
    if sign <= 0:
        raise RiccatiError("innovation covariance is not positive definite")
    e = np.asarray(eps, dtype=float)
    return float(np.mean(np.einsum("ki,ij,kj->k", e, s_inv, e)) + logdet)


def evaluate_candidate(params, noise, u, y, ts, burn_in, output_error=False,
                       input_hold="foh"):
    """Assemble, discretize, solve the gain and run the predictor once.

    Returns (criterion, quadratic loss, predictions, innovations,
    predictor).  The criterion is the Gaussian likelihood rate for the
    innovation predictor and the plain quadratic loss for the output-error
    baseline, which has no stochastic model.
    """
    cont = assemble_continuous(params, noise)
    disc = discretize_zoh(cont, ts, input_hold=input_hold)
    pred = open_loop_predictor(disc) if output_error else solve_dare(disc, noise)
    yhat, eps = predict(pred, disc, u, y)
    quad = loss(eps[burn_in:])
    crit = quad if output_error else gaussian_criterion(eps[burn_in:], pred, noise)
    return crit, quad, yhat, eps, pred


def _default_bounds(init, free):
    bounds = {}
    for name in free:
        p0 = getattr(init, name)
        if name == "s0":
            bounds[name] = (1e-4, 0.5)
        elif p0 >= 0:
            bounds[name] = (p0 / 10.0, p0 * 10.0)
        else:
            bounds[name] = (p0 * 10.0, p0 / 10.0)
    return bounds


def _identify_impl(series, init, bounds, noise, free, method, n_restarts,
                   burn_in, seed, maxiter):
    u, y, v0, theta0 = _series_arrays(series)
    ts = series.ts
    init = replace(init, V0=v0, theta0=theta0)
    noise = noise if noise is not None else NoiseConfig()
    free = tuple(free)
    user_bounds = dict(bounds) if bounds else {}
    bnd = _default_bounds(init, free)
    bnd.update(user_bounds)
    output_error = method == "tm"

    p_init = np.array([getattr(init, name) for name in free])
    scale = np.where(np.abs(p_init) > 0, p_init, 1.0)
    x_bounds = []
    for j, name in enumerate(free):
        lo, hi = bnd[name]
        lo_s, hi_s = sorted((lo / scale[j], hi / scale[j]))
        x_bounds.append((lo_s, hi_s))

    penalty = 1e6
    tie_emf = "Exp0" not in free and "Eyp0" not in free

    def make_params(x):
        values = dict(zip(free, x * scale))
        p = replace(init, **values)
        if tie_emf:
            e0 = emf_steady_state(
                p.X, p.Xp, p.Td0p, p.s0, p.V0 * np.exp(1j * p.theta0)
            )
            p = replace(p, Exp0=float(e0.real), Eyp0=float(e0.imag))
        return p

    eval_count = [0]
    last_value = [penalty]
    best_seen = [penalty, None]  # best evaluated point, robust to line-search
    # failures on the penalty plateau

    def objective(x):
        eval_count[0] += 1
        try:
            p = make_params(x)
            val, _, _, _, _ = evaluate_candidate(
                p, noise, u, y, ts, burn_in, output_error=output_error
            )
        except (ToolkitError, CaseValidationError, np.linalg.LinAlgError):
            last_value[0] = penalty
            return penalty
        if not np.isfinite(val):
            last_value[0] = penalty
            return penalty
        last_value[0] = val
        if val < best_seen[0]:
            best_seen[0] = val
            best_seen[1] = np.array(x, dtype=float)
        return val

    rng = np.random.default_rng(seed)
    starts = [np.ones(len(free))]
    for _ in range(max(0, n_restarts - 1)):
        draw = np.empty(len(free))
        for j, (lo_s, hi_s) in enumerate(x_bounds):
            lo_c = max(lo_s, 1e-12)
            draw[j] = math.exp(rng.uniform(math.log(lo_c), math.log(hi_s)))
        starts.append(draw)

    initial_loss = objective(starts[0])
    best_fun, best_x, best_ok = penalty, None, False
    start_reports = []
    trace = []
    for i, x0 in enumerate(starts):
        x0 = np.clip(x0, [b[0] for b in x_bounds], [b[1] for b in x_bounds])
        local_trace = []
        best_seen[0], best_seen[1] = penalty, None

        def cb(xk):
            local_trace.append(float(last_value[0]))

        try:
            res = minimize(
                objective,
                x0,
                method="L-BFGS-B",
                bounds=x_bounds,
                callback=cb,
                options={"maxiter": maxiter, "eps": 1e-6, "ftol": 1e-14,
                         "gtol": 1e-10},
            )
            run_fun, run_x = float(res.fun), res.x
            if best_seen[1] is not None and best_seen[0] < run_fun:
                run_fun, run_x = best_seen[0], best_seen[1]
            ok = bool(run_fun < penalty)
            start_reports.append(
                {"start": i, "loss": run_fun, "nit": int(res.nit),
                 "status": res.message, "ok": ok}
            )
            if ok and run_fun < best_fun:
                best_fun, best_x, best_ok = run_fun, run_x, bool(res.success)
                trace = local_trace
        except (ToolkitError, np.linalg.LinAlgError) as exc:
            start_reports.append({"start": i, "loss": None, "ok": False,
                                  "status": str(exc)})

    if best_x is None:
        raise IdentificationError(
            "every identification start failed", diagnostics=start_reports
        )

    x_best = best_x
    if initial_loss < penalty and best_fun > initial_loss:
        x_best = starts[0]
    p_est = make_params(x_best)
    final_crit, final_quad, yhat, eps, pred = evaluate_candidate(
        p_est, noise, u, y, ts, burn_in, output_error=output_error
    )
    at_bound = [
        name
        for name, xv, (lo_s, hi_s) in zip(free, x_best, x_bounds)
        if xv - lo_s < 1e-6 * (hi_s - lo_s) or hi_s - xv < 1e-6 * (hi_s - lo_s)
    ]
    fit = dict(zip(("p", "q"), fit_percent(y[burn_in:], yhat[burn_in:])))
    return IdentResult(
        params=p_est,
        loss=final_crit,
        initial_loss=float(initial_loss),
        quad_loss=final_quad,
        trace=trace,
        fit=fit,
        converged=bool(best_ok or final_crit <= initial_loss),
        at_bound=at_bound,
        method=method,
        starts=start_reports,
        seed=seed,
        meta={
            "free": list(free),
            "tie_emf": tie_emf,
            "n_eval": eval_count[0],
            "burn_in": burn_in,
            "channel": noise.channel,
            "v0": v0,
            "theta0": theta0,
        },
    )


def identify(series, init, bounds=None, noise=None, free=FREE_DEFAULT,
             n_restarts=2, burn_in=50, seed=0, maxiter=300, method="pem-a"):
    """Prediction-error estimate of the free load parameters.

    Each candidate re-runs the full assemble / discretize / gain / predict
    chain; the best of the multi-start local searches is returned.
    """
    return _identify_impl(series, init, bounds, noise, free, method,
                          n_restarts, burn_in, seed, maxiter)


def identify_output_error(series, init, bounds=None, noise=None,
                          free=FREE_DEFAULT, n_restarts=2, burn_in=50,
                          seed=0, maxiter=300):
    """Output-error baseline: identical search with the gain forced to zero."""
    noise = noise if noise is not None else NoiseConfig()
    return _identify_impl(series, init, bounds, noise, free, "tm",
                          n_restarts, burn_in, seed, maxiter)
