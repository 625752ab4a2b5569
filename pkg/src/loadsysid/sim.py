"""Nonlinear time-domain simulation of the closed-loop system and its
exact linearization.

The generators away from the slack bus keep classical second-order dynamics
(constant EMF magnitude behind the transient reactance); the slack machine
is held as an infinite bus, which pins the angle reference and makes every
mode of the bundled case strictly stable.  The motor contributes the three
states of the third-order load model.  The network is algebraic and, with
motor and generator reactances folded into the admittance matrix, linear in
the bus voltages, so each right-hand-side evaluation is a single sparse-free
linear solve against a prefactored matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm, lu_factor, lu_solve

from loadsysid.constants import OMEGA_S
from loadsysid.errors import (
    EquilibriumError,
    LinearizationError,
    SimulationError,
    ToolkitError,
)
from loadsysid.motor import (
    LoadParameters,
    emf_steady_state,
    motor_pq,
    solve_slip_for_power,
)
from loadsysid.network import build_admittance, expand_real
from loadsysid.series import MeasurementSeries


@dataclass(frozen=True)
class NoiseWindow:
    """White disturbance active on [start, end), variance at the sample grid.

    Values are drawn once per hold interval and held constant over it; the
    hold interval defaults to the integration substep.  Pinning ``hold_dt``
    freezes the disturbance as a function of time across integrator
    settings.  A non-None ``value`` replaces the random draw with that
    constant over the window (deterministic pulses for tests).
    """

    variance: float
    start: float
    end: float
    seed: int = 0
    hold_dt: float | None = None
    value: float | None = None


@dataclass(frozen=True)
class ExternalNoise(NoiseWindow):
    """Random current injection at a bus, along a fixed direction."""

    bus: int = 0
    direction_deg: float = 0.0


@dataclass(frozen=True)
class Scenario:
    """Simulation run description.  ``measurement_variance`` adds white
    noise of that variance to every sampled channel of the record;
    the default leaves the records noise-free."""

    duration: float
    dt_integration: float = 0.0005
    dt_sample: float = 0.01
    internal: NoiseWindow | None = None
    external: ExternalNoise | None = None
    measurement_variance: float | tuple = 0.0
    measurement_seed: int = 0

    def __post_init__(self):
        ratio = self.dt_sample / self.dt_integration
        if abs(ratio - round(ratio)) > 1e-9:
            raise ToolkitError(
                "dt_sample must be an integer multiple of dt_integration"
            )
        if np.any(np.asarray(self.measurement_variance) < 0):
            raise ToolkitError("measurement variance must be non-negative")
        for noise in (self.internal, self.external):
            if noise is None:
                continue
            if noise.variance < 0:
                raise ToolkitError("noise variance must be non-negative")
            if not (0.0 <= noise.start <= noise.end <= self.duration + 1e-12):
                raise ToolkitError("noise window must lie within [0, duration]")

    @property
    def substeps_per_sample(self):
        return int(round(self.dt_sample / self.dt_integration))


@dataclass
class SystemEquilibrium:
    """Operating point of the full dynamic model.

    Holds everything the simulator and linearizer need: the constant dynamic
    admittance matrix (loads, machine reactances and the static remainder at
    the motor bus folded in), generator EMFs, the motor state and the
    balancing torques.
    """

    case: object
    params: LoadParameters            # motor parameters at the operating point
    motor_bus: int
    gen_emag: dict                    # bus id -> EMF magnitude
    gen_delta: dict                   # bus id -> rotor angle, rad
    gen_pm: dict                      # bus id -> mechanical power
    dyn_gen_buses: list               # non-slack generator bus ids, case order
    slack_gen_bus: int
    tm: float                         # motor mechanical torque
    exy0: complex                     # motor EMF phasor at equilibrium
    remainder_shunt: complex          # static part folded at the motor bus
    y_dyn: np.ndarray                 # complex (n, n)
    v_eq: np.ndarray                  # complex bus voltages at equilibrium
    deriv_norm: float = 0.0
    _lu: object = field(default=None, repr=False)

    @property
    def n_states(self):
        return 2 * len(self.dyn_gen_buses) + 3

    def state_labels(self):
        labels = []
        for bus in self.dyn_gen_buses:
            labels += [f"delta_g{bus}", f"omega_g{bus}"]
        labels += ["emf_x", "emf_y", "slip"]
        return labels

    def equilibrium_state(self):
        z = []
        for bus in self.dyn_gen_buses:
            z += [self.gen_delta[bus], 0.0]
        z += [self.exy0.real, self.exy0.imag, self.params.s0]
        return np.array(z)

    def lu(self):
        if self._lu is None:
            self._lu = lu_factor(self.y_dyn)
        return self._lu


def init_equilibrium(case, pf, motor_spec):
    """Construct the exact equilibrium of the dynamic model.

    When ``motor_spec`` carries a slip, the motor runs at that slip and the
    static remainder at its bus absorbs the difference to the scheduled
    power; otherwise the slip is solved so the motor carries the full
    scheduled active power.  Either way the mechanical torques are balanced
    against the self-consistently solved network voltages, so the state
    derivatives vanish to machine precision.
    """
    idx = case.bus_index()
    motors = case.motor_loads()
    if len(motors) != 1:
        raise EquilibriumError(f"expected exactly one motor load, found {len(motors)}")
    motor = motors[0]
    m = idx[motor.bus]
    if motor.p <= 0.0:
        raise EquilibriumError("motor bus has no scheduled active power to carry")

    v_pf = pf.v_complex()
    v6 = v_pf[m]
    X, Xp, Td0p = motor_spec.X, motor_spec.Xp, motor_spec.Td0p
    s0 = getattr(motor_spec, "s0", None)
    if s0 is None:
        s0 = solve_slip_for_power(X, Xp, Td0p, motor.p, v6)
    p_m, q_m = motor_pq(X, Xp, Td0p, s0, v6)

    # Static remainder keeps the power-flow bus power consistent with the
    # motor share; it becomes a constant shunt like every other static load.
    p_rem = motor.p - p_m
    q_rem = motor.q - q_m
    y_rem = (p_rem - 1j * q_rem) / abs(v6) ** 2

    # Dynamic admittance matrix: branch network + folded static loads +
    # machine transient reactances + the remainder shunt.
    y = build_admittance(case, fold_constant_loads=True, exclude_bus=None, pf=pf).matrix
    y = y.copy()
    y[m, m] += y_rem
    for g in case.generators:
        y[idx[g.bus], idx[g.bus]] += 1.0 / (1j * g.xdp)
    y[m, m] += 1.0 / (1j * Xp)

    # Generator internal EMFs from the power-flow currents.
    gen_emag, gen_delta = {}, {}
    for g in case.generators:
        k = idx[g.bus]
        s_g = pf.p_inj[k] + 1j * pf.q_inj[k]
        i_g = np.conj(s_g / v_pf[k])
        e_ph = v_pf[k] + 1j * g.xdp * i_g
        gen_emag[g.bus] = abs(e_ph)
        gen_delta[g.bus] = float(np.angle(e_ph))

    # Exact equilibrium voltages: fold the motor EMF coupling E' = kap * V6
    # into the matrix and solve the remaining constant injections.
    kap = (X - Xp) / (X + 1j * s0 * OMEGA_S * Td0p * Xp)
    y_aug = y.copy()
    y_aug[m, m] -= kap / (1j * Xp)
    b = np.zeros(case.n, dtype=complex)
    for g in case.generators:
        k = idx[g.bus]
        b[k] += gen_emag[g.bus] * np.exp(1j * gen_delta[g.bus]) / (1j * g.xdp)
    try:
        v_eq = np.linalg.solve(y_aug, b)
    except np.linalg.LinAlgError as exc:
        raise EquilibriumError(f"degenerate network at equilibrium: {exc}") from exc

    v6_eq = v_eq[m]
    exy0 = kap * v6_eq
    tm = (exy0.real * v6_eq.imag - exy0.imag * v6_eq.real) / Xp

    slack_bus = case.slack_bus().id
    dyn_gens = [g.bus for g in case.generators if g.bus != slack_bus]
    gen_pm = {}
    for g in case.generators:
        k = idx[g.bus]
        e_ph = gen_emag[g.bus] * np.exp(1j * gen_delta[g.bus])
        i_g = (e_ph - v_eq[k]) / (1j * g.xdp)
        gen_pm[g.bus] = float(np.real(e_ph * np.conj(i_g)))

    params = LoadParameters(
        X=X,
        Xp=Xp,
        Td0p=Td0p,
        Tj=motor_spec.Tj,
        s0=float(s0),
        Exp0=float(exy0.real),
        Eyp0=float(exy0.imag),
        Pz=0.0,
        Qz=0.0,
        V0=float(abs(v6_eq)),
        theta0=float(np.angle(v6_eq)),
    )

    eq = SystemEquilibrium(
        case=case,
        params=params,
        motor_bus=motor.bus,
        gen_emag=gen_emag,
        gen_delta=gen_delta,
        gen_pm=gen_pm,
        dyn_gen_buses=dyn_gens,
        slack_gen_bus=slack_bus,
        tm=float(tm),
        exy0=exy0,
        remainder_shunt=y_rem,
        y_dyn=y,
        v_eq=v_eq,
    )
    eq.deriv_norm = float(np.linalg.norm(_rhs(eq, eq.equilibrium_state(), 0.0, 0.0)[0]))
    if eq.deriv_norm > 1e-9:
        raise EquilibriumError(
            f"equilibrium residual {eq.deriv_norm:.3e} exceeds 1e-9"
        )
    return eq


def _injections(eq, z, xi_ext, ext_index, ext_dir):
    """Constant-current injection vector for the network solve."""
    case = eq.case
    idx = case.bus_index()
    b = np.zeros(case.n, dtype=complex)
    k_slack = idx[eq.slack_gen_bus]
    g_slack = case.generator_at(eq.slack_gen_bus)
    e_sl = eq.gen_emag[eq.slack_gen_bus] * np.exp(1j * eq.gen_delta[eq.slack_gen_bus])
    b[k_slack] += e_sl / (1j * g_slack.xdp)
    for i, bus in enumerate(eq.dyn_gen_buses):
        g = case.generator_at(bus)
        delta = z[2 * i]
        e_ph = eq.gen_emag[bus] * np.exp(1j * delta)
        b[idx[bus]] += e_ph / (1j * g.xdp)
    exy = z[-3] + 1j * z[-2]
    b[idx[eq.motor_bus]] += exy / (1j * eq.params.Xp)
    if ext_index is not None and xi_ext != 0.0:
        b[ext_index] += xi_ext * ext_dir
    return b


def _rhs(eq, z, e_int=0.0, xi_ext=0.0, ext_index=None, ext_dir=1.0 + 0j):
    """State derivative and the solved bus voltages."""
    case = eq.case
    idx = case.bus_index()
    b = _injections(eq, z, xi_ext, ext_index, ext_dir)
    v = lu_solve(eq.lu(), b)
    dz = np.empty_like(z)
    for i, bus in enumerate(eq.dyn_gen_buses):
        g = case.generator_at(bus)
        delta, w = z[2 * i], z[2 * i + 1]
        e = eq.gen_emag[bus]
        ex, ey = e * math.cos(delta), e * math.sin(delta)
        vb = v[idx[bus]]
        pe = (ey * vb.real - ex * vb.imag) / g.xdp
        dz[2 * i] = OMEGA_S * w
        dz[2 * i + 1] = (eq.gen_pm[bus] - pe - g.damping * w) / g.tj
    p = eq.params
    exp_, eyp, s = z[-3], z[-2], z[-1]
    v6 = v[idx[eq.motor_bus]]
    te = (exp_ * v6.imag - eyp * v6.real) / p.Xp
    k_emf = 1.0 / (p.Xp * p.Td0p)
    dz[-3] = k_emf * (-p.X * exp_ + (p.X - p.Xp) * v6.real) + s * OMEGA_S * eyp
    dz[-2] = k_emf * (-p.X * eyp + (p.X - p.Xp) * v6.imag) - s * OMEGA_S * exp_
    dz[-1] = (eq.tm + e_int - te) / p.Tj
    return dz, v


@dataclass
class LinearModel:
    """Continuous state-space linearization of the full system."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    state_labels: list
    input_labels: list
    output_labels: list

    def output(self, name):
        return self.output_labels.index(name)

    def eigenvalues(self):
        return np.linalg.eigvals(self.a)


OUTPUT_LABELS = ["v", "theta", "p", "q", "vx", "vy", "ix", "iy"]


def linearize_system(case, eq, disturbance_bus=None, direction_deg=0.0):
    """Analytic linearization at the equilibrium.

    States follow ``eq.state_labels()``.  Inputs are the motor torque noise
    and, when a disturbance bus is given (or declared in the case), the
    external current injection.  Outputs are the motor-bus quantities
    (v, theta, p, q) plus the rectangular voltage and current deltas.
    """
    idx = case.bus_index()
    n = case.n
    nx = eq.n_states
    m = idx[eq.motor_bus]
    if disturbance_bus is None:
        inj = [ld for ld in case.loads if ld.kind == "injection"]
        disturbance_bus = inj[0].bus if inj else None

    yr = expand_real(eq.y_dyn)
    try:
        yr_inv = np.linalg.inv(yr)
    except np.linalg.LinAlgError as exc:
        raise LinearizationError(f"singular algebraic Jacobian: {exc}") from exc

    z0 = eq.equilibrium_state()
    _, v0 = _rhs(eq, z0)
    p = eq.params

    # db/dz: sensitivity of the stacked injection vector to the states.
    db_dz = np.zeros((2 * n, nx))
    for i, bus in enumerate(eq.dyn_gen_buses):
        g = case.generator_at(bus)
        e = eq.gen_emag[bus]
        delta = eq.gen_delta[bus]
        ex, ey = e * math.cos(delta), e * math.sin(delta)
        k = idx[bus]
        db_dz[2 * k, 2 * i] = ex / g.xdp
        db_dz[2 * k + 1, 2 * i] = ey / g.xdp
    db_dz[2 * m, nx - 2] = 1.0 / p.Xp       # d(bx)/d(E'y)
    db_dz[2 * m + 1, nx - 3] = -1.0 / p.Xp  # d(by)/d(E'x)

    du_dz = yr_inv @ db_dz  # bus-voltage components versus states

    # df/dz direct part and df/du (voltage part), then chain rule.
    df_dz = np.zeros((nx, nx))
    df_du = np.zeros((nx, 2 * n))
    for i, bus in enumerate(eq.dyn_gen_buses):
        g = case.generator_at(bus)
        e = eq.gen_emag[bus]
        delta = eq.gen_delta[bus]
        ex, ey = e * math.cos(delta), e * math.sin(delta)
        vb = v0[idx[bus]]
        k = idx[bus]
        r = 2 * i + 1
        df_dz[2 * i, r] = OMEGA_S
        df_dz[r, 2 * i] = -(ex * vb.real + ey * vb.imag) / (g.xdp * g.tj)
        df_dz[r, r] = -g.damping / g.tj
        df_du[r, 2 * k] = -ey / (g.xdp * g.tj)
        df_du[r, 2 * k + 1] = ex / (g.xdp * g.tj)

    v6 = v0[m]
    exp_, eyp, s0 = z0[-3], z0[-2], z0[-1]
    k_emf = 1.0 / (p.Xp * p.Td0p)
    rx, ry, rs = nx - 3, nx - 2, nx - 1
    df_dz[rx, rx] = -p.X * k_emf
    df_dz[rx, ry] = s0 * OMEGA_S
    df_dz[rx, rs] = OMEGA_S * eyp
    df_dz[ry, rx] = -s0 * OMEGA_S
    df_dz[ry, ry] = -p.X * k_emf
    df_dz[ry, rs] = -OMEGA_S * exp_
    df_dz[rs, rx] = -v6.imag / (p.Xp * p.Tj)
    df_dz[rs, ry] = v6.real / (p.Xp * p.Tj)
    df_du[rx, 2 * m] = (p.X - p.Xp) * k_emf
    df_du[ry, 2 * m + 1] = (p.X - p.Xp) * k_emf
    df_du[rs, 2 * m] = eyp / (p.Xp * p.Tj)
    df_du[rs, 2 * m + 1] = -exp_ / (p.Xp * p.Tj)

    a = df_dz + df_du @ du_dz

    # Outputs at the motor bus.
    dg_dz = np.zeros((len(OUTPUT_LABELS), nx))
    dg_du = np.zeros((len(OUTPUT_LABELS), 2 * n))
    vx, vy = v6.real, v6.imag
    vm = abs(v6)
    dg_du[0, 2 * m], dg_du[0, 2 * m + 1] = vx / vm, vy / vm
    dg_du[1, 2 * m], dg_du[1, 2 * m + 1] = -vy / vm**2, vx / vm**2
    dg_dz[2, rx], dg_dz[2, ry] = vy / p.Xp, -vx / p.Xp
    dg_du[2, 2 * m], dg_du[2, 2 * m + 1] = -eyp / p.Xp, exp_ / p.Xp
    dg_dz[3, rx], dg_dz[3, ry] = -vx / p.Xp, -vy / p.Xp
    dg_du[3, 2 * m] = (2 * vx - exp_) / p.Xp
    dg_du[3, 2 * m + 1] = (2 * vy - eyp) / p.Xp
    dg_du[4, 2 * m] = 1.0
    dg_du[5, 2 * m + 1] = 1.0
    dg_dz[6, ry] = -1.0 / p.Xp
    dg_du[6, 2 * m + 1] = 1.0 / p.Xp
    dg_dz[7, rx] = 1.0 / p.Xp
    dg_du[7, 2 * m] = -1.0 / p.Xp

    c = dg_dz + dg_du @ du_dz

    input_labels = ["torque_noise"]
    b_cols = [np.zeros(nx)]
    b_cols[0][rs] = 1.0 / p.Tj
    d_cols = [np.zeros(len(OUTPUT_LABELS))]
    if disturbance_bus is not None:
        h = idx[disturbance_bus]
        phi = math.radians(direction_deg)
        u_dir = np.zeros(2 * n)
        u_dir[2 * h], u_dir[2 * h + 1] = math.cos(phi), math.sin(phi)
        du_dxi = yr_inv @ u_dir
        b_cols.append(df_du @ du_dxi)
        d_cols.append(dg_du @ du_dxi)
        input_labels.append("current_injection")

    return LinearModel(
        a=a,
        b=np.column_stack(b_cols),
        c=c,
        d=np.column_stack(d_cols),
        state_labels=eq.state_labels(),
        input_labels=input_labels,
        output_labels=list(OUTPUT_LABELS),
    )


def zoh_discretize(a, b, ts):
    """Exact zero-order-hold discretization via the augmented exponential."""
    nx, nu = a.shape[0], b.shape[1]
    m = np.zeros((nx + nu, nx + nu))
    m[:nx, :nx] = a * ts
    m[:nx, nx:] = b * ts
    phi = expm(m)
    return phi[:nx, :nx], phi[:nx, nx:]


def linear_response(model, disturbance, ts, x0=None):
    """Exact ZOH propagation; returns the (N, ny) delta-output record."""
    d = np.atleast_2d(np.asarray(disturbance, dtype=float))
    if d.shape[0] < d.shape[1] and d.shape[0] == model.b.shape[1]:
        d = d.T
    if d.shape[1] != model.b.shape[1]:
        raise ToolkitError(
            f"disturbance has {d.shape[1]} channels, model expects {model.b.shape[1]}"
        )
    ad, bd = zoh_discretize(model.a, model.b, ts)
    n = d.shape[0]
    x = np.zeros(model.a.shape[0]) if x0 is None else np.asarray(x0, dtype=float)
    out = np.empty((n, model.c.shape[0]))
    for k in range(n):
        out[k] = model.c @ x + model.d @ d[k]
        x = ad @ x + bd @ d[k]
    return out


def simulate_linear(model, disturbance, ts, eq):
    """Small-signal simulation packaged as an absolute measurement record."""
    resp = linear_response(model, disturbance, ts)
    n = resp.shape[0]
    p = eq.params
    base = np.array([p.V0, p.theta0, eq.tm, 0.0])
    idx = eq.case.bus_index()
    v6 = eq.v_eq[idx[eq.motor_bus]]
    exy = eq.exy0
    q0 = (abs(v6) ** 2 - v6.real * exy.real - v6.imag * exy.imag) / p.Xp
    base[2] = (exy.real * v6.imag - exy.imag * v6.real) / p.Xp
    base[3] = q0
    data = base[None, :] + resp[:, :4]
    time = np.arange(n) * ts
    return MeasurementSeries(ts=ts, time=time, data=data,
                             meta={"kind": "linear", "ts": ts})


def _noise_sequence(rng, n_sub, dt, ts, window, duration):
    """Per-substep white sequence whose sample-grid variance matches."""
    hold = window.hold_dt if window.hold_dt is not None else dt
    per = hold / dt
    if abs(per - round(per)) > 1e-9 or hold < dt - 1e-12:
        raise ToolkitError("noise hold_dt must be an integer multiple of dt")
    per = int(round(per))
    n_hold = -(-n_sub // per)
    scale = math.sqrt(window.variance * ts / hold)
    t_hold = np.arange(n_hold) * hold
    mask = (t_hold >= window.start - 1e-12) & (t_hold < window.end - 1e-12)
    values = np.zeros(n_hold)
    if window.value is not None:
        values[mask] = window.value
    else:
        values[mask] = scale * rng.standard_normal(int(mask.sum()))
    return np.repeat(values, per)[:n_sub]


def simulate(case, eq, scenario):
    """Nonlinear simulation sampled at the scenario's sample period.

    Integration uses an integrating-factor trapezoidal step: the dynamics
    are split into the exact linear propagation of the equilibrium Jacobian
    plus a trapezoidal correction for the nonlinear remainder, so the step
    is exact for the linearized system and second order in the remainder.
    Disturbances are held constant over each integration substep.
    """
    dt = scenario.dt_integration
    n_sub = int(round(scenario.duration / dt))
    n_per = scenario.substeps_per_sample

    def _active(noise):
        return noise is not None and (noise.variance > 0 or noise.value is not None)

    e_int = np.zeros(n_sub)
    if _active(scenario.internal):
        rng = np.random.default_rng(scenario.internal.seed)
        e_int = _noise_sequence(rng, n_sub, dt, scenario.dt_sample,
                                scenario.internal, scenario.duration)
    xi_ext = np.zeros(n_sub)
    ext_index, ext_dir = None, 1.0 + 0j
    if _active(scenario.external):
        rng = np.random.default_rng(scenario.external.seed)
        xi_ext = _noise_sequence(rng, n_sub, dt, scenario.dt_sample,
                                 scenario.external, scenario.duration)
        ext_index = case.bus_index()[scenario.external.bus]
        phi = math.radians(scenario.external.direction_deg)
        ext_dir = complex(math.cos(phi), math.sin(phi))

    model = linearize_system(
        case, eq,
        disturbance_bus=scenario.external.bus if scenario.external else None,
        direction_deg=scenario.external.direction_deg if scenario.external else 0.0,
    )
    jac = model.a
    nx = jac.shape[0]
    e_h = expm(jac * dt)
    w0 = np.linalg.solve(jac, e_h - np.eye(nx))
    w1 = np.linalg.solve(jac, dt * e_h - w0)
    phi_a = w1 / dt            # weight of the remainder at the step start
    phi_b = w0 - w1 / dt       # weight at the step end

    z_eq = eq.equilibrium_state()
    idx = case.bus_index()
    m = idx[eq.motor_bus]
    p = eq.params

    def remainder(z, e_i, xi):
        dz, v = _rhs(eq, z, e_i, xi, ext_index, ext_dir)
        return dz - jac @ (z - z_eq), v

    n_samples = n_sub // n_per + 1
    time = np.empty(n_samples)
    data = np.empty((n_samples, 4))

    def record(k_sample, t, z, v):
        v6 = v[m]
        exy = z[-3] + 1j * z[-2]
        pm = (exy.real * v6.imag - exy.imag * v6.real) / p.Xp
        qm = (abs(v6) ** 2 - v6.real * exy.real - v6.imag * exy.imag) / p.Xp
        time[k_sample] = t
        data[k_sample] = (abs(v6), np.angle(v6), pm, qm)

    z = z_eq.copy()
    g0, v = remainder(z, e_int[0] if n_sub else 0.0, xi_ext[0] if n_sub else 0.0)
    record(0, 0.0, z, v)
    k_sample = 1
    for k in range(n_sub):
        e_i, xi = e_int[k], xi_ext[k]
        if k > 0:
            g0, _ = remainder(z, e_i, xi)
        base = z_eq + e_h @ (z - z_eq) + phi_a @ g0
        z_new = base + phi_b @ g0
        for it in range(25):
            g1, v = remainder(z_new, e_i, xi)
            z_next = base + phi_b @ g1
            if np.max(np.abs(z_next - z_new)) < 1e-13 * (1.0 + np.max(np.abs(z_new))):
                z_new = z_next
                break
            z_new = z_next
        else:
            raise SimulationError(
                f"corrector did not converge at t={(k + 1) * dt:.4f}s",
                t=(k + 1) * dt,
            )
        z = z_new
        if not (0.0 < z[-1] < 1.0):
            raise SimulationError(
                f"slip left (0, 1) at t={(k + 1) * dt:.4f}s", t=(k + 1) * dt
            )
        if (k + 1) % n_per == 0:
            # Sample with the disturbance value active from this instant on,
            # matching the zero-order-hold convention of the linear model.
            xi_at = xi_ext[k + 1] if k + 1 < n_sub else 0.0
            e_at = e_int[k + 1] if k + 1 < n_sub else 0.0
            _, v = remainder(z, e_at, xi_at)
            record(k_sample, (k + 1) * dt, z, v)
            k_sample += 1

    mvar = np.broadcast_to(np.asarray(scenario.measurement_variance, float), (4,))
    if np.any(mvar > 0):
        rng = np.random.default_rng(scenario.measurement_seed)
        data = data + np.sqrt(mvar)[None, :] * rng.standard_normal(data.shape)

    meta = {
        "ts": scenario.dt_sample,
        "duration": scenario.duration,
        "dt_integration": dt,
        "seed_internal": scenario.internal.seed if scenario.internal else None,
        "seed_external": scenario.external.seed if scenario.external else None,
        "measurement_variance": tuple(np.broadcast_to(
            np.asarray(scenario.measurement_variance, float), (4,))),
    }
    return MeasurementSeries(ts=scenario.dt_sample, time=time, data=data, meta=meta)
