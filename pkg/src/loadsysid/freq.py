"""Analytic closed-loop structure in the frequency domain.

Builds the equivalent network response seen from the identified load: the
2x2 transfer K(jw) from load-bus voltage deltas to load current deltas with
every other bus, generator and static load eliminated, and the companion
path from an external current injection.  Sign convention: load current is
the current drawn by the identified load, so K and the load's own response
G share one axis and the feedback relations between them hold as stated.

All responses are sampled on frequency grids; nothing is kept symbolic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from loadsysid.constants import OMEGA_S
from loadsysid.errors import FrequencyDomainError, ToolkitError
from loadsysid.greybox import assemble_continuous, NoiseConfig
from loadsysid.network import expand_real
from loadsysid.sim import linear_response


@dataclass
class FrequencyResponse:
    """Complex matrix function sampled on an ascending angular grid."""

    omega: np.ndarray          # rad/s
    values: np.ndarray         # (n_omega, p, q) complex
    in_labels: list = field(default_factory=list)
    out_labels: list = field(default_factory=list)

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.ndim == 2:
            self.values = self.values[:, :, None]
        if len(self.omega) != self.values.shape[0]:
            raise ToolkitError("grid and value counts differ")
        if np.any(np.diff(self.omega) <= 0):
            raise ToolkitError("frequency grid must be strictly ascending")
        if not np.all(np.isfinite(self.values)):
            raise ToolkitError("non-finite frequency response value")

    def at(self, omega):
        idx = int(np.argmin(np.abs(self.omega - omega)))
        if abs(self.omega[idx] - omega) > 1e-9 * max(1.0, abs(omega)):
            raise ToolkitError(f"frequency {omega} not on the grid")
        return self.values[idx]

    def interp(self, omega):
        """Entrywise linear interpolation onto a new grid."""
        omega = np.asarray(omega, dtype=float)
        out = np.empty((len(omega),) + self.values.shape[1:], dtype=complex)
        for i in range(self.values.shape[1]):
            for j in range(self.values.shape[2]):
                re = np.interp(omega, self.omega, self.values[:, i, j].real)
                im = np.interp(omega, self.omega, self.values[:, i, j].imag)
                out[:, i, j] = re + 1j * im
        return out

    def check_conjugate_symmetry(self, atol=1e-9):
        """Value at -w equals the conjugate of the value at +w, when present."""
        for i, w in enumerate(self.omega):
            j = int(np.argmin(np.abs(self.omega + w)))
            if abs(self.omega[j] + w) < 1e-12:
                if not np.allclose(self.values[j], np.conj(self.values[i]),
                                   atol=atol):
                    return False
        return True


def default_grid(f_min=0.01, f_max=10.0, n=200):
    """Logarithmic diagnostic grid, rad/s."""
    return 2.0 * math.pi * np.logspace(math.log10(f_min), math.log10(f_max), n)


def generator_frf(gen, e_phasor, v_phasor, omega, omega_s=OMEGA_S):
    """Voltage-to-injected-current transfer of one classical generator.

    ``gen`` carries (tj, xdp, damping); ``e_phasor`` is the constant internal
    EMF and ``v_phasor`` the equilibrium bus voltage.  The result maps
    (dVx, dVy) to the generator's injected current deltas per frequency.
    """
    ex, ey = e_phasor.real, e_phasor.imag
    k_delta = (ex * v_phasor.real + ey * v_phasor.imag) / gen.xdp
    a = np.array([[0.0, omega_s], [-k_delta / gen.tj, -gen.damping / gen.tj]])
    b = np.array([[0.0, 0.0],
                  [-ey / (gen.xdp * gen.tj), ex / (gen.xdp * gen.tj)]])
    c = np.array([[ex / gen.xdp, 0.0], [ey / gen.xdp, 0.0]])
    d = np.array([[0.0, -1.0], [1.0, 0.0]]) / gen.xdp
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    out = np.empty((len(omega), 2, 2), dtype=complex)
    eye = np.eye(2)
    for i, w in enumerate(omega):
        m = 1j * w * eye - a
        if abs(np.linalg.det(m)) < 1e-12:
            raise FrequencyDomainError(
                f"generator response singular at omega={w}", omega=w
            )
        out[i] = c @ np.linalg.solve(m, b) + d
    return out


def _frequency_system(eq, omega):
    """Real-expanded network matrix with generator responses folded, one
    (2n, 2n) complex matrix per frequency."""
    case = eq.case
    idx = case.bus_index()
    n = case.n
    yr = expand_real(eq.y_dyn)
    # The machine reactances sit in y_dyn; generators additionally inject
    # state-dependent current, which appears here as their FRF minus the
    # constant reactance part already folded into y_dyn.
    mats = np.repeat(yr[None, :, :].astype(complex), len(omega), axis=0)
    for bus in eq.dyn_gen_buses:
        g = case.generator_at(bus)
        k = idx[bus]
        e_ph = eq.gen_emag[bus] * np.exp(1j * eq.gen_delta[bus])
        v_ph = eq.v_eq[k]
        frf = generator_frf(g, e_ph, v_ph, omega)
        # y_dyn already carries the reactance feedthrough -1/(j xdp) of the
        # injection map on its diagonal; only the state-driven part of the
        # generator response remains to be folded in.
        d_part = expand_real(np.array([[-1.0 / (1j * g.xdp)]]))
        sl = slice(2 * k, 2 * k + 2)
        for i in range(len(omega)):
            mats[i, sl, sl] -= frf[i] - d_part
    # The slack machine is an infinite bus: constant EMF, its reactance is
    # already in y_dyn and it injects no delta current.
    return mats


def reduce_to_load(case, eq, omega_grid, load_bus=None, disturbance_bus=None,
                   direction_deg=0.0):
    """Equivalent network response and external-disturbance path.

    Per frequency, generator responses are substituted into the
    real-expanded network equation and every variable except the load-bus
    pair is eliminated, yielding the 2x2 feedback response K and, when a
    disturbance bus is named, the 2x1 injection path.
    """
    idx = case.bus_index()
    load_bus = load_bus if load_bus is not None else eq.motor_bus
    m = idx[load_bus]
    omega_grid = np.asarray(omega_grid, dtype=float)
    mats = _frequency_system(eq, omega_grid)
    # Remove the identified motor's own admittance: K describes everything
    # except the load under identification.
    y_motor = expand_real(np.array([[1.0 / (1j * eq.params.Xp)]]))
    sl = slice(2 * m, 2 * m + 2)
    keep = [2 * m, 2 * m + 1]
    drop = [i for i in range(mats.shape[1]) if i not in keep]
    k_vals = np.empty((len(omega_grid), 2, 2), dtype=complex)
    kh_vals = None
    u_dir = None
    if disturbance_bus is not None:
        h = idx[disturbance_bus]
        phi = math.radians(direction_deg)
        u_dir = np.zeros(2 * case.n)
        u_dir[2 * h], u_dir[2 * h + 1] = math.cos(phi), math.sin(phi)
        u_dir = u_dir[drop]
        kh_vals = np.empty((len(omega_grid), 2, 1), dtype=complex)
    for i, w in enumerate(omega_grid):
        mat = mats[i].copy()
        mat[sl, sl] -= y_motor
        m_kk = mat[np.ix_(keep, keep)]
        m_kd = mat[np.ix_(keep, drop)]
        m_dk = mat[np.ix_(drop, keep)]
        m_dd = mat[np.ix_(drop, drop)]
        try:
            x_dk = np.linalg.solve(m_dd, m_dk)
        except np.linalg.LinAlgError as exc:
            raise FrequencyDomainError(
                f"singular elimination block at omega={w}", omega=w
            ) from exc
        k_vals[i] = -(m_kk - m_kd @ x_dk)
        if kh_vals is not None:
            kh_vals[i] = (-m_kd @ np.linalg.solve(m_dd, u_dir))[:, None]
    k = FrequencyResponse(omega_grid, k_vals,
                          in_labels=["dVx", "dVy"], out_labels=["dIx", "dIy"])
    kh = None
    if kh_vals is not None:
        kh = FrequencyResponse(omega_grid, kh_vals,
                               in_labels=["injection"],
                               out_labels=["dIx", "dIy"])
    return k, kh


def _output_conversion(params, include_motor=True):
    """Matrices converting the (dV, dtheta) / (dP, dQ) model coordinates to
    rectangular voltage and drawn-current deltas at the operating point."""
    v0, th0 = params.V0, params.theta0
    ct, st = math.cos(th0), math.sin(th0)
    w_v = np.array([[ct, st], [-st / v0, ct / v0]])           # (dVx,dVy)->(dV,dth)
    s0 = complex(_load_p0(params, include_motor), _load_q0(params, include_motor))
    i0 = np.conj(s0 / (v0 * np.exp(1j * th0)))
    w_y = np.array([[ct, st], [st, -ct]]) / v0                # (dP,dQ)->(dIx,dIy)
    w_u = np.column_stack([
        [-i0.real / v0, -i0.imag / v0],
        [-i0.imag, i0.real],
    ])
    return w_v, w_y, w_u


def _load_p0(params, include_motor=True):
    v = params.V0 * np.exp(1j * params.theta0)
    pm = (params.Exp0 * v.imag - params.Eyp0 * v.real) / params.Xp
    return (pm if include_motor else 0.0) + params.Pz


def _load_q0(params, include_motor=True):
    v = params.V0 * np.exp(1j * params.theta0)
    qm = (abs(v) ** 2 - v.real * params.Exp0 - v.imag * params.Eyp0) / params.Xp
    return (qm if include_motor else 0.0) + params.Qz


def load_frf(params, omega_grid, include_motor=True):
    """Voltage-to-drawn-current response of the load model itself.

    Assembles the grey-box model at ``params`` and converts it from the
    (dV, dtheta) / (dP, dQ) coordinates to rectangular voltage and current
    deltas, so the result lives on the same axes as the network response.
    With ``include_motor=False`` only the static constant-impedance part
    remains, whose response is the flat expanded admittance.
    """
    omega_grid = np.atleast_1d(np.asarray(omega_grid, dtype=float))
    cont = assemble_continuous(params, NoiseConfig())
    w_v, w_y, w_u = _output_conversion(params, include_motor=include_motor)
    out = np.empty((len(omega_grid), 2, 2), dtype=complex)
    eye = np.eye(3)
    for i, w in enumerate(omega_grid):
        if include_motor:
            g_pq = cont.c @ np.linalg.solve(1j * w * eye - cont.a, cont.b) \
                + cont.d
        else:
            v0 = params.V0
            g_pq = np.array([[2.0 * params.Pz / v0, 0.0],
                             [2.0 * params.Qz / v0, 0.0]])
        out[i] = (w_y @ g_pq + w_u) @ w_v
    return FrequencyResponse(omega_grid, out,
                             in_labels=["dVx", "dVy"], out_labels=["dIx", "dIy"])


def load_noise_frf(params, omega_grid, noise=None):
    """Response from the internal disturbance to the drawn current."""
    omega_grid = np.atleast_1d(np.asarray(omega_grid, dtype=float))
    noise = noise if noise is not None else NoiseConfig()
    cont = assemble_continuous(params, noise)
    _, w_y, _ = _output_conversion(params)
    out = np.empty((len(omega_grid), 2, cont.g.shape[1]), dtype=complex)
    eye = np.eye(3)
    for i, w in enumerate(omega_grid):
        h_pq = cont.c @ np.linalg.solve(1j * w * eye - cont.a, cont.g) + cont.h
        out[i] = w_y @ h_pq
    return FrequencyResponse(omega_grid, out,
                             in_labels=["internal"], out_labels=["dIx", "dIy"])


def closed_loop_response(k, kh, g_load, h_int, spec_int, spec_ext, omega_grid):
    """Effective voltage-to-current relation with both sources active.

    Per frequency the two basis responses are formed: the internal path
    excites the difference (K - G)^-1 H and the external path the
    feedforward (G - K)^-1 Kh; the returned matrix acts as K on the first
    direction and as G on the second.  With only one source active it
    degenerates to exactly K or exactly G.
    """
    omega_grid = np.asarray(omega_grid, dtype=float)
    spec_int = np.broadcast_to(np.asarray(spec_int, dtype=float), omega_grid.shape)
    spec_ext = np.broadcast_to(np.asarray(spec_ext, dtype=float), omega_grid.shape)
    k_v = k.interp(omega_grid)
    g_v = g_load.interp(omega_grid)
    h_v = h_int.interp(omega_grid) if h_int is not None else None
    kh_v = kh.interp(omega_grid) if kh is not None else None
    out = np.empty((len(omega_grid), 2, 2), dtype=complex)
    for i, w in enumerate(omega_grid):
        ki, gi = k_v[i], g_v[i]
        wi, we = math.sqrt(spec_int[i]), math.sqrt(spec_ext[i])
        if wi == 0.0 and we == 0.0:
            raise ToolkitError("both disturbance spectra vanish")
        if wi == 0.0:
            out[i] = gi
            continue
        if we == 0.0:
            out[i] = ki
            continue
        diff = ki - gi
        try:
            a = np.linalg.solve(diff, h_v[i][:, 0]) * wi
            b_vec = np.linalg.solve(gi - ki, kh_v[i][:, 0]) * we
        except np.linalg.LinAlgError as exc:
            raise FrequencyDomainError(
                f"singular feedback difference at omega={w}", omega=w
            ) from exc
        basis = np.column_stack([a, b_vec])
        if abs(np.linalg.det(basis)) < 1e-300:
            raise FrequencyDomainError(
                f"disturbance directions collinear at omega={w}", omega=w
            )
        image = np.column_stack([ki @ a, gi @ b_vec])
        out[i] = image @ np.linalg.inv(basis)
    return FrequencyResponse(omega_grid, out,
                             in_labels=["dVx", "dVy"], out_labels=["dIx", "dIy"])


def superposition_decompose(model, xi_int, xi_ext, ts):
    """Responses of the linear system to each disturbance alone.

    Returns rectangular voltage and current delta series for the internal
    path, the external path, and the combined run; the sums reproduce the
    combined responses to machine precision by linearity.
    """
    if model.b.shape[1] < 2:
        raise ToolkitError("model must carry both disturbance inputs")
    xi_int = np.asarray(xi_int, dtype=float)
    xi_ext = np.asarray(xi_ext, dtype=float)
    n = max(len(xi_int), len(xi_ext))
    d_int = np.zeros((n, 2))
    d_int[: len(xi_int), 0] = xi_int
    d_ext = np.zeros((n, 2))
    d_ext[: len(xi_ext), 1] = xi_ext
    iv = [model.output("vx"), model.output("vy")]
    ii = [model.output("ix"), model.output("iy")]
    resp_i = linear_response(model, d_int, ts)
    resp_e = linear_response(model, d_ext, ts)
    resp_c = linear_response(model, d_int + d_ext, ts)
    return {
        "v_int": resp_i[:, iv], "i_int": resp_i[:, ii],
        "v_ext": resp_e[:, iv], "i_ext": resp_e[:, ii],
        "v_combined": resp_c[:, iv], "i_combined": resp_c[:, ii],
    }
