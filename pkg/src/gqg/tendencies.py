"""Right-hand sides of the three evolution systems.

The eps-system in GPV variables transports pv and the boundary traces, and
rotates the imbalance and mean-velocity profile at rate 1/eps; all quadratic
couplings live in three nonlinearities (scalar, h-vector, profile).  The stiff
rotation is by contract NOT part of any tendency here: the integrator applies
it exactly, so the soft tendencies stay O(1) in eps.

The primitive-variable right-hand side eliminates the pressure through a
Poisson solve: taking the divergence of the momentum equations gives
laplace(p) = pv - eps * div(u . grad u), and keeping d_t w = 0 on the lids
fixes the Neumann data d_z p = theta - eps * (v . grad_h w) there.

The limit system couples the slow transport to the fast envelopes through
resonant quadratic products in which the oscillating phases cancel.

Quadratic products are formed pointwise on the collocation grid; each
assembled right-hand-side field is horizontally dealiased once (the 2/3 rule
is a linear projection, so truncating the sum equals summing truncated
terms).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import ChannelGrid
from .states import GPVState, LimitState, PrimitiveState
from .transform import limit_reconstruct_fast, limit_reconstruct_slow, reconstruct_primitive

__all__ = [
    "GPVTendency",
    "LimitTendency",
    "nonlinear_N1",
    "nonlinear_N2",
    "nonlinear_N3",
    "gpv_tendency",
    "primitive_tendency",
    "solve_pressure",
    "limit_N_phi",
    "limit_N_psi",
    "limit_N_z",
    "limit_tendency",
]


@dataclass
class GPVTendency:
    """Soft (non-stiff) time derivative of a GPV state."""

    d_pv: np.ndarray
    d_imbalance: np.ndarray  # excludes the (1/eps) rotation by contract
    d_theta_bot: np.ndarray
    d_theta_top: np.ndarray
    d_vmean: np.ndarray  # excludes the (1/eps) rotation by contract


@dataclass
class LimitTendency:
    d_pv: np.ndarray
    d_theta_bot: np.ndarray
    d_theta_top: np.ndarray
    d_imbalance_env: np.ndarray
    d_vmean_env: np.ndarray


class _Derivs:
    """All first derivatives of a (v, w, theta) triple, each transform done once.

    Pass ``w=None`` for flows with no vertical velocity (the slow limit part).
    """

    def __init__(self, grid: ChannelGrid, v, w, theta):
        self.v, self.w, self.theta = v, w, theta
        self.dx_v, self.dy_v = grid.dd_both(v)
        self.dz_v = grid.ddz(v)
        if w is not None:
            self.dx_w, self.dy_w = grid.dd_both(w)
            self.dz_w = grid.ddz(w)
        self.dx_th, self.dy_th = grid.dd_both(theta)
        self.dz_th = grid.ddz(theta)

    @property
    def div_v(self):
        return self.dx_v[0] + self.dy_v[1]

    @property
    def curl_v(self):
        return self.dx_v[1] - self.dy_v[0]

    def jac_t_dot(self, ax, ay):
        """Vector with components sum_j (d_i v_j) a_j for a = (ax, ay)."""
        return np.stack(
            [
                self.dx_v[0] * ax + self.dx_v[1] * ay,
                self.dy_v[0] * ax + self.dy_v[1] * ay,
            ]
        )

    def dzv_dot_grad_v(self):
        """Vector with components sum_j (d_z v_j)(d_j v_i)."""
        return np.stack(
            [
                self.dz_v[0] * self.dx_v[0] + self.dz_v[1] * self.dy_v[0],
                self.dz_v[0] * self.dx_v[1] + self.dz_v[1] * self.dy_v[1],
            ]
        )

    def advect(self, grid: ChannelGrid, f, vertical=True):
        """(v . grad_h + w d_z) f for scalar or h-vector f (not dealiased)."""
        fx, fy = grid.dd_both(f)
        out = self.v[0] * fx + self.v[1] * fy
        if vertical:
            out = out + self.w * grid.ddz(f)
        return out


def _n1_raw(d: _Derivs):
    return (
        d.curl_v * d.div_v
        + d.dz_v[0] * (-d.dy_w) + d.dz_v[1] * d.dx_w
        + d.dz_v[0] * d.dx_th + d.dz_v[1] * d.dy_th
        + d.dz_w * d.dz_th
    )


def _n2_raw(grid: ChannelGrid, d: _Derivs):
    return (
        grid.perp(d.jac_t_dot(d.dx_th, d.dy_th))
        + d.dz_th * np.stack([-d.dy_w, d.dx_w])
        + d.jac_t_dot(d.dx_w, d.dy_w)
        + d.dz_w * np.stack([d.dx_w, d.dy_w])
        - d.dzv_dot_grad_v()
        - d.dz_w * d.dz_v
    )


def nonlinear_N1(p: PrimitiveState):
    """Scalar nonlinearity of the pv equation.

    curl_h v * div_h v + d_z v . grad_h^perp w + d_z v . grad_h theta
    + d_z w * d_z theta, horizontally dealiased.
    """
    g = p.grid
    return g.dealias_product(_n1_raw(_Derivs(g, p.v, p.w, p.theta)))


def nonlinear_N2(p: PrimitiveState):
    """H-vector nonlinearity of the imbalance equation (dealiased)."""
    g = p.grid
    return g.dealias_product(_n2_raw(g, _Derivs(g, p.v, p.w, p.theta)))


def nonlinear_N3(p: PrimitiveState):
    """Profile nonlinearity: d_z of the horizontal mean of w v."""
    g = p.grid
    mean_wv = g.horizontal_mean(p.w[None, :, :, :] * p.v)
    return mean_wv @ g.Dz.T


def _boundary_advection(grid: ChannelGrid, v_slice, trace):
    tx, ty = grid.dd_both(trace)
    return grid.dealias_product(v_slice[0] * tx + v_slice[1] * ty)


def gpv_tendency(
    g_state: GPVState, disable_nonlinear: bool = False, check: bool = False
) -> GPVTendency:
    """Soft tendency of the GPV system (stiff rotation excluded).

    Reconstructs (v, w, theta) and assembles transport plus the quadratic
    nonlinearities; with ``disable_nonlinear`` every term vanishes, matching
    the closed-form linear dynamics in which the filtered variables are
    constant.
    """
    g = g_state.grid
    if disable_nonlinear:
        return GPVTendency(
            d_pv=np.zeros_like(g_state.pv),
            d_imbalance=np.zeros_like(g_state.imbalance),
            d_theta_bot=np.zeros_like(g_state.theta_bot),
            d_theta_top=np.zeros_like(g_state.theta_top),
            d_vmean=np.zeros_like(g_state.vmean),
        )
    p = reconstruct_primitive(g_state, check=check)
    d = _Derivs(g, p.v, p.w, p.theta)
    d_pv = -g.dealias_product(d.advect(g, g_state.pv) + _n1_raw(d))
    d_imb = -g.dealias_product(d.advect(g, g_state.imbalance) + _n2_raw(g, d))
    return GPVTendency(
        d_pv=d_pv,
        d_imbalance=d_imb,
        d_theta_bot=-_boundary_advection(g, p.v[:, :, :, 0], g_state.theta_bot),
        d_theta_top=-_boundary_advection(g, p.v[:, :, :, -1], g_state.theta_top),
        d_vmean=-nonlinear_N3(p),
    )


def solve_pressure(p: PrimitiveState, disable_nonlinear: bool = False):
    """Diagnose the pressure enforcing solenoidality and the lid conditions.

    Returns (pressure, adv_v, adv_w, adv_theta); the advection fields are
    reused by the caller.  The k = 0 Neumann mode is gauge-fixed to zero mean
    and its solvability defect projected out.
    """
    g = p.grid
    pv = g.curl_h(p.v) + g.ddz(p.theta)
    if disable_nonlinear:
        zero = np.zeros_like(p.w)
        pressure = g.solve_neumann_poisson(pv, p.theta[:, :, 0], p.theta[:, :, -1])
        return pressure, np.zeros_like(p.v), zero, zero
    d = _Derivs(g, p.v, p.w, p.theta)
    adv_v = g.dealias_product(d.advect(g, p.v))
    adv_w = g.dealias_product(
        p.v[0] * d.dx_w + p.v[1] * d.dy_w + p.w * d.dz_w
    )
    adv_theta = g.dealias_product(
        p.v[0] * d.dx_th + p.v[1] * d.dy_th + p.w * d.dz_th
    )
    rhs = pv - p.eps * (g.div_h(adv_v) + g.ddz(adv_w))
    bot = p.theta[:, :, 0] - p.eps * adv_w[:, :, 0]
    top = p.theta[:, :, -1] - p.eps * adv_w[:, :, -1]
    pressure = g.solve_neumann_poisson(rhs, bot, top)
    return pressure, adv_v, adv_w, adv_theta


def primitive_tendency(p: PrimitiveState, disable_nonlinear: bool = False):
    """Full time derivative (dv, dw, dtheta) of the primitive system.

    The pressure is eliminated through the Neumann Poisson problem, so the
    returned dw vanishes on the lids up to solver tolerance; on exactly
    solenoidal states the tendency is L^2-orthogonal to the state.
    """
    g = p.grid
    pressure, adv_v, adv_w, adv_theta = solve_pressure(p, disable_nonlinear)
    inv_eps = 1.0 / p.eps
    dv = -adv_v - inv_eps * (g.perp(p.v) + g.grad_h(pressure))
    dw = -adv_w - inv_eps * (g.ddz(pressure) - p.theta)
    dtheta = -adv_theta - inv_eps * p.w
    return dv, dw, dtheta


# ----------------------------------------------------------------------
# limit-system resonances
# ----------------------------------------------------------------------


def _resonance_pv(grid: ChannelGrid, df: _Derivs):
    """Fast-fast resonance forcing the limit pv equation.

    Both phase pairings (+,-) and (-,+) are summed; with the "-" components
    equal to conjugates the result is twice the real part of one pairing, so
    the output is real.
    """
    term = (
        df.curl_v * np.conj(df.div_v)
        + df.dz_v[0] * np.conj(-df.dy_w) + df.dz_v[1] * np.conj(df.dx_w)
        + df.dz_v[0] * np.conj(df.dx_th) + df.dz_v[1] * np.conj(df.dy_th)
        + df.dz_w * np.conj(df.dz_th)
    )
    return grid.dealias_product(2.0 * term.real)


def _resonance_psi(grid: ChannelGrid, ds: _Derivs, df: _Derivs):
    """Slow-fast resonance forcing the "+" imbalance envelope (complex)."""
    out = (
        grid.perp(
            df.jac_t_dot(ds.dx_th, ds.dy_th) + ds.jac_t_dot(df.dx_th, df.dy_th)
        )
        + ds.dz_th * np.stack([-df.dy_w, df.dx_w])
        + ds.jac_t_dot(df.dx_w, df.dy_w)
        - np.stack(
            [
                df.dz_v[0] * ds.dx_v[0] + df.dz_v[1] * ds.dy_v[0],
                df.dz_v[0] * ds.dx_v[1] + df.dz_v[1] * ds.dy_v[1],
            ]
        )
        - np.stack(
            [
                ds.dz_v[0] * df.dx_v[0] + ds.dz_v[1] * df.dy_v[0],
                ds.dz_v[0] * df.dx_v[1] + ds.dz_v[1] * df.dy_v[1],
            ]
        )
        - df.dz_w * ds.dz_v
    )
    return grid.dealias_product(out)


def _resonance_z(grid: ChannelGrid, v_slow, w_plus):
    """d_z of the horizontal mean of W+ v_p (complex profile pair)."""
    mean_wv = grid.horizontal_mean(w_plus[None, :, :, :] * v_slow)
    return mean_wv @ grid.Dz.T


def _limit_parts(l_state: LimitState):
    g = l_state.grid
    v_slow, theta_slow = limit_reconstruct_slow(l_state, check=False)
    fast = limit_reconstruct_fast(l_state)
    ds = _Derivs(g, v_slow, None, theta_slow)
    df = _Derivs(g, fast.v_plus, fast.w_plus, fast.theta_plus)
    return ds, df


def limit_N_phi(l_state: LimitState):
    """Resonant source in the limit pv equation (zero in the balanced regime)."""
    _, df = _limit_parts(l_state)
    return _resonance_pv(l_state.grid, df)


def limit_N_psi(l_state: LimitState):
    ds, df = _limit_parts(l_state)
    return _resonance_psi(l_state.grid, ds, df)


def limit_N_z(l_state: LimitState):
    v_slow, _ = limit_reconstruct_slow(l_state, check=False)
    fast = limit_reconstruct_fast(l_state)
    return _resonance_z(l_state.grid, v_slow, fast.w_plus)


def limit_tendency(l_state: LimitState, check: bool = False) -> LimitTendency:
    """Time derivative of the limit system.

    Slow pv and traces are transported by the slow velocity and forced by the
    fast-fast resonance; the envelopes are advected (no vertical advection:
    the slow vertical velocity vanishes) and forced by the slow-fast
    resonances twisted into the "+" eigenspace of the rotation.
    """
    g = l_state.grid
    if check:
        limit_reconstruct_slow(l_state, check=True)
    ds, df = _limit_parts(l_state)
    v_slow = ds.v

    d_pv = -g.dealias_product(
        ds.advect(g, l_state.pv, vertical=False)
    ) - _resonance_pv(g, df)

    d_bot = -_boundary_advection(g, v_slow[:, :, :, 0], l_state.theta_bot)
    d_top = -_boundary_advection(g, v_slow[:, :, :, -1], l_state.theta_top)

    n_psi = _resonance_psi(g, ds, df)
    d_env = -g.dealias_product(
        ds.advect(g, l_state.imbalance_env, vertical=False)
    ) - (n_psi + 1j * g.perp(n_psi))

    n_z = _resonance_z(g, v_slow, df.w)
    d_vmean = -(n_z + 1j * np.stack([-n_z[1], n_z[0]]))

    return LimitTendency(
        d_pv=d_pv,
        d_theta_bot=d_bot,
        d_theta_top=d_top,
        d_imbalance_env=d_env,
        d_vmean_env=d_vmean,
    )
