"""Time advancement for the three formulations.

The eps-system's only O(1/eps) term is the planar rotation of (imbalance,
vmean); its 2x2 propagator is applied exactly between the stages of an
integrating-factor RK4, so the linear regime is integrated to round-off and
the explicit right-hand side stays non-stiff.  The primitive oracle solver
uses classical RK4 (the rotation eigenvalues i/eps stay inside the stability
region for dt <= eps/2), and the limit system has no stiffness at all.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .states import GPVState, LimitState, PrimitiveState
from .tendencies import GPVTendency, gpv_tendency, limit_tendency, primitive_tendency

__all__ = [
    "IntegratorConfig",
    "rotation_phase",
    "step_eps_gpv",
    "step_eps_primitive",
    "step_limit",
    "stable_dt",
    "project_gpv_constraints",
    "project_divergence",
    "project_limit_compatibility",
]


@dataclass
class IntegratorConfig:
    """Step-size policy and projection switches.

    dt : fixed step ("auto" derives one from stable_dt at the initial state).
    cfl : advective Courant number against min(dx, dz_min).
    eps_resolution : dt <= eps_resolution * eps whenever fast phases must be
        sampled accurately by the nonlinear terms (the rotation itself is
        exact).
    constraint_projection : re-impose the exact GPV identities after each step.
    """

    dt: float | str = "auto"
    cfl: float = 0.5
    eps_resolution: float = 0.5
    t_end: float = 1.0
    dt_max: float = 0.05
    constraint_projection: bool = True

    def __post_init__(self):
        if self.dt != "auto" and float(self.dt) <= 0:
            raise ValueError("dt must be positive or 'auto'")
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must lie in (0, 1]")
        if self.eps_resolution <= 0 or self.dt_max <= 0 or self.t_end < 0:
            raise ValueError("eps_resolution, dt_max positive; t_end nonnegative")


def rotation_phase(x, angle: float):
    """Exact propagator of d_t X + (1/eps) X^perp = 0 over angle = dt/eps.

    Rotates the component pair (X1, X2) by -angle; norm-preserving.  Works on
    any array with the component axis first (h-vector fields, profile pairs).
    """
    c = np.cos(angle)
    s = np.sin(angle)
    return np.stack([c * x[0] + s * x[1], -s * x[0] + c * x[1]])


# ----------------------------------------------------------------------
# GPV stepping (integrating-factor RK4)
# ----------------------------------------------------------------------


def _gpv_rotate(g: GPVState, angle: float) -> GPVState:
    return replace(
        g,
        imbalance=rotation_phase(g.imbalance, angle),
        vmean=rotation_phase(g.vmean, angle),
    )


def _td_rotate(td: GPVTendency, angle: float) -> GPVTendency:
    return GPVTendency(
        d_pv=td.d_pv,
        d_imbalance=rotation_phase(td.d_imbalance, angle),
        d_theta_bot=td.d_theta_bot,
        d_theta_top=td.d_theta_top,
        d_vmean=rotation_phase(td.d_vmean, angle),
    )


def _gpv_add(g: GPVState, td: GPVTendency, coef: float) -> GPVState:
    return replace(
        g,
        pv=g.pv + coef * td.d_pv,
        imbalance=g.imbalance + coef * td.d_imbalance,
        theta_bot=g.theta_bot + coef * td.d_theta_bot,
        theta_top=g.theta_top + coef * td.d_theta_top,
        vmean=g.vmean + coef * td.d_vmean,
    )


def _td_combine(parts):
    """Weighted sum of GPVTendency objects given as (coef, tendency) pairs."""
    out = None
    for coef, td in parts:
        if out is None:
            out = GPVTendency(
                d_pv=coef * td.d_pv,
                d_imbalance=coef * td.d_imbalance,
                d_theta_bot=coef * td.d_theta_bot,
                d_theta_top=coef * td.d_theta_top,
                d_vmean=coef * td.d_vmean,
            )
        else:
            out.d_pv += coef * td.d_pv
            out.d_imbalance += coef * td.d_imbalance
            out.d_theta_bot += coef * td.d_theta_bot
            out.d_theta_top += coef * td.d_theta_top
            out.d_vmean += coef * td.d_vmean
    return out


def project_gpv_constraints(g: GPVState):
    """Overwrite the exact identities: mean(imbalance) = -d_z vmean and
    zero global compatibility defect of pv.

    Both are identities of the continuous system; drift at discretization
    scale is integrator error, not dynamics.  Returns the projected state and
    the applied correction magnitudes.
    """
    grid = g.grid
    target = -(g.vmean @ grid.Dz.T)
    current = grid.horizontal_mean(g.imbalance)
    shift = target - current
    imbalance = g.imbalance + shift[:, None, None, :]
    defect = grid.volume_integral(g.pv) - grid.horizontal_mean(g.theta_top - g.theta_bot)
    pv = g.pv - defect / grid.h
    mags = {
        "mean_shift": float(np.max(np.abs(shift))),
        "compat_shift": float(abs(defect) / grid.h),
    }
    return replace(g, pv=pv, imbalance=imbalance), mags


def step_eps_gpv(
    g: GPVState, dt: float, disable_nonlinear: bool = False, projection: bool = True
):
    """One integrating-factor RK4 step of the GPV system.

    The exact rotation is applied at the stage times; with the nonlinear
    terms disabled the step reduces to the exact rotation alone.  Returns
    (state, projection magnitudes).
    """
    half = 0.5 * dt / g.eps
    full = dt / g.eps

    def F(state):
        return gpv_tendency(state, disable_nonlinear=disable_nonlinear)

    a1 = F(g)
    s2 = _gpv_rotate(_gpv_add(g, a1, 0.5 * dt), half)
    a2 = F(s2)
    s3 = _gpv_add(_gpv_rotate(g, half), a2, 0.5 * dt)
    a3 = F(s3)
    s4 = _gpv_add(_gpv_rotate(g, full), _td_rotate(a3, half), dt)
    a4 = F(s4)

    increment = _td_combine(
        [
            (dt / 6.0, _td_rotate(a1, full)),
            (dt / 3.0, _td_rotate(a2, half)),
            (dt / 3.0, _td_rotate(a3, half)),
            (dt / 6.0, a4),
        ]
    )
    out = _gpv_add(_gpv_rotate(g, full), increment, 1.0)
    out.t = g.t + dt
    mags = {"mean_shift": 0.0, "compat_shift": 0.0}
    if projection and not disable_nonlinear:
        out, mags = project_gpv_constraints(out)
    return out, mags


# ----------------------------------------------------------------------
# primitive stepping (classical RK4 + divergence cleaning)
# ----------------------------------------------------------------------


def project_divergence(p: PrimitiveState) -> PrimitiveState:
    """Remove the divergence residual by subtracting a potential gradient.

    Solves laplace(chi) = div u with d_z chi = w on the lids, so the corrected
    field is solenoidal and impermeable.
    """
    g = p.grid
    div = g.div_h(p.v) + g.ddz(p.w)
    chi = g.solve_neumann_poisson(div, p.w[:, :, 0], p.w[:, :, -1])
    v = p.v - g.grad_h(chi)
    w = p.w - g.ddz(chi)
    w[:, :, 0] = 0.0
    w[:, :, -1] = 0.0
    return replace(p, v=v, w=w)


def step_eps_primitive(
    p: PrimitiveState,
    dt: float,
    disable_nonlinear: bool = False,
    projection_tol: float = 1e-10,
) -> PrimitiveState:
    """Classical RK4 on the primitive right-hand side.

    The pressure solve keeps the stage tendencies solenoidal, so the
    post-step cleaning projection only acts when round-off accumulates past
    ``projection_tol``.
    """
    from .norms import norm_l2

    def F(state):
        return primitive_tendency(state, disable_nonlinear=disable_nonlinear)

    g = p.grid

    def add(state, ks, coefs):
        v = state.v.copy()
        w = state.w.copy()
        th = state.theta.copy()
        for (dv, dw, dth), c in zip(ks, coefs):
            v += c * dv
            w += c * dw
            th += c * dth
        return replace(state, v=v, w=w, theta=th)

    k1 = F(p)
    k2 = F(add(p, [k1], [0.5 * dt]))
    k3 = F(add(p, [k2], [0.5 * dt]))
    k4 = F(add(p, [k3], [dt]))
    out = add(p, [k1, k2, k3, k4], [dt / 6.0, dt / 3.0, dt / 3.0, dt / 6.0])
    out.t = p.t + dt
    div = g.div_h(out.v) + g.ddz(out.w)
    if norm_l2(g, div) > projection_tol:
        out = project_divergence(out)
    return out


# ----------------------------------------------------------------------
# limit stepping
# ----------------------------------------------------------------------


def project_limit_compatibility(l_state: LimitState) -> LimitState:
    g = l_state.grid
    defect = g.volume_integral(l_state.pv) - g.horizontal_mean(
        l_state.theta_top - l_state.theta_bot
    )
    return replace(l_state, pv=l_state.pv - defect / g.h)


def step_limit(l_state: LimitState, dt: float, projection: bool = True) -> LimitState:
    """Classical RK4 on the limit system (no 1/eps stiffness present)."""

    def add(state, ks, coefs):
        pv = state.pv.copy()
        bot = state.theta_bot.copy()
        top = state.theta_top.copy()
        env = state.imbalance_env.copy()
        vm = state.vmean_env.copy()
        for td, c in zip(ks, coefs):
            pv += c * td.d_pv
            bot += c * td.d_theta_bot
            top += c * td.d_theta_top
            env += c * td.d_imbalance_env
            vm += c * td.d_vmean_env
        return replace(state, pv=pv, theta_bot=bot, theta_top=top,
                       imbalance_env=env, vmean_env=vm)

    k1 = limit_tendency(l_state)
    k2 = limit_tendency(add(l_state, [k1], [0.5 * dt]))
    k3 = limit_tendency(add(l_state, [k2], [0.5 * dt]))
    k4 = limit_tendency(add(l_state, [k3], [dt]))
    out = add(l_state, [k1, k2, k3, k4], [dt / 6.0, dt / 3.0, dt / 3.0, dt / 6.0])
    out.t = l_state.t + dt
    if projection:
        out = project_limit_compatibility(out)
    return out


# ----------------------------------------------------------------------
# step control
# ----------------------------------------------------------------------


def _max_speed(state) -> float:
    if isinstance(state, PrimitiveState):
        return float(max(np.max(np.abs(state.v)), np.max(np.abs(state.w))))
    if isinstance(state, GPVState):
        from .transform import reconstruct_primitive

        return _max_speed(reconstruct_primitive(state, check=False))
    if isinstance(state, LimitState):
        from .transform import compose_approximation

        # envelope phases only modulate; the composed field at t bounds the speed
        return _max_speed(compose_approximation(state, state.t, 1.0))
    raise TypeError(f"unsupported state type {type(state)!r}")


def stable_dt(state, config: IntegratorConfig) -> float:
    """min(cfl * min(dx, dz_min) / max speed, eps_resolution * eps, dt_max)."""
    grid = state.grid
    speed = _max_speed(state)
    if not np.isfinite(speed):
        raise ValueError("non-finite velocities in stable_dt")
    dx = min(1.0 / grid.nx, 1.0 / grid.ny, grid.min_dz())
    cands = [config.dt_max]
    if speed > 0:
        cands.append(config.cfl * dx / speed)
    eps = getattr(state, "eps", None)
    if eps is not None:
        cands.append(config.eps_resolution * eps)
    dt = min(cands)
    if dt <= 0:
        raise ValueError("stable_dt produced a nonpositive step")
    return float(dt)
