"""Exact kinematic maps between the primitive, GPV, and limit formulations.

The potential-vorticity pair determines the physical fields through three
elliptic inversions:

    w     = invD(div_h Psi)
    theta = lift + invD(curl_h Psi + d_z pv - laplace(lift))
    v     = vmean + grad_h invLh(div_h v) + grad_h^perp invLh(curl_h v)

with invD the Dirichlet inverse Laplacian, invLh the zero-mean horizontal one,
and lift the boundary extension of the temperature traces.  The same maps,
halved and applied to the complex envelopes, reconstruct the fast components
of the limit state.
"""

from __future__ import annotations

import numpy as np

from .grid import ChannelGrid
from .states import (
    FastComponents,
    FastPair,
    GPVState,
    LimitState,
    PrimitiveState,
    validate_gpv,
    validate_primitive,
)

__all__ = [
    "GPVConstraintError",
    "extract_gpv",
    "reconstruct_primitive",
    "fast_filter",
    "fast_unfilter",
    "limit_reconstruct_slow",
    "limit_reconstruct_fast",
    "compose_approximation",
    "limit_from_gpv",
]

DEFAULT_CHECK_TOL = 1e-6


class GPVConstraintError(ValueError):
    """A GPV state violates the mean or compatibility constraint."""

    def __init__(self, mean_residual: float, compat_residual: float, tol: float):
        super().__init__(
            "GPV state violates its constraints: "
            f"mean residual {mean_residual:.3e}, compatibility residual "
            f"{compat_residual:.3e} (tolerance {tol:.1e})"
        )
        self.mean_residual = mean_residual
        self.compat_residual = compat_residual


def extract_gpv(p: PrimitiveState, check: bool = True, tol: float = DEFAULT_CHECK_TOL) -> GPVState:
    """Map a primitive state to its GPV variables.

    pv = d_z theta + curl_h v; imbalance = grad_h^perp theta + grad_h w - d_z v;
    boundary traces of theta; horizontal-mean velocity profile.
    """
    if check:
        rep = validate_primitive(p, tol)
        if not rep.passed:
            raise ValueError(
                f"primitive state invalid: div residual {rep['div']:.3e}, "
                f"bc residual {rep['bc']:.3e} (tolerance {tol:.1e})"
            )
    g = p.grid
    pv = g.ddz(p.theta) + g.curl_h(p.v)
    imbalance = g.grad_h_perp(p.theta) + g.grad_h(p.w) - g.ddz(p.v)
    return GPVState(
        grid=g,
        pv=pv,
        imbalance=imbalance,
        theta_bot=p.theta[:, :, 0].copy(),
        theta_top=p.theta[:, :, -1].copy(),
        vmean=g.horizontal_mean(p.v),
        t=p.t,
        eps=p.eps,
    )


def _broadcast_profile(grid: ChannelGrid, prof):
    """Expand a (2, nz+1) profile to a constant-in-(x, y) h-vector field."""
    shape = (2, grid.nx, grid.ny, grid.nz + 1)
    return np.broadcast_to(prof[:, None, None, :], shape).copy()


def reconstruct_primitive(
    g_state: GPVState, check: bool = True, tol: float = DEFAULT_CHECK_TOL
) -> PrimitiveState:
    """Invert the GPV map back to (v, w, theta).

    Solver order is fixed (w, then theta, then v) so the v assembly can reuse
    the two Dirichlet solves.  States violating the mean or compatibility
    constraint are rejected: such data need not correspond to any primitive
    state.
    """
    g = g_state.grid
    if check:
        rep = validate_gpv(g_state, tol)
        if not rep.passed:
            raise GPVConstraintError(rep["mean"], rep["compat"], tol)

    w = g.inv_laplace_dirichlet(g.div_h(g_state.imbalance))

    lift = g.extend_boundary(g_state.theta_bot, g_state.theta_top)
    q = g.curl_h(g_state.imbalance) + g.ddz(g_state.pv) - g.laplace3(lift)
    theta_dirichlet = g.inv_laplace_dirichlet(q)
    theta = lift + theta_dirichlet

    curl_v = g_state.pv - g.ddz(lift) - g.ddz(theta_dirichlet)
    v = (
        _broadcast_profile(g, g_state.vmean)
        + g.grad_h(g.inv_laplace_h(-g.ddz(w)))
        + g.grad_h_perp(g.inv_laplace_h(curl_v))
    )
    return PrimitiveState(grid=g, v=v, w=w, theta=theta, t=g_state.t, eps=g_state.eps)


def fast_filter(g_state: GPVState) -> FastPair:
    """Remove the fast rotation: X -> e^{-it/eps}(X + i X^perp).

    The filtered variables are constant under the pure rotation flow; the "-"
    branch is the complex conjugate, and X = Re(e^{it/eps} X_plus) inverts the
    map.
    """
    g = g_state.grid
    phase = np.exp(-1j * g_state.t / g_state.eps)
    imb = g_state.imbalance
    vm = g_state.vmean
    return FastPair(
        imbalance_plus=phase * (imb + 1j * g.perp(imb)),
        vmean_plus=phase * (vm + 1j * g.perp(vm)),
    )


def fast_unfilter(pair: FastPair, t: float, eps: float):
    """Recover the physical (imbalance, vmean) from the "+" envelope."""
    phase = np.exp(1j * t / eps)
    return (phase * pair.imbalance_plus).real, (phase * pair.vmean_plus).real


def limit_from_gpv(g_state: GPVState) -> LimitState:
    """Project a GPV state onto limit variables (the canonical t=0 data map)."""
    pair = fast_filter(g_state)
    return LimitState(
        grid=g_state.grid,
        pv=g_state.pv.copy(),
        theta_bot=g_state.theta_bot.copy(),
        theta_top=g_state.theta_top.copy(),
        imbalance_env=pair.imbalance_plus,
        vmean_env=pair.vmean_plus,
        t=g_state.t,
    )


def _check_limit(l_state: LimitState, tol: float):
    g = l_state.grid
    compat = g.volume_integral(l_state.pv) - g.horizontal_mean(
        l_state.theta_top - l_state.theta_bot
    )
    if abs(compat) > tol:
        raise GPVConstraintError(0.0, float(abs(compat)), tol)


def limit_reconstruct_slow(
    l_state: LimitState, check: bool = True, tol: float = DEFAULT_CHECK_TOL
):
    """Slow (geostrophic/hydrostatic) fields of the limit state.

    Returns (v_p, theta_p); the slow vertical velocity is identically zero,
    div_h v_p = 0, and v_p has no horizontal mean.
    """
    if check:
        _check_limit(l_state, tol)
    g = l_state.grid
    lift = g.extend_boundary(l_state.theta_bot, l_state.theta_top)
    q = g.ddz(l_state.pv) - g.laplace3(lift)
    theta_dirichlet = g.inv_laplace_dirichlet(q)
    theta_p = lift + theta_dirichlet
    curl_v = l_state.pv - g.ddz(lift) - g.ddz(theta_dirichlet)
    v_p = g.grad_h_perp(g.inv_laplace_h(curl_v))
    return v_p, theta_p


def limit_reconstruct_fast(l_state: LimitState) -> FastComponents:
    """Fast components (V+, W+, Theta+) determined by the complex envelopes."""
    g = l_state.grid
    psi = l_state.imbalance_env
    w_plus = 0.5 * g.inv_laplace_dirichlet(g.div_h(psi))
    theta_plus = 0.5 * g.inv_laplace_dirichlet(g.curl_h(psi))
    v_plus = 0.5 * (
        _broadcast_profile(g, l_state.vmean_env)
        - g.grad_h(g.inv_laplace_h(g.ddz(2.0 * w_plus)))
        - g.grad_h_perp(g.inv_laplace_h(g.ddz(2.0 * theta_plus)))
    )
    return FastComponents(v_plus=v_plus, w_plus=w_plus, theta_plus=theta_plus)


def compose_approximation(l_state: LimitState, t: float, eps: float) -> PrimitiveState:
    """Slow part plus oscillating fast part and its conjugate, error set to zero.

    This is the predicted approximant of the convergence theory, used to
    compare eps-system runs against the limit system.
    """
    g = l_state.grid
    v_p, theta_p = limit_reconstruct_slow(l_state, check=False)
    fast = limit_reconstruct_fast(l_state)
    phase = np.exp(1j * t / eps)
    v = v_p + 2.0 * (phase * fast.v_plus).real
    w = 2.0 * (phase * fast.w_plus).real
    theta = theta_p + 2.0 * (phase * fast.theta_plus).real
    return PrimitiveState(grid=g, v=v, w=w, theta=theta, t=t, eps=eps)
