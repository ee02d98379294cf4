"""State containers for the three formulations, plus constraint validators.

``PrimitiveState`` holds the physical fields (v, w, theta) of the fast-rotating
system; ``GPVState`` the generalized potential-vorticity variables that split
the dynamics into slow (pv, boundary temperature traces) and fast (imbalance,
mean-velocity profile) parts; ``LimitState`` the slow limit fields together
with the complex "+" envelopes of the fast waves (the "-" branch is always the
complex conjugate).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .grid import ChannelGrid

__all__ = [
    "PrimitiveState",
    "GPVState",
    "LimitState",
    "FastPair",
    "FastComponents",
    "DiagnosticsRecord",
    "ValidationReport",
    "validate_primitive",
    "validate_gpv",
    "DIAGNOSTICS_HEADER",
]


def _finite(name, *arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError(f"{name}: non-finite entries")


@dataclass
class PrimitiveState:
    """Physical state (v, w, theta) at time t for Rossby/Froude number eps.

    v : (2, nx, ny, nz+1) horizontal velocity
    w : (nx, ny, nz+1) vertical velocity (zero at z = 0, h)
    theta : (nx, ny, nz+1) buoyancy deviation
    """

    grid: ChannelGrid
    v: np.ndarray
    w: np.ndarray
    theta: np.ndarray
    t: float = 0.0
    eps: float = 1.0

    def __post_init__(self):
        self.grid.check_hvector(self.v, "v")
        self.grid.check_scalar(self.w, "w")
        self.grid.check_scalar(self.theta, "theta")

    def copy(self) -> "PrimitiveState":
        return replace(self, v=self.v.copy(), w=self.w.copy(), theta=self.theta.copy())

    def scaled(self, factor: float) -> "PrimitiveState":
        return replace(self, v=factor * self.v, w=factor * self.w, theta=factor * self.theta)


@dataclass
class GPVState:
    """Generalized potential-vorticity state.

    pv : (nx, ny, nz+1) potential vorticity  d_z theta + curl_h v
    imbalance : (2, nx, ny, nz+1) fast-wave vector  grad_h^perp theta + grad_h w - d_z v
    theta_bot, theta_top : (nx, ny) temperature traces at z = 0, h
    vmean : (2, nz+1) horizontal-mean velocity profile
    """

    grid: ChannelGrid
    pv: np.ndarray
    imbalance: np.ndarray
    theta_bot: np.ndarray
    theta_top: np.ndarray
    vmean: np.ndarray
    t: float = 0.0
    eps: float = 1.0

    def __post_init__(self):
        self.grid.check_scalar(self.pv, "pv")
        self.grid.check_hvector(self.imbalance, "imbalance")
        self.grid.check_boundary(self.theta_bot, "theta_bot")
        self.grid.check_boundary(self.theta_top, "theta_top")
        if np.shape(self.vmean) != (2, self.grid.nz + 1):
            raise ValueError(f"vmean: expected shape (2, {self.grid.nz + 1})")

    def copy(self) -> "GPVState":
        return replace(
            self,
            pv=self.pv.copy(),
            imbalance=self.imbalance.copy(),
            theta_bot=self.theta_bot.copy(),
            theta_top=self.theta_top.copy(),
            vmean=self.vmean.copy(),
        )


@dataclass
class LimitState:
    """Slow limit variables plus complex fast envelopes (the "+" branch).

    pv, theta_bot, theta_top : slow fields as in GPVState (real).
    imbalance_env : (2, nx, ny, nz+1) complex envelope of the imbalance wave.
    vmean_env : (2, nz+1) complex envelope of the mean-velocity profile.
    """

    grid: ChannelGrid
    pv: np.ndarray
    theta_bot: np.ndarray
    theta_top: np.ndarray
    imbalance_env: np.ndarray
    vmean_env: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.grid.check_scalar(self.pv, "pv")
        self.grid.check_boundary(self.theta_bot, "theta_bot")
        self.grid.check_boundary(self.theta_top, "theta_top")
        self.grid.check_hvector(self.imbalance_env, "imbalance_env")
        if np.shape(self.vmean_env) != (2, self.grid.nz + 1):
            raise ValueError(f"vmean_env: expected shape (2, {self.grid.nz + 1})")

    def copy(self) -> "LimitState":
        return replace(
            self,
            pv=self.pv.copy(),
            theta_bot=self.theta_bot.copy(),
            theta_top=self.theta_top.copy(),
            imbalance_env=self.imbalance_env.copy(),
            vmean_env=self.vmean_env.copy(),
        )


@dataclass
class FastPair:
    """Filtered fast variables e^{-it/eps}(X + i X^perp) for X = imbalance, vmean."""

    imbalance_plus: np.ndarray  # (2, nx, ny, nz+1) complex
    vmean_plus: np.ndarray  # (2, nz+1) complex


@dataclass
class FastComponents:
    """Fast components (V+, W+, Theta+) of the limit reconstruction.

    w_plus vanishes at z = 0, h (it is a Dirichlet inverse-Laplacian image).
    """

    v_plus: np.ndarray  # (2, nx, ny, nz+1) complex
    w_plus: np.ndarray  # (nx, ny, nz+1) complex
    theta_plus: np.ndarray  # (nx, ny, nz+1) complex


DIAGNOSTICS_HEADER = (
    "t,E_frak,l2_energy,h3_norm,div_residual,bc_residual,mean_residual,compat_residual"
)


@dataclass
class DiagnosticsRecord:
    """One sampled row of run diagnostics; serializes to a fixed CSV schema."""

    t: float
    E_frak: float
    l2_energy: float
    h3_norm: float
    div_residual: float
    bc_residual: float
    mean_residual: float
    compat_residual: float

    def __post_init__(self):
        vals = [self.E_frak, self.l2_energy, self.h3_norm]
        _finite("diagnostics", np.array(vals))
        if any(v < 0 for v in vals):
            raise ValueError("normed diagnostics must be nonnegative")

    def csv_row(self) -> str:
        vals = (
            self.t,
            self.E_frak,
            self.l2_energy,
            self.h3_norm,
            self.div_residual,
            self.bc_residual,
            self.mean_residual,
            self.compat_residual,
        )
        return ",".join(f"{v:.17g}" for v in vals)

    @classmethod
    def from_csv_row(cls, row: str) -> "DiagnosticsRecord":
        return cls(*(float(tok) for tok in row.strip().split(",")))


@dataclass
class ValidationReport:
    residuals: dict = field(default_factory=dict)
    tol: float = 0.0

    @property
    def passed(self) -> bool:
        return all(r <= self.tol for r in self.residuals.values())

    def __getitem__(self, key):
        return self.residuals[key]


def validate_primitive(p: PrimitiveState, tol: float = 1e-8) -> ValidationReport:
    """Check solenoidality and the impermeable boundary condition.

    div_residual is the L^2 norm of div_h v + d_z w; bc_residual the max of
    |w| over the boundary nodes.
    """
    from .norms import norm_l2

    g = p.grid
    div = g.div_h(p.v) + g.ddz(p.w)
    bc = max(float(np.max(np.abs(p.w[:, :, 0]))), float(np.max(np.abs(p.w[:, :, -1]))))
    return ValidationReport({"div": norm_l2(g, div), "bc": bc}, tol)


def validate_gpv(g_state: GPVState, tol: float = 1e-8) -> ValidationReport:
    """Check the two GPV constraints.

    mean: horizontal_mean(imbalance) + d_z vmean = 0 (the gradient and
    perp-gradient parts of the imbalance have no horizontal mean).
    compat: integral of pv over the channel equals the integral of
    theta_top - theta_bot over T^2 (integrate the pv definition in z).
    """
    g = g_state.grid
    mean_prof = g.horizontal_mean(g_state.imbalance) + g_state.vmean @ g.Dz.T
    mean_res = float(np.sqrt(np.sum((g.wz * mean_prof**2))))
    compat = g.volume_integral(g_state.pv) - g.horizontal_mean(
        g_state.theta_top - g_state.theta_bot
    )
    return ValidationReport({"mean": mean_res, "compat": float(abs(compat))}, tol)
