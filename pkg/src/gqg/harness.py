"""Experiment drivers: single runs, eps-sweeps, and the validation regimes.

A sweep advances the eps-system (GPV formulation) and the limit system from
the same initial data and compares them on a shared lattice of checkpoint
times; every run samples the energy functional so the uniform-boundedness
property can be checked across the sweep.  Member runs are independent and
may execute concurrently; report assembly is deterministic (rows sorted by
eps, descending).
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .grid import ChannelGrid
from .initial import generate_initial
from .integrators import (
    IntegratorConfig,
    rotation_phase,
    stable_dt,
    step_eps_gpv,
    step_eps_primitive,
    step_limit,
)
from .norms import (
    energy_functional,
    l2_energy,
    profile_sobolev_norm,
    sobolev_norm,
)
from .states import (
    DiagnosticsRecord,
    GPVState,
    LimitState,
    PrimitiveState,
    validate_gpv,
    validate_primitive,
)
from .transform import (
    compose_approximation,
    extract_gpv,
    fast_filter,
    limit_from_gpv,
    reconstruct_primitive,
)

__all__ = [
    "ConfigError",
    "InstabilityError",
    "RunConfig",
    "RunResult",
    "run_simulation",
    "run_eps_sweep",
    "run_linear_validation",
    "run_wellprepared_comparison",
    "run_cross_validation",
    "diagnostics_record",
]

BLOWUP_FACTOR = 10.0


class ConfigError(ValueError):
    pass


class InstabilityError(RuntimeError):
    def __init__(self, message, t=None, eps=None):
        super().__init__(message)
        self.t = t
        self.eps = eps


@dataclass
class RunConfig:
    """Resolved run configuration (a validated view of the JSON document)."""

    grid: dict = field(default_factory=lambda: {"nx": 32, "ny": 32, "nz": 32, "h": 1.0})
    eps: float | list = 0.1
    t_end: float = 1.0
    formulation: str = "gpv"
    initial_data: dict = field(default_factory=lambda: {"kind": "random_seeded"})
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    disable_nonlinear: bool = False
    outputs: dict = field(
        default_factory=lambda: {"diagnostics_every": 5, "snapshot_every": 0, "out_dir": "out"}
    )
    jobs: int = 1
    n_checkpoints: int = 8
    dealias: bool = True

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        try:
            cfg = cls()
            extra = set(doc) - {
                "grid", "eps", "t_end", "formulation", "initial_data", "integrator",
                "disable_nonlinear", "outputs", "jobs", "n_checkpoints", "dealias",
            }
            if extra:
                raise ConfigError(f"unknown config keys: {sorted(extra)}")
            cfg.grid = {**cfg.grid, **doc.get("grid", {})}
            cfg.eps = doc.get("eps", cfg.eps)
            cfg.t_end = float(doc.get("t_end", cfg.t_end))
            cfg.formulation = doc.get("formulation", cfg.formulation)
            cfg.initial_data = {**cfg.initial_data, **doc.get("initial_data", {})}
            integ = doc.get("integrator", {})
            cfg.integrator = IntegratorConfig(**integ) if isinstance(integ, dict) else integ
            cfg.disable_nonlinear = bool(doc.get("disable_nonlinear", False))
            cfg.outputs = {**cfg.outputs, **doc.get("outputs", {})}
            cfg.jobs = int(doc.get("jobs", 1))
            cfg.n_checkpoints = int(doc.get("n_checkpoints", 8))
            cfg.dealias = bool(doc.get("dealias", True))
            cfg.validate()
            return cfg
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def validate(self):
        for key in ("nx", "ny", "nz"):
            if int(self.grid.get(key, 0)) <= 0:
                raise ConfigError(f"grid.{key} must be positive")
        if float(self.grid.get("h", 1.0)) <= 0:
            raise ConfigError("grid.h must be positive")
        for e in self.eps_list():
            if e <= 0:
                raise ConfigError("eps values must be positive")
        if self.t_end < 0:
            raise ConfigError("t_end must be nonnegative")
        if self.formulation not in ("gpv", "primitive", "limit"):
            raise ConfigError(f"unknown formulation {self.formulation!r}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.n_checkpoints < 1:
            raise ConfigError("n_checkpoints must be >= 1")

    def eps_list(self) -> list:
        return [float(e) for e in (self.eps if isinstance(self.eps, (list, tuple)) else [self.eps])]

    def make_grid(self) -> ChannelGrid:
        g = self.grid
        return ChannelGrid(int(g["nx"]), int(g["ny"]), int(g["nz"]), float(g.get("h", 1.0)),
                           dealias=self.dealias)

    def resolved(self) -> dict:
        integ = self.integrator
        return {
            "grid": dict(self.grid),
            "eps": self.eps,
            "t_end": self.t_end,
            "formulation": self.formulation,
            "initial_data": dict(self.initial_data),
            "integrator": {
                "dt": integ.dt,
                "cfl": integ.cfl,
                "eps_resolution": integ.eps_resolution,
                "t_end": integ.t_end,
                "dt_max": integ.dt_max,
                "constraint_projection": integ.constraint_projection,
            },
            "disable_nonlinear": self.disable_nonlinear,
            "outputs": dict(self.outputs),
            "jobs": self.jobs,
            "n_checkpoints": self.n_checkpoints,
            "dealias": self.dealias,
        }


# ----------------------------------------------------------------------
# diagnostics
# ----------------------------------------------------------------------


def diagnostics_record(p: PrimitiveState, gpv: GPVState | None = None) -> DiagnosticsRecord:
    g = p.grid
    if gpv is None:
        gpv = extract_gpv(p, check=False)
    prep = validate_primitive(p)
    grep = validate_gpv(gpv)
    return DiagnosticsRecord(
        t=p.t,
        E_frak=energy_functional(p),
        l2_energy=l2_energy(p),
        h3_norm=sobolev_norm(g, [p.v, p.w, p.theta], 3),
        div_residual=prep["div"],
        bc_residual=prep["bc"],
        mean_residual=grep["mean"],
        compat_residual=grep["compat"],
    )


def _limit_diagnostics(l_state: LimitState) -> DiagnosticsRecord:
    """Diagnostics of a limit state, evaluated on its slow reconstruction."""
    from .transform import limit_reconstruct_slow

    g = l_state.grid
    v_p, theta_p = limit_reconstruct_slow(l_state, check=False)
    p = PrimitiveState(g, v_p, np.zeros(g.shape), theta_p, t=l_state.t, eps=1.0)
    rec = diagnostics_record(p)
    compat = g.volume_integral(l_state.pv) - g.horizontal_mean(
        l_state.theta_top - l_state.theta_bot
    )
    rec.compat_residual = float(abs(compat))
    return rec


def _fit_dt(interval: float, dt_target: float) -> float:
    """Largest dt <= dt_target that divides the checkpoint interval exactly."""
    n = max(1, math.ceil(interval / dt_target - 1e-12))
    return interval / n


def _resolve_dt(config: RunConfig, state) -> float:
    integ = config.integrator
    if integ.dt == "auto":
        return stable_dt(state, integ)
    return float(integ.dt)


# ----------------------------------------------------------------------
# single simulation
# ----------------------------------------------------------------------


@dataclass
class RunResult:
    records: list
    final_state: object
    sup_E: float
    dt: float
    n_steps: int
    projection_log: list = field(default_factory=list)


def _check_blowup(E0: float, rec: DiagnosticsRecord, eps):
    if E0 > 0 and rec.E_frak > BLOWUP_FACTOR * E0:
        raise InstabilityError(
            f"energy functional grew {rec.E_frak / E0:.1f}x past its initial value "
            f"at t = {rec.t:.4f}; aborting unstable run",
            t=rec.t,
            eps=eps,
        )


def run_simulation(config: RunConfig, on_snapshot=None) -> RunResult:
    """Advance the configured formulation to t_end with fixed dt.

    Emits a DiagnosticsRecord every ``outputs.diagnostics_every`` steps (and
    at the initial and final times); calls ``on_snapshot(step, state)`` on the
    snapshot cadence.  Raises InstabilityError if the energy functional grows
    past ten times its initial value.
    """
    grid = config.make_grid()
    eps_values = config.eps_list()
    if len(eps_values) != 1:
        raise ConfigError("run_simulation expects a single eps (use run_eps_sweep for lists)")
    eps = eps_values[0]
    p0 = generate_initial(grid, config.initial_data, eps)

    if config.formulation == "gpv":
        state = extract_gpv(p0)
        to_primitive = lambda s: reconstruct_primitive(s, check=False)
        diag = lambda s: diagnostics_record(to_primitive(s), s)
    elif config.formulation == "primitive":
        state = p0
        diag = lambda s: diagnostics_record(s)
    else:
        state = limit_from_gpv(extract_gpv(p0))
        diag = _limit_diagnostics

    dt = _resolve_dt(config, state)
    n_steps = max(0, math.ceil(config.t_end / dt - 1e-12)) if config.t_end > 0 else 0
    if n_steps:
        dt = config.t_end / n_steps

    every = max(1, int(config.outputs.get("diagnostics_every", 5)))
    snap_every = int(config.outputs.get("snapshot_every", 0))
    records = [diag(state)]
    E0 = records[0].E_frak
    sup_E = E0
    projection_log = []
    if on_snapshot is not None:
        on_snapshot(0, state)

    for step in range(1, n_steps + 1):
        if config.formulation == "gpv":
            state, mags = step_eps_gpv(
                state,
                dt,
                disable_nonlinear=config.disable_nonlinear,
                projection=config.integrator.constraint_projection,
            )
            projection_log.append({"t": state.t, **mags})
        elif config.formulation == "primitive":
            state = step_eps_primitive(state, dt, disable_nonlinear=config.disable_nonlinear)
        else:
            state = step_limit(
                state, dt, projection=config.integrator.constraint_projection
            )
        if step % every == 0 or step == n_steps:
            rec = diag(state)
            records.append(rec)
            sup_E = max(sup_E, rec.E_frak)
            _check_blowup(E0, rec, eps)
        if on_snapshot is not None and (
            (snap_every > 0 and step % snap_every == 0) or step == n_steps
        ):
            on_snapshot(step, state)
    return RunResult(records, state, sup_E, dt, n_steps, projection_log)


# ----------------------------------------------------------------------
# checkpointed advancement (shared by sweeps and validation regimes)
# ----------------------------------------------------------------------


def _checkpoint_times(config: RunConfig):
    n = config.n_checkpoints
    return [config.t_end * (j + 1) / n for j in range(n)]


def _advance_gpv_checkpointed(config: RunConfig, g0: GPVState, collect):
    """Advance a GPV state, calling ``collect(state)`` at each checkpoint.

    Returns the sup of the energy functional over the checkpoints (including
    t = 0).
    """
    interval = config.t_end / config.n_checkpoints
    dt = _fit_dt(interval, _resolve_dt(config, g0))
    per = round(interval / dt)
    state = g0.copy()
    p = reconstruct_primitive(state, check=False)
    E0 = energy_functional(p)
    sup_E = E0
    for _ in range(config.n_checkpoints):
        for _ in range(per):
            state, _mags = step_eps_gpv(
                state,
                dt,
                disable_nonlinear=config.disable_nonlinear,
                projection=config.integrator.constraint_projection,
            )
        E = energy_functional(reconstruct_primitive(state, check=False))
        sup_E = max(sup_E, E)
        rec = DiagnosticsRecord(state.t, E, 0, 0, 0, 0, 0, 0)
        _check_blowup(E0, rec, state.eps)
        collect(state)
    return sup_E, dt


def _advance_limit_checkpointed(config: RunConfig, l0: LimitState):
    """Advance the limit system, returning its states at the checkpoints."""
    interval = config.t_end / config.n_checkpoints
    dt_target = _resolve_dt(config, l0) if config.integrator.dt == "auto" else float(
        config.integrator.dt
    )
    dt = _fit_dt(interval, dt_target)
    per = round(interval / dt)
    state = l0.copy()
    out = []
    for _ in range(config.n_checkpoints):
        for _ in range(per):
            state = step_limit(state, dt, projection=config.integrator.constraint_projection)
        out.append(state.copy())
    return out, dt


# ----------------------------------------------------------------------
# eps sweep (convergence to the limit system)
# ----------------------------------------------------------------------


def _sweep_errors(grid: ChannelGrid, g_state: GPVState, l_state: LimitState) -> dict:
    pair = fast_filter(g_state)
    err_phi = sobolev_norm(grid, g_state.pv - l_state.pv, 1)
    err_psi = sobolev_norm(grid, pair.imbalance_plus - l_state.imbalance_env, 1)
    err_z = profile_sobolev_norm(grid, pair.vmean_plus - l_state.vmean_env, 2)
    p_eps = reconstruct_primitive(g_state, check=False)
    approx = compose_approximation(l_state, g_state.t, g_state.eps)
    err_theta = sobolev_norm(grid, p_eps.theta - approx.theta, 2)
    err_v = sobolev_norm(grid, p_eps.v - approx.v, 2)
    return {
        "err_phi_H1": err_phi,
        "err_psi_H1": err_psi,
        "err_z_H2": err_z,
        "err_theta_H2": err_theta,
        "err_v_H2": err_v,
    }


SWEEP_COLUMNS = [
    "eps",
    "err_phi_H1",
    "err_psi_H1",
    "err_z_H2",
    "err_theta_H2",
    "err_v_H2",
    "sup_E_frak",
]


def run_eps_sweep(config: RunConfig) -> dict:
    """Run the eps-system for every eps and the limit system once, and compare.

    Errors are the convergence-theory metrics: H^1 distance of pv and of the
    filtered imbalance envelope, H^2 distance of the filtered mean-velocity
    envelope, and H^2 distances of the physical fields from the composed
    slow+fast approximant, all at the comparison time t_end (sup over the
    checkpoint lattice is reported alongside).
    """
    eps_values = sorted(config.eps_list(), reverse=True)
    if len(eps_values) < 3:
        raise ConfigError("an eps sweep needs at least 3 eps values")
    times = _checkpoint_times(config)

    # the limit initialization (fast filtering at t = 0) is eps-independent,
    # so one limit trajectory serves every member
    grid0 = config.make_grid()
    p0 = generate_initial(grid0, config.initial_data, eps_values[0])
    l0 = limit_from_gpv(extract_gpv(p0))
    limit_states, dt_limit = _advance_limit_checkpointed(config, l0)

    def member(eps: float) -> dict:
        grid = config.make_grid()
        p_init = generate_initial(grid, config.initial_data, eps)
        g0 = extract_gpv(p_init)
        per_checkpoint = []

        def collect(state):
            l_state = limit_states[len(per_checkpoint)]
            per_checkpoint.append(_sweep_errors(grid, state, l_state))

        sup_E, dt = _advance_gpv_checkpointed(config, g0, collect)
        final = dict(per_checkpoint[-1])
        final["eps"] = eps
        final["sup_E_frak"] = sup_E
        sup_errs = {
            f"sup_{k}": max(row[k] for row in per_checkpoint)
            for k in per_checkpoint[0]
        }
        return {
            "row": final,
            "sup_errors": sup_errs,
            "dt": dt,
            "checkpoints": [
                {"t": t, **row} for t, row in zip(times, per_checkpoint)
            ],
        }

    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            members = list(pool.map(member, eps_values))
    else:
        members = [member(e) for e in eps_values]

    rows = [m["row"] for m in members]
    sup_E_values = [r["sup_E_frak"] for r in rows]
    report = {
        "kind": "eps_sweep",
        "columns": SWEEP_COLUMNS,
        "rows": rows,
        "per_member": {
            f"{e:g}": {"sup_errors": m["sup_errors"], "dt": m["dt"], "checkpoints": m["checkpoints"]}
            for e, m in zip(eps_values, members)
        },
        "uniform_bound_ratio": max(sup_E_values) / min(sup_E_values),
        "dt_limit": dt_limit,
        "metadata": _metadata(config),
    }
    return report


def _metadata(config: RunConfig) -> dict:
    return {
        "grid": dict(config.grid),
        "t_end": config.t_end,
        "dt_policy": config.integrator.dt,
        "eps_resolution": config.integrator.eps_resolution,
        "cfl": config.integrator.cfl,
        "seed": config.initial_data.get("seed"),
        "initial_data": dict(config.initial_data),
        "n_checkpoints": config.n_checkpoints,
    }


# ----------------------------------------------------------------------
# linear validation
# ----------------------------------------------------------------------


def run_linear_validation(config: RunConfig) -> dict:
    """Integrate the linear regime and compare against the closed-form solution.

    With the nonlinear terms disabled the pv and traces are constant and the
    filtered fast variables are constant; the physical fields follow by
    applying the reconstruction to the rotated data.
    """
    grid = config.make_grid()
    eps = config.eps_list()[0]
    p0 = generate_initial(grid, config.initial_data, eps)
    g0 = extract_gpv(p0)
    pair0 = fast_filter(g0)

    cfg = dataclasses.replace(config, disable_nonlinear=True)

    drift = {"phi": 0.0, "theta_bot": 0.0, "theta_top": 0.0, "psi_plus": 0.0, "z_plus": 0.0}
    recon_err = {"v": 0.0, "w": 0.0, "theta": 0.0}
    checkpoints = []

    def collect(state):
        pair = fast_filter(state)
        drift["phi"] = max(drift["phi"], float(np.max(np.abs(state.pv - g0.pv))))
        drift["theta_bot"] = max(
            drift["theta_bot"], float(np.max(np.abs(state.theta_bot - g0.theta_bot)))
        )
        drift["theta_top"] = max(
            drift["theta_top"], float(np.max(np.abs(state.theta_top - g0.theta_top)))
        )
        drift["psi_plus"] = max(
            drift["psi_plus"],
            float(np.max(np.abs(pair.imbalance_plus - pair0.imbalance_plus))),
        )
        drift["z_plus"] = max(
            drift["z_plus"], float(np.max(np.abs(pair.vmean_plus - pair0.vmean_plus)))
        )
        exact = g0.copy()
        exact.imbalance = rotation_phase(g0.imbalance, state.t / eps)
        exact.vmean = rotation_phase(g0.vmean, state.t / eps)
        exact.t = state.t
        p_exact = reconstruct_primitive(exact, check=False)
        p_num = reconstruct_primitive(state, check=False)
        recon_err["v"] = max(recon_err["v"], float(np.max(np.abs(p_num.v - p_exact.v))))
        recon_err["w"] = max(recon_err["w"], float(np.max(np.abs(p_num.w - p_exact.w))))
        recon_err["theta"] = max(
            recon_err["theta"], float(np.max(np.abs(p_num.theta - p_exact.theta)))
        )
        checkpoints.append(
            {"t": state.t, "phi_drift": drift["phi"], "psi_drift": drift["psi_plus"]}
        )

    sup_E, dt = _advance_gpv_checkpointed(cfg, g0, collect)
    return {
        "kind": "linear_validation",
        "eps": eps,
        "dt": dt,
        "drift": drift,
        "reconstruction_error": recon_err,
        "checkpoints": checkpoints,
        "sup_E_frak": sup_E,
        "metadata": _metadata(config),
    }


# ----------------------------------------------------------------------
# well-prepared (classical QG) comparison
# ----------------------------------------------------------------------


def run_wellprepared_comparison(config: RunConfig) -> dict:
    """Balanced-data comparison against classical pv transport.

    The limit run starts (and analytically stays) with zero fast envelopes;
    its envelope norms at the final time check that the limit solver does not
    generate fast waves.  The eps-runs' own fast content, reported separately,
    is the O(eps) imbalance the balanced regime tolerates.
    """
    if config.initial_data.get("kind") != "balanced":
        raise ConfigError("the well-prepared comparison requires balanced initial data")
    eps_values = sorted(config.eps_list(), reverse=True)
    if len(eps_values) < 2:
        raise ConfigError("the well-prepared comparison needs at least 2 eps values")

    grid0 = config.make_grid()
    p0 = generate_initial(grid0, config.initial_data, eps_values[0])
    g0 = extract_gpv(p0)
    l0 = limit_from_gpv(g0)
    l0.imbalance_env[:] = 0.0
    l0.vmean_env[:] = 0.0
    max_phi0 = float(np.max(np.abs(l0.pv)))
    limit_states, dt_limit = _advance_limit_checkpointed(config, l0)
    l_final = limit_states[-1]
    limit_psi_norm = sobolev_norm(grid0, l_final.imbalance_env, 1)
    limit_z_norm = profile_sobolev_norm(grid0, l_final.vmean_env, 2)
    max_phi_drift = abs(float(np.max(np.abs(l_final.pv))) - max_phi0) / max_phi0

    def member(eps: float) -> dict:
        grid = config.make_grid()
        p_init = generate_initial(grid, config.initial_data, eps)
        g_init = extract_gpv(p_init)
        errs = []

        def collect(state):
            errs.append(_sweep_errors(grid, state, limit_states[len(errs)]))

        sup_E, dt = _advance_gpv_checkpointed(config, g_init, collect)
        final_state_errors = errs[-1]
        return {
            "eps": eps,
            "err_phi_H1": final_state_errors["err_phi_H1"],
            "epsrun_psi_H1": final_state_errors["err_psi_H1"],
            "epsrun_z_H2": final_state_errors["err_z_H2"],
            "limit_psi_H1": limit_psi_norm,
            "limit_z_H2": limit_z_norm,
            "sup_E_frak": sup_E,
            "dt": dt,
        }

    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            rows = list(pool.map(member, eps_values))
    else:
        rows = [member(e) for e in eps_values]

    order = None
    if len(rows) >= 3:
        x = np.log([r["eps"] for r in rows])
        y = np.log([max(r["err_phi_H1"], 1e-300) for r in rows])
        order = float(np.polyfit(x, y, 1)[0])
    return {
        "kind": "wellprepared_comparison",
        "columns": [
            "eps", "err_phi_H1", "epsrun_psi_H1", "epsrun_z_H2",
            "limit_psi_H1", "limit_z_H2", "sup_E_frak",
        ],
        "rows": rows,
        "phi_error_order": order,
        "limit_max_phi_drift": max_phi_drift,
        "dt_limit": dt_limit,
        "metadata": _metadata(config),
    }


# ----------------------------------------------------------------------
# dual-solver cross-validation
# ----------------------------------------------------------------------


def run_cross_validation(config: RunConfig) -> dict:
    """Advance the GPV and primitive formulations from identical data.

    Returns the H^1 norm of the difference of (v, w, theta) at t_end: two
    independent discretizations of one flow.
    """
    grid = config.make_grid()
    eps = config.eps_list()[0]
    p0 = generate_initial(grid, config.initial_data, eps)
    g0 = extract_gpv(p0)

    dt = _fit_dt(config.t_end, _resolve_dt(config, g0))
    n = round(config.t_end / dt)

    g_state = g0
    for _ in range(n):
        g_state, _ = step_eps_gpv(
            g_state, dt, disable_nonlinear=config.disable_nonlinear,
            projection=config.integrator.constraint_projection,
        )
    p_gpv = reconstruct_primitive(g_state, check=False)

    p_state = p0.copy()
    for _ in range(n):
        p_state = step_eps_primitive(p_state, dt, disable_nonlinear=config.disable_nonlinear)

    diff_h1 = sobolev_norm(
        grid,
        [p_gpv.v - p_state.v, p_gpv.w - p_state.w, p_gpv.theta - p_state.theta],
        1,
    )
    return {
        "kind": "cross_validation",
        "eps": eps,
        "dt": dt,
        "n_steps": n,
        "h1_difference": diff_h1,
        "l2_energy_gpv": l2_energy(p_gpv),
        "l2_energy_primitive": l2_energy(p_state),
        "metadata": _metadata(config),
    }
