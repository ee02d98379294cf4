"""Initial-data generators.

All generators produce band-limited fields that are dealias-safe and sample
the same continuous functions on any sufficiently fine grid, so runs at
different resolutions can share initial data.  Randomness is drawn in a fixed
mode order from a seeded generator: identical seeds give identical states
bit-for-bit on a fixed grid.

Solenoidal velocities with an impermeable vertical component are built from
two potentials, v = grad_h^perp a + grad_h d_z b and w = -laplace_h b, with
b vanishing on the lids.
"""

from __future__ import annotations

import numpy as np

from .grid import ChannelGrid
from .states import PrimitiveState

__all__ = ["generate_initial", "random_state", "balanced_state", "single_mode_state"]


class InitialDataError(ValueError):
    pass


def _mode_list(bandwidth: int):
    modes = [
        (k1, k2)
        for k1 in range(-bandwidth, bandwidth + 1)
        for k2 in range(-bandwidth, bandwidth + 1)
        if (k1, k2) != (0, 0)
    ]
    modes.sort()
    return modes


def _check_bandwidth(grid: ChannelGrid, bandwidth: int):
    limit = min(grid.nx, grid.ny) / 3.0
    if bandwidth > limit:
        raise InitialDataError(
            f"bandwidth {bandwidth} exceeds the dealias limit {limit:.1f} "
            f"of grid {grid.nx}x{grid.ny}"
        )


def _phases(grid: ChannelGrid, k1: int, k2: int):
    xg, yg = np.meshgrid(grid.x, grid.y, indexing="ij")
    return np.exp(2j * np.pi * (k1 * xg + k2 * yg))


def random_state(
    grid: ChannelGrid,
    eps: float,
    seed: int = 0,
    bandwidth: int = 3,
    amplitude: float = 0.05,
    vertical_modes: int = 2,
) -> PrimitiveState:
    """Band-limited random unbalanced data (nonzero fast-wave content).

    Coefficients decay smoothly with horizontal and vertical mode number and
    are compensated for the derivative factors the potentials pick up, so
    ``amplitude`` sets the size of the physical fields themselves.
    """
    _check_bandwidth(grid, bandwidth)
    rng = np.random.default_rng(seed)
    a = np.zeros(grid.shape)
    b = np.zeros(grid.shape)
    theta = np.zeros(grid.shape)
    h = grid.h
    modes = _mode_list(bandwidth)
    k0sq = max(1.0, bandwidth / 2.0) ** 2
    total_weight = sum(
        np.exp(-0.5 * (k1 * k1 + k2 * k2) / k0sq - 0.5 * (m - 1) ** 2)
        for k1, k2 in modes
        for m in range(1, vertical_modes + 1)
    )
    for k1, k2 in modes:
        phase = _phases(grid, k1, k2)
        kmag = 2.0 * np.pi * np.hypot(k1, k2)
        decay_h = np.exp(-0.5 * (k1 * k1 + k2 * k2) / k0sq)
        for m in range(1, vertical_modes + 1):
            ca, cb, ct = (complex(*rng.standard_normal(2)) for _ in range(3))
            wgt = amplitude * decay_h * np.exp(-0.5 * (m - 1) ** 2) / total_weight
            cosm = np.cos((m - 1) * np.pi * grid.z / h)
            sinm = np.sin(m * np.pi * grid.z / h)
            # potentials carry 1/kmag factors so the velocities are O(wgt)
            a += (wgt / kmag) * np.real(ca * phase)[:, :, None] * cosm[None, None, :]
            b += (wgt / kmag**2) * np.real(cb * phase)[:, :, None] * sinm[None, None, :]
            theta += wgt * np.real(ct * phase)[:, :, None] * cosm[None, None, :]
    vmean = np.zeros((2, grid.nz + 1))
    for m in range(vertical_modes):
        c = rng.standard_normal(2)
        vmean += (
            amplitude
            * np.exp(-0.5 * m * m)
            / vertical_modes
            * np.outer(c, np.cos(m * np.pi * grid.z / h))
        )
    v = grid.grad_h_perp(a) + grid.grad_h(grid.ddz(b))
    v += vmean[:, None, None, :]
    w = -grid.laplace_h(b)
    return PrimitiveState(grid, v, w, theta, t=0.0, eps=eps)


def balanced_state(
    grid: ChannelGrid,
    eps: float,
    seed: int = 0,
    bandwidth: int = 2,
    amplitude: float = 0.05,
    vertical_modes: int = 2,
    modes: list | None = None,
) -> PrimitiveState:
    """Geostrophically balanced (well-prepared) data from a stream function.

    v = grad_h^perp p0, theta = d_z p0, w = 0: the extracted imbalance and
    mean-velocity profile vanish identically, so no fast waves are excited.
    Pass ``modes`` as a list of {"k": [k1, k2], "m": m, "amplitude": A,
    "phase": p, "profile": "sin"|"cos"} entries for an explicit stream
    function; otherwise a seeded random one is drawn.  Vertical "sin"
    profiles give the stream function nonzero boundary derivatives, i.e.
    temperature traces that really move.
    """
    h = grid.h
    p0 = np.zeros(grid.shape)
    if modes is not None:
        for entry in modes:
            k1, k2 = (int(c) for c in entry["k"])
            _check_bandwidth(grid, max(abs(k1), abs(k2)))
            m = int(entry.get("m", 1))
            amp = float(entry.get("amplitude", amplitude))
            phs = float(entry.get("phase", 0.0))
            prof_kind = entry.get("profile", "sin")
            xg, yg = np.meshgrid(grid.x, grid.y, indexing="ij")
            horiz = np.cos(2 * np.pi * (k1 * xg + k2 * yg) + phs)
            prof = np.sin(m * np.pi * grid.z / h) if prof_kind == "sin" else np.cos(
                m * np.pi * grid.z / h
            )
            p0 += amp * horiz[:, :, None] * prof[None, None, :]
    else:
        _check_bandwidth(grid, bandwidth)
        rng = np.random.default_rng(seed)
        modes_kk = _mode_list(bandwidth)
        k0sq = max(1.0, bandwidth / 2.0) ** 2
        total_weight = sum(
            np.exp(-0.5 * (k1 * k1 + k2 * k2) / k0sq - 0.5 * (m - 1) ** 2)
            for k1, k2 in modes_kk
            for m in range(1, vertical_modes + 1)
        )
        for k1, k2 in modes_kk:
            phase = _phases(grid, k1, k2)
            kmag = 2.0 * np.pi * np.hypot(k1, k2)
            decay_h = np.exp(-0.5 * (k1 * k1 + k2 * k2) / k0sq)
            for m in range(1, vertical_modes + 1):
                cs, cc = (complex(*rng.standard_normal(2)) for _ in range(2))
                wgt = amplitude * decay_h * np.exp(-0.5 * (m - 1) ** 2) / total_weight / kmag
                p0 += wgt * np.real(cs * phase)[:, :, None] * np.sin(
                    m * np.pi * grid.z / h
                )[None, None, :]
                p0 += wgt * np.real(cc * phase)[:, :, None] * np.cos(
                    m * np.pi * grid.z / h
                )[None, None, :]
    v = grid.grad_h_perp(p0)
    theta = grid.ddz(p0)  # discrete d_z keeps the extracted imbalance exactly zero
    return PrimitiveState(grid, v, np.zeros(grid.shape), theta, t=0.0, eps=eps)


def single_mode_state(
    grid: ChannelGrid, eps: float, k=(1, 0), m: int = 1, amplitude: float = 0.05
) -> PrimitiveState:
    """One horizontal mode, one vertical mode, with fast-wave content."""
    k1, k2 = (int(c) for c in k)
    if (k1, k2) == (0, 0):
        raise InitialDataError("single_mode requires a nonzero horizontal mode")
    _check_bandwidth(grid, max(abs(k1), abs(k2)))
    h = grid.h
    xg, yg = np.meshgrid(grid.x, grid.y, indexing="ij")
    carg = 2 * np.pi * (k1 * xg + k2 * yg)
    kmag = 2 * np.pi * np.hypot(k1, k2)
    a = (amplitude / kmag) * np.cos(carg)[:, :, None] * np.cos(
        m * np.pi * grid.z / h
    )[None, None, :]
    b = (amplitude / kmag**2) * np.sin(carg)[:, :, None] * np.sin(
        m * np.pi * grid.z / h
    )[None, None, :]
    theta = amplitude * np.cos(carg)[:, :, None] * np.cos(m * np.pi * grid.z / h)[None, None, :]
    v = grid.grad_h_perp(a) + grid.grad_h(grid.ddz(b))
    w = -grid.laplace_h(b)
    return PrimitiveState(grid, v, w, theta, t=0.0, eps=eps)


def generate_initial(grid: ChannelGrid, spec: dict, eps: float) -> PrimitiveState:
    """Dispatch on the initial-data kind given in a run configuration."""
    kind = spec.get("kind", "random_seeded")
    if kind == "random_seeded":
        return random_state(
            grid,
            eps,
            seed=int(spec.get("seed", 0)),
            bandwidth=int(spec.get("bandwidth", 3)),
            amplitude=float(spec.get("amplitude", 0.05)),
            vertical_modes=int(spec.get("vertical_modes", 2)),
        )
    if kind == "balanced":
        return balanced_state(
            grid,
            eps,
            seed=int(spec.get("seed", 0)),
            bandwidth=int(spec.get("bandwidth", 2)),
            amplitude=float(spec.get("amplitude", 0.05)),
            vertical_modes=int(spec.get("vertical_modes", 2)),
            modes=spec.get("p0_modes"),
        )
    if kind == "single_mode":
        return single_mode_state(
            grid,
            eps,
            k=spec.get("k", (1, 0)),
            m=int(spec.get("m", 1)),
            amplitude=float(spec.get("amplitude", 0.05)),
        )
    if kind == "from_snapshot":
        from .snapshot import read_snapshot

        state = read_snapshot(spec["path"])
        if not isinstance(state, PrimitiveState):
            raise InitialDataError("snapshot does not hold a primitive state")
        if state.grid != grid:
            raise InitialDataError(
                f"snapshot grid {state.grid} does not match run grid {grid}"
            )
        state.eps = eps
        return state
    raise InitialDataError(f"unknown initial-data kind {kind!r}")
