"""Sobolev norms, inner products, and the run-controlling energy functional.

All volume integrals combine the exact horizontal trapezoidal rule (uniform
periodic nodes) with Clenshaw-Curtis weights on the Gauss-Lobatto column.
Channel norms use integer derivative orders only; norms of boundary fields on
T^2 are computed spectrally and accept fractional orders.
"""

from __future__ import annotations

import numpy as np

from .grid import ChannelGrid
from .states import PrimitiveState

__all__ = [
    "inner_l2",
    "norm_l2",
    "norm_l2_sq",
    "sobolev_norm",
    "boundary_sobolev_norm",
    "profile_sobolev_norm",
    "energy_functional",
    "l2_energy",
]


def _component_list(fields):
    """Flatten a field or list of fields into scalar components."""
    if isinstance(fields, np.ndarray):
        fields = [fields]
    comps = []
    for f in fields:
        arr = np.asarray(f)
        if arr.ndim == 4:
            comps.extend([arr[0], arr[1]])
        else:
            comps.append(arr)
    return comps


def norm_l2_sq(grid: ChannelGrid, f) -> float:
    total = 0.0
    for comp in _component_list(f):
        total += float(np.real(grid.volume_integral(np.abs(comp) ** 2)))
    return total


def norm_l2(grid: ChannelGrid, f) -> float:
    return float(np.sqrt(norm_l2_sq(grid, f)))


def inner_l2(grid: ChannelGrid, f, g) -> float:
    fc = _component_list(f)
    gc = _component_list(g)
    total = 0.0
    for a, b in zip(fc, gc):
        total += float(np.real(grid.volume_integral(a * np.conj(b))))
    return total


def _dz_power(grid: ChannelGrid, order: int) -> np.ndarray:
    return (np.eye(grid.nz + 1), grid.Dz, grid.Dz2, grid.Dz3)[order]


def sobolev_norm(grid: ChannelGrid, fields, s: int) -> float:
    """H^s norm over the channel: all multi-index derivatives |alpha| <= s.

    Horizontal derivatives are exact Fourier multipliers, vertical ones
    Chebyshev collocation; supports complex fields (norm of the pair of real
    and imaginary parts).
    """
    if s not in (0, 1, 2, 3):
        raise ValueError(f"s must be in 0..3, got {s}")
    total = 0.0
    for comp in _component_list(fields):
        fh = grid.fft2(comp)
        for ax in range(s + 1):
            for ay in range(s + 1 - ax):
                mult = (grid._imx**ax)[:, None] * (grid._imy**ay)[None, :]
                gxy = np.fft.ifft2(fh * mult[:, :, None], axes=(0, 1))
                if np.isrealobj(comp):
                    gxy = gxy.real
                for az in range(s + 1 - ax - ay):
                    d = np.matmul(gxy, _dz_power(grid, az).T)
                    total += float(np.real(grid.volume_integral(np.abs(d) ** 2)))
    return float(np.sqrt(total))


def boundary_sobolev_norm(grid: ChannelGrid, fields, s: float) -> float:
    """H^s norm on T^2 via the multiplier (1 + |2 pi k|^2)^(s/2); s may be fractional."""
    if isinstance(fields, np.ndarray):
        fields = [fields]
    total = 0.0
    weight = (1.0 + grid.k2h) ** s
    for f in fields:
        grid.check_boundary(f, "boundary norm operand")
        fh = grid.fft2(f) / (grid.nx * grid.ny)
        total += float(np.sum(weight * np.abs(fh) ** 2))
    return float(np.sqrt(total))


def profile_sobolev_norm(grid: ChannelGrid, prof, s: int) -> float:
    """H^s norm of a vertical profile (or (2, nz+1) pair) on (0, h)."""
    if s not in (0, 1, 2, 3):
        raise ValueError(f"s must be in 0..3, got {s}")
    arr = np.atleast_2d(np.asarray(prof))
    total = 0.0
    for row in arr:
        for a in range(s + 1):
            d = _dz_power(grid, a) @ row
            total += float(np.real(grid.wz @ (np.abs(d) ** 2)))
    return float(np.sqrt(total))


def l2_energy(p: PrimitiveState) -> float:
    """Conserved quadratic energy ||v, w, theta||^2_{L^2} of the fast system."""
    return norm_l2_sq(p.grid, [p.v, p.w, p.theta])


def energy_functional(p: PrimitiveState) -> float:
    """Total energy functional controlling the uniform-in-eps H^3 bound.

    Sum of the squared H^2 norms of (pv, imbalance) and the squared L^2 norms
    of all pure horizontal derivatives of (v, w, theta) up to order three (the
    underived term counted once).  Equivalent, with state-independent
    constants, to ||v, w, theta||^2_{H^3}; quadratic under state scaling.
    """
    from .transform import extract_gpv

    g = p.grid
    gpv = extract_gpv(p, check=False)
    total = sobolev_norm(g, gpv.pv, 2) ** 2 + sobolev_norm(g, gpv.imbalance, 2) ** 2
    mult_x = g._imx[:, None] * np.ones(g.ny)[None, :]
    mult_y = np.ones(g.nx)[:, None] * g._imy[None, :]
    for comp in _component_list([p.v, p.w, p.theta]):
        fh = g.fft2(comp)
        total += float(np.real(g.volume_integral(np.abs(comp) ** 2)))
        for mult in (mult_x, mult_y):
            for alpha in (1, 2, 3):
                d = np.fft.ifft2(fh * (mult**alpha)[:, :, None], axes=(0, 1))
                total += float(np.real(g.volume_integral(np.abs(d) ** 2)))
    return float(total)
