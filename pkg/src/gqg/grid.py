"""Spectral calculus on the periodic channel T^2 x (0, h).

Horizontal directions are uniform and periodic (Fourier), the vertical
direction uses Chebyshev-Gauss-Lobatto collocation on [0, h].  The grid object
owns the wavenumber arrays, the vertical differentiation matrix, the
Clenshaw-Curtis quadrature weights, and a cache of LU-factored per-mode
Helmholtz operators, so every operator here is deterministic and cheap to
re-apply.

Field layout conventions (plain numpy arrays):

    scalar field     (nx, ny, nz+1)     values at (x_i, y_j, z_k)
    h-vector field   (2, nx, ny, nz+1)  component axis first
    boundary field   (nx, ny)           values on T^2
    vertical profile (nz+1,)            function of z only

Horizontal wavenumbers are integers k with phases exp(2*pi*i*k.x); physical
derivatives therefore carry 2*pi factors.  The boundary lift decays like
exp(-|k| z) with |k| the integer wavenumber magnitude.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.linalg import lu_factor, lu_solve

__all__ = ["ChannelGrid", "DimensionMismatchError", "apply_diff"]

TWO_PI = 2.0 * np.pi


class DimensionMismatchError(ValueError):
    """An operand's shape does not match the grid it claims to live on."""

    def __init__(self, operand: str, expected, got):
        super().__init__(f"{operand}: expected shape {expected}, got {got}")
        self.operand = operand
        self.expected = expected
        self.got = got


def _cheb_diff_matrix(z: np.ndarray) -> np.ndarray:
    """Collocation differentiation matrix for ascending Gauss-Lobatto nodes."""
    n = len(z) - 1
    c = np.ones(n + 1)
    c[0] = 2.0
    c[-1] = 2.0
    c *= (-1.0) ** np.arange(n + 1)
    dz = z[:, None] - z[None, :]
    np.fill_diagonal(dz, 1.0)
    d = (c[:, None] / c[None, :]) / dz
    np.fill_diagonal(d, 0.0)
    # negative-sum trick keeps rows exact on constants
    np.fill_diagonal(d, -d.sum(axis=1))
    return d


def _clenshaw_curtis_weights(n: int) -> np.ndarray:
    """Quadrature weights on [-1, 1] for the n+1 Gauss-Lobatto nodes."""
    if n == 0:
        raise ValueError("need at least two vertical nodes")
    if n == 1:
        return np.array([1.0, 1.0])
    theta = np.pi * np.arange(n + 1) / n
    w = np.zeros(n + 1)
    v = np.ones(n - 1)
    if n % 2 == 0:
        w[0] = w[n] = 1.0 / (n**2 - 1)
        for k in range(1, n // 2):
            v -= 2.0 * np.cos(2 * k * theta[1:-1]) / (4 * k * k - 1)
        v -= np.cos(n * theta[1:-1]) / (n**2 - 1)
    else:
        w[0] = w[n] = 1.0 / n**2
        for k in range(1, (n - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[1:-1]) / (4 * k * k - 1)
    w[1:-1] = 2.0 * v / n
    return w


def _plateau(s: np.ndarray) -> np.ndarray:
    """Smooth monotone step S(s): 0 for s<=0, 1 for s>=1, C^inf in between."""
    s = np.asarray(s, dtype=float)

    def bump(t):
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = np.exp(-1.0 / t[pos])
        return out

    num = bump(s)
    den = num + bump(1.0 - s)
    # den vanishes nowhere: at least one of s, 1-s is positive
    return num / den


class ChannelGrid:
    """Discretization of the periodic channel T^2 x (0, h).

    Parameters
    ----------
    nx, ny : positive even ints, horizontal nodes per direction on (0,1)^2.
    nz : positive int, vertical polynomial degree (nz+1 Gauss-Lobatto nodes).
    h : channel height.
    dealias : apply the 2/3-rule truncation to horizontal products.
    """

    def __init__(self, nx: int, ny: int, nz: int, h: float = 1.0, dealias: bool = True):
        if nx <= 0 or nx % 2 or ny <= 0 or ny % 2:
            raise ValueError(f"nx, ny must be positive even integers, got {nx}, {ny}")
        if nz < 2:
            raise ValueError(f"nz must be >= 2, got {nz}")
        if h <= 0:
            raise ValueError(f"h must be positive, got {h}")
        self.nx = int(nx)
        self.ny = int(ny)
        self.nz = int(nz)
        self.h = float(h)
        self.dealias = bool(dealias)

        self.x = np.arange(self.nx) / self.nx
        self.y = np.arange(self.ny) / self.ny
        j = np.arange(self.nz + 1)
        z = 0.5 * self.h * (1.0 - np.cos(np.pi * j / self.nz))
        z[0] = 0.0
        z[-1] = self.h
        self.z = z

        # integer wavenumbers in FFT order
        self.kx = np.fft.fftfreq(self.nx, d=1.0 / self.nx)
        self.ky = np.fft.fftfreq(self.ny, d=1.0 / self.ny)
        kxg, kyg = np.meshgrid(self.kx, self.ky, indexing="ij")
        self.m2 = np.rint(kxg**2 + kyg**2).astype(np.int64)
        self.k2h = (TWO_PI**2) * (kxg**2 + kyg**2)

        # first-derivative multipliers; the Nyquist mode of an odd-order
        # derivative is ambiguous in sign and is set to zero
        self._imx = 1j * TWO_PI * self.kx
        self._imx[self.nx // 2] = 0.0
        self._imy = 1j * TWO_PI * self.ky
        self._imy[self.ny // 2] = 0.0

        self.Dz = _cheb_diff_matrix(self.z)
        self.Dz2 = self.Dz @ self.Dz
        self.Dz3 = self.Dz2 @ self.Dz
        self.wz = _clenshaw_curtis_weights(self.nz) * (self.h / 2.0)

        self.dealias_mask = ~((np.abs(kxg) > self.nx / 3.0) | (np.abs(kyg) > self.ny / 3.0))

        # boundary-lift kernels: exp(-|k| z) * chi0 and its mirror
        absk = np.sqrt(kxg**2 + kyg**2)
        chi0 = _plateau((0.75 * self.h - self.z) / (0.5 * self.h))
        chi0[self.z <= 0.25 * self.h] = 1.0
        chi0[self.z >= 0.75 * self.h] = 0.0
        self.chi0 = chi0
        self._lift_bot = np.exp(-absk[:, :, None] * self.z[None, None, :]) * chi0[None, None, :]
        self._lift_top = np.exp(-absk[:, :, None] * (self.h - self.z)[None, None, :]) * (
            1.0 - chi0[None, None, :]
        )

        # per-|k|^2 mode groups for the 1D vertical solves
        uniq, inv = np.unique(self.m2.ravel(), return_inverse=True)
        order = np.argsort(inv, kind="stable")
        bounds = np.searchsorted(inv[order], np.arange(len(uniq) + 1))
        self._mode_groups = [
            (int(uniq[i]), order[bounds[i] : bounds[i + 1]]) for i in range(len(uniq))
        ]
        self._lu_cache: dict = {}
        self.last_neumann_defect = 0.0

    # ------------------------------------------------------------------
    # shape checks and transforms
    # ------------------------------------------------------------------

    @property
    def shape(self):
        return (self.nx, self.ny, self.nz + 1)

    def check_scalar(self, f, name="field"):
        if np.shape(f) != self.shape:
            raise DimensionMismatchError(name, self.shape, np.shape(f))

    def check_hvector(self, f, name="field"):
        if np.shape(f) != (2,) + self.shape:
            raise DimensionMismatchError(name, (2,) + self.shape, np.shape(f))

    def check_boundary(self, f, name="field"):
        if np.shape(f) != (self.nx, self.ny):
            raise DimensionMismatchError(name, (self.nx, self.ny), np.shape(f))

    @staticmethod
    def _haxes(f):
        """Horizontal axes: (1, 2) for component-first h-vectors, else (0, 1)."""
        return (1, 2) if np.ndim(f) == 4 else (0, 1)

    def fft2(self, f):
        """Horizontal FFT along the x, y axes."""
        return np.fft.fft2(f, axes=self._haxes(f))

    def ifft2(self, fh, real: bool = True):
        out = np.fft.ifft2(fh, axes=self._haxes(fh))
        return out.real if real else out

    def _hmul(self, f, mult):
        """Apply a horizontal Fourier multiplier (shape (nx, ny))."""
        ax = self._haxes(f)
        fh = self.fft2(f)
        shape = [1] * f.ndim
        shape[ax[0]], shape[ax[1]] = self.nx, self.ny
        fh *= mult.reshape(shape)
        return self.ifft2(fh, real=np.isrealobj(f))

    # ------------------------------------------------------------------
    # differential operators
    # ------------------------------------------------------------------

    def ddx(self, f):
        return self._hmul(f, self._imx[:, None] * np.ones_like(self._imy)[None, :])

    def ddy(self, f):
        return self._hmul(f, np.ones_like(self._imx)[:, None] * self._imy[None, :])

    def dd_both(self, f):
        """(d_x f, d_y f) sharing one forward transform."""
        ax = self._haxes(f)
        fh = self.fft2(f)
        sx = [1] * f.ndim
        sx[ax[0]] = self.nx
        sy = [1] * f.ndim
        sy[ax[1]] = self.ny
        gx = np.fft.ifft2(fh * self._imx.reshape(sx), axes=ax)
        gy = np.fft.ifft2(fh * self._imy.reshape(sy), axes=ax)
        if np.isrealobj(f):
            return gx.real, gy.real
        return gx, gy

    def ddz(self, f):
        """Chebyshev collocation d/dz along the last axis."""
        if f.shape[-1] != self.nz + 1:
            raise DimensionMismatchError("ddz operand", self.nz + 1, f.shape[-1])
        return np.matmul(f, self.Dz.T)

    def ddzz(self, f):
        return np.matmul(f, self.Dz2.T)

    def grad_h(self, f):
        gx, gy = self.dd_both(f)
        return np.stack([gx, gy])

    def grad_h_perp(self, f):
        """perp(grad_h f) = (-d_y f, d_x f)."""
        gx, gy = self.dd_both(f)
        return np.stack([-gy, gx])

    def _component_mults(self, comp_ndim: int):
        mx = self._imx.reshape((self.nx,) + (1,) * (comp_ndim - 1))
        my = self._imy.reshape((1, self.ny) + (1,) * (comp_ndim - 2))
        return mx, my

    def div_h(self, x):
        fh = np.fft.fft2(x, axes=(1, 2))
        mx, my = self._component_mults(fh[0].ndim)
        out = np.fft.ifft2(fh[0] * mx + fh[1] * my, axes=(0, 1))
        return out.real if np.isrealobj(x) else out

    def curl_h(self, x):
        fh = np.fft.fft2(x, axes=(1, 2))
        mx, my = self._component_mults(fh[0].ndim)
        out = np.fft.ifft2(fh[1] * mx - fh[0] * my, axes=(0, 1))
        return out.real if np.isrealobj(x) else out

    @staticmethod
    def perp(x):
        """Planar rotation (X1, X2) -> (-X2, X1)."""
        return np.stack([-x[1], x[0]])

    def laplace_h(self, f):
        return self._hmul(f, -self.k2h)

    def laplace3(self, f):
        return self.laplace_h(f) + self.ddzz(f)

    # ------------------------------------------------------------------
    # means, dealiasing
    # ------------------------------------------------------------------

    def horizontal_mean(self, f):
        """k=0 Fourier mode per height (the T^2 area is 1, so mean = integral).

        Boundary fields reduce to a number, scalar fields to a profile,
        h-vector fields to a (2, nz+1) profile pair.
        """
        f = np.asarray(f)
        axes = (1, 2) if f.ndim == 4 else (0, 1)
        return f.mean(axis=axes)

    def vertical_integral(self, prof):
        """Clenshaw-Curtis integral over (0, h) along the last axis."""
        return np.tensordot(prof, self.wz, axes=([-1], [0]))

    def volume_integral(self, f):
        return self.vertical_integral(self.horizontal_mean(f))

    def dealias_modes(self, f):
        """Zero horizontal modes with |k_i| > N_i/3 (idempotent)."""
        return self._hmul(f, self.dealias_mask.astype(float))

    def dealias_product(self, f):
        """2/3-rule truncation of a freshly formed product, if enabled."""
        return self.dealias_modes(f) if self.dealias else f

    # ------------------------------------------------------------------
    # inverse operators
    # ------------------------------------------------------------------

    def inv_laplace_h(self, g):
        """Horizontal inverse Laplacian with the zero-mean convention.

        Per mode k != 0 divides by -|2 pi k|^2; the k = 0 mode of the output
        vanishes, so inv_laplace_h(laplace_h(a)) = a - horizontal_mean(a).
        Accepts scalar (3D) or boundary (2D) fields.
        """
        mult = np.zeros_like(self.k2h)
        nonzero = self.k2h > 0
        mult[nonzero] = -1.0 / self.k2h[nonzero]
        return self._hmul(g, mult)

    def _helmholtz_matrix(self, k2: float, bc_kind: str) -> np.ndarray:
        a = self.Dz2 - k2 * np.eye(self.nz + 1)
        if bc_kind == "dirichlet":
            a[0, :] = 0.0
            a[0, 0] = 1.0
            a[-1, :] = 0.0
            a[-1, -1] = 1.0
        elif bc_kind == "neumann":
            a[0, :] = self.Dz[0, :]
            a[-1, :] = self.Dz[-1, :]
        else:
            raise ValueError(f"unknown boundary kind {bc_kind!r}")
        return a

    def _helmholtz_lu(self, m2: int, bc_kind: str):
        key = (bc_kind, m2)
        if key not in self._lu_cache:
            k2 = TWO_PI**2 * float(m2)
            self._lu_cache[key] = lu_factor(self._helmholtz_matrix(k2, bc_kind))
        return self._lu_cache[key]

    def helmholtz_solve_1d(self, k2: float, rhs, bc=("dirichlet", 0.0, 0.0)):
        """Solve (d_zz - k2) f = rhs on (0, h) with the given boundary data.

        ``bc`` is ("dirichlet"|"neumann", value at z=0, value at z=h).  The
        Neumann problem at k2 = 0 is singular: the solvability defect
        integral(rhs) - (b - a) is projected out (and kept in
        ``last_neumann_defect``) and the solution is normalized to zero
        vertical mean.
        """
        rhs = np.asarray(rhs)
        if not np.all(np.isfinite(rhs)):
            raise ValueError("helmholtz_solve_1d: non-finite right-hand side")
        if rhs.shape != (self.nz + 1,):
            raise DimensionMismatchError("helmholtz rhs", (self.nz + 1,), rhs.shape)
        kind, a, b = bc
        rhs = rhs.astype(complex)
        if kind == "neumann" and k2 == 0.0:
            defect = self.wz @ rhs - (b - a)
            self.last_neumann_defect = float(abs(defect))
            if abs(defect) > 1e-8:
                warnings.warn(
                    f"Neumann solvability defect {abs(defect):.3e} projected out",
                    RuntimeWarning,
                    stacklevel=2,
                )
            rhs = rhs - defect / self.h
            sys = self._helmholtz_matrix(0.0, "neumann")
            b_vec = rhs.copy()
            b_vec[0] = a
            b_vec[-1] = b
            f, *_ = np.linalg.lstsq(sys, b_vec, rcond=None)
            f -= (self.wz @ f) / self.h
            return f
        sys = self._helmholtz_matrix(float(k2), kind)
        b_vec = rhs.copy()
        b_vec[0] = a
        b_vec[-1] = b
        return np.linalg.solve(sys, b_vec)

    def _solve_modes(self, rhs_spec, bc_kind: str, bc_bot=None, bc_top=None):
        """Per-horizontal-mode vertical Helmholtz solves, grouped by |k|^2.

        rhs_spec : (nx, ny, nz+1) complex spectral right-hand side.
        bc_bot, bc_top : (nx, ny) spectral boundary data (None means zero).
        """
        nzp = self.nz + 1
        b = rhs_spec.astype(complex).copy()
        b[:, :, 0] = 0.0 if bc_bot is None else bc_bot
        b[:, :, -1] = 0.0 if bc_top is None else bc_top
        flat = b.reshape(-1, nzp)
        out = np.empty_like(flat)
        for m2, idx in self._mode_groups:
            if bc_kind == "neumann" and m2 == 0:
                row = flat[idx[0]]
                out[idx[0]] = self.helmholtz_solve_1d(
                    0.0, rhs_spec.reshape(-1, nzp)[idx[0]], ("neumann", row[0], row[-1])
                )
                continue
            lu = self._helmholtz_lu(m2, bc_kind)
            out[idx] = lu_solve(lu, flat[idx].T, check_finite=False).T
        return out.reshape(rhs_spec.shape)

    def inv_laplace_dirichlet(self, g):
        """Invert the 3D Laplacian with homogeneous Dirichlet data at z = 0, h.

        laplace3(inv_laplace_dirichlet(g)) = g to solver accuracy, and the
        output vanishes exactly at the boundary nodes.  The reverse
        composition is the identity only on fields with zero traces.
        """
        self.check_scalar(g, "inv_laplace_dirichlet operand")
        if not np.all(np.isfinite(g)):
            raise ValueError("inv_laplace_dirichlet: non-finite input")
        gh = self.fft2(g)
        fh = self._solve_modes(gh, "dirichlet")
        return self.ifft2(fh, real=np.isrealobj(g))

    def solve_neumann_poisson(self, rhs, bc_bot, bc_top):
        """Invert the 3D Laplacian with Neumann data d_z f = bc at z = 0, h.

        The k = 0 mode is gauge-fixed to zero vertical mean; its solvability
        defect is projected out and reported via ``last_neumann_defect``.
        """
        self.check_scalar(rhs, "neumann rhs")
        self.check_boundary(bc_bot, "neumann bottom data")
        self.check_boundary(bc_top, "neumann top data")
        rh = self.fft2(rhs)
        fh = self._solve_modes(rh, "neumann", self.fft2(bc_bot), self.fft2(bc_top))
        return self.ifft2(fh, real=np.isrealobj(rhs))

    # ------------------------------------------------------------------
    # boundary lift
    # ------------------------------------------------------------------

    def extend_boundary(self, bot, top):
        """Lift boundary data (bot at z=0, top at z=h) into the channel.

        Linear in (bot, top); traces are exact at the boundary nodes.  Each
        horizontal mode decays like exp(-|k| dist) away from its boundary and
        is localized there by a smooth plateau cutoff.
        """
        self.check_boundary(bot, "extend_boundary bottom")
        self.check_boundary(top, "extend_boundary top")
        bh = self.fft2(bot)
        th = self.fft2(top)
        out = bh[:, :, None] * self._lift_bot + th[:, :, None] * self._lift_top
        real = np.isrealobj(bot) and np.isrealobj(top)
        return self.ifft2(out, real=real)

    # ------------------------------------------------------------------
    # misc
    # ------------------------------------------------------------------

    def min_dz(self) -> float:
        return float(np.min(np.diff(self.z)))

    def descriptor(self) -> dict:
        return {"nx": self.nx, "ny": self.ny, "nz": self.nz, "h": self.h, "dealias": self.dealias}

    @classmethod
    def from_descriptor(cls, d: dict) -> "ChannelGrid":
        return cls(d["nx"], d["ny"], d["nz"], d.get("h", 1.0), d.get("dealias", True))

    def __eq__(self, other):
        return isinstance(other, ChannelGrid) and self.descriptor() == other.descriptor()

    def __repr__(self):
        return f"ChannelGrid(nx={self.nx}, ny={self.ny}, nz={self.nz}, h={self.h})"


_DIFF_KINDS = {
    "ddx": ("scalar", lambda g, f: g.ddx(f)),
    "ddy": ("scalar", lambda g, f: g.ddy(f)),
    "ddz": ("scalar", lambda g, f: g.ddz(f)),
    "grad_h": ("scalar", lambda g, f: g.grad_h(f)),
    "laplace_h": ("scalar", lambda g, f: g.laplace_h(f)),
    "laplace3": ("scalar", lambda g, f: g.laplace3(f)),
    "div_h": ("hvector", lambda g, f: g.div_h(f)),
    "curl_h": ("hvector", lambda g, f: g.curl_h(f)),
    "perp": ("hvector", lambda g, f: g.perp(f)),
}


def apply_diff(grid: ChannelGrid, kind: str, f):
    """Dispatch a named differential operator, checking the operand arity."""
    if kind not in _DIFF_KINDS:
        raise ValueError(f"unknown operator kind {kind!r}")
    arity, fn = _DIFF_KINDS[kind]
    arr = np.asarray(f)
    if arity == "scalar" and arr.ndim != 3:
        # scalar kinds also act componentwise on h-vectors
        if arr.ndim == 4 and arr.shape[0] == 2:
            return np.stack([fn(grid, arr[0]), fn(grid, arr[1])])
        raise DimensionMismatchError(f"{kind} operand", grid.shape, arr.shape)
    if arity == "hvector":
        grid.check_hvector(arr, f"{kind} operand")
    else:
        grid.check_scalar(arr, f"{kind} operand")
    return fn(grid, arr)
