"""Periodic grid, field containers, and spectral operators.

Everything downstream (norms, the nonlinear solver, the linear propagator
checks) stands on this module.  Conventions, fixed once:

* The domain is the periodic box [0, L)^3 sampled on n^3 points.  The
  frequency lattice is xi_k = 2*pi*k/L for integer triples k with
  |k_j| <= n/2.
* Forward transform kernel e^{-i xi.x}, unitary normalization: the stored
  coefficient is F(k) = (L^{3/2}/n^3) * fftn(f)[k], so Parseval holds with
  constant exactly 1 against the rectangle-rule physical L2 norm.
* Differential operators multiply by (i xi)^alpha and zero the Nyquist
  planes (|k_j| = n/2), where odd-order derivatives are sign-ambiguous.
* The Poisson gauge is phi_hat(0) = 0; a nonzero-mean source is an error,
  never silently projected out.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

__all__ = [
    "Grid",
    "RealField",
    "SpectralField",
    "FluidState",
    "SpectralError",
    "ChargeImbalanceError",
    "to_spectral",
    "to_real",
    "derivative",
    "gradient",
    "divergence",
    "poisson_solve",
    "laplacian",
    "dealias",
    "fft_workers",
]

MAX_DERIVATIVE_ORDER = 4

_FFT_WORKERS = -1


def fft_workers(count: int | None = None) -> int:
    """Get or set the worker count handed to scipy.fft (default: all cores)."""
    global _FFT_WORKERS
    if count is not None:
        _FFT_WORKERS = int(count)
    return _FFT_WORKERS


class SpectralError(ValueError):
    """Invalid input to a spectral operation."""


class ChargeImbalanceError(SpectralError):
    """Poisson source with nonzero mean on the torus (no solution)."""


@dataclass(frozen=True)
class Grid:
    """Periodic box descriptor: n_points per axis and physical box length."""

    n_points: int
    box_length: float = 2.0 * np.pi

    def __post_init__(self):
        if self.n_points < 8 or self.n_points % 2 != 0:
            raise SpectralError(f"n_points must be even and >= 8, got {self.n_points}")
        if not self.box_length > 0:
            raise SpectralError(f"box_length must be positive, got {self.box_length}")

    @property
    def spacing(self) -> float:
        return self.box_length / self.n_points

    @property
    def volume(self) -> float:
        return self.box_length**3

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_points,) * 3

    @cached_property
    def coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable physical coordinates (X, Y, Z) of the grid points."""
        x = np.arange(self.n_points) * self.spacing
        return (x[:, None, None], x[None, :, None], x[None, None, :])

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable frequency components (xi1, xi2, xi3), fftn ordering."""
        k = np.fft.fftfreq(self.n_points, d=1.0 / self.n_points)
        xi = k * (2.0 * np.pi / self.box_length)
        return (xi[:, None, None], xi[None, :, None], xi[None, None, :])

    @cached_property
    def k_squared(self) -> np.ndarray:
        x1, x2, x3 = self.wavenumbers
        return x1**2 + x2**2 + x3**2

    @cached_property
    def k_magnitude(self) -> np.ndarray:
        return np.sqrt(self.k_squared)

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True away from every Nyquist plane |k_j| = n/2."""
        nyq = np.pi * self.n_points / self.box_length
        x1, x2, x3 = self.wavenumbers
        tol = 1e-9 * nyq
        return (np.abs(x1) < nyq - tol) & (np.abs(x2) < nyq - tol) & (np.abs(x3) < nyq - tol)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keeps |k_j| <= n/3 on every axis."""
        cut = (2.0 * np.pi / self.box_length) * (self.n_points / 3.0)
        x1, x2, x3 = self.wavenumbers
        tol = 1e-9 * cut
        return (np.abs(x1) <= cut + tol) & (np.abs(x2) <= cut + tol) & (np.abs(x3) <= cut + tol)

    @cached_property
    def inverse_k_squared(self) -> np.ndarray:
        """1/|xi|^2 with the zero mode mapped to 0 (Poisson gauge)."""
        k2 = self.k_squared
        out = np.zeros_like(k2)
        np.divide(1.0, k2, where=k2 > 0, out=out)
        return out

    @property
    def forward_factor(self) -> float:
        return self.box_length**1.5 / self.n_points**3

    def mode_index(self, k: tuple[int, int, int]) -> tuple[int, int, int]:
        """Array index of integer mode k (components may be negative)."""
        n = self.n_points
        return tuple(int(c) % n for c in k)


def _check_rank_shape(grid: Grid, values: np.ndarray) -> int:
    if values.shape == grid.shape:
        return 1
    if values.shape == (3,) + grid.shape:
        return 3
    raise SpectralError(
        f"field shape {values.shape} matches neither scalar {grid.shape} "
        f"nor vector {(3,) + grid.shape}"
    )


@dataclass(frozen=True)
class RealField:
    """Scalar or 3-vector field sampled at the grid points (immutable)."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        _check_rank_shape(self.grid, values)
        if not np.all(np.isfinite(values)):
            raise SpectralError("field contains non-finite values")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def rank(self) -> int:
        return 1 if self.values.shape == self.grid.shape else 3

    def mean(self) -> float | np.ndarray:
        if self.rank == 1:
            return float(self.values.mean())
        return self.values.mean(axis=(1, 2, 3))

    def component(self, i: int) -> "RealField":
        if self.rank == 1:
            raise SpectralError("scalar field has no components")
        return RealField(self.grid, self.values[i])

    @classmethod
    def zeros(cls, grid: Grid, rank: int = 1) -> "RealField":
        shape = grid.shape if rank == 1 else (3,) + grid.shape
        return cls(grid, np.zeros(shape))


@dataclass(frozen=True)
class SpectralField:
    """Frequency-side field; coefficients on the full fftn lattice."""

    grid: Grid
    coefficients: np.ndarray = field(repr=False)

    def __post_init__(self):
        coeff = np.asarray(self.coefficients, dtype=complex)
        _check_rank_shape(self.grid, coeff)
        coeff = coeff.copy()
        coeff.flags.writeable = False
        object.__setattr__(self, "coefficients", coeff)

    @property
    def rank(self) -> int:
        return 1 if self.coefficients.shape == self.grid.shape else 3

    def component(self, i: int) -> "SpectralField":
        if self.rank == 1:
            raise SpectralError("scalar field has no components")
        return SpectralField(self.grid, self.coefficients[i])

    def hermitian_defect(self) -> float:
        """max |F(-k) - conj(F(k))|; zero for real-valued physical fields."""
        c = self.coefficients
        axes = (-3, -2, -1)
        flipped = np.roll(np.flip(c, axis=axes), 1, axis=axes)
        return float(np.max(np.abs(flipped - np.conj(c))))

    def mode(self, k: tuple[int, int, int]) -> complex | np.ndarray:
        idx = self.grid.mode_index(k)
        if self.rank == 1:
            return complex(self.coefficients[idx])
        return self.coefficients[(slice(None),) + idx]

    @classmethod
    def zeros(cls, grid: Grid, rank: int = 1) -> "SpectralField":
        shape = grid.shape if rank == 1 else (3,) + grid.shape
        return cls(grid, np.zeros(shape, dtype=complex))


def to_spectral(f: RealField) -> SpectralField:
    """Forward transform with the unitary (Parseval constant 1) normalization."""
    g = f.grid
    axes = (-3, -2, -1)
    coeff = sfft.fftn(f.values, axes=axes, workers=_FFT_WORKERS) * g.forward_factor
    return SpectralField(g, coeff)


def to_real(F: SpectralField) -> RealField:
    """Inverse transform; the imaginary residue of Hermitian input is dropped."""
    g = F.grid
    axes = (-3, -2, -1)
    values = sfft.ifftn(F.coefficients, axes=axes, workers=_FFT_WORKERS).real
    return RealField(g, values * (g.n_points**3 / g.box_length**1.5))


def _as_spectral(f) -> SpectralField:
    return f if isinstance(f, SpectralField) else to_spectral(f)


def derivative(F: SpectralField, multi_index: tuple[int, int, int],
               max_order: int = MAX_DERIVATIVE_ORDER) -> SpectralField:
    """Partial derivative d^alpha with alpha = multi_index; Nyquist planes zeroed."""
    order = sum(multi_index)
    if order > max_order:
        raise SpectralError(f"derivative order {order} exceeds maximum {max_order}")
    if any(m < 0 for m in multi_index):
        raise SpectralError("multi_index components must be nonnegative")
    g = F.grid
    mult = g.nyquist_mask.astype(complex)
    for axis, m in enumerate(multi_index):
        if m:
            mult = mult * (1j * g.wavenumbers[axis]) ** m
    return SpectralField(g, F.coefficients * mult)


def gradient(F: SpectralField) -> SpectralField:
    """Gradient of a scalar spectral field as a vector spectral field."""
    if F.rank != 1:
        raise SpectralError("gradient expects a scalar field")
    g = F.grid
    mask = g.nyquist_mask
    comps = np.stack([1j * g.wavenumbers[a] * F.coefficients * mask for a in range(3)])
    return SpectralField(g, comps)


def divergence(F: SpectralField) -> SpectralField:
    """Divergence of a vector spectral field."""
    if F.rank != 3:
        raise SpectralError("divergence expects a vector field")
    g = F.grid
    mask = g.nyquist_mask
    out = sum(1j * g.wavenumbers[a] * F.coefficients[a] for a in range(3)) * mask
    return SpectralField(g, out)


def laplacian(F: SpectralField) -> SpectralField:
    """Multiplication by -|xi|^2 (all lattice modes, Nyquist included)."""
    return SpectralField(F.grid, -F.grid.k_squared * F.coefficients)


def poisson_solve(rho_diff: SpectralField, mean_tol: float = 1e-10) -> SpectralField:
    """Solve Laplace(phi) = source on the torus, zero-mean gauge.

    The source must have (numerically) vanishing zero mode; anything else is
    a charge imbalance and gets rejected rather than projected away.
    """
    if rho_diff.rank != 1:
        raise SpectralError("poisson_solve expects a scalar source")
    g = rho_diff.grid
    c = rho_diff.coefficients
    scale = float(np.max(np.abs(c)))
    dc = abs(c[0, 0, 0])
    if scale > 0 and dc > mean_tol * scale:
        raise ChargeImbalanceError(
            f"Poisson source has nonzero mean (|F(0)| = {dc:.3e}, scale {scale:.3e})"
        )
    phi = -c * g.inverse_k_squared
    return SpectralField(g, phi)


def dealias(F: SpectralField) -> SpectralField:
    """Zero every coefficient with any |k_j| > n/3 (2/3 rule)."""
    return SpectralField(F.grid, F.coefficients * F.grid.dealias_mask)


@dataclass(frozen=True)
class FluidState:
    """Both species' density perturbations and velocities at one time.

    The potential is derived from n1 - n2 on demand and never stored.
    Invariants: equal species means (torus Poisson solvability) and pointwise
    positive total density 1 + n_i.
    """

    n1: RealField
    u1: RealField
    n2: RealField
    u2: RealField
    time: float = 0.0

    def __post_init__(self):
        g = self.grid
        for f, rank, name in ((self.n1, 1, "n1"), (self.n2, 1, "n2"),
                              (self.u1, 3, "u1"), (self.u2, 3, "u2")):
            if f.grid != g:
                raise SpectralError(f"{name} lives on a different grid")
            if f.rank != rank:
                raise SpectralError(f"{name} has rank {f.rank}, expected {rank}")
        if self.time < 0:
            raise SpectralError("time must be nonnegative")
        scale = max(float(np.max(np.abs(self.n1.values))),
                    float(np.max(np.abs(self.n2.values))), 1e-300)
        if abs(self.n1.mean() - self.n2.mean()) > 1e-11 * scale:
            raise ChargeImbalanceError(
                f"mean(n1) = {self.n1.mean():.3e} != mean(n2) = {self.n2.mean():.3e}"
            )
        if float(self.n1.values.min()) <= -1.0 or float(self.n2.values.min()) <= -1.0:
            raise SpectralError("total density 1 + n must stay positive")

    @property
    def grid(self) -> Grid:
        return self.n1.grid

    def potential_gradient(self) -> RealField:
        """grad(phi) with Laplace(phi) = n1 - n2, zero-mean gauge."""
        rho = to_spectral(RealField(self.grid, self.n1.values - self.n2.values))
        return to_real(gradient(poisson_solve(rho)))

    @classmethod
    def zeros(cls, grid: Grid) -> "FluidState":
        return cls(
            n1=RealField.zeros(grid), u1=RealField.zeros(grid, rank=3),
            n2=RealField.zeros(grid), u2=RealField.zeros(grid, rank=3),
        )
