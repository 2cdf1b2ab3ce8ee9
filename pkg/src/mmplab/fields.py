"""Nine-component spectral state and the operators acting on it.

The state z = (u, w, b) couples an incompressible velocity u, a
micro-rotational field w and a solenoidal magnetic field b.  Fields live in
spectral space (see :mod:`mmplab.grid` for the normalization); physical
space is only visited transiently when forming products.  The Leray
projection implemented here is what removes the pressure gradient from the
velocity equation: taking divergence of the momentum equation determines
the pressure, and subtracting its gradient is exactly the projection
vhat - xi (xi . vhat) / |xi|^2 mode by mode.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .grid import Grid, conjugate_symmetry_error, forward, inverse_real

SOLENOIDAL_TOL = 1e-8


class ContractViolation(ValueError):
    """An input violated a documented precondition."""


@dataclass(frozen=True)
class PhysParams:
    """Viscosity parameters of the coupled system.

    mu     kinematic viscosity (velocity diffusion enters as (mu + chi))
    gamma  angular viscosity of the micro-rotational field
    chi    micro-rotational (vortex) viscosity; couples u and w and damps w
    nu     inverse magnetic Reynolds number (magnetic diffusivity)
    """

    mu: float = 1.0
    gamma: float = 1.0
    chi: float = 0.5
    nu: float = 1.0

    def __post_init__(self):
        if min(self.mu, self.gamma, self.nu) <= 0:
            raise ValueError("mu, gamma, nu must be positive")
        if self.chi < 0:
            raise ValueError("chi must be nonnegative")

    @property
    def bound_valid(self) -> bool:
        """Whether 32 chi (mu + chi + gamma) > 1 holds.

        Under this condition the quadratic s -> (mu+chi+gamma) s^2 - s/2 + 2 chi
        has no real root, which is the hypothesis of the closed-form
        eigenvalue bound (see :func:`mmplab.symbol.spectral_bound`).
        """
        return 32.0 * self.chi * (self.mu + self.chi + self.gamma) > 1.0


@dataclass(frozen=True)
class StateField:
    """Spectral coefficients of z = (u, w, b) on a periodic grid.

    Each component array has shape (3, n, n, n) in FFT mode order.  Instances
    are immutable values; every operation returns a new StateField.
    """

    grid: Grid
    uhat: np.ndarray
    what: np.ndarray
    bhat: np.ndarray
    solenoidal_u: bool = True
    solenoidal_b: bool = True

    def __post_init__(self):
        shape = (3, self.grid.n, self.grid.n, self.grid.n)
        for name in ("uhat", "what", "bhat"):
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ContractViolation(
                    f"{name} has shape {arr.shape}, expected {shape}")

    @classmethod
    def zero(cls, grid: Grid) -> "StateField":
        shape = (3, grid.n, grid.n, grid.n)
        z = np.zeros(shape, dtype=complex)
        return cls(grid, z, z.copy(), z.copy())

    @classmethod
    def from_physical(cls, grid: Grid, u, w, b) -> "StateField":
        return cls(grid, forward(np.asarray(u, float)),
                   forward(np.asarray(w, float)),
                   forward(np.asarray(b, float)))

    def components(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.uhat, self.what, self.bhat

    def with_coeffs(self, uhat, what, bhat) -> "StateField":
        return replace(self, uhat=uhat, what=what, bhat=bhat)

    def to_physical(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (inverse_real(self.uhat), inverse_real(self.what),
                inverse_real(self.bhat))

    def conjugate_symmetry_error(self) -> float:
        return max(conjugate_symmetry_error(self.uhat),
                   conjugate_symmetry_error(self.what),
                   conjugate_symmetry_error(self.bhat))

    def divergence_error(self) -> float:
        """Max relative |xi . vhat| over u and b (solenoidality residual)."""
        return max(_div_residual(self.grid, self.uhat),
                   _div_residual(self.grid, self.bhat))


def _div_residual(grid: Grid, vhat: np.ndarray) -> float:
    div = (grid.xi_odd * vhat).sum(axis=0)
    scale = grid.xi_mag.max() * np.abs(vhat).max()
    return float(np.abs(div).max() / scale) if scale > 0 else 0.0


def transform_roundtrip(state: StateField) -> StateField:
    """Inverse-then-forward transform of every component (contract check)."""
    u, w, b = state.to_physical()
    return state.with_coeffs(forward(u), forward(w), forward(b))


def leray_project(grid: Grid, vhat: np.ndarray) -> np.ndarray:
    """Remove the gradient part: vhat - xi (xi . vhat) / |xi|^2.

    The zero mode passes through unchanged (the projector formula is
    singular there and the mean flow carries no gradient part).
    """
    if vhat.shape != (3, grid.n, grid.n, grid.n):
        raise ContractViolation(f"expected 3-component spectral array, got {vhat.shape}")
    xi = grid.xi_odd
    s2 = (xi ** 2).sum(axis=0)
    safe = np.where(s2 > 0, s2, 1.0)
    dot = (xi * vhat).sum(axis=0)
    out = vhat - xi * (dot / safe)[None]
    # the mean mode and pure-Nyquist modes carry no representable gradient
    out[:, s2 == 0] = vhat[:, s2 == 0]
    return out


def gradient(grid: Grid, fhat: np.ndarray) -> np.ndarray:
    """Spectral gradient i xi fhat; adds a leading derivative axis."""
    return 1j * grid.xi_odd[(slice(None),) + (None,) * (fhat.ndim - 3)] * fhat[None]


def divergence(grid: Grid, vhat: np.ndarray) -> np.ndarray:
    """i xi . vhat for a 3-component spectral array."""
    return 1j * (grid.xi_odd * vhat).sum(axis=0)


def curl(grid: Grid, vhat: np.ndarray) -> np.ndarray:
    """i xi x vhat for a 3-component spectral array."""
    xi = grid.xi_odd
    return 1j * np.stack([
        xi[1] * vhat[2] - xi[2] * vhat[1],
        xi[2] * vhat[0] - xi[0] * vhat[2],
        xi[0] * vhat[1] - xi[1] * vhat[0],
    ])


def spectrum_norm_sq(grid: Grid, *spectral_arrays: np.ndarray,
                     weight: np.ndarray | None = None) -> float:
    """L2 norm squared, volume * sum of |coefficients|^2, optionally weighted.

    Accumulation order is fixed (numpy pairwise sum over C-ordered arrays),
    so results are bit-stable across worker counts.
    """
    total = 0.0
    for arr in spectral_arrays:
        mag = (arr.real ** 2 + arr.imag ** 2)
        if weight is not None:
            mag = mag * weight
        total += float(mag.sum())
    return grid.volume * total


def l2_norm_sq(state_or_array, grid: Grid | None = None) -> float:
    """||f||_{L2}^2 of a StateField or of a bare spectral array."""
    if isinstance(state_or_array, StateField):
        g = state_or_array.grid
        return spectrum_norm_sq(g, *state_or_array.components())
    if grid is None:
        raise ValueError("grid required for bare arrays")
    return spectrum_norm_sq(grid, state_or_array)


def gradient_norm_sq(state_or_array, grid: Grid | None = None) -> float:
    """||grad f||^2 = volume * sum |xi|^2 |fhat|^2."""
    if isinstance(state_or_array, StateField):
        g = state_or_array.grid
        return spectrum_norm_sq(g, *state_or_array.components(), weight=g.xi_sq)
    if grid is None:
        raise ValueError("grid required for bare arrays")
    return spectrum_norm_sq(grid, state_or_array, weight=grid.xi_sq)


def second_deriv_norm_sq(state: StateField) -> float:
    """||D^2 f||^2 = volume * sum |xi|^4 |fhat|^2."""
    g = state.grid
    return spectrum_norm_sq(g, *state.components(), weight=g.xi_sq ** 2)


def physical_norm_sq(grid: Grid, phys: np.ndarray) -> float:
    """Quadrature of |f|^2 on the periodic grid (oracle for Parseval)."""
    return float((np.asarray(phys) ** 2).sum()) * grid.spacing ** 3
