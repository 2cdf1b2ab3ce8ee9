"""Periodic box, spectral transforms and wavevector bookkeeping.

Spectral coefficients follow the Fourier-series convention: the forward
transform carries the 1/n^3 factor, so a physical field is reconstructed as
f(x) = sum_k fhat(k) exp(i xi_k . x) with xi_k = (2 pi / L) k and integer
k in [-n/2, n/2) per axis.  With this normalization Parseval reads
int |f|^2 dx = L^3 sum_k |fhat(k)|^2, which is what every norm in the
package uses.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as _fft


def worker_count() -> int:
    """Worker threads for FFT batches, capped by the MMP_THREADS variable.

    Results are bitwise identical for any worker count; the cap only
    bounds resource usage.
    """
    env = os.environ.get("MMP_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with n modes per axis on a box of side length."""

    n: int
    length: float = 2.0 * np.pi

    def __post_init__(self):
        if self.n % 2 != 0 or self.n < 8:
            raise ValueError(f"grid size must be even and >= 8, got n={self.n}")
        if not self.length > 0:
            raise ValueError(f"box side must be positive, got {self.length}")

    @property
    def volume(self) -> float:
        return self.length ** 3

    @property
    def spacing(self) -> float:
        return self.length / self.n

    @property
    def fundamental(self) -> float:
        """Smallest nonzero wavenumber magnitude, 2 pi / L."""
        return 2.0 * np.pi / self.length

    @cached_property
    def k_int(self) -> np.ndarray:
        """Integer mode numbers along one axis in FFT order."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n).astype(np.int64)

    @cached_property
    def xi(self) -> np.ndarray:
        """Wavevectors, shape (3, n, n, n)."""
        k = self.fundamental * self.k_int.astype(float)
        out = np.empty((3, self.n, self.n, self.n))
        out[0] = k[:, None, None]
        out[1] = k[None, :, None]
        out[2] = k[None, None, :]
        return out

    @cached_property
    def xi_odd(self) -> np.ndarray:
        """Wavevectors with the Nyquist component zeroed.

        The k = -n/2 plane has no conjugate partner, so odd (sign-carrying)
        operators built from it are ambiguous and would break the reality of
        physical fields; every first-derivative-like factor uses this copy.
        Even quantities (|xi|^2 weights) keep the full wavevector.
        """
        k = self.fundamental * self.k_int.astype(float)
        k[self.n // 2] = 0.0
        out = np.empty((3, self.n, self.n, self.n))
        out[0] = k[:, None, None]
        out[1] = k[None, :, None]
        out[2] = k[None, None, :]
        return out

    @cached_property
    def xi_sq(self) -> np.ndarray:
        """|xi|^2, shape (n, n, n)."""
        return (self.xi ** 2).sum(axis=0)

    @cached_property
    def xi_mag(self) -> np.ndarray:
        return np.sqrt(self.xi_sq)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Boolean 2/3-rule mask: keep modes with |k_i| <= floor(n/3)."""
        cut = self.n // 3
        keep1 = np.abs(self.k_int) <= cut
        return keep1[:, None, None] & keep1[None, :, None] & keep1[None, None, :]

    def points(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Physical grid coordinates (x, y, z), each of shape (n, n, n)."""
        x1 = np.arange(self.n) * self.spacing
        return np.meshgrid(x1, x1, x1, indexing="ij")


def forward(phys: np.ndarray, workers: int | None = None) -> np.ndarray:
    """Physical -> spectral over the last three axes (carries 1/n^3)."""
    n3 = phys.shape[-1] * phys.shape[-2] * phys.shape[-3]
    return _fft.fftn(phys, axes=(-3, -2, -1), workers=workers or worker_count()) / n3


def inverse(spec: np.ndarray, workers: int | None = None) -> np.ndarray:
    """Spectral -> physical over the last three axes (complex output)."""
    n3 = spec.shape[-1] * spec.shape[-2] * spec.shape[-3]
    return _fft.ifftn(spec, axes=(-3, -2, -1), workers=workers or worker_count()) * n3


def inverse_real(spec: np.ndarray, workers: int | None = None) -> np.ndarray:
    """Spectral -> physical, dropping the roundoff imaginary part."""
    return inverse(spec, workers=workers).real


def conjugate_flip(spec: np.ndarray) -> np.ndarray:
    """Return conj(a(-k)) on the FFT index grid (last three axes)."""
    rev = spec[..., ::-1, ::-1, ::-1]
    return np.conj(np.roll(rev, 1, axis=(-3, -2, -1)))


def hermitian_symmetrize(spec: np.ndarray) -> np.ndarray:
    """Project onto the conjugate-symmetric part (real physical field)."""
    return 0.5 * (spec + conjugate_flip(spec))


def conjugate_symmetry_error(spec: np.ndarray) -> float:
    """Max |a(k) - conj(a(-k))| relative to the largest coefficient."""
    err = np.abs(spec - conjugate_flip(spec)).max()
    scale = np.abs(spec).max()
    return float(err / scale) if scale > 0 else 0.0
