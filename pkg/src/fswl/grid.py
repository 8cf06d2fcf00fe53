"""Periodic grid, Fourier conventions, and field containers.

Functions live on the symmetric torus [-L, L) sampled at N equispaced
collocation points.  Spectra are Fourier-series coefficients c_k of
f(x) = sum_k c_k exp(i k x) on the discrete wavenumbers k_j = pi*j/L,
j = -N/2 .. N/2-1 (FFT ordering), obtained as fft(samples)/N.  Spatial
quadrature is the rectangle rule dx * sum, which is exact for resolved
band-limited integrands; the induced Parseval identity is

    dx * sum |f_j|^2  =  2L * sum |c_k|^2.

Every other module builds on these conventions, so multiplier formulas
are written against them exactly once, here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "GridError",
    "ZeroModeError",
    "GridSpec",
    "FracOrder",
    "Field",
    "make_grid",
    "as_order",
]

# Imaginary contamination allowed in a real-flavored field, relative to its
# amplitude.  Operations that should preserve realness are exact multipliers,
# so anything above this indicates a bug rather than roundoff.
REAL_IMAG_RTOL = 1e-9

# Relative size of the zero mode below which a field counts as mean-free.
ZERO_MODE_RTOL = 1e-9


class GridError(ValueError):
    """Invalid grid construction parameters."""


class ZeroModeError(ValueError):
    """Operation undefined on the constant (k = 0) mode."""


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Truncated periodic spatial domain [-L, L) with N collocation points."""

    half_length: float
    n_points: int

    def __post_init__(self):
        if self.half_length <= 0:
            raise GridError(f"half_length must be positive, got {self.half_length}")
        if not _is_power_of_two(self.n_points) or self.n_points < 8:
            raise GridError(
                f"n_points must be a power of two >= 8, got {self.n_points}"
            )

    @property
    def L(self) -> float:
        return self.half_length

    @property
    def N(self) -> int:
        return self.n_points

    @property
    def dx(self) -> float:
        return 2.0 * self.half_length / self.n_points

    @property
    def measure(self) -> float:
        """Total length of the torus, 2L."""
        return 2.0 * self.half_length

    @property
    def x(self) -> np.ndarray:
        """Collocation points -L, -L+dx, ..., L-dx."""
        return -self.half_length + self.dx * np.arange(self.n_points)

    @property
    def k(self) -> np.ndarray:
        """Wavenumbers pi*j/L in FFT ordering, j = 0..N/2-1, -N/2..-1."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.dx)

    @property
    def nyquist_index(self) -> int:
        """Position of the unpaired mode j = -N/2 in FFT ordering."""
        return self.n_points // 2

    def to_spectrum(self, samples: np.ndarray) -> np.ndarray:
        """Fourier coefficients c_k from collocation samples."""
        return np.fft.fft(samples) / self.n_points

    def from_spectrum(self, coeffs: np.ndarray) -> np.ndarray:
        """Collocation samples from Fourier coefficients c_k."""
        return np.fft.ifft(coeffs * self.n_points)

    def dealias_mask(self) -> np.ndarray:
        """Boolean 2/3-rule mask: keep |j| <= N/3, drop the rest.

        Applied after every nonlinear product elsewhere in the codebase so
        quadratic interactions of retained modes cannot alias back into the
        retained band.  The unpaired Nyquist mode is always dropped.
        """
        j = np.fft.fftfreq(self.n_points, d=1.0 / self.n_points)
        mask = np.abs(j) <= self.n_points // 3
        mask[self.nyquist_index] = False
        return mask

    def frac_symbol(self, order: float) -> np.ndarray:
        """|k|**(2*order) with the zero mode and the Nyquist mode zeroed.

        The Nyquist mode has no conjugate partner, so it is removed from all
        fractional-power multipliers to keep real fields exactly real.
        """
        k = self.k
        sym = np.zeros_like(k)
        nz = k != 0.0
        sym[nz] = np.abs(k[nz]) ** (2.0 * order)
        sym[self.nyquist_index] = 0.0
        return sym

    def deriv_symbol(self) -> np.ndarray:
        """ik with the Nyquist mode zeroed (first spectral derivative)."""
        d = 1j * self.k
        d[self.nyquist_index] = 0.0
        return d


def make_grid(L: float, N: int) -> GridSpec:
    """Build the periodic grid on [-L, L) with N a power of two >= 8."""
    return GridSpec(half_length=float(L), n_points=int(N))


@dataclass(frozen=True)
class FracOrder:
    """Fractional order s of the nonlocal operator; valid range (0, 1).

    The coupled system additionally requires s > 1/2, which is enforced by
    the system-level constructors, not here.
    """

    s: float

    def __post_init__(self):
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"fractional order must lie in (0, 1), got {self.s}")

    def require_system_range(self) -> "FracOrder":
        if self.s <= 0.5:
            raise ValueError(
                f"coupled system requires 1/2 < s < 1, got s = {self.s}"
            )
        return self


def as_order(s) -> FracOrder:
    """Coerce a float or FracOrder to FracOrder."""
    if isinstance(s, FracOrder):
        return s
    return FracOrder(float(s))


class Field:
    """Grid-sampled function with a cached spectrum.

    Immutable by convention: the sample array is write-protected and all
    operations return new instances.  ``flavor`` is 'complex' for the
    short-wave unknown and 'real' for the long-wave unknown; real-flavored
    fields store float arrays and reject meaningful imaginary content.
    """

    __slots__ = ("grid", "values", "flavor", "_spectrum")

    def __init__(self, grid: GridSpec, values: np.ndarray, flavor: str = "complex"):
        if flavor not in ("complex", "real"):
            raise ValueError(f"unknown flavor {flavor!r}")
        values = np.asarray(values)
        if values.shape != (grid.n_points,):
            raise ValueError(
                f"samples shape {values.shape} does not match grid ({grid.n_points},)"
            )
        if flavor == "real":
            if np.iscomplexobj(values):
                scale = float(np.max(np.abs(values))) or 1.0
                imag = float(np.max(np.abs(values.imag)))
                if imag > REAL_IMAG_RTOL * max(scale, 1.0):
                    raise ValueError(
                        f"real-flavored field has imaginary part {imag:.3e}"
                    )
                values = values.real
            values = np.array(values, dtype=np.float64)
        else:
            values = np.array(values, dtype=np.complex128)
        values.setflags(write=False)
        self.grid = grid
        self.values = values
        self.flavor = flavor
        self._spectrum = None

    # -- constructors ---------------------------------------------------

    @classmethod
    def from_function(cls, grid: GridSpec, fn: Callable, flavor: str = "complex") -> "Field":
        return cls(grid, fn(grid.x), flavor=flavor)

    @classmethod
    def from_spectrum(cls, grid: GridSpec, coeffs: np.ndarray, flavor: str = "complex") -> "Field":
        return cls(grid, grid.from_spectrum(coeffs), flavor=flavor)

    @classmethod
    def zero(cls, grid: GridSpec, flavor: str = "complex") -> "Field":
        dtype = np.float64 if flavor == "real" else np.complex128
        return cls(grid, np.zeros(grid.n_points, dtype=dtype), flavor=flavor)

    # -- spectral access --------------------------------------------------

    @property
    def spectrum(self) -> np.ndarray:
        """Fourier coefficients c_k; cached, read-only."""
        if self._spectrum is None:
            spec = self.grid.to_spectrum(self.values)
            spec.setflags(write=False)
            self._spectrum = spec
        return self._spectrum

    def with_spectrum(self, coeffs: np.ndarray) -> "Field":
        """New field of the same flavor from modified coefficients."""
        vals = self.grid.from_spectrum(coeffs)
        return Field(self.grid, vals, flavor=self.flavor)

    def dealiased(self) -> "Field":
        return self.with_spectrum(self.spectrum * self.grid.dealias_mask())

    def mean(self) -> complex:
        return complex(self.spectrum[0])

    def is_mean_free(self, rtol: float = ZERO_MODE_RTOL) -> bool:
        scale = float(np.sqrt(np.sum(np.abs(self.spectrum) ** 2))) or 1.0
        return abs(self.spectrum[0]) <= rtol * max(scale, 1.0)

    # -- norms (rectangle-rule / Parseval) --------------------------------

    def norm_l2(self) -> float:
        return float(np.sqrt(self.grid.dx * np.sum(np.abs(self.values) ** 2)))

    def norm_l4_4(self) -> float:
        """Fourth power of the L^4 norm."""
        return float(self.grid.dx * np.sum(np.abs(self.values) ** 4))

    def norm_h1(self) -> float:
        w = 1.0 + self.grid.k**2
        return float(
            np.sqrt(self.grid.measure * np.sum(w * np.abs(self.spectrum) ** 2))
        )

    def norm_sup(self, pad: int = 8) -> float:
        """Sup norm evaluated on a ``pad``-times zero-padded refinement.

        Collocation alone can undersample the true maximum of the underlying
        band-limited function; padding recovers it to high accuracy.
        """
        if pad <= 1:
            return float(np.max(np.abs(self.values)))
        N = self.grid.n_points
        M = pad * N
        fine = np.zeros(M, dtype=np.complex128)
        spec = self.spectrum
        half = N // 2
        fine[:half] = spec[:half]
        fine[-half:] = spec[-half:]
        vals = np.fft.ifft(fine * M)
        return float(np.max(np.abs(vals)))

    # -- algebra -----------------------------------------------------------

    def _like(self, values: np.ndarray, flavor: str | None = None) -> "Field":
        return Field(self.grid, values, flavor=flavor or self.flavor)

    def __add__(self, other: "Field") -> "Field":
        flavor = "real" if self.flavor == other.flavor == "real" else "complex"
        return self._like(self.values + other.values, flavor)

    def __sub__(self, other: "Field") -> "Field":
        flavor = "real" if self.flavor == other.flavor == "real" else "complex"
        return self._like(self.values - other.values, flavor)

    def __mul__(self, c) -> "Field":
        if isinstance(c, Field):
            flavor = "real" if self.flavor == c.flavor == "real" else "complex"
            return self._like(self.values * c.values, flavor)
        if isinstance(c, complex) and c.imag != 0.0 and self.flavor == "real":
            return Field(self.grid, self.values * c, flavor="complex")
        return self._like(self.values * c)

    __rmul__ = __mul__

    def translated(self, cells: int) -> "Field":
        """Translation by an integer number of grid cells (exact)."""
        return self._like(np.roll(self.values, cells))

    def __repr__(self) -> str:
        return (
            f"Field(N={self.grid.n_points}, L={self.grid.half_length}, "
            f"flavor={self.flavor!r}, l2={self.norm_l2():.4g})"
        )
