"""Periodic d-dimensional grid, discrete Fourier transform, and norms.

The whole package fixes one Fourier convention,

    F[f](eta) = integral exp(-i eta.x) f(x) dx,

with the inverse transform carrying the (2*pi)**(-d) factor.  On the
lattice the forward transform is the Riemann sum

    F[f](eta_j) = h**d * sum_m exp(-i eta_j . x_m) f(x_m),

over grid points x_m = -L/2 + m*h, with dual frequencies
eta_j = 2*pi*j/L, j in {-N/2, ..., N/2 - 1} per axis (stored in FFT
order).  Under this convention the discrete Plancherel identity

    ||f||_{L2}**2 = L**(-d) * sum_j |F[f](eta_j)|**2

is exact, which every isometry check in the package relies on.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from fractions import Fraction
from typing import BinaryIO

import numpy as np

__all__ = [
    "Grid",
    "LatticeField",
    "l2_norm",
    "h_neg_k_norm",
    "multiplier_apply",
    "write_field",
    "read_field",
]

# Maximum tolerated imaginary residue, relative to field scale, after an
# inverse transform that should produce a real field.
_IMAG_TOL = 1e-10


class Grid:
    """Uniform periodic grid on the centered box [-L/2, L/2)**d.

    Parameters
    ----------
    dimension : int
        Spatial dimension, 1 <= dimension <= 3.
    points_per_axis : int
        Points per axis N; must be a power of two, N >= 8.
    box_length : int, float or Fraction
        Side length L of the periodic box.  Rational values survive
        serialization exactly (the binary field header stores L as a
        numerator/denominator pair).
    """

    def __init__(self, dimension: int, points_per_axis: int, box_length) -> None:
        if not 1 <= dimension <= 3:
            raise ValueError(f"dimension must be 1, 2 or 3, got {dimension}")
        n = int(points_per_axis)
        if n < 8 or (n & (n - 1)) != 0:
            raise ValueError(f"points_per_axis must be a power of two >= 8, got {points_per_axis}")
        length = Fraction(box_length) if not isinstance(box_length, float) else Fraction(box_length).limit_denominator(10**9)
        if length <= 0:
            raise ValueError("box_length must be positive")
        self.dimension = dimension
        self.points_per_axis = n
        self.box_length_exact = length
        self.box_length = float(length)
        self.spacing = self.box_length / n
        self.shape = (n,) * dimension
        self.cell_volume = self.spacing**dimension
        self.dual_cell_volume = (2.0 * np.pi / self.box_length) ** dimension
        # axis coordinates and FFT-ordered dual frequencies
        self.axis_coords = -self.box_length / 2.0 + self.spacing * np.arange(n)
        self.axis_freqs = 2.0 * np.pi * np.fft.fftfreq(n, d=self.spacing)
        self._freq_sq = None
        self._coord_sq = None

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Grid)
            and self.dimension == other.dimension
            and self.points_per_axis == other.points_per_axis
            and self.box_length_exact == other.box_length_exact
        )

    def __hash__(self) -> int:
        return hash((self.dimension, self.points_per_axis, self.box_length_exact))

    def __repr__(self) -> str:
        return f"Grid(d={self.dimension}, N={self.points_per_axis}, L={self.box_length})"

    def _axis_array(self, values: np.ndarray, axis: int) -> np.ndarray:
        shape = [1] * self.dimension
        shape[axis] = self.points_per_axis
        return values.reshape(shape)

    @property
    def freq_norm_sq(self) -> np.ndarray:
        """|eta|**2 on the dual grid, FFT order, shape ``self.shape``."""
        if self._freq_sq is None:
            acc = np.zeros(self.shape)
            for ax in range(self.dimension):
                acc = acc + self._axis_array(self.axis_freqs, ax) ** 2
            self._freq_sq = acc
        return self._freq_sq

    @property
    def coord_norm_sq(self) -> np.ndarray:
        """|x|**2 at the grid points, shape ``self.shape``."""
        if self._coord_sq is None:
            acc = np.zeros(self.shape)
            for ax in range(self.dimension):
                acc = acc + self._axis_array(self.axis_coords, ax) ** 2
            self._coord_sq = acc
        return self._coord_sq

    def coords(self) -> list[np.ndarray]:
        """Meshgrid coordinate arrays (one per axis, ij indexing)."""
        return list(np.meshgrid(*([self.axis_coords] * self.dimension), indexing="ij"))

    def forward(self, values: np.ndarray) -> np.ndarray:
        """Forward transform with the h**d Riemann-sum scaling.

        Converges to the continuum transform as N grows for smooth
        fields that decay inside the box.
        """
        arr = np.asarray(values)
        if arr.shape[-self.dimension:] != self.shape:
            raise ValueError(f"field shape {arr.shape} does not match grid {self.shape}")
        axes = tuple(range(arr.ndim - self.dimension, arr.ndim))
        return self.cell_volume * np.fft.fftn(np.fft.ifftshift(arr, axes=axes), axes=axes)

    def inverse(self, spectrum: np.ndarray, require_real: bool = True) -> np.ndarray:
        """Inverse transform; checks and discards the imaginary residue.

        With ``require_real=False`` the complex field is returned as is
        (used for modulated integrands).
        """
        arr = np.asarray(spectrum)
        axes = tuple(range(arr.ndim - self.dimension, arr.ndim))
        out = np.fft.fftshift(np.fft.ifftn(arr, axes=axes), axes=axes) / self.cell_volume
        if not require_real:
            return out
        scale = np.max(np.abs(out))
        if scale > 0 and np.max(np.abs(out.imag)) > _IMAG_TOL * scale:
            raise ValueError("inverse transform produced a non-real field; multiplier not even?")
        return np.ascontiguousarray(out.real)

    def negate_freq_index(self, arr: np.ndarray) -> np.ndarray:
        """Return arr evaluated at -eta (index map j -> -j mod N per axis)."""
        out = arr
        n = self.points_per_axis
        idx = (-np.arange(n)) % n
        for ax in range(arr.ndim - self.dimension, arr.ndim):
            out = np.take(out, idx, axis=ax)
        return out


@dataclass
class LatticeField:
    """Real scalar field on a grid, with a lazily cached spectrum."""

    grid: Grid
    values: np.ndarray
    _spectrum: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")

    @classmethod
    def from_values(cls, grid: Grid, values: np.ndarray) -> "LatticeField":
        return cls(grid, values)

    @classmethod
    def from_spectrum(cls, grid: Grid, spectrum: np.ndarray) -> "LatticeField":
        values = grid.inverse(spectrum)
        out = cls(grid, values)
        out._spectrum = np.asarray(spectrum, dtype=complex)
        return out

    @classmethod
    def zeros(cls, grid: Grid) -> "LatticeField":
        return cls(grid, np.zeros(grid.shape))

    @property
    def spectrum(self) -> np.ndarray:
        if self._spectrum is None:
            self._spectrum = self.grid.forward(self.values)
        return self._spectrum

    def __add__(self, other: "LatticeField") -> "LatticeField":
        if self.grid != other.grid:
            raise ValueError("grids differ")
        return LatticeField(self.grid, self.values + other.values)

    def __sub__(self, other: "LatticeField") -> "LatticeField":
        if self.grid != other.grid:
            raise ValueError("grids differ")
        return LatticeField(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "LatticeField":
        return LatticeField(self.grid, self.values * scalar)

    __rmul__ = __mul__


def l2_norm(f: LatticeField | np.ndarray, grid: Grid | None = None) -> float:
    """L2 norm (h**d * sum f**2)**(1/2); accepts complex-valued arrays."""
    if isinstance(f, LatticeField):
        grid, arr = f.grid, f.values
    else:
        if grid is None:
            raise ValueError("grid required when passing a bare array")
        arr = np.asarray(f)
    return float(np.sqrt(grid.cell_volume * np.sum(np.abs(arr) ** 2)))


def spectral_l2_norm_sq(spectrum: np.ndarray, grid: Grid) -> float:
    """||f||_{L2}**2 evaluated from the spectrum (exact discrete Plancherel)."""
    return float(np.sum(np.abs(spectrum) ** 2) / grid.box_length**grid.dimension)


def h_neg_k_norm(f: LatticeField, k: int) -> float:
    """Negative-order Sobolev norm from the spectral side.

    ||f||**2 = (2*pi)**(-d) * sum_j q_j (1 + |eta_j|**2)**(-k) |F[f](eta_j)|**2,
    so k = 0 reproduces the L2 norm under the package convention.
    """
    grid = f.grid
    weight = (1.0 + grid.freq_norm_sq) ** (-k)
    total = np.sum(weight * np.abs(f.spectrum) ** 2) / grid.box_length**grid.dimension
    return float(np.sqrt(total))


def multiplier_apply(f: LatticeField, multiplier: np.ndarray) -> LatticeField:
    """Apply a real, even Fourier multiplier to a real field.

    Evenness (m(-eta) = m(eta)) is required so the output stays real; a
    violation raises.  The imaginary residue of the inverse transform is
    checked against 1e-10 and then discarded.
    """
    grid = f.grid
    m = np.asarray(multiplier, dtype=float)
    if m.shape != grid.shape:
        raise ValueError(f"multiplier shape {m.shape} != grid shape {grid.shape}")
    if not np.allclose(m, grid.negate_freq_index(m), rtol=0.0, atol=1e-12 * max(1.0, np.max(np.abs(m)))):
        raise ValueError("reality violated: multiplier is not even in eta")
    out_spec = m * f.spectrum
    return LatticeField.from_spectrum(grid, out_spec)


# ---------------------------------------------------------------------------
# binary snapshot format: 4 little-endian int64 header (d, N, L_num, L_den)
# followed by the N**d field values as little-endian float64, C order.
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<4q")


def write_field(f: LatticeField, fh: BinaryIO) -> None:
    g = f.grid
    frac = g.box_length_exact
    fh.write(_HEADER.pack(g.dimension, g.points_per_axis, frac.numerator, frac.denominator))
    fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_field(fh: BinaryIO) -> LatticeField:
    raw = fh.read(_HEADER.size)
    if len(raw) != _HEADER.size:
        raise ValueError("truncated field header")
    d, n, num, den = _HEADER.unpack(raw)
    grid = Grid(d, n, Fraction(num, den))
    count = n**d
    payload = fh.read(8 * count)
    if len(payload) != 8 * count:
        raise ValueError("truncated field payload")
    values = np.frombuffer(payload, dtype="<f8").reshape(grid.shape).copy()
    return LatticeField(grid, values)
