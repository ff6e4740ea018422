"""Periodic fields on the unit torus and their spectral operators.

The torus is T^2 = [-1/2, 1/2)^2.  A field of resolution ``n`` stores the
sample at ``x = (-1/2 + a/n, -1/2 + b/n)`` in ``data[a, b]`` (axis 0 is the
first coordinate).  Plane waves are ``exp(2 pi i k.x)`` with integer ``k`` so
that ``-Laplacian`` has the multiplier ``4 pi^2 |k|^2``.

The zero-mean Green's function ``G`` (``-Laplacian G = delta - 1``) is
available both as a convolution on grids and pointwise through an Ewald
split of its lattice sum.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft, special

__all__ = [
    "GridField",
    "SpectralField",
    "transform",
    "inverse_transform",
    "wavenumbers",
    "laplacian",
    "gradient",
    "green_convolve",
    "helmholtz_solve",
    "green_regular_part_origin",
    "green_regular_part",
    "green_gradient",
    "green_point",
    "grid_coordinates",
    "shift",
]

TWO_PI = 2.0 * np.pi


def _check_resolution(n: int) -> None:
    if n < 8 or n % 2:
        raise ValueError(f"resolution must be even and >= 8, got {n}")


@dataclass(frozen=True)
class GridField:
    """An immutable periodic real field sampled on an n x n grid."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"GridField needs a square 2-D array, got shape {arr.shape}")
        _check_resolution(arr.shape[0])
        if not np.all(np.isfinite(arr)):
            raise ValueError("GridField samples must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    def mean(self) -> float:
        return float(self.data.mean())

    @classmethod
    def from_function(cls, func, n: int) -> "GridField":
        """Sample ``func(x1, x2)`` on the grid."""
        x1, x2 = grid_coordinates(n)
        return cls(np.broadcast_to(func(x1, x2), (n, n)))

    @classmethod
    def constant(cls, value: float, n: int) -> "GridField":
        return cls(np.full((n, n), float(value)))

    def __add__(self, other):
        return GridField(self.data + _raw(other))

    def __sub__(self, other):
        return GridField(self.data - _raw(other))

    def __mul__(self, other):
        return GridField(self.data * _raw(other))

    __rmul__ = __mul__


def _raw(x):
    return x.data if isinstance(x, GridField) else x


@dataclass(frozen=True)
class SpectralField:
    """Fourier coefficients ``c_k`` of a field, ``f(x) = sum_k c_k exp(2 pi i k.x)``.

    ``coeffs`` is stored in numpy FFT order (index ``j`` is frequency ``j`` for
    ``j < n/2`` and ``j - n`` otherwise), so frequencies cover
    ``{-n/2, ..., n/2 - 1}`` on each axis.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.coeffs, dtype=np.complex128, copy=True)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("SpectralField needs a square 2-D array")
        _check_resolution(arr.shape[0])
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    def coeff(self, k1: int, k2: int) -> complex:
        n = self.n
        if not (-n // 2 <= k1 < n // 2 and -n // 2 <= k2 < n // 2):
            raise IndexError(f"frequency ({k1}, {k2}) outside the resolved band")
        return complex(self.coeffs[k1 % n, k2 % n])


@lru_cache(maxsize=None)
def wavenumbers(n: int) -> np.ndarray:
    """Integer frequencies in numpy FFT order."""
    return np.fft.fftfreq(n, d=1.0 / n)


@lru_cache(maxsize=None)
def _phase(n: int) -> np.ndarray:
    # Sample a sits at x = -1/2 + a/n, so the DFT picks up exp(i pi k) = (-1)^k.
    k = wavenumbers(n)
    sign = np.where(k.astype(int) % 2 == 0, 1.0, -1.0)
    return np.outer(sign, sign)


@lru_cache(maxsize=None)
def _rk2(n: int) -> np.ndarray:
    """|k|^2 on the half-spectrum layout used by ``rfft2``."""
    k1 = wavenumbers(n)[:, None]
    k2 = np.arange(n // 2 + 1, dtype=np.float64)[None, :]
    out = k1**2 + k2**2
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _green_multiplier(n: int) -> np.ndarray:
    k2 = _rk2(n)
    mult = np.zeros_like(k2)
    nz = k2 > 0
    mult[nz] = 1.0 / (4.0 * np.pi**2 * k2[nz])
    mult.setflags(write=False)
    return mult


def grid_coordinates(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Sample coordinates ``(x1, x2)`` as broadcastable column/row arrays."""
    _check_resolution(n)
    x = -0.5 + np.arange(n) / n
    return x[:, None], x[None, :]


def transform(f: GridField) -> SpectralField:
    n = f.n
    return SpectralField(fft.fft2(f.data) / (n * n) * _phase(n))


def inverse_transform(F: SpectralField, n: int | None = None) -> GridField:
    if n is not None and n != F.n:
        raise ValueError(f"resolution mismatch: spectrum has n={F.n}, requested {n}")
    m = F.n
    return GridField(np.real(fft.ifft2(F.coeffs * _phase(m) * (m * m))))


# ----------------------------------------------------------------------------
# Array-level operators (used by the time stepper; no validation overhead)
# ----------------------------------------------------------------------------

def apply_multiplier(a: np.ndarray, mult: np.ndarray) -> np.ndarray:
    """Apply a real Fourier multiplier given on the rfft2 half-spectrum."""
    return fft.irfft2(fft.rfft2(a) * mult, s=a.shape)


def green_array(a: np.ndarray) -> np.ndarray:
    return apply_multiplier(a, _green_multiplier(a.shape[0]))


def laplacian_array(a: np.ndarray) -> np.ndarray:
    return apply_multiplier(a, -4.0 * np.pi**2 * _rk2(a.shape[0]))


def helmholtz_array(a: np.ndarray, coef: float) -> np.ndarray:
    return apply_multiplier(a, 1.0 / (1.0 + coef * 4.0 * np.pi**2 * _rk2(a.shape[0])))


def gradient_array(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = a.shape[0]
    A = fft.rfft2(a)
    k1 = wavenumbers(n)[:, None].copy()
    k2 = np.arange(n // 2 + 1, dtype=np.float64)[None, :]
    # The Nyquist rows carry no odd-derivative information for real fields.
    k1[n // 2] = 0.0
    k2 = np.where(k2 == n // 2, 0.0, k2)
    g1 = fft.irfft2(A * (1j * TWO_PI * k1), s=a.shape)
    g2 = fft.irfft2(A * (1j * TWO_PI * k2), s=a.shape)
    return g1, g2


def dirichlet_energy_array(a: np.ndarray) -> float:
    """Exact spectral value of ``int |grad a|^2`` over the unit torus."""
    n = a.shape[0]
    A = fft.rfft2(a) / (n * n)
    w = np.full(A.shape, 2.0)
    w[:, 0] = 1.0
    w[:, -1] = 1.0  # n even: the k2 = n/2 column is its own mirror
    return float(np.sum(w * 4.0 * np.pi**2 * _rk2(n) * np.abs(A) ** 2))


def dealias_mask(n: int) -> np.ndarray:
    """2/3-rule truncation mask on the rfft2 layout."""
    k1 = np.abs(wavenumbers(n))[:, None]
    k2 = np.arange(n // 2 + 1)[None, :]
    cut = n / 3.0
    return ((k1 < cut) & (k2 < cut)).astype(np.float64)


# ----------------------------------------------------------------------------
# GridField-level API
# ----------------------------------------------------------------------------

def laplacian(f: GridField) -> GridField:
    return GridField(laplacian_array(f.data))


def gradient(f: GridField) -> tuple[GridField, GridField]:
    g1, g2 = gradient_array(f.data)
    return GridField(g1), GridField(g2)


def green_convolve(f: GridField) -> GridField:
    """``G * f``: multiplier ``1/(4 pi^2 |k|^2)`` off zero, exactly 0 at ``k = 0``."""
    return GridField(green_array(f.data))


def helmholtz_solve(f: GridField, a: float) -> GridField:
    """Return ``(I - a Laplacian)^{-1} f`` (exact on every Fourier mode)."""
    if a < 0:
        raise ValueError("helmholtz_solve requires a >= 0")
    return GridField(helmholtz_array(f.data, a))


def shift(f: GridField, s1: int, s2: int) -> GridField:
    """Translate a field by whole grid cells."""
    return GridField(np.roll(f.data, (s1, s2), axis=(0, 1)))


# ----------------------------------------------------------------------------
# Ewald evaluation of the torus Green's function
# ----------------------------------------------------------------------------
#
# With 1/(4 pi^2 k^2) = int_0^inf exp(-4 pi^2 k^2 t) dt split at t0 = 1/(4 alpha):
#   G(x) = sum_{k != 0} exp(-pi^2 k^2 / alpha) cos(2 pi k.x) / (4 pi^2 k^2)
#        + (1/4pi) sum_{m in Z^2} E1(alpha |x - m|^2) - 1/(4 alpha).

_EWALD_TOL = 1e-16


def _ewald_ranges(alpha: float) -> tuple[int, int]:
    # Real-space terms decay like exp(-alpha r^2)/(alpha r^2); reciprocal terms
    # like exp(-pi^2 k^2/alpha)/k^2.  Keep every shell above the tolerance.
    r_max = np.sqrt(-np.log(_EWALD_TOL) / alpha) + 1.0
    k_max = np.sqrt(-np.log(_EWALD_TOL) * alpha) / np.pi + 1.0
    return int(np.ceil(r_max)) + 1, int(np.ceil(k_max)) + 1


def _ewald_parts(x: np.ndarray, alpha: float, include_origin_image: bool) -> np.ndarray:
    """Ewald sum at points ``x`` of shape (..., 2), excluding the singular term if asked."""
    r_cut, k_cut = _ewald_ranges(alpha)
    x = np.asarray(x, dtype=np.float64)
    out = np.full(x.shape[:-1], -1.0 / (4.0 * alpha))

    ks = np.arange(-k_cut, k_cut + 1)
    K1, K2 = np.meshgrid(ks, ks, indexing="ij")
    K1, K2 = K1.ravel(), K2.ravel()
    nz = (K1 != 0) | (K2 != 0)
    K1, K2 = K1[nz], K2[nz]
    ksq = (K1**2 + K2**2).astype(np.float64)
    weight = np.exp(-np.pi**2 * ksq / alpha) / (4.0 * np.pi**2 * ksq)
    phase = TWO_PI * (x[..., 0, None] * K1 + x[..., 1, None] * K2)
    out = out + np.sum(weight * np.cos(phase), axis=-1)

    ms = np.arange(-r_cut, r_cut + 1)
    M1, M2 = np.meshgrid(ms, ms, indexing="ij")
    M1, M2 = M1.ravel(), M2.ravel()
    d1 = x[..., 0, None] - M1
    d2 = x[..., 1, None] - M2
    r2 = d1**2 + d2**2
    if not include_origin_image:
        r2 = np.where((M1 == 0) & (M2 == 0), np.inf, r2)
    out = out + np.sum(special.exp1(alpha * r2), axis=-1) / (4.0 * np.pi)
    return out


def _reduce(x: np.ndarray) -> np.ndarray:
    """Map displacements to the fundamental cell [-1/2, 1/2)^2."""
    return x - np.floor(x + 0.5)


def green_point(x, alpha: float = 1.0) -> np.ndarray | float:
    """Evaluate ``G_{T^2}(x)`` for one displacement (shape (2,)) or many (shape (..., 2))."""
    arr = _reduce(np.asarray(x, dtype=np.float64))
    if arr.shape[-1] != 2:
        raise ValueError("displacements must have a trailing axis of length 2")
    if np.any(np.hypot(arr[..., 0], arr[..., 1]) == 0.0):
        raise ValueError("G is singular at lattice points")
    out = _ewald_parts(arr, alpha, include_origin_image=True)
    return float(out) if out.ndim == 0 else out


def green_regular_part_origin(alpha: float = 1.0) -> float:
    """``R(0) = lim_{x->0} [G(x) + (1/2pi) log|x|]`` for the unit torus."""
    # E1(z) = -gamma - log z + O(z) gives the origin image's finite part.
    rest = _ewald_parts(np.zeros(2), alpha, include_origin_image=False)
    return float(rest + (-np.euler_gamma - np.log(alpha)) / (4.0 * np.pi))


def _ein(z: np.ndarray) -> np.ndarray:
    """Entire function ``Ein(z) = E1(z) + log z + gamma``, accurate down to z = 0."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    small = z < 1.0
    zs = z[small]
    term = zs.copy()
    acc = zs.copy()
    for k in range(2, 30):
        term = -term * zs * (k - 1) / (k * k)
        acc = acc + term
    out[small] = acc
    zl = z[~small]
    out[~small] = special.exp1(zl) + np.log(zl) + np.euler_gamma
    return out


def green_regular_part(x, alpha: float = 1.0) -> np.ndarray | float:
    """``R(x) = G(x) + (1/2pi) log|x|`` near the origin, smooth through ``x = 0``.

    ``x`` is used as given (no reduction to the fundamental cell), so the
    logarithm refers to the distance to the origin itself.
    """
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape[-1] != 2:
        raise ValueError("displacements must have a trailing axis of length 2")
    rest = _ewald_parts(arr, alpha, include_origin_image=False)
    r2 = arr[..., 0] ** 2 + arr[..., 1] ** 2
    out = rest + (-np.euler_gamma - np.log(alpha) + _ein(alpha * r2)) / (4.0 * np.pi)
    return float(out) if out.ndim == 0 else out


def green_gradient(x, alpha: float = 1.0) -> np.ndarray:
    """Gradient of ``G_{T^2}`` at displacements of shape (2,) or (..., 2)."""
    arr = _reduce(np.asarray(x, dtype=np.float64))
    if arr.shape[-1] != 2:
        raise ValueError("displacements must have a trailing axis of length 2")
    if np.any(np.hypot(arr[..., 0], arr[..., 1]) == 0.0):
        raise ValueError("G is singular at lattice points")
    r_cut, k_cut = _ewald_ranges(alpha)

    ks = np.arange(-k_cut, k_cut + 1)
    K1, K2 = np.meshgrid(ks, ks, indexing="ij")
    K1, K2 = K1.ravel(), K2.ravel()
    nz = (K1 != 0) | (K2 != 0)
    K1, K2 = K1[nz], K2[nz]
    ksq = (K1**2 + K2**2).astype(np.float64)
    weight = np.exp(-np.pi**2 * ksq / alpha) / (4.0 * np.pi**2 * ksq)
    s = -TWO_PI * weight * np.sin(TWO_PI * (arr[..., 0, None] * K1 + arr[..., 1, None] * K2))
    g1 = np.sum(s * K1, axis=-1)
    g2 = np.sum(s * K2, axis=-1)

    # d/dx (1/4pi) E1(alpha |d|^2) = -(1/2pi) exp(-alpha |d|^2) d / |d|^2
    ms = np.arange(-r_cut, r_cut + 1)
    M1, M2 = np.meshgrid(ms, ms, indexing="ij")
    M1, M2 = M1.ravel(), M2.ravel()
    d1 = arr[..., 0, None] - M1
    d2 = arr[..., 1, None] - M2
    r2 = d1**2 + d2**2
    f = -np.exp(-alpha * r2) / (TWO_PI * r2)
    g1 = g1 + np.sum(f * d1, axis=-1)
    g2 = g2 + np.sum(f * d2, axis=-1)
    return np.stack([g1, g2], axis=-1)
