"""Uniform 1-D periodic grids and complex wave fields.

Everything downstream (synthesis, propagation, Floquet analysis) works on a
periodic spatial grid x_j = x_min + j·dx, j = 0..n−1, with the conjugate
momentum grid in FFT layout.  Fields are plain complex sample arrays tagged
with their grid and a time label; operations are pure (fields are never
mutated in place).

Conventions:  norms are dx·Σ|ψ|²; the momentum-space amplitude is
ψ̂(k) = dx/√(2π) · Σ_j ψ(x_j) e^{−i k x_j}, which makes Parseval read
dk·Σ|ψ̂|² = dx·Σ|ψ|².
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ObservableError, ParameterError

_SNAPSHOT_MAGIC = b"FSC1"


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic spatial grid on the half-open interval [x_min, x_max)."""

    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise DomainError(f"empty domain: [{self.x_min}, {self.x_max})")
        if self.n_points < 16 or not _is_power_of_two(self.n_points):
            raise DomainError(
                f"n_points must be a power of two >= 16, got {self.n_points}"
            )

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_points

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_points)

    @property
    def k(self) -> np.ndarray:
        """Momentum samples in FFT layout, k ∈ [−π/dx, π/dx)."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.dx)

    @property
    def dk(self) -> float:
        return 2.0 * np.pi / self.length

    def nearest_momentum(self, p: float) -> float:
        """Closest grid-representable momentum (integer number of waves
        across the domain).  Plane-wave tests need this to stay periodic."""
        return round(p * self.length / (2.0 * np.pi)) * 2.0 * np.pi / self.length


@dataclass(frozen=True)
class PacketParams:
    """Gaussian packet exp[−(x−x0)²/w²]·exp(ipx) — deliberately unnormalized."""

    width: float
    center: float
    momentum: float

    def __post_init__(self):
        if self.width <= 0:
            raise ParameterError(f"packet width must be positive, got {self.width}")


@dataclass(frozen=True)
class WaveField:
    """Complex field samples on a grid at a given time."""

    grid: Grid1D
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.shape != (self.grid.n_points,):
            raise ParameterError(
                f"field shape {v.shape} does not match grid ({self.grid.n_points},)"
            )
        object.__setattr__(self, "values", v)

    def with_values(self, values: np.ndarray, time: float | None = None) -> "WaveField":
        return WaveField(self.grid, values, self.time if time is None else time)


def make_gaussian(grid: Grid1D, packet: PacketParams) -> WaveField:
    """Sample the (unnormalized) Gaussian packet on the grid at t = 0.

    The envelope must fit: packet support (±5 widths) clipping the domain
    edge is a parameter error, since downstream analysis assumes the field
    vanishes there.
    """
    if (packet.center - 5 * packet.width < grid.x_min
            or packet.center + 5 * packet.width > grid.x_max):
        raise ParameterError(
            "packet support extends beyond the domain: "
            f"center={packet.center}, width={packet.width}, "
            f"domain=[{grid.x_min}, {grid.x_max})"
        )
    x = grid.x
    env = np.exp(-((x - packet.center) ** 2) / packet.width**2)
    return WaveField(grid, env * np.exp(1j * packet.momentum * x), 0.0)


def norm2(field: WaveField) -> float:
    """Squared L² norm, dx·Σ|ψ|²."""
    return float(field.grid.dx * np.sum(np.abs(field.values) ** 2))


def centroid(field: WaveField) -> float:
    """Position expectation value ⟨x⟩ = dx·Σ x|ψ|² / norm2."""
    n2 = norm2(field)
    if n2 <= 0.0 or not np.isfinite(n2):
        raise ObservableError(f"centroid undefined: norm2 = {n2}")
    return float(field.grid.dx * np.sum(field.grid.x * np.abs(field.values) ** 2) / n2)


def momentum_spectrum(field: WaveField) -> tuple[np.ndarray, np.ndarray]:
    """Return (k, ψ̂(k)) sorted by ascending k.

    Normalized so that dk·Σ|ψ̂|² equals dx·Σ|ψ|² (Parseval).
    """
    grid = field.grid
    spec = grid.dx / np.sqrt(2.0 * np.pi) * np.fft.fft(field.values)
    # account for the grid origin: fft assumes samples start at x=0
    spec = spec * np.exp(-1j * grid.k * grid.x_min)
    order = np.argsort(grid.k, kind="stable")
    return grid.k[order], spec[order]


def windowed_norm(field: WaveField, lo: float, hi: float) -> float:
    """dx·Σ|ψ|² restricted to x ∈ [lo, hi)."""
    if not hi > lo:
        raise ParameterError(f"empty window [{lo}, {hi})")
    x = field.grid.x
    mask = (x >= lo) & (x < hi)
    return float(field.grid.dx * np.sum(np.abs(field.values[mask]) ** 2))


def edge_fraction(field: WaveField, fraction: float = 0.05) -> float:
    """Share of the total norm sitting in the outer `fraction` of the domain
    (split evenly between the two edges).  The propagation edge guard and the
    packet analyses use this."""
    g = field.grid
    half = 0.5 * fraction * g.length
    n2 = norm2(field)
    if n2 == 0.0:
        return 0.0
    outer = (windowed_norm(field, g.x_min, g.x_min + half)
             + windowed_norm(field, g.x_max - half, g.x_max + g.dx))
    return outer / n2


# ---------------------------------------------------------------------------
# snapshot I/O

def write_snapshot(path, field: WaveField) -> None:
    """Binary snapshot: header {magic b"FSC1", u32 n_points, f64 x_min,
    f64 dx, f64 time}, then n_points little-endian (f64 re, f64 im) pairs."""
    g = field.grid
    with open(path, "wb") as fh:
        fh.write(_SNAPSHOT_MAGIC)
        fh.write(struct.pack("<Iddd", g.n_points, g.x_min, g.dx, field.time))
        inter = np.empty(2 * g.n_points, dtype="<f8")
        inter[0::2] = field.values.real
        inter[1::2] = field.values.imag
        inter.tofile(fh)


def read_snapshot(path) -> WaveField:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _SNAPSHOT_MAGIC:
            raise ParameterError(f"not a field snapshot (magic {magic!r})")
        n, x_min, dx, time = struct.unpack("<Iddd", fh.read(28))
        raw = np.fromfile(fh, dtype="<f8", count=2 * n)
    if raw.size != 2 * n:
        raise ParameterError(f"truncated snapshot: expected {2*n} doubles, got {raw.size}")
    grid = Grid1D(x_min, x_min + n * dx, n)
    return WaveField(grid, raw[0::2] + 1j * raw[1::2], time)


def field_to_csv(path, field: WaveField) -> None:
    """CSV export with columns x, re, im, abs2."""
    x = field.grid.x
    v = field.values
    with open(path, "w", newline="\n") as fh:
        fh.write("x,re,im,abs2\n")
        for xi, vi in zip(x.tolist(), v.tolist()):
            fh.write(f"{xi!r},{vi.real!r},{vi.imag!r},{abs(vi)**2!r}\n")
