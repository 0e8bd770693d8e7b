"""Uniformly sampled real signals: the reference drive pulse, Fourier spectra,
band-limit filtering, finite-difference derivatives and the relative-distance
tracking metric.

All signals in one scenario live on a single uniform time grid (t0 = 0,
step dt, n samples), which keeps the tracking update free of interpolation
error. Atomic units throughout.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateTargetError, GridMismatchError

__all__ = [
    "TimeSeries",
    "Spectrum",
    "DrivePulse",
    "make_reference_pulse",
    "fourier_spectrum",
    "inverse_fourier_spectrum",
    "bandlimit_filter",
    "relative_distance",
    "derivatives",
    "write_timeseries_csv",
    "read_timeseries_csv",
    "write_spectrum_csv",
]

#: Grid-equality tolerance (relative) for dt/t0 comparisons.
_GRID_RTOL = 1e-12


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """A real signal sampled uniformly at t0 + k*dt, k = 0..n-1."""

    t0: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 2:
            raise ValueError("a time series needs at least 2 real samples")
        if not np.all(np.isfinite(vals)):
            raise ValueError("time series contains non-finite samples")
        object.__setattr__(self, "values", _frozen_array(vals, float))

    def __len__(self) -> int:
        return self.values.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))

    @property
    def duration(self) -> float:
        return self.dt * (len(self) - 1)

    def same_grid(self, other: "TimeSeries") -> bool:
        return (
            len(self) == len(other)
            and abs(self.dt - other.dt) <= _GRID_RTOL * self.dt
            and abs(self.t0 - other.t0) <= _GRID_RTOL * max(1.0, abs(self.t0))
        )

    def with_values(self, values) -> "TimeSeries":
        """Same grid, new samples."""
        return TimeSeries(self.t0, self.dt, values)


def require_same_grid(a: TimeSeries, b: TimeSeries, what: str = "series") -> None:
    if not a.same_grid(b):
        raise GridMismatchError(
            f"{what} grids differ: (t0={a.t0}, dt={a.dt}, n={len(a)}) "
            f"vs (t0={b.t0}, dt={b.dt}, n={len(b)})"
        )


@dataclass(frozen=True, eq=False)
class Spectrum:
    """DFT of a time series; amplitudes in numpy fft bin order."""

    d_omega: float
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.d_omega <= 0:
            raise ValueError("d_omega must be positive")
        object.__setattr__(
            self, "amplitudes", _frozen_array(self.amplitudes, complex)
        )

    def __len__(self) -> int:
        return self.amplitudes.size

    @property
    def abs_amplitudes(self) -> np.ndarray:
        return np.abs(self.amplitudes)

    @property
    def omegas(self) -> np.ndarray:
        """Signed angular frequencies in fft bin order."""
        n = len(self)
        return np.fft.fftfreq(n, d=2.0 * np.pi / (n * self.d_omega))

    def amplitude_near(self, omega: float, half_width: float = 0.0) -> float:
        """Peak |amplitude| over positive-frequency bins within half_width of omega."""
        n = len(self)
        k = np.arange(n // 2 + 1)
        w = k * self.d_omega
        mask = np.abs(w - omega) <= max(half_width, 0.5 * self.d_omega)
        return float(np.max(np.abs(self.amplitudes[: n // 2 + 1][mask])))


@dataclass(frozen=True)
class DrivePulse:
    """Carrier at omega0 under a cos^2 envelope that closes at t_f."""

    amplitude: float
    carrier: float
    t_f: float
    envelope: str = "cos2"

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        if self.carrier <= 0 or self.t_f <= 0:
            raise ValueError("carrier frequency and t_f must be positive")
        if self.envelope != "cos2":
            raise ValueError(f"unsupported envelope kind {self.envelope!r}")

    def envelope_at(self, t) -> np.ndarray:
        return np.cos(np.pi * np.asarray(t) / (2.0 * self.t_f)) ** 2

    def __call__(self, t) -> np.ndarray:
        return self.amplitude * np.cos(self.carrier * np.asarray(t)) * self.envelope_at(t)

    def sample(self, dt: float) -> TimeSeries:
        if dt <= 0 or dt >= self.t_f:
            raise ValueError(f"need 0 < dt < t_f, got dt={dt}, t_f={self.t_f}")
        n_steps = int(round(self.t_f / dt))
        t = dt * np.arange(n_steps + 1)
        return TimeSeries(0.0, dt, self(t))


def make_reference_pulse(e0: float, omega0: float, t_f: float, dt: float) -> TimeSeries:
    """E(t) = e0 cos(omega0 t) cos^2(pi t / (2 t_f)) sampled on [0, t_f]."""
    return DrivePulse(e0, omega0, t_f).sample(dt)


def fourier_spectrum(s: TimeSeries) -> Spectrum:
    """Unnormalized DFT; Parseval holds as sum|x|^2 = sum|X|^2 / n."""
    n = len(s)
    return Spectrum(2.0 * np.pi / (n * s.dt), np.fft.fft(s.values))


def inverse_fourier_spectrum(spec: Spectrum, t0: float = 0.0) -> TimeSeries:
    """Inverse DFT back to a real series (imaginary dust discarded)."""
    n = len(spec)
    dt = 2.0 * np.pi / (n * spec.d_omega)
    return TimeSeries(t0, dt, np.fft.ifft(spec.amplitudes).real)


def bandlimit_filter(s: TimeSeries, omega_cut: float) -> TimeSeries:
    """Zero every DFT bin with |omega| > omega_cut; exact real output.

    omega_cut must lie strictly below the Nyquist frequency pi/dt.
    """
    nyquist = np.pi / s.dt
    if not 0.0 < omega_cut < nyquist:
        raise ValueError(
            f"omega_cut must be in (0, Nyquist={nyquist:.6g}), got {omega_cut}"
        )
    n = len(s)
    spec = np.fft.rfft(s.values)
    omega = 2.0 * np.pi * np.fft.rfftfreq(n, d=s.dt)
    spec[omega > omega_cut] = 0.0
    return s.with_values(np.fft.irfft(spec, n=n))


def relative_distance(y: TimeSeries, target: TimeSeries) -> float:
    """d^2 = integral |y - Y|^2 dt / integral |Y|^2 dt (trapezoid rule)."""
    require_same_grid(y, target)
    denom = np.trapezoid(target.values**2, dx=target.dt)
    if denom <= 0.0:
        raise DegenerateTargetError("target has zero L2 norm")
    num = np.trapezoid((y.values - target.values) ** 2, dx=y.dt)
    return float(num / denom)


def derivatives(y: TimeSeries) -> tuple[TimeSeries, TimeSeries]:
    """First and second time derivative by second-order finite differences.

    Central stencils interiorly, one-sided second-order at the endpoints
    (numpy.gradient with edge_order=2, applied twice for the second
    derivative).
    """
    if len(y) < 5:
        raise ValueError("need at least 5 samples to differentiate")
    d1 = np.gradient(y.values, y.dt, edge_order=2)
    d2 = np.gradient(d1, y.dt, edge_order=2)
    return y.with_values(d1), y.with_values(d2)


# ---------------------------------------------------------------------------
# CSV export (full double precision; repr round-trips exactly)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_timeseries_csv(s: TimeSeries, path) -> None:
    """Header `t,value`, one row per sample."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "value"])
        for t, v in zip(s.times, s.values):
            w.writerow([_fmt(t), _fmt(v)])


def read_timeseries_csv(path) -> TimeSeries:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns t,value")
    t, v = data[:, 0], data[:, 1]
    if len(t) < 2:
        raise ValueError(f"{path}: need at least 2 samples")
    dt = t[1] - t[0]
    if not np.allclose(np.diff(t), dt, rtol=1e-9, atol=1e-12 * max(dt, 1.0)):
        raise ValueError(f"{path}: time grid is not uniform")
    return TimeSeries(float(t[0]), float(dt), v)


def write_spectrum_csv(spec: Spectrum, path, omega0: float) -> None:
    """Positive-frequency half only, with `omega_over_omega0,abs_amplitude`."""
    if omega0 <= 0:
        raise ValueError("omega0 must be positive")
    path = Path(path)
    n = len(spec)
    k = np.arange(n // 2 + 1)
    omega = k * spec.d_omega
    amp = np.abs(spec.amplitudes[: n // 2 + 1])
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["omega_over_omega0", "abs_amplitude"])
        for o, a in zip(omega / omega0, amp):
            w.writerow([_fmt(o), _fmt(a)])
