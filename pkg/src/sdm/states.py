"""The four system representations and their expectation values.

System kind          state                    <O>                          <A>
closed quantum       Wavefunction             <psi|O|psi>                  0
open quantum         DensityMatrix            Tr[rho O]                    -2 gamma <p>
closed classical     TrajectoryEnsemble       ensemble mean                0
open classical       PhaseSpaceDensity        integral O rho dx dp         -2 gamma <p>

Momentum expectations on grids are spectral; ensemble reductions use a
fixed summation order so runs are bitwise reproducible.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import singledispatch

import numpy as np

from .errors import CorruptedStateError
from .grids import Grid
from .potentials import SoftCoulombModel, solve_bound_states

__all__ = [
    "SystemKind",
    "Wavefunction",
    "DensityMatrix",
    "PhaseSpaceDensity",
    "TrajectoryEnsemble",
    "SystemState",
    "expectation_x",
    "expectation_p",
    "expectation_vprime",
    "expectation_a",
    "validate_state",
    "EigenstateSpec",
    "GaussianBlobSpec",
    "NormalEnsembleSpec",
    "init_state",
]

#: How far norm/trace/mass may drift before expectations refuse the state.
NORM_TOLERANCE = 1e-6


class SystemKind(str, enum.Enum):
    CLOSED_QUANTUM = "closed-quantum"
    OPEN_QUANTUM = "open-quantum"
    NEWTON_ENSEMBLE = "newton-ensemble"
    FOKKER_PLANCK = "fokker-planck"

    @property
    def is_open(self) -> bool:
        return self in (SystemKind.OPEN_QUANTUM, SystemKind.FOKKER_PLANCK)


@dataclass(frozen=True, eq=False)
class Wavefunction:
    grid: Grid
    amplitudes: np.ndarray  # complex, shape (n,)

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        if amp.shape != (self.grid.n,):
            raise ValueError("amplitude array does not match grid")
        object.__setattr__(self, "amplitudes", amp)

    @property
    def norm(self) -> float:
        """sum |psi|^2 dx."""
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.dx)

    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def normalized(self) -> "Wavefunction":
        return Wavefunction(self.grid, self.amplitudes / np.sqrt(self.norm))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    grid: Grid
    values: np.ndarray  # complex, shape (n, n), rho[x, x']

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.n, self.grid.n):
            raise ValueError("density matrix shape does not match grid")
        object.__setattr__(self, "values", v)

    @property
    def trace(self) -> float:
        """sum rho(x,x) dx (real part; imaginary dust is rounding)."""
        return float(np.real(np.trace(self.values)) * self.grid.dx)

    @property
    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.values - self.values.conj().T)))

    @property
    def purity(self) -> float:
        """Tr[rho^2] with continuum weights: sum |rho|^2 dx^2."""
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.dx**2)

    @classmethod
    def from_pure_state(cls, psi: Wavefunction) -> "DensityMatrix":
        amp = psi.amplitudes
        return cls(psi.grid, np.outer(amp, amp.conj()))


@dataclass(frozen=True, eq=False)
class PhaseSpaceDensity:
    grid: Grid  # must carry a momentum axis
    values: np.ndarray  # real, shape (n, n_p), rho[x, p]

    def __post_init__(self):
        if not self.grid.has_momentum_axis:
            raise ValueError("phase-space density needs a grid with a momentum axis")
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n, self.grid.n_p):
            raise ValueError("phase-space array does not match grid")
        object.__setattr__(self, "values", v)

    @property
    def mass(self) -> float:
        return float(np.sum(self.values) * self.grid.dx * self.grid.dp)

    @property
    def min_value(self) -> float:
        return float(np.min(self.values))

    def normalized(self) -> "PhaseSpaceDensity":
        return PhaseSpaceDensity(self.grid, self.values / self.mass)

    def clipped(self) -> "PhaseSpaceDensity":
        """Values floored at -1e-12 and mass renormalized (for export)."""
        v = np.maximum(self.values, -1e-12)
        return PhaseSpaceDensity(self.grid, v * (self.mass / (v.sum() * self.grid.dx * self.grid.dp)))


@dataclass(frozen=True, eq=False)
class TrajectoryEnsemble:
    positions: np.ndarray
    momenta: np.ndarray
    seed: int

    def __post_init__(self):
        x = np.asarray(self.positions, dtype=float)
        p = np.asarray(self.momenta, dtype=float)
        if x.shape != p.shape or x.ndim != 1 or x.size < 1:
            raise ValueError("positions and momenta must be equal-length 1D arrays")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p))):
            raise ValueError("ensemble contains non-finite values")
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "momenta", p)

    @property
    def n_traj(self) -> int:
        return self.positions.size


SystemState = Wavefunction | DensityMatrix | PhaseSpaceDensity | TrajectoryEnsemble


def validate_state(state: "SystemState", tol: float = NORM_TOLERANCE) -> None:
    """Raise CorruptedStateError if norm/trace/mass drifted from 1 beyond tol.

    Called per step by the run loops whenever no absorbing mask is active
    (absorbed runs legitimately decay).
    """
    if isinstance(state, Wavefunction):
        value, what = state.norm, "wavefunction norm"
    elif isinstance(state, DensityMatrix):
        value, what = state.trace, "density-matrix trace"
    elif isinstance(state, PhaseSpaceDensity):
        value, what = state.mass, "phase-space mass"
    elif isinstance(state, TrajectoryEnsemble):
        return
    else:
        raise TypeError(f"unsupported state type {type(state).__name__}")
    if not np.isfinite(value) or abs(value - 1.0) > tol:
        raise CorruptedStateError(f"{what} = {value!r} drifted beyond tolerance {tol:g}")


# -- <x> ---------------------------------------------------------------------


@singledispatch
def expectation_x(state) -> float:
    raise TypeError(f"unsupported state type {type(state).__name__}")


@expectation_x.register
def _(state: Wavefunction) -> float:
    return float(np.sum(state.grid.x * state.density()) * state.grid.dx)


@expectation_x.register
def _(state: DensityMatrix) -> float:
    return float(np.real(np.sum(state.grid.x * np.diagonal(state.values))) * state.grid.dx)


@expectation_x.register
def _(state: PhaseSpaceDensity) -> float:
    return float(np.sum(state.values.sum(axis=1) * state.grid.x) * state.grid.dx * state.grid.dp)


@expectation_x.register
def _(state: TrajectoryEnsemble) -> float:
    return float(np.mean(state.positions))


# -- <p> ---------------------------------------------------------------------


@singledispatch
def expectation_p(state) -> float:
    raise TypeError(f"unsupported state type {type(state).__name__}")


@expectation_p.register
def _(state: Wavefunction) -> float:
    amp = state.amplitudes
    p_amp = np.fft.ifft(state.grid.k * np.fft.fft(amp))
    return float(np.real(np.vdot(amp, p_amp)) * state.grid.dx)


@expectation_p.register
def _(state: DensityMatrix) -> float:
    # (p rho)(x,x') = -i d/dx rho; trace of the spectral derivative's diagonal
    import scipy.fft as _fft

    p_rho = _fft.ifft(
        state.grid.k[:, None] * _fft.fft(state.values, axis=0, workers=2),
        axis=0, workers=2,
    )
    return float(np.real(np.sum(np.diagonal(p_rho))) * state.grid.dx)


@expectation_p.register
def _(state: PhaseSpaceDensity) -> float:
    return float(np.sum(state.values.sum(axis=0) * state.grid.p) * state.grid.dx * state.grid.dp)


@expectation_p.register
def _(state: TrajectoryEnsemble) -> float:
    return float(np.mean(state.momenta))


# -- <V'(x)> -----------------------------------------------------------------


@singledispatch
def expectation_vprime(state, model: SoftCoulombModel) -> float:
    raise TypeError(f"unsupported state type {type(state).__name__}")


@expectation_vprime.register
def _(state: Wavefunction, model) -> float:
    return float(np.sum(model.gradient(state.grid.x) * state.density()) * state.grid.dx)


@expectation_vprime.register
def _(state: DensityMatrix, model) -> float:
    vp = model.gradient(state.grid.x)
    return float(np.real(np.sum(vp * np.diagonal(state.values))) * state.grid.dx)


@expectation_vprime.register
def _(state: PhaseSpaceDensity, model) -> float:
    vp = model.gradient(state.grid.x)
    return float(np.sum(state.values.sum(axis=1) * vp) * state.grid.dx * state.grid.dp)


@expectation_vprime.register
def _(state: TrajectoryEnsemble, model) -> float:
    return float(np.mean(model.gradient(state.positions)))


# -- <A> (environment coupling in the momentum equation) ----------------------


def expectation_a(state: SystemState, gamma: float) -> float:
    """-2 gamma <p> for open-system states, exactly 0 for closed ones."""
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")
    if isinstance(state, (DensityMatrix, PhaseSpaceDensity)):
        if gamma == 0.0:
            return 0.0
        return -2.0 * gamma * expectation_p(state)
    if isinstance(state, (Wavefunction, TrajectoryEnsemble)):
        return 0.0
    raise TypeError(f"unsupported state type {type(state).__name__}")


# -- initial states ------------------------------------------------------------


@dataclass(frozen=True)
class EigenstateSpec:
    """Bound eigenstate by principal quantum number (n = 1 is the ground state)."""

    n: int = 1


@dataclass(frozen=True)
class GaussianBlobSpec:
    """Gaussian phase-space density centered at (x0, p0)."""

    x0: float = 0.0
    p0: float = 0.0
    sigma_x: float = 1.0
    sigma_p: float = 1.0


@dataclass(frozen=True)
class NormalEnsembleSpec:
    """Positions and momenta i.i.d. Normal(0, 1) from the given seed."""

    seed: int = 42
    n_traj: int = 10_000


InitialStateSpec = EigenstateSpec | GaussianBlobSpec | NormalEnsembleSpec


def init_state(
    kind: SystemKind,
    model: SoftCoulombModel,
    spec: InitialStateSpec,
    grid: Grid,
) -> SystemState:
    """Build the initial state for a scenario on its simulation grid."""
    kind = SystemKind(kind)
    if kind is SystemKind.CLOSED_QUANTUM:
        if not isinstance(spec, EigenstateSpec):
            raise ValueError("closed-quantum runs start from an eigenstate")
        sol = solve_bound_states(model, grid.spatial(), spec.n)
        return Wavefunction(grid.spatial(), sol.state(spec.n).astype(complex))
    if kind is SystemKind.OPEN_QUANTUM:
        if not isinstance(spec, EigenstateSpec):
            raise ValueError("open-quantum runs start from a pure eigenstate")
        sol = solve_bound_states(model, grid.spatial(), spec.n)
        psi = Wavefunction(grid.spatial(), sol.state(spec.n).astype(complex))
        return DensityMatrix.from_pure_state(psi)
    if kind is SystemKind.NEWTON_ENSEMBLE:
        if not isinstance(spec, NormalEnsembleSpec):
            raise ValueError("ensemble runs need a NormalEnsembleSpec")
        rng = np.random.default_rng(spec.seed)
        x = rng.standard_normal(spec.n_traj)
        p = rng.standard_normal(spec.n_traj)
        return TrajectoryEnsemble(x, p, spec.seed)
    if kind is SystemKind.FOKKER_PLANCK:
        if not isinstance(spec, GaussianBlobSpec):
            raise ValueError("Fokker-Planck runs need a GaussianBlobSpec")
        if not grid.has_momentum_axis:
            raise ValueError("Fokker-Planck grid needs a momentum axis")
        if spec.sigma_x <= 0 or spec.sigma_p <= 0:
            raise ValueError("blob widths must be positive")
        gx = np.exp(-0.5 * ((grid.x - spec.x0) / spec.sigma_x) ** 2)
        gp = np.exp(-0.5 * ((grid.p - spec.p0) / spec.sigma_p) ** 2)
        rho = np.outer(gx, gp)
        rho /= rho.sum() * grid.dx * grid.dp
        return PhaseSpaceDensity(grid, rho)
    raise ValueError(f"unknown system kind {kind!r}")
