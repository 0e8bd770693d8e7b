"""One-time-step propagators for the four system kinds, plus the driven
full-run loop that records the induced dipole signal.

Every stepper consumes the field at the interval midpoint,
(E(t) + E(t+dt)) / 2, which is what makes the discrete Ehrenfest chain

    d<x>/dt = <p>,   d<p>/dt = -<V'> + E + <A>

hold to second order (and, for the position increment, exactly) for all
four dynamics.  Schemes:

closed quantum   second-order split-operator (spectral kinetic factor)
open quantum     Caldeira-Leggett: split-operator unitary part on both
                 indices; decoherence exp(-chi (x-x')^2 dt) exactly;
                 momentum damping as a second-order spectral series of the
                 off-diagonal contraction flow rho(u,v) -> rho(u, v e^{-2 gamma dt})
closed classical velocity Verlet per trajectory
open classical   Fokker-Planck via Strang splitting: spectral shear
                 transport in x, spectral momentum kick + exact Fourier
                 diffusion factor, friction as a conservative spectral
                 series of d/dp(2 gamma p rho)
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.fft as _fft

#: workers for the batched 2D transforms; per-transform arithmetic is
#: identical regardless, so results stay bitwise deterministic
_WORKERS = 2


def _fft_axis(a, axis):
    return _fft.fft(a, axis=axis, workers=_WORKERS)


def _ifft_axis(a, axis):
    return _fft.ifft(a, axis=axis, workers=_WORKERS)

from .errors import (
    BoxOverflowError,
    StepperInstabilityError,
    TrajectoryOverflowError,
)
from .grids import Grid
from .potentials import SoftCoulombModel
from .signals import TimeSeries
from .states import (
    DensityMatrix,
    PhaseSpaceDensity,
    SystemKind,
    SystemState,
    TrajectoryEnsemble,
    Wavefunction,
    expectation_a,
    expectation_p,
    expectation_vprime,
    expectation_x,
    validate_state,
)

__all__ = [
    "StepperConfig",
    "AbsorberSpec",
    "DrivenRunResult",
    "step_closed_quantum",
    "step_open_quantum",
    "step_newton",
    "step_fokker_planck",
    "run_driven",
    "stepper_for",
    "FS_PER_AU_TIME",
    "BOLTZMANN_AU_PER_K",
    "GAMMA_242FS",
    "KT_100K",
    "CHI_242FS_100K",
    "damping_rate_au",
    "decoherence_rate_au",
]

log = logging.getLogger(__name__)

# Unit conversions: 1 a.u. of time = 0.0241888 fs, k_B = 3.16681e-6 a.u./K.
FS_PER_AU_TIME = 0.0241888
BOLTZMANN_AU_PER_K = 3.16681e-6


def damping_rate_au(damping_time_fs: float) -> float:
    """gamma = 1 / (damping time) converted from fs to a.u."""
    if damping_time_fs <= 0:
        raise ValueError("damping time must be positive")
    return FS_PER_AU_TIME / damping_time_fs


def decoherence_rate_au(gamma: float, temperature_k: float) -> float:
    """chi = 2 gamma k T."""
    if temperature_k < 0:
        raise ValueError("temperature must be non-negative")
    return 2.0 * gamma * BOLTZMANN_AU_PER_K * temperature_k


#: gamma for a 242 fs amplitude damping time (~9.99e-5 a.u.).
GAMMA_242FS = damping_rate_au(242.0)
#: k T at 100 K (~3.167e-4 a.u.).
KT_100K = 100.0 * BOLTZMANN_AU_PER_K
#: chi = 2 gamma k T for the pair above (~6.33e-8 a.u.).
CHI_242FS_100K = decoherence_rate_au(GAMMA_242FS, 100.0)


@dataclass(frozen=True)
class AbsorberSpec:
    """cos^(1/8) boundary mask starting at start_fraction of the half-width.

    Exploratory only: absorbing the wavefunction breaks norm conservation
    and the <x> bookkeeping the tracking update relies on.
    """

    start_fraction: float = 0.9

    def __post_init__(self):
        if not 0.0 < self.start_fraction < 1.0:
            raise ValueError("start_fraction must be in (0, 1)")


@dataclass(frozen=True)
class StepperConfig:
    """Time step and open-system parameters (all a.u.)."""

    dt: float
    gamma: float = 0.0
    chi: float = 0.0
    diffusion: float = 0.0
    absorber: AbsorberSpec | None = None
    boundary_tol: float = 1e-6   # abort when this much density sits at the box edge
    trace_tol: float = 1e-6      # per-step trace/mass drift that counts as instability
    negativity_abort: float = 1e-3  # phase-space negativity relative to the peak

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        for name in ("gamma", "chi", "diffusion"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


# ---------------------------------------------------------------------------
# cached spectral factors


@lru_cache(maxsize=64)
def _kinetic_factor(grid: Grid, dt: float) -> np.ndarray:
    """exp(-i (k^2/2) dt): free evolution for time dt."""
    f = np.exp(-0.5j * dt * grid.k**2)
    f.setflags(write=False)
    return f


@lru_cache(maxsize=64)
def _potential_half(grid: Grid, model: SoftCoulombModel, dt: float) -> np.ndarray:
    f = np.exp(-0.5j * dt * model.potential(grid.x))
    f.setflags(write=False)
    return f


@lru_cache(maxsize=64)
def _absorber_mask(grid: Grid, spec: AbsorberSpec) -> np.ndarray:
    half = 0.5 * (grid.x_max - grid.x_min)
    center = 0.5 * (grid.x_max + grid.x_min)
    start = spec.start_fraction * half
    r = np.abs(grid.x - center)
    mask = np.ones(grid.n)
    edge = r > start
    mask[edge] = np.cos(0.5 * np.pi * (r[edge] - start) / (half - start)) ** 0.125
    mask.setflags(write=False)
    return mask


@lru_cache(maxsize=64)
def _decoherence_factor(grid: Grid, chi_tau: float) -> np.ndarray:
    v = grid.x[:, None] - grid.x[None, :]
    f = np.exp(-chi_tau * v**2)
    f.setflags(write=False)
    return f


def _boundary_fraction(density: np.ndarray, grid: Grid) -> float:
    strip = max(2, grid.n // 64)
    return float((density[:strip].sum() + density[-strip:].sum()) * grid.dx)


# ---------------------------------------------------------------------------
# closed quantum


def step_closed_quantum(
    psi: Wavefunction, model: SoftCoulombModel, e_mid: float, cfg: StepperConfig
) -> Wavefunction:
    """Strang split-operator step under H = p^2/2 + V(x) - x E_mid."""
    grid = psi.grid
    half = _potential_half(grid, model, cfg.dt) * np.exp(
        0.5j * cfg.dt * e_mid * grid.x
    )
    amp = half * psi.amplitudes
    amp = np.fft.ifft(_kinetic_factor(grid, cfg.dt) * np.fft.fft(amp))
    amp *= half
    if cfg.absorber is not None:
        amp = amp * _absorber_mask(grid, cfg.absorber)
    out = Wavefunction(grid, amp)
    leak = _boundary_fraction(out.density(), grid)
    if cfg.absorber is None and leak > cfg.boundary_tol:
        raise BoxOverflowError(
            f"boundary density {leak:.3e} > {cfg.boundary_tol:.1e}; enlarge the box",
            leak=leak,
        )
    return out


# ---------------------------------------------------------------------------
# open quantum (Caldeira-Leggett)


def _off_diagonal_stretch(
    rho: np.ndarray, grid: Grid, mu: float, order: int = 1
) -> np.ndarray:
    """exp(-mu * v d/dv) rho as a short series, v = x - x'.

    This is the momentum-damping flow rho(u, v) -> rho(u, v e^{-mu});
    spectral derivatives keep it trace- and Hermiticity-preserving to
    rounding.  mu = gamma dt ~ 1e-6 in production, so a first-order term
    per half-step leaves only an O((gamma dt)^2) remainder per step.
    """
    if mu == 0.0:
        return rho
    k = grid.k_odd
    v_half = 0.5 * (grid.x[:, None] - grid.x[None, :])

    def v_dv(arr: np.ndarray) -> np.ndarray:
        d0 = _ifft_axis(1j * k[:, None] * _fft_axis(arr, 0), 0)
        d1 = _ifft_axis(1j * k[None, :] * _fft_axis(arr, 1), 1)
        return v_half * (d0 - d1)

    a1 = v_dv(rho)
    out = rho - mu * a1
    if order >= 2:
        out = out + 0.5 * mu**2 * v_dv(a1)
    return out


def step_open_quantum(
    rho: DensityMatrix, model: SoftCoulombModel, e_mid: float, cfg: StepperConfig
) -> DensityMatrix:
    """One Caldeira-Leggett step,

        d rho/dt = -i[H, rho] - i gamma [x, {p, rho}] - chi [x, [x, rho]],

    composed symmetrically: damping(dt/2), decoherence(dt/2), unitary
    split-operator(dt), decoherence(dt/2), damping(dt/2), so the discrete
    Ehrenfest chain stays second order in dt even at large gamma."""
    grid = rho.grid
    dt = cfg.dt
    values = rho.values

    if cfg.gamma:
        values = _off_diagonal_stretch(values, grid, cfg.gamma * dt)
    if cfg.chi:
        values = values * _decoherence_factor(grid, 0.5 * cfg.chi * dt)

    # unitary part: phases act oppositely on the two indices
    a = _potential_half(grid, model, dt) * np.exp(0.5j * dt * e_mid * grid.x)
    phase = np.outer(a, a.conj())
    values = values * phase
    kin = _kinetic_factor(grid, dt)
    values = _ifft_axis(kin[:, None] * _fft_axis(values, 0), 0)
    values = _fft_axis(kin.conj()[None, :] * _ifft_axis(values, 1), 1)
    values = values * phase

    if cfg.chi:
        values = values * _decoherence_factor(grid, 0.5 * cfg.chi * dt)
    if cfg.gamma:
        values = _off_diagonal_stretch(values, grid, cfg.gamma * dt)
    # strip accumulated rounding asymmetry; the exact map is Hermitian
    values = 0.5 * (values + values.conj().T)

    if cfg.absorber is not None:
        mask = _absorber_mask(grid, cfg.absorber)
        values = values * (mask[:, None] * mask[None, :])
        return DensityMatrix(grid, values)

    out = DensityMatrix(grid, values)
    if abs(out.trace - rho.trace) > cfg.trace_tol:
        raise StepperInstabilityError(
            f"trace drifted by {out.trace - rho.trace:.3e} in one step"
        )
    leak = _boundary_fraction(np.real(np.diagonal(out.values)), grid)
    if leak > cfg.boundary_tol:
        raise BoxOverflowError(
            f"boundary density {leak:.3e} > {cfg.boundary_tol:.1e}; enlarge the box",
            leak=leak,
        )
    return out


# ---------------------------------------------------------------------------
# closed classical (Newton ensemble)


def step_newton(
    ens: TrajectoryEnsemble, model: SoftCoulombModel, e_mid: float, cfg: StepperConfig
) -> TrajectoryEnsemble:
    """Velocity-Verlet step with force -V'(x) + E_mid on every trajectory."""
    dt = cfg.dt
    x, p = ens.positions, ens.momenta
    f0 = e_mid - model.gradient(x)
    x1 = x + dt * p + 0.5 * dt**2 * f0
    f1 = e_mid - model.gradient(x1)
    p1 = p + 0.5 * dt * (f0 + f1)
    bad = ~(np.isfinite(x1) & np.isfinite(p1))
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise TrajectoryOverflowError(
            f"trajectory {idx} produced a non-finite value", index=idx
        )
    return TrajectoryEnsemble(x1, p1, ens.seed)


# ---------------------------------------------------------------------------
# open classical (Fokker-Planck)


def _shear_x(rho_hat_ready: np.ndarray, grid: Grid, tau: float) -> np.ndarray:
    """Transport d rho/dt = -p d rho/dx for time tau (exact spectral shear)."""
    phase = np.exp(-1j * tau * grid.k_odd[:, None] * grid.p[None, :])
    return _ifft_axis(phase * _fft_axis(rho_hat_ready, 0), 0).real


def _momentum_divergence(arr: np.ndarray, grid: Grid) -> np.ndarray:
    """Spectral d/dp (p * arr); its momentum integral vanishes identically."""
    return _ifft_axis(
        1j * grid.k_p_odd[None, :] * _fft_axis(grid.p[None, :] * arr, 1), 1
    ).real


def _friction(rho: np.ndarray, grid: Grid, mu: float) -> np.ndarray:
    """exp(mu * d/dp(p .)) rho to second order, mu = 2 gamma tau.

    Conservation form of the damping characteristics p -> p e^{-mu}; each
    series term integrates to zero over p, so mass is conserved to rounding.
    """
    if mu == 0.0:
        return rho
    a1 = _momentum_divergence(rho, grid)
    a2 = _momentum_divergence(a1, grid)
    return rho + mu * a1 + 0.5 * mu**2 * a2


def step_fokker_planck(
    rho: PhaseSpaceDensity, model: SoftCoulombModel, e_mid: float, cfg: StepperConfig
) -> PhaseSpaceDensity:
    """One Strang step of

        d rho/dt = [-d/dx p + (V'(x)-E) d/dp + 2 gamma d/dp p + D d^2/dp^2] rho.

    Composition: shear(dt/2), friction(dt/2), momentum kick + diffusion(dt),
    friction(dt/2), shear(dt/2).  Values below -1e-12 are clipped and the
    density renormalized (logged); large negativity or mass drift aborts.
    """
    grid = rho.grid
    dt = cfg.dt
    tau = 0.5 * dt
    mu = 2.0 * cfg.gamma * tau
    values = rho.values

    values = _shear_x(values, grid, tau)
    values = _friction(values, grid, mu)
    kick = np.exp(
        1j * dt * (model.gradient(grid.x) - e_mid)[:, None] * grid.k_p_odd[None, :]
        - cfg.diffusion * dt * grid.k_p[None, :] ** 2
    )
    values = _ifft_axis(kick * _fft_axis(values, 1), 1).real
    values = _friction(values, grid, mu)
    values = _shear_x(values, grid, tau)

    if cfg.absorber is not None:
        values = values * _absorber_mask(grid.spatial(), cfg.absorber)[:, None]

    mass = float(values.sum() * grid.dx * grid.dp)
    if cfg.absorber is None and abs(mass - rho.mass) > cfg.trace_tol:
        raise StepperInstabilityError(f"mass drifted by {mass - rho.mass:.3e} in one step")
    vmin = float(values.min())
    if vmin < -cfg.negativity_abort * float(values.max()):
        raise StepperInstabilityError(
            f"phase-space density reached {vmin:.3e}; scheme unstable at this grid/dt"
        )
    # transport ripples below the abort level are left untouched: the
    # spectral scheme conserves every moment exactly, whereas clipping and
    # renormalizing each step would bias <x> by the clipped mass times its
    # lever arm (measured ~1e-3 on driven runs, breaking the Ehrenfest
    # chain).  Exported states can be sanitized via PhaseSpaceDensity.clipped().
    if vmin < -1e-12:
        log.debug("negative phase-space ripple (min %.3e) left to transport", vmin)
    return PhaseSpaceDensity(grid, values)


# ---------------------------------------------------------------------------
# driven full runs


_STEPPERS = {
    SystemKind.CLOSED_QUANTUM: (step_closed_quantum, Wavefunction),
    SystemKind.OPEN_QUANTUM: (step_open_quantum, DensityMatrix),
    SystemKind.NEWTON_ENSEMBLE: (step_newton, TrajectoryEnsemble),
    SystemKind.FOKKER_PLANCK: (step_fokker_planck, PhaseSpaceDensity),
}


def stepper_for(kind: SystemKind, state: SystemState):
    kind = SystemKind(kind)
    step_fn, state_type = _STEPPERS[kind]
    if not isinstance(state, state_type):
        raise TypeError(
            f"{kind.value} expects a {state_type.__name__}, got {type(state).__name__}"
        )
    return step_fn


def _norm_of(state: SystemState) -> float:
    if isinstance(state, Wavefunction):
        return state.norm
    if isinstance(state, DensityMatrix):
        return state.trace
    if isinstance(state, PhaseSpaceDensity):
        return state.mass
    return 1.0


@dataclass(frozen=True, eq=False)
class DrivenRunResult:
    """Recorded observables of one driven simulation (shared time grid)."""

    y: TimeSeries
    p_series: TimeSeries
    vprime_series: TimeSeries
    a_series: TimeSeries
    norm_series: TimeSeries
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("p_series", "vprime_series", "a_series", "norm_series"):
            if not self.y.same_grid(getattr(self, name)):
                raise ValueError(f"{name} is not on the dipole series grid")


def run_driven(
    kind: SystemKind,
    state0: SystemState,
    model: SoftCoulombModel,
    e_field: TimeSeries,
    cfg: StepperConfig,
    final_state: bool = False,
) -> DrivenRunResult | tuple[DrivenRunResult, SystemState]:
    """Propagate state0 under e_field (midpoint rule per step), recording
    <x>, <p>, <V'>, <A> and the norm at every sample time."""
    kind = SystemKind(kind)
    step_fn = stepper_for(kind, state0)
    if abs(e_field.dt - cfg.dt) > 1e-12 * cfg.dt:
        raise ValueError("field dt and stepper dt disagree")
    gamma = cfg.gamma if kind.is_open else 0.0

    n = len(e_field)
    e = e_field.values
    y = np.empty(n)
    p = np.empty(n)
    vp = np.empty(n)
    a = np.empty(n)
    norm = np.empty(n)

    t_start = time.perf_counter()
    conserving = cfg.absorber is None
    state = state0
    for i in range(n):
        y[i] = expectation_x(state)
        p[i] = expectation_p(state)
        vp[i] = expectation_vprime(state, model)
        a[i] = expectation_a(state, gamma)
        norm[i] = _norm_of(state)
        if conserving:
            validate_state(state)
        if i == n - 1:
            break
        state = step_fn(state, model, 0.5 * (e[i] + e[i + 1]), cfg)

    mk = lambda vals: TimeSeries(e_field.t0, e_field.dt, vals)
    result = DrivenRunResult(
        y=mk(y),
        p_series=mk(p),
        vprime_series=mk(vp),
        a_series=mk(a),
        norm_series=mk(norm),
        diagnostics={
            "wall_time_s": time.perf_counter() - t_start,
            "norm_initial": float(norm[0]),
            "norm_final": float(norm[-1]),
            "max_norm_drift": float(np.max(np.abs(norm - norm[0]))),
        },
    )
    return (result, state) if final_state else result


def write_driven_csv(result: DrivenRunResult, e_field: TimeSeries, path) -> None:
    """CSV export `t,E,y,p,Vprime,A,norm` at full double precision."""
    import csv

    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "E", "y", "p", "Vprime", "A", "norm"])
        for row in zip(
            result.y.times,
            e_field.values,
            result.y.values,
            result.p_series.values,
            result.vprime_series.values,
            result.a_series.values,
            result.norm_series.values,
        ):
            w.writerow([repr(float(v)) for v in row])
