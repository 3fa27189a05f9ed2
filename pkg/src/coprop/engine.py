"""Split-step integrator for the coupled two-field propagation equations.

Each zeta step is a Strang sandwich: half a linear step in the spectral
domain, the nonlinear + noise flow by a semi-implicit midpoint rule, half a
linear step again.  The linear multipliers for phi and phi+ are complex
conjugates sharing the loss magnitude exp(-gamma dz/2); the nonlinear drive is
+i*phi+*phi^2 for phi and -i*phi*phi+^2 for phi+, so a conjugate pair stays a
conjugate pair when the noise is off.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.fft import fft, ifft

from .noise import NoiseConfig, NoiseRealization, sample_step_noise
from .params import SimulationGrid
from .signals import ScaledFieldPair

SQRT_I = np.exp(0.25j * np.pi)         # sqrt(i), multiplies xi_E * phi
SQRT_MINUS_I = np.exp(-0.25j * np.pi)  # sqrt(-i), multiplies xi_E+ * phi+


class MidpointDivergenceError(RuntimeError):
    """Fixed-point iteration residual grew instead of contracting."""

    def __init__(self, residuals: list[float], step: int | None = None):
        self.residuals = residuals
        self.step = step
        where = f" at step {step}" if step is not None else ""
        super().__init__(
            f"midpoint iteration diverged{where}: residuals {residuals} "
            "(reduce d_zeta or the field amplitude)"
        )


class NonFiniteFieldError(RuntimeError):
    """A field stopped being finite mid-run."""

    def __init__(self, step: int):
        self.step = step
        super().__init__(f"non-finite field values after step {step}")


@dataclass(frozen=True)
class StepOperators:
    """Precomputed half-step spectral multipliers for the two fields."""

    phi_half: np.ndarray
    phi_plus_half: np.ndarray


def step_operators(
    grid: SimulationGrid,
    gamma_scaled: float,
    dispersion_sign: int,
    *,
    dispersion: bool = True,
) -> StepOperators:
    """exp[((i/2)(1 + s*k^2) - gamma) * dz/2] on the FFT wavenumber grid.

    s = +1 for normal dispersion, -1 for anomalous.  The anomalous choice
    gives the phase curvature that balances the Kerr term (a sech input
    propagates shape-invariantly); the constant "1" is a global phase that
    cancels in every phi*phi+ observable.  The phi+ multiplier is the
    complex conjugate.
    """
    if dispersion_sign not in (-1, 1):
        raise ValueError("dispersion_sign must be +1 (normal) or -1 (anomalous)")
    if gamma_scaled < 0:
        raise ValueError("gamma_scaled must be non-negative")
    k2 = grid.wavenumbers ** 2 if dispersion else np.zeros(grid.n_tau)
    lin = 0.5j * (1.0 + dispersion_sign * k2) - gamma_scaled
    phi_half = np.exp(lin * (0.5 * grid.d_zeta))
    return StepOperators(phi_half=phi_half, phi_plus_half=np.conj(phi_half))


def linear_half_step(
    phi: np.ndarray, phi_plus: np.ndarray, ops: StepOperators
) -> tuple[np.ndarray, np.ndarray]:
    phi = ifft(ops.phi_half * fft(phi, norm="ortho"), norm="ortho")
    phi_plus = ifft(ops.phi_plus_half * fft(phi_plus, norm="ortho"), norm="ortho")
    return phi, phi_plus


def nonlinear_midpoint_step(
    phi0: np.ndarray,
    phi_plus0: np.ndarray,
    d_zeta: float,
    noise: NoiseRealization | None = None,
    iterations: int = 4,
    nonlinearity: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Nonlinear + noise flow over one step by the semi-implicit midpoint rule.

    Solves the midpoint equations
        a = phi0  + (dz/2) * [ i*b*a^2 + xi_L  + sqrt(i)*xi_E*a ]
        b = phi0+ + (dz/2) * [-i*a*b^2 + xi_L+ + sqrt(-i)*xi_E+*b ]
    by `iterations` simultaneous fixed-point passes and returns the endpoint
    extrapolation (2a - phi0, 2b - phi0+).  The noise arrays are per-step Ito
    increments, held fixed across the iteration.  Raises
    MidpointDivergenceError if the residual grows between the last two passes.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    half = 0.5 * d_zeta
    if noise is not None:
        base = phi0 + half * noise.xi_loss
        base_plus = phi_plus0 + half * noise.xi_loss_plus
        kerr = (half * SQRT_I) * noise.xi_kerr
        kerr_plus = (half * SQRT_MINUS_I) * noise.xi_kerr_plus
    else:
        base, base_plus = phi0, phi_plus0
        kerr = kerr_plus = None

    a, b = phi0, phi_plus0
    residuals: list[float] = []
    for _ in range(iterations):
        if nonlinearity:
            a_new = base + (1j * half) * (b * a * a)
            b_new = base_plus + (-1j * half) * (a * b * b)
        else:
            a_new = base
            b_new = base_plus
        if kerr is not None:
            a_new = a_new + kerr * a
            b_new = b_new + kerr_plus * b
        residuals.append(
            float(max(np.max(np.abs(a_new - a)), np.max(np.abs(b_new - b))))
        )
        a, b = a_new, b_new

    if len(residuals) >= 2:
        floor = 1e-14 * max(float(np.max(np.abs(a))), 1.0)
        if residuals[-1] > residuals[-2] and residuals[-1] > floor:
            raise MidpointDivergenceError(residuals)
    return 2.0 * a - phi0, 2.0 * b - phi_plus0


@dataclass
class EngineConfig:
    """One trajectory's propagation setup (grid, operators, noise, probes)."""

    grid: SimulationGrid
    gamma_scaled: float
    n_steps: int
    dispersion_sign: int = -1
    iterations: int = 4
    dispersion: bool = True
    nonlinearity: bool = True
    enforce_conjugate: bool = False
    noise: NoiseConfig | None = None
    snapshot_every: int | None = None
    # (mask for phi, mirrored mask for phi+); snapshots hold phi_q*phi_q+
    snapshot_masks: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def zeta_max(self) -> float:
        return self.n_steps * self.grid.d_zeta


def deterministic_mode(config: EngineConfig) -> EngineConfig:
    """Noise variances zeroed and phi+ pinned to conj(phi): the mean-field
    limit, where the pair equations reduce to the classical propagation
    equation."""
    return replace(config, noise=None, enforce_conjugate=True)


@dataclass
class PropagationRecord:
    """Output of one trajectory."""

    final: ScaledFieldPair
    snapshots: np.ndarray | None = None       # (n_snap, n_tau) complex products
    snapshot_zetas: np.ndarray | None = None


def _band_product(
    phi: np.ndarray,
    phi_plus: np.ndarray,
    masks: tuple[np.ndarray, np.ndarray] | None,
) -> np.ndarray:
    if masks is None:
        return phi * phi_plus
    sel = ifft(masks[0] * fft(phi, norm="ortho"), norm="ortho")
    sel_plus = ifft(masks[1] * fft(phi_plus, norm="ortho"), norm="ortho")
    return sel * sel_plus


def propagate(
    initial: ScaledFieldPair, config: EngineConfig, trajectory: int = 0
) -> PropagationRecord:
    """March one trajectory over n_steps.

    Noise for step n of trajectory t comes from the (master_seed, t, n)
    stream, so results are independent of scheduling and worker count.
    Non-finite fields abort with the offending step index.
    """
    grid = config.grid
    if initial.phi.shape != (grid.n_tau,):
        raise ValueError(
            f"field shape {initial.phi.shape} does not match grid ({grid.n_tau},)"
        )
    if config.n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if config.noise is not None:
        nc = config.noise
        if nc.n_tau != grid.n_tau:
            raise ValueError("noise config n_tau does not match the grid")
        if not (np.isclose(nc.d_zeta, grid.d_zeta) and np.isclose(nc.d_tau, grid.d_tau)):
            raise ValueError("noise config cell sizes do not match the grid")

    ops = step_operators(
        grid, config.gamma_scaled, config.dispersion_sign, dispersion=config.dispersion
    )
    phi = np.array(initial.phi, dtype=complex)
    phi_plus = np.array(initial.phi_plus, dtype=complex)

    snaps: list[np.ndarray] = []
    zetas: list[float] = []
    if config.snapshot_every:
        snaps.append(_band_product(phi, phi_plus, config.snapshot_masks))
        zetas.append(0.0)

    for step in range(config.n_steps):
        phi, phi_plus = linear_half_step(phi, phi_plus, ops)
        noise = (
            sample_step_noise(config.noise, trajectory, step)
            if config.noise is not None
            else None
        )
        try:
            phi, phi_plus = nonlinear_midpoint_step(
                phi, phi_plus, grid.d_zeta, noise, config.iterations, config.nonlinearity
            )
        except MidpointDivergenceError as err:
            raise MidpointDivergenceError(err.residuals, step=step) from None
        phi, phi_plus = linear_half_step(phi, phi_plus, ops)
        if config.enforce_conjugate:
            phi_plus = np.conj(phi)
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(phi_plus))):
            raise NonFiniteFieldError(step)
        if config.snapshot_every and (step + 1) % config.snapshot_every == 0:
            snaps.append(_band_product(phi, phi_plus, config.snapshot_masks))
            zetas.append((step + 1) * grid.d_zeta)

    final = ScaledFieldPair(phi, phi_plus, zeta=config.n_steps * grid.d_zeta)
    if config.snapshot_every:
        return PropagationRecord(
            final=final, snapshots=np.array(snaps), snapshot_zetas=np.array(zetas)
        )
    return PropagationRecord(final=final)


def scaled_photon_number(pair: ScaledFieldPair, grid: SimulationGrid) -> float:
    """Re integral phi*phi+ dtau; times n0 this is the mean photon number.
    Conserved to rounding when gamma = 0 and the noise is off."""
    return float(np.real(np.sum(pair.phi * pair.phi_plus)) * grid.d_tau)
