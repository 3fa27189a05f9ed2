"""Deterministic cross-validation suite.

Each check drives the propagation engine against a quantity it does not
compute the same way: a closed-form solution, an exact decay law, a
convergence-order argument, or a second, independently written split-step
integrator.  The checks are what `coprop oracle` runs and what the
acceptance tests reuse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .demux import rms_width
from .engine import EngineConfig, propagate, scaled_photon_number
from .params import PhysicalParams, SimulationGrid, derive_scaled_units
from .signals import ScaledFieldPair

REFERENCE_WAVELENGTH = 1546.92e-9  # C-band, channel 38


@dataclass(frozen=True)
class OracleResult:
    name: str
    value: float
    bound: float
    passed: bool
    detail: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name}: {status} ({self.detail})"


def reference_split_step(
    u0: np.ndarray,
    grid: SimulationGrid,
    n_steps: int,
    gamma: float = 0.0,
    dispersion_sign: int = -1,
    nonlinear: bool = True,
) -> np.ndarray:
    """Plain strang-split integrator for the scaled mean-field equation.

    Deliberately simple and separate from the engine: exact exponential
    nonlinear step instead of a midpoint solve, no field pair, no noise.
    """
    k = grid.wavenumbers
    half = np.exp((0.5j * (1.0 + dispersion_sign * k * k) - gamma) * grid.d_zeta / 2.0)
    u = u0.astype(complex)
    for _ in range(n_steps):
        u = np.fft.ifft(half * np.fft.fft(u, norm="ortho"), norm="ortho")
        if nonlinear:
            u = u * np.exp(1j * np.abs(u) ** 2 * grid.d_zeta)
        u = np.fft.ifft(half * np.fft.fft(u, norm="ortho"), norm="ortho")
    return u


def _conjugate_pair(phi: np.ndarray) -> ScaledFieldPair:
    return ScaledFieldPair(phi.astype(complex), np.conj(phi).astype(complex))


def soliton_deviation(n_tau: int, window: float, d_zeta: float, zeta_end: float) -> float:
    """Max modulus deviation of the fundamental soliton after zeta_end."""
    grid = SimulationGrid.regular(n_tau, window, d_zeta)
    sech = 1.0 / np.cosh(grid.tau)
    config = EngineConfig(
        grid=grid,
        gamma_scaled=0.0,
        n_steps=round(zeta_end / d_zeta),
        dispersion_sign=-1,
        enforce_conjugate=True,
    )
    record = propagate(_conjugate_pair(sech), config)
    return float(np.max(np.abs(np.abs(record.final.phi) - sech)))


def soliton_check(quick: bool = False) -> OracleResult:
    """sech input in the anomalous regime must hold its shape."""
    d_zeta = 1e-3 if quick else 2e-4
    dev = soliton_deviation(2048, 40.0, d_zeta, 1.0)
    bound = 1e-5 if quick else 1e-6
    return OracleResult(
        name="soliton shape preservation",
        value=dev,
        bound=bound,
        passed=dev < bound,
        detail=f"max modulus deviation {dev:.3e} < {bound:.0e} at d_zeta={d_zeta:g}",
    )


def broadening_check() -> OracleResult:
    """Gaussian RMS width under pure dispersion follows sqrt(1 + zeta^2)."""
    grid = SimulationGrid.regular(2048, 50.0, 2e-3)
    pulse = np.exp(-0.5 * grid.tau**2)
    worst = 0.0
    detail_parts = []
    width0 = rms_width(np.abs(pulse) ** 2, grid.tau, window_fraction=1.0)
    for zeta in (0.5, 1.0, 2.0):
        config = EngineConfig(
            grid=grid,
            gamma_scaled=0.0,
            n_steps=round(zeta / grid.d_zeta),
            dispersion_sign=1,
            nonlinearity=False,
            enforce_conjugate=True,
        )
        record = propagate(_conjugate_pair(pulse), config)
        width = rms_width(np.abs(record.final.phi) ** 2, grid.tau, window_fraction=1.0)
        expected = math.sqrt(1.0 + zeta * zeta)
        rel = abs(width / width0 - expected) / expected
        worst = max(worst, rel)
        detail_parts.append(f"zeta={zeta:g}: {width / width0:.6f} vs {expected:.6f}")
    bound = 1e-4
    return OracleResult(
        name="dispersive broadening factor",
        value=worst,
        bound=bound,
        passed=worst < bound,
        detail="; ".join(detail_parts),
    )


def attenuation_check() -> OracleResult:
    """Flat field with dispersion and nonlinearity off decays as exp(-2 gamma zeta)."""
    params = PhysicalParams()
    units = derive_scaled_units(params, REFERENCE_WAVELENGTH)
    n_steps = 2000
    grid = SimulationGrid.regular(256, 16.0, units.zeta_max / n_steps)
    flat = np.ones(grid.n_tau, dtype=complex)
    config = EngineConfig(
        grid=grid,
        gamma_scaled=units.gamma_scaled,
        n_steps=n_steps,
        dispersion=False,
        nonlinearity=False,
        enforce_conjugate=True,
    )
    pair = _conjugate_pair(flat)
    before = scaled_photon_number(pair, grid)
    record = propagate(pair, config)
    after = scaled_photon_number(record.final, grid)
    ratio = after / before
    expected = math.exp(-2.0 * units.gamma_scaled * units.zeta_max)
    rel = abs(ratio - expected) / expected
    bound = 1e-8
    return OracleResult(
        name="attenuation energy ratio",
        value=rel,
        bound=bound,
        passed=rel < bound,
        detail=f"ratio {ratio:.10f} vs exp(-2*gamma*zeta)={expected:.10f}, rel err {rel:.2e}",
    )


def order_check() -> OracleResult:
    """Halving d_zeta must cut the soliton error by ~4 (second order)."""
    coarse = soliton_deviation(1024, 30.0, 4e-3, 1.0)
    fine = soliton_deviation(1024, 30.0, 2e-3, 1.0)
    ratio = coarse / fine
    lo, hi = 3.5, 4.5
    return OracleResult(
        name="second-order step convergence",
        value=ratio,
        bound=hi,
        passed=lo < ratio < hi,
        detail=f"error {coarse:.3e} -> {fine:.3e}, ratio {ratio:.3f} in ({lo}, {hi})",
    )


def reference_comparison_check() -> OracleResult:
    """Engine in deterministic mode agrees with the independent integrator."""
    grid = SimulationGrid.regular(512, 30.0, 1e-4)
    u0 = 1.2 * np.exp(-0.5 * grid.tau**2) * np.exp(0.3j * grid.tau)
    n_steps, gamma = 100, 0.3
    config = EngineConfig(
        grid=grid,
        gamma_scaled=gamma,
        n_steps=n_steps,
        dispersion_sign=-1,
        enforce_conjugate=True,
    )
    record = propagate(_conjugate_pair(u0), config)
    ref = reference_split_step(u0, grid, n_steps, gamma=gamma, dispersion_sign=-1)
    err = float(np.max(np.abs(record.final.phi - ref)) / np.max(np.abs(ref)))
    bound = 1e-9
    return OracleResult(
        name="independent integrator agreement",
        value=err,
        bound=bound,
        passed=err < bound,
        detail=f"peak-relative deviation {err:.2e} < {bound:.0e} over {n_steps} steps",
    )


def run_all(quick: bool = False) -> list[OracleResult]:
    checks = [
        soliton_check(quick=quick),
        broadening_check(),
        attenuation_check(),
        order_check(),
        reference_comparison_check(),
    ]
    return checks


def format_report(results: list[OracleResult]) -> str:
    lines = [r.line() for r in results]
    n_pass = sum(r.passed for r in results)
    lines.append(f"{n_pass}/{len(results)} oracle checks passed")
    return "\n".join(lines)
