"""Launch-field synthesis: the classical 16-QAM channel and the weak quantum pulse.

The classical channel is a root-raised-cosine shaped 16-QAM waveform with unit
mean power, scaled by sqrt(P0).  The quantum channel is a Gaussian pulse whose
time-integrated |amplitude|^2 is mu*hbar*omega_q, i.e. a mean photon number mu.
Both are composed at their scaled channel offsets and converted to soliton
units with the sqrt(gamma_nl*L_d) factor, after which phi+ = conj(phi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import hbar as HBAR

from .params import (
    PhysicalParams,
    ScaledUnits,
    SimulationGrid,
    WdmPlan,
    channel_offset,
    itu_frequency,
)

# Gray-coded 16-QAM: two bits per rail, adjacent levels differ by one bit.
_GRAY_LEVELS = {0b00: -3.0, 0b01: -1.0, 0b11: 1.0, 0b10: 3.0}
# Unit mean power: E|s|^2 over the 16 points is 10 before the 1/sqrt(10).
CONSTELLATION = np.array(
    [
        (_GRAY_LEVELS[(i >> 2) & 0b11] + 1j * _GRAY_LEVELS[i & 0b11]) / math.sqrt(10.0)
        for i in range(16)
    ]
)


@dataclass(frozen=True)
class QamConfig:
    """Classical-channel modulation settings."""

    bit_rate: float = 1.0e10   # bit/s; 16-QAM carries 4 bits per symbol
    roll_off: float = 0.25
    symbol_seed: int = 97
    n_symbols: int | None = None  # default: fill the tau window

    def __post_init__(self) -> None:
        if self.bit_rate <= 0:
            raise ValueError("bit_rate must be positive")
        if not 0.0 < self.roll_off <= 1.0:
            raise ValueError("roll_off must lie in (0, 1]")
        if self.n_symbols is not None and self.n_symbols < 1:
            raise ValueError("n_symbols must be >= 1")
        if self.symbol_seed < 0:
            raise ValueError("symbol_seed must be non-negative")

    @property
    def symbol_rate(self) -> float:
        """Symbols per second: bit rate over 4 bits/symbol."""
        return self.bit_rate / 4.0

    def symbol_duration_scaled(self, t0: float) -> float:
        return 1.0 / (self.symbol_rate * t0)

    def samples_per_symbol(self, grid: SimulationGrid, t0: float) -> float:
        return self.symbol_duration_scaled(t0) / grid.d_tau


def root_raised_cosine(t: np.ndarray, period: float, roll_off: float) -> np.ndarray:
    """Root-raised-cosine impulse response (arbitrary overall scale).

    The two removable singularities (t = 0 and |t| = period/(4*roll_off)) are
    filled with their limits.
    """
    x = np.asarray(t, dtype=float) / period
    b = roll_off
    with np.errstate(divide="ignore", invalid="ignore"):
        num = np.sin(np.pi * x * (1.0 - b)) + 4.0 * b * x * np.cos(np.pi * x * (1.0 + b))
        den = np.pi * x * (1.0 - (4.0 * b * x) ** 2)
        h = num / den
    h = np.where(np.abs(x) < 1e-10, 1.0 + b * (4.0 / np.pi - 1.0), h)
    at_quarter = (b / math.sqrt(2.0)) * (
        (1.0 + 2.0 / np.pi) * math.sin(np.pi / (4.0 * b))
        + (1.0 - 2.0 / np.pi) * math.cos(np.pi / (4.0 * b))
    )
    return np.where(np.abs(np.abs(4.0 * b * x) - 1.0) < 1e-10, at_quarter, h)


def root_raised_cosine_spectrum(k: np.ndarray, period: float, roll_off: float) -> np.ndarray:
    """Root-raised-cosine frequency response (arbitrary overall scale).

    Strictly zero beyond pi*(1+roll_off)/period, which is what keeps a
    shaped channel out of its neighbours' bands.
    """
    k = np.abs(np.asarray(k, dtype=float))
    b = roll_off
    k1 = np.pi * (1.0 - b) / period
    k2 = np.pi * (1.0 + b) / period
    h = np.zeros_like(k)
    h[k <= k1] = 1.0
    if b > 0:
        trans = (k > k1) & (k <= k2)
        h[trans] = np.sqrt(0.5 * (1.0 + np.cos(period * (k[trans] - k1) / (2.0 * b))))
    return h


def qam16_waveform(
    config: QamConfig,
    grid: SimulationGrid,
    t0: float,
    *,
    trajectory: int = 0,
    symbols: np.ndarray | None = None,
) -> np.ndarray:
    """Complex baseband 16-QAM waveform Q(tau) with mean |Q|^2 = 1.

    Symbols are placed cyclically: the spacing snaps to tau_window/n_symbols
    (within half a symbol of the nominal 4/bit_rate) and RRC tails wrap at the
    window edge, so the pattern is statistically uniform on the periodic grid.
    The symbol stream is seeded by (symbol_seed, trajectory); pass `symbols`
    (constellation indices) to override, e.g. an all-same-symbol sequence.
    """
    period = config.symbol_duration_scaled(t0)
    window = grid.tau_window
    if symbols is not None:
        symbols = np.asarray(symbols)
        n_sym = len(symbols)
        if n_sym < 1:
            raise ValueError("symbol override must contain at least one symbol")
        if symbols.min() < 0 or symbols.max() > 15:
            raise ValueError("symbols must be constellation indices 0..15")
    else:
        n_sym = config.n_symbols or max(1, round(window / period))
    spacing = window / n_sym
    if not 0.5 * period <= spacing <= 2.0 * period:
        raise ValueError(
            f"grid window ({window:.1f} scaled units) cannot hold {n_sym} symbols "
            f"at the configured symbol rate (nominal spacing {period:.2f})"
        )

    if symbols is None:
        rng = np.random.default_rng(np.random.SeedSequence((config.symbol_seed, trajectory)))
        symbols = rng.integers(0, 16, size=n_sym)
    points = CONSTELLATION[symbols]

    centers = -0.5 * window + (np.arange(n_sym) + 0.5) * spacing
    # Exact periodic synthesis: sampling the continuous RRC response on the
    # discrete spectrum equals the full cyclic image sum in time (Poisson
    # summation), and keeps the waveform strictly band-limited so nothing
    # leaks into neighbouring channels at launch.
    k = grid.wavenumbers
    impulse_train = (points[:, None] * np.exp(-1j * centers[:, None] * k[None, :])).sum(axis=0)
    spectrum = impulse_train * root_raised_cosine_spectrum(k, spacing, config.roll_off)
    q = np.fft.ifft(spectrum, norm="ortho")
    q /= math.sqrt(float(np.mean(np.abs(q) ** 2)))
    return q


def quantum_pulse(
    mu: float,
    t0: float,
    omega_q: float,
    offset: float,
    grid: SimulationGrid,
    *,
    t_ref: float | None = None,
) -> np.ndarray:
    """Gaussian quantum-pulse amplitude [sqrt(W)] on the scaled tau grid.

    sqrt(hbar*omega_q*mu/(t0*sqrt(pi))) * exp(-tau^2/2) * exp(i*offset*tau)
    for a pulse of width t0; its time-integrated |amplitude|^2 is exactly
    mu*hbar*omega_q.  t_ref is the grid's time unit (defaults to t0, the
    usual case where the pulse has unit scaled width).
    """
    if mu < 0:
        raise ValueError("mean photon number mu must be non-negative")
    if t0 <= 0 or omega_q <= 0:
        raise ValueError("t0 and omega_q must be positive")
    t_ref = t0 if t_ref is None else t_ref
    width = t0 / t_ref
    peak = math.sqrt(HBAR * omega_q * mu / (t0 * math.sqrt(math.pi)))
    tau = grid.tau
    return peak * np.exp(-(tau ** 2) / (2.0 * width ** 2)) * np.exp(1j * offset * tau)


@dataclass
class ScaledFieldPair:
    """The two independent fields of one trajectory, in soliton units."""

    phi: np.ndarray
    phi_plus: np.ndarray
    zeta: float = 0.0

    def __post_init__(self) -> None:
        if self.phi.shape != self.phi_plus.shape:
            raise ValueError("phi and phi_plus must have identical shapes")

    def copy(self) -> "ScaledFieldPair":
        return ScaledFieldPair(self.phi.copy(), self.phi_plus.copy(), self.zeta)


@dataclass(frozen=True)
class LaunchSpec:
    """Resolved launch description for one run."""

    classical_power: float  # W
    mu: float
    t0: float               # s
    classical_channel: int
    classical_offset: float  # rad, scaled
    quantum_offset: float    # rad, scaled
    omega_q: float           # rad/s, absolute quantum carrier

    def __post_init__(self) -> None:
        if self.classical_power < 0:
            raise ValueError("classical power must be non-negative")
        if self.mu < 0:
            raise ValueError("mu must be non-negative")


def make_launch_spec(
    params: PhysicalParams, plan: WdmPlan, classical_power: float, mu: float
) -> LaunchSpec:
    return LaunchSpec(
        classical_power=classical_power,
        mu=mu,
        t0=params.t0,
        classical_channel=plan.classical_channel,
        classical_offset=channel_offset(plan, plan.classical_channel, params.t0),
        quantum_offset=channel_offset(plan, plan.quantum_channel, params.t0),
        omega_q=2.0 * math.pi * itu_frequency(plan.quantum_channel),
    )


def compose_launch(
    spec: LaunchSpec,
    params: PhysicalParams,
    units: ScaledUnits,
    grid: SimulationGrid,
    qam_waveform: np.ndarray | None,
) -> ScaledFieldPair:
    """Assemble phi(0,tau) = sqrt(gamma_nl*L_d)*[sqrt(P0)*Q*e^{i*Omega_c*tau} + pulse]
    and set phi+(0,tau) = conj(phi(0,tau))."""
    for name, offset in (("classical", spec.classical_offset),
                         ("quantum", spec.quantum_offset)):
        if abs(offset) >= grid.nyquist:
            raise ValueError(
                f"{name} channel offset {offset:.1f} rad exceeds the grid "
                f"Nyquist band (+-{grid.nyquist:.1f} rad)"
            )

    # Carriers must be periodic on the tau window: an off-bin tone carries a
    # wrap discontinuity whose leakage lands in every band, including the
    # quantum one.  Snapping costs |delta| <= pi/window in frequency (~1e-5
    # relative at telecom offsets) and is exact when window and spacing are
    # commensurate.
    dk = 2.0 * math.pi / grid.tau_window
    classical_offset = round(spec.classical_offset / dk) * dk
    quantum_offset = round(spec.quantum_offset / dk) * dk

    pulse = quantum_pulse(spec.mu, spec.t0, spec.omega_q, quantum_offset, grid)
    if spec.classical_power > 0:
        if qam_waveform is None:
            raise ValueError("classical power > 0 requires a QAM waveform")
        if qam_waveform.shape != (grid.n_tau,):
            raise ValueError("QAM waveform does not match the grid")
        carrier = np.exp(1j * classical_offset * grid.tau)
        classical = math.sqrt(spec.classical_power) * qam_waveform * carrier
    else:
        classical = 0.0

    phi = math.sqrt(params.gamma_nl * units.dispersion_length) * (classical + pulse)
    return ScaledFieldPair(phi=phi, phi_plus=np.conj(phi), zeta=0.0)
