"""Physical parameters, soliton-unit scalings, the WDM channel plan, and grid sizing.

Everything downstream works in scaled variables: propagation distance in units
of the dispersion length L_d = t0^2/|beta2|, retarded time in units of the
quantum pulse width t0, and field amplitudes in soliton units where the Kerr
coefficient is 1.  This module owns the conversions between SI inputs and
those scaled quantities, plus the discrete tau/zeta grid policy.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.constants import c as C_LIGHT  # m/s
from scipy.constants import hbar as HBAR  # J*s

# 100 GHz DWDM grid: f(n) = 190.0 THz + n * 0.1 THz.
ITU_ANCHOR_HZ = 190.0e12
ITU_SPACING_HZ = 100.0e9
# C-band slice of that grid (1530-1565 nm).
CBAND_FIRST_CHANNEL = 16
CBAND_LAST_CHANNEL = 59

LN10 = math.log(10.0)


def attenuation_from_db_per_km(db_per_km: float) -> float:
    """Amplitude attenuation coefficient [1/m] for a power loss in dB/km.

    Power decays as exp(-2*alpha*z), so 0.2 dB/km -> alpha ~ 2.303e-5 /m.
    """
    if db_per_km < 0:
        raise ValueError("attenuation must be non-negative")
    return db_per_km * LN10 / 20.0 / 1000.0


@dataclass(frozen=True)
class PhysicalParams:
    """Fiber and launch constants in SI units.

    Defaults describe the standard testbed: SMF-28-like fiber, 0.2 dB/km,
    a sqrt(2)*100 ps quantum pulse, and a 50 km span at room temperature.
    """

    t0: float = math.sqrt(2.0) * 100e-12  # s, quantum pulse width
    beta2: float = -1.8e-26               # s^2/m  (-18 ps^2/km, anomalous)
    gamma_nl: float = 7.8e-4              # 1/(W*m) (0.78 /W/km)
    alpha_amp: float = attenuation_from_db_per_km(0.2)  # 1/m, amplitude
    temperature: float = 300.0            # K
    fiber_length: float = 50e3            # m
    group_index: float = 1.468            # used only for alpha<->phi conversion

    def __post_init__(self) -> None:
        if self.t0 <= 0:
            raise ValueError("t0 must be positive")
        if self.beta2 == 0:
            raise ValueError("beta2 must be nonzero (scalings divide by it)")
        if self.gamma_nl <= 0:
            raise ValueError("gamma_nl must be positive")
        if self.alpha_amp < 0:
            raise ValueError("alpha_amp must be non-negative")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.fiber_length <= 0:
            raise ValueError("fiber_length must be positive")

    @property
    def dispersion_sign(self) -> int:
        """+1 for normal dispersion, -1 for anomalous (soliton-supporting)."""
        return 1 if self.beta2 > 0 else -1


@dataclass(frozen=True)
class ScaledUnits:
    """Derived scale factors for one (params, reference wavelength) pair."""

    dispersion_length: float  # m
    gamma_scaled: float       # amplitude loss per dispersion length
    n0: float                 # photons per unit scaled intensity * tau
    zeta_max: float           # fiber length in dispersion lengths
    omega0: float             # rad/s, reference carrier


def derive_scaled_units(params: PhysicalParams, reference_wavelength: float) -> ScaledUnits:
    """Compute the soliton-unit scale factors.

    L_d = t0^2/|beta2|, gamma_scaled = alpha_amp*L_d, zeta_max = L/L_d and
    n0 = t0/(hbar*omega0*L_d*gamma_nl).  n0 is the photon number that carries
    unit scaled intensity over a unit of scaled time; it sets every quantum
    noise variance downstream.
    """
    if not (1.2e-6 < reference_wavelength < 1.7e-6):
        raise ValueError(
            f"reference wavelength {reference_wavelength} m outside the "
            "supported fiber transmission window (1.2-1.7 um)"
        )
    dispersion_length = params.t0 ** 2 / abs(params.beta2)
    omega0 = 2.0 * math.pi * C_LIGHT / reference_wavelength
    n0 = params.t0 / (HBAR * omega0 * dispersion_length * params.gamma_nl)
    return ScaledUnits(
        dispersion_length=dispersion_length,
        gamma_scaled=params.alpha_amp * dispersion_length,
        n0=n0,
        zeta_max=params.fiber_length / dispersion_length,
        omega0=omega0,
    )


def itu_frequency(channel: int) -> float:
    """Absolute carrier frequency [Hz] of a 100 GHz ITU grid channel."""
    if not CBAND_FIRST_CHANNEL <= channel <= CBAND_LAST_CHANNEL:
        raise ValueError(
            f"channel {channel} outside the C band "
            f"({CBAND_FIRST_CHANNEL}..{CBAND_LAST_CHANNEL})"
        )
    return ITU_ANCHOR_HZ + channel * ITU_SPACING_HZ


def channel_wavelength(channel: int) -> float:
    """Vacuum wavelength [m] of an ITU channel."""
    return C_LIGHT / itu_frequency(channel)


@dataclass(frozen=True)
class WdmPlan:
    """Channel layout: who sits where on the grid, relative to a reference.

    The reference channel defines the baseband origin of the simulation; all
    envelopes are written against its carrier.  Offsets are then small
    multiples of the channel spacing instead of ~1e15 rad/s optical
    frequencies.
    """

    spacing: float = 2.0 * math.pi * 100e9  # rad/s between adjacent channels
    reference_channel: int = 38
    quantum_channel: int = 38
    classical_channel: int = 39

    def __post_init__(self) -> None:
        if self.spacing <= 0:
            raise ValueError("channel spacing must be positive")
        for name in ("reference_channel", "quantum_channel", "classical_channel"):
            ch = getattr(self, name)
            if not CBAND_FIRST_CHANNEL <= ch <= CBAND_LAST_CHANNEL:
                raise ValueError(
                    f"{name} {ch} outside the C band "
                    f"({CBAND_FIRST_CHANNEL}..{CBAND_LAST_CHANNEL})"
                )
        if self.quantum_channel == self.classical_channel:
            raise ValueError(
                "classical and quantum signals cannot share a channel "
                f"({self.quantum_channel})"
            )


def channel_offset(plan: WdmPlan, channel: int, t0: float) -> float:
    """Scaled angular offset Omega*t0 of `channel` from the reference carrier.

    One channel of separation at the default spacing and t0 = sqrt(2)*100 ps
    is ~88.86 rad per scaled time unit.
    """
    if not CBAND_FIRST_CHANNEL <= channel <= CBAND_LAST_CHANNEL:
        raise ValueError(f"channel {channel} outside the C band")
    return (channel - plan.reference_channel) * plan.spacing * t0


def walkoff_time(params: PhysicalParams, plan: WdmPlan, channel: int) -> float:
    """Group-delay walk-off [s] between `channel` and the quantum channel
    accumulated over the full fiber length: |beta2|*dOmega*L."""
    separation = abs(channel - plan.quantum_channel)
    return abs(params.beta2) * plan.spacing * separation * params.fiber_length


def field_to_photon_amplitude(
    phi: np.ndarray, params: PhysicalParams, units: ScaledUnits
) -> np.ndarray:
    """Convert a scaled field to the photon-flux amplitude alpha.

    phi = sqrt(v_g*t0/n0)*alpha with v_g = c/group_index.  Only needed when
    reporting absolute photon-flux amplitudes; the solver never uses it.
    """
    v_g = C_LIGHT / params.group_index
    return np.asarray(phi) / math.sqrt(v_g * params.t0 / units.n0)


class GridSizeError(ValueError):
    """Raised when the resolution policy would exceed the memory cap."""


def _next_power_of_two(n: float) -> int:
    return 1 << max(0, math.ceil(math.log2(max(1.0, n))))


@dataclass(frozen=True)
class SimulationGrid:
    """Discrete periodic tau grid plus the zeta step.

    tau spans [-tau_window/2, tau_window/2) with n_tau points; wavenumbers are
    the matching angular frequencies in FFT layout.  All transforms downstream
    are unitary ("ortho"), so Parseval holds without extra factors.
    """

    n_tau: int
    tau_window: float
    d_tau: float
    d_zeta: float

    def __post_init__(self) -> None:
        if self.n_tau < 2 or (self.n_tau & (self.n_tau - 1)) != 0:
            raise ValueError(f"n_tau must be a power of two >= 2, got {self.n_tau}")
        if self.tau_window <= 0 or self.d_zeta <= 0:
            raise ValueError("tau_window and d_zeta must be positive")
        if not math.isclose(self.d_tau, self.tau_window / self.n_tau, rel_tol=1e-12):
            raise ValueError("d_tau inconsistent with tau_window/n_tau")

    @classmethod
    def regular(cls, n_tau: int, tau_window: float, d_zeta: float) -> "SimulationGrid":
        return cls(n_tau=n_tau, tau_window=tau_window,
                   d_tau=tau_window / n_tau, d_zeta=d_zeta)

    @cached_property
    def tau(self) -> np.ndarray:
        return (np.arange(self.n_tau) - self.n_tau // 2) * self.d_tau

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n_tau, d=self.d_tau)

    @property
    def nyquist(self) -> float:
        return math.pi / self.d_tau

    def fingerprint(self) -> str:
        payload = json.dumps(
            [self.n_tau, self.tau_window, self.d_tau, self.d_zeta], sort_keys=True
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class GridPolicy:
    """Knobs for automatic grid sizing.

    nyquist_factor: spectral headroom above the farthest occupied offset.
    window_margin: multiplicative slack on the walk-off + pulse-span bound.
    min_symbol_spans: keep at least this many QAM symbols in the window so a
    trajectory sees a representative data pattern.
    max_n_tau is a memory cap: sizing past it raises rather than swaps.
    """

    nyquist_factor: float = 1.5
    window_margin: float = 1.2
    pulse_spans: float = 8.0
    min_symbol_spans: float = 12.0
    min_window: float = 16.0
    signal_halfwidth: float = 4.0  # rad, spectral allowance per channel
    min_n_tau: int = 256
    max_n_tau: int = 1 << 22
    n_zeta_steps: int = 2000

    def __post_init__(self) -> None:
        if self.nyquist_factor < 1.0:
            raise ValueError("nyquist_factor must be >= 1")
        if self.window_margin < 1.0:
            raise ValueError("window_margin must be >= 1")
        if self.n_zeta_steps < 1:
            raise ValueError("n_zeta_steps must be >= 1")


def build_grid(
    params: PhysicalParams,
    units: ScaledUnits,
    plan: WdmPlan,
    policy: GridPolicy = GridPolicy(),
    *,
    extra_channels: tuple[int, ...] = (),
    symbol_duration: float | None = None,
) -> SimulationGrid:
    """Size the tau grid for one run (or one shared-grid sweep).

    The window must exceed the worst-case walk-off between occupied channels
    plus several pulse widths; the Nyquist band must cover the farthest
    channel offset plus its modulation bandwidth with headroom.  n_tau is the
    smallest power of two satisfying both.  extra_channels widens the bounds
    so a whole channel sweep can share one grid (and one dark-fiber
    reference).
    """
    channels = {plan.quantum_channel, plan.classical_channel, *extra_channels}
    offsets = [channel_offset(plan, ch, params.t0) for ch in channels]
    q_offset = channel_offset(plan, plan.quantum_channel, params.t0)
    omega_max = max(abs(o) for o in offsets)

    # Walk-off in scaled time between the quantum channel and the farthest
    # other occupied channel, over the whole span.
    walkoff_scaled = max(abs(o - q_offset) for o in offsets) * units.zeta_max

    window = policy.window_margin * (walkoff_scaled + policy.pulse_spans * 1.0)
    if symbol_duration is not None:
        window = max(window, policy.min_symbol_spans * symbol_duration / params.t0)
    window = max(window, policy.min_window)

    bandwidth = policy.signal_halfwidth
    if symbol_duration is not None:
        # (1 + rolloff)-ish RRC occupancy; a fixed 2x pad is plenty at these rates
        bandwidth = max(bandwidth, 2.0 * math.pi / (symbol_duration / params.t0))
    d_tau_max = math.pi / (policy.nyquist_factor * (omega_max + bandwidth))

    required = _next_power_of_two(window / d_tau_max)
    required = max(required, policy.min_n_tau)
    if required > policy.max_n_tau:
        raise GridSizeError(
            f"grid would need n_tau = {required} points "
            f"(window {window:.1f}, d_tau <= {d_tau_max:.3e}), "
            f"exceeding the cap of {policy.max_n_tau}"
        )
    return SimulationGrid.regular(
        n_tau=required,
        tau_window=window,
        d_zeta=units.zeta_max / policy.n_zeta_steps,
    )
