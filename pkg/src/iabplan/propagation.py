"""60 GHz link-budget arithmetic for access and backhaul links.

Everything is carried in dB/dBm: received power is transmit power plus
antenna gain minus aggregate loss, and the loss is the sum of free-space
path loss, atmospheric absorption, and rain attenuation. Conversion to
linear units happens only inside the capacity formula.

Sign conventions and units:
    * powers in dBm, gains in dBi, losses in dB
    * distances in metres at the API surface (the path-loss formula uses
      km/MHz internally)
    * bandwidth in MHz, capacities in Mbps
"""

from __future__ import annotations

import math
from dataclasses import dataclass

ACCESS = "access"
BACKHAUL = "backhaul"

# Thermal noise density at 290 K, dBm/Hz.
THERMAL_NOISE_DBM_PER_HZ = -174.0


@dataclass(frozen=True)
class RadioParams:
    """Radio configuration shared by every link in a scenario.

    Defaults follow the standard 60 GHz small-cell setup: 30 dBm transmit
    power, 25 dBi directional gains on backhaul, 7 dB noise figure, 10 dB
    SNR threshold. Atmospheric absorption defaults to the 60 GHz oxygen
    peak (15 dB/km); rain defaults to clear sky.
    """

    tx_power_dbm: float = 30.0
    backhaul_gain_tx_dbi: float = 25.0
    backhaul_gain_rx_dbi: float = 25.0
    access_gain_dbi: float = 10.0
    hpbw_deg: float = 10.0
    frequency_ghz: float = 60.0
    bandwidth_mhz: float = 400.0
    noise_figure_db: float = 7.0
    snr_threshold_db: float = 10.0
    atm_db_per_km: float = 15.0
    rain_db_per_km: float = 0.0

    def validate(self) -> None:
        if not math.isfinite(self.tx_power_dbm):
            raise ValueError("tx_power_dbm must be finite")
        if not math.isfinite(self.snr_threshold_db):
            raise ValueError("snr_threshold_db must be finite")
        if self.bandwidth_mhz <= 0:
            raise ValueError("bandwidth_mhz must be positive")
        if not 0 < self.hpbw_deg <= 360:
            raise ValueError("hpbw_deg must be in (0, 360]")
        if self.frequency_ghz <= 0:
            raise ValueError("frequency_ghz must be positive")
        if self.atm_db_per_km < 0 or self.rain_db_per_km < 0:
            raise ValueError("attenuation coefficients must be non-negative")


@dataclass(frozen=True)
class LinkBudget:
    """Per-link budget breakdown produced by :func:`evaluate_link`."""

    distance_m: float
    path_loss_db: float
    atm_loss_db: float
    rain_loss_db: float
    total_loss_db: float
    rx_power_dbm: float
    noise_dbm: float
    snr_db: float
    feasible: bool
    capacity_mbps: float


def path_loss(distance_m: float, frequency_ghz: float, exponent: float = 2.0) -> float:
    """Free-space path loss in dB: 32.44 + 20 log10(f_MHz) + 10 n log10(d_km).

    ``exponent`` generalises the distance term for non-free-space fits;
    the default 2.0 is plain FSPL.
    """
    if distance_m <= 0:
        raise ValueError(f"distance_m must be positive, got {distance_m}")
    if frequency_ghz <= 0:
        raise ValueError(f"frequency_ghz must be positive, got {frequency_ghz}")
    f_mhz = frequency_ghz * 1000.0
    d_km = distance_m / 1000.0
    return 32.44 + 20.0 * math.log10(f_mhz) + 10.0 * exponent * math.log10(d_km)


def total_loss(distance_m: float, params: RadioParams) -> float:
    """Aggregate loss: path loss plus per-km atmospheric and rain attenuation."""
    d_km = distance_m / 1000.0
    return (
        path_loss(distance_m, params.frequency_ghz)
        + params.atm_db_per_km * d_km
        + params.rain_db_per_km * d_km
    )


def backhaul_gain(angle_deviation_deg: float, params: RadioParams) -> float:
    """Combined directional gain: G_tx + G_rx inside the half-power beamwidth.

    Outside the beam the combined gain floors at 0 dBi (boundary inclusive).
    """
    if abs(angle_deviation_deg) <= params.hpbw_deg / 2.0:
        return params.backhaul_gain_tx_dbi + params.backhaul_gain_rx_dbi
    return 0.0


def noise_power(bandwidth_mhz: float, noise_figure_db: float) -> float:
    """Receiver noise floor in dBm: -174 + 10 log10(W_Hz) + noise figure."""
    if bandwidth_mhz <= 0:
        raise ValueError(f"bandwidth_mhz must be positive, got {bandwidth_mhz}")
    w_hz = bandwidth_mhz * 1e6
    return THERMAL_NOISE_DBM_PER_HZ + 10.0 * math.log10(w_hz) + noise_figure_db


def link_capacity(snr_db: float, bandwidth_mhz: float, feasible: bool = True) -> float:
    """Shannon capacity in Mbps; links below the SNR threshold carry nothing."""
    if not feasible:
        return 0.0
    return bandwidth_mhz * math.log2(1.0 + 10.0 ** (snr_db / 10.0))


def evaluate_link(
    src_pos: tuple[float, float],
    dst_pos: tuple[float, float],
    link_kind: str,
    params: RadioParams,
) -> LinkBudget:
    """Full budget for one link between two planar positions.

    Backhaul links use the combined directional gain with perfect beam
    steering assumed (zero angular deviation); access links use the
    combined omni gain. Feasibility is SNR against the configured
    threshold; capacity is zero for infeasible links.
    """
    if link_kind == BACKHAUL:
        gain = backhaul_gain(0.0, params)
    elif link_kind == ACCESS:
        gain = params.access_gain_dbi
    else:
        raise ValueError(f"unknown link kind: {link_kind!r}")

    distance = math.dist(src_pos, dst_pos)
    if distance <= 0:
        raise ValueError("link endpoints must be distinct (zero distance)")

    d_km = distance / 1000.0
    pl = path_loss(distance, params.frequency_ghz)
    atm = params.atm_db_per_km * d_km
    rain = params.rain_db_per_km * d_km
    loss = pl + atm + rain

    rx_power = params.tx_power_dbm + gain - loss
    noise = noise_power(params.bandwidth_mhz, params.noise_figure_db)
    snr = rx_power - noise
    feasible = snr >= params.snr_threshold_db
    capacity = link_capacity(snr, params.bandwidth_mhz, feasible=feasible)

    return LinkBudget(
        distance_m=distance,
        path_loss_db=pl,
        atm_loss_db=atm,
        rain_loss_db=rain,
        total_loss_db=loss,
        rx_power_dbm=rx_power,
        noise_dbm=noise,
        snr_db=snr,
        feasible=feasible,
        capacity_mbps=capacity,
    )
