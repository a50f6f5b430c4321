"""Radio energy models for packet traces and offloading savings bounds.

Both models reduce a trace to an integer *usage vector* (time spent in each
elevated power state, bytes, packets) and price it with a non-negative
coefficient vector.  Energy is therefore linear in usage, which is what lets
:func:`energy_bounds` compute the lower bound from a usage difference and
keep ``0 <= e_min <= e_max`` exact under floating point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

from offloadkit import kernels
from offloadkit.trace import PacketRecord, PacketTrace

_NJ = 1e-9  # mW * us
_UJ = 1e-6


@dataclass(frozen=True)
class Horizon:
    start_us: int
    end_us: int

    def __post_init__(self):
        if self.end_us < self.start_us:
            raise ValueError("horizon end precedes start")

    @property
    def length_us(self) -> int:
        return self.end_us - self.start_us

    def contains(self, t: int) -> bool:
        return self.start_us <= t <= self.end_us


@dataclass(frozen=True)
class EnergyBounds:
    e_min_j: float
    e_max_j: float

    def __post_init__(self):
        if not 0.0 <= self.e_min_j <= self.e_max_j:
            raise ValueError(f"invalid bounds ({self.e_min_j}, {self.e_max_j})")


@dataclass(frozen=True)
class RrcModelParams:
    """3G RRC model: IDLE -> DCH on any packet, DCH -> FACH -> IDLE on inactivity."""

    p_dch_mw: float = 800.0
    p_fach_mw: float = 460.0
    p_idle_mw: float = 0.0
    t_dch_us: int = 5_000_000
    t_fach_us: int = 12_000_000
    per_byte_tx_uj: float = 0.0
    per_byte_rx_uj: float = 0.0

    def __post_init__(self):
        if not self.p_dch_mw >= self.p_fach_mw >= self.p_idle_mw >= 0:
            raise ValueError("need p_dch_mw >= p_fach_mw >= p_idle_mw >= 0")
        if self.t_dch_us <= 0 or self.t_fach_us <= 0:
            raise ValueError("RRC timers must be positive")
        if self.per_byte_tx_uj < 0 or self.per_byte_rx_uj < 0:
            raise ValueError("per-byte costs must be non-negative")

    name = "3g"

    @property
    def tail_us(self) -> int:
        return self.t_dch_us + self.t_fach_us

    def usage(self, packets: Sequence[PacketRecord], horizon: Horizon) -> tuple[int, ...]:
        """``(horizon, elevated, dch, bytes_tx, bytes_rx)``; elevated = DCH + FACH time."""
        ts = _checked_timestamps(packets, horizon)
        dch, elevated = kernels.gap_usage(ts, horizon.end_us, self.t_dch_us, self.tail_us)
        tx = sum(p.size_bytes for p in packets if p.outbound)
        rx = sum(p.size_bytes for p in packets if not p.outbound)
        return (horizon.length_us, elevated, dch, tx, rx)

    def coefficients(self) -> tuple[float, ...]:
        return (
            self.p_idle_mw * _NJ,
            (self.p_fach_mw - self.p_idle_mw) * _NJ,
            (self.p_dch_mw - self.p_fach_mw) * _NJ,
            self.per_byte_tx_uj * _UJ,
            self.per_byte_rx_uj * _UJ,
        )


@dataclass(frozen=True)
class WifiModelParams:
    """Wi-Fi model: active for ``tail_us`` after each packet, idle otherwise."""

    p_active_mw: float = 700.0
    tail_us: int = 200_000
    p_idle_mw: float = 0.0
    per_packet_uj: float = 0.0
    per_byte_uj: float = 0.0

    def __post_init__(self):
        if not self.p_active_mw >= self.p_idle_mw >= 0:
            raise ValueError("need p_active_mw >= p_idle_mw >= 0")
        if self.tail_us < 0:
            raise ValueError("tail_us must be non-negative")
        if self.per_packet_uj < 0 or self.per_byte_uj < 0:
            raise ValueError("per-unit costs must be non-negative")

    name = "wifi"

    def usage(self, packets: Sequence[PacketRecord], horizon: Horizon) -> tuple[int, ...]:
        """``(horizon, active, packets, bytes)``."""
        ts = _checked_timestamps(packets, horizon)
        active, _ = kernels.gap_usage(ts, horizon.end_us, self.tail_us, self.tail_us)
        return (horizon.length_us, active, len(packets), sum(p.size_bytes for p in packets))

    def coefficients(self) -> tuple[float, ...]:
        return (
            self.p_idle_mw * _NJ,
            (self.p_active_mw - self.p_idle_mw) * _NJ,
            self.per_packet_uj * _UJ,
            self.per_byte_uj * _UJ,
        )


EnergyModel = Union[RrcModelParams, WifiModelParams]


def _packets(trace) -> Sequence[PacketRecord]:
    return trace.packets if isinstance(trace, PacketTrace) else trace


def _checked_timestamps(packets, horizon: Horizon) -> list[int]:
    ts = [p.timestamp_us for p in packets]
    if ts and (ts[0] < horizon.start_us or ts[-1] > horizon.end_us):
        raise ValueError("packet outside the energy horizon")
    return ts


def price(model: EnergyModel, usage: Iterable[int]) -> float:
    """Joules for a usage vector.  Summed left to right, so monotone in each entry."""
    total = 0.0
    for c, u in zip(model.coefficients(), usage):
        total += c * u
    return total


def default_horizon(trace, model: EnergyModel) -> Horizon:
    """[first packet, last packet + full tail]; [0, 0] for an empty trace."""
    packets = _packets(trace)
    if not packets:
        return Horizon(0, 0)
    return Horizon(packets[0].timestamp_us, packets[-1].timestamp_us + model.tail_us)


def estimate_energy(trace, model: EnergyModel, horizon: Horizon | None = None) -> float:
    packets = _packets(trace)
    if horizon is None:
        horizon = default_horizon(packets, model)
    return price(model, model.usage(packets, horizon))


def estimate_energy_3g(trace, params: RrcModelParams | None = None,
                       horizon: Horizon | None = None) -> float:
    return estimate_energy(trace, params or RrcModelParams(), horizon)


def estimate_energy_wifi(trace, params: WifiModelParams | None = None,
                         horizon: Horizon | None = None) -> float:
    return estimate_energy(trace, params or WifiModelParams(), horizon)


class BoundsCalculator:
    """Savings bounds for many subsets of one full trace.

    The full trace's usage is computed once; each subset costs two usage
    evaluations (the subset and its complement).
    """

    def __init__(self, full, model: EnergyModel, horizon: Horizon | None = None):
        self.packets = tuple(_packets(full))
        self.model = model
        self.horizon = horizon if horizon is not None else default_horizon(self.packets, model)
        self.full_usage = model.usage(self.packets, self.horizon)
        self.idle_usage = model.usage((), self.horizon)

    def bounds(self, positions: Iterable[int]) -> EnergyBounds:
        """Bounds for the packets at ``positions`` (indices into the full trace)."""
        chosen = set(positions)
        n = len(self.packets)
        if any(not 0 <= i < n for i in chosen):
            raise ValueError("method packets are not a subset of the full trace")
        method = [self.packets[i] for i in sorted(chosen)]
        rest = [p for i, p in enumerate(self.packets) if i not in chosen]
        rest_usage = self.model.usage(rest, self.horizon)
        method_usage = self.model.usage(method, self.horizon)
        saved = [f - r for f, r in zip(self.full_usage, rest_usage)]
        alone = [m - z for m, z in zip(method_usage, self.idle_usage)]  # idle floor is never saved
        return EnergyBounds(price(self.model, saved), price(self.model, alone))


def energy_bounds(full, method_packets, model: EnergyModel,
                  horizon: Horizon | None = None) -> EnergyBounds:
    """E_min = E(full) - E(rest), E_max = E(method) - E(no packets) on a common horizon.

    Both bounds exclude the idle floor, so an empty method gives (0, 0).

    ``method_packets`` is either a collection of indices into ``full`` or a
    sub-trace whose records are matched against ``full`` by position.
    """
    calc = BoundsCalculator(full, model, horizon)
    return calc.bounds(_positions(calc.packets, method_packets))


def _positions(full: Sequence[PacketRecord], method_packets) -> list[int]:
    items = list(_packets(method_packets))
    if not items or isinstance(items[0], int):
        return items
    # match records in order; duplicates consume successive occurrences
    out = []
    j = 0
    for p in items:
        while j < len(full) and full[j] != p:
            j += 1
        if j == len(full):
            raise ValueError("method packets are not a subset of the full trace")
        out.append(j)
        j += 1
    return out
