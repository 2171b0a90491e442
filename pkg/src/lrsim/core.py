"""Shared domain types and unit conversions.

Everything downstream (analytic model, best-case oracle, full simulator)
speaks in terms of these types.  All windows are whole packets; byte
quantities are always multiples of the fixed packet size.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

#: Link-layer + IP + TCP header bytes carried by every packet.  Goodput is
#: computed on the remaining payload; the wire always carries full packets.
HEADER_BYTES = 54


class RecoveryAlgo(enum.Enum):
    STANDARD = "standard"
    RH = "rh"
    PRR = "prr"
    QARR = "qarr"
    BARR = "barr"


class Variant(enum.Enum):
    CUBIC = "cubic"
    RENO = "reno"
    VENO = "veno"
    WESTWOOD = "westwood"
    VEGAS = "vegas"


class SsthreshRule(enum.Enum):
    FIXED_BETA = "fixed_beta"
    VENO_CONDITIONAL = "veno_conditional"
    WESTWOOD_BDP = "westwood_bdp"


class LossKind(enum.Enum):
    NONE = "none"
    RANDOM_RATE = "rate"
    CONSECUTIVE_BURST = "burst"
    SCRIPTED = "script"


@dataclass(frozen=True)
class LinkParams:
    """Bottleneck link description.

    rate_bps        link capacity in bits/second
    packet_size_bytes  fixed on-wire packet size
    rtt_prop_s      round-trip propagation delay in seconds
    awnd_pkts       receiver advertised window in packets
    buffer_bytes    link queue capacity in bytes
    """

    rate_bps: float
    packet_size_bytes: int
    rtt_prop_s: float
    awnd_pkts: int
    buffer_bytes: int

    def __post_init__(self) -> None:
        if self.rate_bps <= 0:
            raise ValueError("rate_bps must be positive")
        if self.packet_size_bytes <= 0:
            raise ValueError("packet_size_bytes must be positive")
        if self.rtt_prop_s < 0:
            raise ValueError("rtt_prop_s must be non-negative")
        if self.awnd_pkts <= 0:
            raise ValueError("awnd_pkts must be positive")
        if self.buffer_bytes <= 0:
            raise ValueError("buffer_bytes must be positive")

    @property
    def service_time_s(self) -> float:
        """Transmission time of one packet at the bottleneck."""
        return 8.0 * self.packet_size_bytes / self.rate_bps

    def check_bdp_window(self) -> bool:
        """Whether the advertised window covers the bandwidth-delay product."""
        return self.awnd_pkts >= rate_pkts(self) * self.rtt_prop_s


def rate_pkts(params: LinkParams) -> float:
    """Link capacity in packets/second."""
    return params.rate_bps / (8.0 * params.packet_size_bytes)


def awnd_auto(params: LinkParams) -> int:
    """Advertised window matched to the bandwidth-delay product (packets)."""
    return int(rate_pkts(params) * params.rtt_prop_s)


def make_link_params(
    rate_bps: float,
    rtt_prop_s: float,
    packet_size_bytes: int = 1515,
    awnd_pkts: int | None = None,
    buffer_bytes: int = 4_300_000,
) -> LinkParams:
    """Build LinkParams, deriving the advertised window from C*U when unset."""
    if awnd_pkts is None:
        probe = LinkParams(rate_bps, packet_size_bytes, rtt_prop_s, 1, buffer_bytes)
        awnd_pkts = awnd_auto(probe)
        if awnd_pkts < 1:
            raise ValueError("derived advertised window is empty; give awnd_pkts explicitly")
    return LinkParams(rate_bps, packet_size_bytes, rtt_prop_s, awnd_pkts, buffer_bytes)


@dataclass
class RecoveryConfig:
    """Knobs selecting the loss-recovery engine and the two optimizations."""

    algorithm: RecoveryAlgo = RecoveryAlgo.PRR
    or_enabled: bool = False
    hack1_enabled: bool = False
    sndbuf_factor: float = 3.0
    qt_pkts: int = 5
    slide_m: int = 200
    dupthresh: int = 3
    barr_use_min_rtt: bool = False
    qarr_vegas_growth: bool = True
    entry_fack: bool = False

    def __post_init__(self) -> None:
        if self.sndbuf_factor < 1:
            raise ValueError("sndbuf_factor must be >= 1")
        if self.qt_pkts < 1:
            raise ValueError("qt_pkts must be >= 1")
        if self.slide_m < 1:
            raise ValueError("slide_m must be >= 1")
        if self.dupthresh < 1:
            raise ValueError("dupthresh must be >= 1")


_VARIANT_DEFAULTS: dict[Variant, tuple[float, SsthreshRule]] = {
    Variant.CUBIC: (0.7, SsthreshRule.FIXED_BETA),
    Variant.RENO: (0.5, SsthreshRule.FIXED_BETA),
    Variant.VENO: (0.8, SsthreshRule.VENO_CONDITIONAL),
    Variant.WESTWOOD: (0.5, SsthreshRule.WESTWOOD_BDP),
    Variant.VEGAS: (0.5, SsthreshRule.FIXED_BETA),
}


@dataclass(frozen=True)
class VariantParams:
    """Loss-response parameters of a congestion-control variant."""

    name: Variant
    beta: float
    ssthresh_rule: SsthreshRule

    def __post_init__(self) -> None:
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must be in (0, 1]")

    @classmethod
    def default(cls, name: Variant) -> "VariantParams":
        beta, rule = _VARIANT_DEFAULTS[name]
        return cls(name, beta, rule)


@dataclass(frozen=True)
class LossModel:
    """Packet-drop policy applied at the bottleneck ingress.

    protect_retransmits exempts packets flagged as retransmissions from the
    loss model (tail drops still apply).
    """

    kind: LossKind = LossKind.NONE
    rate: float = 0.0
    burst_len: int = 1
    trigger_seq: int = 0
    scripted_drops: tuple[int, ...] = ()
    protect_retransmits: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.rate < 1.0:
            raise ValueError("loss rate must be in [0, 1)")
        if self.burst_len < 1:
            raise ValueError("burst_len must be >= 1")

    @classmethod
    def none(cls) -> "LossModel":
        return cls()

    @classmethod
    def random(cls, rate: float, protect_retransmits: bool = False) -> "LossModel":
        return cls(kind=LossKind.RANDOM_RATE, rate=rate, protect_retransmits=protect_retransmits)

    @classmethod
    def burst(cls, n: int, trigger_seq: int, protect_retransmits: bool = False) -> "LossModel":
        return cls(
            kind=LossKind.CONSECUTIVE_BURST,
            burst_len=n,
            trigger_seq=trigger_seq,
            protect_retransmits=protect_retransmits,
        )

    @classmethod
    def scripted(cls, drops: tuple[int, ...], protect_retransmits: bool = False) -> "LossModel":
        return cls(
            kind=LossKind.SCRIPTED,
            scripted_drops=tuple(sorted(drops)),
            protect_retransmits=protect_retransmits,
        )


def normalize_blocks(blocks: list[tuple[int, int]]) -> list[tuple[int, int]]:
    """Sort and merge byte ranges; drops empty ranges.  Idempotent."""
    spans = sorted((s, e) for s, e in blocks if e > s)
    merged: list[tuple[int, int]] = []
    for s, e in spans:
        if merged and s <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], e))
        else:
            merged.append((s, e))
    return merged


class Packet:
    """On-wire unit for the full simulator (data segment or ACK)."""

    __slots__ = (
        "id",
        "kind",
        "seq_start",
        "seq_end",
        "is_retransmit",
        "sack_blocks",
        "cum_ack",
        "awnd_bytes",
        "sent_at",
        "ts_echo",
    )

    DATA = 0
    ACK = 1

    def __init__(
        self,
        id: int,
        kind: int,
        seq_start: int = 0,
        seq_end: int = 0,
        is_retransmit: bool = False,
        sack_blocks: list[tuple[int, int]] | None = None,
        cum_ack: int = 0,
        awnd_bytes: int = 0,
        sent_at: float = 0.0,
        ts_echo: float = -1.0,
    ) -> None:
        if kind == Packet.DATA and seq_start >= seq_end:
            raise ValueError("data packet needs a non-empty byte range")
        self.id = id
        self.kind = kind
        self.seq_start = seq_start
        self.seq_end = seq_end
        self.is_retransmit = is_retransmit
        self.sack_blocks = normalize_blocks(sack_blocks) if sack_blocks else []
        self.cum_ack = cum_ack
        self.awnd_bytes = awnd_bytes
        self.sent_at = sent_at
        self.ts_echo = ts_echo

    @property
    def size_bytes(self) -> int:
        return self.seq_end - self.seq_start if self.kind == Packet.DATA else 0

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        if self.kind == Packet.DATA:
            tag = "R" if self.is_retransmit else "D"
            return f"<{tag}#{self.id} [{self.seq_start},{self.seq_end})>"
        return f"<A#{self.id} cum={self.cum_ack} sack={self.sack_blocks}>"
