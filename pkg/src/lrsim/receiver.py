"""Receiver model: reassembly, ACK/SACK generation, window accounting.

The receive buffer backs the advertised window.  In-order bytes leave the
buffer at the application drain rate (infinite by default); out-of-order
ranges are held until the gap below them fills.  A segment arriving past
the advertised edge is kept only if buffer space is actually free at that
instant, otherwise it is discarded and the duplicate ACK it triggers
carries no new selective-acknowledgment information.
"""

from __future__ import annotations

import bisect
import math

from .core import Packet, normalize_blocks


class Receiver:
    def __init__(
        self,
        capacity_bytes: int,
        drain_rate_bps: float = math.inf,
        packet_size: int = 1515,
    ) -> None:
        self.capacity = capacity_bytes
        self.drain_rate = drain_rate_bps  # bytes/second of application reads
        self.packet_size = packet_size
        self.rcv_nxt = 0
        self.delivered = 0  # bytes handed to the application, in order
        self.ooo: list[tuple[int, int]] = []  # disjoint sorted ranges above rcv_nxt
        self._last_drain_t = 0.0
        self.discarded_overflow = 0
        self._ack_id = 0

    # -- buffer bookkeeping ---------------------------------------------
    @property
    def ooo_bytes(self) -> int:
        return sum(e - s for s, e in self.ooo)

    @property
    def buffered_bytes(self) -> int:
        return (self.rcv_nxt - self.delivered) + self.ooo_bytes

    @property
    def awnd_bytes(self) -> int:
        return max(0, self.capacity - self.buffered_bytes)

    def app_drain(self, now: float) -> int:
        """Drain in-order bytes at the application rate; returns bytes freed."""
        dt = now - self._last_drain_t
        self._last_drain_t = now
        pending = self.rcv_nxt - self.delivered
        if pending <= 0:
            return 0
        if math.isinf(self.drain_rate):
            freed = pending
        else:
            freed = min(pending, int(self.drain_rate * dt))
        self.delivered += freed
        return freed

    # -- arrivals ----------------------------------------------------------
    def on_data(self, pkt: Packet, now: float) -> Packet:
        """Process one data segment and emit the resulting (DUP)ACK."""
        self.app_drain(now)
        new_bytes = self._ingest(pkt)
        self.app_drain(now)
        return self._make_ack(pkt, now, new_bytes)

    def _ingest(self, pkt: Packet) -> int:
        s, e = pkt.seq_start, pkt.seq_end
        if e <= self.rcv_nxt or self._covered(s, e):
            return 0  # duplicate bytes are ignored; the ACK still goes out
        s = max(s, self.rcv_nxt)
        if self.buffered_bytes + (e - s) > self.capacity:
            self.discarded_overflow += 1
            return 0
        if s == self.rcv_nxt:
            self.rcv_nxt = e
            self._absorb_ooo()
        else:
            self.ooo = normalize_blocks(self.ooo + [(s, e)])
        return e - s

    def _covered(self, s: int, e: int) -> bool:
        i = bisect.bisect_right(self.ooo, (s, math.inf)) - 1
        return i >= 0 and self.ooo[i][0] <= s and e <= self.ooo[i][1]

    def _absorb_ooo(self) -> None:
        while self.ooo and self.ooo[0][0] <= self.rcv_nxt:
            s, e = self.ooo.pop(0)
            self.rcv_nxt = max(self.rcv_nxt, e)

    def _make_ack(self, data: Packet, now: float, new_bytes: int) -> Packet:
        self._ack_id += 1
        return Packet(
            id=self._ack_id,
            kind=Packet.ACK,
            cum_ack=self.rcv_nxt,
            sack_blocks=list(self.ooo),
            awnd_bytes=self.awnd_bytes,
            sent_at=now,
            ts_echo=data.sent_at,
        )
