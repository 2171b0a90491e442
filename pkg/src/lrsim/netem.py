"""Discrete-event scheduler and the bottleneck link with pluggable loss.

The scheduler is a plain time-ordered heap with an insertion tiebreak, so a
given seed and configuration always replays the identical event sequence.
The link is a FIFO byte queue served at a constant bit rate; the loss model
runs at ingress, before the tail-drop check.
"""

from __future__ import annotations

import heapq
import random
from typing import Callable

from .core import LinkParams, LossKind, LossModel, Packet

QUEUED = "queued"
TAIL_DROPPED = "tail_dropped"
LOSS_DROPPED = "loss_dropped"


class EventQueue:
    def __init__(self) -> None:
        self._heap: list[tuple[float, int, Callable[[float], None]]] = []
        self._seq = 0
        self.now = 0.0

    def schedule(self, at: float, fn: Callable[[float], None]) -> None:
        if at < self.now:
            raise ValueError("cannot schedule into the past")
        heapq.heappush(self._heap, (at, self._seq, fn))
        self._seq += 1

    def run(self, until: float, stop: Callable[[], bool] | None = None) -> float:
        while self._heap and self._heap[0][0] <= until:
            t, _, fn = heapq.heappop(self._heap)
            self.now = t
            fn(t)
            if stop is not None and stop():
                return self.now
        self.now = until
        return self.now

    def __len__(self) -> int:
        return len(self._heap)


class BottleneckLink:
    """Constant-rate FIFO with byte capacity, ingress loss, and idle accounting."""

    def __init__(
        self,
        params: LinkParams,
        loss: LossModel,
        events: EventQueue,
        rng: random.Random,
        deliver: Callable[[Packet, float], None],
    ) -> None:
        self.params = params
        self.loss = loss
        self.events = events
        self.rng = rng
        self.deliver = deliver
        self.busy_until = 0.0
        self.queued_bytes = 0
        self.departed = 0
        self.drops_loss = 0
        self.drops_tail = 0
        self._idle_acc = 0.0
        self._served_any = False
        self._scripted_left = set(loss.scripted_drops)
        self.on_departure: Callable[[Packet, float], None] | None = None

    # -- loss model -----------------------------------------------------
    def _loss_model_drops(self, pkt: Packet) -> bool:
        if self.loss.protect_retransmits and pkt.is_retransmit:
            return False
        kind = self.loss.kind
        if kind is LossKind.NONE:
            return False
        if kind is LossKind.RANDOM_RATE:
            return self.rng.random() < self.loss.rate
        seq_pkt = pkt.seq_start // self.params.packet_size_bytes
        if kind is LossKind.CONSECUTIVE_BURST:
            if pkt.is_retransmit:
                return False
            lo = self.loss.trigger_seq
            return lo <= seq_pkt < lo + self.loss.burst_len
        if kind is LossKind.SCRIPTED:
            if pkt.is_retransmit:
                return False
            if seq_pkt in self._scripted_left:
                self._scripted_left.discard(seq_pkt)  # one-shot per entry
                return True
            return False
        return False

    # -- ingress ----------------------------------------------------------
    def enqueue(self, pkt: Packet, now: float) -> str:
        if self._loss_model_drops(pkt):
            self.drops_loss += 1
            return LOSS_DROPPED
        size = pkt.size_bytes
        if self.queued_bytes + size > self.params.buffer_bytes:
            self.drops_tail += 1
            return TAIL_DROPPED
        start = max(now, self.busy_until)
        if self._served_any and start > self.busy_until:
            self._idle_acc += start - self.busy_until
        self._served_any = True
        self.queued_bytes += size
        done = start + 8.0 * size / self.params.rate_bps
        self.busy_until = done
        self.events.schedule(done, lambda t, p=pkt: self._depart(p, t))
        return QUEUED

    def _depart(self, pkt: Packet, now: float) -> None:
        self.queued_bytes -= pkt.size_bytes
        self.departed += 1
        if self.on_departure is not None:
            self.on_departure(pkt, now)
        self.deliver(pkt, now)

    # -- idle accounting ---------------------------------------------------
    def idle_integral(self, t: float) -> float:
        """Cumulative idle time since the first service, evaluated at t."""
        if not self._served_any:
            return 0.0
        return self._idle_acc + max(0.0, t - self.busy_until)

    def queueing_delay(self, now: float) -> float:
        return max(0.0, self.busy_until - now)


class IdleWindow:
    """Measures link idle time and departures over an open interval."""

    def __init__(self, link: BottleneckLink) -> None:
        self.link = link
        self.t0: float | None = None
        self._idle0 = 0.0
        self._departed0 = 0

    @property
    def is_open(self) -> bool:
        return self.t0 is not None

    def open(self, t: float, include_current: bool = True) -> None:
        self.t0 = t
        self._idle0 = self.link.idle_integral(t)
        # include_current counts the departure that triggered the opening
        self._departed0 = self.link.departed - (1 if include_current else 0)

    def close(self, t: float) -> tuple[float, float, int]:
        """Returns (duration, idle_s, departures) and resets."""
        assert self.t0 is not None, "window never opened"
        duration = t - self.t0
        idle = self.link.idle_integral(t) - self._idle0
        departed = self.link.departed - self._departed0
        self.t0 = None
        return duration, idle, departed
