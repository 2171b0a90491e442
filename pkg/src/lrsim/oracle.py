"""Event-level best-case recovery walk, used to cross-check the closed forms.

Replays the idealized single-burst scenario packet by packet: n consecutive
losses are fully known when the first retransmission reaches the bottleneck,
the surviving AW-n packets feed back duplicate ACKs spaced one service time
apart, and every recovery transmission earns a cumulative ACK one round-trip
after leaving the link.  The bottleneck is a unit-rate server tracked with a
busy cursor; idle time is accumulated between service starts.

This module deliberately shares no logic with :mod:`lrsim.analytic` beyond
the plain parameter types.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

from .core import LinkParams, RecoveryAlgo, rate_pkts


@dataclass
class OracleTrace:
    """Time-ordered bottleneck events plus the measured idle total."""

    events: list[tuple[float, str]] = field(default_factory=list)
    idle_s: float = 0.0


class _Link:
    """Unit-rate server with idle bookkeeping relative to the first completion."""

    def __init__(self, service_s: float, trace: OracleTrace | None) -> None:
        self.service_s = service_s
        self.busy_until: float | None = None
        self.idle_s = 0.0
        self.trace = trace

    def serve(self, release_t: float, label: str) -> float:
        """Start one service at or after release_t; returns completion time."""
        if self.busy_until is None:
            start = release_t
        else:
            start = max(release_t, self.busy_until)
            gap = start - self.busy_until
            if gap > 0.0:
                self.idle_s += gap
                if self.trace is not None:
                    self.trace.events.append((self.busy_until, "link_busy_end"))
        if self.trace is not None and (self.busy_until is None or start > self.busy_until):
            self.trace.events.append((start, "link_busy_start"))
        done = start + self.service_s
        self.busy_until = done
        if self.trace is not None:
            self.trace.events.append((done, label))
        return done

    def pending_gap(self, release_t: float) -> float:
        """Idle the link would accrue before serving a packet released at release_t."""
        if self.busy_until is None:
            return 0.0
        return max(0.0, release_t - self.busy_until)


class _Schedule:
    """Per-discipline send gate over the congestion-window trajectory."""

    def __init__(self, algo: RecoveryAlgo, or_enabled: bool, aw: int, beta: float) -> None:
        self.algo = algo
        self.or_enabled = or_enabled
        self.aw = aw
        self.half = math.ceil(0.5 * aw)
        self.target = math.ceil(beta * aw)
        self.beta = beta
        self.cw = float(aw)
        self._halve_ctr = 0

    def on_feedback(self, pipe: int) -> None:
        if self.algo is RecoveryAlgo.RH:
            # Burst-suppression clamp, then one halving step per two ACKs
            # while still above the reduction target.
            self.cw = min(self.cw, pipe + 1)
            if self.cw > self.target:
                self._halve_ctr += 1
                if self._halve_ctr >= 2:
                    self._halve_ctr = 0
                    self.cw = max(float(self.target), self.cw - 1)
        elif self.algo is RecoveryAlgo.PRR:
            self.cw = max(float(self.target), self.cw - (1.0 - self.beta))

    def may_send(self, pipe: int) -> bool:
        if self.algo in (RecoveryAlgo.QARR, RecoveryAlgo.BARR):
            return True
        if self.algo is RecoveryAlgo.STANDARD:
            return pipe < self.half
        if self.algo is RecoveryAlgo.RH:
            return pipe < self.cw
        # Proportional reduction: with the flow-control relaxation active the
        # round budget is pinned to the reduction target; without it the
        # decaying window trajectory gates the sends.
        if self.or_enabled:
            return pipe < self.target
        return pipe < self.cw


def _validate(algo: RecoveryAlgo, params: LinkParams, n: int, beta: float) -> None:
    if n < 1:
        raise ValueError("burst size must be >= 1")
    if n > params.awnd_pkts:
        raise ValueError(f"burst size {n} exceeds advertised window {params.awnd_pkts}")
    if n == params.awnd_pkts and algo in (RecoveryAlgo.STANDARD, RecoveryAlgo.RH, RecoveryAlgo.PRR):
        raise ValueError("burst equal to the full window leaves no feedback to clock recovery")
    if not 0.0 < beta <= 1.0:
        raise ValueError("beta must be in (0, 1]")


def oracle_imin(
    algo: RecoveryAlgo,
    or_enabled: bool,
    params: LinkParams,
    n: int,
    beta: float = 0.7,
    trace: OracleTrace | None = None,
) -> float:
    """Total bottleneck idle time over the best-case recovery window."""
    _validate(algo, params, n, beta)
    tau = params.packet_size_bytes * 8.0 / params.rate_bps
    u = params.rtt_prop_s
    aw = params.awnd_pkts
    gap = aw - n

    if algo is RecoveryAlgo.PRR and n > 2 * gap:
        idle = _walk_collapse_rounds(n, gap, math.ceil(beta * aw), tau, u, trace)
    else:
        idle = _walk_per_ack(algo, or_enabled, aw, n, beta, tau, u, trace)
    if trace is not None:
        trace.events.sort(key=lambda ev: ev[0])
        trace.idle_s = idle
    return idle


def _walk_per_ack(
    algo: RecoveryAlgo,
    or_enabled: bool,
    aw: int,
    n: int,
    beta: float,
    tau: float,
    u: float,
    trace: OracleTrace | None,
) -> float:
    gap = aw - n
    sched = _Schedule(algo, or_enabled, aw, beta)
    link = _Link(tau, trace)

    # Event heap: (time, seq, kind, is_new_ack).  Survivor DUPACKs arrive one
    # service time apart; with nothing surviving (window-adaptive engines
    # only) a single entry event stands in for the loss notification.
    events: list[tuple[float, int, str, bool]] = []
    seq = 0
    if gap > 0:
        for k in range(gap):
            events.append((k * tau, seq, "dup", False))
            seq += 1
    else:
        events.append((0.0, seq, "entry", False))
        seq += 1
    heapq.heapify(events)

    sacked = 0
    retx_sent = 0
    new_sent = 0
    outstanding = 0
    retx_acked = 0
    new_acked = 0

    def pipe() -> int:
        return (gap - sacked) + outstanding

    def snd_una() -> int:
        return retx_acked if retx_acked < n else aw + new_acked

    def new_permitted() -> bool:
        if retx_sent < n:
            return False
        if or_enabled:
            return new_sent < n + sacked + retx_acked + new_acked
        return new_sent < snd_una()

    closed = False
    while events and not closed:
        t, _, kind, is_new = heapq.heappop(events)
        if kind == "dup":
            sacked += 1
            sched.on_feedback(pipe())
        elif kind == "ack":
            outstanding -= 1
            if is_new:
                new_acked += 1
            else:
                retx_acked += 1
            sched.on_feedback(pipe())

        sent_here = 0
        while True:
            if retx_sent < n and sched.may_send(pipe()):
                retx_sent += 1
                outstanding += 1
                sent_here += 1
                done = link.serve(t, "retransmit_departed")
                heapq.heappush(events, (done + u, seq, "ack", False))
                seq += 1
            elif new_permitted() and sched.may_send(pipe()):
                closing = (not or_enabled) or kind in ("ack", "entry")
                if closing:
                    # The measurement window ends where this packet's service
                    # would begin; account the final gap and stop.
                    link.idle_s += link.pending_gap(t)
                    if trace is not None and link.busy_until is not None:
                        trace.events.append((max(t, link.busy_until), "first_new_departed"))
                    closed = True
                    break
                new_sent += 1
                outstanding += 1
                sent_here += 1
                done = link.serve(t, "new_departed")
                heapq.heappush(events, (done + u, seq, "ack", True))
                seq += 1
            else:
                break
        if kind in ("dup", "entry") and sacked <= 1 and retx_sent == 0 and sent_here == 0:
            # Fast retransmit of the head-of-line loss is unconditional.
            retx_sent += 1
            outstanding += 1
            done = link.serve(t, "retransmit_departed")
            heapq.heappush(events, (done + u, seq, "ack", False))
            seq += 1

    return link.idle_s


def _walk_collapse_rounds(
    n: int,
    gap: int,
    target: int,
    tau: float,
    u: float,
    trace: OracleTrace | None,
) -> float:
    """Window-collapse regime: feedback rounds with doubling send budgets.

    After the window collapses, regrowth doubles the per-round budget (two
    transmissions per returning ACK) up to the reduction target.  New data
    resumes with the feedback of the final retransmission round; the window
    closes on its first transmission.
    """
    link = _Link(tau, trace)
    remaining = n
    budget = min(2 * gap, target)
    release = 0.0
    while True:
        retx_here = min(budget, remaining)
        remaining -= retx_here
        first_done = None
        for i in range(budget):
            label = "retransmit_departed" if i < retx_here else "new_departed"
            done = link.serve(release if i == 0 else 0.0, label)
            if first_done is None:
                first_done = done
        assert first_done is not None
        if remaining == 0:
            next_release = first_done + u
            link.idle_s += link.pending_gap(next_release)
            if trace is not None and link.busy_until is not None:
                trace.events.append((max(next_release, link.busy_until), "first_new_departed"))
            return link.idle_s
        release = first_done + u
        budget = min(2 * budget, target)
