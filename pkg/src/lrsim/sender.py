"""TCP sender model.

Holds the SACK scoreboard and pipe accounting, picks the next transmission
under congestion and flow control (optionally relaxed by opportunistic
retransmission), manages the send-buffer growth/fetch cycle and its stall
accounting, the duplicate-ACK counter driving the no-new-SACK fast
retransmit, and a minimal retransmission timer.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Callable

from .core import LinkParams, Packet, RecoveryConfig, VariantParams, normalize_blocks
from .recovery import EngineState, RecoveryEngine, make_engine

IDLE_CWND = "cwnd_limited"
IDLE_AWND = "awnd_limited"
IDLE_APP = "app_stalled"
IDLE_NO_WORK = "no_holes"


@dataclass
class Decision:
    kind: str  # "retransmit" | "new" | "idle"
    seq_start: int = 0
    seq_end: int = 0
    reason: str = ""


def stall_predicate(b_free_pkts: float, cw_pkts: float, beta: float) -> bool:
    """Whether a factor-two steady-state buffer can stall during recovery."""
    return (1.0 - beta) * cw_pkts < b_free_pkts <= (2.0 / 3.0) * cw_pkts


def min_sndbuf_factor(beta: float) -> float:
    """Smallest growth factor that rules the stall region out entirely."""
    if not 0.0 < beta <= 1.0:
        raise ValueError("beta must be in (0, 1]")
    return 3.0 * (1.0 + beta) / 2.0


class SndBuf:
    """Send buffer whose size shadows a multiple of the congestion window.

    Data is fetched from the application only once the freed share exceeds a
    third of the buffer, mirroring the wakeup threshold of the modelled
    stack.  occupied + free == size at all times.
    """

    def __init__(
        self,
        grow_factor: float,
        packet_size: int,
        app_backlog: int | None = None,
        cap_bytes: int = 64 * 1024 * 1024,
        initial_bytes: int = 16 * 1024,
    ) -> None:
        self.grow_factor = grow_factor
        self.packet_size = packet_size
        self.cap_bytes = cap_bytes
        self.size_bytes = initial_bytes
        self.queued_bytes = 0  # fetched but unsent
        self.unacked_bytes = 0
        self.app_backlog = app_backlog  # None = unbounded source
        self.fetched_total = 0

    @property
    def occupied_bytes(self) -> int:
        return self.queued_bytes + self.unacked_bytes

    @property
    def free_bytes(self) -> int:
        return max(0, self.size_bytes - self.occupied_bytes)

    def tick(self, cwnd_bytes: int) -> int:
        """Grow toward factor*cwnd and fetch when over the one-third mark."""
        target = int(self.grow_factor * cwnd_bytes)
        if target > self.size_bytes:
            self.size_bytes = min(self.cap_bytes, target)
        fetched = 0
        if self.free_bytes > self.size_bytes / 3.0:
            fetched = self.free_bytes
            if self.app_backlog is not None:
                fetched = min(fetched, self.app_backlog)
                self.app_backlog -= fetched
            self.queued_bytes += fetched
            self.fetched_total += fetched
        return fetched

    def on_new_sent(self, nbytes: int) -> None:
        assert nbytes <= self.queued_bytes
        self.queued_bytes -= nbytes
        self.unacked_bytes += nbytes

    def on_acked(self, nbytes: int) -> None:
        self.unacked_bytes = max(0, self.unacked_bytes - nbytes)

    @property
    def exhausted(self) -> bool:
        return self.app_backlog == 0 and self.queued_bytes == 0


class Scoreboard:
    """SACK bookkeeping in packet-aligned byte ranges."""

    def __init__(self, packet_size: int) -> None:
        self.s = packet_size
        self.snd_una = 0
        self.snd_nxt = 0
        self.sacked: list[tuple[int, int]] = []
        self.lost: set[int] = set()  # packet indexes detected missing
        self.retransmitted: set[int] = set()
        self._retx_queue: list[int] = []  # lost, not yet retransmitted, sorted

    # -- derived ---------------------------------------------------------
    @property
    def flight_bytes(self) -> int:
        return self.snd_nxt - self.snd_una

    @property
    def sacked_bytes(self) -> int:
        return sum(e - b for b, e in self.sacked)

    @property
    def highest_sacked(self) -> int:
        return self.sacked[-1][1] if self.sacked else self.snd_una

    def retx_outstanding_pkts(self) -> int:
        una = self.snd_una // self.s
        count = 0
        for idx in self.retransmitted:
            if idx >= una and not self._pkt_sacked(idx):
                count += 1
        return count

    @property
    def pipe_pkts(self) -> int:
        base = (self.flight_bytes - self.sacked_bytes) // self.s
        return max(0, base + self.retx_outstanding_pkts())

    def _pkt_sacked(self, idx: int) -> bool:
        b = idx * self.s
        i = bisect.bisect_right(self.sacked, (b, math.inf)) - 1
        return i >= 0 and self.sacked[i][0] <= b and (idx + 1) * self.s <= self.sacked[i][1]

    def hole_pkts(self) -> int:
        """Packets missing below the highest selectively acknowledged byte."""
        n1 = 0
        cursor = self.snd_una
        for b, e in self.sacked:
            if b > cursor:
                n1 += (b - cursor) // self.s
            cursor = max(cursor, e)
        return n1

    def sacked_pkts(self) -> int:
        return self.sacked_bytes // self.s

    # -- updates -----------------------------------------------------------
    def ingest(self, cum_ack: int, sack_blocks: list[tuple[int, int]]) -> tuple[int, int, int, bool]:
        """Merge ACK information; returns (n1, n2, pipe, new_sack)."""
        if cum_ack > self.snd_una:
            self.snd_una = cum_ack
            una_pkt = cum_ack // self.s
            self.sacked = [(max(b, cum_ack), e) for b, e in self.sacked if e > cum_ack]
            self.lost = {i for i in self.lost if i >= una_pkt}
            self.retransmitted = {i for i in self.retransmitted if i >= una_pkt}
            self._retx_queue = [i for i in self._retx_queue if i >= una_pkt]
        before = self.sacked_bytes
        blocks = [(max(b, self.snd_una), min(e, self.snd_nxt)) for b, e in sack_blocks]
        merged = normalize_blocks(self.sacked + [(b, e) for b, e in blocks if e > b])
        new_sack = sum(e - b for b, e in merged) > before
        self.sacked = merged
        return self.hole_pkts(), self.sacked_pkts(), self.pipe_pkts, new_sack

    def mark_lost_holes(self) -> int:
        """Flag unretransmitted holes below the highest SACKed byte as lost."""
        added = 0
        cursor = self.snd_una
        for b, e in self.sacked:
            for idx in range(cursor // self.s, b // self.s):
                if idx not in self.lost and idx not in self.retransmitted:
                    self.lost.add(idx)
                    bisect.insort(self._retx_queue, idx)
                    added += 1
            cursor = max(cursor, e)
        return added

    def next_retransmit(self) -> int | None:
        while self._retx_queue:
            idx = self._retx_queue[0]
            if self._pkt_sacked(idx) or idx * self.s < self.snd_una:
                self._retx_queue.pop(0)
                continue
            return idx
        return None

    def pop_retransmit(self) -> int | None:
        idx = self.next_retransmit()
        if idx is not None:
            self._retx_queue.pop(0)
            self.retransmitted.add(idx)
        return idx

    def requeue_head(self) -> int:
        """Queue the head-of-line packet for another retransmission."""
        idx = self.snd_una // self.s
        self.lost.add(idx)
        self.retransmitted.discard(idx)
        if idx not in self._retx_queue:
            bisect.insort(self._retx_queue, idx)
        return idx

    @property
    def holes_all_retransmitted(self) -> bool:
        return self.next_retransmit() is None


class RttTracker:
    def __init__(self, rto_floor: float = 0.2) -> None:
        self.srtt: float | None = None
        self.rttvar = 0.0
        self.base_rtt = math.inf
        self.rto_floor = rto_floor
        self.backoff = 1.0

    def on_sample(self, rtt: float) -> None:
        self.base_rtt = min(self.base_rtt, rtt)
        if self.srtt is None:
            self.srtt = rtt
            self.rttvar = rtt / 2.0
        else:
            self.rttvar = 0.75 * self.rttvar + 0.25 * abs(self.srtt - rtt)
            self.srtt = 0.875 * self.srtt + 0.125 * rtt
        self.backoff = 1.0

    @property
    def rto_s(self) -> float:
        if self.srtt is None:
            return 1.0 * self.backoff
        return max(self.rto_floor, self.srtt + 4.0 * self.rttvar) * self.backoff


@dataclass
class EpisodeStats:
    entered_at: float
    stall_s: float = 0.0
    stalled: bool = False


class Sender:
    """Single-connection sender; emit() hands packets to the network."""

    def __init__(
        self,
        params: LinkParams,
        cfg: RecoveryConfig,
        variant: VariantParams,
        emit: Callable[[Packet, float], None],
        app_backlog: int | None = None,
        initial_cwnd: int = 10,
        strict: bool = False,
    ) -> None:
        self.params = params
        self.cfg = cfg
        self.variant = variant
        self.emit = emit
        self.strict = strict
        s = params.packet_size_bytes
        self.s = s
        self.engine: RecoveryEngine = make_engine(cfg, variant, s)
        self.board = Scoreboard(s)
        self.sndbuf = SndBuf(cfg.sndbuf_factor, s, app_backlog)
        self.rtt = RttTracker()
        self.st = EngineState(cwnd=float(initial_cwnd))
        self.awnd_bytes = params.awnd_pkts * s
        self.in_recovery = False
        self.recovery_high = 0
        self.dup_count = 0
        self.h1_count = 0
        self.h1_fires = 0
        self._force_head = False
        self._pkt_id = 0
        self._ca_frac = 0.0
        self._rto_gen = 0
        self._rto_deadline: float | None = None
        self.timeouts = 0
        # stall accounting (time-weighted; recovery share kept separately)
        self._stalled_since: float | None = None
        self.stall_total_s = 0.0
        self.stall_recovery_s = 0.0
        self.episode: EpisodeStats | None = None
        self.on_recovery_enter: Callable[[float], None] | None = None
        self.on_recovery_exit: Callable[[float, EpisodeStats], None] | None = None
        self.or_extension_used = 0

    # -- helpers -----------------------------------------------------------
    def _sync_state(self) -> None:
        self.st.pipe = self.board.pipe_pkts
        self.st.flight = self.board.flight_bytes // self.s
        self.st.in_recovery = self.in_recovery

    @property
    def cwnd_pkts(self) -> int:
        return self.st.cwnd_pkts

    def or_allowance(self) -> int:
        if not self.in_recovery:
            return 0
        return self.engine.awnd_extension(
            self.board.hole_pkts(), self.board.sacked_pkts(), self.board.holes_all_retransmitted
        )

    # -- transmission selection ---------------------------------------------
    def select_transmission(self, now: float) -> Decision:
        self._sync_state()
        pipe = self.st.pipe
        cwnd = self.cwnd_pkts
        if self._force_head:
            idx = self.board.pop_retransmit()
            self._force_head = False
            if idx is not None:
                return Decision("retransmit", idx * self.s, (idx + 1) * self.s)
        if pipe < cwnd:
            idx = self.board.next_retransmit()
            if idx is not None:
                self.board.pop_retransmit()
                return Decision("retransmit", idx * self.s, (idx + 1) * self.s)
        else:
            if self.board.next_retransmit() is not None or self._new_data_ready():
                return Decision("idle", reason=IDLE_CWND)
            return Decision("idle", reason=IDLE_NO_WORK)
        # new data
        limit = self.board.snd_una + self.awnd_bytes + self.or_allowance() * self.s
        if self.board.snd_nxt + self.s > limit:
            return Decision("idle", reason=IDLE_AWND)
        if self.sndbuf.queued_bytes < self.s:
            if self.sndbuf.exhausted:
                return Decision("idle", reason=IDLE_NO_WORK)
            return Decision("idle", reason=IDLE_APP)
        start = self.board.snd_nxt
        return Decision("new", start, start + self.s)

    def _new_data_ready(self) -> bool:
        return self.sndbuf.queued_bytes >= self.s or not self.sndbuf.exhausted

    # -- the send loop -------------------------------------------------------
    def try_send(self, now: float) -> str:
        """Send while permitted; returns the final idle reason."""
        reason = IDLE_NO_WORK
        while True:
            d = self.select_transmission(now)
            if d.kind == "idle":
                reason = d.reason
                break
            self._pkt_id += 1
            pkt = Packet(
                id=self._pkt_id,
                kind=Packet.DATA,
                seq_start=d.seq_start,
                seq_end=d.seq_end,
                is_retransmit=(d.kind == "retransmit"),
                sent_at=now,
            )
            if d.kind == "new":
                beyond = d.seq_end - (self.board.snd_una + self.awnd_bytes)
                if beyond > 0:
                    self.or_extension_used += 1
                self.board.snd_nxt = d.seq_end
                self.sndbuf.on_new_sent(self.s)
            if self.strict:
                self._check_send_invariants(d)
            self.emit(pkt, now)
        self._note_stall_state(now, reason)
        return reason

    def _check_send_invariants(self, d: Decision) -> None:
        limit = self.board.snd_una + self.awnd_bytes + self.or_allowance() * self.s
        assert self.board.snd_nxt <= limit + self.s, "flow-control violation"
        assert self.board.pipe_pkts <= max(self.cwnd_pkts, self.st.pipe + 1), "pipe overran cwnd"

    # -- stall accounting ------------------------------------------------------
    def _note_stall_state(self, now: float, reason: str) -> None:
        stalled = reason == IDLE_APP
        if stalled and self._stalled_since is None:
            self._stalled_since = now
        elif not stalled and self._stalled_since is not None:
            self._account_stall(now)

    def _account_stall(self, now: float) -> None:
        if self._stalled_since is None:
            return
        dt = now - self._stalled_since
        self.stall_total_s += dt
        if self.in_recovery:
            self.stall_recovery_s += dt
            if self.episode is not None:
                self.episode.stall_s += dt
                if dt > 0:
                    self.episode.stalled = True
        self._stalled_since = None

    # -- ACK processing -----------------------------------------------------------
    def on_ack(self, ack: Packet, now: float) -> None:
        self._account_stall(now)
        rtt_sample = -1.0
        if ack.ts_echo >= 0.0:
            rtt_sample = now - ack.ts_echo
            self.rtt.on_sample(rtt_sample)
        self.awnd_bytes = ack.awnd_bytes
        prev_una = self.board.snd_una
        n1, n2, pipe, new_sack = self.board.ingest(ack.cum_ack, ack.sack_blocks)
        newly_cum = ack.cum_ack - prev_una
        cum_advanced = newly_cum > 0
        if cum_advanced:
            self.sndbuf.on_acked(newly_cum)
            self.dup_count = 0
            self._arm_rto(now, fresh=True)
        self.engine.pkts_acked(now, ack.cum_ack, self.board.pipe_pkts, rtt_sample)

        if not cum_advanced:
            self.dup_count += 1
            if self.in_recovery:
                self._hack1_step(new_sack)

        if not self.in_recovery:
            if self._should_enter(new_sack):
                self._enter_recovery(now)
            else:
                self._grow_window(newly_cum // self.s)
        if self.in_recovery:
            self.board.mark_lost_holes()
            self._sync_state()
            self.engine.on_ack_reduction(self.st, newly_cum // self.s + (1 if new_sack else 0), rtt_sample)
            if self.board.snd_una >= self.recovery_high:
                self._exit_recovery(now)
        self.sndbuf.tick(self.cwnd_pkts * self.s)
        self.try_send(now)

    def _should_enter(self, new_sack: bool) -> bool:
        if self.board.highest_sacked <= self.board.snd_una:
            return False
        if self.cfg.entry_fack:
            return self.board.hole_pkts() > self.cfg.dupthresh
        return self.dup_count >= self.cfg.dupthresh

    def _enter_recovery(self, now: float) -> None:
        self.in_recovery = True
        self.recovery_high = self.board.snd_nxt
        self.board.mark_lost_holes()
        self._sync_state()
        self.engine.init_reduction(self.st)
        self.h1_count = 0
        self.episode = EpisodeStats(entered_at=now)
        if self.on_recovery_enter is not None:
            self.on_recovery_enter(now)

    def _exit_recovery(self, now: float) -> None:
        self._account_stall(now)
        self.in_recovery = False
        self._sync_state()
        self.engine.end_reduction(self.st)
        self.dup_count = 0
        self.h1_count = 0
        ep = self.episode
        self.episode = None
        if self.on_recovery_exit is not None and ep is not None:
            self.on_recovery_exit(now, ep)

    def _grow_window(self, newly_acked_pkts: int) -> None:
        if newly_acked_pkts <= 0:
            return
        for _ in range(newly_acked_pkts):
            self._ca_frac += self.engine.ca_step(self.st)
        whole = int(self._ca_frac)
        if whole:
            self._ca_frac -= whole
            self.st.cwnd += whole
        self.st.cwnd = min(self.st.cwnd, float(self.params.awnd_pkts))
        self.st.cwnd = max(self.st.cwnd, 1.0)

    # -- the no-new-SACK duplicate counter --------------------------------------
    def hack1_on_dupack(self, new_sack: bool) -> bool:
        """Returns True when a head-of-line fast retransmit is triggered."""
        if not self.cfg.hack1_enabled or not self.in_recovery:
            return False
        if new_sack:
            self.h1_count = 0
            return False
        self.h1_count += 1
        if self.h1_count >= self.cfg.dupthresh:
            self.h1_count = 0
            self.h1_fires += 1
            self.board.requeue_head()
            self._force_head = True
            return True
        return False

    def _hack1_step(self, new_sack: bool) -> None:
        self.hack1_on_dupack(new_sack)

    # -- retransmission timer -------------------------------------------------------
    def _arm_rto(self, now: float, fresh: bool) -> None:
        self._rto_gen += 1
        if fresh:
            self.rtt.backoff = 1.0
        if self.board.flight_bytes > 0:
            self._rto_deadline = now + self.rtt.rto_s
        else:
            self._rto_deadline = None

    def rto_deadline(self) -> float | None:
        return self._rto_deadline

    def on_rto(self, now: float) -> None:
        """Timer expiry: head-of-line retransmit, window to one, slow start."""
        self._account_stall(now)
        if self.board.flight_bytes == 0:
            return
        self.timeouts += 1
        if self.in_recovery:
            self.in_recovery = False
            ep = self.episode
            self.episode = None
            if self.on_recovery_exit is not None and ep is not None:
                self.on_recovery_exit(now, ep)
        self.st.ssthresh = max(2.0, math.ceil(0.5 * self.board.flight_bytes / self.s))
        self.st.cwnd = 1.0
        self._ca_frac = 0.0
        self.dup_count = 0
        self.board.requeue_head()
        self._force_head = True
        self.rtt.backoff *= 2.0
        self._rto_gen += 1
        self._rto_deadline = now + self.rtt.rto_s
        self.try_send(now)

    # -- application start ------------------------------------------------------------
    def start(self, now: float) -> None:
        self.sndbuf.tick(self.cwnd_pkts * self.s)
        self.try_send(now)
        self._arm_rto(now, fresh=True)
