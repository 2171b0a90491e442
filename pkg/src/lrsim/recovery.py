"""Pluggable per-ACK loss-recovery engines and the two rate estimators.

Engines share one hook interface so the sender never branches on the
algorithm: entry initialisation, a per-ACK window update, exit cleanup, an
estimator feed, and the opportunistic allowance.  Engines are per-connection
state machines; instances are never shared.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

from .core import RecoveryAlgo, RecoveryConfig, SsthreshRule, VariantParams


def estimate_queue(pipe_pkts: int, rtt_s: float, base_rtt_s: float) -> float:
    """Backlog estimate from the round-trip inflation: pipe*(rtt-base)/rtt."""
    if pipe_pkts <= 0 or rtt_s <= 0:
        return 0.0
    if rtt_s < base_rtt_s:
        return 0.0
    return pipe_pkts * (rtt_s - base_rtt_s) / rtt_s


@dataclass
class QueueEstimator:
    qt: int = 5
    base_rtt_s: float = math.inf
    last_q: float = 0.0

    def on_rtt(self, pipe_pkts: int, rtt_s: float) -> float:
        if rtt_s < self.base_rtt_s:
            self.base_rtt_s = rtt_s
        self.last_q = estimate_queue(pipe_pkts, rtt_s, self.base_rtt_s)
        return self.last_q

    @property
    def over_target(self) -> float:
        return max(self.last_q - self.qt, 0.0)


class BandwidthEstimator:
    """ACK-rate bandwidth estimate over a sliding window of M intervals."""

    def __init__(self, slide_m: int = 200) -> None:
        if slide_m < 1:
            raise ValueError("slide_m must be >= 1")
        self.m = slide_m
        self._samples: deque[tuple[float, int]] = deque(maxlen=slide_m + 1)
        self.last_bps: float = 0.0  # bytes/second

    def update(self, t_new: float, ack_new: int) -> float:
        if self._samples:
            t_last, ack_last = self._samples[-1]
            if t_new <= t_last or ack_new < ack_last:
                return self.last_bps  # out-of-order or regressing sample
        self._samples.append((t_new, ack_new))
        if len(self._samples) == self.m + 1:
            t0, a0 = self._samples[0]
            self.last_bps = (ack_new - a0) / (t_new - t0)
        return self.last_bps

    @property
    def warm(self) -> bool:
        return self.last_bps > 0.0


@dataclass
class EngineState:
    """The slice of sender state the engines read and write."""

    cwnd: float = 1.0
    ssthresh: float = math.inf
    pipe: int = 0
    flight: int = 0
    in_recovery: bool = False

    @property
    def cwnd_pkts(self) -> int:
        return max(1, int(self.cwnd))


class RecoveryEngine:
    """Hook set shared by all disciplines; subclasses override the pieces."""

    algo: RecoveryAlgo

    def __init__(self, cfg: RecoveryConfig, variant: VariantParams) -> None:
        self.cfg = cfg
        self.variant = variant
        self.queue_est = QueueEstimator(qt=cfg.qt_pkts)
        self.bw_est = BandwidthEstimator(cfg.slide_m)
        self._frac = 0.0  # sub-packet reduction accumulator, reset per episode

    # -- entry / exit -------------------------------------------------
    def init_reduction(self, st: EngineState) -> None:
        st.ssthresh = max(1.0, self._entry_ssthresh(st))
        self._frac = 0.0

    def end_reduction(self, st: EngineState) -> None:
        st.cwnd = max(1.0, st.ssthresh)
        self._frac = 0.0

    def _entry_ssthresh(self, st: EngineState) -> float:
        rule = self.variant.ssthresh_rule
        if rule is SsthreshRule.VENO_CONDITIONAL:
            beta = 0.8 if self.queue_est.last_q <= self.queue_est.qt else 0.5
            return beta * st.cwnd
        if rule is SsthreshRule.WESTWOOD_BDP and self.bw_est.warm:
            base = self.queue_est.base_rtt_s
            if math.isfinite(base):
                pkt = self._pkt_bytes
                return (self.bw_est.last_bps / pkt) * base
        return self.variant.beta * st.cwnd

    # -- per-ACK window update ----------------------------------------
    def on_ack_reduction(self, st: EngineState, newly_acked_sacked: int, rtt_s: float) -> None:
        raise NotImplementedError

    # -- estimator feed (every ACK, in or out of recovery) -------------
    def pkts_acked(self, now: float, cum_ack_bytes: int, pipe_pkts: int, rtt_s: float) -> None:
        if rtt_s > 0:
            self.queue_est.on_rtt(pipe_pkts, rtt_s)
        self.bw_est.update(now, cum_ack_bytes)

    # -- opportunistic retransmission allowance ------------------------
    def awnd_extension(self, n1: int, n2: int, holes_all_retransmitted: bool) -> int:
        if not self.cfg.or_enabled or not holes_all_retransmitted:
            return 0
        return n1 + n2

    # -- congestion-avoidance gate outside recovery ---------------------
    def ca_step(self, st: EngineState) -> float:
        """Window growth per newly acked packet outside recovery."""
        if st.cwnd < st.ssthresh:
            return 1.0
        return 1.0 / max(st.cwnd, 1.0)

    _pkt_bytes = 1515

    def set_pkt_bytes(self, n: int) -> None:
        self._pkt_bytes = n

    def _drain_frac(self, st: EngineState, step: float, floor: float) -> None:
        """Apply a fractional reduction, moving cwnd only on integer crossings."""
        self._frac += step
        whole = int(self._frac)
        if whole:
            self._frac -= whole
            st.cwnd = max(floor, st.cwnd - whole)


class StandardEngine(RecoveryEngine):
    algo = RecoveryAlgo.STANDARD

    def init_reduction(self, st: EngineState) -> None:
        st.ssthresh = max(1.0, math.ceil(0.5 * st.flight))
        st.cwnd = st.ssthresh
        self._frac = 0.0

    def on_ack_reduction(self, st: EngineState, newly_acked_sacked: int, rtt_s: float) -> None:
        pass  # window pinned at the halved flight for the whole episode


class RateHalvingEngine(RecoveryEngine):
    algo = RecoveryAlgo.RH

    def init_reduction(self, st: EngineState) -> None:
        super().init_reduction(st)
        self._ack_parity = 0

    def on_ack_reduction(self, st: EngineState, newly_acked_sacked: int, rtt_s: float) -> None:
        if st.pipe + 1 < st.cwnd:
            st.cwnd = st.pipe + 1
        if st.cwnd > st.ssthresh:
            self._ack_parity += 1
            if self._ack_parity >= 2:
                self._ack_parity = 0
                st.cwnd = max(st.ssthresh, st.cwnd - 1)
        # below ssthresh the window stays wherever the clamp put it


class PrrEngine(RecoveryEngine):
    algo = RecoveryAlgo.PRR

    def on_ack_reduction(self, st: EngineState, newly_acked_sacked: int, rtt_s: float) -> None:
        if st.pipe + 1 < st.cwnd:
            st.cwnd = st.pipe + 1
        if st.cwnd > st.ssthresh:
            self._drain_frac(st, 1.0 - self.variant.beta, st.ssthresh)
        elif st.cwnd < st.ssthresh:
            st.cwnd = min(st.ssthresh, st.cwnd + 1)  # slow-start style regrowth


class QarrEngine(RecoveryEngine):
    algo = RecoveryAlgo.QARR

    def init_reduction(self, st: EngineState) -> None:
        # no ssthresh: the window answers only to the queue estimate
        self._frac = 0.0

    def end_reduction(self, st: EngineState) -> None:
        self._frac = 0.0

    def on_ack_reduction(self, st: EngineState, newly_acked_sacked: int, rtt_s: float) -> None:
        over = self.queue_est.over_target
        if over > 0:
            self._drain_frac(st, over, 1.0)

    def ca_step(self, st: EngineState) -> float:
        if not self.cfg.qarr_vegas_growth:
            return super().ca_step(st)
        q = self.queue_est.last_q
        if q < self.queue_est.qt:
            return 1.0 / max(st.cwnd, 1.0)
        if q > self.queue_est.qt:
            return -1.0 / max(st.cwnd, 1.0)
        return 0.0


class BarrEngine(RecoveryEngine):
    algo = RecoveryAlgo.BARR

    def init_reduction(self, st: EngineState) -> None:
        self._frac = 0.0

    def end_reduction(self, st: EngineState) -> None:
        self._frac = 0.0

    def on_ack_reduction(self, st: EngineState, newly_acked_sacked: int, rtt_s: float) -> None:
        if not self.bw_est.warm:
            return  # warming up: leave the window alone
        rtt = self.queue_est.base_rtt_s if self.cfg.barr_use_min_rtt else rtt_s
        if rtt <= 0 or not math.isfinite(rtt):
            return
        rate_pkts = self.bw_est.last_bps / self._pkt_bytes
        st.cwnd = max(1.0, round(rate_pkts * rtt))


_ENGINES = {
    RecoveryAlgo.STANDARD: StandardEngine,
    RecoveryAlgo.RH: RateHalvingEngine,
    RecoveryAlgo.PRR: PrrEngine,
    RecoveryAlgo.QARR: QarrEngine,
    RecoveryAlgo.BARR: BarrEngine,
}


def make_engine(cfg: RecoveryConfig, variant: VariantParams, pkt_bytes: int = 1515) -> RecoveryEngine:
    engine = _ENGINES[cfg.algorithm](cfg, variant)
    engine.set_pkt_bytes(pkt_bytes)
    return engine
