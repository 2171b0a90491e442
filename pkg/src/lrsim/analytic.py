"""Closed-form minimum link idle time and best-case bandwidth utilization.

Evaluates, for each loss-recovery discipline, the minimum time the
bottleneck stays idle while recovering from a burst of n consecutive
losses, together with the corresponding utilization bound.  The piecewise
expressions are evaluated exactly as stated; the event-level check lives in
:mod:`lrsim.oracle` and deliberately shares no code with this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator

from .core import LinkParams, RecoveryAlgo, rate_pkts


@dataclass(frozen=True)
class IdleTimeResult:
    imin_s: float
    case_label: str
    eta: float
    n_counted: int
    eta_opportunistic: float | None = None


def _validate(algo: RecoveryAlgo, params: LinkParams, n: int, beta: float) -> None:
    if n < 1:
        raise ValueError("burst size must be >= 1")
    aw = params.awnd_pkts
    if n > aw:
        raise ValueError(f"burst size {n} exceeds advertised window {aw}")
    if n == aw and algo in (RecoveryAlgo.STANDARD, RecoveryAlgo.RH, RecoveryAlgo.PRR):
        # With every in-flight packet lost there is no returning feedback to
        # clock ACK-driven recovery; the rate-halving/proportional branches
        # are undefined (division by AW - n).
        raise ValueError("burst equal to the full window leaves no feedback to clock recovery")
    if not 0.0 < beta <= 1.0:
        raise ValueError("beta must be in (0, 1]")


def _collapse_budgets(ss: int, gap: int, n: int) -> list[int]:
    """Per-feedback-round send budgets of the window-collapse regime.

    Budgets double each round, capped at the reduction target, until they
    cover all n retransmissions.  Each term is >= 1 whenever gap >= 1, so
    the iteration terminates.
    """
    budgets: list[int] = []
    total = 0
    r = 1
    while total < n:
        b = min(ss, gap * (2**r))
        budgets.append(b)
        total += b
        r += 1
    return budgets


def imin(
    algo: RecoveryAlgo,
    or_enabled: bool,
    params: LinkParams,
    n: int,
    beta: float = 0.7,
    count_opportunistic: bool = False,
) -> IdleTimeResult:
    """Minimum link idle time over the best-case recovery window.

    beta is only read by the branches whose expression contains it (the
    rate-halving and proportional-reduction cases with opportunistic
    retransmission, and the proportional collapse regime).
    """
    _validate(algo, params, n, beta)
    c = rate_pkts(params)
    u = params.rtt_prop_s
    aw = params.awnd_pkts
    half = math.ceil(0.5 * aw)
    ss = math.ceil(beta * aw)
    gap = aw - n

    budget = n  # round-one transmissions backing the opportunistic numerator

    if algo in (RecoveryAlgo.QARR, RecoveryAlgo.BARR):
        if or_enabled:
            label = f"{algo.value}-or-no-idle"
            idle = 0.0
        else:
            label = f"{algo.value}-burst"
            idle = max(u - (n - 1) / c, 0.0)
    elif algo is RecoveryAlgo.STANDARD:
        if or_enabled:
            label = "std-or-window-limited"
            idle = max(u - (half - 1) / c, 0.0)
            budget = half
        elif n < half:
            label = "std-burst-limited"
            idle = max(u - (n - 1) / c, 0.0)
        else:
            label = "std-window-limited"
            idle = max(u - (half - 1) / c, 0.0)
    elif algo is RecoveryAlgo.RH:
        if not or_enabled:
            if n <= math.floor(0.5 * aw):
                label = "rh-burst-limited"
                idle = max(u - (n - 1) / c, 0.0)
            else:
                label = "rh-multi-round"
                idle = max((n // gap) * (u - (gap - 1) / c), 0.0)
        else:
            if n <= aw - ss:
                label = "rh-or-target-limited"
                idle = max(u - (ss - 1) / c, 0.0)
                budget = ss
            elif n <= gap:
                label = "rh-or-clamp-limited"
                idle = max(u - (gap - 1) / c, 0.0)
                budget = gap
            else:
                label = "rh-or-multi-round"
                idle = max((n // gap) * (u - (gap - 1) / c), 0.0)
    elif algo is RecoveryAlgo.PRR:
        heavy = n > 2 * gap
        if not heavy:
            if or_enabled:
                label = "prr-or-target-limited"
                idle = max(u - (ss - 1) / c, 0.0)
                budget = ss
            else:
                label = "prr-burst-limited"
                idle = max(u - (n - 1) / c, 0.0)
        else:
            label = "prr-or-collapse" if or_enabled else "prr-collapse"
            budgets = _collapse_budgets(ss, gap, n)
            idle = max(sum(u - (b - 1) / c for b in budgets), 0.0)
    else:  # pragma: no cover - enum is exhaustive
        raise ValueError(f"unknown algorithm {algo}")

    eta = utilization(n, c, idle)
    eta_opp = None
    if count_opportunistic:
        n_opp = max(n, budget) if or_enabled else n
        eta_opp = utilization(n_opp, c, idle)
    return IdleTimeResult(imin_s=idle, case_label=label, eta=eta, n_counted=n, eta_opportunistic=eta_opp)


def utilization(n_counted: int, rate_pkts_per_s: float, imin_s: float) -> float:
    """Best-case bandwidth utilization: data sent over data sendable."""
    if n_counted < 1:
        raise ValueError("n_counted must be >= 1")
    if imin_s < 0:
        raise ValueError("idle time cannot be negative")
    return n_counted / (rate_pkts_per_s * imin_s + n_counted)


@dataclass(frozen=True)
class SweepPoint:
    algo: RecoveryAlgo
    or_enabled: bool
    n: int
    params: LinkParams
    beta: float


@dataclass(frozen=True)
class SweepRow:
    point: SweepPoint
    result: IdleTimeResult | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.result is not None


def sweep(points: Iterable[SweepPoint], count_opportunistic: bool = True) -> Iterator[SweepRow]:
    """Evaluate imin over a grid; per-point errors become flagged rows."""
    for p in points:
        try:
            res = imin(p.algo, p.or_enabled, p.params, p.n, p.beta, count_opportunistic)
        except ValueError as exc:
            yield SweepRow(point=p, result=None, error=str(exc))
        else:
            yield SweepRow(point=p, result=res)


def sweep_csv_rows(rows: Iterable[SweepRow]) -> Iterator[list[str]]:
    """Render sweep rows as CSV cells (header first)."""
    yield [
        "algo",
        "or",
        "n",
        "U_ms",
        "C_mbps",
        "beta",
        "case_label",
        "imin_ms",
        "eta",
        "eta_opportunistic",
        "error",
    ]
    for row in rows:
        p = row.point
        base = [
            p.algo.value,
            "1" if p.or_enabled else "0",
            str(p.n),
            f"{p.params.rtt_prop_s * 1e3:.6g}",
            f"{p.params.rate_bps / 1e6:.6g}",
            f"{p.beta:.6g}",
        ]
        if row.result is not None:
            r = row.result
            eta_opp = "" if r.eta_opportunistic is None else f"{r.eta_opportunistic:.6f}"
            yield base + [r.case_label, f"{r.imin_s * 1e3:.6f}", f"{r.eta:.6f}", eta_opp, ""]
        else:
            yield base + ["", "", "", "", row.error or "error"]
