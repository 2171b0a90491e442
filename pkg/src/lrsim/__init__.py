"""TCP loss-recovery simulator and analytic model for a single bottleneck link."""

from .core import (
    LinkParams,
    LossKind,
    LossModel,
    Packet,
    RecoveryAlgo,
    RecoveryConfig,
    SsthreshRule,
    Variant,
    VariantParams,
    awnd_auto,
    rate_pkts,
)

__all__ = [
    "LinkParams",
    "LossKind",
    "LossModel",
    "Packet",
    "RecoveryAlgo",
    "RecoveryConfig",
    "SsthreshRule",
    "Variant",
    "VariantParams",
    "awnd_auto",
    "rate_pkts",
]
