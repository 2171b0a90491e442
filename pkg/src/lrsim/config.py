"""Flat ``key = value`` experiment configuration files.

Unknown keys are hard errors; values are validated eagerly so a bad config
dies before any simulation starts.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .core import LossKind, LossModel, RecoveryAlgo, RecoveryConfig, Variant, VariantParams


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    rate_mbps: float = 20.0
    delay_ms: float = 100.0
    loss: str = "none"
    protect_retransmits: bool = False
    awnd: str = "auto"
    recovery: str = "prr"
    variant: str = "cubic"
    or_: bool = False
    hack1: bool = False
    sndbuf_factor: float = 2.0
    qt: int = 5
    slide_m: int = 200
    barr_use_min_rtt: bool = False
    duration_s: float = 200.0
    transfer_mb: float | None = None
    seed: int = 1
    runs: int = 1
    drain: str = "unlimited"

    def __post_init__(self) -> None:
        if self.rate_mbps <= 0 or self.delay_ms < 0:
            raise ConfigError("rate_mbps must be > 0 and delay_ms >= 0")
        if self.duration_s <= 0 and self.transfer_mb is None:
            raise ConfigError("either duration_s or transfer_mb must be set")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        self.parse_loss()  # validate eagerly
        self.awnd_pkts()
        self.recovery_algo()
        self.variant_params()
        self.drain_bps()

    # -- parsed views ------------------------------------------------------
    def recovery_algo(self) -> RecoveryAlgo:
        try:
            return RecoveryAlgo(self.recovery)
        except ValueError as exc:
            raise ConfigError(f"unknown recovery algorithm: {self.recovery}") from exc

    def variant_params(self) -> VariantParams:
        try:
            return VariantParams.default(Variant(self.variant))
        except ValueError as exc:
            raise ConfigError(f"unknown variant: {self.variant}") from exc

    def awnd_pkts(self) -> int | None:
        if self.awnd == "auto":
            return None
        try:
            n = int(self.awnd)
        except ValueError as exc:
            raise ConfigError(f"awnd must be 'auto' or an integer: {self.awnd}") from exc
        if n < 1:
            raise ConfigError("awnd must be >= 1")
        return n

    def drain_bps(self) -> float:
        if self.drain == "unlimited":
            return math.inf
        try:
            v = float(self.drain)
        except ValueError as exc:
            raise ConfigError(f"drain must be 'unlimited' or bytes/second: {self.drain}") from exc
        if v <= 0:
            raise ConfigError("drain rate must be positive")
        return v

    def parse_loss(self) -> LossModel:
        spec = self.loss.strip()
        protect = self.protect_retransmits
        if spec == "none":
            return LossModel(protect_retransmits=protect)
        if spec.startswith("burst:"):
            m = re.fullmatch(r"burst:(\d+)@(\d+)", spec)
            if not m:
                raise ConfigError("burst loss must look like burst:N@SEQ")
            return LossModel.burst(int(m.group(1)), int(m.group(2)), protect)
        if spec.startswith("script:"):
            body = spec[len("script:"):]
            if re.fullmatch(r"[\d,]+", body):
                drops = tuple(int(x) for x in body.split(",") if x)
            else:
                path = Path(body)
                if not path.exists():
                    raise ConfigError(f"drop script not found: {body}")
                drops = tuple(
                    int(line.strip()) for line in path.read_text().splitlines() if line.strip()
                )
            if not drops:
                raise ConfigError("drop script is empty")
            return LossModel.scripted(drops, protect)
        try:
            rate = float(spec[:-1]) / 100.0 if spec.endswith("%") else float(spec)
        except ValueError as exc:
            raise ConfigError(f"unrecognized loss spec: {spec}") from exc
        if not 0.0 <= rate < 1.0:
            raise ConfigError("loss rate must be in [0, 1)")
        return LossModel.random(rate, protect)

    def recovery_config(self) -> RecoveryConfig:
        return RecoveryConfig(
            algorithm=self.recovery_algo(),
            or_enabled=self.or_,
            hack1_enabled=self.hack1,
            sndbuf_factor=self.sndbuf_factor,
            qt_pkts=self.qt,
            slide_m=self.slide_m,
            dupthresh=3,
            barr_use_min_rtt=self.barr_use_min_rtt,
        )

    def describe(self) -> list[str]:
        """Key=value lines embedding the full resolved config in outputs."""
        out = []
        for f in fields(self):
            key = "or" if f.name == "or_" else f.name
            out.append(f"{key} = {getattr(self, f.name)}")
        return out

    def with_(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)


_KEYMAP = {
    "rate_mbps": ("rate_mbps", float),
    "delay_ms": ("delay_ms", float),
    "loss": ("loss", str),
    "protect_retransmits": ("protect_retransmits", None),
    "awnd": ("awnd", str),
    "recovery": ("recovery", str),
    "variant": ("variant", str),
    "or": ("or_", None),
    "hack1": ("hack1", None),
    "sndbuf_factor": ("sndbuf_factor", float),
    "qt": ("qt", int),
    "slide_m": ("slide_m", int),
    "barr_use_min_rtt": ("barr_use_min_rtt", None),
    "duration_s": ("duration_s", float),
    "transfer_mb": ("transfer_mb", float),
    "seed": ("seed", int),
    "runs": ("runs", int),
    "drain": ("drain", str),
}

_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def parse_config(text: str) -> ExperimentConfig:
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, val = (part.strip() for part in line.partition("="))
        if key not in _KEYMAP:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        attr, conv = _KEYMAP[key]
        if conv is None:
            low = val.lower()
            if low not in _BOOL:
                raise ConfigError(f"line {lineno}: '{key}' wants a boolean, got '{val}'")
            values[attr] = _BOOL[low]
        else:
            try:
                values[attr] = conv(val)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for '{key}': {val}") from exc
    try:
        return ExperimentConfig(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())
