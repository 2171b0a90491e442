import pytest

from lrsim.core import (
    LinkParams,
    LossModel,
    Packet,
    RecoveryConfig,
    Variant,
    VariantParams,
    awnd_auto,
    make_link_params,
    normalize_blocks,
    rate_pkts,
)


def hspa(u=0.1, awnd=None):
    return make_link_params(20e6, u, awnd_pkts=awnd)


def test_rate_pkts_hand_values():
    assert rate_pkts(hspa()) == pytest.approx(20e6 / 12120)
    assert rate_pkts(hspa()) == pytest.approx(1650.165, abs=1e-3)
    lte = make_link_params(100e6, 0.1)
    assert rate_pkts(lte) == pytest.approx(8250.825, abs=1e-3)


def test_constructor_rejects_nonpositive_fields():
    with pytest.raises(ValueError):
        LinkParams(0, 1515, 0.1, 165, 4_300_000)
    with pytest.raises(ValueError):
        LinkParams(20e6, 0, 0.1, 165, 4_300_000)
    with pytest.raises(ValueError):
        LinkParams(20e6, 1515, 0.1, 0, 4_300_000)


def test_awnd_auto_hand_values():
    assert awnd_auto(hspa()) == 165
    assert awnd_auto(make_link_params(100e6, 0.1)) == 825
    probe = LinkParams(20e6, 1515, 0.0, 1, 4_300_000)
    assert awnd_auto(probe) == 0


def test_awnd_auto_used_when_unset():
    assert hspa(u=0.05).awnd_pkts == 82
    assert hspa(u=0.2).awnd_pkts == 330


def test_service_time():
    assert hspa().service_time_s == pytest.approx(0.000606)


def test_byte_packet_roundtrip_lossless():
    p = hspa()
    s = p.packet_size_bytes
    for pkts in (0, 1, 7, 165, 2975):
        assert (pkts * s) // s == pkts


def test_sack_normalization_idempotent_and_sorted():
    blocks = [(3030, 4545), (0, 1515), (1515, 3030), (9090, 10605)]
    once = normalize_blocks(blocks)
    assert once == [(0, 4545), (9090, 10605)]
    assert normalize_blocks(once) == once


def test_packet_rejects_empty_data_range():
    with pytest.raises(ValueError):
        Packet(0, Packet.DATA, 10, 10)


def test_recovery_config_validation():
    with pytest.raises(ValueError):
        RecoveryConfig(sndbuf_factor=0.5)
    with pytest.raises(ValueError):
        RecoveryConfig(qt_pkts=0)
    cfg = RecoveryConfig()
    assert cfg.qt_pkts == 5 and cfg.slide_m == 200 and cfg.sndbuf_factor == 3.0


def test_variant_defaults():
    assert VariantParams.default(Variant.CUBIC).beta == 0.7
    assert VariantParams.default(Variant.RENO).beta == 0.5
    veno = VariantParams.default(Variant.VENO)
    assert veno.beta == 0.8
    with pytest.raises(ValueError):
        VariantParams(Variant.CUBIC, 0.0, veno.ssthresh_rule)


def test_loss_model_validation():
    with pytest.raises(ValueError):
        LossModel.random(1.0)
    m = LossModel.burst(10, 5000)
    assert m.burst_len == 10 and m.trigger_seq == 5000
