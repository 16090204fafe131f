import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rsma.model import (ChannelSet, CsitModel, LayoutError, PrecoderSet, RateOutcome, ScenarioConfig,
                        StreamLayout, canonical_strategy, key_label, layout_for_strategy, make_key)
from rsma.optimizer import candidate_layouts


def test_make_key_sorts_and_dedups():
    assert make_key([3, 1, 3]) == (1, 3)
    with pytest.raises(LayoutError):
        make_key([])


def test_key_labels():
    assert key_label((1, 2, 3)) == "123"
    assert key_label((2, 10)) == "2-10"


def test_strategy_aliases():
    assert canonical_strategy("SDMA") == "mulp"
    assert canonical_strategy("noma") == "sc-sic"
    assert canonical_strategy("1-layer-rs") == "rs1"
    with pytest.raises(LayoutError, match="unknown strategy"):
        canonical_strategy("tdma")


@pytest.mark.parametrize("K", [1, 2, 3, 4, 5])
def test_generalized_rs_has_all_subsets(K):
    lay = layout_for_strategy("rs", K)
    assert lay.n_streams == 2 ** K - 1
    assert set(lay.keys) == {a for l in range(1, K + 1) for a in itertools.combinations(range(1, K + 1), l)}


@pytest.mark.parametrize("K", [2, 3, 4])
def test_fixed_layout_shapes(K):
    users = tuple(range(1, K + 1))
    assert layout_for_strategy("mulp", K).keys == tuple((k,) for k in users)
    assert layout_for_strategy("rs1", K).keys == (users,) + tuple((k,) for k in users)
    assert layout_for_strategy("multicast", K).keys == (users,)


def test_scsic_chain_and_owners():
    lay = layout_for_strategy("sc-sic", 3, order=(2, 3, 1))
    assert set(lay.keys) == {(1, 2, 3), (1, 3), (1,)}
    assert lay.owner((1, 2, 3)) == 2 and lay.owner((1, 3)) == 3
    assert lay.split_users((1, 2, 3)) == (2,)
    # chain: each key contains the next
    ks = sorted(lay.keys, key=len, reverse=True)
    assert all(set(b) < set(a) for a, b in zip(ks, ks[1:]))


def test_scsic_group_chains():
    lay = layout_for_strategy("sc-sic-group", 4, grouping=[[1, 2], [3, 4]], order=[[2, 1], [3, 4]])
    assert set(lay.keys) == {(1, 2), (1,), (3, 4), (4,)}
    assert lay.owner((1, 2)) == 2 and lay.owner((3, 4)) == 3


def test_hrs_layout():
    lay = layout_for_strategy("hrs", 4, grouping=[[1, 2], [3, 4]])
    assert set(lay.keys) == {(1, 2, 3, 4), (1, 2), (3, 4), (1,), (2,), (3,), (4,)}
    assert lay.decoding_sequence(3) == ((1, 2, 3, 4), (3, 4), (3,))


def test_bad_layouts():
    with pytest.raises(LayoutError):
        layout_for_strategy("sc-sic", 3, order=(1, 2))
    with pytest.raises(LayoutError):
        layout_for_strategy("hrs", 4, grouping=[[1, 2], [2, 3, 4]])
    with pytest.raises(LayoutError):
        StreamLayout(2, ((1,), (1,)))
    with pytest.raises(LayoutError):
        StreamLayout(2, ((1, 3),))
    with pytest.raises(LayoutError):
        layout_for_strategy("rs", 3).with_orders({2: ((1, 2), (1, 3))})


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.data())
def test_decoding_sequence_is_subsequence_of_level_order(K, data):
    lay = layout_for_strategy("rs", K)
    orders = {}
    for level, seq in lay.orders:
        orders[level] = tuple(data.draw(st.permutations(list(seq))))
    lay = lay.with_orders(orders)
    for k in range(1, K + 1):
        seq = lay.decoding_sequence(k)
        levels = [len(a) for a in seq]
        assert levels == sorted(levels, reverse=True)
        assert seq[-1] == (k,)
        for level, order in lay.orders:
            assert [a for a in seq if len(a) == level] == [a for a in order if k in a]


def test_remaining_contains_key_and_excludes_decoded():
    lay = layout_for_strategy("rs", 3)
    seq = lay.decoding_sequence(1)
    for j, a in enumerate(seq):
        rem = lay.remaining(1, a)
        assert lay.index(a) in rem
        assert not any(lay.index(b) in rem for b in seq[:j])
        assert len(rem) == lay.n_streams - j


def test_layout_dict_round_trip():
    for lay in candidate_layouts("rs", 3) + [layout_for_strategy("sc-sic", 3, order=(3, 1, 2))]:
        back = StreamLayout.from_dict(json.loads(json.dumps(lay.to_dict())))
        assert back == lay
        assert back.pairs() == lay.pairs()


def test_channelset_validation_and_round_trip():
    H = ChannelSet(np.array([[1 + 1j, 2], [0.5j, -1]]))
    assert H.K == 2 and H.Nt == 2
    assert np.allclose(H.gains(), [6.0, 1.25])
    assert ChannelSet.from_dict(json.loads(json.dumps(H.to_dict()))) == H
    with pytest.raises(ValueError):
        ChannelSet(np.array([[np.nan, 1.0]]))
    with pytest.raises(ValueError):
        H.H[0, 0] = 3.0


def test_csit_model():
    H = ChannelSet(np.ones((2, 4)))
    m = CsitModel.from_power(H, 100.0, scales=[1.0, 0.09], M=10)
    assert np.allclose(np.square(m.sigma_e), [100 ** -0.6, 0.09 * 100 ** -0.6])
    assert CsitModel.from_dict(json.loads(json.dumps(m.to_dict()))) == m
    with pytest.raises(ValueError):
        CsitModel(H, (-1.0, 0.0))
    with pytest.raises(ValueError):
        CsitModel(H, (0.0, 0.0), M=0)


def test_precoder_set():
    lay = layout_for_strategy("rs1", 2)
    P = PrecoderSet(lay, np.arange(6).reshape(3, 2) * (1 + 1j))
    assert P.power() == pytest.approx(2 * sum(v * v for v in range(6)))
    assert np.array_equal(P[(1, 2)], P.P[0])
    assert PrecoderSet.from_dict(json.loads(json.dumps(P.to_dict()))) == P
    with pytest.raises(ValueError):
        PrecoderSet(lay, np.zeros((2, 2)))


def test_rate_outcome_round_trip():
    out = RateOutcome({(1, 2): 0.5, (1,): 1.0, (2,): 2.0}, (1.0, 2.0), {((1, 2), 1): 0.2, ((1, 2), 2): 0.3},
                      (1.2, 2.3), 3.5, (1.0, 1.0))
    back = RateOutcome.from_dict(json.loads(json.dumps(out.to_dict())))
    assert back == out
    assert back.common_portion(2) == pytest.approx(0.3)


def test_scenario_config():
    cfg = ScenarioConfig(strategy="NOMA", K=3, weights=(1, 2, 3), thresholds=0.1)
    assert cfg.strategy == "sc-sic"
    assert cfg.thresholds == (0.1, 0.1, 0.1)
    assert cfg.Pt == pytest.approx(100.0)
    assert ScenarioConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    assert cfg.replace(snr_db=10.0).Pt == pytest.approx(10.0)
    with pytest.raises(ValueError):
        ScenarioConfig(K=2, weights=(1.0,))
    with pytest.raises(ValueError):
        ScenarioConfig(K=2, thresholds=(-1.0, 0.0))
