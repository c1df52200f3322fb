import csv

import numpy as np
import pytest

from vmdgraph.data import tone_region
from vmdgraph.modeselect import (
    ModeSelectConfig, select_num_modes, sample_nodes, write_k_selection_csv,
)
from vmdgraph.spectral import InvalidInputError, TimeSeries
from vmdgraph.vmd import InvalidConfigError


def pure_tones(n=10, L=256):
    t = np.arange(L)
    # mirror-aligned tones occupy one bin of the extended spectrum
    return [TimeSeries(np.cos(np.pi * (40 + 3 * i) * (t + 0.5) / L), node_id=f"p{i}") for i in range(n)]


@pytest.mark.parametrize("kw", [
    {"sample_fraction": 0.0}, {"sample_fraction": 1.5}, {"k_min": 0},
    {"k_min": 5, "k_max": 4}, {"zeta": 0.0},
])
def test_config_rejects(kw):
    with pytest.raises(InvalidConfigError):
        ModeSelectConfig(**kw)


def test_sample_nodes_size_and_determinism():
    data = list(range(100))
    a = sample_nodes(data, 0.02, seed=4)
    assert len(a) == 2 and a == sample_nodes(data, 0.02, seed=4)
    assert len(sample_nodes(data, 0.001, seed=0)) == 1
    assert sorted(sample_nodes(data, 1.0, 0)) == data


def test_empty_dataset():
    with pytest.raises(InvalidInputError):
        select_num_modes([])


def test_pure_tones_pick_small_k():
    sel = select_num_modes(pure_tones(), ModeSelectConfig(sample_fraction=0.3, k_max=8))
    assert sel.threshold_met and sel.status == "ok"
    assert sel.k == 2
    assert [k for k, _ in sel.curve] == list(range(2, 9))


def test_five_tone_region_and_curve_shape():
    region = tone_region(num_nodes=50)
    cfg = ModeSelectConfig(sample_fraction=0.1, k_max=12)
    sel = select_num_modes(region, cfg)
    assert 5 <= sel.k <= 8
    losses = [v for _, v in sel.curve]
    for a, b in zip(losses, losses[1:]):
        assert b <= a * 1.10
    again = select_num_modes(region, cfg)
    assert again.sampled_nodes == sel.sampled_nodes and again.k == sel.k
    assert again.curve == sel.curve


def test_threshold_not_met(tmp_path):
    rng = np.random.default_rng(0)
    noise = [TimeSeries(rng.standard_normal(128), node_id=str(i)) for i in range(4)]
    sel = select_num_modes(noise, ModeSelectConfig(sample_fraction=0.5, k_min=2, k_max=3))
    assert not sel.threshold_met and sel.status == "threshold-not-met"
    assert sel.k == 3
    path = tmp_path / "k.csv"
    write_k_selection_csv(sel, path)
    rows = list(csv.reader(open(path, encoding="utf-8")))
    assert rows[0] == ["K", "mean_loss", "qualifying"]
    assert [r[0] for r in rows[1:]] == ["2", "3"]
    assert {r[2] for r in rows[1:]} == {"false"}
