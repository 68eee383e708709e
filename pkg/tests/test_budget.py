import csv
import io
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from guicrop.budget import (CSV_COLUMNS, ScalingReport, SizeRecord, TokenBudgetModel,
                            linear_fit, modeled_costs, scaling_probe, screen_for_size,
                            token_count_full, token_count_isc)


def test_token_counts():
    m = TokenBudgetModel()
    assert m.tokens_per_subimage == 256
    assert token_count_full(1920, 1080) == 10580
    assert token_count_full(14, 14) == 1
    assert token_count_full(15, 14) == 2
    assert token_count_isc(16) == 4096
    assert TokenBudgetModel(patch_size=16, target_size=100).tokens_per_subimage == 49


def test_modeled_costs_1080p():
    t_std, t_isc = modeled_costs(1920, 1080, 16)
    assert t_std == 10580 ** 2 * 1024
    assert t_isc == 1920 * 1080 + 16 * 256 ** 2 * 1024
    # The closed-form ratio at 1080p with 16 crops is 106.545.
    assert t_std / t_isc == pytest.approx(106.5451, abs=1e-4)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        token_count_full(0, 10)
    with pytest.raises(ValueError):
        TokenBudgetModel(patch_size=0)
    with pytest.raises(ValueError):
        scaling_probe(sizes=[(100, 100)] * 3)
    with pytest.raises(ValueError):
        scaling_probe(repeats=2)


@given(st.integers(1, 4000), st.integers(1, 4000), st.integers(0, 16))
def test_costs_monotone(w, h, n):
    t_std, t_isc = modeled_costs(w, h, n)
    assert modeled_costs(w + 1, h, n)[0] >= t_std
    assert modeled_costs(w, h, n + 1)[1] > t_isc
    assert token_count_full(w, h) * 196 >= w * h


def test_ratio_grows_with_resolution():
    ratios = [(lambda c: c[0] / c[1])(modeled_costs(w, h, 16))
              for w, h in ((854, 480), (1280, 720), (1920, 1080), (2560, 1440))]
    assert all(b > a for a, b in zip(ratios, ratios[1:]))


def test_linear_fit():
    a, b, r2 = linear_fit([1, 2, 3], [3, 5, 7])
    assert a == pytest.approx(2) and b == pytest.approx(1) and r2 == pytest.approx(1)
    assert linear_fit([1, 2], [4, 4])[2] == 1.0


def test_screen_for_size_scales_count():
    assert len(screen_for_size(1920, 1080)[1].elements) == 24
    assert len(screen_for_size(320, 200)[1].elements) == 4


def _report():
    recs = [SizeRecord(100 * i, 50 * i, 1.5 * i, i, 2 * i, 10 * i, 5 * i) for i in range(1, 5)]
    return ScalingReport(recs, 1.0, 0.0, 0.99, 3, {"seed": 0})


def test_csv_shape():
    rows = list(csv.DictReader(io.StringIO(_report().to_csv())))
    assert len(rows) == 4 and tuple(rows[0]) == CSV_COLUMNS
    assert rows[0]["ratio"] == "2.000000" and rows[0]["ms_median"] == "1.500"
    no_time = list(csv.reader(io.StringIO(_report().to_csv(timing=False))))
    assert "ms_median" not in no_time[0]


def test_summary_json():
    doc = json.loads(_report().to_json())
    assert doc["sizes"][0] == [100, 50] and doc["repeats"] == 3 and doc["seed"] == 0


def test_scaling_probe_small_sizes():
    rep = scaling_probe(sizes=[(320, 200), (480, 300), (640, 400), (800, 500)], repeats=3)
    assert len(rep.records) == 4
    assert all(r.ms_median > 0 for r in rep.records)
    assert all(r.tokens_isc <= 16 * 256 for r in rep.records)
