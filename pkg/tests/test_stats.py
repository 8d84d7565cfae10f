import math

import pytest
from hypothesis import given, strategies as st

from vortex.errors import ArchiveIOError, ArityError, InvalidResponse, NoData, UndefinedCorrelation
from vortex.stats import (LikertResponseSet, format_mean_sd, item_texts, likert_descriptives,
                          load_responses, pearson, sus_score)


def response_set(values, item="Q11"):
    return LikertResponseSet((item,), [{item: v} for v in values],
                             [f"P{i}" for i in range(len(values))], [{} for _ in values])


def oracle_sd(xs):
    m = sum(xs) / len(xs)
    return math.sqrt(sum((x - m) ** 2 for x in xs) / (len(xs) - 1))


def test_descriptives_hand_example():
    s = likert_descriptives(response_set([4, 5, 4, 5]))["Q11"]
    assert s.mean == 4.5
    assert s.sd == pytest.approx(math.sqrt(1.0 / 3), abs=1e-12)
    assert round(s.sd, 4) == 0.5774
    assert s.median == 4  # lower median for even n


def test_descriptives_constant():
    assert likert_descriptives(response_set([3, 3, 3]))["Q11"].sd == 0


def test_descriptives_empty():
    with pytest.raises(NoData):
        likert_descriptives(response_set([]))


def test_format_mean_sd():
    assert format_mean_sd(4.42, 0.67) == "4.42 ± 0.67"
    assert format_mean_sd(4.416666, 0.668558) == "4.42 ± 0.67"
    assert format_mean_sd(3.0, None) == "3.00 ± n/a"


def test_out_of_range_response_rejected():
    with pytest.raises(InvalidResponse):
        response_set([4, 6])


def test_sus_fixed_points():
    assert sus_score([3] * 10) == 50.0
    assert sus_score([5, 1] * 5) == 100.0
    assert sus_score([1, 5] * 5) == 0.0


@pytest.mark.parametrize("row", [[3] * 9, [3] * 11, [3] * 9 + [0], [3] * 9 + [6], [3] * 9 + [True],
                                 [3] * 9 + [3.0]])
def test_sus_invalid(row):
    with pytest.raises(InvalidResponse):
        sus_score(row)


likert_rows = st.lists(st.integers(1, 5), min_size=10, max_size=10)


@given(likert_rows)
def test_sus_mirror_symmetry(row):
    """Reverse-coding each item (r -> 6 - r) and swapping parity positions preserves the score."""
    mirrored = []
    for a, b in zip(row[0::2], row[1::2]):
        mirrored += [6 - b, 6 - a]
    assert sus_score(row) == sus_score(mirrored)


@given(likert_rows)
def test_sus_bounds_and_oracle(row):
    oracle = 2.5 * sum((r - 1) if (i + 1) % 2 else (5 - r) for i, r in enumerate(row))
    assert sus_score(row) == oracle
    assert 0 <= sus_score(row) <= 100


def test_pearson_examples():
    assert pearson([1, 2, 3], [2, 4, 6]) == 1.0
    assert pearson([1, 2, 3], [6, 4, 2]) == -1.0
    assert abs(pearson([1, 2, 3, 4], [1, 3, 2, 4]) - 0.8) <= 1e-12


def test_pearson_errors():
    with pytest.raises(UndefinedCorrelation):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(ArityError):
        pearson([1, 2], [1, 2, 3])
    with pytest.raises(ArityError):
        pearson([1], [1])


finite = st.floats(-1e3, 1e3, allow_nan=False)


@given(st.lists(finite, min_size=2, max_size=30), st.floats(0.01, 100), finite)
def test_pearson_affine_sign(xs, a, b):
    if max(xs) - min(xs) < 1e-3:
        return
    assert pearson(xs, [a * x + b for x in xs]) == pytest.approx(1.0, abs=1e-9)
    assert pearson(xs, [-a * x + b for x in xs]) == pytest.approx(-1.0, abs=1e-9)


@given(st.lists(st.tuples(finite, finite), min_size=3, max_size=30))
def test_pearson_bounded_and_matches_statistics(pairs):
    import statistics

    xs, ys = [p[0] for p in pairs], [p[1] for p in pairs]
    try:
        r = pearson(xs, ys)
    except UndefinedCorrelation:
        return
    assert -1 <= r <= 1
    try:
        ref = statistics.correlation(xs, ys)
    except statistics.StatisticsError:
        return
    assert r == pytest.approx(ref, abs=1e-6)


def test_load_responses_fixture(data_dir):
    rs = load_responses(data_dir / "responses.csv")
    assert rs.items == tuple(f"Q{i}" for i in range(1, 14))
    assert len(rs.rows) == 12
    desc = likert_descriptives(rs)
    q11 = [int(line.split(",")[11]) for line in
           (data_dir / "responses.csv").read_text().splitlines()[1:]]
    assert desc["Q11"].mean == pytest.approx(sum(q11) / len(q11))
    assert desc["Q11"].sd == pytest.approx(oracle_sd(q11))
    assert desc["Q11"].render() == "4.42 ± 0.67"
    assert all(1 <= s.mean <= 5 for s in desc.values())
    sus = rs.column("SUS")
    assert sus[2] == 50.0 and all(0 <= x <= 100 for x in sus)
    assert rs.column("prior_vr")[:2] == [0.0, 1.0]
    profiles = rs.profiles()
    assert profiles[0].years_in_practice == 2 and profiles[1].prior_vr


def test_load_responses_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("participant_id,Q1\nP1,x\n")
    with pytest.raises(InvalidResponse):
        load_responses(bad)
    bad.write_text("participant_id,age\nP1,3\n")
    with pytest.raises(InvalidResponse):
        load_responses(bad)
    with pytest.raises(ArchiveIOError):
        load_responses(tmp_path / "missing.csv")


def test_unknown_column(data_dir):
    with pytest.raises(ArityError):
        load_responses(data_dir / "responses.csv").column("height")


def test_item_texts_cover_all_items():
    texts = item_texts()
    assert set(f"Q{i}" for i in range(1, 14)) <= set(texts)
