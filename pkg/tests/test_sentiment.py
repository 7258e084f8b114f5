import datetime as dt
import io
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from newsnet.corpus import Article, Corpus, DateRange, Mention
from newsnet.sentiment import (
    SentimentPanel,
    concentration_curve,
    daily_sentiment,
    group_series,
    period_aggregate,
    read_panel,
    sentiment_bearing,
    write_panel,
)

D = dt.date


def art(aid, day, *pairs):
    return Article(aid, day, tuple(Mention(t, t, s, aid) for t, s in pairs))


def corpus_of(*articles):
    return Corpus(tuple(sorted(articles, key=lambda a: a.date)))


CAL = [D(2007, 1, 2), D(2007, 1, 3), D(2007, 1, 5)]


def test_daily_mean_examples():
    c = corpus_of(
        art("a", D(2007, 1, 2), ("A", 0.4), ("A", -0.4), ("B", 0.7)),
        art("b", D(2007, 1, 3), ("A", 0.2), ("A", 0.2)),
        art("c", D(2007, 1, 3), ("A", 0.8)),
    )
    p = daily_sentiment(c, ["A", "B"], CAL)
    assert p.value("A", CAL[0]) == 0.0
    assert p.value("B", CAL[0]) == 0.7
    assert p.value("A", CAL[1]) == pytest.approx(0.4, abs=1e-15)
    assert p.value("B", CAL[1]) is None


def test_non_trading_day_news_moves_to_next_day():
    c = corpus_of(art("a", D(2007, 1, 4), ("A", 0.5)), art("b", D(2007, 1, 5), ("A", -0.1)), art("z", D(2007, 2, 1), ("A", 1.0)))
    p = daily_sentiment(c, ["A"], CAL)
    assert p.value("A", D(2007, 1, 5)) == pytest.approx(0.2)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("AB"), st.integers(0, 2), st.floats(-1, 1)), min_size=1, max_size=25), st.randoms())
def test_daily_sentiment_permutation_invariant(mentions, rnd):
    def build(ms):
        arts = [art(f"x{i}", CAL[d], (t, s)) for i, (t, d, s) in enumerate(ms)]
        return daily_sentiment(corpus_of(*arts), ["A", "B"], CAL)

    shuffled = list(mentions)
    rnd.shuffle(shuffled)
    np.testing.assert_allclose(build(mentions).values, build(shuffled).values, rtol=0, atol=1e-12, equal_nan=True)


def panel(rows, tickers=("A", "B")):
    cal = tuple(D(2007, 1, 1) + dt.timedelta(days=i) for i in range(len(rows[0])))
    return SentimentPanel(tuple(tickers), cal, np.array(rows, dtype=float))


def test_period_aggregate_examples():
    p = panel([[0.1, 0.3, np.nan, -0.1], [-0.1, -0.3, 0.2, -0.2]])
    whole = DateRange(D(2007, 1, 1), D(2007, 1, 4))
    empty = DateRange(D(2007, 2, 1), D(2007, 2, 5))
    solo = period_aggregate(p, {"A": "x", "B": "y"}, [whole, empty])
    assert solo["x"][0] == pytest.approx(0.1)
    assert solo["x"][1] is None
    two = panel([[0.2, 0.2], [-0.2, -0.2]])
    both = period_aggregate(two, {"A": "s", "B": "s"}, [DateRange(D(2007, 1, 1), D(2007, 1, 2))])
    assert both["s"][0] == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(st.one_of(st.none(), st.floats(-1, 1)), min_size=10, max_size=10), min_size=3, max_size=3))
def test_period_aggregate_matches_bruteforce(rows):
    vals = [[np.nan if v is None else v for v in r] for r in rows]
    p = panel(vals, tickers=("A", "B", "C"))
    grouping = {"A": "g", "B": "g", "C": "h"}
    periods = [DateRange(D(2007, 1, 1), D(2007, 1, 4)), DateRange(D(2007, 1, 5), D(2007, 1, 10))]
    got = period_aggregate(p, grouping, periods)
    for label, members in (("g", [0, 1]), ("h", [2])):
        for k, per in enumerate(periods):
            cells = [
                rows[i][j]
                for i in members
                for j in range(10)
                if rows[i][j] is not None and per.start <= p.calendar[j] <= per.end
            ]
            if cells:
                assert got[label][k] == pytest.approx(sum(cells) / len(cells), abs=1e-12)
            else:
                assert got[label][k] is None


def test_group_series_averages_present_members():
    p = panel([[0.1, np.nan, np.nan], [0.3, 0.5, np.nan]])
    out = group_series(p, ["A", "B"])
    assert out[0] == pytest.approx(0.2) and out[1] == 0.5 and np.isnan(out[2])


def test_sentiment_bearing():
    assert not sentiment_bearing(art("a", CAL[0], ("A", 0.0), ("B", 0.0)), ["A", "B"])
    assert sentiment_bearing(art("a", CAL[0], ("A", 0.1)), ["A"])
    assert not sentiment_bearing(art("a", CAL[0], ("A", 0.3), ("A", -0.3)), ["A", "B"])
    assert not sentiment_bearing(art("a", CAL[0], ("C", 0.9)), ["A", "B"])


def test_concentration_curve_examples():
    equal = concentration_curve(corpus_of(*(art(f"a{i}", CAL[0], ("A", 0.5)) for i in range(4))), ["A"])
    np.testing.assert_allclose(equal.points[:, 0], equal.points[:, 1])
    skew = concentration_curve(corpus_of(art("a", CAL[0], ("A", 0.9)), art("b", CAL[0], ("A", 0.1))), ["A"])
    assert skew.points[1].tolist() == pytest.approx([0.5, 0.9])
    single = concentration_curve(corpus_of(art("a", CAL[0], ("A", -0.3))), ["A"])
    assert single.points.tolist() == [[0.0, 0.0], [1.0, 1.0]]
    zero = concentration_curve(corpus_of(art("a", CAL[0], ("A", 0.0))), ["A"])
    assert zero.degenerate and zero.points.tolist() == [[0.0, 0.0], [1.0, 1.0]]
    assert skew.article_share_for(0.5) == 0.5


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=20))
def test_concentration_curve_nondecreasing_and_above_diagonal(sents):
    c = corpus_of(*(art(f"a{i}", CAL[0], ("A", s)) for i, s in enumerate(sents)))
    pts = concentration_curve(c, ["A"]).points
    assert (np.diff(pts[:, 1]) >= -1e-15).all()
    assert (pts[:, 1] >= pts[:, 0] - 1e-12).all()
    assert pts[0].tolist() == [0.0, 0.0] and pts[-1].tolist() == [1.0, 1.0]


def test_panel_csv_roundtrip_bit_exact():
    rng = random.Random(4)
    vals = [[rng.uniform(-1, 1) if rng.random() > 0.3 else np.nan for _ in range(12)] for _ in range(3)]
    p = panel(vals, tickers=("A", "B", "C"))
    buf = io.StringIO()
    write_panel(p, buf)
    back = read_panel(io.StringIO(buf.getvalue()))
    assert back == p
    assert np.array_equal(back.values, p.values, equal_nan=True)
