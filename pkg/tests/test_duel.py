import json
from pathlib import Path

import numpy as np
import pytest

from geobench.duel import (
    DuelRound,
    DuelSummary,
    FixedErrorOpponent,
    LogNormalOpponent,
    ReplayOpponent,
    SideStats,
    load_match,
    play_match,
    replay_from_match,
    summarize,
    summary_report,
    write_rounds,
)
from geobench.errors import ConfigError
from geobench.metrics import EARTH, GeoCoordinate, destination_point, haversine_distance

GOLDEN = Path(__file__).parent / "golden"
ORIGIN = GeoCoordinate(0.0, 0.0)


def _fixture_rounds():
    """35 agent wins, 6 opponent wins, 1 draw."""
    rounds = []
    for i in range(42):
        if i < 35:
            scores = (4000.0, 3000.0)
        elif i < 41:
            scores = (1000.0, 2000.0)
        else:
            scores = (2500.0, 2500.0)
        rounds.append(DuelRound(i, ORIGIN, ORIGIN, ORIGIN, *scores, 10.0 + i, 100.0 + 2 * i))
    return rounds


def test_summary_matches_golden():
    summary = summarize(_fixture_rounds())
    assert summary.agent.win_rate == pytest.approx(85.365853, abs=1e-5)
    assert summary.opponent.win_rate == pytest.approx(14.634146, abs=1e-5)
    assert summary.draws == 1
    assert summary_report(summary, "md") == (GOLDEN / "duel_summary.md").read_text(encoding="utf-8")
    assert summary_report(summary, "csv") == (GOLDEN / "duel_summary.csv").read_text(encoding="utf-8")
    assert json.loads(summary_report(summary, "json"))["agent"]["wins"] == 35


def test_published_duel_table_matches_golden():
    # 35 of 41 rounds won; the split is inferred from the published 85.37% rate
    summary = DuelSummary(
        agent=SideStats(4550.5, 100.0 * 35 / 41, 0.3, 5200.2, 35),
        opponent=SideStats(4120.3, 100.0 * 6 / 41, 1.1, 5400.5, 6),
        draws=0,
        rounds=41,
    )
    assert summary_report(summary, "md") == (GOLDEN / "duel_table.md").read_text(encoding="utf-8")
    assert summary_report(summary, "csv") == (GOLDEN / "duel_table.csv").read_text(encoding="utf-8")
    assert "| Average Score | 4550.5 | 4120.3 |" in summary_report(summary)


def test_summary_labels_and_no_draw_footnote():
    rounds = _fixture_rounds()[:41]
    text = summary_report(summarize(rounds), agent_label="GeoAgent", opponent_label="Rival")
    assert text.splitlines()[0] == "| Competitor Type | GeoAgent | Rival |"
    assert "Draws" not in text


def test_all_draws_give_zero_win_rates():
    rounds = [DuelRound(i, ORIGIN, None, None, 0.0, 0.0, None, None) for i in range(3)]
    summary = summarize(rounds)
    assert summary.agent.win_rate == 0.0 and summary.opponent.win_rate == 0.0
    assert summary.agent.closest_km is None
    assert "| Closest Distance (km) | n/a | n/a |" in summary_report(summary)


def test_play_match_scores_both_sides():
    truths = [GeoCoordinate(48.8584, 2.2945), GeoCoordinate(-33.8568, 151.2153)]
    rounds = [(truths[0], truths[0]), (truths[1], None)]
    played = play_match(rounds, FixedErrorOpponent(100.0, seed=3))

    assert played[0].agent_score == 5000.0 and played[0].winner == "agent"
    assert played[0].opponent_distance_km == pytest.approx(100.0, rel=1e-9)
    assert played[1].agent_score == 0.0 and played[1].agent_distance_km is None
    assert played[1].winner == "opponent"
    with pytest.raises(ValueError):
        play_match([], FixedErrorOpponent(1.0))


def test_opponents_are_reproducible():
    truth = GeoCoordinate(10.0, 10.0)
    fixed = FixedErrorOpponent(50.0, seed=1)
    assert fixed.guess(4, truth) == fixed.guess(4, truth)
    assert fixed.guess(4, truth) != fixed.guess(5, truth)

    lognormal = LogNormalOpponent(200.0, sigma=1.0, seed=9)
    guesses = [lognormal.guess(i, truth) for i in range(200)]
    assert guesses == [lognormal.guess(i, truth) for i in range(200)]
    distances = sorted(haversine_distance(truth, g) for g in guesses)
    assert 100.0 < distances[100] < 400.0
    assert distances[-1] <= 3.1416 * EARTH.radius_km
    with pytest.raises(ValueError):
        LogNormalOpponent(0.0)


def test_replay_opponent_runs_out():
    replay = ReplayOpponent((ORIGIN,))
    assert replay.guess(0, ORIGIN) == ORIGIN
    with pytest.raises(ConfigError, match="1 guesses"):
        replay.guess(1, ORIGIN)


def test_load_match_and_replay(tmp_path):
    path = tmp_path / "match.jsonl"
    path.write_text(
        '{"truth": [48.8584, 2.2945], "agent_guess": [48.86, 2.29], "opponent_guess": {"lat": 48.0, "lon": 2.0}}\n'
        "\n"
        '{"truth": [35.6586, 139.7454], "agent_guess": null}\n',
        encoding="utf-8",
    )
    rounds = load_match(path)
    assert len(rounds) == 2
    assert rounds[0].opponent_guess == GeoCoordinate(48.0, 2.0)
    assert rounds[1].agent_guess is None and rounds[1].opponent_guess is None

    played = play_match([(r.truth, r.agent_guess) for r in rounds], replay_from_match(rounds))
    out = tmp_path / "rounds.jsonl"
    write_rounds(out, played)
    lines = [json.loads(line) for line in out.read_text().splitlines()]
    assert [line["round"] for line in lines] == [1, 2]
    assert lines[1]["winner"] == "draw"


@pytest.mark.parametrize(
    "content, match",
    [
        ('{"agent_guess": [1, 2]}\n', "field 'truth': required"),
        ('{"truth": [95, 2]}\n', "not a coordinate"),
        ('{"truth": [1, 2], "agent_guess": "paris"}\n', "agent_guess"),
        ("not json\n", "invalid JSON"),
        ("\n", "no rounds"),
    ],
)
def test_load_match_errors(tmp_path, content, match):
    path = tmp_path / "match.jsonl"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(ConfigError, match=match):
        load_match(path)


def test_load_match_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_match(tmp_path / "nope.jsonl")


def _random_match(n, seed, miss_rate=0.0):
    rng = np.random.default_rng(seed)

    def point():
        if rng.random() < miss_rate:
            return None
        return GeoCoordinate(float(rng.uniform(-90, 90)), float(rng.uniform(-180, 180)))

    truths = [GeoCoordinate(float(rng.uniform(-90, 90)), float(rng.uniform(-180, 180))) for _ in range(n)]
    return truths, [point() for _ in range(n)], [point() for _ in range(n)]


def test_winner_is_the_closer_guess():
    truths, agent, opponent = _random_match(1000, 11)
    for r in play_match(list(zip(truths, agent)), ReplayOpponent(tuple(opponent))):
        a = haversine_distance(r.truth, r.agent_guess)
        o = haversine_distance(r.truth, r.opponent_guess)
        if a < o:
            assert r.winner == "agent"
        elif o < a:
            assert r.winner == "opponent"
        else:
            assert r.winner == "draw"


def test_swapping_sides_swaps_the_summary():
    truths, agent, opponent = _random_match(200, 5, miss_rate=0.1)
    forward = summarize(play_match(list(zip(truths, agent)), ReplayOpponent(tuple(opponent))))
    swapped = summarize(play_match(list(zip(truths, opponent)), ReplayOpponent(tuple(agent))))
    assert swapped.agent == forward.opponent
    assert swapped.opponent == forward.agent
    assert swapped.draws == forward.draws and swapped.rounds == forward.rounds


def test_near_guesses_decide_the_round():
    truth = GeoCoordinate(48.8584, 2.2945)
    agent = destination_point(truth, 0.3, 45.0)
    opponent = destination_point(truth, 1.1, 200.0)
    (played,) = play_match([(truth, agent)], ReplayOpponent((opponent,)))
    assert played.winner == "agent"
    assert played.agent_distance_km == pytest.approx(0.3, rel=1e-6)
    assert played.opponent_distance_km == pytest.approx(1.1, rel=1e-6)
    summary = summarize([played])
    assert summary.agent.closest_km == summary.agent.farthest_km == pytest.approx(0.3, rel=1e-6)
