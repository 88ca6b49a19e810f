"""Head-to-head rounds between the agent and an opponent, scored with GeoScore."""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Literal, Optional, Protocol, Sequence

import numpy as np

from .errors import ConfigError
from .metrics import EARTH, EarthModel, GeoCoordinate, destination_point, geoscore, haversine_distance

logger = logging.getLogger(__name__)

Winner = Literal["agent", "opponent", "draw"]


@dataclass(frozen=True)
class MatchRound:
    truth: GeoCoordinate
    agent_guess: Optional[GeoCoordinate]
    opponent_guess: Optional[GeoCoordinate] = None


@dataclass(frozen=True)
class DuelRound:
    index: int
    truth: GeoCoordinate
    agent_guess: Optional[GeoCoordinate]
    opponent_guess: Optional[GeoCoordinate]
    agent_score: float
    opponent_score: float
    agent_distance_km: Optional[float]
    opponent_distance_km: Optional[float]

    @property
    def winner(self) -> Winner:
        if self.agent_score > self.opponent_score:
            return "agent"
        if self.opponent_score > self.agent_score:
            return "opponent"
        return "draw"


class OpponentModel(Protocol):
    def guess(self, index: int, truth: GeoCoordinate) -> Optional[GeoCoordinate]: ...


def _round_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


@dataclass(frozen=True)
class FixedErrorOpponent:
    """Always `error_km` off, on a seeded bearing."""

    error_km: float
    seed: int = 0

    def __post_init__(self) -> None:
        if self.error_km < 0:
            raise ValueError("error_km must be non-negative")

    def guess(self, index: int, truth: GeoCoordinate) -> Optional[GeoCoordinate]:
        bearing = float(_round_rng(self.seed, index).uniform(0.0, 360.0))
        return destination_point(truth, self.error_km, bearing)


@dataclass(frozen=True)
class LogNormalOpponent:
    """Error distance drawn log-normally around `median_km`."""

    median_km: float
    sigma: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.median_km <= 0:
            raise ValueError("median_km must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")

    def guess(self, index: int, truth: GeoCoordinate) -> Optional[GeoCoordinate]:
        rng = _round_rng(self.seed, index)
        # half the circumference is the farthest any guess can be
        distance = min(float(rng.lognormal(np.log(self.median_km), self.sigma)), np.pi * EARTH.radius_km)
        return destination_point(truth, distance, float(rng.uniform(0.0, 360.0)))


@dataclass(frozen=True)
class ReplayOpponent:
    """Recorded guesses, one per round; None is a missed round."""

    guesses: tuple[Optional[GeoCoordinate], ...]

    def guess(self, index: int, truth: GeoCoordinate) -> Optional[GeoCoordinate]:
        if index >= len(self.guesses):
            raise ConfigError(f"replay has {len(self.guesses)} guesses, round {index + 1} requested")
        return self.guesses[index]


def _score(truth: GeoCoordinate, guess: Optional[GeoCoordinate], earth: EarthModel) -> tuple[float, Optional[float]]:
    if guess is None:
        return 0.0, None
    d = haversine_distance(truth, guess, earth)
    return geoscore(d), d


def play_match(
    rounds: Sequence[tuple[GeoCoordinate, Optional[GeoCoordinate]]],
    opponent: OpponentModel,
    earth: EarthModel = EARTH,
) -> list[DuelRound]:
    if not rounds:
        raise ValueError("a match needs at least one round")
    played = []
    for i, (truth, agent_guess) in enumerate(rounds):
        opponent_guess = opponent.guess(i, truth)
        a_score, a_dist = _score(truth, agent_guess, earth)
        o_score, o_dist = _score(truth, opponent_guess, earth)
        played.append(DuelRound(i, truth, agent_guess, opponent_guess, a_score, o_score, a_dist, o_dist))
    return played


@dataclass(frozen=True)
class SideStats:
    average_score: float
    win_rate: float
    closest_km: Optional[float]
    farthest_km: Optional[float]
    wins: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "average_score": self.average_score,
            "win_rate": self.win_rate,
            "closest_km": self.closest_km,
            "farthest_km": self.farthest_km,
            "wins": self.wins,
        }


@dataclass(frozen=True)
class DuelSummary:
    agent: SideStats
    opponent: SideStats
    draws: int
    rounds: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "agent": self.agent.to_dict(),
            "opponent": self.opponent.to_dict(),
            "draws": self.draws,
            "rounds": self.rounds,
        }


def _side(scores: list[float], distances: list[Optional[float]], wins: int, decided: int) -> SideStats:
    hits = [d for d in distances if d is not None]
    return SideStats(
        average_score=float(np.mean(scores)),
        win_rate=100.0 * wins / decided if decided else 0.0,
        closest_km=min(hits) if hits else None,
        farthest_km=max(hits) if hits else None,
        wins=wins,
    )


def summarize(rounds: Sequence[DuelRound]) -> DuelSummary:
    """Win rates are over decided rounds; draws are counted separately."""
    if not rounds:
        raise ValueError("cannot summarize an empty match")
    agent_wins = sum(1 for r in rounds if r.winner == "agent")
    opponent_wins = sum(1 for r in rounds if r.winner == "opponent")
    draws = len(rounds) - agent_wins - opponent_wins
    decided = agent_wins + opponent_wins
    summary = DuelSummary(
        agent=_side([r.agent_score for r in rounds], [r.agent_distance_km for r in rounds], agent_wins, decided),
        opponent=_side(
            [r.opponent_score for r in rounds], [r.opponent_distance_km for r in rounds], opponent_wins, decided
        ),
        draws=draws,
        rounds=len(rounds),
    )
    logger.info("Match over %d rounds: %d-%d, %d draws", len(rounds), agent_wins, opponent_wins, draws)
    return summary


def _km(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.1f}"


_SUMMARY_ROWS: tuple[tuple[str, str], ...] = (
    ("Average Score", "average_score"),
    ("Win Rate (%)", "win_rate"),
    ("Closest Distance (km)", "closest_km"),
    ("Farthest Distance (km)", "farthest_km"),
)


def _cell(side: SideStats, field: str) -> str:
    if field == "win_rate":
        return f"{side.win_rate:.2f}"
    if field == "average_score":
        return f"{side.average_score:.1f}"
    return _km(getattr(side, field))


def summary_report(
    summary: DuelSummary,
    fmt: Literal["md", "csv", "json"] = "md",
    *,
    agent_label: str = "Agent",
    opponent_label: str = "Human Competitor",
) -> str:
    if fmt == "json":
        return json.dumps(summary.to_dict(), indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["metric", "agent", "opponent"])
        for _, field in _SUMMARY_ROWS:
            writer.writerow([field, _cell(summary.agent, field), _cell(summary.opponent, field)])
        writer.writerow(["draws", summary.draws, summary.draws])
        writer.writerow(["rounds", summary.rounds, summary.rounds])
        return buf.getvalue()
    if fmt != "md":
        raise ValueError(f"unknown duel summary format {fmt!r}")

    lines = [
        f"| Competitor Type | {agent_label} | {opponent_label} |",
        "| :--- | ---: | ---: |",
    ]
    for label, field in _SUMMARY_ROWS:
        lines.append(f"| {label} | {_cell(summary.agent, field)} | {_cell(summary.opponent, field)} |")
    if summary.draws:
        lines.append("")
        lines.append(f"_Draws: {summary.draws} of {summary.rounds} rounds, not counted in the win rates._")
    return "\n".join(lines) + "\n"


def _coordinate(value: Any, lineno: int, field: str) -> Optional[GeoCoordinate]:
    if value is None:
        return None
    try:
        if isinstance(value, dict):
            return GeoCoordinate(float(value["lat"]), float(value["lon"]))
        lat, lon = value
        return GeoCoordinate(float(lat), float(lon))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"line {lineno}: field {field!r}: not a coordinate: {exc}") from exc


def load_match(path: str | Path) -> list[MatchRound]:
    """Read a match file: one JSON object per round with truth, agent_guess and optional opponent_guess."""
    src = Path(path)
    if not src.is_file():
        raise FileNotFoundError(f"match file not found: {src}")
    rounds: list[MatchRound] = []
    with src.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"line {lineno}: invalid JSON: {exc.msg}") from exc
            if not isinstance(data, dict) or "truth" not in data:
                raise ConfigError(f"line {lineno}: field 'truth': required")
            truth = _coordinate(data["truth"], lineno, "truth")
            if truth is None:
                raise ConfigError(f"line {lineno}: field 'truth': must not be null")
            rounds.append(
                MatchRound(
                    truth=truth,
                    agent_guess=_coordinate(data.get("agent_guess"), lineno, "agent_guess"),
                    opponent_guess=_coordinate(data.get("opponent_guess"), lineno, "opponent_guess"),
                )
            )
    if not rounds:
        raise ConfigError(f"{src} contains no rounds")
    return rounds


def replay_from_match(rounds: Sequence[MatchRound]) -> ReplayOpponent:
    return ReplayOpponent(tuple(r.opponent_guess for r in rounds))


def write_rounds(path: str | Path, rounds: Sequence[DuelRound]) -> None:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)

    def pair(c: Optional[GeoCoordinate]) -> Optional[list[float]]:
        return [c.latitude, c.longitude] if c else None

    with out.open("w", encoding="utf-8", newline="\n") as handle:
        for r in rounds:
            row = {
                "round": r.index + 1,
                "truth": pair(r.truth),
                "agent_guess": pair(r.agent_guess),
                "opponent_guess": pair(r.opponent_guess),
                "agent_score": r.agent_score,
                "opponent_score": r.opponent_score,
                "agent_distance_km": r.agent_distance_km,
                "opponent_distance_km": r.opponent_distance_km,
                "winner": r.winner,
            }
            handle.write(json.dumps(row) + "\n")
