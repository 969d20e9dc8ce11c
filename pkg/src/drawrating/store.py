"""Game-file parsing, rating snapshots, and prior initialization.

Games arrive as delimited text with a ``period,white,black,result`` header;
results accept 1 / 0.5 / 0 and the letter codes W / D / L (white's
perspective).  Snapshots are a line-oriented text format with a schema
version header, written so that floats round-trip bit-exactly.
"""

from __future__ import annotations

import csv
import math
import os
import tempfile
from dataclasses import dataclass

from . import model
from .engine import EngineConfig, PlayerBelief
from .model import Hyperparameters

SNAPSHOT_MAGIC = "drawrating-snapshot"
SNAPSHOT_VERSION = 1

_RESULT_CODES = {
    "1": model.WIN, "0.5": model.DRAW, "1/2": model.DRAW, "0": model.LOSS,
    "W": model.WIN, "D": model.DRAW, "L": model.LOSS,
}


class SnapshotFormatError(ValueError):
    """Snapshot stream is malformed or has an unsupported schema version."""


@dataclass(frozen=True)
class GameRecord:
    period: int
    white_id: str
    black_id: str
    outcome: float  # 1, 0.5 or 0, from white's perspective


@dataclass
class RatingSnapshot:
    period: int
    entries: list  # (player_id, mu, sigma, games_played_cumulative)
    hyperparameters: Hyperparameters
    config: EngineConfig

    def state(self) -> dict:
        return {
            pid: PlayerBelief(pid, mu, sigma) for pid, mu, sigma, _ in self.entries
        }

    def games_played(self) -> dict:
        return {pid: games for pid, _, _, games in self.entries}


def parse_games(stream) -> tuple[list[GameRecord], list[tuple[int, str]]]:
    """Parse a game file into (records, rejects); never aborts on a bad row.

    Rejects carry (line number, reason).  A header row is skipped if
    present.
    """
    records, rejects = [], []
    reader = csv.reader(stream)
    for line_no, row in enumerate(reader, start=1):
        if not row or (line_no == 1 and [c.strip().lower() for c in row[:1]] == ["period"]):
            continue
        if len(row) != 4:
            rejects.append((line_no, f"expected 4 fields, got {len(row)}"))
            continue
        period_text, white, black, result = (c.strip() for c in row)
        try:
            period = int(period_text)
        except ValueError:
            rejects.append((line_no, f"bad period {period_text!r}"))
            continue
        if period < 1:
            rejects.append((line_no, f"period must be >= 1, got {period}"))
            continue
        if not white or not black:
            rejects.append((line_no, "empty player id"))
            continue
        if white == black:
            rejects.append((line_no, f"self-play: {white!r}"))
            continue
        outcome = _RESULT_CODES.get(result.upper())
        if outcome is None:
            rejects.append((line_no, f"bad result {result!r}"))
            continue
        records.append(GameRecord(period, white, black, outcome))
    return records, rejects


def read_games(path: str) -> tuple[list[GameRecord], list[tuple[int, str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_games(fh)


def write_games(games: list[GameRecord], stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["period", "white", "black", "result"])
    for g in games:
        writer.writerow([g.period, g.white_id, g.black_id, _format_result(g.outcome)])


def _format_result(outcome: float) -> str:
    return {1.0: "1", 0.5: "0.5", 0.0: "0"}[float(outcome)]


def save_snapshot(snapshot: RatingSnapshot, stream) -> None:
    h, cfg = snapshot.hyperparameters, snapshot.config
    stream.write(f"{SNAPSHOT_MAGIC} v{SNAPSHOT_VERSION}\n")
    stream.write(f"period {snapshot.period}\n")
    stream.write(
        "hyperparameters "
        f"{h.alpha0!r} {h.alpha1!r} {h.beta0!r} {h.beta1!r} {h.tau!r}\n"
    )
    stream.write(
        "config "
        f"{cfg.sigma_cap!r} {int(cfg.draw_score_override)} "
        f"{cfg.default_prior_elo!r} {cfg.default_prior_sd_elo!r} "
        f"{cfg.rated_prior_sd_elo!r}\n"
    )
    stream.write(f"players {len(snapshot.entries)}\n")
    writer = csv.writer(stream, lineterminator="\n")
    for pid, mu, sigma, games in snapshot.entries:
        writer.writerow([pid, repr(float(mu)), repr(float(sigma)), games])


def load_snapshot(stream) -> RatingSnapshot:
    def next_line():
        line = stream.readline()
        if not line:
            raise SnapshotFormatError("truncated snapshot")
        return line.rstrip("\n")

    header = next_line().split()
    if len(header) != 2 or header[0] != SNAPSHOT_MAGIC:
        raise SnapshotFormatError(f"not a {SNAPSHOT_MAGIC} file")
    if header[1] != f"v{SNAPSHOT_VERSION}":
        raise SnapshotFormatError(
            f"unsupported snapshot version {header[1]}, expected v{SNAPSHOT_VERSION}"
        )
    try:
        period = int(_expect(next_line(), "period"))
        h_parts = [float(v) for v in _expect(next_line(), "hyperparameters").split()]
        c_parts = _expect(next_line(), "config").split()
        count = int(_expect(next_line(), "players"))
        hyper = Hyperparameters(*h_parts)
        config = EngineConfig(
            sigma_cap=float(c_parts[0]),
            draw_score_override=bool(int(c_parts[1])),
            default_prior_elo=float(c_parts[2]),
            default_prior_sd_elo=float(c_parts[3]),
            rated_prior_sd_elo=float(c_parts[4]),
        )
    except (ValueError, IndexError) as exc:
        raise SnapshotFormatError(f"malformed snapshot header: {exc}") from exc

    entries = []
    seen = set()
    reader = csv.reader(stream)
    for row in reader:
        if len(entries) == count:
            break
        if len(row) != 4:
            raise SnapshotFormatError(f"malformed player row {row!r}")
        pid, mu, sigma, games = row[0], float(row[1]), float(row[2]), int(row[3])
        if pid in seen:
            raise SnapshotFormatError(f"duplicate player id {pid!r}")
        if not (math.isfinite(sigma) and sigma > 0):
            raise SnapshotFormatError(f"player {pid!r} has invalid sigma {sigma}")
        seen.add(pid)
        entries.append((pid, mu, sigma, games))
    if len(entries) != count:
        raise SnapshotFormatError(
            f"expected {count} player rows, found {len(entries)}"
        )
    return RatingSnapshot(period, entries, hyper, config)


def _expect(line: str, key: str) -> str:
    if not line.startswith(key + " "):
        raise SnapshotFormatError(f"expected {key!r} line, got {line!r}")
    return line[len(key) + 1:]


def write_snapshot_file(snapshot: RatingSnapshot, path: str) -> None:
    """Atomic write: temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".snapshot-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            save_snapshot(snapshot, fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_snapshot_file(path: str) -> RatingSnapshot:
    with open(path, encoding="utf-8", newline="") as fh:
        return load_snapshot(fh)


def initialize_priors(
    ratings: list[tuple[str, float]] | None, cfg: EngineConfig
) -> dict:
    """Beliefs for players with existing Elo ratings.

    Unlisted players are not instantiated here; they pick up the default
    prior on first appearance in a period.
    """
    state = {}
    for pid, elo in ratings or []:
        if pid in state:
            raise ValueError(f"duplicate player id {pid!r}")
        state[pid] = PlayerBelief(
            pid,
            model.elo_to_latent(elo),
            model.elo_sd_to_latent(cfg.rated_prior_sd_elo),
        )
    return state
