"""Contest records and election-result ingestion.

A contest is audited as a two-candidate race between the announced winner
and the announced runner-up; every other ballot (third parties, write-ins,
undervotes) is irrelevant to the statistical test but still gets drawn, so
planned round sizes are scaled up by total_ballots / (winner + loser).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

__all__ = [
    "DataError",
    "ContestRecord",
    "ingest_2016_dataset",
    "load_bundled_2016",
]

US_2016_RESOURCE = "us_pres_2016.csv"


class DataError(Exception):
    """Malformed or inconsistent contest data."""


@dataclass(frozen=True)
class ContestRecord:
    """Announced results for one contest.

    tallies maps candidate name to announced vote count; winner and loser
    are the two leading candidates.  total_ballots counts every ballot
    containing the contest, relevant or not.
    """

    name: str
    tallies: dict[str, int]
    total_ballots: int
    winner: str
    loser: str

    @classmethod
    def from_tallies(cls, name: str, tallies: dict[str, int], total_ballots: int) -> "ContestRecord":
        """Build a record taking the two leading candidates as the pair."""
        if len(tallies) < 2:
            raise DataError(f"{name}: need at least two candidates")
        ranked = sorted(tallies, key=tallies.__getitem__, reverse=True)
        return cls(name, dict(tallies), int(total_ballots), ranked[0], ranked[1])

    def __post_init__(self):
        w = self.tallies.get(self.winner)
        l = self.tallies.get(self.loser)
        if w is None or l is None:
            raise DataError(f"{self.name}: winner/loser missing from tallies")
        if w <= l:
            raise DataError(f"{self.name}: announced winner does not lead ({w} vs {l})")
        if any(v < 0 for v in self.tallies.values()):
            raise DataError(f"{self.name}: negative tally")
        if self.total_ballots < sum(self.tallies.values()):
            raise DataError(
                f"{self.name}: total ballots {self.total_ballots} below tallied votes"
            )

    @property
    def winner_votes(self) -> int:
        return self.tallies[self.winner]

    @property
    def loser_votes(self) -> int:
        return self.tallies[self.loser]

    @property
    def relevant_votes(self) -> int:
        return self.winner_votes + self.loser_votes

    @property
    def p(self) -> float:
        """Announced winner fraction among the relevant ballots."""
        return self.winner_votes / self.relevant_votes

    @property
    def margin(self) -> float:
        return (self.winner_votes - self.loser_votes) / self.relevant_votes

    @property
    def scale(self) -> float:
        """Draws needed per relevant ballot sampled, >= 1."""
        return self.total_ballots / self.relevant_votes

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "tallies": dict(self.tallies),
            "total_ballots": self.total_ballots,
            "winner": self.winner,
            "loser": self.loser,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ContestRecord":
        try:
            return cls(
                name=d["name"],
                tallies={k: int(v) for k, v in d["tallies"].items()},
                total_ballots=int(d["total_ballots"]),
                winner=d["winner"],
                loser=d["loser"],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"bad contest record: {exc}") from exc

    @classmethod
    def from_json_file(cls, path: str | Path) -> "ContestRecord":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read contest file {path}: {exc}") from exc
        if "winner" in doc:
            return cls.from_dict(doc)
        return cls.from_tallies(doc.get("name", str(path)), doc["tallies"], doc["total_ballots"])


def ingest_2016_dataset(source: str | Path | io.TextIOBase) -> list[ContestRecord]:
    """Parse the statewide 2016 presidential results CSV into contest records.

    Expected columns: state, clinton, trump, total_ballots.  Lines starting
    with '#' are provenance comments.  Every malformed row is collected and
    reported in one DataError.
    """
    if isinstance(source, (str, Path)):
        try:
            fh = open(source, encoding="utf-8")
        except OSError as exc:
            raise DataError(f"cannot open dataset {source}: {exc}") from exc
        close = True
    else:
        fh, close = source, False
    try:
        rows = [
            (i, line)
            for i, line in enumerate(fh, start=1)
            if line.strip() and not line.lstrip().startswith("#")
        ]
    finally:
        if close:
            fh.close()
    if not rows:
        raise DataError("dataset is empty")
    reader = csv.DictReader(io.StringIO("".join(line for _, line in rows)))
    if reader.fieldnames is None or {"state", "clinton", "trump", "total_ballots"} - set(
        reader.fieldnames
    ):
        raise DataError(
            f"dataset header must contain state,clinton,trump,total_ballots; got {reader.fieldnames}"
        )
    records = []
    bad = []
    for offset, row in enumerate(reader):
        line_no = rows[offset + 1][0]  # +1 skips the header line
        try:
            tallies = {"Clinton": int(row["clinton"]), "Trump": int(row["trump"])}
            records.append(
                ContestRecord.from_tallies(row["state"].strip(), tallies, int(row["total_ballots"]))
            )
        except (DataError, KeyError, TypeError, ValueError) as exc:
            bad.append(f"line {line_no}: {exc}")
    if bad:
        raise DataError("malformed dataset rows:\n  " + "\n  ".join(bad))
    return records


def load_bundled_2016() -> list[ContestRecord]:
    """The packaged statewide 2016 dataset, keyed for planner and simulator runs."""
    ref = resources.files("rlapoll").joinpath("data", US_2016_RESOURCE)
    with ref.open("r", encoding="utf-8") as fh:
        return ingest_2016_dataset(fh)
