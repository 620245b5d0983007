"""Contest records and the bundled 2016 statewide dataset."""

import io

import pytest

from rlapoll.contest import ContestRecord, DataError, ingest_2016_dataset, load_bundled_2016

# Margins of the statewide 2016 presidential contests, (winner - loser) /
# (winner + loser), rounded to four decimals: the checksum the ingested
# tallies must reproduce.
MARGINS_2016 = {
    "Alabama": 0.2875, "Alaska": 0.1677, "Arizona": 0.0378, "Arkansas": 0.2857,
    "California": 0.3226, "Colorado": 0.0537, "Connecticut": 0.1428, "Delaware": 0.1200,
    "DistrictOfColumbia": 0.9139, "Florida": 0.0124, "Georgia": 0.0532, "Hawaii": 0.3488,
    "Idaho": 0.3662, "Illinois": 0.1804, "Indiana": 0.2023, "Iowa": 0.1013,
    "Kansas": 0.2222, "Kentucky": 0.3134, "Louisiana": 0.2034, "Maine": 0.0319,
    "Maryland": 0.2803, "Massachusetts": 0.2930, "Michigan": 0.0024, "Minnesota": 0.0166,
    "Mississippi": 0.1818, "Missouri": 0.1964, "Montana": 0.2222, "Nebraska": 0.2710,
    "Nevada": 0.0259, "NewHampshire": 0.0039, "NewJersey": 0.1457, "NewMexico": 0.0930,
    "NewYork": 0.2354, "NorthCarolina": 0.0381, "NorthDakota": 0.3962, "Ohio": 0.0854,
    "Oklahoma": 0.3861, "Oregon": 0.1231, "Pennsylvania": 0.0075, "RhodeIsland": 0.1662,
    "SouthCarolina": 0.1492, "SouthDakota": 0.3194, "Tennessee": 0.2725, "Texas": 0.0943,
    "Utah": 0.2477, "Vermont": 0.3037, "Virginia": 0.0565, "Washington": 0.1757,
    "WestVirginia": 0.4432, "Wisconsin": 0.0082, "Wyoming": 0.5141,
}


class TestBundledDataset:
    def test_all_51_rows(self):
        records = load_bundled_2016()
        assert len(records) == 51
        assert {r.name for r in records} == set(MARGINS_2016)

    def test_margins_to_four_decimals(self):
        for record in load_bundled_2016():
            assert round(record.margin, 4) == pytest.approx(MARGINS_2016[record.name], abs=1e-12), record.name

    def test_alaska_row(self):
        alaska = {r.name: r for r in load_bundled_2016()}["Alaska"]
        assert alaska.winner == "Trump"
        assert alaska.loser == "Clinton"
        assert alaska.winner_votes == 163387
        assert alaska.total_ballots == 318608
        assert alaska.scale == pytest.approx(318608 / 279841, rel=1e-12)

    def test_wisconsin_margin(self):
        wi = {r.name: r for r in load_bundled_2016()}["Wisconsin"]
        assert round(wi.margin, 4) == 0.0082


class TestIngest:
    HEADER = "state,clinton,trump,total_ballots\n"

    def test_empty_file(self):
        with pytest.raises(DataError, match="empty"):
            ingest_2016_dataset(io.StringIO(""))

    def test_malformed_rows_reported_with_lines(self):
        csv = self.HEADER + "Alaska,116454,163387,318608\nNowhere,abc,5,10\n"
        with pytest.raises(DataError, match="line 3"):
            ingest_2016_dataset(io.StringIO(csv))

    def test_missing_columns(self):
        with pytest.raises(DataError, match="header"):
            ingest_2016_dataset(io.StringIO("state,votes\nAlaska,5\n"))

    def test_comments_skipped(self):
        csv = "# provenance note\n" + self.HEADER + "Alaska,116454,163387,318608\n"
        records = ingest_2016_dataset(io.StringIO(csv))
        assert len(records) == 1
        assert records[0].p == pytest.approx(163387 / 279841)


class TestContestRecord:
    def test_winner_must_lead(self):
        with pytest.raises(DataError):
            ContestRecord.from_tallies("Tied", {"A": 5, "B": 5}, 10)

    def test_total_covers_tallies(self):
        with pytest.raises(DataError):
            ContestRecord.from_tallies("Short", {"A": 7, "B": 5}, 10)

    def test_derived_quantities(self):
        c = ContestRecord.from_tallies("X", {"A": 75, "B": 25, "C": 10}, 120)
        assert c.winner == "A"
        assert c.loser == "B"
        assert c.p == 0.75
        assert c.margin == 0.5
        assert c.scale == 1.2

    def test_roundtrip_dict(self):
        c = ContestRecord.from_tallies("X", {"A": 75, "B": 25}, 110)
        assert ContestRecord.from_dict(c.to_dict()) == c
