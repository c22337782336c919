from __future__ import annotations

import csv
import io
import json

import pytest

from publist.core import Config, FormatError
from publist.ingest import parse_ris
from publist.report import (
    EXPORT_FORMATS,
    REASON_CODES,
    accepted_records,
    compare_methods,
    descriptive_stats,
    export_list,
    match_gold,
    run_method_address,
    run_method_cluster,
)
from publist.session import Session
from synth import SRC_A, VUB_ADDRESS, record, scenario_profile, scenario_records


def extra_records():
    seed_no_refs = record(
        "Complete seed lacking cited references",
        2010,
        ["Rons, N.", "Engels, T."],
        addresses=[VUB_ADDRESS],
        keywords=["peer review"],
        abstract="The committee of the panel reviews the proposals.",
    )
    comma_title = record(
        "Evaluation, with a comma embedded",
        2003,
        ["Rons, N.", "Spruyt, E."],
        venue="Scientometrics",
    )
    # Shares the surname and the institution but not the first initial, so
    # it never reaches the candidate pool despite a perfect address match.
    other_initial = record(
        "Departmental colleague outside the pool",
        2012,
        ["Rons, P."],
        addresses=[VUB_ADDRESS],
    )
    return seed_no_refs, comma_title, other_initial


@pytest.fixture()
def session(tmp_path) -> Session:
    s = Session.create(tmp_path / "s", scenario_profile(), Config())
    s.add_records(list(scenario_records()) + list(extra_records()))
    s.run()
    return s


def ids(*records):
    return {r.record_id for r in records}


class TestMethods:
    def test_cluster_method_is_seeds_closure_and_high_scores(self, session):
        s1, c1, u2, u3, r1, outside = scenario_records()
        seed_no_refs, comma_title, _ = extra_records()
        assert run_method_cluster(session) == ids(s1, c1, seed_no_refs, comma_title)

    def test_address_method_applies_floor(self, session):
        s1, c1, u2, u3, r1, outside = scenario_records()
        seed_no_refs, _, _ = extra_records()
        assert run_method_address(session) == ids(s1, seed_no_refs)
        # u2's partial address (0.7 * 2/3) clears a lower floor
        assert run_method_address(session, floor=0.4) == ids(s1, seed_no_refs, u2)

    def test_methods_follow_scores_not_human_tiers(self, session):
        s1, c1, u2, u3, r1, outside = scenario_records()
        before = run_method_cluster(session)
        assert u3.record_id not in before
        # Accepting the evidence-poor record leaves its own combined score
        # untouched, so it stays outside the cluster method; the rescoring it
        # triggers lifts u2 past the acceptance threshold, which the method
        # does reflect.
        session.apply_decision(u3.record_id, "accept")
        after = run_method_cluster(session)
        assert u3.record_id not in after
        assert after == before | {u2.record_id}


class TestCompareMethods:
    def test_set_algebra_and_reasons(self, session):
        s1, c1, u2, u3, r1, outside = scenario_records()
        seed_no_refs, comma_title, _ = extra_records()
        comparison = compare_methods(
            run_method_cluster(session), run_method_address(session), session=session
        )
        assert comparison.both == ids(s1, seed_no_refs)
        assert comparison.only_a == ids(c1, comma_title)
        assert comparison.only_b == frozenset()
        assert comparison.reasons[c1.record_id] == "NO_ADDRESS_MATCH"
        assert comparison.reasons[comma_title.record_id] == "NO_ADDRESS_MATCH"
        assert comparison.recall_a is None and comparison.recall_b is None

    def test_reason_priority_order(self, session):
        s1, c1, u2, u3, r1, outside = scenario_records()
        seed_no_refs, comma_title, other_initial = extra_records()

        def reason_for(rid, floor=0.5):
            cmp = compare_methods(
                {rid}, set(), session=session, address_floor=floor
            )
            return cmp.reasons[rid]

        assert reason_for("fp:0000000000000000") == "SOURCE_MISSING"
        assert reason_for(c1.record_id) == "NO_ADDRESS_MATCH"  # no addresses at all
        assert reason_for(u2.record_id) == "NO_ADDRESS_MATCH"  # below the floor
        assert reason_for(u2.record_id, floor=0.4) == "NOT_IN_CLUSTER"
        assert reason_for(other_initial.record_id) == "NAME_VARIANT_MISS"
        assert reason_for(seed_no_refs.record_id) == "FIELD_INCOMPLETE"
        assert reason_for(s1.record_id) == "OTHER"
        assert set(REASON_CODES) >= set(
            compare_methods(
                run_method_cluster(session),
                run_method_address(session),
                session=session,
            ).reasons.values()
        )

    def test_recall_against_gold(self, session):
        s1, c1, u2, u3, r1, outside = scenario_records()
        gold = ids(s1, c1, u2)
        comparison = compare_methods(
            run_method_cluster(session),
            run_method_address(session),
            session=session,
            gold=gold,
        )
        assert comparison.recall_a == pytest.approx(2 / 3)
        assert comparison.recall_b == pytest.approx(1 / 3)
        assert comparison.recall_union == pytest.approx(2 / 3)

    def test_to_dict_sorted(self, session):
        comparison = compare_methods(
            run_method_cluster(session),
            run_method_address(session),
            session=session,
            unmatched_gold=("leftover",),
        )
        d = comparison.to_dict()
        for key in ("set_a", "set_b", "only_a", "only_b", "both"):
            assert d[key] == sorted(d[key])
        assert d["unmatched_gold"] == ["leftover"]


class TestMatchGold:
    def test_doi_beats_fingerprint(self):
        by_doi = record("Original title", 2000, ["Rons, N."], doi="10.5/g")
        decoy = record("Original title", 2003, ["Rons, N."])
        matched, unmatched = match_gold(
            [{"doi": "https://doi.org/10.5/G", "title": "Original title", "year": 2003}],
            [by_doi, decoy],
        )
        assert matched == {by_doi.record_id}
        assert unmatched == ()

    def test_fingerprint_and_year(self):
        rec = record("Research evaluation per discipline", 2008, ["Rons, N."])
        matched, _ = match_gold(
            [{"title": "research EVALUATION: per discipline!", "year": 2008}], [rec]
        )
        assert matched == {rec.record_id}

    def test_string_entries(self):
        with_doi = record("Some words here", 2001, ["Rons, N."], doi="10.5/s")
        plain = record("Another title entirely", 2002, ["Rons, N."])
        matched, unmatched = match_gold(
            ["doi:10.5/S", "Another title entirely | 2002", "No such thing | 1900"],
            [with_doi, plain],
        )
        assert matched == {with_doi.record_id, plain.record_id}
        assert unmatched == ("No such thing | 1900",)

    def test_unmatched_dict_rendered_as_json(self):
        matched, unmatched = match_gold([{"title": "Gone", "year": 1999}], [])
        assert matched == frozenset()
        assert json.loads(unmatched[0]) == {"title": "Gone", "year": 1999}


class TestDescriptiveStats:
    def test_counts(self, session):
        stats = descriptive_stats(session)
        assert stats["records"] == 9
        assert stats["pool"] == 7
        assert stats["tiers"] == {"ACCEPTED": 4, "REJECTED": 1, "UNCERTAIN": 2}
        assert stats["sources"] == {"srcA": 9}
        assert stats["doc_types"] == {"article": 9}
        assert stats["decisions"] == 0
        address_bins = stats["component_histograms"]["address"]
        assert len(address_bins) == 10
        assert sum(address_bins) == 4  # assignments with an address component
        assert address_bins[9] == 2  # the two full trajectory matches
        assert stats["years"]["2000"] == 1

    def test_decision_count_tracks_log(self, session):
        target = next(
            a.record_id for a in session.assignments() if a.tier == "UNCERTAIN"
        )
        session.apply_decision(target, "accept")
        assert descriptive_stats(session)["decisions"] == 1


class TestAcceptedAndExport:
    def test_accepted_sorted_newest_first(self, session):
        rows = accepted_records(session)
        years_titles = [(r.year, r.title) for r, _ in rows]
        assert years_titles == sorted(years_titles, key=lambda t: (-t[0], t[1]))
        assert {a.tier for _, a in rows} <= {"ACCEPTED", "HUMAN_ACCEPTED"}

    def test_human_accepts_join_the_list(self, session):
        before = {r.record_id for r, _ in accepted_records(session)}
        target = next(
            a.record_id for a in session.assignments() if a.tier == "UNCERTAIN"
        )
        delta = session.apply_decision(target, "accept")
        after = {r.record_id for r, _ in accepted_records(session)}
        # The decided record joins; rescoring may promote further records.
        promoted = {e.record_id for e in delta.entries if e.new_tier == "ACCEPTED"}
        assert after == before | {target} | promoted

    def test_json_export(self, session):
        payload = json.loads(export_list(session, "json").decode("utf-8"))
        assert len(payload) == 4
        assert payload[0]["year"] >= payload[-1]["year"]
        assert all("tier" in item and "combined" in item for item in payload)

    def test_csv_export_rfc4180(self, session):
        data = export_list(session, "csv")
        text = data.decode("utf-8")
        assert "\r\n" in text
        rows = list(csv.reader(io.StringIO(text)))
        assert rows[0] == [
            "record_id", "doi", "year", "title", "venue", "doc_type", "tier", "combined",
        ]
        assert len(rows) == 1 + 4
        titles = [r[3] for r in rows[1:]]
        assert "Evaluation, with a comma embedded" in titles  # comma survives quoting

    def test_ris_export_parses_back(self, session):
        parsed, report = parse_ris(export_list(session, "ris").decode("utf-8"), SRC_A)
        assert report.records_rejected == 0
        assert [r.title for r in parsed] == [r.title for r, _ in accepted_records(session)]

    def test_unknown_format(self, session):
        assert set(EXPORT_FORMATS) == {"json", "csv", "ris"}
        with pytest.raises(FormatError):
            export_list(session, "xml")
