from __future__ import annotations

import dataclasses
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from publist.core import (
    Config,
    OverrideRequired,
    ResearcherProfile,
    UnknownRecordError,
    ValidationError,
)
from publist.disambiguate import (
    AUTO_TIERS,
    CandidateAssignment,
    address_score,
    apply_decision_pure,
    assign_tier,
    candidate_pool,
    citedref_score,
    coauthor_score,
    combine,
    derive_signature,
    recursive_coauthor_inclusion,
    score_all,
    select_seeds,
    style_score,
    subject_score,
    variant_k2_keys,
)
from publist.ingest import profile_from_data
from synth import (
    VUB_ADDRESS,
    VUB_LINE,
    brute_force_closure,
    fixpoint_instance,
    name,
    record,
    scenario_records as scenario,
)
from synth import scenario_profile as base_profile

CFG = Config()


class TestCandidatePool:
    def test_exact_middle_key_gate(self):
        profile = base_profile()
        inside = record("In pool by initial", 2000, ["Rons, N.", "Other, X."])
        spelled = record("In pool by full given name", 2000, ["Rons, Nadine"])
        wrong_initial = record("Out wrong initial", 2000, ["Rons, P."])
        wrong_surname = record("Out wrong surname", 2000, ["Ronse, N."])
        pool = candidate_pool([inside, spelled, wrong_initial, wrong_surname], profile)
        assert set(pool) == {inside.record_id, spelled.record_id}


class TestAddressScore:
    def test_full_match_in_window(self):
        rec = record("T one example", 2000, ["Rons, N."], addresses=[VUB_ADDRESS])
        assert address_score(rec, base_profile()) == pytest.approx(1.0)

    def test_partial_org_no_city(self):
        rec = record(
            "T partial", 2000, ["Rons, N."], addresses=["Universiteit Brussel, Leuven"]
        )
        assert address_score(rec, base_profile()) == pytest.approx(0.7 * 2 / 3)

    def test_partial_org_with_city(self):
        rec = record(
            "T partial city", 2000, ["Rons, N."],
            addresses=["Universiteit Brussel, Brussels"],
        )
        assert address_score(rec, base_profile()) == pytest.approx(0.7 * 2 / 3 + 0.3)

    @pytest.mark.parametrize(
        "year,factor",
        [(1994, 1.0), (1993, 0.5), (2017, 1.0), (2018, 0.5), (2005, 1.0)],
    )
    def test_year_window_lead_and_lag(self, year, factor):
        rec = record("T window check", year, ["Rons, N."], addresses=[VUB_ADDRESS])
        assert address_score(rec, base_profile()) == pytest.approx(1.0 * factor)

    def test_no_years_on_key_means_no_dampening(self):
        profile = base_profile(trajectory=[" | Vrije Universiteit Brussel | Brussels"])
        rec = record("T dateless", 1980, ["Rons, N."], addresses=[VUB_ADDRESS])
        assert address_score(rec, profile) == pytest.approx(1.0)

    def test_org_less_key_scores_city_only(self):
        profile = base_profile(trajectory=[])
        profile = dataclasses.replace(
            profile,
            trajectory=(
                profile_from_data(
                    {"variants": ["Rons, N."], "trajectory": [" | | Brussels"]}
                ).trajectory
            ),
        )
        rec = record("T city only", 2000, ["Rons, N."], addresses=[VUB_ADDRESS])
        assert address_score(rec, profile) == pytest.approx(0.3)

    def test_best_pair_wins(self):
        profile = base_profile(
            trajectory=[VUB_LINE + "\n1990-1995 | Universiteit Antwerpen | Antwerp | BE"]
        )
        rec = record(
            "T best pair", 1993, ["Rons, N."],
            addresses=["Somewhere else entirely", "Universiteit Antwerpen, Antwerp"],
        )
        assert address_score(rec, profile) == pytest.approx(1.0)

    def test_absent_when_no_addresses_or_no_trajectory(self):
        rec = record("T no address", 2000, ["Rons, N."])
        assert address_score(rec, base_profile()) is None
        with_address = record("T a", 2000, ["Rons, N."], addresses=[VUB_ADDRESS])
        no_trajectory = ResearcherProfile(variants=(name("Rons, N."),))
        assert address_score(with_address, no_trajectory) is None


class TestComponentScores:
    def test_coauthor_fixed_denominator(self):
        profile = dataclasses.replace(
            base_profile(), coauthor_keys=frozenset({"spruyt|e"})
        )
        rec = record("T co", 2000, ["Rons, N.", "Spruyt, E.", "Mystery, Z."])
        assert coauthor_score(rec, profile) == pytest.approx(1 / 2)

    def test_coauthor_absent_for_solo_work(self):
        rec = record("T solo", 2000, ["Rons, N."])
        assert coauthor_score(rec, base_profile()) is None

    def test_variants_never_count_as_coauthors(self):
        profile = dataclasses.replace(
            base_profile(), coauthor_keys=frozenset({"spruyt|e"})
        )
        rec = record("T variant co", 2000, ["Rons, N.", "Rons, Nadine", "Spruyt, E."])
        assert coauthor_score(rec, profile) == pytest.approx(1.0)

    def test_subject_jaccard(self):
        profile = dataclasses.replace(
            base_profile(), subject_vocab=frozenset({"research", "evaluation", "policy"})
        )
        rec = record(
            "T subj", 2000, ["Rons, N."], keywords=["research evaluation"], venue="Nature"
        )
        # tokens {research, evaluation, nature}; intersection 2, union 4
        assert subject_score(rec, profile) == pytest.approx(2 / 4)
        assert subject_score(record("T bare", 2000, ["Rons, N."]), profile) is None
        assert subject_score(rec, base_profile()) is None

    def test_citedref_jaccard(self):
        profile = dataclasses.replace(
            base_profile(), accepted_refs=frozenset({"r1", "r2", "r3"})
        )
        rec = record("T refs", 2000, ["Rons, N."], cited_refs=["r1", "r9"])
        assert citedref_score(rec, profile) == pytest.approx(1 / 4)
        assert citedref_score(record("T no refs", 2000, ["Rons, N."]), profile) is None

    def test_style_gate(self):
        texts = [
            "The study of the impact of the policy.",
            "We measure the growth of the field.",
            "The role of the committee in the process.",
            "A view of the system and the data.",
            "The value of the method in the review.",
        ]
        accepted = [
            record(f"Accepted number {i}", 2000 + i, ["Rons, N."], abstract=t)
            for i, t in enumerate(texts)
        ]
        candidate = record(
            "T style", 2010, ["Rons, N."], abstract="The analysis of the corpus."
        )
        ids = frozenset(r.record_id for r in accepted)
        profile = dataclasses.replace(base_profile(), accepted_ids=ids)
        by_id = {r.record_id: r for r in accepted + [candidate]}
        profile = derive_signature(profile, by_id, CFG)
        assert len(profile.style_corpus) == 5
        value = style_score(candidate, profile, CFG)
        assert value is not None and 0.0 < value <= 1.0
        no_abstract = record("T mute", 2010, ["Rons, N."])
        assert style_score(no_abstract, profile, CFG) is None
        strict = Config.from_dict({"n_min_style": 6})
        assert style_score(candidate, profile, strict) is None


class TestCombine:
    def test_worked_example(self):
        combined, used = combine({"address": 0.8, "coauthor": 0.4}, CFG.weights)
        assert combined == pytest.approx(0.6)
        assert used == {"address": pytest.approx(0.5), "coauthor": pytest.approx(0.5)}

    def test_all_present_uses_configured_weights(self):
        components = {d: 1.0 for d in CFG.weights}
        combined, used = combine(components, CFG.weights)
        assert combined == pytest.approx(1.0)
        assert used == pytest.approx(CFG.weights)

    def test_no_components(self):
        assert combine({}, CFG.weights) == (0.0, {})
        assert combine({"address": None, "style": None}, CFG.weights) == (0.0, {})

    def test_zero_weight_dimensions_share_uniformly(self):
        weights = dict(CFG.weights, subject=0.0, citedrefs=0.0)
        combined, used = combine({"subject": 1.0, "citedrefs": 0.0}, weights)
        assert used == {"subject": pytest.approx(0.5), "citedrefs": pytest.approx(0.5)}
        assert combined == pytest.approx(0.5)

    @given(
        st.dictionaries(
            st.sampled_from(("address", "coauthor", "subject", "citedrefs", "style")),
            st.one_of(st.none(), st.floats(0, 1, allow_nan=False)),
            max_size=5,
        )
    )
    def test_convexity(self, components):
        combined, used = combine(components, CFG.weights)
        present = [v for v in components.values() if v is not None]
        if not present:
            assert (combined, used) == (0.0, {})
        else:
            assert sum(used.values()) == pytest.approx(1.0)
            assert min(present) - 1e-12 <= combined <= max(present) + 1e-12


class TestAssignTier:
    def make(self, components, inclusion_round=None):
        combined, used = combine(components, CFG.weights)
        return CandidateAssignment(
            record_id="x",
            components=components,
            weights_used=used,
            combined=combined,
            tier="UNCERTAIN",
            inclusion_round=inclusion_round,
        )

    def test_single_component_is_never_auto_decided(self):
        assert assign_tier(self.make({"address": 1.0}), CFG) == "UNCERTAIN"
        assert assign_tier(self.make({"coauthor": 0.0}), CFG) == "UNCERTAIN"

    def test_thresholds(self):
        assert assign_tier(self.make({"address": 0.8, "coauthor": 0.6}), CFG) == "ACCEPTED"
        assert assign_tier(self.make({"address": 0.7, "coauthor": 0.7}), CFG) == "ACCEPTED"
        assert assign_tier(self.make({"address": 0.2, "coauthor": 0.2}), CFG) == "REJECTED"
        assert assign_tier(self.make({"address": 0.5, "coauthor": 0.3}), CFG) == "UNCERTAIN"

    def test_closure_membership_accepts(self):
        assert assign_tier(self.make({"address": 0.0, "coauthor": 0.0}, 2), CFG) == "ACCEPTED"


class TestSelectSeeds:
    def test_requires_full_initials_and_strong_address(self):
        profile = base_profile()
        seedable = record("S full", 2000, ["Rons, N."], addresses=[VUB_ADDRESS])
        extra_initial = record("S extra", 2000, ["Rons, N. A."], addresses=[VUB_ADDRESS])
        weak_address = record(
            "S weak", 2000, ["Rons, N."], addresses=["Universiteit Brussel, Leuven"]
        )
        no_address = record("S naked", 2000, ["Rons, N."])
        pool = [seedable, extra_initial, weak_address, no_address]
        assert select_seeds(pool, profile, CFG) == {seedable.record_id}

    def test_explicit_seed_ids_join_when_in_pool(self):
        target = record("S listed", 2000, ["Rons, N."])
        profile = base_profile(seed_ids=[target.record_id, "fp:not-in-pool"])
        assert select_seeds([target], profile, CFG) == {target.record_id}


class TestClosure:
    def worked_example(self):
        p1 = record("P one", 2000, ["Rons, N.", "Alpha, A.", "Beta, B."])
        p2 = record("P two", 2001, ["Rons, N.", "Alpha, A.", "Gamma, C."])
        p3 = record("P three", 2002, ["Rons, N.", "Gamma, C.", "Delta, D."])
        p4 = record("P four", 2003, ["Rons, N.", "Epsilon, E."])
        return p1, p2, p3, p4

    def test_round_numbers(self):
        p1, p2, p3, p4 = self.worked_example()
        variant_keys = variant_k2_keys(base_profile())
        rounds = recursive_coauthor_inclusion(
            [p1.record_id], [p1, p2, p3, p4], 1, variant_keys
        )
        assert rounds == {p1.record_id: 0, p2.record_id: 1, p3.record_id: 2}

    def test_threshold_k_two_blocks_single_link(self):
        p1, p2, p3, p4 = self.worked_example()
        variant_keys = variant_k2_keys(base_profile())
        rounds = recursive_coauthor_inclusion(
            [p1.record_id], [p1, p2, p3, p4], 2, variant_keys
        )
        assert rounds == {p1.record_id: 0}

    def test_variant_key_never_carries_inclusion(self):
        # Shared target-author names must not chain records together.
        p1 = record("V one", 2000, ["Rons, N.", "Alpha, A."])
        p5 = record("V five", 2004, ["Rons, N."])
        rounds = recursive_coauthor_inclusion(
            [p1.record_id], [p1, p5], 1, variant_k2_keys(base_profile())
        )
        assert p5.record_id not in rounds

    def test_k_below_one_rejected(self):
        with pytest.raises(ValidationError):
            recursive_coauthor_inclusion([], [], 0)

    def test_max_rounds_caps_depth(self):
        p1, p2, p3, _ = self.worked_example()
        variant_keys = variant_k2_keys(base_profile())
        rounds = recursive_coauthor_inclusion(
            [p1.record_id], [p1, p2, p3], 1, variant_keys, max_rounds=1
        )
        assert rounds == {p1.record_id: 0, p2.record_id: 1}

    def test_matches_brute_force_oracle(self):
        variant_keys = variant_k2_keys(
            profile_from_data({"variants": ["Target, T."]})
        )
        for seed in range(120):
            rng = random.Random(seed)
            records, seeds, k = fixpoint_instance(rng)
            got = recursive_coauthor_inclusion(seeds, records, k, variant_keys)
            expected = brute_force_closure(records, seeds, k, variant_keys)
            assert got == expected, f"instance seed {seed}"

    def test_seed_monotonicity(self):
        variant_keys = variant_k2_keys(
            profile_from_data({"variants": ["Target, T."]})
        )
        for seed in range(40):
            rng = random.Random(1000 + seed)
            records, seeds, k = fixpoint_instance(rng)
            if len(records) == len(seeds):
                continue
            base = recursive_coauthor_inclusion(seeds, records, k, variant_keys)
            extra = next(r.record_id for r in records if r.record_id not in seeds)
            grown = recursive_coauthor_inclusion(
                set(seeds) | {extra}, records, k, variant_keys
            )
            assert set(base) <= set(grown)


class TestScoreAll:
    def test_expected_tiers_and_rounds(self):
        s1, c1, u2, u3, r1, outside = scenario()
        assignments = score_all([s1, c1, u2, u3, r1, outside], base_profile(), CFG)
        by_id = {a.record_id: a for a in assignments}
        assert outside.record_id not in by_id
        assert by_id[s1.record_id].tier == "ACCEPTED"
        assert by_id[s1.record_id].inclusion_round == 0
        assert by_id[c1.record_id].tier == "ACCEPTED"
        assert by_id[c1.record_id].inclusion_round == 1
        assert by_id[u2.record_id].tier == "UNCERTAIN"
        assert by_id[u2.record_id].combined == pytest.approx(0.7 * 2 / 3 / 2)
        assert by_id[u3.record_id].tier == "UNCERTAIN"
        assert len(by_id[u3.record_id].present_components()) == 1
        assert by_id[r1.record_id].tier == "REJECTED"

    def test_pool_sorted_and_tiers_auto_only(self):
        records = list(scenario())
        assignments = score_all(records, base_profile(), CFG)
        ids = [a.record_id for a in assignments]
        assert ids == sorted(ids)
        assert all(a.tier in AUTO_TIERS for a in assignments)

    def test_deterministic(self):
        records = list(scenario())
        first = [a.to_dict() for a in score_all(records, base_profile(), CFG)]
        second = [a.to_dict() for a in score_all(records, base_profile(), CFG)]
        assert first == second

    def test_evidence_cites_trajectory_line_verbatim(self):
        s1, *rest = scenario()
        assignments = score_all([s1, *rest], base_profile(), CFG)
        seed_assignment = next(a for a in assignments if a.record_id == s1.record_id)
        assert any("seed" in e for e in seed_assignment.evidence)
        assert any(VUB_LINE in e for e in seed_assignment.evidence)

    def test_round_trip_dict(self):
        records = list(scenario())
        for a in score_all(records, base_profile(), CFG):
            assert CandidateAssignment.from_dict(a.to_dict()) == a


class TestApplyDecision:
    def setup_method(self):
        self.records = list(scenario())
        self.by_id = {r.record_id: r for r in self.records}
        self.profile = base_profile()
        self.assignments = score_all(self.records, self.profile, CFG)
        s1, c1, u2, u3, r1, outside = self.records
        self.u2, self.u3, self.s1, self.r1 = u2, u3, s1, r1

    def test_accept_marks_and_rescales_uncertain(self):
        updated, profile, delta = apply_decision_pure(
            self.assignments, self.by_id, self.profile, CFG, self.u2.record_id, "accept"
        )
        decided = next(a for a in updated if a.record_id == self.u2.record_id)
        assert decided.tier == "HUMAN_ACCEPTED"
        assert self.u2.record_id in profile.accepted_ids
        assert delta.entries[0].record_id == self.u2.record_id
        assert delta.entries[0].new_tier == "HUMAN_ACCEPTED"
        # u3 shares a co-author with the newly accepted record: 0/2 -> 1/2.
        u3_entry = next(e for e in delta.entries if e.record_id == self.u3.record_id)
        assert u3_entry.old_combined == pytest.approx(0.0)
        assert u3_entry.new_combined == pytest.approx(0.5)
        tail_ids = [e.record_id for e in delta.entries[1:]]
        assert tail_ids == sorted(tail_ids)

    def test_coauthor_component_monotone_under_accepts(self):
        before = {a.record_id: a.components.get("coauthor") for a in self.assignments}
        updated, profile, _ = apply_decision_pure(
            self.assignments, self.by_id, self.profile, CFG, self.u2.record_id, "accept"
        )
        for a in updated:
            old = before[a.record_id]
            new = a.components.get("coauthor")
            if old is not None:
                assert new is not None and new >= old - 1e-12

    def test_reject_of_unaccepted_record_touches_nothing_else(self):
        updated, profile, delta = apply_decision_pure(
            self.assignments, self.by_id, self.profile, CFG, self.u3.record_id, "reject"
        )
        assert [e.record_id for e in delta.entries] == [self.u3.record_id]
        assert next(
            a for a in updated if a.record_id == self.u3.record_id
        ).tier == "HUMAN_REJECTED"
        assert self.u3.record_id in profile.rejected_ids

    def test_unknown_record(self):
        with pytest.raises(UnknownRecordError):
            apply_decision_pure(
                self.assignments, self.by_id, self.profile, CFG, "fp:nope", "accept"
            )

    def test_auto_tier_needs_override(self):
        with pytest.raises(OverrideRequired):
            apply_decision_pure(
                self.assignments, self.by_id, self.profile, CFG, self.s1.record_id, "reject"
            )
        updated, profile, _ = apply_decision_pure(
            self.assignments,
            self.by_id,
            self.profile,
            CFG,
            self.s1.record_id,
            "reject",
            override=True,
        )
        decided = next(a for a in updated if a.record_id == self.s1.record_id)
        assert decided.tier == "HUMAN_REJECTED"
        assert self.s1.record_id in profile.rejected_ids
        assert self.s1.record_id not in profile.seed_ids

    def test_human_tier_revisable_without_override(self):
        updated, profile, _ = apply_decision_pure(
            self.assignments, self.by_id, self.profile, CFG, self.u2.record_id, "accept"
        )
        updated, profile, _ = apply_decision_pure(
            updated, self.by_id, profile, CFG, self.u2.record_id, "reject"
        )
        decided = next(a for a in updated if a.record_id == self.u2.record_id)
        assert decided.tier == "HUMAN_REJECTED"
        assert self.u2.record_id not in profile.accepted_ids
        assert self.u2.record_id in profile.rejected_ids

    def test_invalid_decision_string(self):
        with pytest.raises(ValidationError):
            apply_decision_pure(
                self.assignments, self.by_id, self.profile, CFG, self.u2.record_id, "maybe"
            )


class TestDeriveSignature:
    def test_accepted_only_basis(self):
        s1, c1, u2, u3, r1, outside = scenario()
        by_id = {r.record_id: r for r in (s1, c1, u2, u3, r1)}
        profile = dataclasses.replace(
            base_profile(),
            accepted_ids=frozenset({s1.record_id, "fp:gone"}),
            rejected_ids=frozenset({r1.record_id}),
        )
        derived = derive_signature(profile, by_id, CFG)
        assert derived.coauthor_keys == {"spruyt|e"}
        assert "evaluation" in derived.subject_vocab
        assert "lyon" not in derived.subject_vocab  # rejected records contribute nothing
        assert derived.accepted_refs == {"rons n 1999 scientometrics"}
        assert len(derived.style_corpus) == 1  # only s1 has an abstract
