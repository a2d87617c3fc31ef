import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coverbench.annotation import (
    Assignment,
    CurationRow,
    Hit,
    QualityCheck,
    RejectReason,
    ValidationStatus,
    VoteResult,
    aggregate_votes,
    build_hits,
    majority_vote,
    merge_curation,
    read_assignments,
    read_curation,
    read_hits,
    read_votes,
    validate_assignment,
    write_assignments,
    write_curation,
    write_hits,
    write_votes,
)
from coverbench.errors import DataMismatchError, SchemaError
from coverbench.model import RelevanceLabel, SamplingGroup, uncertainty_class
from coverbench.sampling import GroupAssignment
from coverbench.store import Dataset

from conftest import make_version

V = RelevanceLabel.VERSION
NV = RelevanceLabel.NON_VERSION
NM = RelevanceLabel.NO_MUSIC
M = RelevanceLabel.MATCH


def sampled_for(work_id, n):
    return [
        GroupAssignment(work_id, f"{work_id}_cand{i}", SamplingGroup.MUTUAL_UNC, 0.0)
        for i in range(n)
    ]


class TestBuildHits:
    def test_one_hit_per_work_deterministic(self, tiny_seed):
        sampled = sampled_for("w1", 3) + sampled_for("w2", 2)
        hits_a = build_hits(sampled, tiny_seed, rng_seed=42)
        hits_b = build_hits(sampled, tiny_seed, rng_seed=42)
        assert hits_a == hits_b
        assert [h.work_id for h in hits_a] == ["w1", "w2"]

    def test_different_seed_may_change_choice(self, tiny_seed):
        sampled = sampled_for("w1", 3)
        picks = {
            build_hits(sampled, tiny_seed, rng_seed=seed)[0].query_version.version_id
            for seed in range(12)
        }
        assert len(picks) > 1

    def test_query_is_seed_version_of_work(self, tiny_seed):
        hits = build_hits(sampled_for("w1", 3), tiny_seed, rng_seed=1)
        assert hits[0].query_version.work_id == "w1"

    def test_quality_check_has_known_answer(self, tiny_seed):
        for seed in range(8):
            hit = build_hits(sampled_for("w1", 4), tiny_seed, rng_seed=seed)[0]
            expected = hit.quality_check.expected
            assert expected in (V, NV)
            quality_work = next(
                v.work_id
                for v in tiny_seed.versions
                if v.video_id == hit.quality_check.video_id
            )
            if expected is V:
                assert quality_work == "w1"
                assert hit.quality_check.video_id != hit.query_version.video_id
            else:
                assert quality_work != "w1"

    def test_work_without_seed_versions_rejected(self, tiny_seed):
        with pytest.raises(DataMismatchError, match="w9"):
            build_hits(sampled_for("w9", 2), tiny_seed, rng_seed=0)

    def test_presentation_order_is_permutation(self, tiny_seed):
        hit = build_hits(sampled_for("w1", 5), tiny_seed, rng_seed=3)[0]
        order = hit.presentation_order()
        assert sorted(order) == sorted(hit.item_ids)
        assert hit.presentation_order() == order

    def test_single_work_dataset_uses_same_work_quality(self):
        seed = Dataset(
            versions=[make_version("w1", str(i)) for i in range(1, 4)]
        )
        hit = build_hits(sampled_for("w1", 2), seed, rng_seed=0)[0]
        assert hit.quality_check.expected is V


def hit_fixture():
    query = make_version("w1", "1")
    return Hit(
        hit_id="hit_w1",
        work_id="w1",
        query_version=query,
        candidates=("c1", "c2", "c3"),
        quality_check=QualityCheck(video_id="q1", expected=V),
        perm_seed=7,
    )


def assignment_for(hit, quality_label=V, duration=90.0, worker="worker1", labels=None):
    full = {vid: NV for vid in hit.candidates}
    if labels:
        full.update(labels)
    full[hit.quality_check.video_id] = quality_label
    return Assignment(
        hit_id=hit.hit_id, worker_id=worker, labels=full, duration_s=duration
    )


class TestValidateAssignment:
    def test_accept(self):
        hit = hit_fixture()
        result = validate_assignment(assignment_for(hit, duration=90), hit)
        assert result.status is ValidationStatus.ACCEPT
        assert result.reason is None

    def test_too_fast(self):
        hit = hit_fixture()
        result = validate_assignment(assignment_for(hit, duration=9), hit)
        assert result.status is ValidationStatus.REJECT
        assert result.reason is RejectReason.TOO_FAST

    def test_boundary_duration_accepted(self):
        hit = hit_fixture()
        result = validate_assignment(assignment_for(hit, duration=10), hit)
        assert result.status is ValidationStatus.ACCEPT

    def test_quality_fail(self):
        hit = hit_fixture()
        result = validate_assignment(assignment_for(hit, quality_label=NV), hit)
        assert result.status is ValidationStatus.REJECT
        assert result.reason is RejectReason.QUALITY_FAIL

    def test_quality_fail_override_accepted_excluded(self):
        hit = hit_fixture()
        result = validate_assignment(
            assignment_for(hit, quality_label=NV), hit, accept_quality_override=True
        )
        assert result.status is ValidationStatus.ACCEPT_EXCLUDED

    def test_override_does_not_save_too_fast(self):
        hit = hit_fixture()
        result = validate_assignment(
            assignment_for(hit, quality_label=NV, duration=5),
            hit,
            accept_quality_override=True,
        )
        assert result.status is ValidationStatus.REJECT
        assert result.reason is RejectReason.TOO_FAST

    def test_incomplete_label_map_rejected(self):
        hit = hit_fixture()
        a = Assignment(
            hit_id="hit_w1", worker_id="w", labels={"c1": V}, duration_s=90
        )
        with pytest.raises(SchemaError, match="incomplete"):
            validate_assignment(a, hit)

    def test_wrong_hit_rejected(self):
        hit = hit_fixture()
        a = assignment_for(hit)
        other = Hit(
            hit_id="hit_w2",
            work_id="w2",
            query_version=make_version("w2", "1"),
            candidates=("c9",),
            quality_check=QualityCheck(video_id="q9", expected=V),
            perm_seed=1,
        )
        with pytest.raises(DataMismatchError):
            validate_assignment(a, other)


class TestMajorityVote:
    def test_three_equal_decides(self):
        result = majority_vote([V, V, V, NV, NV])
        assert result.final is V

    def test_no_label_reaches_three(self):
        assert majority_vote([V, V, NV, NV]).final is None

    def test_three_of_three(self):
        assert majority_vote([M, M, M]).final is M

    def test_tie_at_threshold_undecided(self):
        assert majority_vote([V, V, V, NV, NV, NV]).final is None

    def test_tally_counts(self):
        result = majority_vote([V, NV, V])
        assert result.tally == {V: 2, NV: 1}
        assert result.final is None

    def test_custom_threshold(self):
        assert majority_vote([V, V], threshold=2).final is V

    @given(st.lists(st.sampled_from(list(RelevanceLabel)), max_size=8))
    @settings(max_examples=200, deadline=None)
    def test_permutation_invariant(self, labels):
        base = majority_vote(labels)
        assert majority_vote(list(reversed(labels))).final == base.final

    @given(st.lists(st.sampled_from(list(RelevanceLabel)), max_size=8))
    @settings(max_examples=200, deadline=None)
    def test_adding_winning_label_keeps_outcome(self, labels):
        base = majority_vote(labels)
        if base.final is not None:
            extended = majority_vote(list(labels) + [base.final])
            assert extended.final == base.final

    def test_decided_implies_threshold_and_strict_plurality(self):
        result = majority_vote([V, V, V, NV])
        assert result.final is V
        best = max(result.tally.values())
        assert result.tally[result.final] == best >= 3
        assert sum(1 for c in result.tally.values() if c == best) == 1


class TestAggregateVotes:
    def test_counts_and_votes(self, tiny_seed):
        hits = build_hits(sampled_for("w1", 3), tiny_seed, rng_seed=1)
        hit = hits[0]
        assignments = [
            assignment_for(hit, worker=f"w{i}", labels={"w1_cand0": V}) for i in range(3)
        ]
        assignments.append(assignment_for(hit, worker="fast", duration=3))
        assignments.append(
            assignment_for(hit, worker="sloppy", quality_label=NV)
        )
        outcome = aggregate_votes(hits, assignments)
        assert outcome.n_assignments == 5
        assert outcome.n_accepted == 3
        assert [r[1] for r in outcome.rejected] == ["fast", "sloppy"]
        by_vid = {v.video_id: v for v in outcome.votes}
        assert by_vid["w1_cand0"].final is V

    def test_excluded_override_not_in_votes(self, tiny_seed):
        hits = build_hits(sampled_for("w1", 1), tiny_seed, rng_seed=1)
        hit = hits[0]
        assignments = [
            assignment_for(hit, worker="w1", labels={"w1_cand0": V}),
            assignment_for(hit, worker="bad", quality_label=NV, labels={"w1_cand0": V}),
        ]
        outcome = aggregate_votes(
            hits, assignments, overrides=[(hit.hit_id, "bad")]
        )
        assert outcome.n_excluded == 1
        vote = outcome.votes[0]
        assert sum(vote.tally.values()) == 1  # override labels never counted

    def test_unknown_hit_rejected(self, tiny_seed):
        hits = build_hits(sampled_for("w1", 1), tiny_seed, rng_seed=1)
        ghost = Assignment(
            hit_id="hit_zz", worker_id="w", labels={"x": V}, duration_s=20
        )
        with pytest.raises(DataMismatchError, match="hit_zz"):
            aggregate_votes(hits, [ghost])


class TestMergeCuration:
    def vote(self, video_id, final, work_id="w1"):
        tally = {final: 3} if final is not None else {V: 2, NV: 2}
        return VoteResult(work_id=work_id, video_id=video_id, final=final, tally=tally)

    def test_expert_resolves_undecided(self):
        merged = merge_curation(
            [self.vote("a", None)],
            [CurationRow("a", V, uncertainty_class("song_medley"))],
        )
        assert merged[0].relevance is V
        assert merged[0].uncertainty.name == "song_medley"
        assert merged[0].flag == ""

    def test_expert_overrides_vote_flags_worker_error(self):
        merged = merge_curation(
            [self.vote("a", V)],
            [CurationRow("a", NV, uncertainty_class("song_same_artist"))],
        )
        assert merged[0].relevance is NV
        assert merged[0].flag == "worker_error"

    def test_vote_retained_without_expert(self):
        merged = merge_curation([self.vote("a", V)], [])
        assert merged[0].relevance is V
        assert merged[0].flag == ""

    def test_undecided_without_expert_flagged_incomplete(self):
        merged = merge_curation([self.vote("a", None)], [])
        assert merged[0].relevance is None
        assert merged[0].flag == "incomplete"

    def test_expert_agreeing_with_vote_no_flag(self):
        merged = merge_curation(
            [self.vote("a", V)], [CurationRow("a", V, uncertainty_class("none"))]
        )
        assert merged[0].flag == ""

    def test_conflicting_expert_rows_rejected(self):
        rows = [
            CurationRow("a", V, uncertainty_class("none")),
            CurationRow("a", NV, uncertainty_class("none")),
        ]
        with pytest.raises(SchemaError, match="conflicting"):
            merge_curation([self.vote("a", None)], rows)

    def test_identical_expert_rows_collapse(self):
        rows = [
            CurationRow("a", V, uncertainty_class("none")),
            CurationRow("a", V, uncertainty_class("none")),
        ]
        merged = merge_curation([self.vote("a", None)], rows)
        assert merged[0].relevance is V

    def test_unknown_video_rejected(self):
        with pytest.raises(DataMismatchError, match="ghost"):
            merge_curation(
                [self.vote("a", V)], [CurationRow("ghost", V, uncertainty_class("none"))]
            )

    def test_never_undecided_with_expert_row(self):
        for final in [None, V, NV, M, NM]:
            merged = merge_curation(
                [self.vote("a", final)],
                [CurationRow("a", M, uncertainty_class("none"))],
            )
            assert merged[0].relevance is M


class TestFileRoundTrips:
    def test_hits_round_trip(self, tiny_seed, tmp_path):
        hits = build_hits(
            sampled_for("w1", 3) + sampled_for("w2", 2), tiny_seed, rng_seed=5
        )
        write_hits(tmp_path / "hits.csv", hits)
        back = read_hits(tmp_path / "hits.csv", tiny_seed)
        assert back == hits

    def test_assignments_round_trip(self, tiny_seed, tmp_path):
        hits = build_hits(sampled_for("w1", 2), tiny_seed, rng_seed=5)
        a = assignment_for(hits[0], duration=45.5)
        write_assignments(tmp_path / "a.csv", [a])
        back = read_assignments(tmp_path / "a.csv")
        assert back == [a]

    def test_votes_round_trip(self, tmp_path):
        votes = [
            VoteResult("w1", "a", V, {V: 3, NV: 1}),
            VoteResult("w1", "b", None, {V: 2, NV: 2}),
        ]
        write_votes(tmp_path / "v.tsv", votes)
        assert read_votes(tmp_path / "v.tsv") == votes

    def test_curation_round_trip(self, tmp_path):
        rows = [
            CurationRow("a", V, uncertainty_class("song_medley"), note="tricky"),
            CurationRow("b", NM, uncertainty_class("none")),
        ]
        write_curation(tmp_path / "c.tsv", rows)
        assert read_curation(tmp_path / "c.tsv") == rows


class TestHitConstruction:
    def query(self):
        return make_version("w1", "1")

    def test_duplicate_candidates_rejected(self):
        with pytest.raises(SchemaError, match="duplicate"):
            Hit(
                hit_id="h",
                work_id="w1",
                query_version=self.query(),
                candidates=("c1", "c1"),
                quality_check=QualityCheck("q", RelevanceLabel.VERSION),
                perm_seed=1,
            )

    def test_quality_collision_rejected(self):
        with pytest.raises(SchemaError, match="collides"):
            Hit(
                hit_id="h",
                work_id="w1",
                query_version=self.query(),
                candidates=("c1",),
                quality_check=QualityCheck("c1", RelevanceLabel.VERSION),
                perm_seed=1,
            )

    def test_empty_candidates_rejected(self):
        with pytest.raises(SchemaError, match="no candidates"):
            Hit(
                hit_id="h",
                work_id="w1",
                query_version=self.query(),
                candidates=(),
                quality_check=QualityCheck("q", RelevanceLabel.VERSION),
                perm_seed=1,
            )

    def test_quality_expected_restricted(self):
        with pytest.raises(SchemaError, match="version or non_version"):
            QualityCheck("q", RelevanceLabel.MATCH)


class TestHitsFileErrors:
    def test_bad_header_rejected(self, tiny_seed, tmp_path):
        path = tmp_path / "hits.csv"
        path.write_text("nope,header\n1,2\n")
        with pytest.raises(SchemaError, match="unexpected header"):
            read_hits(path, tiny_seed)

    def test_unknown_role_rejected(self, tiny_seed, tmp_path):
        hits = build_hits(sampled_for("w1", 2), tiny_seed, rng_seed=3)
        write_hits(tmp_path / "hits.csv", hits)
        text = (tmp_path / "hits.csv").read_text().replace("quality_check", "bonus")
        (tmp_path / "hits.csv").write_text(text)
        with pytest.raises(SchemaError, match="bonus"):
            read_hits(tmp_path / "hits.csv", tiny_seed)

    def test_missing_quality_row_rejected(self, tiny_seed, tmp_path):
        hits = build_hits(sampled_for("w1", 2), tiny_seed, rng_seed=3)
        write_hits(tmp_path / "hits.csv", hits)
        lines = (tmp_path / "hits.csv").read_text().splitlines()
        kept = [l for l in lines if "quality_check" not in l]
        (tmp_path / "hits.csv").write_text("\n".join(kept) + "\n")
        with pytest.raises(SchemaError, match="quality-check"):
            read_hits(tmp_path / "hits.csv", tiny_seed)

    def test_query_missing_from_seed_rejected(self, tiny_seed, tmp_path):
        hits = build_hits(sampled_for("w1", 2), tiny_seed, rng_seed=3)
        write_hits(tmp_path / "hits.csv", hits)
        from coverbench.store import Dataset as DS

        empty_seed = DS(versions=[v for v in tiny_seed.versions if v.work_id != "w1"])
        with pytest.raises(DataMismatchError, match="not in seed"):
            read_hits(tmp_path / "hits.csv", empty_seed)

    def test_assignments_bad_header_rejected(self, tmp_path):
        path = tmp_path / "a.csv"
        path.write_text("wrong,header\n")
        with pytest.raises(SchemaError, match="unexpected header"):
            read_assignments(path)
