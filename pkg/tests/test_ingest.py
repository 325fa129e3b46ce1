import io
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cascadekit.ingest import (
    Cascade,
    GroupCatalog,
    SchemaError,
    build_cascades,
    build_overlap_network,
    cascades_to_events,
    load_events,
    load_group_catalog,
    summarize_dataset,
    write_events_csv,
)
from cascadekit.model import AdoptionEvent, ContentType, Modality

HEADER = "message_id,group_id,timestamp,modality,content_type,forwarding_score\n"


def ev(msg, grp, t, modality=Modality.TEXT, content=ContentType.UNLABELED, score=0, extra=None):
    return AdoptionEvent(msg, grp, t, modality, content, score, extra or {})


class TestLoadEvents:
    def test_three_valid_rows(self):
        src = HEADER + (
            "m1,g1,1.0,text,unlabeled,0\n"
            "m1,g2,2.0,image,misinformation,3\n"
            "m2,g1,5.5,video,hateful,7\n"
        )
        events, report = load_events(io.StringIO(src))
        assert len(events) == 3
        assert report.row_errors == []
        assert events[1].content is ContentType.MISINFORMATION

    def test_negative_forwarding_score_is_row_error(self):
        src = HEADER + "m1,g1,1.0,text,unlabeled,-1\n"
        events, report = load_events(io.StringIO(src))
        assert events == []
        assert len(report.row_errors) == 1
        assert report.row_errors[0].field == "forwarding_score"

    def test_case_insensitive_content(self):
        src = HEADER + "m1,g1,1.0,text,MisInformation,0\n"
        events, _ = load_events(io.StringIO(src))
        assert events[0].content is ContentType.MISINFORMATION

    def test_unknown_modality_is_row_error(self):
        src = HEADER + "m1,g1,1.0,smoke_signal,unlabeled,0\n"
        events, report = load_events(io.StringIO(src))
        assert events == []
        assert report.row_errors[0].field == "modality"

    def test_missing_column_is_fatal(self):
        with pytest.raises(SchemaError, match="forwarding_score"):
            load_events(io.StringIO("message_id,group_id,timestamp,modality,content_type\n"))

    def test_jsonl_round(self):
        src = (
            '{"message_id": "m1", "group_id": "g1", "timestamp": 1.5, '
            '"modality": "chat", "content_type": "propaganda", "forwarding_score": 2}\n'
            '{"message_id": "m1", "group_id": "g2"}\n'
        )
        events, report = load_events(io.StringIO(src), fmt="jsonl")
        assert len(events) == 1
        assert events[0].modality is Modality.TEXT
        assert len(report.row_errors) == 1

    def test_extra_columns_become_labels(self):
        src = (
            "message_id,group_id,timestamp,modality,content_type,forwarding_score,region\n"
            "m1,g1,1.0,text,unlabeled,0,north\n"
        )
        events, _ = load_events(io.StringIO(src))
        assert events[0].extra == {"region": "north"}

    def test_csv_write_read_roundtrip(self, tmp_path):
        events = [ev("m1", "g1", 1.25, extra={"k": "v"}), ev("m1", "g2", 2.5)]
        path = tmp_path / "events.csv"
        write_events_csv(events, path)
        with open(path, encoding="utf-8") as fh:
            loaded, report = load_events(fh)
        assert report.row_errors == []
        assert [(e.message, e.group, e.time) for e in loaded] == [
            ("m1", "g1", 1.25),
            ("m1", "g2", 2.5),
        ]


class TestBuildCascades:
    def test_earliest_per_group(self):
        events = [ev("m1", "g1", 5), ev("m1", "g1", 9), ev("m1", "g2", 7)]
        cascades, report = build_cascades(events)
        assert len(cascades) == 1
        assert cascades[0].adoptions == (("g1", 5), ("g2", 7))
        assert report.duplicates_collapsed == 1

    def test_single_group_dropped(self):
        cascades, report = build_cascades([ev("m2", "g1", 1)])
        assert cascades == []
        assert report.single_group_dropped == 1

    def test_tie_is_lexicographic_and_flagged(self):
        events = [ev("m1", "gB", 3.0), ev("m1", "gA", 3.0), ev("m1", "gC", 4.0)]
        cascades, report = build_cascades(events)
        assert cascades[0].groups == ["gA", "gB", "gC"]
        assert len(report.ties) == 1
        assert report.ties[0]["groups"] == ["gA", "gB"]

    def test_forwarding_score_is_message_max(self):
        events = [ev("m1", "g1", 1, score=0), ev("m1", "g2", 2, score=6)]
        cascades, _ = build_cascades(events)
        assert cascades[0].forwarding_score == 6
        assert cascades[0].forwarding_bucket() == "5+"

    def test_idempotent_fixpoint(self):
        events = [
            ev("m1", "g1", 5),
            ev("m1", "g1", 9),
            ev("m1", "g2", 7),
            ev("m2", "g3", 1),
            ev("m2", "g4", 2),
            ev("m2", "g5", 2.5),
        ]
        once, _ = build_cascades(events)
        twice, report = build_cascades(cascades_to_events(once))
        assert [c.adoptions for c in twice] == [c.adoptions for c in once]
        assert report.duplicates_collapsed == 0
        assert report.single_group_dropped == 0

    @given(
        st.lists(
            st.tuples(
                st.sampled_from(["m1", "m2", "m3"]),
                st.sampled_from(["g1", "g2", "g3", "g4"]),
                st.integers(min_value=0, max_value=20),
            ),
            max_size=30,
        )
    )
    @settings(max_examples=150, deadline=None)
    def test_no_short_cascade_escapes(self, triples):
        events = [ev(m, g, t) for m, g, t in triples]
        cascades, _ = build_cascades(events)
        for c in cascades:
            assert len(c.adoptions) >= 2
            assert len(set(c.groups)) == len(c.groups)
            assert c.times == sorted(c.times)

    def test_cascade_invariants(self):
        with pytest.raises(ValueError):
            Cascade("m", (("g1", 1.0),), ContentType.UNLABELED, Modality.TEXT, 0)
        with pytest.raises(ValueError):
            Cascade(
                "m",
                (("g1", 2.0), ("g2", 1.0)),
                ContentType.UNLABELED,
                Modality.TEXT,
                0,
            )


class TestOverlapNetwork:
    def make_catalog(self, members_by_group):
        catalog = GroupCatalog()
        for group, members in members_by_group.items():
            catalog.add(group, max(len(members), 1), members)
        return catalog

    def test_shared_member_edge(self):
        catalog = self.make_catalog({"g1": {"a", "b"}, "g2": {"b", "c"}, "g3": {"d"}})
        net = build_overlap_network(catalog)
        assert net.connected("g1", "g2")
        assert not net.connected("g1", "g3")
        assert net.neighbors("g3") == set()

    def test_disjoint_groups(self):
        catalog = self.make_catalog({"g1": {"a"}, "g2": {"b"}})
        net = build_overlap_network(catalog)
        assert net.edges == frozenset()

    def test_matches_bruteforce_on_random_groups(self):
        rng = np.random.default_rng(7)
        members = {
            f"g{i:02d}": set(rng.choice(200, size=rng.integers(1, 12), replace=False).astype(str))
            for i in range(50)
        }
        net = build_overlap_network(self.make_catalog(members))
        expected = frozenset(
            frozenset((a, b))
            for a, b in itertools.combinations(sorted(members), 2)
            if members[a] & members[b]
        )
        assert net.edges == expected

    def test_symmetric_and_loop_free(self):
        catalog = self.make_catalog({"g1": {"a"}, "g2": {"a"}, "g3": {"a", "z"}})
        net = build_overlap_network(catalog)
        for edge in net.edges:
            assert len(edge) == 2
        assert net.connected("g2", "g1") == net.connected("g1", "g2")

    def test_requires_membership_data(self):
        catalog = GroupCatalog()
        catalog.add("g1", 10)
        catalog.add("g2", 5)
        with pytest.raises(ValueError, match="membership"):
            build_overlap_network(catalog)


class TestGroupCatalog:
    def test_load(self):
        src = "group_id,size,member_ids\ng1,10,a;b\ng2,3,\n"
        catalog = load_group_catalog(io.StringIO(src))
        assert catalog.size("g1") == 10
        assert catalog.members("g1") == {"a", "b"}
        assert catalog.members("g2") is None

    def test_partial_membership_allowed_but_bounded(self):
        catalog = GroupCatalog()
        catalog.add("g1", 5, {"a"})
        with pytest.raises(ValueError):
            catalog.add("g2", 1, {"a", "b"})

    def test_bad_size_fatal(self):
        with pytest.raises(SchemaError):
            load_group_catalog(io.StringIO("group_id,size\ng1,ten\n"))


class TestSummarize:
    def test_empty_input(self):
        summary = summarize_dataset([])
        assert all(v == (0, 0) for v in summary.modality.values())
        assert all(v == (0, 0) for v in summary.content.values())
        assert all(v == (0, 0) for v in summary.forwarding.values())

    def test_two_text_messages_one_group(self):
        events = [ev("m1", "g1", 1), ev("m2", "g1", 2)]
        summary = summarize_dataset(events)
        assert summary.modality["text"] == (2, 1)
        assert summary.modality["video"] == (0, 0)

    def test_synthetic_fixture_counts(self):
        # 100 events over 10 messages x 10 groups with known labels:
        # messages m0..m4 text/misinformation score 1, m5..m9 video/unlabeled score 6
        events = []
        for i in range(10):
            modality = Modality.TEXT if i < 5 else Modality.VIDEO
            content = ContentType.MISINFORMATION if i < 5 else ContentType.UNLABELED
            score = 1 if i < 5 else 6
            for j in range(10):
                events.append(ev(f"m{i}", f"g{j}", i * 10 + j, modality, content, score))
        assert len(events) == 100
        summary = summarize_dataset(events)
        assert summary.modality["text"] == (5, 10)
        assert summary.modality["video"] == (5, 10)
        assert summary.content["misinformation"] == (5, 10)
        assert summary.content["unlabeled"] == (5, 10)
        assert summary.forwarding["1"] == (5, 10)
        assert summary.forwarding["5+"] == (5, 10)
        assert summary.forwarding["0"] == (0, 0)
        rows = summary.to_rows()
        assert ("modality", "text", 5, 10) in rows
