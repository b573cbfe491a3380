import io
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from largeactive.errors import ParseError, ValidationError
from largeactive.evaluation import render_git_log
from largeactive.ingest import (
    DiffHunk,
    ParsedCommit,
    Span,
    SpanTable,
    attribute_hunks_to_functions,
    build_change_history,
    load_changes,
    load_facts,
    load_spans,
    parse_git_log_stream,
)

FACTS = {
    "functions": [
        {"id": "u#a", "file": "Utils.x", "name": "a", "start_line": 1, "end_line": 5},
        {"id": "u#b", "file": "Utils.x", "name": "b", "start_line": 7, "end_line": 9},
        {"id": "c#main", "file": "Client.x", "name": "main"},
    ],
    "calls": [{"caller": "c#main", "callee": "u#a"}, {"caller": "u#a", "callee": "u#b"}],
}


class TestLoadFacts:
    def test_fixture(self):
        db = load_facts(json.dumps(FACTS))
        assert len(db.functions) == 3 and len(db.calls) == 2
        assert db.function("u#a").span == (1, 5)
        assert db.function("c#main").span is None

    def test_duplicate_id_names_it(self):
        doc = json.loads(json.dumps(FACTS))
        doc["functions"].append({"id": "u#a", "file": "Other.x", "name": "a2"})
        with pytest.raises(ValidationError, match="u#a"):
            load_facts(json.dumps(doc))

    def test_empty_document(self):
        assert len(load_facts("").functions) == 0
        assert len(load_facts('{"functions": [], "calls": []}').functions) == 0

    def test_malformed_json_reports_position(self):
        with pytest.raises(ParseError) as info:
            load_facts('{"functions": [\n  {"id": }]}')
        assert info.value.line == 2

    def test_missing_field(self):
        with pytest.raises(ParseError, match="file"):
            load_facts('{"functions": [{"id": "x"}]}')

    def test_dangling_call_is_validation_error(self):
        doc = {"functions": FACTS["functions"], "calls": [{"caller": "ghost", "callee": "u#a"}]}
        with pytest.raises(ValidationError, match="ghost"):
            load_facts(json.dumps(doc))


class TestLoadChanges:
    def test_reordered(self):
        doc = {
            "commits": [
                {"id": "late", "timestamp": 20, "touched_functions": ["u#a"], "touched_files": ["Utils.x"]},
                {"id": "early", "timestamp": 10, "touched_functions": [], "touched_files": []},
            ]
        }
        h = load_changes(io.StringIO(json.dumps(doc)))
        assert [c.id for c in h.commits] == ["early", "late"]

    def test_duplicate_id(self):
        doc = {"commits": [{"id": "k", "timestamp": 1}, {"id": "k", "timestamp": 2}]}
        with pytest.raises(ValidationError, match="k"):
            load_changes(json.dumps(doc))

    def test_empty_touch_sets_contribute_nothing(self):
        h = load_changes('{"commits": [{"id": "k", "timestamp": 1, "touched_functions": [], "touched_files": []}]}')
        assert len(h) == 1 and h.known_functions() == frozenset()

    def test_bad_list(self):
        with pytest.raises(ParseError):
            load_changes('{"commits": [{"id": "k", "timestamp": 1, "touched_functions": "u#a"}]}')


LOG_ONE = """\
commit abc123 1700000000
diff --git a/F.x b/F.x
index 111..222 100644
--- a/F.x
+++ b/F.x
@@ -10,2 +12,3 @@ void f()
-x
-y
+x
+y
+z
"""


class TestParseLog:
    def test_single_hunk(self):
        (commit,) = parse_git_log_stream(LOG_ONE)
        assert (commit.id, commit.timestamp) == ("abc123", 1700000000)
        assert commit.hunks == (DiffHunk("F.x", 12, 3),)

    def test_commit_without_diff(self):
        commits = parse_git_log_stream("commit a 1\n\ncommit b 2\n")
        assert [(c.id, c.hunks) for c in commits] == [("a", ()), ("b", ())]

    def test_file_deletion_hunk_retained(self):
        log = "commit d 5\n--- a/G.x\n+++ /dev/null\n@@ -1,2 +0,0 @@\n-p\n-q\n"
        (commit,) = parse_git_log_stream(log)
        assert commit.hunks == (DiffHunk("G.x", 1, 0),)

    def test_counts_default_to_one(self):
        log = "commit d 5\n--- a/G.x\n+++ b/G.x\n@@ -4 +4 @@\n-p\n+q\n"
        assert parse_git_log_stream(log)[0].hunks == (DiffHunk("G.x", 4, 1),)

    def test_binary_files_skipped(self):
        log = (
            "commit d 5\ndiff --git a/i.png b/i.png\nBinary files a/i.png and b/i.png differ\n"
            "--- a/G.x\n+++ b/G.x\n@@ -4,0 +5,1 @@\n+q\n"
        )
        assert parse_git_log_stream(log)[0].hunks == (DiffHunk("G.x", 5, 1),)

    def test_body_lines_resembling_headers(self):
        log = "commit d 5\n--- a/G.x\n+++ b/G.x\n@@ -1,1 +1,1 @@\n--- a/not-a-header\n+++ b/nor-this\n"
        assert parse_git_log_stream(log)[0].hunks == (DiffHunk("G.x", 1, 1),)

    @pytest.mark.parametrize(
        "log, line",
        [
            ("commit onlyid\n", 1),
            ("garbage first\n", 1),
            ("commit a 1\n--- a/G.x\n+++ b/G.x\n@@ -1,2 +1\n", 4),
            ("commit a 1\n--- a/G.x\n+++ b/G.x\n@@ -1,2 +1,2 @@\n-x\n+y\ncommit b 2\n", 7),
        ],
        ids=["bad-commit-header", "before-commit", "truncated-hunk", "short-body"],
    )
    def test_errors_carry_line_numbers(self, log, line):
        with pytest.raises(ParseError) as info:
            parse_git_log_stream(log)
        assert info.value.line == line

    def test_accepts_line_iterables(self):
        assert parse_git_log_stream(io.StringIO(LOG_ONE)) == parse_git_log_stream(LOG_ONE)


@pytest.fixture
def spans():
    return SpanTable({("k", "F.x"): [Span("f2", 25, 40), Span("f1", 5, 20)]})


class TestAttribution:
    @pytest.mark.parametrize(
        "start, count, expected",
        [
            (18, 10, {"f1", "f2"}),  # [18, 27]
            (21, 4, set()),  # [21, 24], between spans
            (10, 0, {"f1"}),  # deletion anchored at 10
            (20, 1, {"f1"}),
            (25, 0, {"f2"}),
            (41, 3, set()),
        ],
    )
    def test_interval_rule(self, spans, start, count, expected):
        assert attribute_hunks_to_functions([DiffHunk("F.x", start, count)], spans, "k") == expected

    def test_missing_span_entry_falls_back(self, spans):
        parsed = [ParsedCommit("k", 1, (DiffHunk("F.x", 6, 1), DiffHunk("Other.x", 1, 3)))]
        (record,) = build_change_history(parsed, spans).commits
        assert record.touched_functions == {"f1"}
        assert record.touched_files == {"F.x", "Other.x"}
        assert record.fallback_files == {"Other.x"} and record.flagged

    def test_empty_input(self, spans):
        assert len(build_change_history([], spans)) == 0

    def test_overlapping_spans_rejected(self):
        with pytest.raises(ValidationError, match="overlapping"):
            SpanTable({("k", "F.x"): [Span("a", 1, 10), Span("b", 10, 12)]})

    def test_load_spans(self, fixtures_dir):
        table = load_spans((fixtures_dir / "spans.json").read_text())
        assert [s.function_id for s in table.spans("k3", "src/C.x")] == ["src/C.x#c1", "src/C.x#c2"]
        assert table.spans("k2", "src/C.x") is None


_span_lists = st.lists(st.integers(1, 6), min_size=1, max_size=6).map(
    lambda widths: [Span(f"f{i}", 1 + 10 * i, 1 + 10 * i + w) for i, w in enumerate(widths)]
)
_hunk = st.tuples(st.integers(1, 70), st.integers(0, 15))


@given(_span_lists, st.lists(_hunk, max_size=6), st.randoms())
def test_attribution_is_order_independent(span_list, hunks, rnd):
    table = SpanTable({("k", "F.x"): span_list})
    hs = [DiffHunk("F.x", s, c) for s, c in hunks]
    shuffled = hs[:]
    rnd.shuffle(shuffled)
    assert attribute_hunks_to_functions(hs, table, "k") == attribute_hunks_to_functions(shuffled, table, "k")


@given(_span_lists, _hunk, st.integers(0, 5), st.integers(0, 10))
def test_attribution_is_monotone(span_list, hunk, grow_left, grow_right):
    table = SpanTable({("k", "F.x"): span_list})
    start, count = hunk
    small = attribute_hunks_to_functions([DiffHunk("F.x", start, count)], table, "k")
    new_start = max(1, start - grow_left)
    lo, hi = start, start + max(count, 1) - 1
    bigger = DiffHunk("F.x", new_start, (hi - new_start + 1) + grow_right)
    assert bigger.new_range[0] <= lo and bigger.new_range[1] >= hi
    assert small <= attribute_hunks_to_functions([bigger], table, "k")


_paths = st.sampled_from(["a.x", "src/b.x", "lib/c d.x"])
_commits = st.lists(
    st.builds(
        ParsedCommit,
        st.text("0123456789abcdef", min_size=4, max_size=10),
        st.integers(0, 2**31),
        st.lists(
            st.builds(DiffHunk, _paths, st.integers(1, 500), st.integers(0, 6)), max_size=5
        ).map(tuple),
    ),
    max_size=4,
    unique_by=lambda c: c.id,
)


@given(_commits)
def test_render_then_parse_is_identity(commits):
    assert parse_git_log_stream(render_git_log(commits)) == commits
