"""Parser tests: agreement with git's own accounting on generated
histories, both input shapes, malformed-input errors, and codecs."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptracer.errors import MalformedHeader, MalformedHunk
from ptracer.patch import (
    ChangeKind,
    Hunk,
    LineTag,
    changed_paths,
    parse_patch,
    patch_from_dict,
    patch_to_dict,
    render_diff,
    render_template,
)

from conftest import make_patch


def _counts_by_paths(patch):
    """{(old, new): (added, removed)} over parsed file changes."""
    return {
        (fc.old_path, fc.new_path): (fc.added_count(), fc.removed_count())
        for fc in patch.files
    }


def _numstat_by_paths(entries):
    return {(old, new): (a, r) for a, r, old, new in entries}


class TestAgainstGit:
    def test_counts_and_paths_match_numstat(self, oracle_repo):
        shas = oracle_repo.rev_list()
        assert len(shas) >= 100
        for sha in shas:
            patch = parse_patch(oracle_repo.show_template(sha))
            assert patch.commit.sha == sha
            want = _numstat_by_paths(oracle_repo.numstat(sha))
            got = _counts_by_paths(patch)
            assert set(got) == set(want), sha
            for key, (a, r) in want.items():
                if a is None:  # binary: git reports no line counts
                    assert got[key] == (0, 0), (sha, key)
                    fc = next(f for f in patch.files if (f.old_path, f.new_path) == key)
                    assert fc.hunks == ()
                else:
                    assert got[key] == (a, r), (sha, key)

    def test_mail_form_agrees_with_template_form(self, oracle_repo):
        for sha in oracle_repo.rev_list()[::5]:
            tmpl = parse_patch(oracle_repo.show_template(sha))
            if not tmpl.files:
                continue  # format-patch skips empty commits
            mail = parse_patch(oracle_repo.format_patch(sha))
            assert mail.commit.sha == tmpl.commit.sha
            assert mail.commit.subject == tmpl.commit.subject
            assert mail.commit.author_name == tmpl.commit.author_name
            assert mail.commit.author_email == tmpl.commit.author_email
            assert mail.commit.author_date == tmpl.commit.author_date
            assert _counts_by_paths(mail) == _counts_by_paths(tmpl)

    def test_metadata_fields_exact(self, repo):
        sha = repo.commit(
            "Fix sample overflow",
            body="Two line body.\nSecond line.",
            author="Jane Dev",
            email="jane@example.org",
            date=1_549_100_000,
            write={"drivers/net/a.c": "int a;\n"},
        )
        p = parse_patch(repo.show_template(sha))
        assert p.commit.sha == sha
        assert p.commit.author_name == "Jane Dev"
        assert p.commit.author_email == "jane@example.org"
        assert p.commit.author_date == 1_549_100_000
        assert p.commit.subject == "Fix sample overflow"
        assert p.commit.body == "Two line body.\nSecond line."
        assert p.commit.message == "Fix sample overflow\nTwo line body.\nSecond line."

    def test_mail_subject_tag_stripped(self, repo):
        sha = repo.commit("Fix rx stall", write={"drivers/net/a.c": "int a;\n"})
        p = parse_patch(repo.format_patch(sha))
        assert p.commit.subject == "Fix rx stall"

    def test_body_quoting_record_markers_survives(self, repo):
        # Bodies that quote the framing text must not truncate parsing.
        body = "Quoting the marker:\nbody-end\nis fine mid-body."
        sha = repo.commit("Document framing", body=body,
                          write={"docs/frame.txt": "x\n"})
        p = parse_patch(repo.show_template(sha))
        assert p.commit.body == body

    def test_rename_kind_and_paths(self, repo):
        repo.commit("Seed", write={"drivers/old.c": "int a;\nint b;\n"})
        sha = repo.commit("Move file", rename=[("drivers/old.c", "drivers/new.c")])
        p = parse_patch(repo.show_template(sha))
        (fc,) = p.files
        assert fc.kind is ChangeKind.RENAME
        assert fc.old_path == "drivers/old.c"
        assert fc.new_path == "drivers/new.c"
        assert changed_paths(p) == {"drivers/old.c", "drivers/new.c"}

    def test_add_and_delete_kinds(self, repo):
        sha_add = repo.commit("Add file", write={"fs/new.c": "one\ntwo\n"})
        p = parse_patch(repo.show_template(sha_add))
        (fc,) = p.files
        assert fc.kind is ChangeKind.ADD
        assert fc.old_path == fc.new_path == "fs/new.c"
        assert fc.added_count() == 2 and fc.removed_count() == 0

        sha_del = repo.commit("Drop file", delete=["fs/new.c"])
        p = parse_patch(repo.show_template(sha_del))
        (fc,) = p.files
        assert fc.kind is ChangeKind.DELETE
        assert fc.old_path == fc.new_path == "fs/new.c"
        assert fc.added_count() == 0 and fc.removed_count() == 2
        assert changed_paths(p) == {"fs/new.c"}

    def test_message_only_commit_has_no_files(self, repo):
        sha = repo.commit("Release note", body="No tree change.", allow_empty=True)
        p = parse_patch(repo.show_template(sha))
        assert p.files == ()
        assert changed_paths(p) == set()

    def test_no_trailing_newline_marker_handled(self, repo):
        repo.commit("Seed", write={"a.txt": "line\n"})
        sha = repo.commit("Trim newline", write={"a.txt": "line\nno newline tail"})
        p = parse_patch(repo.show_template(sha))
        (fc,) = p.files
        assert fc.added_count() == 1

    def test_unicode_and_space_paths(self, repo):
        sha = repo.commit("Odd paths", write={
            "docs/read me.txt": "hi\n",
            "drivers/net/übertreiber.c": "int x;\n",
        })
        p = parse_patch(repo.show_template(sha))
        assert changed_paths(p) == {"docs/read me.txt", "drivers/net/übertreiber.c"}


class TestMalformed:
    def test_empty_input(self):
        with pytest.raises(MalformedHeader) as exc:
            parse_patch("   \n  \n")
        assert exc.value.code == "malformed_header"
        assert exc.value.line == 1

    def test_garbage_first_line(self):
        with pytest.raises(MalformedHeader) as exc:
            parse_patch("not a commit header\nmore text\n")
        assert "no commit sha" in exc.value.detail
        assert "(line 1)" in exc.value.detail

    def test_bad_date_field(self):
        text = "commit " + "a" * 40 + "\nauthor X\nemail x@y\ndate notanumber\n"
        with pytest.raises(MalformedHeader) as exc:
            parse_patch(text)
        assert exc.value.line == 4

    def test_missing_body_markers(self):
        text = "commit " + "a" * 40 + "\nauthor X\nemail x@y\ndate 5\nsubject s\n"
        with pytest.raises(MalformedHeader):
            parse_patch(text)

    def _with_diff(self, diff_lines):
        head = (
            "commit " + "a" * 40 + "\nauthor X\nemail x@y\ndate 5\nsubject s\n"
            "body-begin\nbody\n\nbody-end\n\n"
        )
        return head + "\n".join(diff_lines) + "\n"

    def test_hunk_truncated(self):
        text = self._with_diff([
            "diff --git a/f.c b/f.c",
            "--- a/f.c",
            "+++ b/f.c",
            "@@ -1,2 +1,2 @@",
            " only one line",
        ])
        with pytest.raises(MalformedHunk) as exc:
            parse_patch(text)
        assert "truncated" in exc.value.detail
        assert exc.value.line > 0

    def test_hunk_overruns_declared_counts(self):
        text = self._with_diff([
            "diff --git a/f.c b/f.c",
            "--- a/f.c",
            "+++ b/f.c",
            "@@ -1,1 +1,1 @@",
            "+first",
            "+second, beyond the declared one",
            "-old",
        ])
        with pytest.raises(MalformedHunk) as exc:
            parse_patch(text)
        assert exc.value.code == "malformed_hunk"

    def test_junk_inside_hunk(self):
        text = self._with_diff([
            "diff --git a/f.c b/f.c",
            "--- a/f.c",
            "+++ b/f.c",
            "@@ -1,2 +1,1 @@",
            "-gone",
            "*** not a diff line",
        ])
        with pytest.raises(MalformedHunk) as exc:
            parse_patch(text)
        assert "unexpected line" in exc.value.detail


class TestRoundTrips:
    def test_parse_render_parse_is_identity(self, oracle_repo):
        for sha in oracle_repo.rev_list()[::7]:
            p1 = parse_patch(oracle_repo.show_template(sha))
            p2 = parse_patch(render_template(p1))
            assert p2 == p1

    def test_dict_codec_round_trip(self, oracle_repo):
        for sha in oracle_repo.rev_list()[::9]:
            p = parse_patch(oracle_repo.show_template(sha))
            assert patch_from_dict(patch_to_dict(p)) == p

    def test_dict_codec_is_json_safe(self, oracle_repo):
        import json

        sha = oracle_repo.rev_list()[0]
        p = parse_patch(oracle_repo.show_template(sha))
        blob = json.dumps(patch_to_dict(p), ensure_ascii=True)
        assert patch_from_dict(json.loads(blob)) == p

    def test_render_diff_empty_for_message_only(self):
        p = make_patch(files=[])
        assert render_diff(p) == ""


# Hunk payload lines: any text that is not itself a diff control line.
_line_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\n\r"),
    max_size=30,
)
_tags = st.sampled_from([LineTag.CONTEXT, LineTag.ADDED, LineTag.REMOVED])


class TestHunkProperties:
    @given(st.lists(st.tuples(_tags, _line_text), min_size=1, max_size=40))
    @settings(max_examples=200, deadline=None)
    def test_from_lines_counts_always_consistent(self, lines):
        h = Hunk.from_lines(1, 1, lines)
        assert h.counts_consistent()
        assert h.old_count == sum(1 for t, _ in lines if t is not LineTag.ADDED)
        assert h.new_count == sum(1 for t, _ in lines if t is not LineTag.REMOVED)

    @given(st.lists(st.tuples(_tags, _line_text), min_size=1, max_size=25))
    @settings(max_examples=200, deadline=None)
    def test_rendered_hunks_reparse_identically(self, lines):
        from ptracer.patch import FileChange, Patch

        hunk = Hunk.from_lines(3, 3, lines)
        fc = FileChange("drivers/x.c", "drivers/x.c", ChangeKind.MODIFY, (hunk,))
        base = make_patch(files=[])
        p = Patch(commit=base.commit, files=(fc,))
        assert parse_patch(render_template(p)) == p

    def test_counts_consistent_rejects_wrong_header(self):
        h = Hunk(1, 5, 1, 1, ((LineTag.CONTEXT, "x"),))
        assert not h.counts_consistent()
