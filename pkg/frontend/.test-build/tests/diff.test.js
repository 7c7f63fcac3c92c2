import { describe, it } from "node:test";
import assert from "node:assert/strict";
import { diffStats, parseDiffLines } from "../src/diff.js";
const SAMPLE = [
    "diff --git a/net/core/dev.c b/net/core/dev.c",
    "index 1a2b3c4..5d6e7f8 100644",
    "--- a/net/core/dev.c",
    "+++ b/net/core/dev.c",
    "@@ -10,6 +10,7 @@ static int ptr_guard(struct sk_buff *skb)",
    " \tif (!skb)",
    "-\t\treturn 0;",
    "+\t\treturn -EINVAL;",
    "+\tskb_checksum(skb);",
    " \treturn ok;",
    "",
    " }",
    "\\ No newline at end of file",
].join("\n") + "\n";
describe("parseDiffLines", () => {
    it("classifies every line of a unified diff", () => {
        const kinds = parseDiffLines(SAMPLE).map((l) => l.kind);
        assert.deepEqual(kinds, [
            "file",
            "meta", // index
            "meta", // --- header
            "meta", // +++ header
            "hunk",
            "context",
            "removed",
            "added",
            "added",
            "context",
            "context", // empty line inside the hunk
            "context",
            "meta", // \ No newline marker
        ]);
    });
    it("keeps the original text of each line", () => {
        const lines = parseDiffLines(SAMPLE);
        assert.equal(lines[0].text, "diff --git a/net/core/dev.c b/net/core/dev.c");
        assert.equal(lines[7].text, "+\t\treturn -EINVAL;");
    });
    it("file header markers win over the one-character +/- checks", () => {
        const lines = parseDiffLines("--- a/f\n+++ b/f\n-old\n+new\n");
        assert.deepEqual(lines.map((l) => l.kind), ["meta", "meta", "removed", "added"]);
    });
    it("drops only the framing newline, not an empty diff line", () => {
        // "a\n" is one line; "a\n\n" is a line plus an empty line
        assert.equal(parseDiffLines(" a\n").length, 1);
        const withEmpty = parseDiffLines(" a\n\n");
        assert.equal(withEmpty.length, 2);
        assert.deepEqual(withEmpty[1], { kind: "context", text: "" });
    });
    it("returns no lines for empty input", () => {
        assert.deepEqual(parseDiffLines(""), []);
    });
    it("marks binary and mode changes as metadata", () => {
        const text = [
            "diff --git a/logo.png b/logo.png",
            "old mode 100644",
            "new mode 100755",
            "Binary files a/logo.png and b/logo.png differ",
        ].join("\n");
        assert.deepEqual(parseDiffLines(text).map((l) => l.kind), ["file", "meta", "meta", "meta"]);
    });
    it("marks rename and copy headers as metadata", () => {
        const text = [
            "similarity index 97%",
            "rename from fs/old.c",
            "rename to fs/new.c",
            "copy from a.c",
            "copy to b.c",
            "dissimilarity index 40%",
        ].join("\n");
        assert.ok(parseDiffLines(text).every((l) => l.kind === "meta"));
    });
    it("treats hunk headers with trailing context as hunks", () => {
        assert.equal(parseDiffLines("@@ -1,3 +1,4 @@ int main(void)")[0].kind, "hunk");
    });
});
describe("diffStats", () => {
    it("counts only payload additions and removals", () => {
        const stats = diffStats(parseDiffLines(SAMPLE));
        assert.deepEqual(stats, { added: 2, removed: 1 });
    });
    it("is zero for metadata-only text", () => {
        const stats = diffStats(parseDiffLines("--- a/f\n+++ b/f\n"));
        assert.deepEqual(stats, { added: 0, removed: 0 });
    });
    it("is zero for no lines", () => {
        assert.deepEqual(diffStats([]), { added: 0, removed: 0 });
    });
});
