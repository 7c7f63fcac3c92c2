/** Classify unified-diff text into display lines. */

export type DiffLineKind = "file" | "hunk" | "added" | "removed" | "context" | "meta";

export interface DiffLine {
  kind: DiffLineKind;
  text: string;
}

// Extended-header and marker prefixes that carry no +/- payload.
const META_PREFIXES = [
  "+++",
  "---",
  "index ",
  "old mode",
  "new mode",
  "new file mode",
  "deleted file mode",
  "similarity index",
  "dissimilarity index",
  "rename from",
  "rename to",
  "copy from",
  "copy to",
  "Binary files ",
  "GIT binary patch",
  "\\ No newline",
];

function classify(line: string): DiffLineKind {
  if (line.startsWith("diff --git ")) return "file";
  if (line.startsWith("@@")) return "hunk";
  // +++/--- must win over the one-character +/- checks
  for (const prefix of META_PREFIXES) {
    if (line.startsWith(prefix)) return "meta";
  }
  if (line.startsWith("+")) return "added";
  if (line.startsWith("-")) return "removed";
  // a fully empty line inside a hunk is an empty context line
  return "context";
}

export function parseDiffLines(diff: string): DiffLine[] {
  if (diff === "") return [];
  const lines = diff.split("\n");
  if (lines.length && lines[lines.length - 1] === "") {
    lines.pop(); // final newline frames the text, it is not a line
  }
  return lines.map((text) => ({ kind: classify(text), text }));
}

export function diffStats(lines: DiffLine[]): { added: number; removed: number } {
  let added = 0;
  let removed = 0;
  for (const line of lines) {
    if (line.kind === "added") added += 1;
    else if (line.kind === "removed") removed += 1;
  }
  return { added, removed };
}
