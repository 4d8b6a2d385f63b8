/** Word-level diff between the draft and the refined response. */

export type SpanKind = "equal" | "removed" | "added";

export interface DiffSpan {
  kind: SpanKind;
  text: string;
}

function tokens(text: string): string[] {
  return text.match(/\S+\s*/g) ?? [];
}

/** Longest-common-subsequence diff over whitespace-delimited words, with
 * adjacent same-kind spans merged. */
export function diffWords(before: string, after: string): DiffSpan[] {
  const a = tokens(before);
  const b = tokens(after);
  const n = a.length;
  const m = b.length;
  const lcs: number[][] = Array.from({ length: n + 1 }, () => new Array(m + 1).fill(0));
  for (let i = n - 1; i >= 0; i--) {
    for (let j = m - 1; j >= 0; j--) {
      lcs[i]![j] =
        a[i]!.trim() === b[j]!.trim()
          ? lcs[i + 1]![j + 1]! + 1
          : Math.max(lcs[i + 1]![j]!, lcs[i]![j + 1]!);
    }
  }
  const spans: DiffSpan[] = [];
  const push = (kind: SpanKind, text: string) => {
    const last = spans[spans.length - 1];
    if (last && last.kind === kind) last.text += text;
    else spans.push({ kind, text });
  };
  let i = 0;
  let j = 0;
  while (i < n && j < m) {
    if (a[i]!.trim() === b[j]!.trim()) {
      push("equal", b[j]!);
      i++;
      j++;
    } else if (lcs[i + 1]![j]! >= lcs[i]![j + 1]!) {
      push("removed", a[i]!);
      i++;
    } else {
      push("added", b[j]!);
      j++;
    }
  }
  while (i < n) push("removed", a[i++]!);
  while (j < m) push("added", b[j++]!);
  return spans;
}
