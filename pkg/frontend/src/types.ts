/**
 * Wire-format schemas for everything the server sends. The UI is a pure
 * client: it validates payloads against these schemas and renders them,
 * computing no verdicts or scores of its own.
 */

import { z } from "zod";

export const STAGES = [
  "query_generation",
  "retrieval",
  "summarization",
  "generation",
  "claim_splitting",
  "verification",
  "refinement",
] as const;

export type StageName = (typeof STAGES)[number];

export const PassageSchema = z.object({
  id: z.string(),
  title: z.string(),
  body: z.string(),
  date: z.string().nullable(),
  score: z.number(),
  rank: z.number().int(),
});

export const BulletSchema = z.object({
  text: z.string(),
  origin: z.enum(["retrieval_summary", "verified_llm_claim"]),
  provenance: z.array(z.string()),
});

export const ClaimSchema = z.object({
  text: z.string(),
  time: z.union([z.string(), z.number()]),
  source_turn: z.number().int(),
});

export const VerdictSchema = z.object({
  label: z.enum(["SUPPORTS", "REFUTES", "NOT_ENOUGH_INFO"]),
  reasoning: z.string(),
  evidence: z.array(PassageSchema),
});

export const FeedbackSchema = z.object({
  relevant: z.number().int(),
  conversational: z.number().int(),
  non_repetitive: z.number().int(),
  temporally_correct: z.number().int(),
  rationales: z.record(z.string(), z.string()),
});

export const StageOutcomeSchema = z.object({
  stage: z.enum(STAGES),
  raw_completion: z.string().nullable(),
  parsed_ok: z.boolean(),
  fallback_used: z.boolean(),
  skipped: z.boolean(),
});

export const TraceSchema = z.object({
  search_decision: z
    .object({ query: z.string(), time: z.union([z.string(), z.number()]) })
    .nullable(),
  retrieved: z.array(PassageSchema),
  reranked: z.array(PassageSchema),
  summary_bullets: z.array(BulletSchema),
  llm_response: z.string(),
  claims: z.array(z.object({ claim: ClaimSchema, verdict: VerdictSchema })),
  bullets_final: z.array(BulletSchema),
  draft: z.string(),
  feedback: FeedbackSchema.nullable(),
  final: z.string(),
  timings: z.record(z.string(), z.number()),
  stages: z.array(StageOutcomeSchema),
});

export const MessageResponseSchema = z.object({
  turn_index: z.number().int(),
  final: z.string(),
  trace: TraceSchema,
});

export const SessionResponseSchema = z.object({ session_id: z.string() });

export type Passage = z.infer<typeof PassageSchema>;
export type Bullet = z.infer<typeof BulletSchema>;
export type Verdict = z.infer<typeof VerdictSchema>;
export type Feedback = z.infer<typeof FeedbackSchema>;
export type StageOutcome = z.infer<typeof StageOutcomeSchema>;
export type Trace = z.infer<typeof TraceSchema>;

/** One rendered exchange; the trace is absent until fetched (or when the
 * server produced none). */
export interface ViewTurn {
  user: string;
  agent: string;
  turnIndex: number | null;
  trace: Trace | null;
}
