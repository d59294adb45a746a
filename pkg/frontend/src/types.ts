/** Payload types mirroring the service API (docs/api.md). */

export type QueryKind = "TIR" | "CIR" | "ChatIR";

export interface RankedEntry {
  image_id: string;
  stage1_score: number;
  stage1_rank: number;
  stage2_count: number | null;
  stage3_flag: boolean | null;
}

export interface AtomicInstruction {
  kind: "Addition" | "Removal" | "Modification" | "Comparison" | "Retention";
  text: string;
}

export interface TargetDescriptions {
  core_elements: string;
  enhanced_details: string;
  comprehensive_synthesis: string;
}

export interface Proposition {
  statement: string;
  question: string;
  truth_value: boolean;
}

export interface EvaluatorVerdict {
  image_id: string;
  accepted: boolean;
  justification: string;
}

export interface StageTrace {
  atomic_instructions: AtomicInstruction[];
  descriptions: TargetDescriptions | null;
  propositions: Proposition[];
  evaluator_verdicts: EvaluatorVerdict[];
  notes: string[];
}

export interface VerificationMatrix {
  candidate_ids: string[];
  propositions: Proposition[];
  answers: ("Yes" | "No" | "Ambiguous")[][];
  counts: number[];
  failed_ids: string[];
}

export interface QueryResponse {
  session_id: string;
  round: number;
  instruction: string;
  ref_desc: string;
  stage: "Stage1" | "Stage2" | "Stage3";
  ranking: RankedEntry[];
  trace: StageTrace;
  verification?: VerificationMatrix;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  stage?: string;
}

export interface SessionInfo {
  session_id: string;
  kind: QueryKind;
}
