export interface RealizationOption {
  label: string;
  probability: number;
}

export interface CandidateRow {
  observable: string;
  cost: number;
  voi: number;
  expected_utility: number;
  affordable: boolean;
  realizations: RealizationOption[];
}

export interface HistoryEntry {
  observable: string;
  realization: string;
  cost: number;
}

export interface BudgetInfo {
  initial: number;
  remaining: number;
  spent: number;
}

export interface SessionState {
  id: string;
  query: string;
  posterior: number;
  utility: number;
  entropy: number;
  budget: BudgetInfo;
  history: HistoryEntry[];
  candidates: CandidateRow[];
  recommendation: string | null;
  leaf_reason: string | null;
}

export interface ApiErrorBody {
  error: number;
  detail: string;
}

export interface PlanNodeJson {
  evidence: [string, boolean][];
  budget: number;
  utility: number;
  reach: number;
  choice: string | null;
  leaf_reason: string | null;
  children: Record<string, PlanNodeJson>;
}

export interface PlanJson {
  query: string;
  utility: { kind: string };
  budget: number;
  root: PlanNodeJson;
}

/** Everything the console shows; numbers come from the server untouched. */
export interface SessionView {
  state: SessionState | null;
  error: ApiErrorBody | null;
  busy: boolean;
}
