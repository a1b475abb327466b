/** Wire types, mirroring the monitor's JSON payloads verbatim. */

export interface SessionInfo {
  session: string;
  subject: string;
  role: string;
}

export interface DocumentSummary {
  id: string;
  atoms: number;
  forbidden_functions: string[];
}

export type SegmentKind = "content" | "redacted" | "blurred-image";

export interface ViewSegment {
  atom: string;
  kind: SegmentKind;
  atom_kind: "text" | "image-ref";
  text: string;
}

export interface ViewPayload {
  outcome: string;
  kind: string;
  document: string;
  segments: ViewSegment[];
}

export interface FunctionEntry {
  function: string;
  entry: string; // "TRUE" | "FALSE" | "TRUE_RE:<pattern>" | "TRUE_PROG:<name>"
}

export interface FunctionListPayload {
  kind: string;
  subject: string;
  object: string;
  entries: FunctionEntry[];
}

export interface InvokeRequest {
  function: string;
  args: string[];
  options?: Record<string, string | null>;
  stdin?: string;
}

export interface InvokeResponse {
  outcome: "allow" | "deny" | "n/a";
  audit_sequence: number;
  result: Record<string, unknown>;
}

export interface AuditRecord {
  sequence: number;
  timestamp: number;
  subject: string;
  function: string;
  objects: string[];
  options_digest: string;
  outcome: string;
  output_size: number;
}

export interface AuditPayload {
  records: AuditRecord[];
}
