// Node bindings for the corpuskit CLI: tokenizer encode/decode/train-time
// evaluation (tokens per word) and filter-pipeline execution for ML
// workflows. Every operation shells out to the primary command-line tool,
// so behavior is identical to the primary component by construction and
// no logic lives here.

import { spawnSync } from "node:child_process";
import { existsSync } from "node:fs";

// Override with e.g. CORPUSKIT_CLI="python3 -m corpuskit" or a path to the
// installed `corpuskit` entry point.
const cliCommand: string[] = process.env.CORPUSKIT_CLI
  ? process.env.CORPUSKIT_CLI.split(" ")
  : ["python3", "-m", "corpuskit"];

/** Error raised by the primary component, with its error name preserved. */
export class CorpusKitError extends Error {
  constructor(name: string, message: string) {
    super(message);
    this.name = name;
  }
}

const ERROR_LINE = /ERROR corpuskit: (\w+): ([\s\S]*?)$/m;

function run(args: string[], input?: string): string {
  const result = spawnSync(cliCommand[0]!, [...cliCommand.slice(1), ...args], {
    input,
    encoding: "utf-8",
    maxBuffer: 1 << 28,
  });
  if (result.error) {
    throw result.error;
  }
  if (result.status !== 0) {
    const match = ERROR_LINE.exec(result.stderr ?? "");
    if (match) {
      throw new CorpusKitError(match[1]!, match[2]!.trim());
    }
    throw new CorpusKitError("CommandFailed", result.stderr?.trim() || `exit ${result.status}`);
  }
  return result.stdout;
}

export type TpwReport = {
  corpus_id: string;
  total_words: number;
  total_tokens: number;
  tpw: number;
  per_source: Record<string, { words: number; tokens: number; tpw: number }>;
};

export type FilterReport = {
  input_count: number;
  pass_count: number;
  rejections: Record<string, number>;
  histograms: Record<string, { min: number; max: number; counts: number[]; null_count: number }>;
  skipped_records: number;
  elapsed_seconds: number;
};

/**
 * A loaded tokenizer model (plain or merged). The handle stays valid
 * until close(); all operations match the primary CLI bit for bit.
 */
export class BoundTokenizer {
  readonly modelPath: string;
  readonly basePath?: string;
  private closed = false;

  constructor(modelPath: string, basePath?: string) {
    if (!existsSync(modelPath)) {
      throw new CorpusKitError("FileNotFoundError", `no such model file: ${modelPath}`);
    }
    if (basePath !== undefined && !existsSync(basePath)) {
      throw new CorpusKitError("FileNotFoundError", `no such base model file: ${basePath}`);
    }
    this.modelPath = modelPath;
    this.basePath = basePath;
    // eager validation so a corrupt model fails at load, not first use
    this.encode("");
  }

  private modelArgs(): string[] {
    const args = ["--model", this.modelPath];
    if (this.basePath !== undefined) {
      args.push("--base", this.basePath);
    }
    return args;
  }

  private ensureOpen(): void {
    if (this.closed) {
      throw new CorpusKitError("ClosedHandle", "tokenizer handle has been closed");
    }
  }

  encode(text: string): number[] {
    this.ensureOpen();
    return this.encodeBatch([text])[0]!;
  }

  /** Encode many strings in one CLI invocation. */
  encodeBatch(texts: string[]): number[][] {
    this.ensureOpen();
    if (texts.length === 0) return [];
    const input = texts.map((t) => JSON.stringify(t)).join("\n") + "\n";
    const out = run(["tok-encode", ...this.modelArgs(), "--stdin-lines"], input);
    return out
      .split("\n")
      .filter((line) => line.length > 0)
      .map((line) => JSON.parse(line) as number[]);
  }

  decode(ids: number[]): string {
    this.ensureOpen();
    return this.decodeBatch([ids])[0]!;
  }

  decodeBatch(ids: number[][]): string[] {
    this.ensureOpen();
    if (ids.length === 0) return [];
    const input = ids.map((row) => JSON.stringify(row)).join("\n") + "\n";
    const out = run(["tok-decode", ...this.modelArgs(), "--stdin-lines"], input);
    return out
      .split("\n")
      .filter((line) => line.length > 0)
      .map((line) => JSON.parse(line) as string);
  }

  /** Average tokens per whitespace word over a JSONL corpus. */
  tpw(corpusPath: string): number {
    return this.tpwReport(corpusPath).tpw;
  }

  tpwReport(corpusPath: string): TpwReport {
    this.ensureOpen();
    const out = run(["tok-eval", ...this.modelArgs(), "--corpus", corpusPath]);
    return JSON.parse(out) as TpwReport;
  }

  close(): void {
    this.closed = true;
  }
}

export function loadTokenizer(modelPath: string, basePath?: string): BoundTokenizer {
  return new BoundTokenizer(modelPath, basePath);
}

/** Run the quality-rule filter pipeline; returns the primary's report. */
export function runFilter(
  configPath: string,
  inputPath: string,
  outputPath: string,
  options: { rejectedPath?: string; threads?: number } = {},
): FilterReport {
  const args = ["filter", "--config", configPath, "--input", inputPath, "--output", outputPath];
  if (options.rejectedPath) {
    args.push("--rejected", options.rejectedPath);
  }
  const prefix = options.threads ? ["--threads", String(options.threads)] : [];
  const out = run([...prefix, ...args]);
  return JSON.parse(out) as FilterReport;
}

export function cliCommandLine(): string[] {
  return [...cliCommand];
}
