/**
 * Newline-delimited JSON request handling, one object per line.
 *
 * Requests:
 *   {"history": [ids], "session"?, "vocab_size"?}  -> {"weights", "fingerprint"}
 *   {"tokenize": "text"}                           -> {"tokens"}
 *   {"detokenize": [ids]}                          -> {"text"}
 *   {"quantize": [reals]}                          -> {"weights"}  (conformance)
 *   {"info": true}                                 -> {"vocab_size", "fingerprint", "context"}
 *
 * Every failure is a distinct error object: {"error": {"code", "message"}}.
 */

import { TrigramModel } from "./model.js";
import { quantize } from "./quantize.js";

export type Json = Record<string, unknown>;

function err(code: string, message: string): Json {
  return { error: { code, message } };
}

export function describe(model: TrigramModel): Json {
  return {
    vocab_size: model.vocabSize,
    fingerprint: model.fingerprint,
    context: 2,
  };
}

export function handleRequest(model: TrigramModel, line: string): Json {
  let req: unknown;
  try {
    req = JSON.parse(line);
  } catch (e) {
    return err("malformed", `request is not valid JSON: ${(e as Error).message}`);
  }
  if (typeof req !== "object" || req === null || Array.isArray(req)) {
    return err("malformed", "request must be a JSON object");
  }
  const r = req as Json;

  if (r.info) {
    return describe(model);
  }

  if ("quantize" in r) {
    if (!Array.isArray(r.quantize) || r.quantize.some((x) => typeof x !== "number")) {
      return err("malformed", "quantize must be an array of numbers");
    }
    try {
      return { weights: quantize(r.quantize as number[]).map(Number) };
    } catch (e) {
      return err("invalid-distribution", (e as Error).message);
    }
  }

  if ("tokenize" in r) {
    if (typeof r.tokenize !== "string") {
      return err("malformed", "tokenize must be a string");
    }
    try {
      return { tokens: model.tokenize(r.tokenize) };
    } catch (e) {
      return err("unknown-character", (e as Error).message);
    }
  }

  if ("detokenize" in r) {
    if (!Array.isArray(r.detokenize)) {
      return err("malformed", "detokenize must be an array of token ids");
    }
    try {
      return { text: model.detokenize(r.detokenize as number[]) };
    } catch (e) {
      return err("invalid-token", (e as Error).message);
    }
  }

  if ("history" in r) {
    if (!Array.isArray(r.history)) {
      return err("malformed", "history must be an array of token ids");
    }
    if ("vocab_size" in r && r.vocab_size !== model.vocabSize) {
      return err(
        "vocab-mismatch",
        `client expects ${r.vocab_size} tokens, model has ${model.vocabSize}`,
      );
    }
    try {
      return {
        weights: model.nextWeights(r.history as number[]),
        fingerprint: model.fingerprint,
      };
    } catch (e) {
      if (e instanceof RangeError && e.message.includes("context")) {
        return err("context-overflow", e.message);
      }
      return err("invalid-token", (e as Error).message);
    }
  }

  return err("malformed", "request names no known operation");
}
