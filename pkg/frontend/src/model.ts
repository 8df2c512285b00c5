/**
 * Character-level trigram language model over the bundled corpus.
 *
 * Everything is integer-valued and order-deterministic: conditional
 * weights are smoothed counts (count * 16 + 1) pushed through the exact
 * grid quantizer, so identical requests yield bit-identical responses on
 * any platform.  The context window is two characters; histories beyond
 * MAX_HISTORY are rejected rather than truncated.
 */

import { createHash } from "node:crypto";
import { CORPUS } from "./corpus.js";
import { GRID, quantizeInts } from "./quantize.js";

export const MAX_HISTORY = 4096;
const SMOOTH_SCALE = 16n;

function normalize(text: string): string {
  return text.replace(/\s+/g, " ").trim();
}

export class TrigramModel {
  readonly chars: string[];
  readonly vocabSize: number;
  readonly fingerprint: string;
  private readonly charToId: Map<string, number>;
  private readonly unigram: bigint[];
  private readonly bigram: Map<number, bigint[]>;
  private readonly trigram: Map<number, bigint[]>;
  private readonly cache: Map<string, number[]>;

  constructor(text: string = CORPUS) {
    const corpus = normalize(text);
    this.chars = [...new Set(corpus)].sort();
    this.vocabSize = this.chars.length;
    this.charToId = new Map(this.chars.map((c, i) => [c, i]));

    const ids = [...corpus].map((c) => this.charToId.get(c)!);
    const v = this.vocabSize;
    this.unigram = new Array(v).fill(0n);
    this.bigram = new Map();
    this.trigram = new Map();
    for (let i = 0; i < ids.length; i++) {
      this.unigram[ids[i]] += 1n;
      if (i >= 1) {
        const key = ids[i - 1];
        let row = this.bigram.get(key);
        if (!row) this.bigram.set(key, (row = new Array(v).fill(0n)));
        row[ids[i]] += 1n;
      }
      if (i >= 2) {
        const key = ids[i - 2] * v + ids[i - 1];
        let row = this.trigram.get(key);
        if (!row) this.trigram.set(key, (row = new Array(v).fill(0n)));
        row[ids[i]] += 1n;
      }
    }
    this.cache = new Map();
    this.fingerprint = createHash("sha256")
      .update("char-trigram-v1|smooth=x16+1|")
      .update(String(v))
      .update("|")
      .update(createHash("sha256").update(corpus).digest("hex"))
      .digest("hex");
  }

  private smoothed(counts: bigint[] | undefined): bigint[] {
    const out = new Array<bigint>(this.vocabSize);
    for (let i = 0; i < this.vocabSize; i++) {
      out[i] = (counts ? counts[i] : 0n) * SMOOTH_SCALE + 1n;
    }
    return out;
  }

  /** Quantized next-character weights for a token-id history. */
  nextWeights(history: number[]): number[] {
    if (history.length > MAX_HISTORY) {
      throw new RangeError(
        `history of ${history.length} exceeds the model context of ${MAX_HISTORY}`,
      );
    }
    for (const t of history) {
      if (!Number.isInteger(t) || t < 0 || t >= this.vocabSize) {
        throw new RangeError(`token id ${t} outside vocabulary`);
      }
    }
    const n = history.length;
    let cacheKey: string;
    let counts: bigint[] | undefined;
    if (n >= 2) {
      const key = history[n - 2] * this.vocabSize + history[n - 1];
      counts = this.trigram.get(key);
      if (!counts) counts = this.bigram.get(history[n - 1]);
      cacheKey = `2:${history[n - 2]},${history[n - 1]}`;
    } else if (n === 1) {
      counts = this.bigram.get(history[0]);
      cacheKey = `1:${history[0]}`;
    } else {
      counts = this.unigram;
      cacheKey = "0";
    }
    const hit = this.cache.get(cacheKey);
    if (hit) return hit;
    const weights = quantizeInts(this.smoothed(counts)).map(Number);
    this.cache.set(cacheKey, weights);
    return weights;
  }

  tokenize(text: string): number[] {
    return [...normalize(text)].map((c) => {
      const id = this.charToId.get(c);
      if (id === undefined) throw new RangeError(`character ${JSON.stringify(c)} not in vocabulary`);
      return id;
    });
  }

  detokenize(tokens: number[]): string {
    return tokens
      .map((t) => {
        if (!Number.isInteger(t) || t < 0 || t >= this.vocabSize) {
          throw new RangeError(`token id ${t} outside vocabulary`);
        }
        return this.chars[t];
      })
      .join("");
  }
}

export const GRID_SUM = GRID;
