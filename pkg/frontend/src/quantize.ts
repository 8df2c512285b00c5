/**
 * Exact quantization of a non-negative real vector onto the 2^32 integer
 * grid, matching the codec's rule bit-for-bit:
 *
 *   floor each raw_i * 2^32 / sum(raw), then hand the remaining grid units
 *   out one per token - zero-weight tokens with positive raw mass first,
 *   then by largest fractional remainder, ties to the smaller token id.
 *
 * All arithmetic is exact: every JS number is decomposed into its IEEE-754
 * integer-times-power-of-two form, so floats are treated as the rationals
 * they are.
 */

export const GRID = 1n << 32n;

const F64 = new DataView(new ArrayBuffer(8));

/** Decompose a finite non-negative double into value = num * 2^-shift. */
function decompose(x: number): { num: bigint; shift: number } {
  if (!Number.isFinite(x)) throw new Error(`not finite: ${x}`);
  if (x < 0) throw new Error(`negative probability mass: ${x}`);
  if (x === 0) return { num: 0n, shift: 0 };
  F64.setFloat64(0, x);
  const hi = F64.getUint32(0);
  const lo = F64.getUint32(4);
  const expBits = (hi >>> 20) & 0x7ff;
  const mantissa = (BigInt(hi & 0xfffff) << 32n) | BigInt(lo);
  if (expBits === 0) {
    return { num: mantissa, shift: 1074 }; // subnormal
  }
  return { num: mantissa | (1n << 52n), shift: 1075 - expBits };
}

export function quantize(raw: number[]): bigint[] {
  if (raw.length < 2) throw new Error("need at least two tokens");
  const parts = raw.map(decompose);
  const maxShift = Math.max(0, ...parts.map((p) => p.shift));
  // common denominator 2^maxShift turns every entry into an exact integer
  const ints = parts.map((p) => p.num << BigInt(maxShift - p.shift));
  const total = ints.reduce((a, b) => a + b, 0n);
  if (total === 0n) throw new Error("all-zero probability vector");

  const base: bigint[] = [];
  const rem: bigint[] = [];
  for (const a of ints) {
    const scaled = a * GRID;
    base.push(scaled / total);
    rem.push(scaled % total);
  }
  let deficit = GRID - base.reduce((a, b) => a + b, 0n);

  const order = ints
    .map((a, i) => i)
    .filter((i) => ints[i] > 0n)
    .sort((i, j) => {
      const zi = base[i] === 0n ? 0 : 1;
      const zj = base[j] === 0n ? 0 : 1;
      if (zi !== zj) return zi - zj;
      if (rem[i] !== rem[j]) return rem[i] > rem[j] ? -1 : 1;
      return i - j;
    });
  for (const i of order) {
    if (deficit === 0n) break;
    base[i] += 1n;
    deficit -= 1n;
  }
  return base;
}

/** Integer-vector fast path (used by the model: smoothed counts). */
export function quantizeInts(raw: bigint[]): bigint[] {
  if (raw.length < 2) throw new Error("need at least two tokens");
  const total = raw.reduce((a, b) => a + b, 0n);
  if (total === 0n) throw new Error("all-zero probability vector");
  const base: bigint[] = [];
  const rem: bigint[] = [];
  for (const a of raw) {
    if (a < 0n) throw new Error("negative probability mass");
    const scaled = a * GRID;
    base.push(scaled / total);
    rem.push(scaled % total);
  }
  let deficit = GRID - base.reduce((a, b) => a + b, 0n);
  const order = raw
    .map((_, i) => i)
    .filter((i) => raw[i] > 0n)
    .sort((i, j) => {
      const zi = base[i] === 0n ? 0 : 1;
      const zj = base[j] === 0n ? 0 : 1;
      if (zi !== zj) return zi - zj;
      if (rem[i] !== rem[j]) return rem[i] > rem[j] ? -1 : 1;
      return i - j;
    });
  for (const i of order) {
    if (deficit === 0n) break;
    base[i] += 1n;
    deficit -= 1n;
  }
  return base;
}
