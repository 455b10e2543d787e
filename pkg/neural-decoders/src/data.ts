/**
 * Readers for the benchmark toolkit's file interfaces: corpus files
 * (SMILES<TAB>id), vocab files (one token per line, four reserved rows),
 * and the MFP1 binary fingerprint store.
 */

import * as fs from "node:fs";

export const PAD = 0;
export const SOS = 1;
export const EOS = 2;
export const UNK = 3;
export const RESERVED = ["<PAD>", "<SOS>", "<EOS>", "<UNK>"];

export class Vocab {
  readonly tokenToId = new Map<string, number>();

  constructor(readonly idToToken: string[]) {
    idToToken.forEach((t, i) => this.tokenToId.set(t, i));
  }

  static buildFromEntries(entries: CorpusEntry[]): Vocab {
    return Vocab.build(entries.map((e) => e.smiles));
  }

  get size(): number {
    return this.idToToken.length;
  }

  static load(path: string): Vocab {
    const tokens = fs
      .readFileSync(path, "utf8")
      .split("\n")
      .filter((t) => t.length > 0);
    for (let i = 0; i < 4; i++) {
      if (tokens[i] !== RESERVED[i]) {
        throw new Error(`vocab file ${path} must start with ${RESERVED.join(", ")}`);
      }
    }
    return new Vocab(tokens);
  }

  static build(corpus: string[]): Vocab {
    const counts = new Map<string, number>();
    for (const smiles of corpus) {
      for (const tok of tokenizeAtomwise(smiles)) {
        counts.set(tok, (counts.get(tok) ?? 0) + 1);
      }
    }
    const ordered = [...counts.keys()].sort((a, b) => {
      const d = counts.get(b)! - counts.get(a)!;
      return d !== 0 ? d : a < b ? -1 : 1;
    });
    return new Vocab([...RESERVED, ...ordered]);
  }

  save(path: string): void {
    fs.writeFileSync(path, this.idToToken.join("\n") + "\n");
  }
}

/** Atomwise split matching the toolkit: brackets, %nn, Cl, Br are tokens. */
export function tokenizeAtomwise(smiles: string): string[] {
  const tokens: string[] = [];
  let i = 0;
  while (i < smiles.length) {
    const ch = smiles[i];
    if (ch === "[") {
      const end = smiles.indexOf("]", i);
      if (end < 0) throw new Error(`unterminated bracket at ${i} in ${smiles}`);
      tokens.push(smiles.slice(i, end + 1));
      i = end + 1;
    } else if (ch === "%" && /^\d\d$/.test(smiles.slice(i + 1, i + 3))) {
      tokens.push(smiles.slice(i, i + 3));
      i += 3;
    } else if (smiles.slice(i, i + 2) === "Cl" || smiles.slice(i, i + 2) === "Br") {
      tokens.push(smiles.slice(i, i + 2));
      i += 2;
    } else {
      tokens.push(ch);
      i += 1;
    }
  }
  return tokens;
}

export function encodeSmiles(smiles: string, vocab: Vocab, maxLen: number): Int32Array | null {
  const tokens = tokenizeAtomwise(smiles);
  if (tokens.length + 2 > maxLen) return null;
  const ids = new Int32Array(maxLen).fill(PAD);
  ids[0] = SOS;
  for (let i = 0; i < tokens.length; i++) {
    const id = vocab.tokenToId.get(tokens[i]);
    if (id === undefined) return null;
    ids[i + 1] = id;
  }
  ids[tokens.length + 1] = EOS;
  return ids;
}

export function decodeIds(ids: ArrayLike<number>, vocab: Vocab): string {
  const parts: string[] = [];
  for (let i = 0; i < ids.length; i++) {
    const id = ids[i];
    if (id === EOS) break;
    if (id === PAD || id === SOS) continue;
    parts.push(vocab.idToToken[id] ?? "");
  }
  return parts.join("");
}

export interface CorpusEntry {
  smiles: string;
  /** record id from the second column; falls back to the SMILES string */
  id: string;
}

export function readCorpus(path: string): CorpusEntry[] {
  return fs
    .readFileSync(path, "utf8")
    .split("\n")
    .filter((line) => line.length > 0 && !line.startsWith("#"))
    .map((line) => {
      const [smiles, id] = line.split("\t");
      return { smiles, id: id || smiles };
    });
}

export interface FingerprintStore {
  nBits: number;
  radius: number;
  ids: string[];
  /** Packed little-endian bit rows, nBits/8 bytes each. */
  bits: Uint8Array[];
}

export function readFingerprintStore(path: string): FingerprintStore {
  const buf = fs.readFileSync(path);
  if (buf.subarray(0, 4).toString("ascii") !== "MFP1") {
    throw new Error(`bad fingerprint store magic in ${path}`);
  }
  const nBits = buf.readUInt32LE(4);
  const radius = buf.readUInt32LE(8);
  const count = Number(buf.readBigUInt64LE(12));
  const width = nBits / 8;
  const ids: string[] = [];
  const bits: Uint8Array[] = [];
  let off = 20;
  for (let r = 0; r < count; r++) {
    const idLen = buf.readUInt32LE(off);
    off += 4;
    ids.push(buf.subarray(off, off + idLen).toString("utf8"));
    off += idLen;
    bits.push(new Uint8Array(buf.subarray(off, off + width)));
    off += width;
  }
  return { nBits, radius, ids, bits };
}

/** Fold a packed fingerprint onto `dim` inputs by OR over bit % dim. */
export function foldFingerprint(packed: Uint8Array, nBits: number, dim: number): Float64Array {
  const out = new Float64Array(dim);
  for (let bit = 0; bit < nBits; bit++) {
    if ((packed[bit >> 3] >> (bit & 7)) & 1) out[bit % dim] = 1;
  }
  return out;
}

export function popcount(packed: Uint8Array): number {
  let n = 0;
  for (const byte of packed) {
    let b = byte;
    while (b) {
      n += b & 1;
      b >>= 1;
    }
  }
  return n;
}

/** Tanimoto over two packed fingerprints (for the evaluation metrics). */
export function tanimotoPacked(a: Uint8Array, b: Uint8Array): number {
  let inter = 0;
  let union = 0;
  for (let i = 0; i < a.length; i++) {
    let and = a[i] & b[i];
    let or = a[i] | b[i];
    while (and) {
      inter += and & 1;
      and >>= 1;
    }
    while (or) {
      union += or & 1;
      or >>= 1;
    }
  }
  return union === 0 ? 1 : inter / union;
}
