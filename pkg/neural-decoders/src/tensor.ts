/**
 * Minimal reverse-mode autodiff over dense 2-D tensors (Float64Array),
 * sized for toy sequence models on CPU. Operations record backward
 * closures on a tape; `backward(loss)` replays it in reverse.
 */

export class Tensor {
  data: Float64Array;
  grad: Float64Array | null = null;
  readonly rows: number;
  readonly cols: number;
  requiresGrad: boolean;

  constructor(rows: number, cols: number, data?: Float64Array, requiresGrad = false) {
    this.rows = rows;
    this.cols = cols;
    this.data = data ?? new Float64Array(rows * cols);
    if (data && data.length !== rows * cols) {
      throw new Error(`shape ${rows}x${cols} does not match data length ${data.length}`);
    }
    this.requiresGrad = requiresGrad;
  }

  static fromArray(rows: number, cols: number, values: number[]): Tensor {
    return new Tensor(rows, cols, Float64Array.from(values));
  }

  ensureGrad(): Float64Array {
    if (!this.grad) this.grad = new Float64Array(this.rows * this.cols);
    return this.grad;
  }

  zeroGrad(): void {
    if (this.grad) this.grad.fill(0);
  }

  get size(): number {
    return this.rows * this.cols;
  }

  item(): number {
    if (this.size !== 1) throw new Error("item() requires a 1x1 tensor");
    return this.data[0];
  }
}

type BackwardFn = () => void;

let tape: BackwardFn[] = [];
let taping = true;

export function noGrad<T>(fn: () => T): T {
  const prev = taping;
  taping = false;
  try {
    return fn();
  } finally {
    taping = prev;
  }
}

function record(out: Tensor, fn: BackwardFn): void {
  if (taping) {
    out.requiresGrad = true;
    // outputs that never receive a gradient are not upstream of the loss;
    // their contribution is zero, so the closure is skipped
    tape.push(() => {
      if (out.grad) fn();
    });
  }
}

export function backward(loss: Tensor): void {
  loss.ensureGrad().fill(1);
  for (let i = tape.length - 1; i >= 0; i--) tape[i]();
  tape = [];
}

export function clearTape(): void {
  tape = [];
}

export function matmul(a: Tensor, b: Tensor): Tensor {
  if (a.cols !== b.rows) throw new Error(`matmul shape mismatch ${a.cols} vs ${b.rows}`);
  const out = new Tensor(a.rows, b.cols);
  const [R, K, C] = [a.rows, a.cols, b.cols];
  const ad = a.data, bd = b.data, od = out.data;
  for (let i = 0; i < R; i++) {
    const ai = i * K, oi = i * C;
    for (let k = 0; k < K; k++) {
      const av = ad[ai + k];
      if (av === 0) continue;
      const bk = k * C;
      for (let j = 0; j < C; j++) od[oi + j] += av * bd[bk + j];
    }
  }
  record(out, () => {
    const go = out.grad!;
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < R; i++) {
        const oi = i * C, ai = i * K;
        for (let k = 0; k < K; k++) {
          const bk = k * C;
          let acc = 0;
          for (let j = 0; j < C; j++) acc += go[oi + j] * bd[bk + j];
          ga[ai + k] += acc;
        }
      }
    }
    if (b.requiresGrad) {
      const gb = b.ensureGrad();
      for (let i = 0; i < R; i++) {
        const oi = i * C, ai = i * K;
        for (let k = 0; k < K; k++) {
          const av = ad[ai + k];
          if (av === 0) continue;
          const bk = k * C;
          for (let j = 0; j < C; j++) gb[bk + j] += av * go[oi + j];
        }
      }
    }
  });
  return out;
}

export function add(a: Tensor, b: Tensor): Tensor {
  if (a.rows !== b.rows || a.cols !== b.cols) throw new Error("add shape mismatch");
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < out.size; i++) out.data[i] = a.data[i] + b.data[i];
  record(out, () => {
    const go = out.grad!;
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < go.length; i++) ga[i] += go[i];
    }
    if (b.requiresGrad) {
      const gb = b.ensureGrad();
      for (let i = 0; i < go.length; i++) gb[i] += go[i];
    }
  });
  return out;
}

/** Add a 1xC bias row to every row of a. */
export function addRow(a: Tensor, bias: Tensor): Tensor {
  if (bias.rows !== 1 || bias.cols !== a.cols) throw new Error("addRow shape mismatch");
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < a.rows; i++) {
    const off = i * a.cols;
    for (let j = 0; j < a.cols; j++) out.data[off + j] = a.data[off + j] + bias.data[j];
  }
  record(out, () => {
    const go = out.grad!;
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < go.length; i++) ga[i] += go[i];
    }
    if (bias.requiresGrad) {
      const gb = bias.ensureGrad();
      for (let i = 0; i < a.rows; i++) {
        const off = i * a.cols;
        for (let j = 0; j < a.cols; j++) gb[j] += go[off + j];
      }
    }
  });
  return out;
}

export function mulElem(a: Tensor, b: Tensor): Tensor {
  if (a.rows !== b.rows || a.cols !== b.cols) throw new Error("mulElem shape mismatch");
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < out.size; i++) out.data[i] = a.data[i] * b.data[i];
  record(out, () => {
    const go = out.grad!;
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < go.length; i++) ga[i] += go[i] * b.data[i];
    }
    if (b.requiresGrad) {
      const gb = b.ensureGrad();
      for (let i = 0; i < go.length; i++) gb[i] += go[i] * a.data[i];
    }
  });
  return out;
}

export function mulScalar(a: Tensor, s: number): Tensor {
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < out.size; i++) out.data[i] = a.data[i] * s;
  record(out, () => {
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      const go = out.grad!;
      for (let i = 0; i < go.length; i++) ga[i] += go[i] * s;
    }
  });
  return out;
}

function unary(a: Tensor, f: (x: number) => number, dfdy: (x: number, y: number) => number): Tensor {
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < out.size; i++) out.data[i] = f(a.data[i]);
  record(out, () => {
    if (!a.requiresGrad) return;
    const ga = a.ensureGrad();
    const go = out.grad!;
    for (let i = 0; i < go.length; i++) ga[i] += go[i] * dfdy(a.data[i], out.data[i]);
  });
  return out;
}

export function tanhT(a: Tensor): Tensor {
  return unary(a, Math.tanh, (_x, y) => 1 - y * y);
}

export function sigmoidT(a: Tensor): Tensor {
  return unary(a, (x) => 1 / (1 + Math.exp(-x)), (_x, y) => y * (1 - y));
}

export function expT(a: Tensor): Tensor {
  return unary(a, Math.exp, (_x, y) => y);
}

export function concatCols(a: Tensor, b: Tensor): Tensor {
  if (a.rows !== b.rows) throw new Error("concatCols row mismatch");
  const out = new Tensor(a.rows, a.cols + b.cols);
  for (let i = 0; i < a.rows; i++) {
    out.data.set(a.data.subarray(i * a.cols, (i + 1) * a.cols), i * out.cols);
    out.data.set(b.data.subarray(i * b.cols, (i + 1) * b.cols), i * out.cols + a.cols);
  }
  record(out, () => {
    const go = out.grad!;
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < a.rows; i++)
        for (let j = 0; j < a.cols; j++) ga[i * a.cols + j] += go[i * out.cols + j];
    }
    if (b.requiresGrad) {
      const gb = b.ensureGrad();
      for (let i = 0; i < b.rows; i++)
        for (let j = 0; j < b.cols; j++) gb[i * b.cols + j] += go[i * out.cols + a.cols + j];
    }
  });
  return out;
}

export function concatRows(a: Tensor, b: Tensor): Tensor {
  if (a.cols !== b.cols) throw new Error("concatRows col mismatch");
  const out = new Tensor(a.rows + b.rows, a.cols);
  out.data.set(a.data, 0);
  out.data.set(b.data, a.size);
  record(out, () => {
    const go = out.grad!;
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < a.size; i++) ga[i] += go[i];
    }
    if (b.requiresGrad) {
      const gb = b.ensureGrad();
      for (let i = 0; i < b.size; i++) gb[i] += go[a.size + i];
    }
  });
  return out;
}

export function sliceCols(a: Tensor, start: number, end: number): Tensor {
  const width = end - start;
  const out = new Tensor(a.rows, width);
  for (let i = 0; i < a.rows; i++)
    out.data.set(a.data.subarray(i * a.cols + start, i * a.cols + end), i * width);
  record(out, () => {
    if (!a.requiresGrad) return;
    const ga = a.ensureGrad();
    const go = out.grad!;
    for (let i = 0; i < a.rows; i++)
      for (let j = 0; j < width; j++) ga[i * a.cols + start + j] += go[i * width + j];
  });
  return out;
}

/** Gather embedding rows for token ids; gradient scatters back. */
export function gatherRows(table: Tensor, ids: Int32Array): Tensor {
  const out = new Tensor(ids.length, table.cols);
  for (let i = 0; i < ids.length; i++)
    out.data.set(table.data.subarray(ids[i] * table.cols, (ids[i] + 1) * table.cols), i * table.cols);
  record(out, () => {
    if (!table.requiresGrad) return;
    const gt = table.ensureGrad();
    const go = out.grad!;
    for (let i = 0; i < ids.length; i++) {
      const src = i * table.cols, dst = ids[i] * table.cols;
      for (let j = 0; j < table.cols; j++) gt[dst + j] += go[src + j];
    }
  });
  return out;
}

/**
 * Inverted dropout; identity when p = 0. The mask comes from the caller's
 * RNG so runs stay reproducible.
 */
export function dropout(a: Tensor, p: number, uniform: () => number): Tensor {
  if (p <= 0) return a;
  const keep = 1 - p;
  const mask = new Float64Array(a.size);
  for (let i = 0; i < a.size; i++) mask[i] = uniform() < keep ? 1 / keep : 0;
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < a.size; i++) out.data[i] = a.data[i] * mask[i];
  record(out, () => {
    if (!a.requiresGrad) return;
    const ga = a.ensureGrad();
    const go = out.grad!;
    for (let i = 0; i < go.length; i++) ga[i] += go[i] * mask[i];
  });
  return out;
}

/**
 * Mean cross-entropy over the rows whose weight is nonzero, from raw
 * logits. Returns a 1x1 tensor; predictions can be read from `argmaxRows`.
 */
export function softmaxCrossEntropy(logits: Tensor, targets: Int32Array, weights: Float64Array): Tensor {
  const R = logits.rows, V = logits.cols;
  if (targets.length !== R || weights.length !== R) throw new Error("CE shape mismatch");
  const probs = new Float64Array(R * V);
  let total = 0;
  let count = 0;
  for (let i = 0; i < R; i++) {
    if (weights[i] === 0) continue;
    const off = i * V;
    let max = -Infinity;
    for (let j = 0; j < V; j++) if (logits.data[off + j] > max) max = logits.data[off + j];
    let z = 0;
    for (let j = 0; j < V; j++) {
      const e = Math.exp(logits.data[off + j] - max);
      probs[off + j] = e;
      z += e;
    }
    for (let j = 0; j < V; j++) probs[off + j] /= z;
    total += -Math.log(Math.max(probs[off + targets[i]], 1e-12)) * weights[i];
    count += weights[i];
  }
  const denom = Math.max(count, 1);
  const out = new Tensor(1, 1, Float64Array.of(total / denom));
  record(out, () => {
    if (!logits.requiresGrad) return;
    const gl = logits.ensureGrad();
    const g = out.grad![0] / denom;
    for (let i = 0; i < R; i++) {
      if (weights[i] === 0) continue;
      const off = i * V;
      for (let j = 0; j < V; j++) {
        gl[off + j] += g * weights[i] * (probs[off + j] - (j === targets[i] ? 1 : 0));
      }
    }
  });
  return out;
}

export function argmaxRows(logits: Tensor): Int32Array {
  const out = new Int32Array(logits.rows);
  for (let i = 0; i < logits.rows; i++) {
    const off = i * logits.cols;
    let best = 0;
    for (let j = 1; j < logits.cols; j++)
      if (logits.data[off + j] > logits.data[off + best]) best = j;
    out[i] = best;
  }
  return out;
}

/** KL(N(mu, sigma^2) || N(0, 1)) summed over dims, averaged over rows. */
export function klNormal(mu: Tensor, logvar: Tensor): Tensor {
  if (mu.rows !== logvar.rows || mu.cols !== logvar.cols) throw new Error("kl shape mismatch");
  let total = 0;
  for (let i = 0; i < mu.size; i++) {
    total += -0.5 * (1 + logvar.data[i] - mu.data[i] * mu.data[i] - Math.exp(logvar.data[i]));
  }
  const denom = mu.rows;
  const out = new Tensor(1, 1, Float64Array.of(total / denom));
  record(out, () => {
    const g = out.grad![0] / denom;
    if (mu.requiresGrad) {
      const gm = mu.ensureGrad();
      for (let i = 0; i < mu.size; i++) gm[i] += g * mu.data[i];
    }
    if (logvar.requiresGrad) {
      const gl = logvar.ensureGrad();
      for (let i = 0; i < logvar.size; i++) gl[i] += g * -0.5 * (1 - Math.exp(logvar.data[i]));
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Deterministic RNG (splitmix64 seeding a xoshiro-style stream)
// ---------------------------------------------------------------------------

export class Rng {
  private s: bigint;

  constructor(seed: number) {
    this.s = BigInt.asUintN(64, BigInt(seed));
  }

  next(): number {
    this.s = BigInt.asUintN(64, this.s + 0x9e3779b97f4a7c15n);
    let z = this.s;
    z = BigInt.asUintN(64, (z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n);
    z = BigInt.asUintN(64, (z ^ (z >> 27n)) * 0x94d049bb133111ebn);
    z = z ^ (z >> 31n);
    return Number(z >> 11n) / 9007199254740992; // 53-bit mantissa in [0,1)
  }

  uniform = (): number => this.next();

  normal(): number {
    let u = 0;
    while (u === 0) u = this.next();
    const v = this.next();
    return Math.sqrt(-2 * Math.log(u)) * Math.cos(2 * Math.PI * v);
  }

  int(n: number): number {
    return Math.floor(this.next() * n);
  }

  shuffle<T>(arr: T[]): void {
    for (let i = arr.length - 1; i > 0; i--) {
      const j = this.int(i + 1);
      [arr[i], arr[j]] = [arr[j], arr[i]];
    }
  }
}

export function randn(rows: number, cols: number, rng: Rng, scale = 1): Tensor {
  const t = new Tensor(rows, cols);
  for (let i = 0; i < t.size; i++) t.data[i] = rng.normal() * scale;
  return t;
}
