/**
 * Toy-scale molecular VAEs: a fingerprint-input encoder (dense stack) and a
 * SMILES-input encoder (1-D convolutions), both decoding through a stacked
 * LSTM with greedy argmax sampling. Hidden widths scale with a width factor
 * so desk-size corpora train in minutes on a CPU.
 */

import { Dense, Embedding, LstmStack, LstmState } from "./layers.js";
import {
  Rng,
  Tensor,
  add,
  argmaxRows,
  concatCols,
  concatRows,
  dropout,
  expT,
  gatherRows,
  klNormal,
  matmul,
  mulElem,
  mulScalar,
  noGrad,
  randn,
  sliceCols,
  softmaxCrossEntropy,
  tanhT,
} from "./tensor.js";
import { EOS, PAD, SOS, Vocab } from "./data.js";

export type Architecture = "fpvae" | "chemvae";

export interface ModelConfig {
  architecture: Architecture;
  latentDim: number;
  widthFactor: number;
  lstmLayers: number;
  lstmHiddenFull: number;
  embedDim: number;
  encoderDimsFull: number[];
  fpBits: number;
  convChannelsFull: number[];
  convKernels: number[];
  dropout: number;
  klAnnealStart: number;
  epochs: number;
  batchSize: number;
  lr: number;
  weightDecay: number;
  maxLen: number;
  seed: number;
}

export const FPVAE_DEFAULTS: ModelConfig = {
  architecture: "fpvae",
  latentDim: 150,
  widthFactor: 0.0625,
  lstmLayers: 3,
  lstmHiddenFull: 512,
  embedDim: 32,
  encoderDimsFull: [2048, 1024, 768, 512],
  fpBits: 4096,
  convChannelsFull: [9, 9, 10],
  convKernels: [9, 9, 11],
  dropout: 0,
  klAnnealStart: 20,
  epochs: 30,
  batchSize: 256,
  lr: 5e-4,
  weightDecay: 5e-3,
  maxLen: 120,
  seed: 0,
};

export const CHEMVAE_DEFAULTS: ModelConfig = {
  ...FPVAE_DEFAULTS,
  architecture: "chemvae",
  lr: 1e-4,
  weightDecay: 1e-3,
};

export function scaled(full: number, factor: number, min = 8): number {
  return Math.max(min, Math.round(full * factor));
}

/** Simple valid-padding 1-D convolution along the sequence axis. */
class Conv1d {
  dense: Dense;

  constructor(readonly kernel: number, inChannels: number, readonly outChannels: number, rng: Rng) {
    this.dense = new Dense(kernel * inChannels, outChannels, rng);
  }

  /** x: T x Cin (one sequence) -> (T - k + 1) x Cout, then ReLU-free tanh. */
  forward(x: Tensor): Tensor {
    const steps = x.rows - this.kernel + 1;
    if (steps < 1) throw new Error("sequence shorter than convolution kernel");
    const windows = new Tensor(steps, this.kernel * x.cols);
    for (let t = 0; t < steps; t++) {
      for (let k = 0; k < this.kernel; k++) {
        windows.data.set(
          x.data.subarray((t + k) * x.cols, (t + k + 1) * x.cols),
          t * windows.cols + k * x.cols,
        );
      }
    }
    return tanhT(this.dense.forward(windows));
  }

  params(): Tensor[] {
    return this.dense.params();
  }
}

export interface EncodeResult {
  mu: Tensor;
  logvar: Tensor;
}

export class Vae {
  readonly cfg: ModelConfig;
  readonly vocab: Vocab;
  readonly hidden: number;
  readonly encoderDims: number[];
  encoderStack: Dense[] = [];
  convs: Conv1d[] = [];
  convOut!: Dense;
  muHead: Dense;
  logvarHead: Dense;
  zToState: Dense;
  zFeed: Dense;
  embedding: Embedding;
  lstm: LstmStack;
  outHead: Dense;
  training = true;
  /** width of the per-step latent conditioning vector */
  static readonly Z_FEED_DIM = 16;

  constructor(cfg: ModelConfig, vocab: Vocab, rng: Rng) {
    this.cfg = cfg;
    this.vocab = vocab;
    this.hidden = scaled(cfg.lstmHiddenFull, cfg.widthFactor);
    let encOut: number;
    if (cfg.architecture === "fpvae") {
      this.encoderDims = cfg.encoderDimsFull.map((d) => scaled(d, cfg.widthFactor));
      let inDim = this.fpFoldDim;
      for (const dim of this.encoderDims) {
        this.encoderStack.push(new Dense(inDim, dim, rng));
        inDim = dim;
      }
      encOut = inDim;
    } else {
      this.encoderDims = [];
      const channels = cfg.convChannelsFull.map((c) => scaled(c, cfg.widthFactor, 2));
      let cin = vocab.size;
      for (let i = 0; i < channels.length; i++) {
        const kernel = Math.min(cfg.convKernels[i], 5);
        this.convs.push(new Conv1d(kernel, cin, channels[i], rng));
        cin = channels[i];
      }
      const denseDim = scaled(435, cfg.widthFactor);
      this.convOut = new Dense(cin, denseDim, rng);
      encOut = denseDim;
    }
    this.muHead = new Dense(encOut, cfg.latentDim, rng);
    this.logvarHead = new Dense(encOut, cfg.latentDim, rng);
    // start with small posterior variance so early reparameterization noise
    // does not drown the decoder's latent conditioning
    this.logvarHead.b.data.fill(-4);
    this.zToState = new Dense(cfg.latentDim, cfg.lstmLayers * this.hidden, rng);
    this.zFeed = new Dense(cfg.latentDim, Vae.Z_FEED_DIM, rng);
    this.embedding = new Embedding(vocab.size, cfg.embedDim, rng);
    // each decoder step sees the token embedding plus a compressed view of
    // the latent vector, keeping the decoder conditioned on z throughout
    this.lstm = new LstmStack(cfg.embedDim + Vae.Z_FEED_DIM, this.hidden, cfg.lstmLayers, rng);
    this.outHead = new Dense(this.hidden, vocab.size, rng);
  }

  get fpFoldDim(): number {
    return scaled(this.cfg.fpBits, this.cfg.widthFactor, 64);
  }

  params(): Tensor[] {
    const out: Tensor[] = [];
    for (const d of this.encoderStack) out.push(...d.params());
    for (const c of this.convs) out.push(...c.params());
    if (this.convs.length) out.push(...this.convOut.params());
    out.push(
      ...this.muHead.params(),
      ...this.logvarHead.params(),
      ...this.zToState.params(),
      ...this.zFeed.params(),
      ...this.embedding.params(),
      ...this.lstm.params(),
      ...this.outHead.params(),
    );
    return out;
  }

  /** Dense-stack encoder over folded fingerprints (fpvae).

  Dropout (when configured) applies to the fingerprint input and to every
  hidden activation while training. */
  encodeFingerprints(x: Tensor, rng: Rng): EncodeResult {
    let h = x;
    if (this.training && this.cfg.dropout > 0) {
      h = dropout(h, this.cfg.dropout, () => rng.next());
    }
    for (const layer of this.encoderStack) {
      h = tanhT(layer.forward(h));
      if (this.training && this.cfg.dropout > 0) {
        h = dropout(h, this.cfg.dropout, () => rng.next());
      }
    }
    return { mu: tanhT(this.muHead.forward(h)), logvar: this.logvarHead.forward(h) };
  }

  /** Convolutional encoder over one-hot token grids (chemvae). */
  encodeSequences(batchIds: Int32Array[], rng: Rng): EncodeResult {
    const rows: Tensor[] = [];
    for (const ids of batchIds) {
      let x = new Tensor(ids.length, this.vocab.size);
      for (let t = 0; t < ids.length; t++) x.data[t * this.vocab.size + ids[t]] = 1;
      for (const conv of this.convs) x = conv.forward(x);
      // mean over remaining positions -> one row
      const pooled = mulScalar(matmul(onesRow(x.rows), x), 1 / x.rows);
      rows.push(pooled);
    }
    let h = rows.reduce((acc, r) => concatRows(acc, r));
    h = tanhT(this.convOut.forward(h));
    if (this.training && this.cfg.dropout > 0) h = dropout(h, this.cfg.dropout, () => rng.next());
    return { mu: tanhT(this.muHead.forward(h)), logvar: this.logvarHead.forward(h) };
  }

  reparameterize(enc: EncodeResult, rng: Rng): Tensor {
    const eps = randn(enc.mu.rows, enc.mu.cols, rng);
    const sigma = expT(mulScalar(enc.logvar, 0.5));
    return add(enc.mu, mulElem(sigma, eps));
  }

  initialStates(z: Tensor): LstmState[] {
    const flat = tanhT(this.zToState.forward(z));
    const states: LstmState[] = [];
    for (let k = 0; k < this.cfg.lstmLayers; k++) {
      states.push({
        h: sliceCols(flat, k * this.hidden, (k + 1) * this.hidden),
        c: new Tensor(z.rows, this.hidden),
      });
    }
    return states;
  }

  /**
   * Teacher-forced reconstruction loss plus weighted KL, both averaged over
   * the non-padding target tokens. Returns token-level accuracy counts too.
   */
  lossOn(batch: Int32Array[], enc: EncodeResult, klw: number, rng: Rng) {
    const B = batch.length;
    const T = batch[0].length;
    const z = this.training ? this.reparameterize(enc, rng) : enc.mu;
    let states = this.initialStates(z);
    const zfeed = tanhT(this.zFeed.forward(z));

    let ce: Tensor | null = null;
    let correct = 0;
    let counted = 0;
    let steps = 0;
    for (let t = 0; t < T - 1; t++) {
      const inputs = new Int32Array(B);
      const targets = new Int32Array(B);
      const weights = new Float64Array(B);
      let live = 0;
      for (let r = 0; r < B; r++) {
        inputs[r] = batch[r][t];
        targets[r] = batch[r][t + 1];
        if (targets[r] !== PAD) {
          weights[r] = 1;
          live += 1;
        }
      }
      if (live === 0) break;
      const x = concatCols(this.embedding.forward(inputs), zfeed);
      const stepOut = this.lstm.step(x, states);
      states = stepOut.states;
      const logits = this.outHead.forward(stepOut.out);
      const stepCe = softmaxCrossEntropy(logits, targets, weights);
      ce = ce === null ? stepCe : add(ce, stepCe);
      steps += 1;
      const preds = argmaxRows(logits);
      for (let r = 0; r < B; r++) {
        if (weights[r] === 1) {
          counted += 1;
          if (preds[r] === targets[r]) correct += 1;
        }
      }
    }
    if (ce === null) throw new Error("batch contained no target tokens");
    const ceMean = mulScalar(ce, 1 / steps);
    const tokensPerRow = counted / B;
    const klTerm = mulScalar(klNormal(enc.mu, enc.logvar), klw / Math.max(tokensPerRow, 1));
    return { loss: add(ceMean, klTerm), ce: ceMean.item(), correct, counted };
  }

  /** Greedy argmax decoding of a latent vector into a token string. */
  decodeGreedy(z: Float64Array): string {
    return noGrad(() => {
      const zt = new Tensor(1, this.cfg.latentDim, Float64Array.from(z));
      let states = this.initialStates(zt);
      const zfeed = tanhT(this.zFeed.forward(zt));
      let token = SOS;
      const out: number[] = [];
      for (let t = 0; t < this.cfg.maxLen; t++) {
        const x = concatCols(gatherRows(this.embedding.table, Int32Array.of(token)), zfeed);
        const stepOut = this.lstm.step(x, states);
        states = stepOut.states;
        const logits = this.outHead.forward(stepOut.out);
        token = argmaxRows(logits)[0];
        if (token === EOS || token === PAD) break;
        out.push(token);
      }
      return out.map((id) => this.vocab.idToToken[id]).join("");
    });
  }
}

function onesRow(n: number): Tensor {
  const t = new Tensor(1, n);
  t.data.fill(1);
  return t;
}
