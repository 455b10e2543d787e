/**
 * Training loop: teacher forcing with the variational loss annealed on a
 * sigmoid schedule, AdamW updates, plateau learning-rate decay on test
 * token accuracy, and best-checkpoint retention by that same metric.
 */

import { AdamW } from "./adamw.js";
import { restoreWeights, snapshotWeights } from "./checkpoint.js";
import {
  CorpusEntry,
  FingerprintStore,
  PAD,
  Vocab,
  encodeSmiles,
  foldFingerprint,
} from "./data.js";
import { EncodeResult, ModelConfig, Vae } from "./model.js";
import { klWeight, PlateauScheduler } from "./schedule.js";
import { Rng, Tensor, backward, clearTape, noGrad } from "./tensor.js";

export interface Sample {
  smiles: string;
  id: string;
  ids: Int32Array;
  /** folded fingerprint input row (fpvae only) */
  fp?: Float64Array;
}

export interface EpochStats {
  epoch: number;
  loss: number;
  klw: number;
  lr: number;
  trainTokenAcc: number;
  testTokenAcc: number;
}

export interface TrainResult {
  history: EpochStats[];
  bestTestTokenAcc: number;
  majorityBaseline: number;
}

export function prepareSamples(
  entries: CorpusEntry[],
  vocab: Vocab,
  cfg: ModelConfig,
  store?: FingerprintStore,
  foldDim?: number,
): Sample[] {
  const byKey = new Map<string, Uint8Array>();
  if (store) {
    store.ids.forEach((id, i) => byKey.set(id, store.bits[i]));
  }
  const out: Sample[] = [];
  for (const entry of entries) {
    const ids = encodeSmiles(entry.smiles, vocab, cfg.maxLen);
    if (!ids) continue;
    const sample: Sample = { smiles: entry.smiles, id: entry.id, ids };
    if (store) {
      const packed = byKey.get(entry.id) ?? byKey.get(entry.smiles);
      if (!packed) continue; // the fingerprint store must cover the corpus
      sample.fp = foldFingerprint(packed, store.nBits, foldDim ?? 0);
    }
    out.push(sample);
  }
  return out;
}

/**
 * Accuracy of always predicting the most frequent non-padding target token,
 * measured on the same positions the model is scored on.
 */
export function majorityBaseline(train: Sample[], test: Sample[]): number {
  const counts = new Map<number, number>();
  for (const s of train) {
    for (let t = 1; t < s.ids.length; t++) {
      if (s.ids[t] === PAD) break;
      counts.set(s.ids[t], (counts.get(s.ids[t]) ?? 0) + 1);
    }
  }
  let majority = -1;
  let best = -1;
  for (const [tok, n] of counts) {
    if (n > best) {
      best = n;
      majority = tok;
    }
  }
  let hit = 0;
  let total = 0;
  for (const s of test) {
    for (let t = 1; t < s.ids.length; t++) {
      if (s.ids[t] === PAD) break;
      total += 1;
      if (s.ids[t] === majority) hit += 1;
    }
  }
  return total ? hit / total : 0;
}

function encodeBatch(model: Vae, batch: Sample[], rng: Rng): EncodeResult {
  if (model.cfg.architecture === "fpvae") {
    const dim = model.fpFoldDim;
    const x = new Tensor(batch.length, dim);
    batch.forEach((s, r) => x.data.set(s.fp!, r * dim));
    return model.encodeFingerprints(x, rng);
  }
  return model.encodeSequences(batch.map((s) => s.ids), rng);
}

function targetLength(s: Sample): number {
  let n = 0;
  while (n < s.ids.length && s.ids[n] !== PAD) n += 1;
  return n;
}

export function tokenAccuracy(model: Vae, samples: Sample[], batchSize: number): number {
  const wasTraining = model.training;
  model.training = false;
  // length-sorted evaluation batches (metric is order independent)
  const sorted = [...samples].sort((a, b) => targetLength(a) - targetLength(b));
  let correct = 0;
  let counted = 0;
  noGrad(() => {
    for (let i = 0; i < sorted.length; i += batchSize) {
      const batch = sorted.slice(i, i + batchSize);
      const rng = new Rng(0);
      const enc = encodeBatch(model, batch, rng);
      const res = model.lossOn(batch.map((s) => s.ids), enc, 0, rng);
      correct += res.correct;
      counted += res.counted;
    }
  });
  clearTape();
  model.training = wasTraining;
  return counted ? correct / counted : 0;
}

export function train(
  model: Vae,
  trainSamples: Sample[],
  testSamples: Sample[],
  onEpoch?: (stats: EpochStats) => void,
): TrainResult {
  const cfg = model.cfg;
  const rng = new Rng(cfg.seed + 1);
  const optimizer = new AdamW(model.params(), cfg.lr, cfg.weightDecay);
  const scheduler = new PlateauScheduler(cfg.lr, 0.7, 5);
  const history: EpochStats[] = [];
  let best = -Infinity;
  let bestSnap = snapshotWeights(model);

  // length-bucketed batches: similar-length molecules share a batch so the
  // teacher-forcing loop stops near the true sequence end, not at max_len
  const byLength = trainSamples
    .map((s, i) => i)
    .sort((a, b) => targetLength(trainSamples[a]) - targetLength(trainSamples[b]));
  const batches: number[][] = [];
  for (let i = 0; i < byLength.length; i += cfg.batchSize) {
    batches.push(byLength.slice(i, i + cfg.batchSize));
  }

  for (let epoch = 0; epoch < cfg.epochs; epoch++) {
    model.training = true;
    rng.shuffle(batches);
    const klw = klWeight(epoch, cfg.klAnnealStart);
    let lossSum = 0;
    let nBatches = 0;
    let correct = 0;
    let counted = 0;
    for (const batchIds of batches) {
      const batch = batchIds.map((k) => trainSamples[k]);
      const enc = encodeBatch(model, batch, rng);
      const res = model.lossOn(batch.map((s) => s.ids), enc, klw, rng);
      optimizer.zeroGrad();
      backward(res.loss);
      optimizer.step();
      lossSum += res.loss.item();
      nBatches += 1;
      correct += res.correct;
      counted += res.counted;
    }
    const testAcc = tokenAccuracy(model, testSamples, cfg.batchSize);
    optimizer.lr = scheduler.update(testAcc);
    const stats: EpochStats = {
      epoch,
      loss: lossSum / Math.max(nBatches, 1),
      klw,
      lr: optimizer.lr,
      trainTokenAcc: counted ? correct / counted : 0,
      testTokenAcc: testAcc,
    };
    history.push(stats);
    onEpoch?.(stats);
    if (testAcc > best) {
      best = testAcc;
      bestSnap = snapshotWeights(model);
    }
  }
  restoreWeights(model, bestSnap);
  model.training = false;
  return {
    history,
    bestTestTokenAcc: best,
    majorityBaseline: majorityBaseline(trainSamples, testSamples),
  };
}
