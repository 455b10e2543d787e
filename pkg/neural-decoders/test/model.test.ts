import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { describe, expect, it } from "vitest";

import { loadCheckpoint, saveCheckpoint } from "../src/checkpoint.js";
import { readCorpus, readFingerprintStore, Vocab } from "../src/data.js";
import { FPVAE_DEFAULTS, CHEMVAE_DEFAULTS, ModelConfig, Vae } from "../src/model.js";
import { Rng, Tensor, backward, clearTape } from "../src/tensor.js";
import { AdamW } from "../src/adamw.js";
import { prepareSamples } from "../src/train.js";

const FIXTURES = path.join(__dirname, "fixtures");

function tinyConfig(arch: "fpvae" | "chemvae"): ModelConfig {
  const base = arch === "fpvae" ? FPVAE_DEFAULTS : CHEMVAE_DEFAULTS;
  return { ...base, architecture: arch, latentDim: 16, widthFactor: 0.03125, embedDim: 12, maxLen: 64, seed: 3 };
}

function loadSamples(cfg: ModelConfig, n: number, model: Vae) {
  const entries = readCorpus(path.join(FIXTURES, "train600.smi")).slice(0, n);
  const vocab = model.vocab;
  const store = cfg.architecture === "fpvae"
    ? readFingerprintStore(path.join(FIXTURES, "train600.fps.bin"))
    : undefined;
  return prepareSamples(entries, vocab, cfg, store, model.fpFoldDim);
}

describe("fpvae", () => {
  it("loss decreases over a few optimizer steps", () => {
    const cfg = tinyConfig("fpvae");
    const vocab = Vocab.load(path.join(FIXTURES, "train600.vocab.txt"));
    const model = new Vae(cfg, vocab, new Rng(cfg.seed));
    const samples = loadSamples(cfg, 32, model);
    const optimizer = new AdamW(model.params(), 3e-3, 1e-4);
    const rng = new Rng(1);
    const losses: number[] = [];
    for (let step = 0; step < 30; step++) {
      const x = buildFpBatch(model, samples);
      const enc = model.encodeFingerprints(x, rng);
      const res = model.lossOn(samples.map((s) => s.ids), enc, 0, rng);
      optimizer.zeroGrad();
      backward(res.loss);
      optimizer.step();
      losses.push(res.loss.item());
    }
    expect(losses[losses.length - 1]).toBeLessThan(losses[0] * 0.85);
  });

  it("greedy decode emits a bounded token string", () => {
    const cfg = tinyConfig("fpvae");
    const vocab = Vocab.load(path.join(FIXTURES, "train600.vocab.txt"));
    const model = new Vae(cfg, vocab, new Rng(cfg.seed));
    const rng = new Rng(5);
    const z = new Float64Array(cfg.latentDim);
    for (let i = 0; i < z.length; i++) z[i] = rng.normal() * 0.3;
    const smiles = model.decodeGreedy(z);
    expect(typeof smiles).toBe("string");
    expect(smiles.length).toBeLessThanOrEqual(cfg.maxLen * 4);
    clearTape();
  });

  it("decode depends on the latent vector", () => {
    const cfg = tinyConfig("fpvae");
    const vocab = Vocab.load(path.join(FIXTURES, "train600.vocab.txt"));
    const model = new Vae(cfg, vocab, new Rng(cfg.seed));
    const outputs = new Set<string>();
    const rng = new Rng(11);
    for (let k = 0; k < 20; k++) {
      const z = new Float64Array(cfg.latentDim);
      for (let i = 0; i < z.length; i++) z[i] = rng.normal() * 2;
      outputs.add(model.decodeGreedy(z));
    }
    expect(outputs.size).toBeGreaterThan(1);
  });
});

describe("chemvae", () => {
  it("trains a step end to end (conv encoder)", () => {
    const cfg = tinyConfig("chemvae");
    const vocab = Vocab.load(path.join(FIXTURES, "train600.vocab.txt"));
    const model = new Vae(cfg, vocab, new Rng(cfg.seed));
    const samples = loadSamples(cfg, 8, model);
    const optimizer = new AdamW(model.params(), 1e-3, 1e-4);
    const rng = new Rng(1);
    const losses: number[] = [];
    for (let step = 0; step < 8; step++) {
      const enc = model.encodeSequences(samples.map((s) => s.ids), rng);
      const res = model.lossOn(samples.map((s) => s.ids), enc, 0.1, rng);
      optimizer.zeroGrad();
      backward(res.loss);
      optimizer.step();
      losses.push(res.loss.item());
    }
    expect(Number.isFinite(losses[losses.length - 1])).toBe(true);
    expect(losses[losses.length - 1]).toBeLessThan(losses[0]);
  });
});

describe("checkpoints", () => {
  it("save/load reproduces decodes exactly", () => {
    const cfg = tinyConfig("fpvae");
    const vocab = Vocab.load(path.join(FIXTURES, "train600.vocab.txt"));
    const model = new Vae(cfg, vocab, new Rng(cfg.seed));
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "ckpt-"));
    saveCheckpoint(dir, model, { note: "test" });
    const loaded = loadCheckpoint(dir);
    const rng = new Rng(9);
    for (let k = 0; k < 5; k++) {
      const z = new Float64Array(cfg.latentDim);
      for (let i = 0; i < z.length; i++) z[i] = rng.normal();
      expect(loaded.decodeGreedy(z)).toBe(model.decodeGreedy(z));
    }
    fs.rmSync(dir, { recursive: true, force: true });
  });
});

function buildFpBatch(model: Vae, samples: ReturnType<typeof prepareSamples>) {
  const x = new Tensor(samples.length, model.fpFoldDim);
  samples.forEach((s, r) => x.data.set(s.fp!, r * model.fpFoldDim));
  return x;
}
