import * as fs from "node:fs";
import * as path from "node:path";

import { Vocab } from "./data.js";
import { ModelConfig, Vae } from "./model.js";
import { Rng, Tensor } from "./tensor.js";

/**
 * Checkpoint directory layout: manifest.json (config + tensor shapes),
 * weights.bin (all parameters concatenated, float64 little-endian), and
 * vocab.txt in the toolkit's vocab file format.
 */

export function saveCheckpoint(dir: string, model: Vae, extra: Record<string, unknown> = {}): void {
  fs.mkdirSync(dir, { recursive: true });
  const params = model.params();
  const manifest = {
    config: model.cfg,
    shapes: params.map((p) => [p.rows, p.cols]),
    ...extra,
  };
  fs.writeFileSync(path.join(dir, "manifest.json"), JSON.stringify(manifest, null, 2) + "\n");
  const total = params.reduce((n, p) => n + p.size, 0);
  const buf = Buffer.alloc(total * 8);
  let off = 0;
  for (const p of params) {
    for (let i = 0; i < p.size; i++) {
      buf.writeDoubleLE(p.data[i], off);
      off += 8;
    }
  }
  fs.writeFileSync(path.join(dir, "weights.bin"), buf);
  model.vocab.save(path.join(dir, "vocab.txt"));
}

export function loadCheckpoint(dir: string): Vae {
  const manifest = JSON.parse(fs.readFileSync(path.join(dir, "manifest.json"), "utf8"));
  const cfg = manifest.config as ModelConfig;
  const vocab = Vocab.load(path.join(dir, "vocab.txt"));
  const model = new Vae(cfg, vocab, new Rng(cfg.seed));
  const params = model.params();
  const shapes = manifest.shapes as [number, number][];
  if (shapes.length !== params.length) {
    throw new Error(`checkpoint has ${shapes.length} tensors, model wants ${params.length}`);
  }
  const buf = fs.readFileSync(path.join(dir, "weights.bin"));
  let off = 0;
  for (let k = 0; k < params.length; k++) {
    const p = params[k];
    if (shapes[k][0] !== p.rows || shapes[k][1] !== p.cols) {
      throw new Error(`tensor ${k} shape mismatch`);
    }
    for (let i = 0; i < p.size; i++) {
      p.data[i] = buf.readDoubleLE(off);
      off += 8;
    }
  }
  model.training = false;
  return model;
}

export function snapshotWeights(model: Vae): Float64Array[] {
  return model.params().map((p) => Float64Array.from(p.data));
}

export function restoreWeights(model: Vae, snap: Float64Array[]): void {
  const params = model.params();
  for (let i = 0; i < params.length; i++) params[i].data.set(snap[i]);
}
