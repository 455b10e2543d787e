/**
 * neural-decoders CLI:
 *   train  --corpus train.smi --test test.smi --fpstore fps.bin --out ckpt/
 *   eval   --checkpoint ckpt/ --test test.smi --fpstore fps.bin
 *   serve  --checkpoint ckpt/ [--port N | --stdio]
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { loadCheckpoint, saveCheckpoint } from "./checkpoint.js";
import * as dataModule from "./data.js";
import { readCorpus, readFingerprintStore, Vocab } from "./data.js";
import { evaluate } from "./evaluate.js";
import { Architecture, CHEMVAE_DEFAULTS, FPVAE_DEFAULTS, ModelConfig, Vae } from "./model.js";
import { serveStdio, serveTcp } from "./server.js";
import * as tensorModule from "./tensor.js";
import { Rng } from "./tensor.js";
import { prepareSamples, train } from "./train.js";

function parseArgs(argv: string[]): { cmd: string; flags: Map<string, string> } {
  const [cmd, ...rest] = argv;
  const flags = new Map<string, string>();
  for (let i = 0; i < rest.length; i++) {
    if (!rest[i].startsWith("--")) throw new Error(`unexpected argument ${rest[i]}`);
    const key = rest[i].slice(2);
    if (i + 1 < rest.length && !rest[i + 1].startsWith("--")) {
      flags.set(key, rest[++i]);
    } else {
      flags.set(key, "true");
    }
  }
  return { cmd, flags };
}

function need(flags: Map<string, string>, key: string): string {
  const v = flags.get(key);
  if (!v) throw new Error(`missing --${key}`);
  return v;
}

function buildConfig(flags: Map<string, string>): ModelConfig {
  const arch = (flags.get("arch") ?? "fpvae") as Architecture;
  const base = arch === "fpvae" ? FPVAE_DEFAULTS : CHEMVAE_DEFAULTS;
  const num = (key: string, fallback: number) =>
    flags.has(key) ? Number(flags.get(key)) : fallback;
  return {
    ...base,
    architecture: arch,
    latentDim: num("latent", base.latentDim),
    widthFactor: num("width", base.widthFactor),
    embedDim: num("embed", base.embedDim),
    dropout: num("dropout", base.dropout),
    klAnnealStart: num("kl-start", base.klAnnealStart),
    epochs: num("epochs", base.epochs),
    batchSize: num("batch", base.batchSize),
    lr: num("lr", base.lr),
    weightDecay: num("weight-decay", base.weightDecay),
    maxLen: num("max-len", base.maxLen),
    seed: num("seed", base.seed),
  };
}

function cmdTrain(flags: Map<string, string>): void {
  const cfg = buildConfig(flags);
  const outDir = need(flags, "out");
  const trainEntries = readCorpus(need(flags, "corpus"));
  const testEntries = readCorpus(need(flags, "test"));

  let vocab: Vocab;
  const vocabPath = flags.get("vocab");
  if (vocabPath && fs.existsSync(vocabPath)) {
    vocab = Vocab.load(vocabPath);
  } else {
    vocab = Vocab.buildFromEntries(trainEntries);
  }

  const model = new Vae(cfg, vocab, new Rng(cfg.seed));
  let store;
  let testStore;
  if (cfg.architecture === "fpvae") {
    store = readFingerprintStore(need(flags, "fpstore"));
    testStore = flags.has("test-fpstore")
      ? readFingerprintStore(flags.get("test-fpstore")!)
      : store;
  }
  const trainSamples = prepareSamples(trainEntries, vocab, cfg, store, model.fpFoldDim);
  const testSamples = prepareSamples(testEntries, vocab, cfg, testStore, model.fpFoldDim);
  if (testSamples.length === 0) {
    throw new Error(
      "no usable test samples; pass --test-fpstore with fingerprints for the test corpus",
    );
  }
  console.log(
    `training ${cfg.architecture} on ${trainSamples.length} molecules ` +
    `(hidden=${model.hidden}, latent=${cfg.latentDim}, vocab=${vocab.size})`,
  );
  const result = train(model, trainSamples, testSamples, (s) => {
    console.log(
      `epoch ${s.epoch}: loss=${s.loss.toFixed(4)} klw=${s.klw.toFixed(3)} ` +
      `lr=${s.lr.toExponential(2)} train_acc=${s.trainTokenAcc.toFixed(4)} ` +
      `test_acc=${s.testTokenAcc.toFixed(4)}`,
    );
  });
  saveCheckpoint(outDir, model, {
    bestTestTokenAcc: result.bestTestTokenAcc,
    majorityBaseline: result.majorityBaseline,
    history: result.history,
  });
  console.log(
    `best test token accuracy ${result.bestTestTokenAcc.toFixed(4)} ` +
    `(majority baseline ${result.majorityBaseline.toFixed(4)}); saved to ${outDir}`,
  );
}

function cmdEval(flags: Map<string, string>): void {
  const model = loadCheckpoint(need(flags, "checkpoint"));
  const entries = readCorpus(need(flags, "test"));
  const store = readFingerprintStore(need(flags, "fpstore"));
  const samples = prepareSamples(entries, model.vocab, model.cfg, store, model.fpFoldDim);
  const molbridge = (flags.get("molbridge") ?? "molbridge").split(" ");
  const metrics = evaluate(model, samples, store, molbridge);
  console.log(JSON.stringify(metrics, null, 2));
}

function cmdEncode(flags: Map<string, string>): void {
  const model = loadCheckpoint(need(flags, "checkpoint"));
  if (model.cfg.architecture !== "fpvae") {
    throw new Error("encode currently supports fpvae checkpoints only");
  }
  const store = readFingerprintStore(need(flags, "fpstore"));
  const { foldFingerprint } = dataModule;
  const { Tensor } = tensorModule;
  const out: Record<string, number[]> = {};
  const rng = new Rng(0);
  for (let i = 0; i < store.ids.length; i++) {
    const folded = foldFingerprint(store.bits[i], store.nBits, model.fpFoldDim);
    const x = new Tensor(1, model.fpFoldDim, Float64Array.from(folded));
    const enc = model.encodeFingerprints(x, rng);
    out[store.ids[i]] = Array.from(enc.mu.data);
  }
  const text = JSON.stringify(out, null, 1) + "\n";
  const outPath = flags.get("out");
  if (outPath) fs.writeFileSync(outPath, text);
  else process.stdout.write(text);
}

function cmdServe(flags: Map<string, string>): void {
  const model = loadCheckpoint(need(flags, "checkpoint"));
  const name = flags.get("name");
  if (flags.get("stdio") === "true") {
    serveStdio(model, { name });
    return;
  }
  const port = Number(flags.get("port") ?? "7878");
  serveTcp(model, port, { name });
  console.error(`serving ${model.cfg.architecture} on 127.0.0.1:${port}`);
}

export function main(argv: string[]): number {
  try {
    const { cmd, flags } = parseArgs(argv);
    if (cmd === "train") cmdTrain(flags);
    else if (cmd === "eval") cmdEval(flags);
    else if (cmd === "encode") cmdEncode(flags);
    else if (cmd === "serve") cmdServe(flags);
    else {
      console.error("usage: cli.js <train|eval|encode|serve> [--flags]");
      return 1;
    }
    return 0;
  } catch (err) {
    console.error(String(err));
    return 1;
  }
}

const isMain = process.argv[1] && import.meta.url.endsWith(path.basename(process.argv[1]));
if (isMain) {
  const rc = main(process.argv.slice(2));
  // serve keeps the event loop alive; only exit for one-shot commands
  if (process.argv[2] !== "serve" || rc !== 0) process.exitCode = rc;
}
