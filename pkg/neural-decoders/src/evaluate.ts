/**
 * Reconstruction metrics for a trained model over a held-out set: token
 * accuracy, exact-molecule accuracy, and mean Tanimoto between the input
 * and reconstruction fingerprints. Fingerprints come from the benchmark
 * toolkit via file interchange (its `fp` command and MFP1 store format),
 * so both sides use one fingerprint definition.
 */

import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { FingerprintStore, readFingerprintStore, tanimotoPacked } from "./data.js";
import { Vae } from "./model.js";
import { Sample, tokenAccuracy } from "./train.js";
import { Rng, Tensor, clearTape, noGrad } from "./tensor.js";

export interface EvalMetrics {
  tokenAccuracy: number;
  moleculeAccuracy: number;
  /** invalid reconstructions count as similarity 0 */
  tanimotoAccuracy: number;
  /** mean over the valid reconstructions only */
  tanimotoValidOnly: number;
  validFraction: number;
}

export function reconstruct(model: Vae, sample: Sample): string {
  return noGrad(() => {
    let mu: Tensor;
    const rng = new Rng(0);
    if (model.cfg.architecture === "fpvae") {
      const x = new Tensor(1, model.fpFoldDim, Float64Array.from(sample.fp!));
      mu = model.encodeFingerprints(x, rng).mu;
    } else {
      mu = model.encodeSequences([sample.ids], rng).mu;
    }
    const out = model.decodeGreedy(mu.data);
    clearTape();
    return out;
  });
}

export function evaluate(
  model: Vae,
  samples: Sample[],
  inputStore: FingerprintStore,
  molbridgeCmd: string[] = ["molbridge"],
  reconstructFn: (model: Vae, sample: Sample) => string = reconstruct,
): EvalMetrics {
  const tokenAcc = tokenAccuracy(model, samples, 64);

  const recon = samples.map((s) => reconstructFn(model, s));
  let exact = 0;
  for (let i = 0; i < samples.length; i++) {
    if (recon[i] === samples[i].smiles) exact += 1;
  }

  // fingerprint the reconstructions through the toolkit (skipping invalid
  // SMILES) and pair them back up by record id
  const work = fs.mkdtempSync(path.join(os.tmpdir(), "nd-eval-"));
  const reconPath = path.join(work, "recon.smi");
  const storePath = path.join(work, "recon.bin");
  fs.writeFileSync(
    reconPath,
    recon.map((smiles, i) => `${smiles}\tR${i}`).join("\n") + "\n",
  );
  execFileSync(molbridgeCmd[0], [
    ...molbridgeCmd.slice(1),
    "fp", reconPath, storePath, "--skip-invalid",
    "--bits", String(inputStore.nBits), "--radius", String(inputStore.radius),
  ]);
  const reconStore = readFingerprintStore(storePath);
  fs.rmSync(work, { recursive: true, force: true });

  const inputByKey = new Map<string, Uint8Array>();
  inputStore.ids.forEach((id, i) => inputByKey.set(id, inputStore.bits[i]));

  const reconById = new Map<string, Uint8Array>();
  reconStore.ids.forEach((id, i) => reconById.set(id, reconStore.bits[i]));

  let simSum = 0;
  let validCount = 0;
  let simValidSum = 0;
  for (let i = 0; i < samples.length; i++) {
    const reconFp = reconById.get(`R${i}`);
    const inputFp = inputByKey.get(samples[i].id) ?? inputByKey.get(samples[i].smiles);
    if (reconFp && inputFp) {
      const sim = tanimotoPacked(inputFp, reconFp);
      simSum += sim;
      simValidSum += sim;
      validCount += 1;
    }
  }
  return {
    tokenAccuracy: tokenAcc,
    moleculeAccuracy: samples.length ? exact / samples.length : 0,
    tanimotoAccuracy: samples.length ? simSum / samples.length : 0,
    tanimotoValidOnly: validCount ? simValidSum / validCount : 0,
    validFraction: samples.length ? validCount / samples.length : 0,
  };
}
