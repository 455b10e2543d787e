/**
 * Decoder wire-protocol peer: newline-delimited JSON over TCP or stdio.
 * First frame out is the handshake {latent_dim, name}; each request
 * {id, z} gets one response {id, ok, smiles?}. Malformed frames produce an
 * error frame and the process stays alive.
 */

import * as net from "node:net";
import * as readline from "node:readline";

import { Vae } from "./model.js";

export interface PeerOptions {
  name?: string;
}

export function handshakeFrame(model: Vae, name?: string): string {
  return JSON.stringify({
    latent_dim: model.cfg.latentDim,
    name: name ?? `${model.cfg.architecture}-toy`,
  });
}

export function handleLine(model: Vae, line: string): string {
  let frame: unknown;
  try {
    frame = JSON.parse(line);
  } catch {
    return JSON.stringify({ error: "malformed frame" });
  }
  const req = frame as { id?: unknown; z?: unknown };
  if (typeof req.id !== "number" || !Array.isArray(req.z)) {
    return JSON.stringify({ error: "malformed frame" });
  }
  if (req.z.length !== model.cfg.latentDim || req.z.some((v) => typeof v !== "number")) {
    return JSON.stringify({ id: req.id, ok: false, error: "dimension mismatch" });
  }
  try {
    const smiles = model.decodeGreedy(Float64Array.from(req.z as number[]));
    if (!smiles) {
      return JSON.stringify({ id: req.id, ok: false });
    }
    return JSON.stringify({ id: req.id, ok: true, smiles });
  } catch (err) {
    return JSON.stringify({ id: req.id, ok: false, error: String(err) });
  }
}

export function serveTcp(model: Vae, port: number, opts: PeerOptions = {}): net.Server {
  const server = net.createServer((socket) => {
    socket.write(handshakeFrame(model, opts.name) + "\n");
    const rl = readline.createInterface({ input: socket });
    rl.on("line", (line) => {
      if (line.trim().length === 0) return;
      socket.write(handleLine(model, line) + "\n");
    });
    socket.on("error", () => rl.close());
  });
  server.listen(port);
  return server;
}

export function serveStdio(model: Vae, opts: PeerOptions = {}): void {
  process.stdout.write(handshakeFrame(model, opts.name) + "\n");
  const rl = readline.createInterface({ input: process.stdin });
  rl.on("line", (line) => {
    if (line.trim().length === 0) return;
    process.stdout.write(handleLine(model, line) + "\n");
  });
}
