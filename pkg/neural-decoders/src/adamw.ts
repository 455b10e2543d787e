import { Tensor } from "./tensor.js";

/** Adam with decoupled weight decay. */
export class AdamW {
  lr: number;
  private t = 0;
  private m: Float64Array[];
  private v: Float64Array[];

  constructor(
    readonly params: Tensor[],
    lr: number,
    readonly weightDecay = 0,
    readonly beta1 = 0.9,
    readonly beta2 = 0.999,
    readonly eps = 1e-8,
  ) {
    this.lr = lr;
    this.m = params.map((p) => new Float64Array(p.size));
    this.v = params.map((p) => new Float64Array(p.size));
  }

  zeroGrad(): void {
    for (const p of this.params) p.zeroGrad();
  }

  step(): void {
    this.t += 1;
    const bc1 = 1 - Math.pow(this.beta1, this.t);
    const bc2 = 1 - Math.pow(this.beta2, this.t);
    for (let k = 0; k < this.params.length; k++) {
      const p = this.params[k];
      if (!p.grad) continue;
      const m = this.m[k], v = this.v[k], g = p.grad, d = p.data;
      for (let i = 0; i < d.length; i++) {
        m[i] = this.beta1 * m[i] + (1 - this.beta1) * g[i];
        v[i] = this.beta2 * v[i] + (1 - this.beta2) * g[i] * g[i];
        const mh = m[i] / bc1;
        const vh = v[i] / bc2;
        d[i] -= this.lr * (mh / (Math.sqrt(vh) + this.eps) + this.weightDecay * d[i]);
      }
    }
  }
}
