/** Training schedules: sigmoid KL annealing and plateau LR decay. */

/**
 * Variational-loss weight at a given epoch: 0 before the anneal starts,
 * then a sigmoid ramp toward 1. Monotone nondecreasing in the epoch.
 */
export function klWeight(epoch: number, startEpoch: number, steepness = 0.5): number {
  if (epoch < startEpoch) return 0;
  return 1 / (1 + Math.exp(-steepness * (epoch - startEpoch - 5)));
}

/**
 * Multiply the learning rate by `factor` whenever the watched metric has
 * not improved for `patience` consecutive epochs.
 */
export class PlateauScheduler {
  lr: number;
  private best = -Infinity;
  private stale = 0;

  constructor(lr: number, readonly factor = 0.7, readonly patience = 5) {
    this.lr = lr;
  }

  update(metric: number): number {
    if (metric > this.best) {
      this.best = metric;
      this.stale = 0;
    } else {
      this.stale += 1;
      if (this.stale >= this.patience) {
        this.lr *= this.factor;
        this.stale = 0;
      }
    }
    return this.lr;
  }
}
