import { describe, expect, it } from "vitest";

import { klWeight, PlateauScheduler } from "../src/schedule.js";

describe("KL annealing schedule", () => {
  it("is zero before the start epoch", () => {
    for (let e = 0; e < 20; e++) expect(klWeight(e, 20)).toBe(0);
  });

  it("is monotone nondecreasing", () => {
    let prev = -1;
    for (let e = 0; e < 200; e++) {
      const w = klWeight(e, 20);
      expect(w).toBeGreaterThanOrEqual(prev);
      prev = w;
    }
  });

  it("is sigmoidal: approaches 1 asymptotically", () => {
    expect(klWeight(200, 20)).toBeGreaterThan(0.999);
    expect(klWeight(200, 20)).toBeLessThanOrEqual(1);
  });
});

describe("plateau learning-rate scheduler", () => {
  it("keeps the rate while the metric improves", () => {
    const sched = new PlateauScheduler(1e-3, 0.7, 5);
    for (const metric of [0.1, 0.2, 0.3, 0.4]) {
      expect(sched.update(metric)).toBeCloseTo(1e-3, 12);
    }
  });

  it("decays by the factor after the patience window", () => {
    const sched = new PlateauScheduler(1e-3, 0.7, 5);
    sched.update(0.5);
    for (let i = 0; i < 4; i++) expect(sched.update(0.4)).toBeCloseTo(1e-3, 12);
    expect(sched.update(0.4)).toBeCloseTo(7e-4, 12);
    // counter resets after a decay
    for (let i = 0; i < 4; i++) expect(sched.update(0.4)).toBeCloseTo(7e-4, 12);
    expect(sched.update(0.4)).toBeCloseTo(4.9e-4, 12);
  });
});
