import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    testTimeout: 120_000,
    hookTimeout: 60_000,
    pool: "forks",
    // training tests are CPU-bound; run files sequentially for stable timing
    fileParallelism: false,
  },
});
