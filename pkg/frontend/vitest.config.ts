import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    include: ["tests/**/*.test.ts"],
    testTimeout: 120_000,
    hookTimeout: 180_000,
    unstubGlobals: true,
    // the e2e suite owns a single service process; run files serially
    fileParallelism: false,
  },
});
