import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    // round-trip tests build a corpus and fit a model behind a spawned server
    testTimeout: 30000,
    hookTimeout: 60000,
  },
});
