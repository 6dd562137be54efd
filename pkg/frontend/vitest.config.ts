import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    // e2e specs boot the real session service; give them room
    testTimeout: 30_000,
    hookTimeout: 60_000,
    fileParallelism: false,
  },
});
