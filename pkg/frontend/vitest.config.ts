import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    // the end-to-end suite spawns the engine server and builds real rigs
    testTimeout: 60000,
    hookTimeout: 60000,
  },
});
