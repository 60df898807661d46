import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    include: ["tests/**/*.test.ts"],
    exclude: process.env.RUN_LIVE
      ? []
      : ["tests/walkthrough.live.test.ts", "**/node_modules/**"],
    testTimeout: 30000,
  },
});
