import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    environment: "node",
    // The replay suite boots the Python service and drives a full session.
    testTimeout: 120_000,
    hookTimeout: 60_000,
  },
});
