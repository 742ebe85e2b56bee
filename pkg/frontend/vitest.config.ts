import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    include: ["tests/**/*.test.ts"],
    // the end-to-end file boots the portal service before it can assert
    testTimeout: 30000,
    hookTimeout: 30000,
  },
});
