import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    environment: 'jsdom',
    // the integration file owns a live server and a fixed port
    fileParallelism: false,
    testTimeout: 60000,
    hookTimeout: 120000,
  },
});
