import { defineConfig } from 'vitest/config';

export default defineConfig({
  // assets are served by the review service under /ui
  base: './',
  build: {
    outDir: 'dist',
    emptyOutDir: true,
  },
  test: {
    environment: 'happy-dom',
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
