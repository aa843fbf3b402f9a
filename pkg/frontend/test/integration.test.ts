// End-to-end against the real inspection service. The suite generates a
// small dataset with the CLI, starts the server with a bearer token and one
// preference item, then drives the UI the way an annotator would: clicks on
// rendered buttons and key presses, never direct API writes.

import { execFile, spawn, ChildProcess } from 'node:child_process';
import { mkdtempSync, rmSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { promisify } from 'node:util';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import { mountApp, App } from '../src/app.js';

const run = promisify(execFile);

const PORT = 8923;
const BASE = `http://127.0.0.1:${PORT}`;
const TOKEN = 'itest';

let workDir: string;
let server: ChildProcess | null = null;

async function waitFor(cond: () => boolean, what: string, ms = 15000): Promise<void> {
  const start = Date.now();
  while (!cond()) {
    if (Date.now() - start > ms) throw new Error(`timed out waiting for ${what}`);
    await new Promise((r) => setTimeout(r, 25));
  }
}

async function serverReady(): Promise<void> {
  const start = Date.now();
  for (;;) {
    try {
      const response = await fetch(`${BASE}/healthz`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    if (Date.now() - start > 30000) throw new Error('service never became healthy');
    await new Promise((r) => setTimeout(r, 250));
  }
}

function q<T extends HTMLElement>(root: HTMLElement, selector: string): T {
  const node = root.querySelector(selector);
  if (!node) throw new Error(`missing ${selector}`);
  return node as T;
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), 'inspect-ui-'));

  const catalog = [0, 1, 2]
    .map((i) =>
      JSON.stringify({
        image_id: `img${i}`,
        uri: `img://${i}`,
        objects: [`lamp-${i}`, `table-${i}`, `rug-${i}`, `plant-${i}`],
      }),
    )
    .join('\n');
  writeFileSync(join(workDir, 'catalog.jsonl'), catalog + '\n');

  // 3 images x 2 kinds = 6 samples = 6 en-ko tasks for the single annotator
  await run('python3', [
    '-m',
    'vifforge.cli',
    'generate',
    '--catalog',
    join(workDir, 'catalog.jsonl'),
    '--kinds',
    'object,location',
    '--out',
    join(workDir, 'data.jsonl'),
    '--ledger',
    join(workDir, 'ledger.json'),
    '--cost-per-call',
    '0.01',
  ]);

  // samples are tri-lingual, so both pairs need a qualified annotator; the
  // automated session works the en-ko queue and leaves en-zh untouched
  writeFileSync(
    join(workDir, 'annotators.json'),
    JSON.stringify([
      { annotator_id: 'auto', language_pairs: ['en-ko'] },
      { annotator_id: 'wei', language_pairs: ['en-zh'] },
    ]),
  );
  writeFileSync(
    join(workDir, 'items.jsonl'),
    JSON.stringify({
      item_id: 'cmp-0',
      image: 'img0',
      question: 'Which answer describes the image better?',
      answer_a: 'A lamp on a table beside a rug, with a plant in the corner.',
      answer_b: 'Some furniture.',
      model_a: 'secret-model-one',
      model_b: 'secret-model-two',
      word_limit: 60,
    }) + '\n',
  );

  server = spawn(
    'python3',
    [
      '-m',
      'vifforge.cli',
      'inspect',
      'serve',
      '--samples',
      join(workDir, 'data.jsonl'),
      '--annotators',
      join(workDir, 'annotators.json'),
      '--log',
      join(workDir, 'verdicts.log'),
      '--preference',
      join(workDir, 'items.jsonl'),
      '--token',
      TOKEN,
      '--port',
      String(PORT),
    ],
    { stdio: ['ignore', 'pipe', 'pipe'] },
  );
  await serverReady();
});

afterAll(async () => {
  if (server) {
    server.kill('SIGTERM');
    await new Promise((resolve) => server?.once('exit', resolve));
  }
  rmSync(workDir, { recursive: true, force: true });
});

function newSession(annotator: string): { root: HTMLElement; app: App } {
  const root = document.createElement('div');
  document.body.append(root);
  const app = mountApp(root, { annotator, baseUrl: BASE, token: TOKEN });
  return { root, app };
}

describe('ui against the live service', () => {
  it('completes 5 reviews (3 pass, 2 error) and the board reflects them', async () => {
    const { root, app } = newSession('auto');
    await app.show('review');

    for (let i = 0; i < 5; i++) {
      const before = app.review.currentTask()?.task_id;
      expect(before).toBeTruthy();
      if (i < 3) {
        q<HTMLButtonElement>(root, '[data-role=pass]').click();
      } else {
        q<HTMLButtonElement>(root, '[data-role=error]').click();
        const select = q<HTMLSelectElement>(root, '[data-role=reason]');
        select.value = 'cultural_difference';
        select.dispatchEvent(new Event('change'));
      }
      q<HTMLButtonElement>(root, '[data-role=submit]').click();
      await waitFor(
        () => app.review.currentTask()?.task_id !== before,
        `review ${i + 1} to land`,
      );
    }
    expect(app.review.reviewed).toBe(5);

    // the board endpoint is the authority; the view mirrors it
    const client = new ApiClient(BASE, TOKEN);
    const board = await client.board();
    expect(board.review.totals.passed).toBe(3);
    expect(board.review.totals.errored).toBe(2);
    // 6 samples x 2 language pairs; the en-zh half belongs to wei
    expect(board.review.totals.assigned).toBe(12);
    expect(board.review.totals.pending).toBe(7);
    expect(board.review.per_annotator['auto'].pending).toBe(1);

    await app.show('board');
    const totalsRow = q(root, '[data-role=board-totals]');
    const cells = [...totalsRow.querySelectorAll('td')].map((td) => td.textContent);
    expect(cells).toEqual(['total', '12', '3', '2', '7']);
    app.destroy();
  });

  it('three annotators voting A, A, B surface an aggregated a_wins', async () => {
    const votes: [string, string][] = [
      ['e1', '1'],
      ['e2', '1'],
      ['e3', '3'],
    ];
    let lastStatus = '';
    for (const [annotator, key] of votes) {
      const { root, app } = newSession(annotator);
      await app.show('preference');
      document.dispatchEvent(new KeyboardEvent('keydown', { key, bubbles: true }));
      q<HTMLButtonElement>(root, '[data-role=pref-submit]').click();
      await waitFor(
        () => app.preference.lastAck('cmp-0') !== null,
        `${annotator}'s ballot`,
      );
      lastStatus = q(root, '[data-role=pref-status]').textContent ?? '';
      app.destroy();
      root.remove();
    }
    expect(lastStatus).toContain('a_wins');

    const client = new ApiClient(BASE, TOKEN);
    const board = await client.board();
    expect(board.preference.aggregated['cmp-0']).toBe('a_wins');
    expect(board.preference.ballot_counts['cmp-0']).toBe(3);

    const { root, app } = newSession('auto');
    await app.show('board');
    expect(q(root, '[data-role=board-preference]').textContent).toContain('a_wins');
    app.destroy();
  });

  it('keeps model identities out of the wire payload and the DOM', async () => {
    const client = new ApiClient(BASE, TOKEN);
    const items = await client.preferenceItems();
    expect(JSON.stringify(items)).not.toContain('secret-model');

    const { root, app } = newSession('viewer');
    await app.show('preference');
    expect(root.innerHTML).not.toContain('secret-model');
    expect(root.textContent).toContain('Which answer describes the image better?');
    expect(q(root, '[data-role=word-limit]').textContent).toContain('60');
    app.destroy();
  });

  it('reloading reproduces the server view with nothing client-side', async () => {
    // a fresh session sees exactly what the server has: 1 pending task left
    const { root, app } = newSession('auto');
    await app.show('review');
    const remaining = app.review.currentTask();
    expect(remaining).not.toBeNull();
    await app.show('board');
    const totalsRow = q(root, '[data-role=board-totals]');
    const cells = [...totalsRow.querySelectorAll('td')].map((td) => td.textContent);
    expect(cells).toEqual(['total', '12', '3', '2', '7']);
    app.destroy();
  });
});
