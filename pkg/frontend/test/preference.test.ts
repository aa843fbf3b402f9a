import { beforeEach, describe, expect, it } from 'vitest';

import { PreferenceItemView } from '../src/api.js';
import { mountApp } from '../src/app.js';
import { PreferenceController } from '../src/preference.js';
import { FakeApi } from './fake.js';

function q<T extends HTMLElement>(root: HTMLElement, selector: string): T {
  const node = root.querySelector(selector);
  if (!node) throw new Error(`missing ${selector}`);
  return node as T;
}

const LEAKY_ITEM = {
  item_id: 'cmp-0',
  image: 'img0',
  question: 'Which answer fits the image better?',
  answer_a: 'A long and winding description of the scene.',
  answer_b: 'Short one.',
  word_limit: 60,
  // fields a correct server never sends; the client must drop them anyway
  model_a: 'secret-model-one',
  model_b: 'secret-model-two',
} as unknown as PreferenceItemView;

describe('preference voting', () => {
  let api: FakeApi;
  let root: HTMLElement;
  let controller: PreferenceController;

  beforeEach(async () => {
    api = new FakeApi();
    api.items = [LEAKY_ITEM];
    root = document.createElement('div');
    document.body.append(root);
    controller = new PreferenceController(api, { annotator: 'e1' });
    await controller.mount(root);
  });

  it('never lets model identities reach the DOM', () => {
    expect(root.textContent).toContain('A long and winding');
    expect(root.textContent).toContain('Short one.');
    expect(root.innerHTML).not.toContain('secret-model');
    expect(root.innerHTML).not.toContain('model_a');
    // the sanitized copy is what the controller holds, not the raw record
    expect(Object.keys(controller.currentItem() as object).sort()).toEqual([
      'answer_a',
      'answer_b',
      'image',
      'item_id',
      'question',
      'word_limit',
    ]);
  });

  it('shows the word limit indicator only when the item has one', async () => {
    expect(q(root, '[data-role=word-limit]').textContent).toContain('60 words');
    api.items = [{ ...LEAKY_ITEM, word_limit: undefined }];
    await controller.mount(root);
    expect(root.querySelector('[data-role=word-limit]')).toBeNull();
  });

  it('gates the vote button on a choice', () => {
    expect(q<HTMLButtonElement>(root, '[data-role=pref-submit]').disabled).toBe(true);
    q<HTMLButtonElement>(root, '[data-role=choice-a_wins]').click();
    expect(q<HTMLButtonElement>(root, '[data-role=pref-submit]').disabled).toBe(false);
  });

  it('records a ballot and shows the running count', async () => {
    controller.choose('tie');
    await controller.submit();
    expect(q(root, '[data-role=pref-status]').textContent).toContain('1/3');
    // voting again on the same item stays disabled client-side
    expect(q<HTMLButtonElement>(root, '[data-role=pref-submit]').disabled).toBe(true);
  });

  it('surfaces the aggregate once the third ballot lands', async () => {
    await api.castBallot('cmp-0', 'x1', 'a_wins');
    await api.castBallot('cmp-0', 'x2', 'a_wins');
    controller.choose('b_wins');
    await controller.submit();
    const status = q(root, '[data-role=pref-status]').textContent as string;
    expect(status).toContain('3/3');
    expect(status).toContain('a_wins');
  });

  it('shows a rejection notice on a duplicate ballot without changing state', async () => {
    await api.castBallot('cmp-0', 'e1', 'tie');
    controller.choose('a_wins');
    await controller.submit();
    expect(q(root, '[data-role=pref-notice]').textContent).toContain('already voted');
    expect(controller.lastAck('cmp-0')).toBeNull();
    expect(api.ballots.get('cmp-0')?.get('e1')).toBe('tie');
  });
});

describe('keyboard shortcuts', () => {
  let api: FakeApi;
  let root: HTMLElement;

  beforeEach(() => {
    api = new FakeApi();
    api.seedTasks(2, 'minji');
    api.items = [LEAKY_ITEM];
    root = document.createElement('div');
    document.body.append(root);
  });

  function press(key: string): void {
    document.dispatchEvent(new KeyboardEvent('keydown', { key, bubbles: true }));
  }

  it('P and E select a verdict in the review view', async () => {
    const app = mountApp(root, { annotator: 'minji', api });
    await app.show('review');
    press('p');
    expect(q(root, '[data-role=pass]').classList.contains('selected')).toBe(true);
    press('e');
    expect(q(root, '[data-role=error]').classList.contains('selected')).toBe(true);
    app.destroy();
  });

  it('1/2/3 pick a preference choice, Enter submits', async () => {
    const app = mountApp(root, { annotator: 'e9', api });
    await app.show('preference');
    press('3');
    expect(
      q(root, '[data-role=choice-b_wins]').classList.contains('selected'),
    ).toBe(true);
    press('Enter');
    await new Promise((r) => setTimeout(r, 0));
    expect(api.ballots.get('cmp-0')?.get('e9')).toBe('b_wins');
    app.destroy();
  });

  it('ignores shortcuts while typing in a form control', async () => {
    const app = mountApp(root, { annotator: 'minji', api });
    await app.show('review');
    q<HTMLButtonElement>(root, '[data-role=error]').click();
    const select = q<HTMLSelectElement>(root, '[data-role=reason]');
    select.dispatchEvent(
      new KeyboardEvent('keydown', { key: 'p', bubbles: true }),
    );
    expect(q(root, '[data-role=error]').classList.contains('selected')).toBe(true);
    expect(q(root, '[data-role=pass]').classList.contains('selected')).toBe(false);
    app.destroy();
  });
});
