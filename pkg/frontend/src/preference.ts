// Pairwise preference voting. Items arrive anonymized from the server and
// are re-copied onto a fixed field whitelist before anything touches the
// DOM, so a leaked field upstream still cannot reach the page. One ballot
// per annotator and item; the server rejects duplicates and the UI shows
// the rejection without changing local state.

import { ApiError, BallotAck, InspectApi, PreferenceItemView } from './api.js';

export type Choice = 'a_wins' | 'tie' | 'b_wins';

export const CHOICES: { value: Choice; label: string; key: string }[] = [
  { value: 'a_wins', label: 'A better (1)', key: '1' },
  { value: 'tie', label: 'Tie (2)', key: '2' },
  { value: 'b_wins', label: 'B better (3)', key: '3' },
];

export interface PreferenceConfig {
  annotator: string;
  imageBase?: string;
}

export class PreferenceController {
  private root: HTMLElement | null = null;
  private items: PreferenceItemView[] = [];
  private index = 0;
  private choice: Choice | null = null;
  private submitting = false;
  private notice = '';
  private readonly acks = new Map<string, BallotAck>();

  constructor(
    private readonly api: InspectApi,
    private readonly config: PreferenceConfig,
  ) {}

  async mount(root: HTMLElement): Promise<void> {
    this.root = root;
    const raw = await this.api.preferenceItems();
    this.items = raw.map(sanitizeItem);
    this.index = 0;
    this.render();
  }

  currentItem(): PreferenceItemView | null {
    return this.items[this.index] ?? null;
  }

  lastAck(itemId: string): BallotAck | null {
    return this.acks.get(itemId) ?? null;
  }

  choose(choice: Choice): void {
    const item = this.currentItem();
    if (this.submitting || !item || this.acks.has(item.item_id)) return;
    this.choice = choice;
    this.render();
  }

  move(delta: number): void {
    const next = this.index + delta;
    if (next < 0 || next >= this.items.length) return;
    this.index = next;
    this.choice = null;
    this.notice = '';
    this.render();
  }

  canSubmit(): boolean {
    const item = this.currentItem();
    return (
      !this.submitting &&
      item !== null &&
      this.choice !== null &&
      !this.acks.has(item.item_id)
    );
  }

  async submit(): Promise<void> {
    const item = this.currentItem();
    if (!this.canSubmit() || !item || !this.choice) return;
    this.submitting = true;
    this.render();
    try {
      const ack = await this.api.castBallot(
        item.item_id,
        this.config.annotator,
        this.choice,
      );
      this.acks.set(item.item_id, ack);
      this.notice = '';
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.notice = `ballot rejected: ${err.message}`;
      } else {
        this.notice = err instanceof Error ? err.message : String(err);
      }
    }
    this.submitting = false;
    this.render();
  }

  render(): void {
    if (!this.root) return;
    const root = this.root;
    root.textContent = '';

    if (this.notice) {
      const banner = document.createElement('div');
      banner.className = 'banner';
      banner.dataset.role = 'pref-notice';
      banner.textContent = this.notice;
      root.append(banner);
    }

    const item = this.currentItem();
    if (!item) {
      const empty = document.createElement('p');
      empty.dataset.role = 'pref-empty';
      empty.textContent = 'No comparison items.';
      root.append(empty);
      return;
    }

    const header = document.createElement('p');
    header.className = 'pref-header';
    header.textContent = `${item.item_id} (${this.index + 1} of ${this.items.length})`;
    root.append(header);

    if (item.image && this.config.imageBase) {
      const img = document.createElement('img');
      img.src = `${this.config.imageBase}${item.image}`;
      img.alt = item.image;
      root.append(img);
    }

    const question = document.createElement('p');
    question.className = 'pref-question';
    question.dataset.role = 'pref-question';
    question.textContent = item.question;
    root.append(question);

    if (item.word_limit !== undefined) {
      const limit = document.createElement('p');
      limit.className = 'word-limit';
      limit.dataset.role = 'word-limit';
      limit.textContent = `answers truncated to ${item.word_limit} words`;
      root.append(limit);
    }

    const answers = document.createElement('div');
    answers.className = 'answers';
    for (const [label, text] of [
      ['A', item.answer_a],
      ['B', item.answer_b],
    ] as const) {
      const cell = document.createElement('div');
      cell.className = 'answer-cell';
      cell.dataset.role = `answer-${label.toLowerCase()}`;
      const title = document.createElement('h3');
      title.textContent = label;
      const body = document.createElement('p');
      body.textContent = text;
      cell.append(title, body);
      answers.append(cell);
    }
    root.append(answers);

    const voted = this.acks.get(item.item_id);
    const controls = document.createElement('div');
    controls.className = 'pref-controls';
    for (const entry of CHOICES) {
      const btn = document.createElement('button');
      btn.dataset.role = `choice-${entry.value}`;
      btn.textContent = entry.label;
      btn.classList.toggle('selected', this.choice === entry.value);
      btn.disabled = this.submitting || voted !== undefined;
      btn.addEventListener('click', () => this.choose(entry.value));
      controls.append(btn);
    }
    const submit = document.createElement('button');
    submit.dataset.role = 'pref-submit';
    submit.textContent = this.submitting ? 'Submitting...' : 'Vote';
    submit.disabled = !this.canSubmit();
    submit.addEventListener('click', () => void this.submit());
    controls.append(submit);
    root.append(controls);

    if (voted) {
      const status = document.createElement('p');
      status.dataset.role = 'pref-status';
      status.textContent = voted.aggregated
        ? `recorded (${voted.ballots}/3), aggregated: ${voted.aggregated}`
        : `recorded (${voted.ballots}/3)`;
      root.append(status);
    }

    if (this.items.length > 1) {
      const nav = document.createElement('div');
      nav.className = 'pref-nav';
      const prev = document.createElement('button');
      prev.textContent = 'Prev';
      prev.addEventListener('click', () => this.move(-1));
      const next = document.createElement('button');
      next.textContent = 'Next';
      next.addEventListener('click', () => this.move(1));
      nav.append(prev, next);
      root.append(nav);
    }
  }
}

// Everything the view may render. Unknown keys are dropped here, which is
// what keeps model identities out of the DOM even if a future server change
// starts sending more than it should.
function sanitizeItem(raw: PreferenceItemView): PreferenceItemView {
  const item: PreferenceItemView = {
    item_id: String(raw.item_id),
    image: String(raw.image ?? ''),
    question: String(raw.question),
    answer_a: String(raw.answer_a),
    answer_b: String(raw.answer_b),
  };
  if (raw.word_limit !== undefined && raw.word_limit !== null) {
    item.word_limit = Number(raw.word_limit);
  }
  return item;
}
