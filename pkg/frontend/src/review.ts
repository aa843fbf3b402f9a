// Review workflow: pull the oldest pending task for the signed-in annotator,
// show the parallel Q/A next to the image, record exactly one verdict, move
// on. Conflict resolution is server-authoritative: a 409 means someone else
// already judged the task, so the view reloads instead of merging anything.

import {
  ApiError,
  InspectApi,
  SampleView,
  TaskRow,
  VerdictSubmission,
} from './api.js';

export type ErrorReason = 'proper_noun_object' | 'cultural_difference' | 'other';

export const ERROR_REASONS: { value: ErrorReason; label: string }[] = [
  { value: 'proper_noun_object', label: 'Proper noun object' },
  { value: 'cultural_difference', label: 'Cultural difference' },
  { value: 'other', label: 'Other (note required)' },
];

export interface ReviewConfig {
  annotator: string;
  /** Prefix for image URLs; when empty the pane shows the image id only. */
  imageBase?: string;
}

export class ReviewController {
  private root: HTMLElement | null = null;
  private task: TaskRow | null = null;
  private sample: SampleView | null = null;
  private choice: 'pass' | 'error' | null = null;
  private reason: ErrorReason | null = null;
  private note = '';
  private submitting = false;
  private notice = '';
  private loadFailed = false;

  // Verdicts that never reached the server, keyed by task so a second
  // attempt on the same task replaces the first instead of piling up.
  private readonly retryQueue = new Map<string, VerdictSubmission>();

  reviewed = 0;

  constructor(
    private readonly api: InspectApi,
    private readonly config: ReviewConfig,
  ) {}

  async mount(root: HTMLElement): Promise<void> {
    this.root = root;
    await this.loadNext();
  }

  currentTask(): TaskRow | null {
    return this.task;
  }

  queuedRetries(): number {
    return this.retryQueue.size;
  }

  async loadNext(): Promise<void> {
    try {
      const rows = await this.api.tasks(this.config.annotator, 'pending');
      this.task = rows.length > 0 ? rows[0] : null;
      this.sample = this.task ? await this.api.sample(this.task.sample_id) : null;
      this.choice = null;
      this.reason = null;
      this.note = '';
      this.loadFailed = false;
      this.notice = '';
    } catch (err) {
      // fetch failed: leave whatever is on screen alone, just add a banner
      this.loadFailed = true;
      this.notice = `could not load tasks: ${errorText(err)}`;
    }
    this.render();
  }

  choosePass(): void {
    if (this.submitting || !this.task) return;
    this.choice = 'pass';
    this.reason = null;
    this.render();
  }

  chooseError(): void {
    if (this.submitting || !this.task) return;
    this.choice = 'error';
    this.render();
  }

  setReason(reason: ErrorReason): void {
    this.reason = reason;
    this.render();
  }

  setNote(note: string): void {
    this.note = note;
  }

  canSubmit(): boolean {
    if (this.submitting || this.task === null || this.choice === null) return false;
    if (this.choice === 'error' && this.reason === null) return false;
    return true;
  }

  async submit(): Promise<void> {
    if (!this.canSubmit() || this.task === null) return;
    const verdict: VerdictSubmission = {
      task_id: this.task.task_id,
      outcome: this.choice as 'pass' | 'error',
    };
    if (this.choice === 'error') {
      verdict.reason = this.reason as string;
      if (this.reason === 'other' && this.note.trim()) verdict.note = this.note.trim();
    }
    this.submitting = true;
    this.render();
    try {
      await this.api.submitVerdict(verdict);
      this.reviewed += 1;
      this.submitting = false;
      await this.loadNext();
    } catch (err) {
      this.submitting = false;
      if (err instanceof ApiError && err.status === 409) {
        await this.loadNext();
        this.notice = 'task was already judged; showing the next one';
        this.render();
      } else if (err instanceof ApiError) {
        this.notice = errorText(err);
        this.render();
      } else {
        this.retryQueue.set(verdict.task_id, verdict);
        this.notice = 'network failure; verdict queued for retry';
        this.render();
      }
    }
  }

  /** Resend queued verdicts. A 409 counts as delivered: the server has one. */
  async flushRetries(): Promise<void> {
    let failure = '';
    for (const [taskId, verdict] of [...this.retryQueue]) {
      try {
        await this.api.submitVerdict(verdict);
        this.retryQueue.delete(taskId);
        this.reviewed += 1;
      } catch (err) {
        if (err instanceof ApiError && err.status === 409) {
          this.retryQueue.delete(taskId);
        } else if (err instanceof ApiError) {
          this.retryQueue.delete(taskId);
          failure = errorText(err);
        }
        // still unreachable: keep it queued
      }
    }
    await this.loadNext();
    if (failure) {
      this.notice = failure;
      this.render();
    }
  }

  render(): void {
    if (!this.root) return;
    const root = this.root;
    root.textContent = '';

    if (this.notice || this.retryQueue.size > 0) {
      const banner = el('div', 'banner');
      banner.dataset.role = 'notice';
      banner.textContent =
        this.retryQueue.size > 0
          ? `${this.notice} (${this.retryQueue.size} queued)`
          : this.notice;
      if (this.retryQueue.size > 0 || this.loadFailed) {
        const retry = el('button', 'retry');
        retry.dataset.role = 'retry';
        retry.textContent = 'Retry';
        retry.addEventListener('click', () => void this.flushRetries());
        banner.append(' ', retry);
      }
      root.append(banner);
    }

    if (this.task === null || this.sample === null) {
      if (!this.loadFailed) {
        const empty = el('p', 'empty');
        empty.dataset.role = 'empty';
        empty.textContent = 'Queue empty. Nothing left to review.';
        root.append(empty);
      }
      return;
    }

    root.append(this.imagePane(), this.qaPane(), this.verdictPane());
  }

  private imagePane(): HTMLElement {
    const sample = this.sample as SampleView;
    const pane = el('div', 'image-pane');
    pane.dataset.role = 'image';
    if (this.config.imageBase) {
      const img = document.createElement('img');
      img.src = `${this.config.imageBase}${sample.image_id}`;
      img.alt = sample.image_id;
      pane.append(img);
    }
    const caption = el('p', 'image-caption');
    caption.textContent = `${sample.image_id} (${sample.kind})`;
    pane.append(caption);
    return pane;
  }

  private qaPane(): HTMLElement {
    const task = this.task as TaskRow;
    const sample = this.sample as SampleView;
    const [first, second] = task.language_pair.split('-');
    const pane = el('div', 'qa-pane');
    pane.dataset.role = 'qa';
    for (const turn of sample.turns) {
      const row = el('div', 'turn');
      for (const lang of [first, second]) {
        const pair = turn.pairs[lang];
        const cell = el('div', 'qa-cell');
        cell.dataset.lang = lang;
        const q = el('p', 'question');
        q.textContent = pair ? pair.question : '(missing)';
        const a = el('p', 'answer');
        a.textContent = pair ? pair.answer : '';
        cell.append(q, a);
        row.append(cell);
      }
      pane.append(row);
    }
    return pane;
  }

  private verdictPane(): HTMLElement {
    const pane = el('div', 'verdict-pane');

    const passBtn = el('button', 'pass');
    passBtn.dataset.role = 'pass';
    passBtn.textContent = 'Pass (P)';
    passBtn.classList.toggle('selected', this.choice === 'pass');
    passBtn.addEventListener('click', () => this.choosePass());

    const errorBtn = el('button', 'error');
    errorBtn.dataset.role = 'error';
    errorBtn.textContent = 'Error (E)';
    errorBtn.classList.toggle('selected', this.choice === 'error');
    errorBtn.addEventListener('click', () => this.chooseError());

    pane.append(passBtn, errorBtn);

    if (this.choice === 'error') {
      const select = document.createElement('select');
      select.dataset.role = 'reason';
      const placeholder = document.createElement('option');
      placeholder.value = '';
      placeholder.textContent = 'Pick a reason';
      select.append(placeholder);
      for (const entry of ERROR_REASONS) {
        const option = document.createElement('option');
        option.value = entry.value;
        option.textContent = entry.label;
        select.append(option);
      }
      select.value = this.reason ?? '';
      select.addEventListener('change', () => {
        if (select.value) this.setReason(select.value as ErrorReason);
      });
      pane.append(select);

      if (this.reason === 'other') {
        const note = document.createElement('textarea');
        note.dataset.role = 'note';
        note.placeholder = 'What went wrong?';
        note.value = this.note;
        note.addEventListener('input', () => this.setNote(note.value));
        pane.append(note);
      }
    }

    const submit = el('button', 'submit');
    submit.dataset.role = 'submit';
    submit.textContent = this.submitting ? 'Submitting...' : 'Submit';
    submit.disabled = !this.canSubmit();
    submit.addEventListener('click', () => void this.submit());
    pane.append(submit);
    return pane;
  }
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  node.className = className;
  return node;
}

function errorText(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}
