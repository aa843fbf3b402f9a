// Worker status board. Every number on screen comes straight from GET /board;
// the progress bar width is the same data drawn as a percentage, nothing is
// recomputed client-side.

import { BoardData, InspectApi } from './api.js';

export class BoardController {
  private root: HTMLElement | null = null;
  private data: BoardData | null = null;

  constructor(private readonly api: InspectApi) {}

  async mount(root: HTMLElement): Promise<void> {
    this.root = root;
    await this.refresh();
  }

  async refresh(): Promise<void> {
    this.data = await this.api.board();
    this.render();
  }

  render(): void {
    if (!this.root) return;
    const root = this.root;
    root.textContent = '';
    if (!this.data) return;
    const { review, preference } = this.data;

    const table = document.createElement('table');
    table.dataset.role = 'board-table';
    const head = document.createElement('tr');
    for (const label of ['annotator', 'assigned', 'passed', 'errored', 'pending']) {
      const th = document.createElement('th');
      th.textContent = label;
      head.append(th);
    }
    table.append(head);
    const names = Object.keys(review.per_annotator).sort();
    for (const name of names) {
      table.append(statsRow(name, review.per_annotator[name]));
    }
    const totalsRow = statsRow('total', review.totals);
    totalsRow.dataset.role = 'board-totals';
    table.append(totalsRow);
    root.append(table);

    const bar = document.createElement('div');
    bar.className = 'progress';
    bar.dataset.role = 'progress';
    const fill = document.createElement('div');
    fill.className = 'progress-fill';
    const done = review.totals.assigned - review.totals.pending;
    const percent =
      review.totals.assigned > 0 ? (100 * done) / review.totals.assigned : 0;
    fill.style.width = `${percent.toFixed(1)}%`;
    bar.title = `${done} of ${review.totals.assigned} reviewed`;
    bar.append(fill);
    root.append(bar);

    const prefList = document.createElement('ul');
    prefList.dataset.role = 'board-preference';
    const itemIds = Object.keys(preference.ballot_counts).sort();
    for (const itemId of itemIds) {
      const li = document.createElement('li');
      const aggregated = preference.aggregated[itemId];
      li.textContent = aggregated
        ? `${itemId}: ${preference.ballot_counts[itemId]}/3 ballots, ${aggregated}`
        : `${itemId}: ${preference.ballot_counts[itemId]}/3 ballots`;
      prefList.append(li);
    }
    if (itemIds.length === 0) {
      const li = document.createElement('li');
      li.textContent = 'no ballots yet';
      prefList.append(li);
    }
    root.append(prefList);
  }
}

function statsRow(
  name: string,
  row: { assigned: number; passed: number; errored: number; pending: number },
): HTMLTableRowElement {
  const tr = document.createElement('tr');
  const cells = [name, row.assigned, row.passed, row.errored, row.pending];
  for (const value of cells) {
    const td = document.createElement('td');
    td.textContent = String(value);
    tr.append(td);
  }
  return tr;
}
