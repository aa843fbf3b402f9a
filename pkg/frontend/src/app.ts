// App shell: three views (review, board, preference) behind a tab bar, one
// keyboard layer for high-throughput work. P/E pick a verdict, 1/2/3 pick a
// ballot choice, Enter submits the active view. Keys are ignored while the
// focus is in a form control so typing a note never fires a shortcut.

import { ApiClient, FetchLike, InspectApi } from './api.js';
import { BoardController } from './board.js';
import { PreferenceController } from './preference.js';
import { ReviewController } from './review.js';

export type ViewName = 'review' | 'board' | 'preference';

export interface AppConfig {
  annotator: string;
  baseUrl?: string;
  token?: string;
  imageBase?: string;
  fetchFn?: FetchLike;
  /** Test seam; defaults to a real ApiClient against baseUrl. */
  api?: InspectApi;
}

export interface App {
  review: ReviewController;
  board: BoardController;
  preference: PreferenceController;
  /** Mounts a view; callers await it before poking at the DOM. */
  show(view: ViewName): Promise<void>;
  activeView(): ViewName;
  destroy(): void;
}

export function mountApp(root: HTMLElement, config: AppConfig): App {
  const api =
    config.api ??
    new ApiClient(config.baseUrl ?? '', config.token ?? '', config.fetchFn);
  const review = new ReviewController(api, {
    annotator: config.annotator,
    imageBase: config.imageBase,
  });
  const board = new BoardController(api);
  const preference = new PreferenceController(api, {
    annotator: config.annotator,
    imageBase: config.imageBase,
  });

  root.textContent = '';
  const header = document.createElement('header');
  const who = document.createElement('span');
  who.className = 'who';
  who.textContent = config.annotator;
  header.append(who);

  const tabs: Record<ViewName, HTMLButtonElement> = {
    review: tabButton('Review'),
    board: tabButton('Board'),
    preference: tabButton('Preference'),
  };
  for (const name of Object.keys(tabs) as ViewName[]) {
    tabs[name].dataset.role = `tab-${name}`;
    tabs[name].addEventListener('click', () => void show(name));
    header.append(tabs[name]);
  }
  const section = document.createElement('main');
  section.dataset.role = 'view';
  root.append(header, section);

  let active: ViewName = 'review';

  async function show(view: ViewName): Promise<void> {
    active = view;
    for (const name of Object.keys(tabs) as ViewName[]) {
      tabs[name].classList.toggle('active', name === view);
    }
    section.textContent = '';
    const mountPoint = document.createElement('div');
    section.append(mountPoint);
    if (view === 'review') await review.mount(mountPoint);
    else if (view === 'board') await board.mount(mountPoint);
    else await preference.mount(mountPoint);
  }

  function onKey(event: KeyboardEvent): void {
    const target = event.target as HTMLElement | null;
    if (target && ['INPUT', 'TEXTAREA', 'SELECT'].includes(target.tagName)) return;
    const key = event.key.toLowerCase();
    if (active === 'review') {
      if (key === 'p') review.choosePass();
      else if (key === 'e') review.chooseError();
      else if (key === 'enter') void review.submit();
    } else if (active === 'preference') {
      if (key === '1') preference.choose('a_wins');
      else if (key === '2') preference.choose('tie');
      else if (key === '3') preference.choose('b_wins');
      else if (key === 'enter') void preference.submit();
    }
  }
  document.addEventListener('keydown', onKey);

  return {
    review,
    board,
    preference,
    show,
    activeView: () => active,
    destroy() {
      document.removeEventListener('keydown', onKey);
      root.textContent = '';
    },
  };
}

function tabButton(label: string): HTMLButtonElement {
  const btn = document.createElement('button');
  btn.className = 'tab';
  btn.textContent = label;
  return btn;
}
