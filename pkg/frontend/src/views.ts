/**
 * DOM rendering for the three views. All handlers are injected so the
 * controller in main.ts owns the state; these functions only draw it.
 */

import type { DetectionRow, Table1Report } from './api';
import { boundsOf, markerRadius, toView, typeColor } from './scale';
import { QueueItem, REVIEW_CLASSES, ReviewFormState, canSubmit } from './state';

const el = <K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] => {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
};

export const renderErrorBanner = (
  container: HTMLElement,
  message: string,
  onRetry: () => void,
): void => {
  container.innerHTML = '';
  const banner = el('div', { class: 'banner error', 'data-testid': 'error-banner' });
  banner.append(el('span', {}, message));
  const retry = el('button', { 'data-testid': 'retry' }, 'Retry');
  retry.addEventListener('click', onRetry);
  banner.append(retry);
  container.append(banner);
};

export const renderQueue = (
  container: HTMLElement,
  queue: QueueItem[],
  selected: number,
  onSelect: (index: number) => void,
): void => {
  container.innerHTML = '';
  if (queue.length === 0) {
    container.append(
      el('p', { class: 'empty', 'data-testid': 'queue-empty' }, 'No pending detections.'),
    );
    return;
  }
  const list = el('ul', { class: 'queue', 'data-testid': 'queue-list' });
  queue.forEach((item, index) => {
    const row = el('li', {
      class: index === selected ? 'queue-row selected' : 'queue-row',
      'data-testid': 'queue-row',
      'data-id': item.id,
    });
    row.append(el('img', { src: item.thumbnailUrl, alt: item.id, class: 'thumb' }));
    row.append(el('span', { class: 'queue-id' }, item.id));
    row.append(el('span', { class: 'queue-prob' }, item.probability.toFixed(3)));
    row.addEventListener('click', () => onSelect(index));
    list.append(row);
  });
  container.append(list);
};

export interface DetailCallbacks {
  onClassPick: (value: string) => void;
  onTankCount: (value: number | null) => void;
  onNotes: (value: string) => void;
  onCamToggle: (enabled: boolean) => void;
  onOpacity: (value: number) => void;
  onSubmit: () => void;
}

export interface DetailViewState {
  row: DetectionRow;
  imageUrl: string;
  camUrl: string;
  camAvailable: boolean;
  camShown: boolean;
  camOpacity: number;
  form: ReviewFormState;
}

export const renderDetail = (
  container: HTMLElement,
  state: DetailViewState,
  callbacks: DetailCallbacks,
): void => {
  container.innerHTML = '';
  const { row, form } = state;

  const header = el('div', { class: 'detail-header' });
  header.append(el('h2', {}, row.id));
  header.append(
    el(
      'span',
      { class: 'detail-meta', 'data-testid': 'detail-meta' },
      `p=${row.max_probability.toFixed(3)}  (${row.lat.toFixed(4)}, ${row.lon.toFixed(4)})  ` +
        `${row.tile_count} tile${row.tile_count === 1 ? '' : 's'}`,
    ),
  );
  container.append(header);

  const stage = el('div', { class: 'image-stage' });
  stage.append(el('img', { src: state.imageUrl, class: 'tile-image', 'data-testid': 'tile-image' }));
  if (state.camAvailable && state.camShown) {
    const overlay = el('img', {
      src: state.camUrl,
      class: 'cam-overlay',
      'data-testid': 'cam-overlay',
    });
    overlay.style.opacity = String(state.camOpacity);
    stage.append(overlay);
  }
  container.append(stage);

  const camControls = el('div', { class: 'cam-controls' });
  const toggle = el('input', {
    type: 'checkbox',
    id: 'cam-toggle',
    'data-testid': 'cam-toggle',
  }) as HTMLInputElement;
  toggle.checked = state.camShown;
  if (!state.camAvailable) {
    toggle.disabled = true;
    toggle.title = 'No feature maps available for this detection';
  }
  toggle.addEventListener('change', () => callbacks.onCamToggle(toggle.checked));
  camControls.append(toggle);
  camControls.append(el('label', { for: 'cam-toggle' }, 'Activation overlay'));
  const opacity = el('input', {
    type: 'range', min: '0', max: '1', step: '0.05',
    'data-testid': 'cam-opacity',
  }) as HTMLInputElement;
  opacity.value = String(state.camOpacity);
  opacity.disabled = !(state.camAvailable && state.camShown);
  opacity.addEventListener('input', () => callbacks.onOpacity(Number(opacity.value)));
  camControls.append(opacity);
  container.append(camControls);

  const formBox = el('div', { class: 'review-form', 'data-testid': 'review-form' });
  const classRow = el('div', { class: 'class-buttons' });
  for (const cls of REVIEW_CLASSES) {
    const btn = el(
      'button',
      {
        class: form.selectedClass === cls.value ? 'class-btn active' : 'class-btn',
        'data-testid': `class-${cls.value}`,
      },
      `${cls.label} (${cls.key})`,
    );
    btn.addEventListener('click', () => callbacks.onClassPick(cls.value));
    classRow.append(btn);
  }
  formBox.append(classRow);

  const tankRow = el('div', { class: 'tank-row' });
  tankRow.append(el('label', { for: 'tank-count' }, 'Floating-roof tanks'));
  const tank = el('input', {
    type: 'number', min: '0', step: '1', id: 'tank-count',
    'data-testid': 'tank-count',
  }) as HTMLInputElement;
  tank.value = form.tankCount === null ? '' : String(form.tankCount);
  tank.disabled = form.selectedClass === null || form.selectedClass === 'negative';
  tank.addEventListener('input', () => {
    callbacks.onTankCount(tank.value === '' ? null : Number(tank.value));
  });
  tankRow.append(tank);
  formBox.append(tankRow);

  const notes = el('textarea', {
    placeholder: 'Notes (not submitted)',
    'data-testid': 'notes',
  }) as HTMLTextAreaElement;
  notes.value = form.notes;
  notes.addEventListener('input', () => callbacks.onNotes(notes.value));
  formBox.append(notes);

  const submit = el(
    'button',
    { class: 'submit-btn', 'data-testid': 'submit-review' },
    'Submit review (Enter)',
  ) as HTMLButtonElement;
  submit.disabled = !canSubmit(form);
  submit.addEventListener('click', callbacks.onSubmit);
  formBox.append(submit);
  container.append(formBox);
};

export interface ConfirmedMarker {
  id: string;
  lat: number;
  lon: number;
  facilityType: string;
  tankCount: number | null;
}

const SVG_NS = 'http://www.w3.org/2000/svg';

export const renderMap = (
  container: HTMLElement,
  markers: ConfirmedMarker[],
  onPick: (id: string) => void,
  width = 640,
  height = 420,
): void => {
  container.innerHTML = '';
  if (markers.length === 0) {
    container.append(
      el('p', { class: 'empty', 'data-testid': 'map-empty' }, 'No confirmed facilities yet.'),
    );
    return;
  }
  const svg = document.createElementNS(SVG_NS, 'svg');
  svg.setAttribute('viewBox', `0 0 ${width} ${height}`);
  svg.setAttribute('data-testid', 'map-svg');
  svg.setAttribute('class', 'map-svg');
  const bounds = boundsOf(markers);
  for (const marker of markers) {
    const { x, y } = toView(marker.lat, marker.lon, bounds, width, height);
    const circle = document.createElementNS(SVG_NS, 'circle');
    circle.setAttribute('cx', x.toFixed(1));
    circle.setAttribute('cy', y.toFixed(1));
    circle.setAttribute('r', markerRadius(marker.tankCount).toFixed(2));
    circle.setAttribute('fill', typeColor(marker.facilityType));
    circle.setAttribute('fill-opacity', '0.75');
    circle.setAttribute('data-testid', 'map-marker');
    circle.setAttribute('data-id', marker.id);
    circle.addEventListener('click', () => onPick(marker.id));
    const title = document.createElementNS(SVG_NS, 'title');
    title.textContent = `${marker.id}: ${marker.facilityType}, ${marker.tankCount ?? 0} tanks`;
    circle.append(title);
    svg.append(circle);
  }
  container.append(svg);
};

export const renderStats = (
  container: HTMLElement,
  pending: number,
  table: Table1Report | null,
): void => {
  container.innerHTML = '';
  const box = el('div', { class: 'stats', 'data-testid': 'stats-panel' });
  box.append(el('div', { 'data-testid': 'stat-pending' }, `Pending: ${pending}`));
  if (table === null) {
    box.append(el('div', { class: 'muted' }, 'Benchmark datasets not loaded.'));
  } else {
    for (const [label, key] of [
      ['Refineries', 'oil_refinery'],
      ['Terminals', 'petroleum_terminal'],
    ] as const) {
      const row = table[key];
      box.append(
        el(
          'div',
          { 'data-testid': `stat-${key}` },
          `${label}: ${row.total_detections} confirmed, ` +
            `coverage ${row.coverage_percent}% (${row.covered}/${row.cluster_total}), ` +
            `${row.new_detections} new`,
        ),
      );
    }
  }
  container.append(box);
};
