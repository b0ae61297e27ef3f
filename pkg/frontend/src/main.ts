/**
 * Controller wiring the queue, detail, and map views to the API. Keyboard
 * first: j/k or arrows walk the queue, 1-4 pick a class, Enter submits.
 */

import { ApiClient, DetectionRow, Table1Report } from './api';
import {
  QueueItem,
  ReviewFormState,
  buildQueue,
  canSubmit,
  classForKey,
  clampIndex,
  emptyForm,
  removeFromQueue,
  toReviewRequest,
} from './state';
import {
  ConfirmedMarker,
  renderDetail,
  renderErrorBanner,
  renderMap,
  renderQueue,
  renderStats,
} from './views';

export class App {
  private queue: QueueItem[] = [];
  private selected = -1;
  private rows = new Map<string, DetectionRow>();
  private form: ReviewFormState = emptyForm();
  private camAvailable = false;
  private camShown = false;
  private camOpacity = 0.5;
  private table: Table1Report | null = null;
  private pendingCount = 0;
  private view: 'queue' | 'map' = 'queue';
  private markers: ConfirmedMarker[] = [];

  constructor(
    private readonly api: ApiClient,
    private readonly root: HTMLElement,
    private readonly reviewer: string = 'reviewer',
  ) {}

  async start(): Promise<void> {
    this.root.innerHTML = `
      <header class="topbar">
        <h1>Detection review</h1>
        <nav>
          <button data-testid="tab-queue">Queue</button>
          <button data-testid="tab-map">Map</button>
        </nav>
        <div id="stats"></div>
      </header>
      <div id="banner"></div>
      <main class="layout">
        <aside id="queue"></aside>
        <section id="detail"></section>
        <section id="map" hidden></section>
      </main>`;
    this.root
      .querySelector('[data-testid="tab-queue"]')!
      .addEventListener('click', () => this.switchView('queue'));
    this.root
      .querySelector('[data-testid="tab-map"]')!
      .addEventListener('click', () => this.switchView('map'));
    document.addEventListener('keydown', (event) => this.onKey(event));
    await this.reload();
  }

  private zone(id: string): HTMLElement {
    return this.root.querySelector(`#${id}`) as HTMLElement;
  }

  async reload(): Promise<void> {
    this.zone('banner').innerHTML = '';
    try {
      const page = await this.api.listDetections({ page_size: 500 });
      for (const row of page.items) this.rows.set(row.id, row);
      this.queue = buildQueue(page.items, (id) => this.api.imageUrl(id));
      const counts = await this.api.statusCounts();
      this.pendingCount = counts.pending;
      this.table = await this.api.table1();
      await this.refreshMarkers();
      await this.select(clampIndex(this.selected, this.queue.length));
    } catch (err) {
      renderErrorBanner(
        this.zone('banner'),
        `API unreachable: ${err instanceof Error ? err.message : String(err)}`,
        () => void this.reload(),
      );
    }
  }

  private async refreshMarkers(): Promise<void> {
    const doc = await this.api.confirmedGeojson();
    this.markers = doc.features.map((f) => ({
      id: f.properties.id,
      lon: f.geometry.coordinates[0],
      lat: f.geometry.coordinates[1],
      facilityType: f.properties.facility_type,
      tankCount: f.properties.tank_count,
    }));
  }

  private currentItem(): QueueItem | null {
    return this.selected >= 0 && this.selected < this.queue.length
      ? this.queue[this.selected]
      : null;
  }

  private async renderAll(): Promise<void> {
    renderStats(this.zone('stats'), this.pendingCount, this.table);
    renderQueue(this.zone('queue'), this.queue, this.selected, (index) => {
      void this.select(index);
    });
    this.zone('map').hidden = this.view !== 'map';
    this.zone('detail').hidden = this.view !== 'queue';
    if (this.view === 'map') {
      renderMap(this.zone('map'), this.markers, (id) => void this.openById(id));
      return;
    }
    const item = this.currentItem();
    if (item === null) {
      this.zone('detail').innerHTML =
        '<p class="empty" data-testid="detail-empty">Select a detection.</p>';
      return;
    }
    const row = this.rows.get(item.id);
    if (row === undefined) return;
    renderDetail(
      this.zone('detail'),
      {
        row,
        imageUrl: this.api.imageUrl(row.id),
        camUrl: this.api.camUrl(row.id),
        camAvailable: this.camAvailable,
        camShown: this.camShown,
        camOpacity: this.camOpacity,
        form: this.form,
      },
      {
        onClassPick: (value) => {
          this.form = { ...this.form, selectedClass: value as ReviewFormState['selectedClass'] };
          void this.renderAll();
        },
        onTankCount: (value) => {
          this.form = { ...this.form, tankCount: value };
          void this.renderAll();
        },
        onNotes: (value) => {
          this.form = { ...this.form, notes: value };
        },
        onCamToggle: (enabled) => {
          this.camShown = enabled;
          void this.renderAll();
        },
        onOpacity: (value) => {
          this.camOpacity = value;
          void this.renderAll();
        },
        onSubmit: () => void this.submitReview(),
      },
    );
  }

  async select(index: number): Promise<void> {
    this.selected = clampIndex(index, this.queue.length);
    this.form = emptyForm();
    this.camShown = false;
    const item = this.currentItem();
    this.camAvailable = item !== null ? await this.api.camAvailable(item.id) : false;
    await this.renderAll();
  }

  async openById(id: string): Promise<void> {
    const index = this.queue.findIndex((item) => item.id === id);
    if (index >= 0) {
      this.view = 'queue';
      await this.select(index);
    }
  }

  async submitReview(): Promise<void> {
    const item = this.currentItem();
    if (item === null || !canSubmit(this.form)) return;
    try {
      const updated = await this.api.review(item.id, toReviewRequest(this.form, this.reviewer));
      this.rows.set(updated.id, updated);
      const { queue, selected } = removeFromQueue(this.queue, item.id, this.selected);
      this.queue = queue;
      this.selected = selected;
      this.form = emptyForm();
      this.pendingCount = Math.max(0, this.pendingCount - 1);
      // server-derived panels refresh from the API, never locally
      const counts = await this.api.statusCounts();
      this.pendingCount = counts.pending;
      this.table = await this.api.table1();
      await this.refreshMarkers();
      const next = this.currentItem();
      this.camAvailable = next !== null ? await this.api.camAvailable(next.id) : false;
      this.camShown = false;
      await this.renderAll();
    } catch (err) {
      renderErrorBanner(
        this.zone('banner'),
        `Review failed: ${err instanceof Error ? err.message : String(err)}`,
        () => void this.reload(),
      );
    }
  }

  switchView(view: 'queue' | 'map'): void {
    this.view = view;
    void this.renderAll();
  }

  private onKey(event: KeyboardEvent): void {
    if (event.target instanceof HTMLInputElement || event.target instanceof HTMLTextAreaElement) {
      if (event.key !== 'Enter') return;
    }
    if (this.view !== 'queue') return;
    if (event.key === 'j' || event.key === 'ArrowDown') {
      void this.select(this.selected + 1);
    } else if (event.key === 'k' || event.key === 'ArrowUp') {
      void this.select(this.selected - 1);
    } else if (event.key === 'Enter') {
      void this.submitReview();
    } else {
      const cls = classForKey(event.key);
      if (cls !== null) {
        this.form = { ...this.form, selectedClass: cls };
        void this.renderAll();
      }
    }
  }
}

export const mount = (root: HTMLElement, baseUrl = ''): App => {
  const app = new App(new ApiClient(baseUrl), root);
  void app.start();
  return app;
};

if (typeof document !== 'undefined' && document.getElementById('app') !== null) {
  mount(document.getElementById('app') as HTMLElement);
}
