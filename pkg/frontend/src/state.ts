/**
 * Pure state helpers for the triage queue and the review form. Rendering
 * reads these; mutations come back from the API only.
 */

import type { DetectionRow, FacilitySubtype, ReviewRequest } from './api';

export type ReviewClass = 'negative' | FacilitySubtype;

export interface QueueItem {
  id: string;
  lat: number;
  lon: number;
  probability: number;
  thumbnailUrl: string;
  status: string;
}

/** Pending detections sorted by descending probability (triage order). */
export const buildQueue = (
  rows: DetectionRow[],
  thumbnailUrl: (id: string) => string,
): QueueItem[] =>
  rows
    .filter((r) => r.status === 'pending')
    .map((r) => ({
      id: r.id,
      lat: r.lat,
      lon: r.lon,
      probability: r.max_probability,
      thumbnailUrl: thumbnailUrl(r.id),
      status: r.status,
    }))
    .sort((a, b) => b.probability - a.probability || a.id.localeCompare(b.id));

/** Drop a reviewed item; the selection moves to the next row (or the new last). */
export const removeFromQueue = (
  queue: QueueItem[],
  id: string,
  selected: number,
): { queue: QueueItem[]; selected: number } => {
  const next = queue.filter((item) => item.id !== id);
  return { queue: next, selected: Math.min(selected, next.length - 1) };
};

export const clampIndex = (index: number, length: number): number =>
  length === 0 ? -1 : Math.max(0, Math.min(index, length - 1));

export interface ReviewFormState {
  selectedClass: ReviewClass | null;
  tankCount: number | null;
  notes: string;
}

export const emptyForm = (): ReviewFormState => ({
  selectedClass: null,
  tankCount: null,
  notes: '',
});

/** Submit needs a class; facility classes additionally need a tank count. */
export const canSubmit = (form: ReviewFormState): boolean => {
  if (form.selectedClass === null) return false;
  if (form.selectedClass === 'negative') return true;
  return form.tankCount !== null && Number.isInteger(form.tankCount) && form.tankCount >= 0;
};

/** Translate the form into the API review action. */
export const toReviewRequest = (form: ReviewFormState, reviewer: string): ReviewRequest => {
  if (!canSubmit(form) || form.selectedClass === null) {
    throw new Error('form is not submittable');
  }
  if (form.selectedClass === 'negative') {
    return { action: 'reject', reviewer };
  }
  return {
    action: 'classify',
    facility_type: form.selectedClass,
    tank_count: form.tankCount ?? undefined,
    reviewer,
  };
};

export const REVIEW_CLASSES: Array<{ key: string; value: ReviewClass; label: string }> = [
  { key: '1', value: 'negative', label: 'Negative' },
  { key: '2', value: 'oil_refinery', label: 'Oil refinery' },
  { key: '3', value: 'crude_oil_terminal', label: 'Crude oil terminal' },
  { key: '4', value: 'lng_terminal', label: 'LNG terminal' },
];

export const classForKey = (key: string): ReviewClass | null =>
  REVIEW_CLASSES.find((c) => c.key === key)?.value ?? null;
