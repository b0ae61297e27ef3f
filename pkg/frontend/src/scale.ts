/**
 * Map marker scaling and view projection. Circle AREA tracks the tank count
 * (radius grows with sqrt), so a facility with four times the tanks draws
 * twice the radius.
 */

export const MIN_MARKER_RADIUS = 4;
const RADIUS_PER_SQRT_TANK = 3;

export const markerRadius = (tankCount: number | null): number => {
  if (tankCount === null || tankCount <= 0) return MIN_MARKER_RADIUS;
  return Math.max(MIN_MARKER_RADIUS, RADIUS_PER_SQRT_TANK * Math.sqrt(tankCount));
};

export const typeColor = (facilityType: string): string => {
  switch (facilityType) {
    case 'oil_refinery':
      return '#d9534f';
    case 'crude_oil_terminal':
      return '#f0ad4e';
    case 'lng_terminal':
      return '#5bc0de';
    default:
      return '#777777';
  }
};

export interface ViewBounds {
  minLat: number;
  maxLat: number;
  minLon: number;
  maxLon: number;
}

export const boundsOf = (points: Array<{ lat: number; lon: number }>): ViewBounds => {
  if (points.length === 0) {
    return { minLat: -1, maxLat: 1, minLon: -1, maxLon: 1 };
  }
  const lats = points.map((p) => p.lat);
  const lons = points.map((p) => p.lon);
  const padLat = Math.max(0.01, (Math.max(...lats) - Math.min(...lats)) * 0.1);
  const padLon = Math.max(0.01, (Math.max(...lons) - Math.min(...lons)) * 0.1);
  return {
    minLat: Math.min(...lats) - padLat,
    maxLat: Math.max(...lats) + padLat,
    minLon: Math.min(...lons) - padLon,
    maxLon: Math.max(...lons) + padLon,
  };
};

/** Equirectangular placement into a width x height pixel view (y flipped). */
export const toView = (
  lat: number,
  lon: number,
  bounds: ViewBounds,
  width: number,
  height: number,
): { x: number; y: number } => ({
  x: ((lon - bounds.minLon) / (bounds.maxLon - bounds.minLon)) * width,
  y: height - ((lat - bounds.minLat) / (bounds.maxLat - bounds.minLat)) * height,
});
