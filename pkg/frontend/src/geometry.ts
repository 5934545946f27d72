/** Pure geometry helpers shared by the 3D viewer and the tests. */

import { AssemblyDto, OccurrenceDto } from "./api.js";

export interface MeshSpec {
  unit: string;
  /** "box" geometry args (width, height, depth are the extent) or cylinder/sphere radii */
  extent: [number, number, number];
  /** world position of the primitive center */
  center: [number, number, number];
  /** row-major 3x3 rotation */
  rotation: number[][];
}

function matVec(m: number[][], v: number[]): [number, number, number] {
  return [
    m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
    m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
    m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
  ];
}

/** Where the primitive's center sits: translation + R * (aabb-consistent
 * local center). The server AABB already bakes this in, so derive the
 * center from it directly. */
export function meshSpec(occ: OccurrenceDto): MeshSpec {
  const center: [number, number, number] = [
    (occ.aabb.min[0] + occ.aabb.max[0]) / 2,
    (occ.aabb.min[1] + occ.aabb.max[1]) / 2,
    (occ.aabb.min[2] + occ.aabb.max[2]) / 2,
  ];
  return {
    unit: occ.unit,
    extent: [occ.extent[0], occ.extent[1], occ.extent[2]],
    center,
    rotation: occ.frame.rotation,
  };
}

export function assemblyMeshes(assembly: AssemblyDto): MeshSpec[] {
  return assembly.occurrences.map(meshSpec);
}

/** Bounding sphere of the whole assembly, for camera framing. */
export function fitBounds(assembly: AssemblyDto): { center: [number, number, number]; radius: number } {
  if (assembly.occurrences.length === 0) return { center: [0, 0, 0], radius: 1 };
  const lo = [Infinity, Infinity, Infinity];
  const hi = [-Infinity, -Infinity, -Infinity];
  for (const occ of assembly.occurrences) {
    for (let i = 0; i < 3; i++) {
      lo[i] = Math.min(lo[i], occ.aabb.min[i]);
      hi[i] = Math.max(hi[i], occ.aabb.max[i]);
    }
  }
  const center: [number, number, number] = [
    (lo[0] + hi[0]) / 2,
    (lo[1] + hi[1]) / 2,
    (lo[2] + hi[2]) / 2,
  ];
  const radius =
    Math.sqrt((hi[0] - lo[0]) ** 2 + (hi[1] - lo[1]) ** 2 + (hi[2] - lo[2]) ** 2) / 2;
  return { center, radius: Math.max(radius, 1) };
}

/** 4-fold symmetry check used by tests: world positions of same-unit
 * occurrences, rotated into each other around z. */
export function rotationsAroundZ(specs: MeshSpec[], unit: string): number[] {
  return specs
    .filter((s) => s.unit === unit)
    .map((s) => Math.atan2(s.center[1], s.center[0]));
}

export { matVec };
