"""Geometric realization of rule sequences.

Occurrences carry a rigid frame (3x3 rotation + translation), a resolved
extent (full lengths along local x/y/z), and a volume used as the mass proxy.
Placement composes host frame, symmetry rotation about the host's local z
axis, then the port frame:

    child_frame = host_frame @ Rz(k * 360/symmetry) @ port_frame

Port positions and unit centers are size-normalized, so they scale with the
resolved extent. Collision checks use world-axis-aligned bounding boxes with
a small epsilon absorbing rotation round-off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Grammar, Rule, ShapeUnit, Vec3

# AABB overlap below this penetration (in model units) is treated as touching.
COLLISION_EPS = 1e-9


@dataclass(frozen=True)
class Frame:
    rotation: np.ndarray  # (3,3)
    translation: np.ndarray  # (3,)

    @staticmethod
    def identity() -> "Frame":
        return Frame(np.eye(3), np.zeros(3))

    def compose(self, other: "Frame") -> "Frame":
        return Frame(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def apply(self, point: np.ndarray) -> np.ndarray:
        return self.rotation @ point + self.translation


def euler_deg(angles: Vec3) -> np.ndarray:
    """Rotation matrix for extrinsic XYZ Euler angles in degrees: Rz@Ry@Rx."""
    ax, ay, az = (math.radians(a) for a in angles)
    cx, sx = math.cos(ax), math.sin(ax)
    cy, sy = math.cos(ay), math.sin(ay)
    cz, sz = math.cos(az), math.sin(az)
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return rz @ ry @ rx


def rot_z(degrees: float) -> np.ndarray:
    a = math.radians(degrees)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def resolve_extent(unit: ShapeUnit, size_values: tuple[float, ...]) -> np.ndarray:
    """Full lengths along local x/y/z for the resolved primitive."""
    v = size_values
    if unit.primitive == "cylinder":
        r, h = v
        return np.array([2.0 * r, 2.0 * r, h])
    if unit.primitive == "sphere":
        (r,) = v
        return np.array([2.0 * r, 2.0 * r, 2.0 * r])
    # box, extrusion-profile
    return np.array([v[0], v[1], v[2]])


def primitive_volume(unit: ShapeUnit, size_values: tuple[float, ...]) -> float:
    v = size_values
    if unit.primitive == "cylinder":
        r, h = v
        return math.pi * r * r * h
    if unit.primitive == "sphere":
        (r,) = v
        return 4.0 / 3.0 * math.pi * r**3
    return v[0] * v[1] * v[2]


def default_sizes(unit: ShapeUnit) -> tuple[float, ...]:
    """Size values used when no rule binds them (axiom placement)."""
    return tuple(p.midpoint() for p in unit.size_params)


def bind_sizes(unit: ShapeUnit, rule: Rule, param_values: tuple[float, ...]) -> tuple[float, ...]:
    """Resolve a placed unit's sizes from the rule's bound params (by name).

    Rule params that share a name with a unit size param bind it; unmatched
    size params fall back to their midpoint default.
    """
    bound = {p.name: v for p, v in zip(rule.params, param_values)}
    return tuple(bound.get(p.name, p.midpoint()) for p in unit.size_params)


@dataclass(frozen=True)
class Occurrence:
    unit_name: str
    frame: Frame
    size_values: tuple[float, ...]
    extent: np.ndarray  # (3,)
    center_norm: Vec3
    volume: float

    def world_center(self) -> np.ndarray:
        local = np.asarray(self.center_norm) * self.extent
        return self.frame.apply(local)

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        center = self.world_center()
        half_world = np.abs(self.frame.rotation) @ (self.extent / 2.0)
        return center - half_world, center + half_world

    def port_frame(self, unit: ShapeUnit, port_name: str) -> Frame:
        port = unit.port(port_name)
        offset = np.asarray(port.position) * self.extent
        return Frame(euler_deg(port.orientation), offset)

    def to_dict(self) -> dict:
        lo, hi = self.aabb()
        return {
            "unit": self.unit_name,
            "frame": {
                "rotation": self.frame.rotation.tolist(),
                "translation": self.frame.translation.tolist(),
            },
            "sizeValues": list(self.size_values),
            "extent": self.extent.tolist(),
            "aabb": {"min": lo.tolist(), "max": hi.tolist()},
            "volume": self.volume,
        }


def make_occurrence(unit: ShapeUnit, frame: Frame, size_values: tuple[float, ...]) -> Occurrence:
    return Occurrence(
        unit_name=unit.name,
        frame=frame,
        size_values=size_values,
        extent=resolve_extent(unit, size_values),
        center_norm=unit.center,
        volume=primitive_volume(unit, size_values),
    )


def place_children(
    g: Grammar,
    host: Occurrence,
    rule: Rule,
    param_values: tuple[float, ...],
) -> list[Occurrence]:
    """Occurrences added by one rule application (symmetry replicas in order)."""
    host_unit = g.unit(host.unit_name)
    port_frame = host.port_frame(host_unit, rule.host_port)
    child_unit = g.unit(rule.adds_unit)
    sizes = bind_sizes(child_unit, rule, param_values)
    out = []
    step = 360.0 / rule.symmetry
    for k in range(rule.symmetry):
        sym = Frame(rot_z(k * step), np.zeros(3))
        frame = host.frame.compose(sym).compose(port_frame)
        out.append(make_occurrence(child_unit, frame, sizes))
    return out


def aabbs_overlap(a: Occurrence, b: Occurrence, eps: float = COLLISION_EPS) -> bool:
    alo, ahi = a.aabb()
    blo, bhi = b.aabb()
    return bool(np.all(np.minimum(ahi, bhi) - np.maximum(alo, blo) > eps))


def find_collisions(occurrences: list[Occurrence]) -> list[tuple[int, int]]:
    """Index pairs of overlapping bounding boxes, excluding host contacts.

    Direct host/child contact is expected (a motor sits on its arm), so only
    pairs without an attachment relation count. Attachment is not tracked on
    the occurrence, so the exemption is geometric: boxes that merely touch
    (within eps) never register, and attached parts are constructed adjacent.
    """
    hits = []
    for i in range(len(occurrences)):
        for j in range(i + 1, len(occurrences)):
            if aabbs_overlap(occurrences[i], occurrences[j]):
                hits.append((i, j))
    return hits


@dataclass(frozen=True)
class Assembly:
    """Realized geometry for a design sequence."""

    occurrences: tuple[Occurrence, ...]

    @property
    def total_mass_proxy(self) -> float:
        return sum(o.volume for o in self.occurrences)

    def to_dict(self) -> dict:
        return {
            "occurrences": [o.to_dict() for o in self.occurrences],
            "totalMassProxy": self.total_mass_proxy,
        }


# ---------------------------------------------------------------------------
# triangle mesh export (UI preview)

_CYL_SEGMENTS = 24
_SPHERE_LAT = 8
_SPHERE_LON = 16


def _box_mesh() -> tuple[np.ndarray, list[tuple[int, int, int]]]:
    vs = np.array(
        [[x, y, z] for x in (-0.5, 0.5) for y in (-0.5, 0.5) for z in (-0.5, 0.5)]
    )
    faces = [
        (0, 1, 3), (0, 3, 2), (4, 6, 7), (4, 7, 5),  # x faces
        (0, 4, 5), (0, 5, 1), (2, 3, 7), (2, 7, 6),  # y faces
        (0, 2, 6), (0, 6, 4), (1, 5, 7), (1, 7, 3),  # z faces
    ]
    return vs, faces


def _cylinder_mesh() -> tuple[np.ndarray, list[tuple[int, int, int]]]:
    vs = [np.array([0.0, 0.0, -0.5]), np.array([0.0, 0.0, 0.5])]
    for k in range(_CYL_SEGMENTS):
        a = 2 * math.pi * k / _CYL_SEGMENTS
        x, y = 0.5 * math.cos(a), 0.5 * math.sin(a)
        vs.append(np.array([x, y, -0.5]))
        vs.append(np.array([x, y, 0.5]))
    faces = []
    for k in range(_CYL_SEGMENTS):
        b0 = 2 + 2 * k
        t0 = b0 + 1
        b1 = 2 + 2 * ((k + 1) % _CYL_SEGMENTS)
        t1 = b1 + 1
        faces.append((b0, b1, t1))
        faces.append((b0, t1, t0))
        faces.append((0, b1, b0))
        faces.append((1, t0, t1))
    return np.array(vs), faces


def _sphere_mesh() -> tuple[np.ndarray, list[tuple[int, int, int]]]:
    vs = []
    for i in range(_SPHERE_LAT + 1):
        theta = math.pi * i / _SPHERE_LAT
        for j in range(_SPHERE_LON):
            phi = 2 * math.pi * j / _SPHERE_LON
            vs.append(
                np.array(
                    [
                        0.5 * math.sin(theta) * math.cos(phi),
                        0.5 * math.sin(theta) * math.sin(phi),
                        0.5 * math.cos(theta),
                    ]
                )
            )
    faces = []
    for i in range(_SPHERE_LAT):
        for j in range(_SPHERE_LON):
            a = i * _SPHERE_LON + j
            b = i * _SPHERE_LON + (j + 1) % _SPHERE_LON
            c = (i + 1) * _SPHERE_LON + j
            d = (i + 1) * _SPHERE_LON + (j + 1) % _SPHERE_LON
            if i > 0:
                faces.append((a, b, d))
            if i < _SPHERE_LAT - 1:
                faces.append((a, d, c))
    return np.array(vs), faces


_UNIT_MESHES = {
    "box": _box_mesh(),
    "extrusion-profile": _box_mesh(),
    "cylinder": _cylinder_mesh(),
    "sphere": _sphere_mesh(),
}


def assembly_to_obj(g: Grammar, assembly: Assembly) -> str:
    """Wavefront OBJ text for an assembly (one object per occurrence)."""
    lines = ["# shapeforge assembly export"]
    offset = 1
    for idx, occ in enumerate(assembly.occurrences):
        unit = g.unit(occ.unit_name)
        verts, faces = _UNIT_MESHES[unit.primitive]
        lines.append(f"o {occ.unit_name}_{idx}")
        scaled = verts * occ.extent + np.asarray(occ.center_norm) * occ.extent
        world = scaled @ occ.frame.rotation.T + occ.frame.translation
        for v in world:
            lines.append(f"v {v[0]:.6f} {v[1]:.6f} {v[2]:.6f}")
        for f in faces:
            lines.append(f"f {f[0] + offset} {f[1] + offset} {f[2] + offset}")
        offset += len(verts)
    return "\n".join(lines) + "\n"
