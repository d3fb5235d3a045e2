"""Simplified image-method ray tracer over an extruded building scene.

Buildings are vertical prisms: each footprint edge becomes a wall rectangle
from ground level to the building height.  The tracer returns the line-of-
sight path when unobstructed plus specular reflection paths off walls, found
by mirroring the transmitter across wall planes (one or two bounces).  All
geometry is 2.5D: intersections are computed in the xy plane and the height
coordinate is interpolated along the ray.

Diffraction, scattering and material-dependent reflection are not modelled;
every bounce costs a fixed configurable loss.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .channels import SPEED_OF_LIGHT, PathSet, RayPath, friis_amplitude
from .grids import GridConfig

_EPS = 1e-9


@dataclass(frozen=True)
class Scene:
    """Static propagation environment."""

    buildings: tuple          # ((footprint xy tuples), height) pairs
    bs_position: tuple        # (x, y, z) metres
    ue_region: dict           # {"min": [x, y], "max": [x, y], "height": z}
    reflection_loss_db: float = 6.0
    max_bounces: int = 1

    def __post_init__(self):
        object.__setattr__(self, "bs_position", tuple(float(v) for v in self.bs_position))
        bl = []
        for footprint, height in self.buildings:
            poly = tuple((float(x), float(y)) for x, y in footprint)
            if len(poly) < 3:
                raise ValueError("building footprint needs at least 3 vertices")
            if _polygon_self_intersects(poly):
                raise ValueError("building footprint polygon self-intersects")
            if height <= 0:
                raise ValueError(f"building height must be positive, got {height}")
            bl.append((poly, float(height)))
        object.__setattr__(self, "buildings", tuple(bl))
        if self.max_bounces not in (0, 1, 2):
            raise ValueError(f"max_bounces must be 0, 1 or 2, got {self.max_bounces}")
        if point_in_any_building(self, self.bs_position):
            raise ValueError("bs_position lies inside a building")

    def walls(self):
        """All wall segments as ((x1, y1), (x2, y2), height) triples."""
        out = []
        for poly, height in self.buildings:
            n = len(poly)
            for i in range(n):
                out.append((poly[i], poly[(i + 1) % n], height))
        return out


def scene_from_dict(doc: dict) -> Scene:
    buildings = [(b["polygon"], b["height"]) for b in doc.get("buildings", [])]
    return Scene(
        buildings=tuple((tuple(map(tuple, poly)), h) for poly, h in buildings),
        bs_position=tuple(doc["bs_position"]),
        ue_region=dict(doc["ue_region"]),
        reflection_loss_db=float(doc.get("reflection_loss_db", 6.0)),
        max_bounces=int(doc.get("max_bounces", 1)),
    )


def load_scene(path) -> Scene:
    with open(path, "r", encoding="utf-8") as fh:
        return scene_from_dict(json.load(fh))


def _segments_cross(p1, p2, q1, q2):
    """Proper 2D segment intersection; returns param t along p1->p2 or None."""
    rx, ry = p2[0] - p1[0], p2[1] - p1[1]
    sx, sy = q2[0] - q1[0], q2[1] - q1[1]
    den = rx * sy - ry * sx
    if abs(den) < _EPS:
        return None  # parallel or degenerate: grazing contact is not a hit
    qpx, qpy = q1[0] - p1[0], q1[1] - p1[1]
    t = (qpx * sy - qpy * sx) / den
    u = (qpx * ry - qpy * rx) / den
    if -_EPS < t < 1.0 + _EPS and -_EPS < u < 1.0 + _EPS:
        return t
    return None


def _polygon_self_intersects(poly):
    n = len(poly)
    for i in range(n):
        a1, a2 = poly[i], poly[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue  # shared vertices
            if _segments_cross(a1, a2, poly[j], poly[(j + 1) % n]) is not None:
                return True
    return False


def _point_in_polygon(poly, x, y):
    inside = False
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xt = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xt:
                inside = not inside
    return inside


def point_in_any_building(scene: Scene, point) -> bool:
    x, y, z = point
    for poly, height in scene.buildings:
        if z <= height and _point_in_polygon(poly, x, y):
            return True
    return False


def _segment_blocked(scene, a, b, skip=()):
    """True when the 3D segment a->b pierces any wall rectangle.

    ``skip`` lists wall indices to ignore (the reflecting walls themselves,
    whose contact points would otherwise self-occlude the path).
    """
    walls = scene.walls()
    for idx, (w1, w2, height) in enumerate(walls):
        if idx in skip:
            continue
        t = _segments_cross(a[:2], b[:2], w1, w2)
        if t is None:
            continue
        if t < 1e-6 or t > 1.0 - 1e-6:
            continue  # endpoint contact (e.g. a reflection point on a wall)
        z = a[2] + t * (b[2] - a[2])
        if z <= height + _EPS:
            return True
    return False


def _mirror_point(point, w1, w2):
    """Mirror (x, y, z) across the vertical plane through wall w1-w2."""
    px, py = point[0], point[1]
    ax, ay = w1
    dx, dy = w2[0] - ax, w2[1] - ay
    norm2 = dx * dx + dy * dy
    t = ((px - ax) * dx + (py - ay) * dy) / norm2
    fx, fy = ax + t * dx, ay + t * dy
    return (2 * fx - px, 2 * fy - py, point[2])


def _reflection_point(image, target, w1, w2, height):
    """Where the image->target segment meets the wall, or None."""
    rx, ry = target[0] - image[0], target[1] - image[1]
    sx, sy = w2[0] - w1[0], w2[1] - w1[1]
    den = rx * sy - ry * sx
    if abs(den) < _EPS:
        return None
    qpx, qpy = w1[0] - image[0], w1[1] - image[1]
    t = (qpx * sy - qpy * sx) / den
    u = (qpx * ry - qpy * rx) / den
    if not (1e-9 < t < 1.0 - 1e-9 and 1e-9 < u < 1.0 - 1e-9):
        return None
    z = image[2] + t * (target[2] - image[2])
    if z < 0.0 or z > height:
        return None
    return (image[0] + t * rx, image[1] + t * ry, z)


def _dist(a, b):
    return math.dist(a, b)


def _angles(src, dst):
    """(azimuth, elevation) of the direction src -> dst."""
    dx, dy, dz = dst[0] - src[0], dst[1] - src[1], dst[2] - src[2]
    return math.atan2(dy, dx), math.atan2(dz, math.hypot(dx, dy))


def _make_path(scene, grid, length, bounces, first_point, last_point, bs, ue):
    amp = friis_amplitude(length, grid.carrier_hz)
    amp *= 10.0 ** (-bounces * scene.reflection_loss_db / 20.0)
    phase = (-2.0 * np.pi * grid.carrier_hz * length / SPEED_OF_LIGHT) % (2.0 * np.pi)
    aod_az, aod_el = _angles(bs, first_point)
    aoa_az, aoa_el = _angles(ue, last_point)
    return RayPath(amplitude=amp, phase=phase, delay_s=length / SPEED_OF_LIGHT,
                   doppler_hz=0.0, aoa_az=aoa_az, aoa_el=aoa_el,
                   aod_az=aod_az, aod_el=aod_el)


def trace_paths(scene: Scene, ue_position, grid: GridConfig) -> PathSet:
    """LOS plus up to two specular wall bounces from BS to the UE position."""
    ue = tuple(float(v) for v in ue_position)
    if point_in_any_building(scene, ue):
        raise ValueError(f"UE position {ue} lies inside a building")
    bs = scene.bs_position
    walls = scene.walls()
    paths = []

    if not _segment_blocked(scene, bs, ue):
        length = _dist(bs, ue)
        paths.append(_make_path(scene, grid, length, 0, ue, bs, bs, ue))

    if scene.max_bounces >= 1:
        for i, (w1, w2, height) in enumerate(walls):
            image = _mirror_point(bs, w1, w2)
            refl = _reflection_point(image, ue, w1, w2, height)
            if refl is None:
                continue
            if _same_side(bs, ue, w1, w2):
                if _segment_blocked(scene, bs, refl, skip=(i,)) or \
                   _segment_blocked(scene, refl, ue, skip=(i,)):
                    continue
                length = _dist(image, ue)
                paths.append(_make_path(scene, grid, length, 1, refl, bs, bs, ue))

    if scene.max_bounces >= 2:
        for i, (w1a, w2a, ha) in enumerate(walls):
            image1 = _mirror_point(bs, w1a, w2a)
            for j, (w1b, w2b, hb) in enumerate(walls):
                if j == i:
                    continue
                image2 = _mirror_point(image1, w1b, w2b)
                r2 = _reflection_point(image2, ue, w1b, w2b, hb)
                if r2 is None:
                    continue
                r1 = _reflection_point(image1, r2, w1a, w2a, ha)
                if r1 is None:
                    continue
                if not (_same_side(bs, r2, w1a, w2a) and _same_side(r1, ue, w1b, w2b)):
                    continue
                if _segment_blocked(scene, bs, r1, skip=(i,)) or \
                   _segment_blocked(scene, r1, r2, skip=(i, j)) or \
                   _segment_blocked(scene, r2, ue, skip=(j,)):
                    continue
                length = _dist(image2, ue)
                paths.append(_make_path(scene, grid, length, 2, r1, bs, bs, ue))

    paths.sort(key=lambda p: p.delay_s)
    return PathSet(paths=paths, ue_position=ue)


def _same_side(a, b, w1, w2):
    nx, ny = w2[1] - w1[1], w1[0] - w2[0]
    sa = nx * (a[0] - w1[0]) + ny * (a[1] - w1[1])
    sb = nx * (b[0] - w1[0]) + ny * (b[1] - w1[1])
    return sa * sb > _EPS


def sample_ue_position(scene: Scene, rng) -> tuple:
    """Uniform draw over the UE rectangle, rejecting points inside buildings."""
    lo = scene.ue_region["min"]
    hi = scene.ue_region["max"]
    z = float(scene.ue_region["height"])
    for _ in range(200):
        x = rng.uniform(lo[0], hi[0])
        y = rng.uniform(lo[1], hi[1])
        if not point_in_any_building(scene, (x, y, z)):
            return (float(x), float(y), z)
    raise RuntimeError("could not place a UE outside buildings after 200 draws")
