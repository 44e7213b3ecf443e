"""Arc-length parameterized road centerline built from waypoints.

The centerline is a polyline; curvature at interior vertices comes from the
circumscribed circle of three consecutive points (Menger curvature) and is
interpolated linearly along the arc in between.
"""

from __future__ import annotations

import math

from .errors import SimbusError


class RoadError(SimbusError):
    """Invalid road geometry (too few or duplicate waypoints)."""


class RoadCurve:
    """Polyline centerline supporting lookup by arc length and projection."""

    def __init__(self, waypoints):
        pts = [(float(x), float(y)) for x, y in waypoints]
        if len(pts) < 2:
            raise RoadError(f"need at least 2 waypoints, got {len(pts)}")
        for i in range(1, len(pts)):
            if math.dist(pts[i - 1], pts[i]) < 1e-9:
                raise RoadError(f"duplicate consecutive waypoints at index {i}")
        self.points = pts
        self._seg_len = [math.dist(pts[i], pts[i + 1]) for i in range(len(pts) - 1)]
        self._cum_s = [0.0]
        for length in self._seg_len:
            self._cum_s.append(self._cum_s[-1] + length)
        self.total_length = self._cum_s[-1]
        self._vertex_kappa = self._vertex_curvatures()

    def _vertex_curvatures(self) -> list[float]:
        kappa = [0.0] * len(self.points)
        for i in range(1, len(self.points) - 1):
            kappa[i] = _menger(self.points[i - 1], self.points[i], self.points[i + 1])
        if len(self.points) > 2:
            kappa[0] = kappa[1]
            kappa[-1] = kappa[-2]
        return kappa

    def _segment_index(self, s: float) -> tuple[int, float]:
        """Segment index and distance into it for arc position s (clamped)."""
        s = min(max(s, 0.0), self.total_length)
        lo, hi = 0, len(self._seg_len) - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if self._cum_s[mid + 1] < s:
                lo = mid + 1
            else:
                hi = mid
        return lo, s - self._cum_s[lo]

    def point_at(self, s: float) -> tuple[float, float]:
        i, ds = self._segment_index(s)
        (x0, y0), (x1, y1) = self.points[i], self.points[i + 1]
        f = ds / self._seg_len[i]
        return x0 + f * (x1 - x0), y0 + f * (y1 - y0)

    def tangent_at(self, s: float) -> tuple[float, float]:
        i, _ = self._segment_index(s)
        (x0, y0), (x1, y1) = self.points[i], self.points[i + 1]
        length = self._seg_len[i]
        return (x1 - x0) / length, (y1 - y0) / length

    def curvature_at(self, s: float) -> float:
        i, ds = self._segment_index(s)
        f = ds / self._seg_len[i]
        return (1.0 - f) * self._vertex_kappa[i] + f * self._vertex_kappa[i + 1]

    def max_curvature(self, s0: float, s1: float) -> float:
        """Largest curvature magnitude on [s0, s1] (exact for the polyline model)."""
        s0 = min(max(s0, 0.0), self.total_length)
        s1 = min(max(s1, 0.0), self.total_length)
        if s1 < s0:
            s0, s1 = s1, s0
        peak = max(abs(self.curvature_at(s0)), abs(self.curvature_at(s1)))
        for i, s_vertex in enumerate(self._cum_s):
            if s0 <= s_vertex <= s1:
                peak = max(peak, abs(self._vertex_kappa[i]))
        return peak

    def project(
        self,
        x: float,
        y: float,
        s_hint: float | None = None,
        back: float = 15.0,
        ahead: float = 80.0,
    ) -> tuple[float, float]:
        """Closest point on the centerline -> (arc position, signed lateral offset).

        Positive offset means left of the direction of travel. With ``s_hint``
        the search is restricted to a window around the previous position so a
        vehicle between two nearby antiparallel legs stays on its own leg.
        """
        if s_hint is None:
            first, last = 0, len(self._seg_len) - 1
        else:
            first, _ = self._segment_index(max(s_hint - back, 0.0))
            last, _ = self._segment_index(min(s_hint + ahead, self.total_length))
        n_seg = len(self._seg_len)
        best_d2 = math.inf
        best_i = first
        best_t = 0.0
        for i in range(first, last + 1):
            (x0, y0), (x1, y1) = self.points[i], self.points[i + 1]
            dx, dy = x1 - x0, y1 - y0
            length = self._seg_len[i]
            t = ((x - x0) * dx + (y - y0) * dy) / (length * length)
            t = min(max(t, 0.0), 1.0)
            fx, fy = x0 + t * dx, y0 + t * dy
            d2 = (x - fx) ** 2 + (y - fy) ** 2
            if d2 < best_d2 - 1e-12:
                best_d2, best_i, best_t = d2, i, t

        (x0, y0), (x1, y1) = self.points[best_i], self.points[best_i + 1]
        dx, dy = x1 - x0, y1 - y0
        length = self._seg_len[best_i]
        s = self._cum_s[best_i] + best_t * length
        # beyond the first/last waypoint, measure laterally against the end
        # segment's direction instead of radially from the endpoint
        t_lat = best_t
        if best_i == n_seg - 1 or best_i == 0:
            t_free = ((x - x0) * dx + (y - y0) * dy) / (length * length)
            if (best_i == n_seg - 1 and t_free > 1.0) or (best_i == 0 and t_free < 0.0):
                t_lat = t_free
        fx, fy = x0 + t_lat * dx, y0 + t_lat * dy
        cross = (dx / length) * (y - fy) - (dy / length) * (x - fx)
        lateral = math.copysign(math.hypot(x - fx, y - fy), cross) if cross != 0 else 0.0
        return s, lateral


def _menger(a: tuple[float, float], b: tuple[float, float], c: tuple[float, float]) -> float:
    """Curvature of the circle through three points (0 for collinear)."""
    ab = math.dist(a, b)
    bc = math.dist(b, c)
    ca = math.dist(c, a)
    area2 = abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    if ab * bc * ca == 0:
        return 0.0
    return 2.0 * area2 / (ab * bc * ca)
