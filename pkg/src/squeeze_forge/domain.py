"""Global model of the stage domains ``Omega_j`` in R^n.

``Omega_j`` is the base ball ``B_{k0}`` (center ``k0 e_n``, radius ``k0``)
together with the lens between the glued graph ``f_j`` and the base sphere
graph ``psi_{k0}`` over the chart ``|x'| < chart_radius``.  The origin is a
boundary point with inward normal ``+e_n``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import GraphStack, sphere_radial
from .errors import InvariantViolation

DEFAULT_CHART = 0.75
DEFAULT_DIM = 4


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray
    label: str = ""

    def layer(self, radius: float, half_width: float, height: float, label: str = "") -> Layer:
        return Layer(self, float(radius), float(half_width), float(height), label)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return self.lo + (self.hi - self.lo) * rng.random((count, self.lo.size))


@dataclass(frozen=True)
class DomainModel:
    stack: GraphStack
    chart_radius: float = DEFAULT_CHART
    n: int = DEFAULT_DIM

    def __post_init__(self):
        if self.n < 2:
            raise InvariantViolation("dimension n must be at least 2")
        if not 0.0 < self.chart_radius <= self.stack.r_max:
            raise InvariantViolation(
                f"chart_radius={self.chart_radius} must lie in (0, r_max={self.stack.r_max}]"
            )

    @property
    def base_k(self) -> int:
        return self.stack.base_k

    @property
    def j(self) -> int:
        return self.stack.top

    def truncated(self, j: int) -> DomainModel:
        return DomainModel(self.stack.truncated(j), self.chart_radius, self.n)

    def chart_problems(self) -> list[str]:
        eps = self.stack.epsilons
        if eps.size and not eps[0] < self.chart_radius:
            return [f"epsilon_{self.base_k}={eps[0]:.6g} must be below chart_radius={self.chart_radius}"]
        return []

    # -- geometry ------------------------------------------------------------

    def _split(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[-1] != self.n:
            raise ValueError(f"points must have {self.n} coordinates, got {x.shape[-1]}")
        xp = x[:, :-1]
        return xp, x[:, -1], np.sqrt(np.sum(xp * xp, axis=1))

    def graph_value(self, r) -> np.ndarray:
        return np.asarray(self.stack.radial(self.j, r).value)

    def ball_slack(self, x) -> np.ndarray:
        """``k0 - |x - k0 e_n|``, written without cancellation near the origin."""
        xp, xn, r = self._split(x)
        k = float(self.base_k)
        q = np.sqrt(r * r + (xn - k) ** 2)
        return (2.0 * k * xn - r * r - xn * xn) / (k + q)

    def lens_slack(self, x) -> np.ndarray:
        """Height above ``f_j`` inside the chart (``-inf`` outside it or above ``psi_{k0}``)."""
        xp, xn, r = self._split(x)
        out = np.full(r.shape, -np.inf)
        inside = r < self.chart_radius
        if np.any(inside):
            ri = r[inside]
            f = self.graph_value(ri)
            top = sphere_radial(self.base_k, ri).value
            s = xn[inside] - f
            s = np.where(xn[inside] <= top, s, -np.inf)
            out[inside] = s
        return out

    def bottom(self, r) -> np.ndarray:
        """Height of the lower boundary over ``|x'| = r`` (``f_j`` on the chart, the base sphere off it)."""
        r = np.asarray(r, dtype=float)
        out = np.asarray(sphere_radial(self.base_k, np.minimum(r, self.base_k)).value, dtype=float).copy()
        inside = r < self.chart_radius
        if np.any(inside):
            out[inside] = np.minimum(out[inside], self.graph_value(r[inside]))
        return out

    def clearance(self, x) -> np.ndarray:
        """Positive inside, with magnitude a (vertical or radial) distance to the boundary."""
        return np.maximum(self.ball_slack(x), self.lens_slack(x))

    def contains(self, x) -> np.ndarray:
        return self.clearance(x) > 0.0

    # -- sampling windows ----------------------------------------------------

    def global_box(self) -> Box:
        k = float(self.base_k)
        lo = np.full(self.n, -k)
        hi = np.full(self.n, k)
        lo[-1] = 0.0
        hi[-1] = 2.0 * k
        return Box(lo, hi, "global")

    def origin_box(self, half_width: float, label: str = "") -> Box:
        """Box ``|x_i| <= w`` over the chart, capped at the height of ``psi_{k0}`` on its rim."""
        w = float(half_width)
        top = float(sphere_radial(self.base_k, min(w, 0.5 * self.base_k)).value)
        lo = np.full(self.n, -w)
        hi = np.full(self.n, w)
        lo[-1] = 0.0
        hi[-1] = top
        return Box(lo, hi, label)

    def seam_box(self, radius: float, half_width: float, label: str = "") -> Box:
        """Box around the point ``radius e_1`` on the base sphere, covering the lens there."""
        w = float(half_width)
        lo = np.full(self.n, -w)
        hi = np.full(self.n, w)
        lo[0] += radius
        hi[0] += radius
        r_far = min(radius + w * np.sqrt(self.n - 1), 0.5 * self.base_k)
        lo[-1] = 0.0
        hi[-1] = float(sphere_radial(self.base_k, r_far).value)
        return Box(lo, hi, label)

    def layer(self, radius: float, half_width: float, height: float, label: str = "") -> Layer:
        return Layer(self, float(radius), float(half_width), float(height), label)

    def sample(self, rng: np.random.Generator, count: int, box: Box | Layer | None = None,
               max_rounds: int = 10_000) -> np.ndarray:
        """``count`` points of ``dom`` drawn from ``box`` (uniform on boxes, by rejection)."""
        box = box or self.global_box()
        out = []
        have = 0
        batch = max(64, 2 * count)
        for _ in range(max_rounds):
            pts = box.sample(rng, batch)
            pts = pts[self.contains(pts)]
            out.append(pts)
            have += len(pts)
            if have >= count:
                break
        else:
            raise RuntimeError(f"rejection sampling stalled in box {box.label!r}")
        return np.concatenate(out)[:count]

    def boundary_point(self, xp) -> tuple[np.ndarray, np.ndarray]:
        """Boundary point over ``x'`` on the glued graph and its inward unit normal."""
        xp = np.asarray(xp, dtype=float)
        jet = self.stack.jet(self.j, xp)
        p = np.append(xp, jet.value)
        nu = np.append(-jet.gradient, 1.0)
        return p, nu / np.linalg.norm(nu)


@dataclass(frozen=True)
class Layer:
    """Thin layer above the lower boundary near the point ``radius e_1``.

    ``x'`` is uniform in a cube of half width ``half_width`` and ``x_n`` lies
    within ``height`` of the boundary.  Boundary defects shallower than the
    sag of a box window are only visible to pairs drawn this close.
    """

    dom: DomainModel
    radius: float
    half_width: float
    height: float
    label: str = ""

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        d = self.dom.n - 1
        xp = self.half_width * (2.0 * rng.random((count, d)) - 1.0)
        xp[:, 0] += self.radius
        r = np.sqrt(np.sum(xp * xp, axis=1))
        xn = self.dom.bottom(r) + self.height * rng.random(count)
        return np.column_stack([xp, xn])
