"""Normal and principal curvatures of graphs ``x_n = g(x')``.

For the defining function ``rho = g(x') - x_n`` the normal curvature in the
tangent direction lifted from ``v`` is

    kappa(v) = v^T H v / (|grad rho| * (|v|^2 + (grad g . v)^2)),

with ``|grad rho| = sqrt(1 + |grad g|^2)``.  Its extremes over ``v`` are the
eigenvalues of the pencil ``(H, I + grad g grad g^T)`` divided by ``|grad rho|``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DegenerateVectorError
from .graphs import Jet2, Radial, glue_radial, sphere_radial, Cutoff, GraphStack
from .reports import CheckReport

Profile = Callable[[np.ndarray], Radial]


@dataclass(frozen=True)
class TangentVector:
    v: np.ndarray
    lift: float

    @classmethod
    def from_jet(cls, jet: Jet2, v) -> TangentVector:
        v = np.asarray(v, dtype=float)
        return cls(v, float(jet.gradient @ v))

    @property
    def ambient(self) -> np.ndarray:
        return np.append(self.v, self.lift)


@dataclass(frozen=True)
class CurvatureRange:
    kappa_min: float
    kappa_max: float
    argmin_point: np.ndarray
    argmin_direction: np.ndarray
    argmax_point: np.ndarray
    argmax_direction: np.ndarray

    def inside(self, lo: float, hi: float, margin: float = 0.0) -> bool:
        """True if ``[kappa_min, kappa_max]`` sits in ``[lo, hi]`` shrunk by ``margin * (hi - lo)`` per side."""
        pad = margin * (hi - lo)
        return bool(self.kappa_min >= lo + pad and self.kappa_max <= hi - pad)

    def to_dict(self) -> dict:
        return {
            "kappa_min": float(self.kappa_min),
            "kappa_max": float(self.kappa_max),
            "argmin": {"point": self.argmin_point.tolist(), "direction": self.argmin_direction.tolist()},
            "argmax": {"point": self.argmax_point.tolist(), "direction": self.argmax_direction.tolist()},
        }


def pinch_interval(k: int, m: int) -> tuple[float, float]:
    return 1.0 / (k + m), 1.0 / (k - m)


def normal_curvature(jet: Jet2, v) -> float:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    vv = float(v @ v)
    if vv == 0.0:
        raise DegenerateVectorError("normal curvature needs a nonzero direction")
    g = jet.gradient
    slope = float(g @ v)
    grad_rho = np.sqrt(1.0 + float(g @ g))
    return float(v @ jet.hessian @ v) / (grad_rho * (vv + slope * slope))


def _pencil(grads: np.ndarray, hessians: np.ndarray):
    """Eigen-decomposition of ``(H, I + g g^T)`` for stacks of jets.

    Returns the curvatures (ascending, shape ``(N, d)``) and the matching
    directions in x'-space (columns, shape ``(N, d, d)``).
    """
    d = grads.shape[-1]
    metric = np.eye(d) + grads[..., :, None] * grads[..., None, :]
    chol = np.linalg.cholesky(metric)
    inv = np.linalg.inv(chol)
    reduced = inv @ hessians @ np.swapaxes(inv, -1, -2)
    reduced = 0.5 * (reduced + np.swapaxes(reduced, -1, -2))
    lam, y = np.linalg.eigh(reduced)
    dirs = np.swapaxes(inv, -1, -2) @ y
    scale = np.sqrt(1.0 + np.sum(grads * grads, axis=-1))
    return lam / scale[..., None], dirs


def principal_curvatures(jet: Jet2):
    """All principal curvatures at a point, ascending, with their directions."""
    lam, dirs = _pencil(jet.gradient[None, :], jet.hessian[None, :, :])
    return lam[0], dirs[0]


def principal_range(jet: Jet2) -> tuple[float, float]:
    lam, _ = principal_curvatures(jet)
    return float(lam[0]), float(lam[-1])


# ---------------------------------------------------------------------------
# radial surfaces


def radial_jets(points: np.ndarray, rad: Radial):
    """Gradients and Hessians at each row of ``points`` for a radial function."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = points.shape
    r2 = np.sum(points * points, axis=1)
    d1r = np.broadcast_to(np.asarray(rad.d1_over_r, dtype=float), (n,))
    d2 = np.broadcast_to(np.asarray(rad.d2, dtype=float), (n,))
    grads = d1r[:, None] * points
    coef = np.divide(d2 - d1r, r2, out=np.zeros(n), where=r2 > 0)
    hess = d1r[:, None, None] * np.eye(d) + coef[:, None, None] * (points[:, :, None] * points[:, None, :])
    return grads, hess


def sphere_profile(k: int) -> Profile:
    return lambda r: sphere_radial(k, r)


def stage_profile(k: int, epsilon: float, cutoff: Cutoff | None = None) -> Profile:
    c = cutoff or Cutoff()
    return lambda r: glue_radial(k, epsilon, c, r)


def stack_profile(stack: GraphStack, j: int | None = None) -> Profile:
    j = stack.top if j is None else j
    return lambda r: stack.radial(j, r)


def ray_curvatures(profile: Profile, radii, dim: int):
    """Principal curvatures along the ray ``r e_1`` in x'-space of dimension ``dim``.

    Returns ``(lam, dirs, points)`` with ``lam`` of shape ``(N, dim)``.
    """
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    points = np.zeros((radii.size, dim))
    points[:, 0] = radii
    grads, hess = radial_jets(points, profile(radii))
    lam, dirs = _pencil(grads, hess)
    return lam, dirs, points


def region_bounds(profile: Profile, radius: float, grid: int = 512, dim: int = 3,
                  r_min: float = 0.0, refine: int | None = None) -> CurvatureRange:
    """Curvature extremes of a radial graph over ``r_min <= |x'| <= radius``.

    The function is radial, so one ray carries every point's eigenstructure up
    to rotation.  ``grid`` points are laid out uniformly on the ray, then one
    refinement pass resamples the cells adjacent to the observed extremes.
    """
    if grid < 2:
        raise ValueError("grid must have at least two points")
    refine = refine if refine is not None else max(16, grid // 8)
    radii = np.linspace(r_min, radius, grid)
    lam, dirs, pts = ray_curvatures(profile, radii, dim)
    lo = lam[:, 0]
    hi = lam[:, -1]
    extra = []
    for i in sorted({int(np.argmin(lo)), int(np.argmax(hi))}):
        a = radii[max(i - 1, 0)]
        b = radii[min(i + 1, grid - 1)]
        extra.append(np.linspace(a, b, refine + 2)[1:-1])
    radii2 = np.concatenate(extra)
    lam2, dirs2, pts2 = ray_curvatures(profile, radii2, dim)
    lam = np.concatenate([lam, lam2])
    dirs = np.concatenate([dirs, dirs2])
    pts = np.concatenate([pts, pts2])
    # first occurrence wins: deterministic ties
    imin = int(np.argmin(lam[:, 0]))
    imax = int(np.argmax(lam[:, -1]))

    def unit(v):
        return v / np.linalg.norm(v)

    return CurvatureRange(
        float(lam[imin, 0]), float(lam[imax, -1]),
        pts[imin], unit(dirs[imin][:, 0]),
        pts[imax], unit(dirs[imax][:, -1]),
    )


def curvature_profile_rows(surface_id: str, profile: Profile, radii, dim: int):
    """Rows ``(surface_id, |x'|, kappa_min, kappa_max)`` for CSV reports."""
    lam, _, _ = ray_curvatures(profile, radii, dim)
    return [(surface_id, float(r), float(a), float(b))
            for r, a, b in zip(np.atleast_1d(radii), lam[:, 0], lam[:, -1])]


def sampled_extremes(jet: Jet2, directions: np.ndarray) -> tuple[float, float]:
    """Min/max of the normal curvature over the given directions (oracle for ``principal_range``)."""
    directions = np.atleast_2d(directions)
    g = jet.gradient
    num = np.einsum("ni,ij,nj->n", directions, jet.hessian, directions)
    slope = directions @ g
    den = np.sqrt(1.0 + g @ g) * (np.sum(directions**2, axis=1) + slope**2)
    k = num / den
    return float(k.min()), float(k.max())


def remainder_exponent(ks, deviations) -> tuple[float, float]:
    """Least-squares fit ``log dev = log C - p log k``; returns ``(p, C)``."""
    x = np.log(np.asarray(ks, dtype=float))
    y = np.log(np.asarray(deviations, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    return float(-slope), float(np.exp(intercept))


# ---------------------------------------------------------------------------
# pinching on stacks


def stack_annuli(stack: GraphStack):
    """``(k, r_lo, r_hi)`` for each stage: the annulus on which the top function equals ``g_k``.

    The first annulus also absorbs the untouched base sphere out to ``r_max``.
    """
    eps = stack.epsilons
    out = []
    for i, st in enumerate(stack.stages):
        r_hi = stack.r_max if i == 0 else float(eps[i])
        r_lo = float(eps[i + 1]) if i + 1 < len(eps) else 0.0
        out.append((st.k, r_lo, r_hi))
    return out


def pinch_check(stack: GraphStack, m: int, grid: int = 512, dim: int = 3, margin: float = 0.01):
    """Sweep the top function of ``stack`` stage by stage against ``[1/(k+m), 1/(k-m)]``."""
    rep = CheckReport("pinch")
    prof = stack_profile(stack)
    for k, r_lo, r_hi in stack_annuli(stack):
        lo, hi = pinch_interval(k, m)
        cr = region_bounds(prof, r_hi, grid=grid, dim=dim, r_min=r_lo)
        ok = cr.inside(lo, hi, margin)
        pad = margin * (hi - lo)
        slack = min(cr.kappa_min - (lo + pad), (hi - pad) - cr.kappa_max)
        rep = rep.merge(CheckReport("pinch", grid, 0 if ok else 1, slack, [{
            "k": k, "r_lo": r_lo, "r_hi": r_hi, "kappa_min": cr.kappa_min,
            "kappa_max": cr.kappa_max, "lower": lo, "upper": hi, "ok": ok,
        }]))
    return rep
