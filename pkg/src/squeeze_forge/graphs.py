"""Second-order jets of sphere graphs, the radial cutoff, glued stages and stacks.

Every function handled here is radial, ``F(x') = F(|x'|)``.  Jets are assembled
from four radial quantities: ``F``, ``F'``, ``F'/r`` and ``F''``.  Keeping ``F'/r``
as its own closed form makes the Hessian exact at the origin, where
``H = (F'/r) I + (F'' - F'/r) x x^T / r^2`` degenerates to ``F''(0) I``.

Values of the sphere graph ``k - sqrt(k^2 - r^2)`` are computed as
``r^2 / (k + sqrt(k^2 - r^2))`` to avoid cancellation near the tangency point;
deep gluing stages live at ``|x'| ~ 1e-7`` where the naive form loses all digits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.special import expit

from .errors import DomainError, InvariantViolation

DEFAULT_PLATEAU = 0.05
DEFAULT_PROFILE = "septic"
DEFAULT_R_MAX = 1.0


class Radial(NamedTuple):
    """Radial derivatives of a radial function, as arrays over ``r``."""

    value: np.ndarray
    d1: np.ndarray
    d1_over_r: np.ndarray
    d2: np.ndarray


@dataclass(frozen=True)
class Jet2:
    value: float
    gradient: np.ndarray
    hessian: np.ndarray

    @property
    def dim(self) -> int:
        return self.gradient.shape[0]

    def as_tuple(self):
        return self.value, self.gradient, self.hessian


def _jet_from_radial(x: np.ndarray, rad: Radial) -> Jet2:
    x = np.asarray(x, dtype=float)
    r2 = float(x @ x)
    d1r = float(rad.d1_over_r)
    grad = d1r * x
    hess = d1r * np.eye(x.shape[0])
    if r2 > 0.0:
        hess = hess + ((float(rad.d2) - d1r) / r2) * np.outer(x, x)
    return Jet2(float(rad.value), grad, hess)


# ---------------------------------------------------------------------------
# sphere graphs


@dataclass(frozen=True)
class SphereGraph:
    """Lower hemisphere of the ball of radius ``k`` tangent to ``x_n = 0`` at the origin."""

    k: int
    r_max: float = DEFAULT_R_MAX

    def __post_init__(self):
        if self.k <= 0:
            raise InvariantViolation(f"sphere radius must be positive, got {self.k}")
        if not 0.0 < self.r_max < self.k:
            raise InvariantViolation(f"r_max={self.r_max} must lie in (0, k={self.k})")


def _check_radius(r, r_max, k_min):
    r = np.asarray(r, dtype=float)
    if np.any(r > r_max) or np.any(r >= k_min):
        raise DomainError(f"|x'|={np.max(r):.6g} outside chart (r_max={r_max}, k={k_min})")
    return r


def sphere_w(k, r):
    """``psi_k(r) / r^2``, finite at the origin."""
    return 1.0 / (k + np.sqrt(k * k - r * r))


def sphere_radial(k, r) -> Radial:
    r = np.asarray(r, dtype=float)
    s = np.sqrt(k * k - r * r)
    w = 1.0 / (k + s)
    return Radial(r * r * w, r / s, 1.0 / s, k * k / s**3)


def psi_jet(g: SphereGraph | int, x) -> Jet2:
    if not isinstance(g, SphereGraph):
        g = SphereGraph(int(g))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    r = float(np.sqrt(x @ x))
    _check_radius(r, g.r_max, g.k)
    return _jet_from_radial(x, sphere_radial(g.k, r))


# ---------------------------------------------------------------------------
# cutoff


def _exp_step(u):
    # s(u) = e(u) / (e(u) + e(1-u)), e(u) = exp(-1/u), written as a logistic in
    # phi(u) = 1/u - 1/(1-u) so that s, s(1-s) stay finite near both ends.
    u = np.asarray(u, dtype=float)
    s = np.where(u >= 1.0, 1.0, 0.0)
    d1 = np.zeros_like(u)
    d2 = np.zeros_like(u)
    inner = (u > 0.0) & (u < 1.0)
    if np.any(inner):
        v = u[inner]
        w = 1.0 - v
        phi = 1.0 / v - 1.0 / w
        sv = expit(-phi)
        q = expit(phi) * sv
        dphi = -1.0 / v**2 - 1.0 / w**2
        ddphi = 2.0 / v**3 - 2.0 / w**3
        live = q > 0.0
        q1 = np.where(live, -dphi * q, 0.0)
        with np.errstate(over="ignore", invalid="ignore"):
            q2 = np.where(live, -ddphi * q + dphi * dphi * q * (1.0 - 2.0 * sv), 0.0)
        s[inner] = sv
        d1[inner] = q1
        d2[inner] = q2
    return s, d1, d2


def _septic_step(u):
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    # s(u) + s(1 - u) = 1; evaluating the upper half by reflection keeps
    # the plateau side exactly 1 instead of 1 minus a few ulps
    v = np.minimum(u, 1.0 - u)
    low = v**4 * (35.0 - 84.0 * v + 70.0 * v**2 - 20.0 * v**3)
    s = np.where(u <= 0.5, low, 1.0 - low)
    d1 = 140.0 * u**3 * (1.0 - u) ** 3
    d2 = 420.0 * u**2 * (1.0 - u) ** 2 * (1.0 - 2.0 * u)
    return s, d1, d2


PROFILES: dict[str, Callable] = {"exp": _exp_step, "septic": _septic_step}


@dataclass(frozen=True)
class Cutoff:
    """Radial cutoff: 1 on ``|t| <= plateau``, 0 on ``|t| >= 1``, monotone between.

    ``septic`` is the degree-7 polynomial step (C^3, enough for C^2 gluing);
    ``exp`` is the C-infinity step built from ``exp(-1/u)``.  The septic step
    with a narrow plateau keeps the gluing perturbation of the curvature near
    ``1.4 / k^2``; the exp step at plateau 1/4 sits near ``4.5 / k^2``.
    """

    plateau: float = DEFAULT_PLATEAU
    profile: str = DEFAULT_PROFILE
    support: float = field(default=1.0, init=False)

    def __post_init__(self):
        if not 0.0 < self.plateau < 1.0:
            raise InvariantViolation(f"plateau must be in (0, 1), got {self.plateau}")
        if self.profile not in PROFILES:
            raise InvariantViolation(f"unknown cutoff profile {self.profile!r}")

    def radial(self, t):
        """Value and first two derivatives in ``t >= 0``."""
        t = np.asarray(t, dtype=float)
        width = 1.0 - self.plateau
        s, s1, s2 = PROFILES[self.profile]((1.0 - t) / width)
        return s, -s1 / width, s2 / (width * width)


def cutoff_jet(c: Cutoff, t: float):
    sign = -1.0 if t < 0 else 1.0
    v, d1, d2 = c.radial(abs(t))
    return float(v), sign * float(d1), float(d2)


# ---------------------------------------------------------------------------
# gluing


@dataclass(frozen=True)
class GlueStage:
    """Gluing of ``psi_k`` toward ``psi_target`` on ``|x'| < epsilon``; ``target`` defaults to ``k + 1``."""

    k: int
    epsilon: float
    target: int | None = None

    def __post_init__(self):
        if self.k <= 0:
            raise InvariantViolation(f"stage index must be positive, got {self.k}")
        if not self.epsilon > 0.0:
            raise InvariantViolation(f"epsilon must be positive, got {self.epsilon}")

    @property
    def to_k(self) -> int:
        return self.k + 1 if self.target is None else self.target


def glue_radial(k: int, epsilon: float, c: Cutoff, r, target: int | None = None) -> Radial:
    """Radial derivatives of ``psi_k + chi(r/eps) (psi_{k+1} - psi_k)``."""
    r = np.asarray(r, dtype=float)
    k1 = k + 1 if target is None else target
    lo = sphere_radial(k, r)
    hi = sphere_radial(k1, r)
    dw = sphere_w(k1, r) - sphere_w(k, r)
    diff = r * r * dw
    diff_over_r = r * dw
    ch, ch1, ch2 = c.radial(r / epsilon)
    ch1 = ch1 / epsilon
    ch2 = ch2 / (epsilon * epsilon)
    dd1 = hi.d1 - lo.d1
    dd1r = hi.d1_over_r - lo.d1_over_r
    dd2 = hi.d2 - lo.d2
    return Radial(
        lo.value + ch * diff,
        lo.d1 + ch1 * diff + ch * dd1,
        lo.d1_over_r + ch1 * diff_over_r + ch * dd1r,
        lo.d2 + ch2 * diff + 2.0 * ch1 * dd1 + ch * dd2,
    )


def glue_jet(stage: GlueStage, c: Cutoff, x, r_max: float = DEFAULT_R_MAX) -> Jet2:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    r = float(np.sqrt(x @ x))
    _check_radius(r, r_max, min(stage.k, stage.to_k))
    return _jet_from_radial(x, glue_radial(stage.k, stage.epsilon, c, r, stage.target))


# ---------------------------------------------------------------------------
# stacks


@dataclass(frozen=True)
class GraphStack:
    """``f_{k0} = psi_{k0}``; ``f_{j+1}`` replaces ``f_j`` on ``|x'| < eps_j`` by ``g_j``.

    ``stages[i]`` glues ``psi_{k0+i}`` to ``psi_{k0+i+1}``.  Stage radii must
    nest inside the previous plateau so that each new stage only sees the
    sphere ``psi_{k0+i}``: ``eps_{i+1} <= plateau * eps_i``.
    """

    base_k: int
    stages: tuple[GlueStage, ...] = ()
    plateau: float = DEFAULT_PLATEAU
    profile: str = DEFAULT_PROFILE
    r_max: float = DEFAULT_R_MAX
    validate: bool = True

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        if self.base_k <= 0:
            raise InvariantViolation("base_k must be positive")
        for i, st in enumerate(self.stages):
            if st.k != self.base_k + i:
                raise InvariantViolation(f"stage {i} has k={st.k}, expected {self.base_k + i}")
        if self.validate:
            for problem in self.nesting_problems():
                raise InvariantViolation(problem)

    def nesting_problems(self) -> list[str]:
        out = []
        eps = [st.epsilon for st in self.stages]
        if eps and not eps[0] < self.r_max:
            out.append(f"epsilon_{self.base_k}={eps[0]:.6g} must be below r_max={self.r_max}")
        for i in range(1, len(eps)):
            if not eps[i] <= self.plateau * eps[i - 1]:
                out.append(
                    f"epsilon_{self.base_k + i}={eps[i]:.6g} exceeds plateau*epsilon_"
                    f"{self.base_k + i - 1}={self.plateau * eps[i - 1]:.6g}"
                )
        return out

    @property
    def cutoff(self) -> Cutoff:
        return Cutoff(self.plateau, self.profile)

    @property
    def depth(self) -> int:
        return len(self.stages)

    @property
    def top(self) -> int:
        """Largest valid stack index ``j``."""
        return self.base_k + self.depth

    @property
    def epsilons(self) -> np.ndarray:
        return np.array([st.epsilon for st in self.stages], dtype=float)

    def truncated(self, j: int) -> GraphStack:
        """Stack whose top function is ``f_j``."""
        self._check_index(j)
        return GraphStack(
            self.base_k, self.stages[: j - self.base_k], self.plateau, self.profile,
            self.r_max, self.validate,
        )

    def _check_index(self, j):
        if not self.base_k <= j <= self.top:
            raise IndexError(f"stack index {j} outside [{self.base_k}, {self.top}]")

    def stage_index(self, j: int, r) -> np.ndarray:
        """Index into ``stages`` of the glued piece defining ``f_j`` at radius ``r``; -1 means ``psi_{k0}``."""
        eps = self.epsilons[: j - self.base_k]
        # eps is decreasing, so the stages with eps > r form a prefix
        return np.searchsorted(-eps, -np.asarray(r, dtype=float), side="left") - 1

    def radial(self, j: int, r) -> Radial:
        self._check_index(j)
        r = _check_radius(np.asarray(r, dtype=float), self.r_max, self.base_k)
        idx = np.atleast_1d(self.stage_index(j, r))
        rr = np.atleast_1d(r)
        out = [np.empty_like(rr) for _ in range(4)]
        c = self.cutoff
        for i in np.unique(idx):
            sel = idx == i
            if i < 0:
                part = sphere_radial(self.base_k, rr[sel])
            else:
                st = self.stages[i]
                part = glue_radial(st.k, st.epsilon, c, rr[sel], st.target)
            for dst, src in zip(out, part):
                dst[sel] = src
        if np.ndim(r) == 0:
            out = [o[0] for o in out]
        return Radial(*out)

    def value(self, j: int, xs) -> np.ndarray:
        """``f_j`` at each row of ``xs`` (shape ``(..., n-1)``)."""
        xs = np.asarray(xs, dtype=float)
        r = np.sqrt(np.sum(xs * xs, axis=-1))
        return self.radial(j, r).value

    def jet(self, j: int, x) -> Jet2:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return _jet_from_radial(x, self.radial(j, float(np.sqrt(x @ x))))

    def stage_function(self, i: int) -> Callable[[np.ndarray], float]:
        st = self.stages[i]
        c = self.cutoff

        def g(x):
            x = np.asarray(x, dtype=float)
            return float(glue_radial(st.k, st.epsilon, c, np.sqrt(x @ x), st.target).value)

        return g

    # -- persistence ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "base_k": int(self.base_k),
            "plateau": float(self.plateau),
            "profile": self.profile,
            "r_max": float(self.r_max),
            "stages": [_stage_dict(s) for s in self.stages],
        }

    @classmethod
    def from_dict(cls, d: dict, validate: bool = True) -> GraphStack:
        return cls(
            int(d["base_k"]),
            tuple(GlueStage(int(s["k"]), float(s["epsilon"]), s.get("target")) for s in d["stages"]),
            float(d.get("plateau", DEFAULT_PLATEAU)),
            d.get("profile", DEFAULT_PROFILE),
            float(d.get("r_max", DEFAULT_R_MAX)),
            validate,
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str, validate: bool = True) -> GraphStack:
        return cls.from_dict(json.loads(text), validate)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path, validate: bool = True) -> GraphStack:
        return cls.from_json(Path(path).read_text(encoding="utf-8"), validate)


def _stage_dict(s: GlueStage) -> dict:
    out = {"k": int(s.k), "epsilon": float(s.epsilon)}
    if s.target is not None:
        out["target"] = int(s.target)
    return out


def stack_jet(stack: GraphStack, j: int, x) -> Jet2:
    return stack.jet(j, x)


# ---------------------------------------------------------------------------
# finite-difference oracle


def fd_jet(fn: Callable[[np.ndarray], float], x, h: float) -> Jet2:
    """Central-difference value, gradient and (symmetrized) Hessian of ``fn`` at ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = x.shape[0]
    f0 = float(fn(x))
    grad = np.zeros(n)
    hess = np.zeros((n, n))
    E = h * np.eye(n)
    fp = np.array([fn(x + E[i]) for i in range(n)], dtype=float)
    fm = np.array([fn(x - E[i]) for i in range(n)], dtype=float)
    grad[:] = (fp - fm) / (2.0 * h)
    hess[np.diag_indices(n)] = (fp - 2.0 * f0 + fm) / (h * h)
    for i in range(n):
        for j in range(i + 1, n):
            v = (fn(x + E[i] + E[j]) - fn(x + E[i] - E[j])
                 - fn(x - E[i] + E[j]) + fn(x - E[i] - E[j])) / (4.0 * h * h)
            hess[i, j] = hess[j, i] = v
    hess = 0.5 * (hess + hess.T)
    return Jet2(f0, grad, hess)


def jet_relative_error(a: Jet2, b: Jet2) -> float:
    """Largest relative discrepancy among value, gradient and Hessian (norm-wise)."""
    errs = []
    for p, q in zip(a.as_tuple(), b.as_tuple()):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        scale = max(np.linalg.norm(q), np.finfo(float).tiny)
        errs.append(np.linalg.norm(p - q) / scale)
    return float(max(errs))


def as_points(xs: Sequence) -> np.ndarray:
    return np.atleast_2d(np.asarray(xs, dtype=float))


def seam_jumps(stack: GraphStack, rel_step: float = 1e-12) -> list[dict]:
    """Relative jump of each radial jet component of the top function across every stage radius."""
    out = []
    j = stack.top
    for i, eps in enumerate(stack.epsilons[1:], start=1):
        a = stack.radial(j, eps * (1.0 - rel_step))
        b = stack.radial(j, eps * (1.0 + rel_step))
        jump = max(abs(float(p) - float(q)) / max(abs(float(p)), abs(float(q)), 1e-300)
                   for p, q in zip(a, b))
        out.append({"k": stack.stages[i].k, "radius": float(eps), "jump": jump})
    return out
