"""Squeezing-function lower bounds from osculating balls.

Normalized picture: the outer tangent ball is the unit ball, the tangency
point is ``(1, 0')``, the inner ball is ``B_s = B((s, 0'), 1 - s)`` and the
cap ``B_{s,d} = B_s ∩ {Re z_1 > d}`` is what is known to lie in the domain.
The ellipsoid ``|z_1 - (1 - eta)|^2 + (eta/mu)|z'|^2 < eta^2`` with
``mu = 1 - s`` sits inside ``B_s`` and, for ``eta <= (1 - d)/2``, inside the
slab, which yields ``S(r, 0) >= sqrt(mu) * sqrt(1 - 2(1 - r)/eta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .curvature import pinch_check
from .domain import Box, DomainModel
from .errors import CertificateRefused, HypothesisViolated, InvariantViolation
from .graphs import seam_jumps, sphere_radial
from .reports import CheckReport

SEAM_TOL = 1e-9


@dataclass(frozen=True)
class NormalizedConfig:
    """Normalized osculation data.

    ``gap = 1 - d`` is stored separately because for tiny caps ``d`` rounds
    to 1 while the gap stays representable; every test below uses the gap.
    """

    s: float
    d: float
    gap: float | None = None

    def __post_init__(self):
        if self.gap is None:
            object.__setattr__(self, "gap", 1.0 - self.d)
        if not 0.0 < self.s < 0.5:
            raise InvariantViolation(f"s={self.s} must lie in (0, 1/2)")
        if not (0.0 < self.d <= 1.0 and 0.0 < self.gap <= 1.0):
            raise InvariantViolation(f"d={self.d} (gap {self.gap}) must lie in (0, 1)")

    @property
    def mu(self) -> float:
        return 1.0 - self.s

    @property
    def eta(self) -> float:
        return self.d / 2.0

    @property
    def slab_width(self) -> float:
        """Largest ``2 * eta`` whose ellipsoid stays inside ``{Re z_1 > d}``: ``min(d, 1 - d)``."""
        return min(self.d, self.gap)

    def threshold_depth(self) -> float:
        """Largest ``1 - r`` at which the bound still exceeds ``1 - s``."""
        return self.s * self.d / 4.0

    def threshold(self) -> float:
        return 1.0 - self.threshold_depth()

    def hypotheses(self, r: float | None = None, depth: float | None = None) -> dict:
        depth = _depth(r, depth)
        return {
            "d_lt_r": 0.0 < depth < self.gap,
            "r_above_threshold": depth < self.threshold_depth(),
            "radicand_positive": 1.0 - 4.0 * depth / self.d > 0.0,
        }


def _depth(r, depth):
    if (r is None) == (depth is None):
        raise ValueError("pass exactly one of r and depth")
    return 1.0 - r if depth is None else depth


@dataclass(frozen=True)
class OsculationData:
    R_out: float
    R_in: float
    cap_lateral: float
    dist: float

    def __post_init__(self):
        if not 0.0 < self.R_in < self.R_out:
            raise InvariantViolation("need 0 < R_in < R_out")
        if not 0.0 < self.cap_lateral < self.R_in:
            raise InvariantViolation("need 0 < cap_lateral < R_in")
        if not 0.0 < self.dist < self.R_out:
            raise InvariantViolation("need 0 < dist < R_out")

    @property
    def cap_depth(self) -> float:
        c = self.cap_lateral
        return c * c / (self.R_in + math.sqrt(self.R_in**2 - c * c))


def lemma_lb(cfg: NormalizedConfig, r: float | None = None, depth: float | None = None) -> float:
    """``sqrt(mu * (1 - 4(1 - r)/d))``; raises when the radicand is not positive."""
    depth = _depth(r, depth)
    factor = 1.0 - 4.0 * depth / cfg.d
    if factor <= 0.0:
        raise HypothesisViolated(f"radicand (1-s)(1-4(1-r)/d) <= 0 at s={cfg.s}, d={cfg.d}, 1-r={depth}")
    return math.sqrt(cfg.mu * factor)


def normalize(osc: OsculationData) -> tuple[NormalizedConfig, float]:
    """Rescale by ``1/R_out`` with the tangency point at ``(1, 0')``; returns the config and ``r``.

    The config also carries the exact gap ``1 - d``; the probe depth ``1 - r``
    is ``osc.dist / osc.R_out`` for callers that need it unrounded.
    """
    s = (osc.R_out - osc.R_in) / osc.R_out
    gap = osc.cap_depth / osc.R_out
    return NormalizedConfig(s, 1.0 - gap, gap), 1.0 - osc.dist / osc.R_out


def shell_data(k: int, m: int, delta_k: float) -> dict:
    """Normalized configuration, depth threshold and bound for the shell of stage ``k``.

    The probe depth is half the admissible one: ``t_k = R_out * s * w / 8``
    with ``w = min(d, 1 - d)`` the ellipsoid width the cap actually supports.
    """
    if not k > m:
        raise HypothesisViolated(f"need k > m, got k={k}, m={m}")
    if not delta_k > 0.0:
        raise HypothesisViolated("delta_k must be positive")
    R_out, R_in = float(k + m), float(k - m)
    try:
        cfg, _ = normalize(OsculationData(R_out, R_in, delta_k, 0.5 * R_out))
    except InvariantViolation as exc:
        raise HypothesisViolated(f"shell k={k}, m={m}: {exc}") from exc
    w = cfg.slab_width
    depth = cfg.s * w / 8.0
    t = R_out * depth
    effective = NormalizedConfig(cfg.s, w, 1.0 - w)
    hyp = effective.hypotheses(depth=depth)
    if not all(hyp.values()):
        raise HypothesisViolated(f"shell k={k}: hypotheses fail {hyp}")
    return {
        "k": int(k), "s": cfg.s, "d": cfg.d, "gap": cfg.gap, "width": w, "eta": w / 2.0,
        "r": 1.0 - depth, "depth": depth, "r_threshold": effective.threshold(),
        "depth_threshold": effective.threshold_depth(), "t": t,
        "bound": lemma_lb(effective, depth=depth), "delta": float(delta_k),
    }


def shell_bound(k: int, m: int, delta_k: float) -> tuple[float, float]:
    row = shell_data(k, m, delta_k)
    return row["t"], row["bound"]


# ---------------------------------------------------------------------------
# Monte Carlo hypothesis checks


def _unit_ball(rng, count, dim):
    g = rng.standard_normal((count, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * rng.random((count, 1)) ** (1.0 / dim)


def inclusion_check(s: float, d: float, samples: int, seed: int, eta: float | None = None,
                    complex_dim: int = 2, gap: float | None = None) -> CheckReport:
    """Sample the ellipsoid ``B^mu_eta`` and test ``B_s`` membership and ``Re z_1 > d``.

    ``eta`` defaults to ``d / 2`` and ``gap`` to ``1 - d``.  Coordinates are
    real ``(Re z_1, Im z_1, z')``, shifted so the tangency point is the origin.
    """
    mu = 1.0 - s
    gap = 1.0 - d if gap is None else gap
    eta = d / 2.0 if eta is None else eta
    rng = np.random.default_rng([seed, 7])
    u = _unit_ball(rng, samples, 2 * complex_dim)
    w1 = -eta + eta * u[:, 0]  # Re z_1 - 1
    w2 = eta * u[:, 1]
    wr = math.sqrt(eta * mu) * u[:, 2:]
    norm2 = w1 * w1 + w2 * w2 + np.sum(wr * wr, axis=1)
    ball_slack = -(2.0 * mu * w1 + norm2)
    slab_slack = w1 + gap
    slack = np.minimum(ball_slack, slab_slack)
    bad = int(np.count_nonzero(slack <= 0.0))
    return CheckReport("inclusion", samples, bad, float(slack.min()), [{
        "s": s, "d": d, "eta": eta, "violations": bad,
        "ball_violations": int(np.count_nonzero(ball_slack <= 0.0)),
        "slab_violations": int(np.count_nonzero(slab_slack <= 0.0)),
    }])


def base_points(dim: int, delta: float, count: int, seed: int, k: int) -> np.ndarray:
    """The origin plus ``count - 1`` points uniform in the disk ``|x'| < delta``."""
    rng = np.random.default_rng([seed, 11, k])
    pts = np.zeros((count, dim))
    if count > 1:
        pts[1:] = delta * _unit_ball(rng, count - 1, dim)
    return pts


def cap_inside_check(dom: DomainModel, k: int, m: int, delta_k: float, samples: int, seed: int,
                     points: int = 10, inner_radius: float | None = None) -> CheckReport:
    """Inner caps of radius ``k - m`` tangent at boundary points over ``|x'| < delta_k`` lie in ``dom``.

    ``samples`` is per boundary point.  Cap points are built as
    ``p + tau + zeta * nu`` from the tangency point, never from the ball center,
    and the tangent offsets are exact graph lifts ``tau = (u, grad f . u)``
    rather than rows of an orthonormalized frame.  Orthonormalizing would leave
    an absolute error near ``1e-16 * |u|`` in the vertical part, which swamps
    the curvature slack once ``delta_k`` drops below about ``1e-13``.
    """
    R = float(k - m) if inner_radius is None else float(inner_radius)
    dim = dom.n - 1
    h = delta_k * delta_k / (R + math.sqrt(R * R - delta_k * delta_k))
    rng = np.random.default_rng([seed, 13, k])
    rep = CheckReport("cap")
    for xp in base_points(dim, delta_k, points, seed, k):
        p, nu = dom.boundary_point(xp)
        grad = dom.stack.jet(dom.j, xp).gradient
        got = []
        have = 0
        while have < samples:
            batch = 2 * (samples - have) + 64
            u = delta_k * _unit_ball(rng, batch, dim)
            lift = u @ grad
            zeta = h * rng.random(batch)
            t2 = np.sum(u * u, axis=1) + lift * lift
            keep = t2 < zeta * (2.0 * R - zeta)
            tau = np.column_stack([u[keep], lift[keep]])
            q = p + tau + zeta[keep, None] * nu
            got.append(q)
            have += len(q)
        q = np.concatenate(got)[:samples]
        slack = dom.clearance(q)
        bad = int(np.count_nonzero(slack <= 0.0))
        rep = rep.merge(CheckReport("cap", samples, bad, float(slack.min()), [{
            "k": k, "radius": R, "base": xp.tolist(), "violations": bad,
        }]))
    return rep


def outer_contains_check(dom: DomainModel, k: int, m: int, samples: int, seed: int,
                         delta_k: float | None = None, points: int = 10,
                         outer_radius: float | None = None) -> CheckReport:
    """``dom`` lies in the ball of radius ``k + m`` tangent at each tested boundary point.

    Half of the ``samples`` are drawn from all of ``dom``, half from a window
    around the tangency point where the clearance is smallest.
    """
    R = float(k + m) if outer_radius is None else float(outer_radius)
    if delta_k is None:
        i = k - dom.base_k
        delta_k = 0.5 * float(dom.stack.epsilons[i])
    dim = dom.n - 1
    rng = np.random.default_rng([seed, 17, k])
    per_point = max(2, samples // points)
    rep = CheckReport("outer")
    for xp in base_points(dim, delta_k, points, seed, k):
        p, nu = dom.boundary_point(xp)
        w = 4.0 * delta_k
        lo = np.append(xp - w, 0.0)
        hi = np.append(xp + w, float(sphere_radial(dom.base_k, min(np.linalg.norm(xp) + w * math.sqrt(dim),
                                                                    0.5 * dom.base_k)).value))
        local = dom.sample(rng, per_point - per_point // 2, Box(lo, hi, "local"))
        far = dom.sample(rng, per_point // 2)
        q = np.concatenate([local, far]) - p
        slack = 2.0 * R * (q @ nu) - np.sum(q * q, axis=1)
        bad = int(np.count_nonzero(slack <= 0.0))
        rep = rep.merge(CheckReport("outer", len(q), bad, float(slack.min()), [{
            "k": k, "radius": R, "base": xp.tolist(), "violations": bad,
        }]))
    return rep


# ---------------------------------------------------------------------------
# certificate


@dataclass
class ShellRow:
    k: int
    t_lo: float
    t_hi: float
    s: float
    d: float
    width: float
    r_threshold: float
    bound: float
    delta: float
    checks: dict = field(default_factory=dict)
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "k": self.k, "t_lo": self.t_lo, "t_hi": self.t_hi, "s": self.s, "d": self.d,
            "width": self.width, "r_threshold": self.r_threshold, "bound": self.bound,
            "delta": self.delta, "checks": self.checks, "note": self.note,
        }


@dataclass
class SqueezeCertificate:
    schedule: dict
    shells: list[ShellRow]
    aggregate: list[dict]
    prerequisites: dict

    @property
    def bounds(self) -> list[float]:
        return [row.bound for row in self.shells]

    def invariant_problems(self, m: int) -> list[str]:
        out = []
        b = self.bounds
        for i in range(1, len(b)):
            if not b[i] > b[i - 1]:
                out.append(f"bound of shell {self.shells[i].k} does not increase")
        for row in self.shells:
            if row.bound < 1.0 - 2.0 * m / (row.k + m):
                out.append(f"shell {row.k} below 1 - 2m/(k+m)")
            envelope = 2.0 * m / (row.k + m) + 2.0 * (1.0 - math.sqrt(1.0 - row.s))
            if 1.0 - row.bound > envelope:
                out.append(f"shell {row.k} outside envelope")
        return out

    def to_dict(self) -> dict:
        return {
            "schedule": self.schedule,
            "shells": [row.to_dict() for row in self.shells],
            "aggregate": self.aggregate,
            "prerequisites": self.prerequisites,
        }

    def bound_rows(self):
        return [(row.k, row.bound) for row in self.shells]


def aggregate_bounds(rows: list[ShellRow]) -> list[dict]:
    """Best bound per depth band, over every row whose checked region covers the band.

    A row for stage ``k`` covers distances up to ``t_k`` over ``|x'| < delta_k``;
    the band of row ``i`` is ``(t_lo, t_hi]`` over ``|x'| < delta_i``.
    """
    out = []
    for region in rows:
        contrib = [r for r in rows if region.t_hi <= r.t_hi and region.delta <= r.delta]
        best = max(contrib, key=lambda r: r.bound)
        out.append({
            "t_lo": region.t_lo, "t_hi": region.t_hi, "lateral": region.delta,
            "bound": best.bound, "from_k": best.k, "contributors": [r.k for r in contrib],
        })
    return out


INHERITED_NOTE = (
    "checked on the stage domain through g_k; persistence under later gluing near the "
    "origin rests on the linear estimate S >= 1 - C_k dist, not computed here"
)


def build_certificate(sched, dom: DomainModel, samples: int = 2000, seed: int = 0,
                      grid: int = 512, points: int = 10, inclusion_samples: int | None = None,
                      complex_dim: int | None = None) -> SqueezeCertificate:
    """Run the prerequisite checks for every shell and assemble the certificate.

    Raises :class:`CertificateRefused` naming each failing check.
    """
    if samples <= 0:
        raise ValueError("samples must be positive: randomized hypotheses cannot be skipped")
    complex_dim = complex_dim or max(1, dom.n // 2)
    inclusion_samples = inclusion_samples or samples
    failing = []
    prereq = {}

    problems = sched.invariant_problems() + dom.stack.nesting_problems() + dom.chart_problems()
    prereq["schedule"] = {"ok": not problems, "problems": problems}
    if problems:
        failing.append("schedule")

    jumps = seam_jumps(dom.stack)
    bad_seams = [j for j in jumps if j["jump"] > SEAM_TOL]
    prereq["seams"] = {"ok": not bad_seams, "jumps": jumps}
    if bad_seams:
        failing.append("seams")

    pinch = pinch_check(dom.stack, sched.m, grid=grid, dim=dom.n - 1)
    prereq["pinch"] = pinch.summary()
    if not pinch.ok:
        failing.append("pinch")
    pinch_by_k = {row["k"]: row for row in pinch.details}

    rows = []
    entries = list(sched.entries)
    for i, e in enumerate(entries):
        k = e.k
        stage_dom = dom.truncated(k + 1)
        data = shell_data(k, sched.m, e.delta)
        cap = cap_inside_check(stage_dom, k, sched.m, e.delta, samples, seed, points)
        outer = outer_contains_check(stage_dom, k, sched.m, samples, seed, e.delta, points)
        incl = inclusion_check(data["s"], data["d"], inclusion_samples, seed, data["eta"],
                               complex_dim, data["gap"])
        checks = {
            "cap": cap.summary(), "outer": outer.summary(), "inclusion": incl.summary(),
            "pinch": pinch_by_k.get(k, {}),
        }
        for name, rep in (("cap", cap), ("outer", outer), ("inclusion", incl)):
            if not rep.ok:
                failing.append(f"{name}[k={k}]")
        t_lo = entries[i + 1].t if i + 1 < len(entries) else 0.0
        rows.append(ShellRow(k, t_lo, e.t, data["s"], data["d"], data["width"],
                             data["r_threshold"], data["bound"], e.delta, checks, INHERITED_NOTE))

    if failing:
        raise CertificateRefused(failing)
    cert = SqueezeCertificate(sched.to_dict(), rows, aggregate_bounds(rows), prereq)
    problems = cert.invariant_problems(sched.m)
    if problems:
        raise CertificateRefused(["certificate"], "; ".join(problems))
    return cert
