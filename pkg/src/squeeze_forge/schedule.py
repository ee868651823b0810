"""Gluing-radius search, certified schedules, and global convexity checks."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .curvature import pinch_interval, principal_range, region_bounds, stage_profile
from .domain import DEFAULT_CHART, DomainModel
from .errors import InvariantViolation, NotFound, SearchExhausted
from .graphs import (DEFAULT_PLATEAU, DEFAULT_PROFILE, DEFAULT_R_MAX, Cutoff, GlueStage,
                     GraphStack)
from .reports import CheckReport, merge_all
from .squeeze import shell_data

log = logging.getLogger(__name__)

MAX_HALVINGS = 60
M_CAP = 8
PINCH_MARGIN = 0.01
DEFAULT_START = 0.5


@dataclass(frozen=True)
class SweepConfig:
    grid: int = 512
    dim: int = 3
    margin: float = PINCH_MARGIN
    max_halvings: int = MAX_HALVINGS
    plateau: float = DEFAULT_PLATEAU
    profile: str = DEFAULT_PROFILE

    @property
    def cutoff(self) -> Cutoff:
        return Cutoff(self.plateau, self.profile)


def epsilon_admissible(k: int, m: int, epsilon: float, cfg: SweepConfig = SweepConfig()) -> bool:
    lo, hi = pinch_interval(k, m)
    cr = region_bounds(stage_profile(k, epsilon, cfg.cutoff), epsilon, grid=cfg.grid, dim=cfg.dim)
    return cr.inside(lo, hi, cfg.margin)


def select_epsilon(k: int, m: int, start: float = DEFAULT_START, cfg: SweepConfig = SweepConfig()) -> float:
    """Largest ``start * 2**-i`` whose glued stage ``g_k`` is pinched in ``[1/(k+m), 1/(k-m)]``."""
    if not k > m:
        raise ValueError(f"need k > m, got k={k}, m={m}")
    for i in range(cfg.max_halvings + 1):
        eps = math.ldexp(start, -i)
        if epsilon_admissible(k, m, eps, cfg):
            return eps
    raise SearchExhausted(k, m, cfg.max_halvings)


def find_n(m: int, k_lo: int, k_hi: int, start: float = DEFAULT_START,
           cfg: SweepConfig = SweepConfig(), epsilons: dict | None = None) -> int:
    """Smallest ``N`` in ``(m, k_lo]`` such that every ``k`` in ``[N, k_hi]`` admits a radius.

    Raises :class:`SearchExhausted` for the first failing ``k >= k_lo``.
    """
    epsilons = {} if epsilons is None else epsilons
    for k in range(k_lo, k_hi + 1):
        epsilons[k] = select_epsilon(k, m, start, cfg)
    n = k_lo
    for k in range(k_lo - 1, max(m, 1), -1):
        try:
            epsilons[k] = select_epsilon(k, m, start, cfg)
        except SearchExhausted:
            break
        n = k
    return n


def find_m(k_range, start: float = DEFAULT_START, cfg: SweepConfig = SweepConfig(),
           m_cap: int = M_CAP, epsilons: dict | None = None) -> tuple[int, int]:
    """Smallest margin ``m <= m_cap`` (then smallest ``N``) pinching every stage in ``k_range``."""
    k_lo, k_hi = k_range
    if k_lo < 2:
        raise ValueError("k_lo must be at least 2")
    for m in range(1, m_cap + 1):
        if k_lo <= m:
            continue
        found = {}
        try:
            n = find_n(m, k_lo, k_hi, start, cfg, found)
        except SearchExhausted as exc:
            log.debug("m=%d rejected at k=%d", m, exc.k)
            continue
        if epsilons is not None:
            epsilons.clear()
            epsilons.update(found)
        return m, n
    raise NotFound(f"no m <= {m_cap} pinches every k in [{k_lo}, {k_hi}]")


# ---------------------------------------------------------------------------
# schedules


@dataclass(frozen=True)
class ScheduleEntry:
    k: int
    epsilon: float
    delta: float
    t: float

    def to_dict(self) -> dict:
        return {"k": int(self.k), "epsilon": self.epsilon, "delta": self.delta, "t": self.t}


@dataclass(frozen=True)
class Schedule:
    k0: int
    m: int
    N: int
    entries: tuple[ScheduleEntry, ...]
    plateau: float = DEFAULT_PLATEAU
    profile: str = DEFAULT_PROFILE
    r_max: float = DEFAULT_R_MAX
    chart_radius: float = DEFAULT_CHART
    validate: bool = field(default=True, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if self.validate:
            problems = self.invariant_problems()
            if problems:
                raise InvariantViolation("; ".join(problems))

    @property
    def depth(self) -> int:
        return len(self.entries)

    def invariant_problems(self) -> list[str]:
        out = []
        if not (self.k0 >= self.N > self.m >= 1):
            out.append(f"need k0 >= N > m >= 1, got k0={self.k0}, N={self.N}, m={self.m}")
        if not self.entries:
            out.append("schedule has no entries")
        for i, e in enumerate(self.entries):
            if e.k != self.k0 + i:
                out.append(f"entry {i} has k={e.k}, expected {self.k0 + i}")
            if not 0.0 < e.delta <= e.epsilon:
                out.append(f"k={e.k}: need 0 < delta <= epsilon")
            try:
                expected = shell_data(e.k, self.m, e.delta)["t"]
            except Exception as exc:  # noqa: BLE001 - reported, not raised
                out.append(f"k={e.k}: shell hypotheses fail ({exc})")
            else:
                if not math.isclose(e.t, expected, rel_tol=1e-12):
                    out.append(f"k={e.k}: t={e.t!r} disagrees with shell bound {expected!r}")
        for name in ("epsilon", "delta", "t"):
            seq = [getattr(e, name) for e in self.entries]
            if any(b >= a for a, b in zip(seq, seq[1:])):
                out.append(f"{name} is not strictly decreasing")
        return out

    def stack(self, validate: bool = True) -> GraphStack:
        return GraphStack(
            self.k0, tuple(GlueStage(e.k, e.epsilon) for e in self.entries),
            self.plateau, self.profile, self.r_max, validate,
        )

    def domain(self, n: int = 4, validate: bool = True) -> DomainModel:
        return DomainModel(self.stack(validate), self.chart_radius, n)

    def to_dict(self) -> dict:
        return {
            "k0": int(self.k0), "m": int(self.m), "N": int(self.N), "depth": self.depth,
            "plateau": self.plateau, "profile": self.profile, "r_max": self.r_max,
            "chart_radius": self.chart_radius,
            "entries": [e.to_dict() for e in self.entries],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict, validate: bool = True) -> Schedule:
        entries = tuple(ScheduleEntry(int(e["k"]), float(e["epsilon"]), float(e["delta"]), float(e["t"]))
                        for e in d["entries"])
        if "depth" in d and int(d["depth"]) != len(entries) and validate:
            raise InvariantViolation("depth does not match the number of entries")
        return cls(int(d["k0"]), int(d["m"]), int(d["N"]), entries,
                   float(d.get("plateau", DEFAULT_PLATEAU)), d.get("profile", DEFAULT_PROFILE),
                   float(d.get("r_max", DEFAULT_R_MAX)), float(d.get("chart_radius", DEFAULT_CHART)),
                   validate)

    @classmethod
    def load(cls, path, validate: bool = True) -> Schedule:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")), validate)

    def with_epsilon(self, k: int, epsilon: float) -> Schedule:
        """Copy with one gluing radius replaced (no revalidation); used for negative controls."""
        entries = tuple(ScheduleEntry(e.k, epsilon if e.k == k else e.epsilon, e.delta, e.t)
                        for e in self.entries)
        return Schedule(self.k0, self.m, self.N, entries, self.plateau, self.profile,
                        self.r_max, self.chart_radius, validate=False)


def build_schedule(k0: int, depth: int, m: int, N: int | None = None, start: float = DEFAULT_START,
                   cfg: SweepConfig = SweepConfig(), chart_radius: float = DEFAULT_CHART,
                   r_max: float = DEFAULT_R_MAX) -> Schedule:
    """Choose ``(eps_k, delta_k, t_k)`` for ``k = k0 .. k0+depth-1``.

    Each radius is the selector's answer started from the tightest of
    ``delta_{k-1}/2``, ``eps_{k-1}/2`` and ``plateau * eps_{k-1}``; the last cap
    keeps every new stage on the previous plateau, where ``f_k = psi_k``.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if not start < chart_radius:
        raise ValueError(f"start={start} must be below chart_radius={chart_radius}")
    if N is None:
        N = find_n(m, k0, k0 + depth - 1, start, cfg)
    entries = []
    prev = None
    for k in range(k0, k0 + depth):
        if prev is None:
            s0 = start
        else:
            s0 = min(prev.delta / 2.0, prev.epsilon / 2.0, cfg.plateau * prev.epsilon)
        eps = select_epsilon(k, m, s0, cfg)
        delta = eps / 2.0
        t = shell_data(k, m, delta)["t"]
        prev = ScheduleEntry(k, eps, delta, t)
        entries.append(prev)
    return Schedule(k0, m, N, tuple(entries), cfg.plateau, cfg.profile, r_max, chart_radius)


# ---------------------------------------------------------------------------
# global checks


def membership(dom: DomainModel, x) -> bool | np.ndarray:
    """Whether ``x`` (one point or rows of points) lies in the open domain."""
    x = np.asarray(x, dtype=float)
    inside = dom.contains(x)
    return bool(inside[0]) if x.ndim == 1 else inside


def flat_point_curvature(stack: GraphStack, dim: int = 3) -> tuple[float, float]:
    """Principal curvature range of the top function at ``x' = 0``."""
    return principal_range(stack.jet(stack.top, np.zeros(dim)))


LAYER_WIDTHS = (1 / 4, 1 / 32)
LAYER_DEPTHS = (1.0, 1e-2)


def _layers(dom: DomainModel, radius: float, name: str):
    """Boundary layers at ``radius``; heights are fractions of the boundary's sag over the window."""
    kappa = 1.0 / max(1, dom.base_k - 2)
    out = []
    for fw in LAYER_WIDTHS:
        w = fw * radius
        for fh in LAYER_DEPTHS:
            out.append(dom.layer(radius, w, fh * kappa * w * w / 8.0, f"layer[{name},w={fw:g},h={fh:g}]"))
    return out


def convexity_windows(dom: DomainModel):
    """Global box, the chart, boxes at every seam, and thin boundary layers at each seam.

    Seams are the stage radii and the chart edge.
    """
    wins = [dom.global_box(), dom.origin_box(1.1 * dom.chart_radius, "chart")]
    seams = [(st.epsilon, f"k={st.k}") for st in dom.stack.stages] + [(dom.chart_radius, "chart")]
    for st in dom.stack.stages:
        wins.append(dom.origin_box(1.1 * st.epsilon, f"origin[k={st.k}]"))
    for radius, name in seams:
        wins.append(dom.seam_box(radius, 0.5 * radius if name != "chart" else 0.2 * radius,
                                 f"seam[{name}]"))
        wins.extend(_layers(dom, radius, name))
    return wins


def convexity_check(dom: DomainModel, pairs: int, seed: int, batch: int = 200_000) -> CheckReport:
    """Midpoints of random pairs in ``dom`` (per sampling window) must stay in ``dom``."""
    if pairs < 1:
        raise ValueError("pairs must be at least 1")
    boxes = convexity_windows(dom)
    share = [pairs // len(boxes) + (1 if i < pairs % len(boxes) else 0) for i in range(len(boxes))]
    reports = []
    for wi, (box, count) in enumerate(zip(boxes, share)):
        rng = np.random.default_rng([seed, 3, wi])
        bad = 0
        slack = math.inf
        done = 0
        while done < count:
            c = min(batch, count - done)
            a = dom.sample(rng, c, box)
            b = dom.sample(rng, c, box)
            cl = dom.clearance(0.5 * (a + b))
            bad += int(np.count_nonzero(cl <= 0.0))
            slack = min(slack, float(cl.min()))
            done += c
        reports.append(CheckReport("convexity", count, bad, slack,
                                   [{"window": box.label, "pairs": count, "violations": bad,
                                     "min_clearance": slack}]))
    return merge_all("convexity", reports)


def _sample_radii_points(rng, count, dim, r_max, scales):
    """Points whose radii spread log-uniformly from the smallest stage scale up to ``r_max``."""
    lo = max(min(scales) * 1e-2, 1e-300) if scales else r_max * 1e-3
    radii = np.exp(rng.uniform(math.log(lo), math.log(r_max), count))
    dirs = rng.standard_normal((count, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return dirs * radii[:, None]


def exhaustion_report(stack: GraphStack, samples: int, seed: int = 0, dim: int = 3,
                      tol: float = 1e-12) -> CheckReport:
    rng = np.random.default_rng([seed, 5])
    x = _sample_radii_points(rng, samples, dim, stack.r_max, list(stack.epsilons))
    r = np.linalg.norm(x, axis=1)
    rep = CheckReport("exhaustion")
    for j in range(stack.base_k, stack.top):
        fj = stack.radial(j, r).value
        fk = stack.radial(j + 1, r).value
        scale = np.maximum(np.abs(fj), np.finfo(float).tiny)
        above = (fk - fj) > tol * scale
        outside = r >= stack.stages[j - stack.base_k].epsilon
        moved = outside & (np.abs(fk - fj) > tol * scale)
        bad = int(np.count_nonzero(above | moved))
        slack = float(np.min((fj - fk) / scale + tol)) if r.size else math.inf
        rep = rep.merge(CheckReport("exhaustion", samples, bad, slack,
                                    [{"j": j, "violations": bad}]))
    return rep


def exhaustion_check(stack: GraphStack, samples: int, seed: int = 0, dim: int = 3) -> bool:
    """``f_{j+1} <= f_j`` everywhere and ``f_{j+1} = f_j`` outside ``eps_j``, for each consecutive pair."""
    return exhaustion_report(stack, samples, seed, dim).ok


def nested_domains_check(dom: DomainModel, samples: int, seed: int = 0) -> CheckReport:
    """Sampled points of ``Omega_j`` also lie in ``Omega_{j+1}``."""
    rep = CheckReport("nested")
    for j in range(dom.base_k, dom.j):
        rng = np.random.default_rng([seed, 19, j])
        inner = dom.truncated(j)
        outer = dom.truncated(j + 1)
        boxes = [inner.global_box()] + [inner.origin_box(1.1 * st.epsilon, "") for st in dom.stack.stages]
        per = max(1, samples // len(boxes))
        pts = np.concatenate([inner.sample(rng, per, b) for b in boxes])
        ok = outer.contains(pts)
        rep = rep.merge(CheckReport("nested", len(pts), int(np.count_nonzero(~ok)),
                                    float(outer.clearance(pts).min()), [{"j": j}]))
    return rep
