from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .action_calabi import ActionContext, OrbitRecord, calabi, flux, with_actions
from .annulus_maps import TWO_PI, AnnulusPoint, LiftedMap
from .bounds import MapInvariants, RationalFlags, hypothesis_classifier
from .config import NewtonSettings, SearchSettings
from .errors import DomainError, NonAdmissibleMap
from .utils import chunked, circular_distance, parallel_map

LOGGER = logging.getLogger(__name__)

_LINE_SEARCH_STEPS = 30
_SEED_CHUNK = 512


@dataclass(frozen=True)
class SearchConfig:
    q_max: int = 4
    winding_range: Optional[Tuple[int, int]] = None
    seed_grid: Tuple[int, int] = (64, 64)
    newton: NewtonSettings = field(default_factory=NewtonSettings)
    dedupe_tol: float = 1e-7
    family_tol: float = 1e-6
    fd_step: float = 1e-6
    threads: Optional[int] = None

    def __post_init__(self) -> None:
        if self.q_max < 1:
            raise DomainError(f"q_max must be at least 1, got {self.q_max}")
        if not self.dedupe_tol > self.newton.tol:
            raise DomainError("dedupe_tol must exceed the Newton tolerance")

    @classmethod
    def from_settings(cls, settings: SearchSettings, q_max: Optional[int] = None, **overrides: Any) -> "SearchConfig":
        kwargs: dict = dict(
            q_max=settings.q_max if q_max is None else q_max,
            seed_grid=settings.seed_grid,
            newton=settings.newton,
            dedupe_tol=settings.dedupe_tol,
            family_tol=settings.family_tol,
        )
        kwargs.update(overrides)
        return cls(**kwargs)

    def windings(self, m: LiftedMap, q: int) -> range:
        if self.winding_range is not None:
            lo, hi = self.winding_range
            return range(lo, hi + 1)
        lo = math.ceil(q * min(m.y_minus, m.y_plus)) - 1
        hi = math.floor(q * max(m.y_minus, m.y_plus)) + 1
        return range(lo, hi + 1)


@dataclass(frozen=True)
class SearchResult:
    orbits: Tuple[OrbitRecord, ...]
    dropped_seeds: int
    families: Tuple[Tuple[int, int], ...]


def _iterate(m: LiftedMap, q: int, x: np.ndarray, y: np.ndarray):
    for _ in range(q):
        x, y = m.apply(x, y)
    return x, y


def _residual(m: LiftedMap, q: int, k: int, x: np.ndarray, y: np.ndarray):
    X, Y = _iterate(m, q, x, y)
    return X - x, Y - y - TWO_PI * k


def _displacement_jacobian(m: LiftedMap, q: int, x: np.ndarray, y: np.ndarray, h: float) -> np.ndarray:
    """Central-difference Jacobian of psi^q - id, shape (n, 2, 2)."""
    xp, yp = _iterate(m, q, x + h, y)
    xm, ym = _iterate(m, q, x - h, y)
    xq, yq = _iterate(m, q, x, y + h)
    xr, yr = _iterate(m, q, x, y - h)
    jac = np.empty(x.shape + (2, 2))
    jac[..., 0, 0] = (xp - xm) / (2.0 * h) - 1.0
    jac[..., 0, 1] = (xq - xr) / (2.0 * h)
    jac[..., 1, 0] = (yp - ym) / (2.0 * h)
    jac[..., 1, 1] = (yq - yr) / (2.0 * h) - 1.0
    return jac


def _newton(m: LiftedMap, q: int, k: int, x: np.ndarray, y: np.ndarray, cfg: SearchConfig):
    """Damped Newton on all seeds at once; least-squares steps cope with singular Jacobians."""
    newton = cfg.newton
    x, y = x.copy(), y.copy()
    gx, gy = _residual(m, q, k, x, y)
    res = np.hypot(gx, gy)
    active = res > newton.tol
    for _ in range(newton.max_iter):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        jac = _displacement_jacobian(m, q, x[idx], y[idx], cfg.fd_step)
        rhs = -np.stack([gx[idx], gy[idx]], axis=-1)[..., None]
        step = (np.linalg.pinv(jac) @ rhs)[..., 0]
        t = np.ones(idx.size)
        best_x, best_y, best_res = x[idx], y[idx], res[idx]
        pending = np.ones(idx.size, dtype=bool)
        for _ in range(_LINE_SEARCH_STEPS):
            tx = np.clip(x[idx] + t * step[:, 0], -1.0, 1.0)
            ty = y[idx] + t * step[:, 1]
            rx, ry = _residual(m, q, k, tx, ty)
            trial = np.hypot(rx, ry)
            better = pending & (trial < best_res)
            best_x = np.where(better, tx, best_x)
            best_y = np.where(better, ty, best_y)
            best_res = np.where(better, trial, best_res)
            pending &= ~better
            if not pending.any():
                break
            t = np.where(pending, t * newton.damping, t)
        stalled = pending
        x[idx], y[idx] = best_x, best_y
        gx[idx], gy[idx] = _residual(m, q, k, best_x, best_y)
        res[idx] = np.hypot(gx[idx], gy[idx])
        active[idx] = (res[idx] > newton.tol) & ~stalled
    converged = res <= newton.tol
    return x, y, res, converged


def _is_family(m: LiftedMap, q: int, x: np.ndarray, y: np.ndarray, cfg: SearchConfig) -> np.ndarray:
    if x.size == 0:
        return np.zeros(0, dtype=bool)
    singular = np.linalg.svd(_displacement_jacobian(m, q, x, y, cfg.fd_step), compute_uv=False)
    return singular[..., -1] <= cfg.family_tol * np.maximum(1.0, singular[..., 0])


@dataclass
class _Candidate:
    period: int
    winding: int
    points: np.ndarray  # shape (period, 2), projected
    residual: float
    family: bool


def _minimal_period(m: LiftedMap, q: int, x: float, y: float, tol: float) -> Tuple[int, int]:
    """Smallest d dividing q with psi^d(z) = z mod 2pi, and its winding."""
    px, py = np.asarray(x), np.asarray(y)
    for d in range(1, q):
        px, py = m.apply(px, py)
        if q % d:
            continue
        if abs(float(px) - x) <= tol and float(circular_distance(py, y)) <= tol:
            return d, int(round((float(py) - y) / TWO_PI))
    _, Y = _iterate(m, q, np.asarray(x), np.asarray(y))
    return q, int(round((float(Y) - y) / TWO_PI))


def _orbit_points(m: LiftedMap, period: int, x: float, y: float) -> np.ndarray:
    pts = np.empty((period, 2))
    px, py = np.asarray(x), np.asarray(y)
    for i in range(period):
        pts[i] = (float(px), float(py) % TWO_PI)
        px, py = m.apply(px, py)
    # start at the point with the smallest x (ties broken by y)
    start = int(np.lexsort((pts[:, 1], pts[:, 0]))[0])
    return np.roll(pts, -start, axis=0)


def _solve_block(args) -> List[_Candidate]:
    m, q, k, xs, ys, cfg = args
    x, y, res, converged = _newton(m, q, k, xs, ys, cfg)
    x, y, res = x[converged], y[converged], res[converged]
    families = _is_family(m, q, x, y, cfg)
    found = []
    for xi, yi, ri, fam in zip(x, y, res, families):
        period, winding = _minimal_period(m, q, float(xi), float(yi), cfg.dedupe_tol)
        pts = _orbit_points(m, period, float(xi), float(yi))
        rx, ry = _residual(m, period, winding, np.asarray(pts[0, 0]), np.asarray(pts[0, 1]))
        residual = max(float(ri), float(np.hypot(rx, ry)))
        found.append(_Candidate(period, winding, pts, residual, bool(fam)))
    return found


class _OrbitIndex:
    """Points of the orbits kept so far in one (period, winding) group."""

    def __init__(self) -> None:
        self._points = np.empty((64, 2))
        self._size = 0
        self.members: List[_Candidate] = []

    def contains(self, cand: _Candidate, tol: float) -> bool:
        if not self._size:
            return False
        pts = self._points[: self._size]
        anchor = cand.points[0]
        close = (np.abs(pts[:, 0] - anchor[0]) <= tol) & (circular_distance(pts[:, 1], anchor[1]) <= tol)
        return bool(close.any())

    def add(self, cand: _Candidate) -> None:
        needed = self._size + len(cand.points)
        if needed > len(self._points):
            grown = np.empty((max(needed, 2 * len(self._points)), 2))
            grown[: self._size] = self._points[: self._size]
            self._points = grown
        self._points[self._size : needed] = cand.points
        self._size = needed
        self.members.append(cand)


def _dedupe(candidates: Sequence[_Candidate], tol: float) -> List[_Candidate]:
    groups: Dict[Tuple[int, int], _OrbitIndex] = {}
    for cand in candidates:
        index = groups.setdefault((cand.period, cand.winding), _OrbitIndex())
        if not index.contains(cand, tol):
            index.add(cand)
    return [c for index in groups.values() for c in index.members]


def _cap_families(candidates: List[_Candidate], cap: int) -> List[_Candidate]:
    out: List[_Candidate] = []
    groups: Dict[Tuple[int, int], List[_Candidate]] = {}
    for cand in candidates:
        if cand.family:
            groups.setdefault((cand.period, cand.winding), []).append(cand)
        else:
            out.append(cand)
    for key, members in groups.items():
        members.sort(key=lambda c: (c.points[0, 0], c.points[0, 1]))
        if len(members) > cap:
            picks = np.unique(np.linspace(0, len(members) - 1, cap).round().astype(int))
            LOGGER.info("Family of period %d winding %d: keeping %d of %d representatives", key[0], key[1], picks.size, len(members))
            members = [members[i] for i in picks]
        out.extend(members)
    return out


def search_periodic_orbits(m: LiftedMap, cfg: SearchConfig, ctx: Optional[ActionContext] = None) -> SearchResult:
    ctx = ctx if ctx is not None else ActionContext(m)
    nx, ny = cfg.seed_grid
    gx, gy = np.meshgrid(np.linspace(-1.0, 1.0, nx), TWO_PI * np.arange(ny) / ny, indexing="ij")
    seeds_x, seeds_y = gx.ravel(), gy.ravel()
    tasks = []
    for q in range(1, cfg.q_max + 1):
        for k in cfg.windings(m, q):
            for rows in chunked(seeds_x.size, _SEED_CHUNK):
                tasks.append((m, q, k, seeds_x[rows], seeds_y[rows], cfg))
    blocks = parallel_map(_solve_block, tasks, cfg.threads)
    candidates = [c for block in blocks for c in block]
    dropped = sum(t[3].size for t in tasks) - len(candidates)
    LOGGER.info("Newton search: %d converged seeds, %d dropped", len(candidates), dropped)
    unique = _cap_families(_dedupe(candidates, cfg.dedupe_tol), nx)
    unique.sort(key=lambda c: (c.period, c.winding, c.points[0, 0], c.points[0, 1]))
    orbits = []
    for cand in unique:
        record = OrbitRecord(
            points=tuple(AnnulusPoint(float(px), float(py)) for px, py in cand.points),
            period=cand.period,
            winding=cand.winding,
            total_action=0.0,
            mean_action=0.0,
            residual=cand.residual,
            family_suspected=cand.family,
        )
        orbits.append(with_actions(ctx, record))
    families = tuple(sorted({(c.period, c.winding) for c in unique if c.family}))
    return SearchResult(tuple(orbits), int(dropped), families)


def find_periodic_orbits(m: LiftedMap, cfg: SearchConfig, ctx: Optional[ActionContext] = None) -> List[OrbitRecord]:
    return list(search_periodic_orbits(m, cfg, ctx).orbits)


@dataclass(frozen=True)
class MainInequalityReport:
    hypothesis_holds: bool
    hypothesis_reason: str
    min_witness_mean_action: Optional[float]
    calabi: float
    inequality_holds: Optional[bool]
    witness_orbit: Optional[OrbitRecord]
    orbits_found: int
    reverse_applicable: bool
    max_witness_mean_action: Optional[float]
    reverse_holds: Optional[bool]

    def as_dict(self) -> Dict[str, Any]:
        return {
            "hypothesis_holds": self.hypothesis_holds,
            "hypothesis_reason": self.hypothesis_reason,
            "min_witness_mean_action": self.min_witness_mean_action,
            "inf_mean_action": self.min_witness_mean_action,
            "calabi": self.calabi,
            "inequality_holds": self.inequality_holds,
            "witness_orbit": self.witness_orbit.as_dict() if self.witness_orbit else None,
            "orbits_found": self.orbits_found,
            "reverse_applicable": self.reverse_applicable,
            "max_witness_mean_action": self.max_witness_mean_action,
            "reverse_holds": self.reverse_holds,
            "note": "witness-based: extremes over the orbits found by the search, not over all periodic orbits",
        }


def verify_main_inequality(
    m: LiftedMap,
    cfg: SearchConfig,
    tol: float = 1e-9,
    ctx: Optional[ActionContext] = None,
    rational_flags: RationalFlags = RationalFlags(),
) -> MainInequalityReport:
    if not m.admissible:
        raise NonAdmissibleMap(f"{m.kind} map is not a rotation near both boundary circles")
    ctx = ctx if ctx is not None else ActionContext(m)
    base = ctx.with_map(m, offset=0)
    inv = MapInvariants(m.y_plus, m.y_minus, flux(base), calabi(base))
    verdict = hypothesis_classifier(inv, rational_flags)
    orbits = find_periodic_orbits(m, cfg, base)
    V = inv.calabi
    witness = min(orbits, key=lambda o: o.mean_action) if orbits else None
    top = max(orbits, key=lambda o: o.mean_action) if orbits else None
    reverse_applicable = V > inv.m or verdict.y_plus_rational or verdict.y_minus_rational
    return MainInequalityReport(
        hypothesis_holds=verdict.hypothesis_holds,
        hypothesis_reason=verdict.hypothesis_reason,
        min_witness_mean_action=witness.mean_action if witness else None,
        calabi=V,
        inequality_holds=(witness.mean_action <= V + tol) if witness else None,
        witness_orbit=witness,
        orbits_found=len(orbits),
        reverse_applicable=bool(reverse_applicable),
        max_witness_mean_action=top.mean_action if top else None,
        reverse_holds=(top.mean_action >= V - tol) if (top and reverse_applicable) else None,
    )
