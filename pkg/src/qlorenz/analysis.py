"""Poincare sections, period detection, bifurcation sweeps and attractor comparison."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ._io import text_out
from .dynamics import LorenzParams, fixed_points
from .marching import Trajectory, run_section, run_trajectory

__all__ = [
    "PoincareSection",
    "PeriodResult",
    "BifurcationDiagram",
    "OracleReport",
    "LobeAnchor",
    "poincare_section",
    "section_from_run",
    "detect_period",
    "bifurcation_sweep",
    "transitions",
    "compare_to_oracle",
    "bounding_box",
    "bounding_box_overlap",
    "lobe_anchors",
    "lyapunov_estimate",
    "beta_grid",
    "DEFAULT_CLUSTER_TOL",
    "DEFAULT_CHAOS_THRESHOLD",
    "DEFAULT_TRANSIENT_FRACTION",
]

DEFAULT_CLUSTER_TOL = 0.05
DEFAULT_CHAOS_THRESHOLD = 32
DEFAULT_TRANSIENT_FRACTION = 0.5


@dataclass
class PoincareSection:
    """Descending ``x = 0`` crossings: time, y and z of each."""

    t: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    @classmethod
    def from_records(cls, rec: np.ndarray) -> "PoincareSection":
        rec = np.asarray(rec, dtype=float).reshape(-1, 3)
        return cls(rec[:, 0].copy(), rec[:, 1].copy(), rec[:, 2].copy())


def poincare_section(tr: Trajectory, transient_time: float = 0.0) -> PoincareSection:
    """Crossings of ``x = 0`` with ``dx/dt < 0`` found by linear interpolation."""
    xyz = np.asarray(tr.xyz)
    if len(xyz) < 2:
        return PoincareSection(np.empty(0), np.empty(0), np.empty(0))
    x = xyz[:, 0]
    i = np.nonzero((x[:-1] > 0.0) & (x[1:] <= 0.0))[0]
    f = x[i] / (x[i] - x[i + 1])
    t = (i + f) * tr.dt
    y = xyz[i, 1] + f * (xyz[i + 1, 1] - xyz[i, 1])
    z = xyz[i, 2] + f * (xyz[i + 1, 2] - xyz[i, 2])
    keep = (i * tr.dt >= transient_time) & (y < 0.0)  # at x = 0, dx/dt = sigma * y
    return PoincareSection(t[keep], y[keep], z[keep])


def section_from_run(x0, p: LorenzParams, dt: float, T: float, engine: str = "classical",
                     transient_fraction: float = DEFAULT_TRANSIENT_FRACTION) -> PoincareSection:
    """Section of a fresh run, computed without storing the trajectory."""
    steps = int(round(T / dt))
    skip = int(round(transient_fraction * steps))
    return PoincareSection.from_records(run_section(x0, p, dt, steps, skip, engine))


@dataclass(frozen=True)
class PeriodResult:
    clusters: tuple[float, ...]
    chaotic: bool

    @property
    def count(self) -> int:
        return len(self.clusters)

    @property
    def period(self) -> int | None:
        return None if self.chaotic else self.count

    def exceeds(self, p: int) -> bool:
        return self.chaotic or self.count > p


def detect_period(sec: PoincareSection | np.ndarray, cluster_tol: float = DEFAULT_CLUSTER_TOL,
                  chaos_threshold: int = DEFAULT_CHAOS_THRESHOLD) -> PeriodResult:
    """Greedy 1-D clustering of section z-values.

    Values are sorted; a cluster opens at its smallest member and takes every
    value within ``cluster_tol`` of it. More than ``chaos_threshold`` clusters
    flags chaos.
    """
    z = np.sort(np.asarray(sec.z if isinstance(sec, PoincareSection) else sec, dtype=float))
    if z.size == 0:
        raise ValueError("empty Poincare section: no crossings to cluster")
    if not cluster_tol > 0:
        raise ValueError("cluster tolerance must be positive")
    starts = [z[0]]
    members = [[z[0]]]
    for v in z[1:]:
        if v - starts[-1] > cluster_tol:
            starts.append(v)
            members.append([v])
        else:
            members[-1].append(v)
    centers = tuple(float(np.mean(m)) for m in members)
    return PeriodResult(centers, len(centers) > chaos_threshold)


@dataclass
class BifurcationDiagram:
    betas: np.ndarray
    sections: list[np.ndarray]
    results: list[PeriodResult]
    engine: str
    dt: float
    T: float

    @property
    def periods(self) -> list[int | None]:
        return [r.period for r in self.results]

    def write_csv(self, path) -> None:
        with text_out(path) as fh:
            w = csv.writer(fh)
            w.writerow(["beta", "z"])
            for b, zs in zip(self.betas, self.sections):
                for z in zs:
                    w.writerow([repr(float(b)), repr(float(z))])

    def write_periods_csv(self, path) -> None:
        with text_out(path) as fh:
            w = csv.writer(fh)
            w.writerow(["beta", "clusters", "chaotic"])
            for b, r in zip(self.betas, self.results):
                w.writerow([repr(float(b)), r.count, int(r.chaotic)])


def beta_grid(beta_min: float, beta_max: float, beta_step: float) -> np.ndarray:
    if not beta_step > 0:
        raise ValueError("beta step must be positive")
    if beta_max < beta_min:
        raise ValueError("beta_max must not be below beta_min")
    n = int(math.floor((beta_max - beta_min) / beta_step + 1e-9)) + 1
    return np.round(beta_min + beta_step * np.arange(n), 12)


def _sweep_one(args):
    x0, p, dt, T, engine, frac, tol, chaos = args
    sec = section_from_run(x0, p, dt, T, engine, frac)
    if len(sec) == 0:
        return sec.z, PeriodResult((), False)
    return sec.z, detect_period(sec, tol, chaos)


def bifurcation_sweep(base: LorenzParams, beta_min: float, beta_max: float, beta_step: float,
                      dt: float = 2.5e-4, T: float = 150.0, engine: str = "classical",
                      x0: Sequence[float] = (0.1, -1.1, 1.1),
                      transient_fraction: float = DEFAULT_TRANSIENT_FRACTION,
                      cluster_tol: float = DEFAULT_CLUSTER_TOL,
                      chaos_threshold: int = DEFAULT_CHAOS_THRESHOLD,
                      workers: int = 1) -> BifurcationDiagram:
    """Section z-values and detected periods over a beta grid.

    Runs are independent; with ``workers > 1`` they execute in separate
    processes and the results keep grid order.
    """
    betas = beta_grid(beta_min, beta_max, beta_step)
    jobs = [(tuple(x0), replace(base, beta=float(b)), dt, T, engine, transient_fraction,
             cluster_tol, chaos_threshold) for b in betas]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(_sweep_one, jobs))
    else:
        out = [_sweep_one(j) for j in jobs]
    return BifurcationDiagram(betas, [o[0] for o in out], [o[1] for o in out], engine, dt, T)


def transitions(diagram: BifurcationDiagram, periods: Sequence[int] = (1, 2, 4),
                persist: int = 2) -> dict[int, float | None]:
    """First grid beta whose detected period exceeds ``p`` and keeps exceeding it.

    The excess must hold at that beta and the ``persist`` grid points after it.
    Near a doubling, slowly converging branches can briefly fake a higher
    count at one or two points; requiring persistence filters those out.
    """
    res = diagram.results
    out: dict[int, float | None] = {}
    for p in periods:
        out[p] = None
        for k in range(len(res)):
            window = res[k:k + persist + 1]
            if len(window) == persist + 1 and all(r.count and r.exceeds(p) for r in window):
                out[p] = float(diagram.betas[k])
                break
    return out


# ---------------------------------------------------------------------------
# attractor structure


def bounding_box(xyz: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    xyz = np.asarray(xyz)
    return xyz.min(axis=0), xyz.max(axis=0)


def bounding_box_overlap(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-axis overlap of two point clouds' boxes: intersection length over union length."""
    lo_a, hi_a = bounding_box(a)
    lo_b, hi_b = bounding_box(b)
    inter = np.clip(np.minimum(hi_a, hi_b) - np.maximum(lo_a, lo_b), 0.0, None)
    union = np.maximum(hi_a, hi_b) - np.minimum(lo_a, lo_b)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(union > 0, inter / union, 1.0)


@dataclass(frozen=True)
class LobeAnchor:
    """How one lobe of the attractor sits around a fixed point."""

    fixed_point: np.ndarray
    centroid: np.ndarray
    rms_radius: float
    distance: float
    winding: float
    closest_approach: float

    @property
    def anchored(self) -> bool:
        """Centroid within one RMS radius and the orbit circles the point."""
        return self.distance <= self.rms_radius and abs(self.winding) >= 1.0


def lobe_anchors(xyz: np.ndarray, p: LorenzParams) -> list[LobeAnchor]:
    """Compare the x > 0 and x < 0 lobes with the fixed points C+ and C-.

    Winding is measured in the plane spanned by ``(1, 1, 0)/sqrt(2)`` and ``z``
    around the fixed point, summed over each contiguous visit to the lobe.
    """
    xyz = np.asarray(xyz)
    fps = fixed_points(p)
    if len(fps) < 3:
        raise ValueError("rho <= 1: no nontrivial fixed points")
    out = []
    for sign, fp in ((1.0, fps[1]), (-1.0, fps[2])):
        mask = np.sign(xyz[:, 0]) == sign
        lobe = xyz[mask]
        if len(lobe) == 0:
            out.append(LobeAnchor(fp, np.full(3, np.nan), 0.0, math.inf, 0.0, math.inf))
            continue
        c = lobe.mean(axis=0)
        rms = float(np.sqrt(((lobe - c) ** 2).sum(axis=1).mean()))
        u = (xyz[:, 0] + xyz[:, 1] - fp[0] - fp[1]) / np.sqrt(2.0)
        w = xyz[:, 2] - fp[2]
        ang = np.arctan2(w, u)
        step = np.angle(np.exp(1j * np.diff(ang)))
        inside = mask[:-1] & mask[1:]
        winding = float(step[inside].sum() / (2 * np.pi))
        closest = float(np.min(np.hypot(u[mask], w[mask])))
        out.append(LobeAnchor(fp, c, rms, float(np.linalg.norm(c - fp)), winding, closest))
    return out


@dataclass
class OracleReport:
    horizon: float = 0.0
    pointwise_max_error: float = math.nan
    pointwise_bound: float = math.nan
    lyapunov_estimate: float = math.nan
    box_overlap: np.ndarray = field(default_factory=lambda: np.empty(0))
    engine_period: PeriodResult | None = None
    oracle_period: PeriodResult | None = None
    empty: bool = False

    @property
    def pointwise_ok(self) -> bool:
        return bool(self.pointwise_max_error <= self.pointwise_bound)

    @property
    def clusters_match(self) -> bool:
        if self.engine_period is None or self.oracle_period is None:
            return False
        a, b = self.engine_period, self.oracle_period
        if a.chaotic or b.chaotic:
            return a.chaotic and b.chaotic
        return a.count == b.count


def lyapunov_estimate(x0, p: LorenzParams, dt: float, T: float = 20.0, d0: float = 1e-8) -> float:
    """Largest-exponent estimate from two nearby RK4 runs renormalized every time unit."""
    steps_per = max(1, int(round(1.0 / dt)))
    a = np.asarray(x0, dtype=float)
    b = a + np.array([d0, 0.0, 0.0])
    total = 0.0
    n = max(1, int(round(T)))
    for _ in range(n):
        a = run_trajectory(a, p, dt, steps_per, "rk4").xyz[-1]
        b = run_trajectory(b, p, dt, steps_per, "rk4").xyz[-1]
        d = np.linalg.norm(b - a)
        total += math.log(d / d0)
        b = a + (b - a) * (d0 / d)
    return total / (n * steps_per * dt)


POINTWISE_SAFETY = 10.0


def compare_to_oracle(tr: Trajectory, p: LorenzParams | None = None, dt: float | None = None,
                      horizon: float = 2.0, transient_fraction: float = DEFAULT_TRANSIENT_FRACTION,
                      cluster_tol: float = DEFAULT_CLUSTER_TOL) -> OracleReport:
    """Short-horizon pointwise error and long-horizon structure against RK4.

    Pointwise bound at the horizon ``h``: ``n * e1 * exp(lambda h)`` times a
    safety factor, where ``e1`` is the one-step discrepancy, ``n = h / dt`` the
    number of local errors and ``lambda`` the divergence rate measured on the
    attractor (post-transient). Beyond the horizon only the bounding boxes and
    section clusters are compared.
    """
    p = tr.params if p is None else p
    dt = tr.dt if dt is None else dt
    if tr.steps == 0:
        return OracleReport(empty=True)
    oracle = run_trajectory(tr.xyz[0], p, dt, tr.steps, "rk4")
    n_h = min(tr.steps, int(round(horizon / dt)))
    err = np.abs(tr.xyz[: n_h + 1] - oracle.xyz[: n_h + 1]).max(axis=1)
    skip = int(round(transient_fraction * tr.steps))
    lam = lyapunov_estimate(tr.xyz[skip], p, dt)
    e1 = max(float(err[1]), np.finfo(float).eps * float(np.abs(tr.xyz[0]).max() + 1.0))
    bound = POINTWISE_SAFETY * n_h * e1 * math.exp(max(lam, 0.0) * n_h * dt)
    box = bounding_box_overlap(tr.xyz[skip:], oracle.xyz[skip:])
    rep = OracleReport(horizon=n_h * dt, pointwise_max_error=float(err.max()),
                       pointwise_bound=bound, lyapunov_estimate=lam, box_overlap=box)
    sec_a = poincare_section(tr, skip * dt)
    sec_b = poincare_section(oracle, skip * dt)
    if len(sec_a) and len(sec_b):
        rep.engine_period = detect_period(sec_a, cluster_tol)
        rep.oracle_period = detect_period(sec_b, cluster_tol)
    return rep
