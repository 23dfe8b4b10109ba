"""Classical Lorenz dynamics, its two explicit discretizations, and the
augmented linear recursion that turns each discrete step into a single
matrix-vector product on a vector of monomials.

States are plain length-3 float arrays ``(x, y, z)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LorenzParams",
    "TimeAdvanceMatrix",
    "lorenz_rhs",
    "divergence",
    "jacobian",
    "euler_step",
    "rk2_step",
    "rk4_oracle_step",
    "build_time_advance",
    "augmented_vector",
    "classical_augmented_step",
    "augmented_size",
    "fixed_points",
]


@dataclass(frozen=True)
class LorenzParams:
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0

    def __post_init__(self):
        for name in ("sigma", "rho", "beta"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")

    def validate_positive(self) -> None:
        if min(self.sigma, self.rho, self.beta) <= 0:
            raise ValueError(f"Lorenz parameters must be positive: {self}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.sigma, self.rho, self.beta)


@dataclass(frozen=True)
class TimeAdvanceMatrix:
    """Padded time-advance matrix: 8x8 for the Euler scheme, 16x16 for RK2."""

    order: int
    dt: float
    params: LorenzParams
    entries: np.ndarray
    variant: str = "exact"

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def num_qubits(self) -> int:
        return int(np.log2(self.dim))


def augmented_size(order: int) -> int:
    if order == 1:
        return 8
    if order == 2:
        return 16
    raise ValueError(f"order must be 1 or 2, got {order}")


def _as_state(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if s.shape != (3,):
        raise ValueError(f"state must have shape (3,), got {s.shape}")
    return s


def lorenz_rhs(s, p: LorenzParams) -> np.ndarray:
    x, y, z = _as_state(s)
    return np.array([p.sigma * (y - x), x * (p.rho - z) - y, x * y - p.beta * z])


def jacobian(s, p: LorenzParams) -> np.ndarray:
    x, y, z = _as_state(s)
    return np.array(
        [
            [-p.sigma, p.sigma, 0.0],
            [p.rho - z, -1.0, -x],
            [y, x, -p.beta],
        ]
    )


def divergence(p: LorenzParams) -> float:
    """Trace of the flow Jacobian; the same at every point of phase space."""
    return -(p.sigma + 1.0 + p.beta)


def fixed_points(p: LorenzParams) -> np.ndarray:
    """Origin followed by the symmetric pair C+ and C- (when rho > 1)."""
    pts = [np.zeros(3)]
    if p.rho > 1:
        c = np.sqrt(p.beta * (p.rho - 1.0))
        pts.append(np.array([c, c, p.rho - 1.0]))
        pts.append(np.array([-c, -c, p.rho - 1.0]))
    return np.array(pts)


def _check_dt(dt: float, strict: bool = False) -> None:
    if strict and not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if dt < 0:
        raise ValueError(f"dt must be non-negative, got {dt}")


def euler_step(s, p: LorenzParams, dt: float) -> np.ndarray:
    _check_dt(dt)
    s = _as_state(s)
    return s + dt * lorenz_rhs(s, p)


def rk2_step(s, p: LorenzParams, dt: float) -> np.ndarray:
    """Predictor-corrector (Heun) step."""
    _check_dt(dt)
    s = _as_state(s)
    f0 = lorenz_rhs(s, p)
    f1 = lorenz_rhs(s + dt * f0, p)
    return s + 0.5 * dt * (f0 + f1)


def rk4_oracle_step(s, p: LorenzParams, dt: float) -> np.ndarray:
    """Classical fourth-order Runge-Kutta step, used as the reference integrator."""
    _check_dt(dt)
    s = _as_state(s)
    k1 = lorenz_rhs(s, p)
    k2 = lorenz_rhs(s + 0.5 * dt * k1, p)
    k3 = lorenz_rhs(s + 0.5 * dt * k2, p)
    k4 = lorenz_rhs(s + dt * k3, p)
    return s + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _euler_block(p: LorenzParams, dt: float) -> np.ndarray:
    s, r, b = p.as_tuple()
    return np.array(
        [
            [1 - s * dt, s * dt, 0.0, 0.0, 0.0],
            [r * dt, 1 - dt, 0.0, 0.0, -dt],
            [0.0, 0.0, 1 - b * dt, dt, 0.0],
        ]
    )


def rk2_coefficients(p: LorenzParams, dt: float, variant: str = "exact") -> dict[str, float]:
    """Closed-form entries of the RK2 block, keyed a1..c12.

    ``variant="reduced"`` uses ``c10 = -sigma dt^2 / 2`` and drops the
    ``x^2``/``y^2`` columns. That matrix differs from the RK2 update by O(dt^2) in the z row. ``"exact"``
    uses ``c10 = -sigma dt^3 / 2`` and adds ``c11`` (x^2) and ``c12`` (y^2), which
    makes the augmented product reproduce the predictor-corrector identically.
    """
    if variant not in ("exact", "reduced"):
        raise ValueError(f"unknown coefficient variant {variant!r}")
    s, r, b = p.as_tuple()
    h = dt
    coeffs = {
        "a1": 1 - s * h + s * h**2 / 2 * (r + s),
        "a2": s * h * (1 - h / 2 - s * h / 2),
        "a5": -s * h**2 / 2,
        "b1": r * h * (1 - h / 2 - s * h / 2),
        "b2": 1 - h + h**2 / 2 + r * s * h**2 / 2,
        "b5": h / 2 * (-1 + h - (1 - b * h) * (1 - s * h)),
        "b6": -s * h**2 * (1 - b * h) / 2,
        "b7": -s * h**3 / 2,
        "b8": -(h**2) * (1 - s * h) / 2,
        "c3": 1 - b * h + b**2 * h**2 / 2,
        "c4": h / 2 * (1 - b * h + (1 - h) * (1 - s * h) + s * r * h**2),
        "c9": -(h**2) / 2 * (1 - s * h),
    }
    if variant == "reduced":
        coeffs["c10"] = -s * h**2 / 2
    else:
        coeffs["c10"] = -s * h**3 / 2
        coeffs["c11"] = r * h**2 * (1 - s * h) / 2
        coeffs["c12"] = s * h**2 * (1 - h) / 2
    return coeffs


# (row, column) of every named coefficient inside the 3x12 block
_RK2_LAYOUT = {
    "a1": (0, 0), "a2": (0, 1), "a5": (0, 4),
    "b1": (1, 0), "b2": (1, 1), "b5": (1, 4), "b6": (1, 5), "b7": (1, 6), "b8": (1, 7),
    "c3": (2, 2), "c4": (2, 3), "c9": (2, 8), "c10": (2, 9), "c11": (2, 10), "c12": (2, 11),
}


def _rk2_block(p: LorenzParams, dt: float, variant: str) -> np.ndarray:
    block = np.zeros((3, 12))
    for name, value in rk2_coefficients(p, dt, variant).items():
        block[_RK2_LAYOUT[name]] = value
    return block


def build_time_advance(
    order: int, p: LorenzParams, dt: float, variant: str = "exact"
) -> TimeAdvanceMatrix:
    _check_dt(dt, strict=True)
    dim = augmented_size(order)
    block = _euler_block(p, dt) if order == 1 else _rk2_block(p, dt, variant)
    entries = np.zeros((dim, dim))
    entries[: block.shape[0], : block.shape[1]] = block
    return TimeAdvanceMatrix(order=order, dt=float(dt), params=p, entries=entries, variant=variant)


def augmented_vector(order: int, s, variant: str = "exact") -> np.ndarray:
    """Monomial vector in the layout consumed by the time-advance matrix.

    order 1: [x, y, z, xy, xz, 0, 0, 0]
    order 2: [x, y, z, xy, xz, yz, xy^2, x^2y, x^2z, xyz, x^2, y^2, 0 x 4]

    The two trailing quadratic slots are only read by the exact RK2 matrix;
    ``variant="reduced"`` leaves them zero.
    """
    x, y, z = _as_state(s)
    out = np.zeros(augmented_size(order))
    if order == 1:
        out[:5] = (x, y, z, x * y, x * z)
    else:
        out[:12] = (
            x, y, z, x * y, x * z, y * z, x * y * y, x * x * y, x * x * z, x * y * z, x * x, y * y
        )
        if variant == "reduced":
            out[10:] = 0.0
    return out


def classical_augmented_step(
    order: int, s, p: LorenzParams, dt: float, variant: str = "exact"
) -> np.ndarray:
    mat = build_time_advance(order, p, dt, variant)
    return (mat.entries @ augmented_vector(order, s, variant))[:3]
