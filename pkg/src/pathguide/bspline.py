"""Uniform B-spline trajectories.

Knots are ``t_i = t0 + i * dt``; with ``N + 1`` control points and degree
``p`` the valid domain is ``[t_p, t_{N+1}]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial
from pathlib import Path

import numpy as np

from .exceptions import DomainError, RejectedInput

_DOMAIN_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class UniformBSpline:
    ctrl_pts: np.ndarray
    dt: float
    degree: int = 3
    t0: float = 0.0

    def __post_init__(self):
        pts = np.array(self.ctrl_pts, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if self.degree < 0:
            raise RejectedInput("degree must be non-negative")
        if not self.dt > 0:
            raise RejectedInput(f"knot interval must be positive, got {self.dt}")
        if len(pts) < self.degree + 1:
            raise RejectedInput(
                f"degree {self.degree} needs at least {self.degree + 1} control points, got {len(pts)}"
            )
        pts.setflags(write=False)
        object.__setattr__(self, "ctrl_pts", pts)
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def n(self) -> int:
        """Index of the last control point (``N``)."""
        return len(self.ctrl_pts) - 1

    @property
    def domain(self) -> tuple[float, float]:
        return self.t0 + self.degree * self.dt, self.t0 + (self.n + 1) * self.dt

    @property
    def duration(self) -> float:
        lo, hi = self.domain
        return hi - lo

    @property
    def free_slice(self) -> slice:
        """Control points not pinned by boundary states: ``Q_p .. Q_{N-p}``."""
        return slice(self.degree, self.n - self.degree + 1)

    def with_ctrl_pts(self, ctrl_pts) -> UniformBSpline:
        return UniformBSpline(ctrl_pts, self.dt, self.degree, self.t0)

    def translated(self, offset) -> UniformBSpline:
        return self.with_ctrl_pts(self.ctrl_pts + np.asarray(offset, dtype=float))

    def evaluate(self, t):
        """de Boor evaluation at scalar or array ``t``."""
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        lo, hi = self.domain
        slack = _DOMAIN_SLACK * max(1.0, abs(lo), abs(hi))
        if np.any(t < lo - slack) or np.any(t > hi + slack):
            raise DomainError(f"t outside valid domain [{lo}, {hi}]")
        t = np.clip(t, lo, hi)

        p, dt = self.degree, self.dt
        k = np.clip(np.floor((t - self.t0) / dt).astype(np.intp), p, self.n)
        idx = k[:, None] - p + np.arange(p + 1)
        d = self.ctrl_pts[idx]  # (m, p+1, dim)
        for r in range(1, p + 1):
            for j in range(p, r - 1, -1):
                left = self.t0 + (j + k - p) * dt
                alpha = ((t - left) / ((p + 1 - r) * dt))[:, None]
                d[:, j] = (1.0 - alpha) * d[:, j - 1] + alpha * d[:, j]
        out = d[:, p]
        return out[0] if scalar else out

    def derivative(self) -> UniformBSpline:
        """Time derivative as a degree ``p - 1`` uniform B-spline."""
        if self.degree < 1 or self.n < 1:
            raise RejectedInput("cannot differentiate a degree-0 or single-point spline")
        return UniformBSpline(np.diff(self.ctrl_pts, axis=0) / self.dt, self.dt, self.degree - 1, self.t0 + self.dt)

    def derivative_ctrl_pts(self) -> DerivativeCtrlPts:
        if self.n < 2:
            raise RejectedInput("need at least three control points for acceleration points")
        vel = np.diff(self.ctrl_pts, axis=0) / self.dt
        return DerivativeCtrlPts(velocity=vel, acceleration=np.diff(vel, axis=0) / self.dt)


@dataclass(frozen=True, eq=False)
class DerivativeCtrlPts:
    velocity: np.ndarray
    acceleration: np.ndarray


def basis_matrix(degree: int) -> np.ndarray:
    """Uniform B-spline basis matrix ``M``.

    Inside span k with local parameter ``u in [0, 1)`` the curve equals
    ``[1, u, .., u^p] @ M @ Q[k-p : k+1]``.
    """
    p = degree
    m = np.zeros((p + 1, p + 1))
    for i in range(p + 1):
        for j in range(p + 1):
            m[i, j] = comb(p, i) * sum(
                (-1) ** (s - j) * comb(p + 1, s - j) * (p - s) ** (p - i) for s in range(j, p + 1)
            )
    return m / factorial(p)


def _design_row(spline_dim_n: int, degree: int, dt: float, t0: float, times, order: int = 0):
    """Weights of each control point in the ``order``-th derivative at ``times``."""
    basis = UniformBSpline(np.eye(spline_dim_n), dt, degree, t0)
    for _ in range(order):
        basis = basis.derivative()
    return basis.evaluate(times)


def boundary_ctrl_pts(states, degree: int, dt: float, at_end: bool) -> np.ndarray:
    """The ``p`` control points that pin position and derivatives ``0..p-1`` at a boundary knot.

    ``states`` is ``(p, dim)``: position, velocity, acceleration, ... At a knot
    the first ``p`` derivatives depend only on ``p`` control points, so this is
    a square ``p x p`` solve (for cubic: the classic 3x3 position/velocity/
    acceleration system).
    """
    states = np.asarray(states, dtype=float)
    p = degree
    if states.shape[0] != p:
        raise RejectedInput(f"expected {p} boundary derivatives, got {states.shape[0]}")
    m = basis_matrix(p)
    u = 1 if at_end else 0
    # r-th derivative of [1, u, .., u^p] @ M at the span boundary u
    rows = np.array(
        [[_power_derivative(i, r, u) for i in range(p + 1)] for r in range(p)], dtype=float
    ) @ m / (dt ** np.arange(p))[:, None]
    # the outermost control point of the span has zero weight below order p
    return np.linalg.solve(rows[:, 1:] if at_end else rows[:, :p], states)


def _power_derivative(i: int, r: int, u: int) -> float:
    """d^r/du^r of u^i at u in {0, 1}."""
    if r > i:
        return 0.0
    coeff = factorial(i) // factorial(i - r)
    return float(coeff) if (u == 1 or i == r) else 0.0


def reparameterize_segment(
    times,
    points,
    degree: int = 3,
    dt: float = 0.5,
    start_state=None,
    end_state=None,
    ridge: float = 1e-8,
) -> UniformBSpline:
    """Least-squares uniform B-spline through timestamped samples.

    The span count is ``round(duration / dt)``; the knot interval is then
    adjusted so the valid domain is exactly ``[times[0], times[-1]]``. When a
    boundary state ``(p, dim)`` is given, the ``p`` control points at that end
    are solved from it and held fixed in the fit.
    """
    times = np.asarray(times, dtype=float)
    points = np.asarray(points, dtype=float)
    if times.ndim != 1 or len(times) != len(points):
        raise RejectedInput("times and points must align")
    if len(times) < degree + 1:
        raise RejectedInput(f"need at least {degree + 1} samples, got {len(times)}")
    if np.any(np.diff(times) <= 0):
        raise RejectedInput("timestamps must be strictly increasing")

    duration = times[-1] - times[0]
    min_spans = degree + 1 if (start_state is not None and end_state is not None) else 1
    spans = max(int(round(duration / dt)), min_spans)
    dt = duration / spans
    n_pts = spans + degree
    t0 = times[0] - degree * dt

    fixed = np.zeros(n_pts, dtype=bool)
    ctrl = np.zeros((n_pts, points.shape[1]))
    if start_state is not None:
        ctrl[:degree] = boundary_ctrl_pts(start_state, degree, dt, at_end=False)
        fixed[:degree] = True
    if end_state is not None:
        ctrl[-degree:] = boundary_ctrl_pts(end_state, degree, dt, at_end=True)
        fixed[-degree:] = True

    a = _design_row(n_pts, degree, dt, t0, times)
    free = ~fixed
    if free.any():
        af = a[:, free]
        rhs = points - a[:, fixed] @ ctrl[fixed]
        lhs = af.T @ af + ridge * np.eye(af.shape[1])
        ctrl[free] = np.linalg.solve(lhs, af.T @ rhs)
    return UniformBSpline(ctrl, dt, degree, t0)


def smoothness_metric(spline: UniformBSpline, substeps: int = 20) -> float:
    """Integrated squared jerk over the valid domain (m^2/s^5).

    Midpoint sampling at ``dt / substeps``; exact for cubic splines, whose jerk
    is constant on each knot span.
    """
    if spline.n < 3:
        raise RejectedInput("smoothness needs at least four control points")
    if spline.degree < 3:
        return 0.0
    jerk = spline.derivative().derivative().derivative()
    lo, hi = spline.domain
    h = spline.dt / substeps
    count = int(round((hi - lo) / h))
    mids = lo + (np.arange(count) + 0.5) * h
    return float(np.sum(jerk.evaluate(mids) ** 2) * h)


def save_trajectory(path, spline: UniformBSpline) -> None:
    lines = [f"{spline.degree} {spline.dt!r} {spline.n}"]
    lines.extend(" ".join(repr(float(c)) for c in q) for q in spline.ctrl_pts)
    Path(path).write_text("\n".join(lines) + "\n")


def load_trajectory(path) -> UniformBSpline:
    rows = Path(path).read_text().split("\n")
    degree, dt, n = rows[0].split()
    pts = np.array([[float(c) for c in r.split()] for r in rows[1:] if r.strip()])
    if len(pts) != int(n) + 1:
        raise RejectedInput(f"{path}: header says N={n} but found {len(pts)} control points")
    return UniformBSpline(pts, float(dt), int(degree))
