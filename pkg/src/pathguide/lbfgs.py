"""Limited-memory BFGS with a backtracking (Armijo) line search."""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass
class MinimizeResult:
    x: np.ndarray
    fun: float
    iterations: int
    converged: bool
    reason: str


def minimize(
    fun: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    history: int = 8,
    max_iter: int = 200,
    gtol: float = 1e-6,
    ftol: float = 1e-8,
    deadline: float | None = None,
    c1: float = 1e-4,
    max_backtracks: int = 30,
) -> MinimizeResult:
    """Minimize ``fun`` (returning value and gradient) from ``x0``.

    ``deadline`` is an absolute ``time.perf_counter()`` value. The loop stops
    before starting an iteration it expects to overrun, judging by the mean
    duration of previous iterations. Every accepted step satisfies sufficient
    decrease, so the returned value never exceeds ``fun(x0)``.
    """
    x = np.array(x0, dtype=float)
    f, g = fun(x)
    s_hist: deque[np.ndarray] = deque(maxlen=history)
    y_hist: deque[np.ndarray] = deque(maxlen=history)
    started = time.perf_counter()

    it = 0
    while True:
        if np.linalg.norm(g) < gtol:
            return MinimizeResult(x, f, it, True, "gradient norm")
        if it >= max_iter:
            return MinimizeResult(x, f, it, False, "iteration cap")
        if deadline is not None:
            now = time.perf_counter()
            per_iter = (now - started) / it if it else 0.0
            if now + per_iter > deadline:
                return MinimizeResult(x, f, it, False, "time budget")

        d = -_two_loop(g, s_hist, y_hist)
        slope = float(g @ d)
        if slope >= 0:
            # lost descent; restart from steepest descent
            s_hist.clear()
            y_hist.clear()
            d = -g
            slope = float(g @ d)
        step = 1.0 if s_hist else min(1.0, 1.0 / np.linalg.norm(g))

        for _ in range(max_backtracks):
            x_new = x + step * d
            f_new, g_new = fun(x_new)
            if f_new <= f + c1 * step * slope:
                break
            step *= 0.5
        else:
            return MinimizeResult(x, f, it, False, "line search")

        s, y = x_new - x, g_new - g
        if s @ y > 1e-12 * (s @ s):
            s_hist.append(s)
            y_hist.append(y)
        decrease = f - f_new
        x, f, g = x_new, f_new, g_new
        it += 1
        if decrease <= ftol * max(abs(f), abs(f + decrease), 1.0):
            return MinimizeResult(x, f, it, True, "relative decrease")


def _two_loop(g, s_hist, y_hist):
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        q -= a * y
        alphas.append((rho, a))
    if s_hist:
        s, y = s_hist[-1], y_hist[-1]
        q *= (s @ y) / (y @ y)
    for (s, y), (rho, a) in zip(zip(s_hist, y_hist), reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return q
