"""Parareal iteration with explicit fine and implicit coarse propagators.

The fine propagator marches the Schur-reduced ODE with the switching
excitation; the coarse propagator marches the full DAE implicitly with the
smooth fundamental-component excitation. Fine solves within one iteration
run concurrently; the correction update is strictly sequential in window
order, so results do not depend on the worker count.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .integrators import (
    ImplicitOperator,
    StabilityError,
    TimeGrid,
    propagate_coarse,
    propagate_fine,
    stability_bound,
)


@dataclass
class PararealConfig:
    n_windows: int
    t_start: float
    t_end: float
    h_fine: float
    fine_signal: object = None
    coarse_signal: object = None
    H_coarse: float = None
    reltol: float = 1e-4
    abstol: float = 1e-10
    max_iter: int = None
    workers: int = None
    a0: np.ndarray = None

    def __post_init__(self):
        if self.n_windows < 1:
            raise ValueError("n_windows must be >= 1")
        if self.t_end <= self.t_start:
            raise ValueError("t_end must exceed t_start")
        if self.h_fine <= 0.0:
            raise ValueError("h_fine must be positive")
        window = (self.t_end - self.t_start) / self.n_windows
        if self.H_coarse is None:
            self.H_coarse = window
        ratio = window / self.H_coarse
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("H_coarse must divide the window length")
        if self.max_iter is None:
            self.max_iter = self.n_windows
        if self.reltol < 0.0 or self.abstol < 0.0:
            raise ValueError("tolerances must be non-negative")

    @property
    def window_length(self):
        return (self.t_end - self.t_start) / self.n_windows

    def boundaries(self):
        return np.linspace(self.t_start, self.t_end, self.n_windows + 1)


@dataclass
class PararealRun:
    """Window-boundary states and jump norms per iteration.

    ``states[k][n]`` is the full-length state at boundary T_n after
    iteration k (k = 0 is the initial coarse sweep); ``jump_norms[k - 1][n - 1]``
    holds the l2 update increment at T_n in iteration k >= 1.
    """

    boundaries: np.ndarray
    states: list
    jump_norms: list = field(default_factory=list)
    iterations_used: int = 0
    converged: bool = False
    fine_stability_bound: float = float("nan")
    timings: dict = field(default_factory=dict)

    @property
    def n_windows(self):
        return len(self.boundaries) - 1

    @property
    def speedup_theoretical(self):
        return self.n_windows / self.iterations_used if self.iterations_used else float("nan")


def theoretical_speedup(n_windows, iterations_used):
    """Speedup over a sequential fine run, neglecting coarse/communication cost."""
    return n_windows / iterations_used


def check_convergence(run, k, reltol, abstol):
    """Jump criterion: every boundary increment below abstol + reltol*norm."""
    if k < 1:
        raise ValueError("convergence is defined for iterations k >= 1")
    jumps = run.jump_norms[k - 1]
    for n in range(1, run.n_windows + 1):
        if jumps[n - 1] > abstol + reltol * np.linalg.norm(run.states[k][n]):
            return False
    return True


def run_parareal(cfg, sys, red):
    """Run the Parareal iteration; returns the populated PararealRun.

    Raises StabilityError before any work if h_fine exceeds the explicit
    stability bound of the reduced system.
    """
    import time as _time

    N = cfg.n_windows
    bound = stability_bound(red)
    if cfg.h_fine > bound:
        raise StabilityError(
            f"fine step {cfg.h_fine:g} exceeds stability limit {bound:g}"
        )
    T = cfg.boundaries()
    a0 = np.zeros(sys.n_dof) if cfg.a0 is None else np.asarray(cfg.a0, dtype=float)

    op = ImplicitOperator.build(sys, cfg.H_coarse)
    coarse_windows = [TimeGrid(T[n - 1], T[n], cfg.H_coarse) for n in range(1, N + 1)]
    fine_windows = [TimeGrid(T[n - 1], T[n], cfg.h_fine) for n in range(1, N + 1)]

    def G(n, a):
        return propagate_coarse(sys, op, a, coarse_windows[n - 1], cfg.coarse_signal)

    def F(n, a):
        return propagate_fine(red, a, fine_windows[n - 1], cfg.fine_signal, bound=bound)

    run = PararealRun(boundaries=T, states=[], fine_stability_bound=bound)

    t0 = _time.perf_counter()
    X = [a0]
    for n in range(1, N + 1):
        X.append(G(n, X[n - 1]))
    run.states.append(X)
    G_prev = [None] + [run.states[0][n] for n in range(1, N + 1)]
    # G_prev[n] currently equals G(T_n, T_{n-1}, X^0_{n-1}) since iteration 0
    # is a pure coarse sweep
    run.timings["coarse_initial"] = _time.perf_counter() - t0

    fine_time = 0.0
    update_time = 0.0
    for k in range(1, cfg.max_iter + 1):
        prev = run.states[k - 1]

        t0 = _time.perf_counter()
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            F_vals = list(pool.map(lambda n: F(n, prev[n - 1]), range(1, N + 1)))
        fine_time += _time.perf_counter() - t0

        t0 = _time.perf_counter()
        X = [a0]
        G_curr = [None]
        jumps = np.empty(N)
        for n in range(1, N + 1):
            g = G(n, X[n - 1])
            G_curr.append(g)
            x_new = F_vals[n - 1] + g - G_prev[n]
            X.append(x_new)
            jumps[n - 1] = np.linalg.norm(x_new - prev[n])
        run.states.append(X)
        run.jump_norms.append(jumps)
        G_prev = G_curr
        run.iterations_used = k
        update_time += _time.perf_counter() - t0

        # k = N is exact by finite termination even if the last jump is large
        if check_convergence(run, k, cfg.reltol, cfg.abstol) or k == N:
            run.converged = True
            break

    run.timings["fine_total"] = fine_time
    run.timings["coarse_update"] = update_time
    return run


def sequential_reference(cfg, sys, red, level="fine"):
    """Single-sweep sequential integration; states at every window boundary."""
    N = cfg.n_windows
    T = cfg.boundaries()
    a = np.zeros(sys.n_dof) if cfg.a0 is None else np.asarray(cfg.a0, dtype=float)
    states = [a]
    if level == "fine":
        bound = stability_bound(red)
        for n in range(1, N + 1):
            a = propagate_fine(red, a, TimeGrid(T[n - 1], T[n], cfg.h_fine),
                               cfg.fine_signal, bound=bound)
            states.append(a)
    elif level == "coarse":
        op = ImplicitOperator.build(sys, cfg.H_coarse)
        for n in range(1, N + 1):
            a = propagate_coarse(sys, op, a, TimeGrid(T[n - 1], T[n], cfg.H_coarse),
                                 cfg.coarse_signal)
            states.append(a)
    else:
        raise ValueError("level must be 'fine' or 'coarse'")
    return states
