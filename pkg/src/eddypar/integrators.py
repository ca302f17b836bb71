"""Time integrators: implicit Euler on the full DAE, explicit Euler on the
reduced ODE, window propagators and the explicit stability bound."""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import kernels
from .excitation import evaluate
from .model import reconstruct_nc


class StabilityError(RuntimeError):
    """Requested explicit step size exceeds the stability limit."""


class SingularOperatorError(RuntimeError):
    """The implicit operator M/H + K could not be factorized."""


class PowerIterationError(RuntimeError):
    """Power iteration failed to converge; carries the best estimate."""

    def __init__(self, message, best_estimate):
        super().__init__(message)
        self.best_estimate = best_estimate


@dataclass(frozen=True)
class TimeGrid:
    """Uniform steps over [t_start, t_end]; the last step is shortened so the
    accumulated time lands exactly on t_end."""

    t_start: float
    t_end: float
    step: float

    def __post_init__(self):
        if self.t_end <= self.t_start:
            raise ValueError("t_end must exceed t_start")
        if self.step <= 0.0:
            raise ValueError("step must be positive")

    @property
    def span(self):
        return self.t_end - self.t_start

    @property
    def n_steps(self):
        n = int(math.ceil(self.span / self.step - 1e-12))
        return max(n, 1)

    @property
    def last_step(self):
        return self.span - (self.n_steps - 1) * self.step

    def times(self):
        t = self.t_start + self.step * np.arange(self.n_steps + 1)
        t[-1] = self.t_end
        return t


@dataclass(frozen=True, eq=False)
class ImplicitOperator:
    """Reusable factorization of M_sigma/H + K_nu for a fixed step H."""

    H: float
    matrix: sp.csc_matrix = field(repr=False)
    lu: object = field(repr=False)

    @classmethod
    def build(cls, sys, H):
        if H <= 0.0:
            raise ValueError("H must be positive")
        A = (sp.diags(sys.M_sigma / H) + sys.K_nu).tocsc()
        try:
            lu = splu(A)
        except (RuntimeError, ValueError) as exc:
            raise SingularOperatorError(f"singular implicit operator: {exc}") from exc
        return cls(H=H, matrix=A, lu=lu)

    def apply(self, v):
        return self.matrix @ v


def implicit_euler_step(sys, op, a_i, t_next, H, sig):
    """One backward-Euler step on the full DAE.

    Solves (M/H + K) a_{i+1} = (M/H) a_i + X_s i(t_next); the excitation is
    sampled at the new time level.
    """
    if not math.isclose(H, op.H, rel_tol=1e-12):
        raise ValueError(f"step H={H} does not match the operator's H={op.H}")
    rhs = (sys.M_sigma / H) * a_i + sys.X_s * evaluate(sig, t_next)
    a_next = op.lu.solve(rhs)
    if not np.all(np.isfinite(a_next)):
        raise SingularOperatorError("implicit solve produced non-finite values")
    return a_next


def explicit_euler_step(red, a_c_i, t_i, h, sig):
    """One forward-Euler step on the Schur-reduced ODE.

    a_{c,i+1} = a_c - h Mbar^{-1} S a_c + h Ybar i(t_i); the excitation is
    sampled at the old time level and S acts through the K22 factorization.
    """
    return a_c_i - h * (red.apply_schur(a_c_i) / red.Mbar) + (h * evaluate(sig, t_i)) * red.Ybar


def stability_bound(red, reltol=1e-6, max_iter=10000, safety=0.999):
    """Largest stable explicit step, safety * 2 / lambda_max(Mbar^{-1} S).

    lambda_max is estimated by power iteration on the symmetrized operator
    Mbar^{-1/2} S Mbar^{-1/2}; raises PowerIterationError (carrying the
    best estimate) if the Rayleigh quotient has not settled to ``reltol``
    within ``max_iter`` iterations.
    """
    n = red.n_c
    inv_sqrt_m = 1.0 / np.sqrt(red.Mbar)

    def apply_sym(v):
        return inv_sqrt_m * red.apply_schur(inv_sqrt_m * v)

    rng = np.random.default_rng(2024)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = apply_sym(v)
        lam_new = float(v @ w)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            raise PowerIterationError("operator annihilated the iterate", lam)
        v = w / norm_w
        if abs(lam_new - lam) <= reltol * abs(lam_new):
            return safety * 2.0 / lam_new
        lam = lam_new
    raise PowerIterationError(
        f"power iteration did not converge within {max_iter} iterations", lam
    )


def propagate_fine(red, a0_full, window, sig, bound=None):
    """Explicit-Euler march of the reduced ODE across one window.

    Restricts the full initial state to the conducting block, marches with
    the left-endpoint excitation sample, reconstructs the non-conducting
    block at the window end and returns the full-length state. Refuses to
    run if the step size exceeds the stability bound.
    """
    if bound is None:
        bound = stability_bound(red)
    if window.step > bound:
        raise StabilityError(
            f"explicit step {window.step:g} exceeds stability limit {bound:g}"
        )
    a_c = np.asarray(a0_full, dtype=float)[red.idx_c].copy()
    n = window.n_steps
    h_last = window.last_step
    n_uniform = n if math.isclose(h_last, window.step, rel_tol=1e-9) else n - 1
    a_c = kernels.explicit_march(red, a_c, window.t_start, window.step, n_uniform, sig)
    if n_uniform < n:
        t_i = window.t_start + n_uniform * window.step
        a_c = explicit_euler_step(red, a_c, t_i, h_last, sig)
    a_nc = reconstruct_nc(red, a_c, evaluate(sig, window.t_end))
    return red.embed(a_c, a_nc)


def propagate_coarse(sys, op, a0, window, sig):
    """Implicit-Euler march of the full DAE across one window.

    The window step must match the operator's H; a shortened final step
    triggers a one-off factorization for that step.
    """
    if not math.isclose(window.step, op.H, rel_tol=1e-12):
        raise ValueError("window step does not match the implicit operator's H")
    a = np.asarray(a0, dtype=float).copy()
    times = window.times()
    for i in range(window.n_steps):
        H_i = times[i + 1] - times[i]
        if math.isclose(H_i, op.H, rel_tol=1e-9):
            a = implicit_euler_step(sys, op, a, times[i + 1], op.H, sig)
        else:
            op_i = ImplicitOperator.build(sys, H_i)
            a = implicit_euler_step(sys, op_i, a, times[i + 1], H_i, sig)
    return a
