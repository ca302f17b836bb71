"""Pure-Python explicit march, the reference for the compiled kernel."""

from ..excitation import evaluate


def explicit_step(red, a_c, t_i, h, sig):
    """Single forward-Euler step on the reduced ODE (left-endpoint sampling)."""
    return a_c - h * (red.apply_schur(a_c) / red.Mbar) + (h * evaluate(sig, t_i)) * red.Ybar


def explicit_march(red, a_c, t0, h, n_steps, sig):
    """March ``n_steps`` uniform explicit-Euler steps starting at t0."""
    a = a_c.copy()
    for i in range(n_steps):
        a = explicit_step(red, a, t0 + i * h, h, sig)
    return a
