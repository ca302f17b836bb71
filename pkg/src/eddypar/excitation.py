"""Source current waveforms: PWM drive and its fundamental sine component."""

import math
from dataclasses import dataclass

import numpy as np

KINDS = ("pwm", "sine", "dc")


@dataclass(frozen=True)
class ExcitationSignal:
    """Two-level PWM, sine or DC current source.

    The sine branch is the fundamental component of the PWM branch:
    amplitude ``m_a * I0`` at frequency ``f_sin``.
    """

    kind: str = "sine"
    I0: float = 1.0
    f_sin: float = 50.0
    f_pwm: float = 1000.0
    m_a: float = 0.8

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown excitation kind {self.kind!r}")
        if self.I0 <= 0.0:
            raise ValueError("I0 must be positive")
        if self.kind in ("pwm", "sine"):
            if self.f_sin <= 0.0:
                raise ValueError("f_sin must be positive")
            if not 0.0 < self.m_a <= 1.0:
                raise ValueError("m_a must lie in (0, 1]")
        if self.kind == "pwm":
            if self.f_pwm <= self.f_sin:
                raise ValueError("f_pwm must exceed f_sin")
            ratio = self.f_pwm / self.f_sin
            if abs(ratio - round(ratio)) > 1e-9 * ratio:
                raise ValueError("f_pwm must be an integer multiple of f_sin")

    def __call__(self, t):
        return evaluate(self, t)


def triangular_carrier(t, f_pwm):
    """Symmetric triangle in [-1, 1], zero and ascending at t = 0."""
    return (2.0 / math.pi) * np.arcsin(np.sin(2.0 * math.pi * f_pwm * np.asarray(t)))


def evaluate(sig, t):
    """Current i(t) in A; accepts scalar or array t >= 0.

    PWM uses natural sampling: the output is +I0 where the reference
    ``m_a*sin(2*pi*f_sin*t)`` meets or exceeds the triangular carrier
    (ties resolve to +I0), else -I0.
    """
    t = np.asarray(t, dtype=float)
    if sig is None:
        out = np.zeros_like(t)
    elif sig.kind == "dc":
        out = np.full_like(t, sig.I0)
    elif sig.kind == "sine":
        out = sig.m_a * sig.I0 * np.sin(2.0 * math.pi * sig.f_sin * t)
    else:
        ref = sig.m_a * np.sin(2.0 * math.pi * sig.f_sin * t)
        out = np.where(ref >= triangular_carrier(t, sig.f_pwm), sig.I0, -sig.I0)
    return out if out.ndim else float(out)


def fundamental_amplitude(sig, samples_per_carrier=64):
    """Magnitude of the f_sin Fourier coefficient of one PWM period.

    Trapezoidal quadrature with ``samples_per_carrier`` points per carrier
    period (at least 64). Only defined for the PWM branch.
    """
    if sig.kind != "pwm":
        raise ValueError("fundamental_amplitude is only defined for PWM signals")
    samples_per_carrier = max(int(samples_per_carrier), 64)
    ratio = int(round(sig.f_pwm / sig.f_sin))
    n = samples_per_carrier * ratio
    period = 1.0 / sig.f_sin
    t = np.linspace(0.0, period, n + 1)
    i_t = evaluate(sig, t)
    w = 2.0 * math.pi * sig.f_sin * t
    a1 = np.trapezoid(i_t * np.cos(w), t) * 2.0 / period
    b1 = np.trapezoid(i_t * np.sin(w), t) * 2.0 / period
    return math.hypot(a1, b1)
