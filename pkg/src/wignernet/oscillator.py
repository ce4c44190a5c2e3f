"""Closed-form phase-space dynamics of Gaussian states in a 1-D harmonic oscillator.

For H = p^2/(2m) + (1/2) m omega^2 x^2 a Gaussian wave packet stays Gaussian,
so its Wigner function is a separable 2-D Gaussian at all times and the state
is captured by four numbers: the packet center (x(t), p(t)) and the widths
(sigma_x(t), sigma_p(t)).  The center follows the classical rotation

    x(t) = x0 cos(omega t) + (p0 / (m omega)) sin(omega t)
    p(t) = p0 cos(omega t) - m omega x0 sin(omega t)

and the position variance evolves as

    sigma_x(t)^2 = sigma_x0^2 cos^2(omega t)
                   + (sigma_p0^2 / (m omega)^2) sin^2(omega t)
                   + (hbar / (2 m omega)) sin(2 omega t)
                     * (sigma_p0 / (m omega sigma_x0) - m omega sigma_x0 / sigma_p0)

with sigma_p0 = hbar / (2 sigma_x0) and sigma_p(t) = m omega sigma_x(t).

The variance expression above is not positive for every input; evaluation
takes sqrt(|sigma_x(t)^2|) and flags the sign flip (see evolve_widths) rather
than failing.  A fixed-step RK4 integrator of the classical equations of
motion is provided as an independent cross-check of the mean evolution.

Everything here is a pure function of its arguments (thread-safe), computed
in 64-bit floating point, with m = omega = 1 style dimensionless units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class OscillatorConfig:
    """Fixed dynamical setting: mass, angular frequency, evolution time."""

    m: float = 1.0
    omega: float = 1.0
    t: float = 5.0

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError(f"mass must be positive, got {self.m}")
        if not self.omega > 0:
            raise ValueError(f"angular frequency must be positive, got {self.omega}")
        if not self.t >= 0:
            raise ValueError(f"evolution time must be nonnegative, got {self.t}")


@dataclass
class InitialState:
    """Initial Gaussian packet: center (x0, p0), position width sigma_x0, and hbar."""

    x0: float
    p0: float
    sigma_x0: float
    hbar: float

    def __post_init__(self):
        if not self.sigma_x0 > 0:
            raise ValueError(f"sigma_x0 must be positive, got {self.sigma_x0}")
        if not self.hbar > 0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")


@dataclass
class EvolvedState:
    """Packet parameters after evolution: center (xt, pt) and widths."""

    xt: float
    pt: float
    sigma_xt: float
    sigma_pt: float

    def as_array(self) -> np.ndarray:
        return np.array([self.xt, self.pt, self.sigma_xt, self.sigma_pt])


@dataclass
class GaussianWigner:
    """Separable Gaussian Wigner function on phase space.

    W(x, p) = 1/(pi hbar) exp(-(x - center_x)^2 / (2 sigma_x^2)
                              -(p - center_p)^2 / (2 sigma_p^2))

    The value at the center is 1/(pi hbar); the function integrates to
    2 sigma_x sigma_p / hbar, which is 1 exactly at minimum uncertainty
    (sigma_x sigma_p = hbar / 2).
    """

    center_x: float
    center_p: float
    sigma_x: float
    sigma_p: float
    hbar: float

    def __post_init__(self):
        if not self.sigma_x > 0:
            raise ValueError(f"sigma_x must be positive, got {self.sigma_x}")
        if not self.sigma_p > 0:
            raise ValueError(f"sigma_p must be positive, got {self.sigma_p}")
        if not self.hbar > 0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")


def sigma_p0(state: InitialState) -> float:
    """Initial momentum width hbar / (2 sigma_x0) of a minimum-uncertainty packet."""
    return state.hbar / (2.0 * state.sigma_x0)


def evolve_mean(cfg: OscillatorConfig, state: InitialState) -> tuple[float, float]:
    """Packet center at time t: an exact rotation in (x, p/(m omega)) coordinates."""
    c = np.cos(cfg.omega * cfg.t)
    s = np.sin(cfg.omega * cfg.t)
    xt = state.x0 * c + (state.p0 / (cfg.m * cfg.omega)) * s
    pt = state.p0 * c - cfg.m * cfg.omega * state.x0 * s
    return float(xt), float(pt)


def evolve_widths(cfg: OscillatorConfig, state: InitialState) -> tuple[float, float, bool]:
    """Packet widths at time t.

    Returns (sigma_xt, sigma_pt, clamped).  The variance formula can produce
    a negative value; sigma_xt is then sqrt of the absolute value and
    `clamped` is True so callers can count how often the flip happened.
    sigma_pt is m omega sigma_xt.
    """
    m, w, t = cfg.m, cfg.omega, cfg.t
    sp0 = sigma_p0(state)
    c = np.cos(w * t)
    s = np.sin(w * t)
    var = (
        state.sigma_x0**2 * c**2
        + (sp0**2 / (m**2 * w**2)) * s**2
        + (state.hbar / (2.0 * m * w))
        * np.sin(2.0 * w * t)
        * (sp0 / (m * w * state.sigma_x0) - m * w * state.sigma_x0 / sp0)
    )
    clamped = bool(var < 0.0)
    sigma_xt = float(np.sqrt(np.abs(var)))
    return sigma_xt, m * w * sigma_xt, clamped


def evolve(cfg: OscillatorConfig, state: InitialState) -> EvolvedState:
    """Full closed-form evolution of the four packet parameters."""
    xt, pt = evolve_mean(cfg, state)
    sigma_xt, sigma_pt, _ = evolve_widths(cfg, state)
    return EvolvedState(xt=xt, pt=pt, sigma_xt=sigma_xt, sigma_pt=sigma_pt)


def evolve_batch(cfg: OscillatorConfig, inputs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized evolve over an (N, 4) matrix of (x0, p0, sigma_x0, hbar) rows.

    Returns the (N, 4) matrix of (xt, pt, sigma_xt, sigma_pt) rows and an
    (N,) boolean vector marking rows whose variance went negative before the
    absolute value.  Rows violating the input invariants raise ValueError
    with the offending row index.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[1] != 4:
        raise ValueError(f"inputs must be an (N, 4) matrix, got shape {inputs.shape}")
    if not np.all(np.isfinite(inputs)):
        row = int(np.argwhere(~np.isfinite(inputs).all(axis=1))[0, 0])
        raise ValueError(f"row {row}: non-finite input value")
    bad_sigma = inputs[:, 2] <= 0
    if np.any(bad_sigma):
        row = int(np.argmax(bad_sigma))
        raise ValueError(f"row {row}: sigma_x0 must be positive, got {inputs[row, 2]}")
    bad_hbar = inputs[:, 3] <= 0
    if np.any(bad_hbar):
        row = int(np.argmax(bad_hbar))
        raise ValueError(f"row {row}: hbar must be positive, got {inputs[row, 3]}")

    m, w, t = cfg.m, cfg.omega, cfg.t
    x0, p0, sx0, hbar = inputs[:, 0], inputs[:, 1], inputs[:, 2], inputs[:, 3]
    c = np.cos(w * t)
    s = np.sin(w * t)
    xt = x0 * c + (p0 / (m * w)) * s
    pt = p0 * c - m * w * x0 * s
    sp0 = hbar / (2.0 * sx0)
    var = (
        sx0**2 * c**2
        + (sp0**2 / (m**2 * w**2)) * s**2
        + (hbar / (2.0 * m * w)) * np.sin(2.0 * w * t) * (sp0 / (m * w * sx0) - m * w * sx0 / sp0)
    )
    clamped = var < 0.0
    sigma_xt = np.sqrt(np.abs(var))
    targets = np.column_stack([xt, pt, sigma_xt, m * w * sigma_xt])
    return targets, clamped


def wigner_value(w: GaussianWigner, x, p):
    """Evaluate W at (x, p); accepts scalars or broadcastable arrays."""
    ex = (np.asarray(x, dtype=np.float64) - w.center_x) ** 2 / (2.0 * w.sigma_x**2)
    ep = (np.asarray(p, dtype=np.float64) - w.center_p) ** 2 / (2.0 * w.sigma_p**2)
    val = np.exp(-ex - ep) / (np.pi * w.hbar)
    if np.ndim(val) == 0:
        return float(val)
    return val


def wigner_grid(
    w: GaussianWigner,
    x_min: float,
    x_max: float,
    p_min: float,
    p_max: float,
    n: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Evaluate W on an n-by-n uniform grid.

    Returns (values, x_axis, p_axis) where values[i, j] = W(x_axis[j],
    p_axis[i]): rows run over momentum, columns over position, matching the
    usual meshgrid orientation for contour plotting.
    """
    if n < 2:
        raise ValueError(f"grid needs at least 2 points per axis, got {n}")
    if not x_min < x_max:
        raise ValueError(f"x_min must be below x_max, got [{x_min}, {x_max}]")
    if not p_min < p_max:
        raise ValueError(f"p_min must be below p_max, got [{p_min}, {p_max}]")
    x_axis = np.linspace(x_min, x_max, n)
    p_axis = np.linspace(p_min, p_max, n)
    values = wigner_value(w, x_axis[np.newaxis, :], p_axis[:, np.newaxis])
    return values, x_axis, p_axis


def classical_rk4(cfg: OscillatorConfig, x0, p0, steps: int):
    """Fixed-step RK4 integration of xdot = p/m, pdot = -m omega^2 x over [0, t].

    Independent of the closed-form solution; global error falls off as
    steps^-4.  x0 and p0 may be scalars or equal-length arrays (the whole
    batch is integrated in lockstep).
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    x = np.asarray(x0, dtype=np.float64).copy()
    p = np.asarray(p0, dtype=np.float64).copy()
    scalar = x.ndim == 0
    m, w2 = cfg.m, cfg.omega**2
    h = cfg.t / steps
    for _ in range(steps):
        k1x = p / m
        k1p = -m * w2 * x
        k2x = (p + 0.5 * h * k1p) / m
        k2p = -m * w2 * (x + 0.5 * h * k1x)
        k3x = (p + 0.5 * h * k2p) / m
        k3p = -m * w2 * (x + 0.5 * h * k2x)
        k4x = (p + h * k3p) / m
        k4p = -m * w2 * (x + h * k3x)
        x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        p = p + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    if scalar:
        return float(x), float(p)
    return x, p
