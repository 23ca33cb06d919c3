"""Canonical 1-D PDE datasets: closed-form solutions and RK4 method-of-lines solves.

Each PDE ships documented default domains, resolutions and initial conditions;
all of them can be overridden through :func:`generate_dataset` keyword options.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grids import GridField

# RK4 absolute-stability limits along the negative real and imaginary axes.
_RK4_REAL = 2.785
_RK4_IMAG = 2.828
_SAFETY = 0.5

MIN_RESOLUTION = 64


@dataclass(frozen=True)
class PdePreset:
    """Bundle of per-PDE defaults: grid, dynamics, discovery settings."""

    name: str
    x_span: tuple[float, float]
    t_span: tuple[float, float]
    n_x: int
    n_t: int
    periodic: bool
    lhs: str
    true_terms: tuple[tuple[int, ...], ...]
    true_coeffs: tuple[float, ...]
    meta_x: tuple[float, float]
    meta_t: tuple[float, float]
    activation: str
    l0_penalty: float
    refine_epochs: int
    residual_tol: float
    ic: dict = field(default_factory=dict)


PRESETS: dict[str, PdePreset] = {
    "kdv": PdePreset(
        name="kdv",
        x_span=(-1.0, 1.0), t_span=(0.0, 1.0), n_x=512, n_t=201, periodic=True,
        lhs="u_t", true_terms=((0, 1), (3,)), true_coeffs=(-1.0, -0.0025),
        meta_x=(-0.8, 0.8), meta_t=(0.1, 0.9),
        activation="sin", l0_penalty=0.1, refine_epochs=1000, residual_tol=0.25,
        ic={"kind": "cosine", "amplitude": 1.0},
    ),
    "burgers": PdePreset(
        name="burgers",
        x_span=(-8.0, 8.0), t_span=(0.0, 10.0), n_x=256, n_t=201, periodic=True,
        lhs="u_t", true_terms=((0, 1), (2,)), true_coeffs=(-1.0, 0.1),
        meta_x=(-7.0, 7.0), meta_t=(1.0, 9.0),
        activation="rational", l0_penalty=0.0005, refine_epochs=1000,
        residual_tol=1e-2,
        ic={"kind": "gaussian", "amplitude": 0.6, "center": -2.0, "width": 1.0},
    ),
    "convection_diffusion": PdePreset(
        name="convection_diffusion",
        x_span=(0.0, 2.0), t_span=(0.0, 1.0), n_x=256, n_t=100, periodic=False,
        lhs="u_t", true_terms=((1,), (2,)), true_coeffs=(-1.0, 0.25),
        meta_x=(0.02, 1.98), meta_t=(0.01, 0.99),
        activation="rational", l0_penalty=0.01, refine_epochs=1000,
        residual_tol=1e-3,
        ic={"kind": "gaussian", "amplitude": 1.0, "center": 0.3, "width": 0.25},
    ),
    "chaffee_infante": PdePreset(
        name="chaffee_infante",
        x_span=(0.0, 3.0), t_span=(0.0, 0.5), n_x=301, n_t=200, periodic=False,
        lhs="u_t", true_terms=((2,), (0,), (0, 0, 0)), true_coeffs=(1.0, -1.0, 1.0),
        meta_x=(0.5, 2.5), meta_t=(0.15, 0.45),
        activation="rational", l0_penalty=0.1, refine_epochs=1000, residual_tol=5e-3,
        ic={"kind": "tanh", "amplitude": 0.9, "center": 1.5, "width": 0.3},
    ),
    "allen_cahn": PdePreset(
        name="allen_cahn",
        x_span=(-1.0, 1.0), t_span=(0.0, 10.0), n_x=256, n_t=201, periodic=False,
        lhs="u_t", true_terms=((2,), (0,), (0, 0, 0)), true_coeffs=(0.003, 1.0, -1.0),
        meta_x=(-0.8, 0.8), meta_t=(1.0, 9.0),
        activation="rational", l0_penalty=0.0005, refine_epochs=1000,
        residual_tol=5e-3,
        ic={"kind": "two_front", "half_width": 0.5, "width": 0.15},
    ),
    "wave": PdePreset(
        name="wave",
        x_span=(0.0, math.pi), t_span=(0.0, 2.0 * math.pi), n_x=161, n_t=321,
        periodic=False,
        lhs="u_tt", true_terms=((2,),), true_coeffs=(1.0,),
        meta_x=(0.1, 3.0), meta_t=(0.2, 6.0),
        activation="sin", l0_penalty=0.01, refine_epochs=3000, residual_tol=1e-4,
        ic={"kind": "standing", "modes": [[1, 1.0], [2, 0.5], [3, 0.25]]},
    ),
    "klein_gordon": PdePreset(
        name="klein_gordon",
        x_span=(-1.0, 1.0), t_span=(0.0, 3.0), n_x=201, n_t=201, periodic=False,
        lhs="u_tt", true_terms=((2,), (0,)), true_coeffs=(0.5, -5.0),
        meta_x=(-0.8, 0.8), meta_t=(0.3, 2.7),
        activation="rational", l0_penalty=0.1, refine_epochs=3000, residual_tol=5e-3,
        ic={"kind": "modes", "modes": [[1, 1.0], [2, 0.5], [3, 0.25]]},
    ),
}


class StabilityError(RuntimeError):
    """Raised when a requested solver step violates the RK4 stability bound."""


def _grid_axes(x_span, t_span, n_x, n_t, periodic):
    if n_x < MIN_RESOLUTION or n_t < MIN_RESOLUTION:
        raise ValueError(f"resolution must be >= {MIN_RESOLUTION} points per axis")
    xs = np.linspace(x_span[0], x_span[1], n_x, endpoint=not periodic)
    ts = np.linspace(t_span[0], t_span[1], n_t)
    return xs, ts


def rk4_solve(u0: np.ndarray, rhs, ts: np.ndarray, step_dt: float, observe=None) -> np.ndarray:
    """Integrate du/dt = rhs(u) with classical RK4, saving frames at ``ts``.

    Frame intervals are subdivided evenly so the internal step never exceeds
    ``step_dt``. ``observe`` maps the state to the saved frame (default:
    identity). Returns an array of shape (frame size, len(ts)).
    """
    if observe is None:
        observe = lambda s: s
    state = u0.copy()
    first = observe(state)
    frames = np.empty((first.size, len(ts)))
    frames[:, 0] = first
    for j in range(1, len(ts)):
        span = ts[j] - ts[j - 1]
        n_sub = max(1, math.ceil(span / step_dt - 1e-12))
        h = span / n_sub
        for _ in range(n_sub):
            k1 = rhs(state)
            k2 = rhs(state + 0.5 * h * k1)
            k3 = rhs(state + 0.5 * h * k2)
            k4 = rhs(state + h * k3)
            state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(state)):
            raise RuntimeError(f"solver produced non-finite values at t={ts[j]:g}")
        frames[:, j] = observe(state)
    return frames


def _dx1_periodic(u, dx):
    return (np.roll(u, -1) - np.roll(u, 1)) / (2.0 * dx)


def _dx2_periodic(u, dx):
    return (np.roll(u, -1) - 2.0 * u + np.roll(u, 1)) / (dx * dx)


def _dx3_periodic(u, dx):
    return (-np.roll(u, 2) + 2.0 * np.roll(u, 1)
            - 2.0 * np.roll(u, -1) + np.roll(u, -2)) / (2.0 * dx**3)


def _dx2_dirichlet(u, dx):
    # 4th-order central in the interior, 2nd-order beside the fixed ends
    out = np.zeros_like(u)
    out[2:-2] = (-u[4:] + 16.0 * u[3:-1] - 30.0 * u[2:-2]
                 + 16.0 * u[1:-3] - u[:-4]) / (12.0 * dx * dx)
    out[1] = (u[2] - 2.0 * u[1] + u[0]) / (dx * dx)
    out[-2] = (u[-1] - 2.0 * u[-2] + u[-3]) / (dx * dx)
    return out


def _check_step(requested: float | None, bound: float, name: str) -> float:
    step = _SAFETY * bound if requested is None else float(requested)
    if step > bound:
        raise StabilityError(
            f"{name}: requested step {step:g} exceeds the stability bound {bound:g}"
        )
    return step


def _gaussian_pulse(xs, ic):
    a, x0, w = ic["amplitude"], ic["center"], ic["width"]
    return a * np.exp(-((xs - x0) ** 2) / (2.0 * w * w))


def _generate_convection_diffusion(preset, ic, xs, ts, _):
    # Free-space closed form of u_t = -u_x + 0.25 u_xx for a Gaussian pulse.
    a, x0, w = ic["amplitude"], ic["center"], ic["width"]
    c, d = 1.0, 0.25
    xx, tt = np.meshgrid(xs, ts, indexing="ij")
    var = w * w + 2.0 * d * tt
    return a * w / np.sqrt(var) * np.exp(-((xx - x0 - c * tt) ** 2) / (2.0 * var))


def _generate_wave(preset, ic, xs, ts, _):
    xx, tt = np.meshgrid(xs, ts, indexing="ij")
    if ic["kind"] == "traveling":
        # d'Alembert with u(x,0)=sin(x), u_t(x,0)=-cos(x).
        return np.sin(xx - tt)
    values = np.zeros_like(xx)
    for k, amp in ic["modes"]:
        values += amp * np.sin(k * xx) * np.cos(k * tt)
    return values


def _burgers_initial(xs, ic):
    if ic["kind"] == "pulses":
        u0 = np.zeros_like(xs)
        for amp, center, width in ic["pulses"]:
            u0 += amp * np.exp(-((xs - center) ** 2) / (2.0 * width * width))
        return u0
    return _gaussian_pulse(xs, ic)


def _generate_burgers(preset, ic, xs, ts, step):
    nu, dx = 0.1, xs[1] - xs[0]
    u0 = _burgers_initial(xs, ic)
    u_max = 1.1 * np.abs(u0).max()
    bound = min(_RK4_REAL * dx * dx / (4.0 * nu), _RK4_IMAG * dx / u_max)
    h = _check_step(step, bound, "burgers")

    def rhs(u):
        return -u * _dx1_periodic(u, dx) + nu * _dx2_periodic(u, dx)

    return rk4_solve(u0, rhs, ts, h)


def _generate_kdv(preset, ic, xs, ts, step):
    c3, dx = 0.0025, xs[1] - xs[0]
    u0 = ic["amplitude"] * np.cos(np.pi * xs)
    u_max = 3.0 * np.abs(u0).max()  # soliton trains overshoot the initial amplitude
    bound = min(_RK4_IMAG * dx**3 / (1.299 * c3), _RK4_IMAG * dx / u_max)
    h = _check_step(step, bound, "kdv")

    def rhs(u):
        return -u * _dx1_periodic(u, dx) - c3 * _dx3_periodic(u, dx)

    return rk4_solve(u0, rhs, ts, h)


def _reaction_diffusion(name, diffusion, reaction, u0, xs, ts, step, reaction_scale):
    dx = xs[1] - xs[0]
    bound = _RK4_REAL / (16.0 / 3.0 * diffusion / dx**2 + reaction_scale)
    h = _check_step(step, bound, name)

    def rhs(u):
        out = diffusion * _dx2_dirichlet(u, dx) + reaction(u)
        out[0] = 0.0
        out[-1] = 0.0
        return out

    return rk4_solve(u0, rhs, ts, h)


def _generate_chaffee_infante(preset, ic, xs, ts, step):
    a, x0, w = ic["amplitude"], ic["center"], ic["width"]
    u0 = a * np.tanh((xs - x0) / w)
    return _reaction_diffusion(
        "chaffee_infante", 1.0, lambda u: -u + u**3, u0, xs, ts, step, 3.0
    )


def _generate_allen_cahn(preset, ic, xs, ts, step):
    hw, w = ic["half_width"], ic["width"]
    u0 = np.tanh((xs + hw) / w) - np.tanh((xs - hw) / w) - 1.0
    return _reaction_diffusion(
        "allen_cahn", 0.003, lambda u: u - u**3, u0, xs, ts, step, 3.0
    )


def _generate_klein_gordon(preset, ic, xs, ts, step):
    dx = xs[1] - xs[0]
    u0 = np.zeros_like(xs)
    for k, amp in ic["modes"]:
        u0 += amp * np.sin(k * np.pi * xs)
    omega_max = math.sqrt(0.5 * 16.0 / 3.0 / dx**2 + 5.0)
    h = _check_step(step, _RK4_IMAG / omega_max, "klein_gordon")

    def rhs(state):
        u, v = state
        du = v.copy()
        dv = 0.5 * _dx2_dirichlet(u, dx) - 5.0 * u
        du[0] = du[-1] = 0.0
        dv[0] = dv[-1] = 0.0
        return np.stack([du, dv])

    state0 = np.stack([u0, np.zeros_like(u0)])
    return rk4_solve(state0, rhs, ts, h, observe=lambda s: s[0])


_GENERATORS = {
    "convection_diffusion": _generate_convection_diffusion,
    "wave": _generate_wave,
    "burgers": _generate_burgers,
    "kdv": _generate_kdv,
    "chaffee_infante": _generate_chaffee_infante,
    "allen_cahn": _generate_allen_cahn,
    "klein_gordon": _generate_klein_gordon,
}


def generate_dataset(
    name: str,
    *,
    n_x: int | None = None,
    n_t: int | None = None,
    x_span: tuple[float, float] | None = None,
    t_span: tuple[float, float] | None = None,
    ic: dict | None = None,
    solver_dt: float | None = None,
) -> GridField:
    """Generate the named canonical dataset, applying any overrides."""
    if name not in PRESETS:
        raise KeyError(f"unknown PDE identifier {name!r}; known: {sorted(PRESETS)}")
    preset = PRESETS[name]
    merged_ic = dict(preset.ic)
    if ic:
        merged_ic.update(ic)
    xs, ts = _grid_axes(
        x_span or preset.x_span, t_span or preset.t_span,
        n_x or preset.n_x, n_t or preset.n_t, preset.periodic,
    )
    values = _GENERATORS[name](preset, merged_ic, xs, ts, solver_dt)
    return GridField(xs, ts, values)
