"""Fixed-step method-of-steps integration and oscillation measurements."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from ._accel import backend
from ._kernels import rk4_method_of_steps
from .linsys import AdjointVector, SpectrumSpec
from .nfengine import DDEModel
from .qsolver import psi_functions

BLOWUP = 1e6


@dataclass
class Trajectory:
    times: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray
    dt: float
    overflow: bool
    backend: str

    def dense(self, window: float | None = None) -> CubicHermiteSpline:
        """Hermite interpolant over the trailing ``window`` (whole run by default)."""
        t, z, f = self.times, self.values, self.derivatives
        if window is not None:
            keep = t >= t[-1] - window - 1e-12
            t, z, f = t[keep], z[keep], f[keep]
        return CubicHermiteSpline(t, z, f)

    def after(self, t0: float):
        keep = self.times >= t0
        return self.times[keep], self.values[keep]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "z"])
            for t, z in zip(self.times, self.values):
                w.writerow([f"{t:.10g}", f"{z:.17g}"])


def _collapse_parameters(model: DDEModel, mu: Sequence[float]):
    """Exponent table and coefficients of N(v) with mu substituted."""
    n = len(model.delays)
    mu = np.atleast_1d(np.asarray(mu, dtype=float)) if model.s else np.zeros(0)
    if mu.size != model.s:
        raise ValueError(f"expected {model.s} parameter values, got {mu.size}")
    acc: dict = {}
    for m, c in model.nonlinearity.items():
        val = c.real * float(np.prod(mu ** np.asarray(m[n:], dtype=float))) if model.s else c.real
        acc[m[:n]] = acc.get(m[:n], 0.0) + val
    acc = {m: c for m, c in acc.items() if c != 0.0}
    exps = np.array(list(acc.keys()), dtype=np.int64).reshape(len(acc), n)
    coefs = np.array(list(acc.values()), dtype=float)
    return exps, coefs


def integrate(model: DDEModel, mu: Sequence[float] | float = (), history: Callable | float = 0.0,
              t_end: float = 100.0, dt: float | None = None) -> Trajectory:
    """Integrate z' = L z_t + N(z(t + tau), mu) from a history on [-r, 0]."""
    L = model.L
    r = max(L.horizon, max((-t for t in model.delays), default=0.0))
    lags = [-t for t in list(L.thetas) + list(model.delays) if t < 0]
    if dt is None:
        dt = min(0.01, r / 100) if r > 0 else 0.01
    if lags and dt > min(lags) + 1e-15:
        raise ValueError("dt must not exceed the smallest nonzero delay")
    exps, coefs = _collapse_parameters(model, mu)
    m0 = int(math.ceil(r / dt - 1e-9))
    grid = -dt * np.arange(m0, -1, -1)
    if callable(history):
        hz = np.array([float(history(t)) for t in grid])
        h = 1e-6
        hf = np.array([(float(history(t + h)) - float(history(t - h))) / (2 * h) for t in grid])
    else:
        hz = np.full(grid.size, float(history))
        hf = np.zeros(grid.size)
    n_steps = int(round(t_end / dt))
    z, f, done = rk4_method_of_steps(
        np.asarray(L.thetas, dtype=float), np.asarray(L.coeffs, dtype=float),
        np.asarray(model.delays, dtype=float), exps, coefs, float(dt), n_steps, hz, hf, BLOWUP,
    )
    times = dt * (np.arange(z.size) - m0)
    return Trajectory(times, np.asarray(z), np.asarray(f), float(dt), done < n_steps, backend())


# --------------------------------------------------------------------------
# measurements


@dataclass
class Oscillation:
    amplitude: float
    frequency: float
    n_extrema: int

    def to_json(self) -> dict:
        return {"amplitude": self.amplitude, "frequency": self.frequency, "nExtrema": self.n_extrema}


def _refined_extrema(t: np.ndarray, z: np.ndarray):
    """Interior local extrema with parabolic vertex refinement."""
    dz = np.diff(z)
    idx = np.where(np.sign(dz[:-1]) * np.sign(dz[1:]) < 0)[0] + 1
    times, vals, kinds = [], [], []
    h = t[1] - t[0]
    for i in idx:
        a, b, c = z[i - 1], z[i], z[i + 1]
        den = a - 2 * b + c
        off = 0.5 * (a - c) / den if den != 0 else 0.0
        times.append(t[i] + off * h)
        vals.append(b - 0.25 * (a - c) * off)
        kinds.append(1 if b > a else -1)
    return np.array(times), np.array(vals), np.array(kinds)


def measure_oscillation(traj: Trajectory, discard_fraction: float = 0.5) -> Oscillation:
    t0 = traj.times[0] + discard_fraction * (traj.times[-1] - traj.times[0])
    t, z = traj.after(max(t0, 0.0))
    return measure_samples(t, z)


def measure_samples(t: np.ndarray, z: np.ndarray) -> Oscillation:
    times, vals, kinds = _refined_extrema(np.asarray(t, float), np.asarray(z, float))
    maxima = times[kinds > 0]
    if times.size < 2 or maxima.size < 2:
        return Oscillation(0.0, 0.0, int(times.size))
    amp = float(np.mean(np.abs(vals)))
    period = float(np.mean(np.diff(maxima)))
    return Oscillation(amp, 2 * np.pi / period, int(times.size))


def center_projection(traj: Trajectory, model: DDEModel, spec: SpectrumSpec, adj: AdjointVector,
                      slot: int, t_from: float = 0.0, stride: int = 10) -> tuple[np.ndarray, np.ndarray]:
    """Time series of the center coordinate (psi_slot, z_t) by trapezoid quadrature."""
    psi = psi_functions(spec, adj)[slot]
    L = model.L
    dt = traj.dt
    t_all, z_all = traj.times, traj.values
    i0 = max(int(np.searchsorted(t_all, t_from)), int(round(L.horizon / dt)))
    idx = np.arange(i0, t_all.size, stride)
    out = np.empty(idx.size, dtype=complex)
    kernels = []
    for theta, b in zip(L.thetas, L.coeffs):
        k = int(round(-theta / dt))
        if k == 0:
            continue
        zeta = -dt * np.arange(k, -1, -1)
        w = np.full(k + 1, dt)
        w[[0, -1]] *= 0.5
        kernels.append((k, b * w * psi.eval_at(zeta - theta)))
    psi0 = psi.eval_at(0.0)
    for n, i in enumerate(idx):
        acc = psi0 * z_all[i]
        for k, kern in kernels:
            acc += kern @ z_all[i - k: i + 1]
        out[n] = acc
    return t_all[idx], out


def center_amplitude(traj: Trajectory, model: DDEModel, spec: SpectrumSpec, adj: AdjointVector,
                     slot: int | None = None, discard_fraction: float = 0.5) -> float:
    """Mean modulus of the first Hopf coordinate over the trailing window."""
    slot = int(spec.includes_zero) if slot is None else slot
    t0 = traj.times[0] + discard_fraction * (traj.times[-1] - traj.times[0])
    _, x = center_projection(traj, model, spec, adj, slot, t_from=max(t0, 0.0))
    return float(np.mean(np.abs(x)))
