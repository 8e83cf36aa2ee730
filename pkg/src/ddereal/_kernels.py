"""Hot numerical loops, compiled with numba when available.

Each kernel is written once in loop form.  ``_accel.njit`` compiles it when
numba is enabled and leaves the plain Python function otherwise.  The
characteristic-function evaluator also has a vectorized numpy twin, which
is what the fallback path uses.
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import HAVE_NUMBA, njit


# --------------------------------------------------------------------------
# characteristic quasi-polynomial on a batch of points


def char_values_numpy(thetas, coeffs, lams):
    lams = np.asarray(lams, dtype=np.complex128)
    ex = np.exp(np.multiply.outer(lams, thetas))
    delta = lams - ex @ coeffs
    ddelta = 1.0 - ex @ (coeffs * thetas)
    return delta, ddelta


@njit
def _char_values_loop(thetas, coeffs, lams):
    n = lams.shape[0]
    delta = np.empty(n, dtype=np.complex128)
    ddelta = np.empty(n, dtype=np.complex128)
    for i in range(n):
        lam = lams[i]
        acc = 0.0 + 0.0j
        dacc = 0.0 + 0.0j
        for k in range(thetas.shape[0]):
            e = np.exp(lam * thetas[k])
            acc += coeffs[k] * e
            dacc += coeffs[k] * thetas[k] * e
        delta[i] = lam - acc
        ddelta[i] = 1.0 - dacc
    return delta, ddelta


def char_values(thetas, coeffs, lams):
    """Return arrays (Δ(λ), Δ'(λ)) for every λ in ``lams``."""
    thetas = np.ascontiguousarray(thetas, dtype=np.float64)
    coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
    lams = np.ascontiguousarray(lams, dtype=np.complex128)
    if HAVE_NUMBA:
        return _char_values_loop(thetas, coeffs, lams)
    return char_values_numpy(thetas, coeffs, lams)


# --------------------------------------------------------------------------
# fixed-step RK4 for  z'(t) = sum_k b_k z(t+theta_k) + N(z(t+tau_1), ...)


@njit
def _hermite(z, f, f0_left, m0, q, dt):
    # q is a fractional node index; node m0 is t = 0.
    i = int(math.floor(q))
    if i < 0:
        i = 0
    s = q - i
    z0 = z[i]
    z1 = z[i + 1]
    d0 = f[i]
    d1 = f0_left if i + 1 == m0 else f[i + 1]
    s2 = s * s
    s3 = s2 * s
    return ((2.0 * s3 - 3.0 * s2 + 1.0) * z0 + (s3 - 2.0 * s2 + s) * dt * d0
            + (-2.0 * s3 + 3.0 * s2) * z1 + (s3 - s2) * dt * d1)


@njit
def _delayed(z, f, f0_left, m0, n, offset, shift, dt, stage_value):
    if shift == 0.0:
        return stage_value
    q = n + offset + shift / dt
    if q >= n:
        return z[n]
    return _hermite(z, f, f0_left, m0, q, dt)


@njit
def _rhs(z, f, f0_left, m0, n, offset, stage_value, thetas, bs, taus, exps, coefs, dt, vbuf):
    acc = 0.0
    for k in range(thetas.shape[0]):
        acc += bs[k] * _delayed(z, f, f0_left, m0, n, offset, thetas[k], dt, stage_value)
    for i in range(taus.shape[0]):
        vbuf[i] = _delayed(z, f, f0_left, m0, n, offset, taus[i], dt, stage_value)
    for t in range(coefs.shape[0]):
        term = coefs[t]
        for i in range(taus.shape[0]):
            e = exps[t, i]
            if e > 0:
                term *= vbuf[i] ** e
        acc += term
    return acc


@njit
def rk4_method_of_steps(thetas, bs, taus, exps, coefs, dt, n_steps, hist_z, hist_f, blowup):
    """Integrate forward ``n_steps`` steps from a history sampled on the grid.

    ``hist_z``/``hist_f`` hold values and derivatives on ``t = -m0*dt .. 0``.
    Returns (z, f, steps_done); ``steps_done < n_steps`` signals blow-up.
    """
    m0 = hist_z.shape[0] - 1
    total = m0 + n_steps + 1
    z = np.zeros(total)
    f = np.zeros(total)
    for i in range(m0 + 1):
        z[i] = hist_z[i]
        f[i] = hist_f[i]
    f0_left = hist_f[m0]
    vbuf = np.zeros(max(taus.shape[0], 1))
    done = 0
    for step in range(n_steps):
        n = m0 + step
        zn = z[n]
        k1 = _rhs(z, f, f0_left, m0, n, 0.0, zn, thetas, bs, taus, exps, coefs, dt, vbuf)
        f[n] = k1
        k2 = _rhs(z, f, f0_left, m0, n, 0.5, zn + 0.5 * dt * k1, thetas, bs, taus, exps, coefs, dt, vbuf)
        k3 = _rhs(z, f, f0_left, m0, n, 0.5, zn + 0.5 * dt * k2, thetas, bs, taus, exps, coefs, dt, vbuf)
        k4 = _rhs(z, f, f0_left, m0, n, 1.0, zn + dt * k3, thetas, bs, taus, exps, coefs, dt, vbuf)
        znew = zn + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not math.isfinite(znew) or abs(znew) > blowup:
            return z[: n + 1], f[: n + 1], done
        z[n + 1] = znew
        done += 1
    last = m0 + n_steps
    f[last] = _rhs(z, f, f0_left, m0, last, 0.0, z[last], thetas, bs, taus, exps, coefs, dt, vbuf)
    return z, f, done
