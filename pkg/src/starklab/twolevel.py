"""Exactly-unitary propagation of driven two-level systems.

Implements a 4th-order Magnus integrator (two-point Gauss-Legendre nodes)
for i dpsi/dt = H(t) psi where H(t) = c(t) + a(t).sigma is a 2x2 Hermitian
matrix given by its Pauli components.  Every step is a closed-form SU(2)
exponential, so norm and unitarity hold to machine precision regardless of
step size; accuracy is controlled by step halving.  All routines broadcast
over an arbitrary batch of systems (e.g. a grid of quasimomenta).
"""

from __future__ import annotations

from typing import Callable, Tuple

import numpy as np

from .errors import ConvergenceError

#: Gauss-Legendre nodes on [0, 1]
_GL_LO = 0.5 - np.sqrt(3.0) / 6.0
_GL_HI = 0.5 + np.sqrt(3.0) / 6.0

PauliFn = Callable[[float], Tuple[np.ndarray, np.ndarray]]
"""t -> (c, a): scalar part (batch,) and Pauli vector (batch, 3)."""


def su2_exp(c: np.ndarray, a: np.ndarray) -> np.ndarray:
    """exp(-i (c + a.sigma)) for batched real c (...,) and a (..., 3)."""
    c = np.asarray(c, dtype=float)
    a = np.asarray(a, dtype=float)
    norm = np.linalg.norm(a, axis=-1)
    # sin(|a|)/|a| is regular at 0; guard the division only
    safe = np.where(norm > 0.0, norm, 1.0)
    sfac = np.where(norm > 0.0, np.sin(norm) / safe, 1.0)
    cosn = np.cos(norm)
    ax, ay, az = (a[..., i] * sfac for i in range(3))
    u = np.empty(c.shape + (2, 2), dtype=complex)
    u[..., 0, 0] = cosn - 1j * az
    u[..., 1, 1] = cosn + 1j * az
    u[..., 0, 1] = -1j * ax - ay
    u[..., 1, 0] = -1j * ax + ay
    return np.exp(-1j * c)[..., None, None] * u


def magnus4_step(pauli: PauliFn, t: float, h: float) -> np.ndarray:
    """One 4th-order Magnus step over [t, t + h] as a batched unitary."""
    c1, a1 = pauli(t + _GL_LO * h)
    c2, a2 = pauli(t + _GL_HI * h)
    cc = 0.5 * h * (np.asarray(c1) + np.asarray(c2))
    av = 0.5 * h * (np.asarray(a1) + np.asarray(a2))
    av = av - (np.sqrt(3.0) / 6.0) * h * h * np.cross(a1, a2)
    return su2_exp(cc, av)


def time_ordered_unitary(pauli: PauliFn, t0: float, t1: float, nsteps: int) -> np.ndarray:
    """Time-ordered propagator U(t1, t0), batched (..., 2, 2)."""
    h = (t1 - t0) / nsteps
    u = None
    for k in range(nsteps):
        step = magnus4_step(pauli, t0 + k * h, h)
        u = step if u is None else step @ u
    return u


def evolve_states(
    pauli: PauliFn, psi0: np.ndarray, t_grid: np.ndarray, max_step: float
) -> np.ndarray:
    """Propagate batched spinors psi0 (..., 2) through the times in t_grid.

    Returns an array of shape (len(t_grid),) + psi0.shape; t_grid[0] is the
    initial time and psi0 is returned for it unchanged.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    out = np.empty((len(t_grid),) + psi0.shape, dtype=complex)
    out[0] = psi = np.array(psi0, dtype=complex)
    for i in range(1, len(t_grid)):
        ta, tb = t_grid[i - 1], t_grid[i]
        nsteps = max(1, int(np.ceil((tb - ta) / max_step)))
        h = (tb - ta) / nsteps
        for k in range(nsteps):
            u = magnus4_step(pauli, ta + k * h, h)
            psi = np.einsum("...ij,...j->...i", u, psi)
        out[i] = psi
    return out


def su2_eigenphases(u: np.ndarray, degeneracy_tol: float = 1e-12):
    """Eigenphases (phi_a, phi_b) of batched 2x2 unitaries, plus a
    degeneracy mask.

    Uses the Pauli decomposition of U / sqrt(det U), which keeps full
    precision near phase degeneracies (no arccos of a near-unit trace).
    """
    u = np.asarray(u)
    det = u[..., 0, 0] * u[..., 1, 1] - u[..., 0, 1] * u[..., 1, 0]
    half = 0.5 * np.angle(det)
    w = u * np.exp(-1j * half)[..., None, None]
    cosmu = 0.5 * (w[..., 0, 0] + w[..., 1, 1]).real
    sx = -w[..., 0, 1].imag
    sy = -w[..., 0, 1].real
    sz = -w[..., 0, 0].imag
    sinmu = np.sqrt(sx * sx + sy * sy + sz * sz)
    mu = np.arctan2(sinmu, cosmu)
    return half + mu, half - mu, sinmu < degeneracy_tol


def refine_unitary(
    pauli: PauliFn,
    t0: float,
    t1: float,
    tol: float,
    nsteps0: int,
    max_doublings: int = 12,
):
    """Propagator with step halving until eigenphases move less than tol.

    Returns (U, eigenphase_error_estimate, nsteps_used).
    """
    nsteps = max(8, nsteps0)
    u_prev = time_ordered_unitary(pauli, t0, t1, nsteps)
    pa, pb, _ = su2_eigenphases(u_prev)
    for _ in range(max_doublings):
        nsteps *= 2
        u = time_ordered_unitary(pauli, t0, t1, nsteps)
        qa, qb, _ = su2_eigenphases(u)
        diff = max(
            np.max(np.abs(_wrap(qa - pa))), np.max(np.abs(_wrap(qb - pb)))
        )
        # Richardson estimate for the finer grid (4th-order scheme)
        err = diff / 15.0
        if err < tol:
            return u, err, nsteps
        u_prev, pa, pb = u, qa, qb
    raise ConvergenceError(
        f"two-level propagator not converged to {tol:g} after {nsteps} steps"
    )


def branch_spinors(avec: np.ndarray):
    """Eigenvectors (lower, upper) of a.sigma for Pauli vectors (..., 3)."""
    ax, ay, az = avec[..., 0], avec[..., 1], avec[..., 2]
    norm = np.sqrt(ax * ax + ay * ay + az * az)
    off = ax + 1j * ay
    up = np.stack([az + norm, off], axis=-1)
    dn = np.stack([az - norm, off], axis=-1)
    # poles of the chart (a parallel to -/+ z): fall back to basis spinors
    for spin, pole in ((up, az + norm), (dn, az - norm)):
        bad = np.abs(pole) + np.abs(off) < 1e-14 * np.maximum(norm, 1e-300)
        spin[bad] = np.array([0.0, 1.0])
    up /= np.linalg.norm(up, axis=-1, keepdims=True)
    dn /= np.linalg.norm(dn, axis=-1, keepdims=True)
    return dn, up


def _wrap(phase):
    """Wrap phases to (-pi, pi]."""
    return (np.asarray(phase) + np.pi) % (2.0 * np.pi) - np.pi
