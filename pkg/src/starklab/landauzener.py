"""Momentum-space interband dynamics under a static tilt.

A Bloch-wave initial condition keeps its quasimomentum label while the
tilt drags it through the zone, kx,y -> kx,y - Ft_x,y * t; the dynamics at
each initial quasimomentum is an independent driven two-level problem.
Band populations are evaluated against the instantaneous eigenbasis via
the Bloch vector, which makes them manifestly gauge invariant.  Times are
naturally measured in T_J = 2pi/J1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .lattice import FieldSpec, LatticeParams, bloch_offdiag
from . import twolevel


def t_j(params: LatticeParams) -> float:
    """Reference tunneling period 2pi/J1."""
    if params.j1 <= 0:
        raise ConfigError("T_J undefined for J1 = 0")
    return 2.0 * math.pi / params.j1


def drive_period(fieldspec: FieldSpec) -> float:
    """Period of the driven Hamiltonian for a rational orientation."""
    return 2.0 * math.pi / fieldspec.df


def _pauli_at(params: LatticeParams, kx, ky):
    """Pauli vector of the two-band Bloch Hamiltonian (batched)."""
    h = bloch_offdiag(params, kx, ky)
    a = np.empty(np.shape(h) + (3,))
    a[..., 0] = h.real
    a[..., 1] = -h.imag
    a[..., 2] = -params.delta
    return a


def drive_pauli(params: LatticeParams, fieldspec: FieldSpec, kx0, ky0):
    """t -> (c, a) for the tilt-driven Bloch Hamiltonian at fixed kappa0."""
    ftx, fty = fieldspec.ft
    kx0 = np.asarray(kx0, dtype=float)
    ky0 = np.asarray(ky0, dtype=float)

    def pauli(t: float):
        a = _pauli_at(params, kx0 - ftx * t, ky0 - fty * t)
        return np.zeros(kx0.shape), a

    return pauli


def lower_band_state(params: LatticeParams, kx, ky) -> np.ndarray:
    """Instantaneous lower-band eigenvector(s) at (kx, ky)."""
    lo, _ = twolevel.branch_spinors(_pauli_at(params, kx, ky))
    return lo


def band_populations(params: LatticeParams, psi: np.ndarray, kx, ky):
    """(P_minus, P_plus) of batched spinors against the bands at (kx, ky).

    Computed from the Bloch vector, P_+- = (1 -/+ a_hat . s)/2 with
    s = psi^dag sigma psi, so any per-kappa phase convention for the
    eigenvectors drops out.  At a band degeneracy the populations are
    conventionally (1/2, 1/2); callers tracking a trajectory restore them
    by continuity.
    """
    a = _pauli_at(params, kx, ky)
    norm = np.linalg.norm(a, axis=-1)
    u, v = psi[..., 0], psi[..., 1]
    sx = 2.0 * (np.conj(u) * v).real
    sy = 2.0 * (np.conj(u) * v).imag
    sz = (np.abs(u) ** 2 - np.abs(v) ** 2)
    dot = a[..., 0] * sx + a[..., 1] * sy + a[..., 2] * sz
    with np.errstate(invalid="ignore"):
        proj = np.where(norm > 1e-14, dot / np.where(norm > 0, norm, 1.0), 0.0)
    total = np.abs(u) ** 2 + np.abs(v) ** 2
    p_plus = 0.5 * (total + proj)
    return total - p_plus, p_plus


def default_step(params: LatticeParams, fieldspec: FieldSpec) -> float:
    """Integration step keeping the 4th-order stepper near machine
    accuracy: resolves both the level splitting and the drive sweep."""
    esc = 2.0 * (3.0 * params.j1 + params.j2 + abs(params.delta))
    ftx, fty = fieldspec.ft
    sweep = math.hypot(ftx, fty) * math.sqrt(2.0) * (3.0 * params.j1 + params.j2)
    return 0.35 / max(esc, math.sqrt(max(sweep, 1e-30)), 1e-6)


def evolve_two_level(
    params: LatticeParams,
    fieldspec: FieldSpec,
    kappa0,
    t_grid,
    psi0: np.ndarray | None = None,
    max_step: float | None = None,
) -> np.ndarray:
    """Amplitudes psi(t) for initial quasimomentum kappa0 = (kx, ky).

    psi0 defaults to the lower-band eigenstate; returns an array of shape
    (len(t_grid), ..., 2).  Unitary to machine precision by construction.
    """
    kx0, ky0 = (np.asarray(k, dtype=float) for k in kappa0)
    pauli = drive_pauli(params, fieldspec, kx0, ky0)
    if psi0 is None:
        psi0 = lower_band_state(params, kx0, ky0)
    if max_step is None:
        max_step = default_step(params, fieldspec)
    return twolevel.evolve_states(pauli, psi0, t_grid, max_step)


@dataclass
class PopulationTrace:
    """Band populations along a drive, single-momentum or zone-averaged."""

    times: np.ndarray
    p_plus: np.ndarray
    p_minus: np.ndarray
    initial: str                  # "bose" | "fermi"
    beta: float
    rational: bool

    @property
    def mean_upper(self) -> float:
        return float(np.trapezoid(self.p_plus, self.times) / (self.times[-1] - self.times[0]))


def _zone_grid(n: int):
    from .lattice import A_PRIM

    edge = np.pi / A_PRIM
    k = np.linspace(-edge, edge, n, endpoint=False)
    kxg, kyg = np.meshgrid(k, k, indexing="ij")
    return kxg.ravel(), kyg.ravel()


def _stream_populations(params, fieldspec, kx0, ky0, t_grid, max_step):
    """P_+(t) per initial momentum without storing intermediate states."""
    pauli = drive_pauli(params, fieldspec, kx0, ky0)
    psi = lower_band_state(params, kx0, ky0)
    out = np.empty((len(t_grid),) + kx0.shape)
    ftx, fty = fieldspec.ft
    for i, t in enumerate(t_grid):
        if i > 0:
            ta, tb = t_grid[i - 1], t
            nsteps = max(1, int(np.ceil((tb - ta) / max_step)))
            h = (tb - ta) / nsteps
            for k in range(nsteps):
                u = twolevel.magnus4_step(pauli, ta + k * h, h)
                psi = np.einsum("...ij,...j->...i", u, psi)
        _, p_plus = band_populations(params, psi, kx0 - ftx * t, ky0 - fty * t)
        out[i] = p_plus
    return out


def bz_population_map(
    params: LatticeParams,
    fieldspec: FieldSpec,
    t_snapshots,
    n_grid: int = 128,
    max_step: float | None = None,
):
    """Upper-band population over the zone at the requested times.

    Returns (kx axis, ky axis, array (n_times, n_grid, n_grid))."""
    t_snapshots = np.asarray(t_snapshots, dtype=float)
    if t_snapshots[0] != 0.0:
        t_snapshots = np.concatenate([[0.0], t_snapshots])
    kx0, ky0 = _zone_grid(n_grid)
    if max_step is None:
        max_step = default_step(params, fieldspec)
    p = _stream_populations(params, fieldspec, kx0, ky0, t_snapshots, max_step)
    from .lattice import A_PRIM

    axis = np.linspace(-np.pi / A_PRIM, np.pi / A_PRIM, n_grid, endpoint=False)
    return axis, axis, p.reshape(len(t_snapshots), n_grid, n_grid)


def mean_upper_population(
    params: LatticeParams,
    fieldspec: FieldSpec,
    t_total: float | None = None,
    n_grid: int = 64,
    n_times: int = 400,
    max_step: float | None = None,
) -> float:
    """Time average over [0, T_total] of the zone-averaged upper-band
    population, starting from a filled lower band (default 50 T_J)."""
    if t_total is None:
        t_total = 50.0 * t_j(params)
    times = np.linspace(0.0, t_total, n_times)
    kx0, ky0 = _zone_grid(n_grid)
    if max_step is None:
        max_step = default_step(params, fieldspec)
    p = _stream_populations(params, fieldspec, kx0, ky0, times, max_step)
    return float(np.trapezoid(p.mean(axis=1), times) / t_total)


def population_trace(
    params: LatticeParams,
    fieldspec: FieldSpec,
    initial: str = "bose",
    t_total: float | None = None,
    n_times: int = 1024,
    n_grid: int = 64,
    max_step: float | None = None,
) -> PopulationTrace:
    """P_+-(t) for a zero-momentum condensate ("bose") or a filled lower
    band averaged over the zone ("fermi")."""
    if initial not in ("bose", "fermi"):
        raise ConfigError("initial must be 'bose' or 'fermi'")
    if t_total is None:
        t_total = 50.0 * t_j(params)
    times = np.linspace(0.0, t_total, n_times)
    if max_step is None:
        max_step = default_step(params, fieldspec)
    if initial == "bose":
        kx0 = np.zeros(1)
        ky0 = np.zeros(1)
    else:
        kx0, ky0 = _zone_grid(n_grid)
    p = _stream_populations(params, fieldspec, kx0, ky0, times, max_step)
    p_plus = p.mean(axis=1)
    return PopulationTrace(
        times=times,
        p_plus=p_plus,
        p_minus=1.0 - p_plus,
        initial=initial,
        beta=fieldspec.beta,
        rational=fieldspec.is_rational,
    )


def revival_autocorrelation(trace: PopulationTrace, lag: float) -> float:
    """Normalized autocorrelation of P_+(t) at the given time lag."""
    t, p = trace.times, trace.p_plus - trace.p_plus.mean()
    dt = t[1] - t[0]
    shift = int(round(lag / dt))
    if shift <= 0 or shift >= len(p) - 2:
        raise ConfigError("lag outside the trace window")
    a, b = p[:-shift], p[shift:]
    denom = math.sqrt(float((a * a).sum()) * float((b * b).sum()))
    if denom == 0.0:
        return 1.0
    return float((a * b).sum() / denom)
