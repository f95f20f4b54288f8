"""Real-space wave-packet dynamics on the tilted finite lattice.

The lattice is an odd L x L patch of the integer grid with open boundaries,
origin at the center.  Time evolution under the static tilted Hamiltonian
uses a Chebyshev expansion of the evolution operator between output times;
the expansion is converged to machine precision, so norm and energy are
conserved to the drift bounds checked after every interval.  Units: hbar=1,
lengths in xy lattice spacings (reference periods T = 2pi, T_J = 2pi/J1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import sparse
from scipy.special import jv

from .errors import BoundaryFluxError, ConfigError, ConvergenceError
from .lattice import FieldSpec, LatticeParams

NORM_DRIFT_TOL = 1e-10
ENERGY_DRIFT_TOL = 1e-8
BOUNDARY_PROB_TOL = 1e-6
MIN_SIZE = 41


@dataclass
class RealSpaceLattice:
    """Sparse tilted Hamiltonian on an L x L patch with site metadata."""

    params: LatticeParams
    fieldspec: FieldSpec | None
    size: int
    x: np.ndarray                # site x coordinate, origin centered
    y: np.ndarray
    is_a: np.ndarray             # sublattice mask (x + y even)
    hamiltonian: sparse.csr_matrix
    periodic: bool = False

    @property
    def n_sites(self) -> int:
        return self.size * self.size

    def origin_index(self) -> int:
        half = self.size // 2
        return half * self.size + half

    def boundary_mask(self, shells: int = 2) -> np.ndarray:
        half = self.size // 2
        m = np.maximum(np.abs(self.x), np.abs(self.y))
        return m > half - shells

    def spectral_bounds(self) -> tuple[float, float]:
        """Gershgorin bounds of the (real symmetric) Hamiltonian."""
        h = self.hamiltonian
        diag = h.diagonal().real
        abssum = np.abs(h).sum(axis=1).A.ravel() - np.abs(diag)
        return float((diag - abssum).min()), float((diag + abssum).max())


def build_real_space(
    params: LatticeParams,
    fieldspec: FieldSpec | None,
    size: int,
    periodic: bool = False,
) -> RealSpaceLattice:
    """Assemble the lattice; open boundaries need odd size >= 41.

    The periodic variant (even size, untilted only) exists for checking
    the construction against the Bloch Hamiltonian on a torus.
    """
    if periodic:
        if size % 2:
            raise ConfigError("periodic lattice needs even size")
        if fieldspec is not None:
            raise ConfigError("periodic lattice must be untilted")
    else:
        if size % 2 == 0 or size < MIN_SIZE:
            raise ConfigError(f"open lattice needs odd size >= {MIN_SIZE}")
    half = size // 2
    coords = np.arange(size) - half
    yg, xg = np.meshgrid(coords, coords, indexing="ij")  # index = iy*size+ix
    x = xg.ravel()
    y = yg.ravel()
    is_a = (x + y) % 2 == 0

    onsite = np.where(is_a, params.delta, -params.delta).astype(float)
    if fieldspec is not None:
        onsite = onsite + fieldspec.fx * x + fieldspec.fy * y

    rows, cols, vals = [], [], []

    def add_bonds(dx, dy, amp):
        if amp == 0.0:
            return
        ix = x + half
        iy = y + half
        jx, jy = ix + dx, iy + dy
        if periodic:
            jx, jy = jx % size, jy % size
            ok = is_a
        else:
            ok = is_a & (jx >= 0) & (jx < size) & (jy >= 0) & (jy < size)
        i = (iy * size + ix)[ok]
        j = (jy[ok] * size + jx[ok])
        rows.extend([i, j])
        cols.extend([j, i])
        vals.extend([np.full(len(i), -amp), np.full(len(i), -amp)])

    add_bonds(0, 1, params.j2)       # the odd bond: A to the site above
    add_bonds(1, 0, params.j1)
    add_bonds(-1, 0, params.j1)
    add_bonds(0, -1, params.j1)

    n = size * size
    if rows:
        h = sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n),
        ).tocsr()
        h = h + sparse.diags(onsite)
    else:
        h = sparse.diags(onsite)
    h = h.astype(np.complex128).tocsr()
    return RealSpaceLattice(params, fieldspec, size, x, y, is_a, h, periodic)


def single_site_state(lattice: RealSpaceLattice) -> np.ndarray:
    """Unit amplitude on the origin (an A site)."""
    psi = np.zeros(lattice.n_sites, dtype=complex)
    psi[lattice.origin_index()] = 1.0
    return psi


def gaussian_state(lattice: RealSpaceLattice, width: float) -> np.ndarray:
    """Normalized Gaussian packet centered on the origin."""
    psi = np.exp(-(lattice.x**2 + lattice.y**2) / (4.0 * width**2)).astype(complex)
    return psi / np.linalg.norm(psi)


# ---------------------------------------------------------------------------
# Chebyshev propagation


def _chebyshev_apply(h, psi, dt, emin, emax, tol=1e-15):
    """exp(-i H dt) psi via a Chebyshev expansion on [emin, emax]."""
    a = 0.5 * (emax + emin)
    b = 0.5 * (emax - emin)
    z = b * dt
    kmax = int(z + 20 + 20.0 * z ** (1.0 / 3.0)) if z > 1 else 24
    ks = np.arange(kmax + 1)
    coef = 2.0 * jv(ks, z) * (-1j) ** ks
    coef[0] *= 0.5
    keep = np.abs(coef) > tol
    if keep.any():
        kmax = int(np.nonzero(keep)[0][-1])
    t_prev = psi
    t_cur = (h @ psi - a * psi) / b
    acc = coef[0] * t_prev + coef[1] * t_cur
    for k in range(2, kmax + 1):
        t_nxt = 2.0 * (h @ t_cur - a * t_cur) / b - t_prev
        acc += coef[k] * t_nxt
        t_prev, t_cur = t_cur, t_nxt
    return np.exp(-1j * a * dt) * acc


@dataclass
class WavepacketState:
    """Complex amplitudes on the site grid at one instant."""

    t: float
    psi: np.ndarray


@dataclass
class WavepacketTrace:
    """Observables (and optionally states) along a propagation run."""

    times: np.ndarray
    m2: np.ndarray
    norm_error: np.ndarray
    energy_drift: np.ndarray
    states: list = dc_field(default_factory=list)
    stopped: str | None = None        # boundary-stop message, if any

    @property
    def sigma(self) -> np.ndarray:
        return np.sqrt(self.m2)


def second_moment(lattice: RealSpaceLattice, psi: np.ndarray) -> float:
    """M2 = sum (x^2 + y^2) |psi|^2, measured from the origin site."""
    p = np.abs(psi) ** 2
    return float(((lattice.x**2 + lattice.y**2) * p).sum())


def directional_moments(lattice: RealSpaceLattice, psi: np.ndarray):
    """Second moments along and transverse to the field direction."""
    fs = lattice.fieldspec
    if fs is None:
        raise ConfigError("directional moments need a tilted lattice")
    fhat = np.array([fs.fx, fs.fy]) / math.hypot(fs.fx, fs.fy)
    that = np.array([-fhat[1], fhat[0]])
    p = np.abs(psi) ** 2
    upar = lattice.x * fhat[0] + lattice.y * fhat[1]
    uperp = lattice.x * that[0] + lattice.y * that[1]
    return float((upar**2 * p).sum()), float((uperp**2 * p).sum())


def propagate(
    lattice: RealSpaceLattice,
    psi0: np.ndarray,
    t_grid,
    keep_states: bool = True,
    on_boundary: str = "raise",
) -> WavepacketTrace:
    """Evolve psi0 through the output times in t_grid.

    Checks after every interval: norm drift < 1e-10, energy expectation
    drift < 1e-8 relative, and probability on the outermost two site
    shells < 1e-6.  A boundary overflow raises by default; with
    on_boundary="stop" the run ends at the last clean checkpoint and the
    truncated trace carries the stop message.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if not np.all(np.diff(t_grid) > 0):
        raise ConfigError("t_grid must be strictly increasing")
    if on_boundary not in ("raise", "stop"):
        raise ConfigError("on_boundary must be 'raise' or 'stop'")
    h = lattice.hamiltonian
    emin, emax = lattice.spectral_bounds()
    psi = np.array(psi0, dtype=complex)
    e0 = float(np.vdot(psi, h @ psi).real)
    escale = max(1.0, abs(e0))
    edge = lattice.boundary_mask()

    times = t_grid if t_grid[0] == 0.0 else np.concatenate([[0.0], t_grid])
    m2 = np.empty(len(times))
    nerr = np.empty(len(times))
    edrift = np.empty(len(times))
    states = []

    def record(i, t, psi):
        m2[i] = second_moment(lattice, psi)
        nerr[i] = abs(np.linalg.norm(psi) - 1.0)
        edrift[i] = abs(float(np.vdot(psi, h @ psi).real) - e0) / escale
        if nerr[i] > NORM_DRIFT_TOL:
            raise ConvergenceError(f"norm drift {nerr[i]:.2e} at t={t:g}")
        if edrift[i] > ENERGY_DRIFT_TOL:
            raise ConvergenceError(f"energy drift {edrift[i]:.2e} at t={t:g}")
        flux = float((np.abs(psi[edge]) ** 2).sum())
        if flux > BOUNDARY_PROB_TOL:
            raise BoundaryFluxError(
                f"boundary probability {flux:.2e} at t={t:g}: increase L"
            )
        if keep_states:
            states.append(WavepacketState(t=t, psi=psi.copy()))

    stopped = None
    record(0, times[0], psi)
    n_done = 1
    for i in range(1, len(times)):
        dt = times[i] - times[i - 1]
        psi = _chebyshev_apply(h, psi, dt, emin, emax)
        try:
            record(i, times[i], psi)
        except BoundaryFluxError as exc:
            if on_boundary == "raise":
                raise
            stopped = str(exc)
            break
        n_done = i + 1
    return WavepacketTrace(
        times=times[:n_done],
        m2=m2[:n_done],
        norm_error=nerr[:n_done],
        energy_drift=edrift[:n_done],
        states=states,
        stopped=stopped,
    )


# ---------------------------------------------------------------------------
# ballistic rate and orientation scans


@dataclass
class BallisticFit:
    """Straight-line fit of sigma(t) over the final half of a run."""

    b: float                 # squared slope: M2 -> B t^2
    slope: float
    window: tuple[float, float]
    residual: float          # rms residual relative to the sigma span
    flagged: bool            # nonlinear tail (saturation etc.)


def ballistic_rate(times, m2, residual_threshold: float = 0.02) -> BallisticFit:
    """Extract the spreading rate from the asymptotic linear part of
    sigma(t); saturating (non-ballistic) traces come back flagged."""
    times = np.asarray(times, dtype=float)
    sigma = np.sqrt(np.asarray(m2, dtype=float))
    sel = times >= 0.5 * times[-1]
    if sel.sum() < 3:
        raise ConfigError("trace too short for a tail fit")
    t, s = times[sel], sigma[sel]
    slope, icept = np.polyfit(t, s, 1)
    resid = np.sqrt(np.mean((slope * t + icept - s) ** 2))
    span = max(s.max() - s.min(), 1e-300)
    rel = float(resid / span)
    return BallisticFit(
        b=float(slope**2),
        slope=float(slope),
        window=(float(t[0]), float(t[-1])),
        residual=rel,
        flagged=(rel > residual_threshold) or slope < 0,
    )


@dataclass
class DispersionScan:
    """sigma(theta, t) table over field orientations at fixed F."""

    thetas: np.ndarray
    checkpoints: np.ndarray
    sigma: np.ndarray          # (n_theta, n_checkpoints), NaN on failure
    failures: list             # (theta, message)


def dispersion_scan(
    params: LatticeParams,
    f: float,
    thetas,
    t_checkpoints,
    size: int = 201,
    workers: int | None = None,
) -> DispersionScan:
    """Single-site spreading versus field angle theta = arctan(Fx/Fy).

    Angles are used as given (no rationalization).  Runs whose packet
    reaches the boundary are recorded as failures and skipped.
    """
    from .parallel import pmap

    thetas = np.asarray(thetas, dtype=float)
    t_checkpoints = np.asarray(t_checkpoints, dtype=float)

    def run(theta):
        fs = FieldSpec.from_angle(f, theta)
        lattice = build_real_space(params, fs, size)
        psi0 = single_site_state(lattice)
        trace = propagate(
            lattice, psi0, t_checkpoints, keep_states=False, on_boundary="stop"
        )
        sig = trace.sigma if t_checkpoints[0] == 0.0 else trace.sigma[1:]
        return sig, trace.stopped

    results = pmap(run, thetas, workers=workers)
    nchk = len(t_checkpoints)
    table = np.full((len(thetas), nchk), np.nan)
    failures = []
    for i, (sig, err) in enumerate(results):
        table[i, : len(sig)] = sig
        if err is not None:
            failures.append((float(thetas[i]), err))
    return DispersionScan(
        thetas=thetas, checkpoints=t_checkpoints, sigma=table, failures=failures
    )


def count_local_maxima(values: np.ndarray, prominence: float = 0.0) -> int:
    """Interior local maxima of a 1D curve (NaNs break the curve).

    With prominence > 0 a maximum must rise above both neighbours by that
    fraction of the curve's full range, which keeps shallow transient
    wiggles out of the count."""
    v = np.asarray(values, dtype=float)
    good = ~np.isnan(v)
    idx = np.flatnonzero(good)
    if len(idx) < 3:
        return 0
    scale = float(np.nanmax(v) - np.nanmin(v))
    count = 0
    for j in range(1, len(idx) - 1):
        a, b, c = v[idx[j - 1]], v[idx[j]], v[idx[j + 1]]
        if b > a and b > c and (b - max(a, c)) > prominence * scale:
            count += 1
    return count
