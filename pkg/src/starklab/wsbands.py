"""Wannier-Stark bands of the tilted lattice, by two independent methods.

For a rational field orientation (r, q) the tilted problem reduces to a
one-dimensional two-component chain over lattice planes transverse to the
field, with the transverse quasimomentum ``kappa`` entering as a parameter:

* A-site diagonal  d*F*(l - (r+q)/4) + delta,
* B-site diagonal  d*F*(l + (r+q)/4) - delta,
* couplings ``<A_l|H|B_{l-s}>`` for s in {0 (J2), q, r, q+r} with the
  transverse phases exp(-i r d kappa), exp(+i q d kappa),
  exp(+i (q-r) d kappa) on the three J1 bonds, and the B-row defined as the
  exact Hermitian conjugate.  (The overall sign convention is fixed by
  requiring the untilted chain to reproduce the two-band Bloch matrix.)

Method (a) diagonalizes a truncated chain and keeps boundary-converged
central eigenpairs; method (b) integrates the equivalent driven two-level
system over one period of the compact conjugate coordinate and reads band
energies off the propagator eigenphases.  Both fold into the fundamental
window [-dF/2, dF/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.linalg import eig_banded

from .errors import ConfigError, ConvergenceError
from .lattice import FieldSpec, LatticeParams, Orientation
from . import twolevel

BOUNDARY_AMP_TOL = 1e-8
MAX_DOUBLINGS = 6


# ---------------------------------------------------------------------------
# chain construction


@dataclass
class WSChain:
    """Truncated two-component chain at fixed transverse quasimomentum."""

    params: LatticeParams
    fieldspec: FieldSpec
    kappa: float
    n_cells: int
    diag: np.ndarray                       # (2L,) real, interleaved (A, B)
    couplings: list                        # [(s, <A_l|H|B_{l-s}>), ...]

    @property
    def df(self) -> float:
        return self.fieldspec.df

    @property
    def n_super(self) -> int:
        """Number of superdiagonals of the interleaved banded matrix."""
        return max(abs(2 * s - 1) for s, _ in self.couplings)

    def to_banded(self) -> np.ndarray:
        """Upper banded storage accepted by scipy.linalg.eig_banded."""
        n = 2 * self.n_cells
        u = self.n_super
        a = np.zeros((u + 1, n), dtype=complex)
        a[u, :] = self.diag
        for s, c in self.couplings:
            i = np.arange(max(0, s), min(self.n_cells, self.n_cells + s))
            row = 2 * i
            col = 2 * (i - s) + 1
            upper = row < col
            a[u + row[upper] - col[upper], col[upper]] = c
            a[u + col[~upper] - row[~upper], row[~upper]] = np.conj(c)
        return a

    def to_dense(self) -> np.ndarray:
        n = 2 * self.n_cells
        u = self.n_super
        a = self.to_banded()
        h = np.zeros((n, n), dtype=complex)
        for k in range(u + 1):
            off = u - k
            vals = a[k, off:]
            h[np.arange(n - off), np.arange(off, n)] = vals
        return h + np.conj(np.triu(h, 1)).T

    def apply_dkappa(self, vec: np.ndarray) -> np.ndarray:
        """Apply dH/dkappa (only the J1 phases depend on kappa)."""
        d = self.fieldspec.require_rational().d
        out = np.zeros_like(vec)
        va = vec[0::2]
        vb = vec[1::2]
        for s, c, m in self._phase_couplings():
            dc = 1j * m * d * c
            i = np.arange(max(0, s), min(self.n_cells, self.n_cells + s))
            out[2 * i] += dc * vb[i - s]
            out[2 * (i - s) + 1] += np.conj(dc) * va[i]
        return out

    def _phase_couplings(self):
        """(s, coefficient, d(phase)/d(d*kappa)) for the kappa-dependent bonds."""
        o = self.fieldspec.require_rational()
        r, q = o.r, o.q
        d, j1 = o.d, self.params.j1
        k = self.kappa
        return [
            (q, -j1 * np.exp(-1j * r * d * k), -r),
            (r, -j1 * np.exp(1j * q * d * k), q),
            (q + r, -j1 * np.exp(1j * (q - r) * d * k), q - r),
        ]


def min_chain_cells(orient: Orientation) -> int:
    return 4 * (abs(orient.r) + abs(orient.q)) + 8


def default_chain_cells(params: LatticeParams, fieldspec: FieldSpec) -> int:
    """Initial truncation; localization length scales like J/(dF)."""
    orient = fieldspec.require_rational()
    n = max(
        min_chain_cells(orient),
        math.ceil(16.0 * (params.j1 + params.j2) / fieldspec.df),
    )
    return n + (n % 2)


def build_ws_chain(
    params: LatticeParams, fieldspec: FieldSpec, kappa: float, n_cells: int
) -> WSChain:
    """Assemble the truncated chain (cells centered on l = 0)."""
    orient = fieldspec.require_rational()
    if not is_canonical(orient):
        raise ConfigError(f"orientation {orient} is not in canonical form")
    if n_cells < min_chain_cells(orient):
        raise ConfigError(
            f"chain too short: {n_cells} cells < {min_chain_cells(orient)}"
        )
    r, q = orient.r, orient.q
    d, df = orient.d, fieldspec.df
    lvals = np.arange(n_cells) - n_cells // 2
    diag = np.empty(2 * n_cells)
    diag[0::2] = df * (lvals - (r + q) / 4.0) + params.delta
    diag[1::2] = df * (lvals + (r + q) / 4.0) - params.delta

    acc: dict[int, complex] = {}
    for s, c in [
        (0, -params.j2),
        (q, -params.j1 * np.exp(-1j * r * d * kappa)),
        (r, -params.j1 * np.exp(1j * q * d * kappa)),
        (q + r, -params.j1 * np.exp(1j * (q - r) * d * kappa)),
    ]:
        acc[s] = acc.get(s, 0.0) + c
    couplings = sorted(acc.items())
    return WSChain(params, fieldspec, kappa, n_cells, diag, couplings)


def is_canonical(orient: Orientation) -> bool:
    """True when (r, q) is coprime with the canonical sign convention."""
    good_sign = orient.q > 0 or (orient.q == 0 and orient.r > 0)
    return good_sign and math.gcd(abs(orient.r), abs(orient.q)) == 1


def fold_energy(e, df: float):
    """Fold energies into the fundamental window [-dF/2, dF/2)."""
    return (np.asarray(e) + 0.5 * df) % df - 0.5 * df


# ---------------------------------------------------------------------------
# central (boundary-converged) spectrum


@dataclass
class CentralSpectrum:
    """Boundary-converged eigenpairs from the chain center."""

    energies: np.ndarray          # ascending
    vectors: np.ndarray           # columns matching energies
    ladder: np.ndarray            # 0/1 cluster label per state
    n_cells: int

    def ladder_energies(self, label: int) -> np.ndarray:
        return self.energies[self.ladder == label]


def _central_filter(chain: WSChain, evals, evecs):
    n = chain.n_cells
    prob = np.abs(evecs) ** 2
    cellprob = prob[0::2] + prob[1::2]
    centroid = (np.arange(n)[:, None] * cellprob).sum(axis=0) / cellprob.sum(axis=0)
    edge = np.sqrt(
        np.maximum(cellprob[0], cellprob[-1])
    )
    keep = (centroid >= n / 3.0) & (centroid <= 2.0 * n / 3.0)
    keep &= edge < BOUNDARY_AMP_TOL
    return keep


def central_spectrum(
    chain_builder, params: LatticeParams, fieldspec: FieldSpec, kappa: float,
    n_cells: int | None = None,
) -> CentralSpectrum:
    """Solve the chain, doubling the truncation until the central window
    holds at least two converged rungs per ladder."""
    n = n_cells or default_chain_cells(params, fieldspec)
    df = fieldspec.df
    last_diag = ""
    for _ in range(MAX_DOUBLINGS + 1):
        chain = chain_builder(params, fieldspec, kappa, n)
        evals, evecs = eig_banded(chain.to_banded(), lower=False)
        keep = _central_filter(chain, evals, evecs)
        if keep.sum() >= 4:
            energies = evals[keep]
            vectors = evecs[:, keep]
            labels = _cluster_ladders(energies, vectors, df)
            if (labels == 0).sum() >= 1 and (labels == 1).sum() >= 1:
                return CentralSpectrum(energies, vectors, labels, n)
            last_diag = "single ladder resolved"
        else:
            last_diag = f"{int(keep.sum())} converged central states"
        n *= 2
    raise ConvergenceError(
        f"central spectrum not converged: {last_diag} at {n // 2} cells "
        f"(kappa={kappa:g}, F={fieldspec.f:g})"
    )


def _cluster_ladders(energies, vectors, df):
    """Split central eigenvalues into the two interleaved ladders.

    Each ladder folds onto a single point of the circle of circumference
    dF, so the sorted folds fall into two arcs separated by the two
    largest circular gaps.  When the ladders fold (nearly) on top of each
    other the sublattice weight breaks the tie."""
    folds = np.asarray(fold_energy(energies, df))
    order = np.argsort(folds)
    sf = folds[order]
    gaps = np.empty_like(sf)
    gaps[:-1] = np.diff(sf)
    gaps[-1] = sf[0] + df - sf[-1]
    top2 = np.sort(np.argsort(gaps)[-2:])
    labels = np.zeros(len(folds), dtype=int)
    if len(folds) < 2 or gaps[top2[0]] < 1e-6 * df:
        # degenerate folds: separate by A-sublattice weight
        wa = (np.abs(vectors[0::2]) ** 2).sum(axis=0)
        labels = (wa < np.median(wa)).astype(int)
        return labels
    labels[order[top2[0] + 1 : top2[1] + 1]] = 1
    return labels


def central_bands(
    params: LatticeParams, fieldspec: FieldSpec, kappa: float,
    n_cells: int | None = None, with_velocity: bool = False,
):
    """Representative folded energy per ladder at this kappa.

    Returns (e_minus, e_plus) sorted ascending, optionally with the
    matching group velocities from the Hellmann-Feynman theorem.
    """
    spec = central_spectrum(build_ws_chain, params, fieldspec, kappa, n_cells)
    df = fieldspec.df
    chain = build_ws_chain(params, fieldspec, kappa, spec.n_cells) if with_velocity else None
    reps = []
    for label in (0, 1):
        sel = np.flatnonzero(spec.ladder == label)
        # most central rung of this ladder
        mid = sel[np.argmin(np.abs(spec.energies[sel]))]
        e = float(fold_energy(spec.energies[mid], df))
        if with_velocity:
            vec = spec.vectors[:, mid]
            v = float(np.real(np.vdot(vec, chain.apply_dkappa(vec))))
            reps.append((e, v))
        else:
            reps.append((e, 0.0))
    reps.sort(key=lambda t: t[0])
    if with_velocity:
        return (reps[0][0], reps[1][0]), (reps[0][1], reps[1][1])
    return reps[0][0], reps[1][0]


# ---------------------------------------------------------------------------
# monodromy method


@dataclass
class MonodromyResult:
    """One-period propagator of the driven two-level system at fixed kappa."""

    kappa: float
    propagator: np.ndarray
    eigenphases: tuple[float, float]      # E_n = dF (n + phase / 2pi)
    energies: tuple[float, float]         # folded, ascending
    degenerate: bool
    nsteps: int
    phase_error: float


def _chain_pauli(params: LatticeParams, fieldspec: FieldSpec, kappa):
    """Pauli components of the theta-dependent two-level generator.

    Returns a callable theta -> (c, a) for the effective Schrodinger system
    equivalent to the chain (kappa may be an array for batched sweeps).
    """
    orient = fieldspec.require_rational()
    r, q = orient.r, orient.q
    d, df = orient.d, fieldspec.df
    j1, j2, delta = params.j1, params.j2, params.delta
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    m11 = df * (r + q) / 4.0 - delta
    p1 = np.exp(-1j * r * d * kappa)
    p2 = np.exp(1j * q * d * kappa)
    p3 = np.exp(1j * (q - r) * d * kappa)

    def pauli(theta: float):
        w = j2 + j1 * (
            p1 * np.exp(1j * q * theta)
            + p2 * np.exp(1j * r * theta)
            + p3 * np.exp(1j * (q + r) * theta)
        )
        a = np.empty(kappa.shape + (3,))
        a[..., 0] = -w.real / df
        a[..., 1] = w.imag / df
        a[..., 2] = np.full(kappa.shape, -m11 / df)
        return np.zeros(kappa.shape), a

    scale = (abs(m11) + j2 + 3.0 * j1) / df
    return pauli, scale


def monodromy_sweep(
    params: LatticeParams, fieldspec: FieldSpec, kappa_grid, tol: float = 1e-12
):
    """Folded band energies over a kappa grid from propagator eigenphases.

    Returns (energies (nk, 2) ascending, degenerate mask, info dict).
    """
    pauli, scale = _chain_pauli(params, fieldspec, kappa_grid)
    nsteps0 = max(16, int(8 * (1.0 + scale)))
    u, err, nsteps = twolevel.refine_unitary(pauli, 0.0, 2.0 * np.pi, tol, nsteps0)
    pa, pb, degen = twolevel.su2_eigenphases(u)
    df = fieldspec.df
    e = fold_energy(-df * np.stack([pa, pb], axis=-1) / (2.0 * np.pi), df)
    e.sort(axis=-1)
    return e, degen, {"nsteps": nsteps, "phase_error": err, "propagator": u}


def monodromy_spectrum(
    params: LatticeParams, fieldspec: FieldSpec, kappa: float, tol: float = 1e-12
) -> MonodromyResult:
    """Single-kappa monodromy with the spec quantization convention."""
    e, degen, info = monodromy_sweep(params, fieldspec, kappa, tol)
    u = info["propagator"][0]
    pa, pb, _ = twolevel.su2_eigenphases(u[None, ...])
    phases = twolevel._wrap(np.array([-pa[0], -pb[0]]))
    return MonodromyResult(
        kappa=float(kappa),
        propagator=u,
        eigenphases=(float(phases[0]), float(phases[1])),
        energies=(float(e[0, 0]), float(e[0, 1])),
        degenerate=bool(degen[0]),
        nsteps=info["nsteps"],
        phase_error=float(info["phase_error"]),
    )


# ---------------------------------------------------------------------------
# band sweeps


@dataclass
class WSBand:
    """One Wannier-Stark band over a kappa grid (continuously stitched)."""

    ladder: str                           # "minus" | "plus"
    kappa: np.ndarray
    e: np.ndarray
    v: np.ndarray
    crossing_flags: np.ndarray = dc_field(default=None)
    method: str = "chain"

    @property
    def bandwidth(self) -> float:
        return float(self.e.max() - self.e.min())


def kappa_grid(fieldspec: FieldSpec, n: int = 256, window: str = "period"):
    """Uniform kappa grid over one band period 2pi/(N d) or the full
    2pi/d comparison window."""
    orient = fieldspec.require_rational()
    span = 2.0 * np.pi / orient.d
    if window == "period":
        span /= orient.n_cells
    elif window != "full":
        raise ConfigError("window must be 'period' or 'full'")
    return np.linspace(0.0, span, n, endpoint=False)


def _stitch(kappa, pairs, vels, df):
    """Continuity continuation of folded energy pairs along kappa.

    Returns unfolded energies (nk, 2), matching velocities and a flag
    array marking continuation jumps larger than 3x the median step.
    """
    nk = len(kappa)
    e = np.empty((nk, 2))
    v = np.empty((nk, 2))
    e[0] = pairs[0]
    v[0] = vels[0]
    for i in range(1, nk):
        prev = e[i - 1]
        best = None
        for perm in ((0, 1), (1, 0)):
            cand = [
                pairs[i][perm[j]] + df * np.round((prev[j] - pairs[i][perm[j]]) / df)
                for j in range(2)
            ]
            cost = abs(cand[0] - prev[0]) + abs(cand[1] - prev[1])
            if best is None or cost < best[0]:
                best = (cost, cand, perm)
        _, cand, perm = best
        e[i] = cand
        v[i] = [vels[i][perm[0]], vels[i][perm[1]]]
    steps = np.abs(np.diff(e, axis=0))
    med = np.median(steps, axis=0)
    flags = np.zeros((nk, 2), dtype=bool)
    flags[1:] = steps > 3.0 * np.maximum(med, 1e-300)
    return e, v, flags


def band_sweep(
    params: LatticeParams,
    fieldspec: FieldSpec,
    kappas=None,
    method: str = "chain",
    n_cells: int | None = None,
    tol: float = 1e-12,
    workers: int | None = None,
) -> tuple[WSBand, WSBand]:
    """Sweep kappa and stitch the pair of WS bands.

    Velocities come from the Hellmann-Feynman theorem on the chain
    eigenvectors ("chain" method) or centered finite differences
    ("monodromy").
    """
    if kappas is None:
        kappas = kappa_grid(fieldspec)
    kappas = np.asarray(kappas, dtype=float)
    df = fieldspec.df
    if method == "chain":
        from .parallel import pmap

        def point(k):
            return central_bands(params, fieldspec, k, n_cells, with_velocity=True)

        results = pmap(point, kappas, workers=workers)
        pairs = np.array([r[0] for r in results])
        vels = np.array([r[1] for r in results])
    elif method == "monodromy":
        pairs, _, _ = monodromy_sweep(params, fieldspec, kappas, tol)
        vels = np.zeros_like(pairs)
    else:
        raise ConfigError(f"unknown method {method!r}")

    e, v, flags = _stitch(kappas, pairs, vels, df)
    if method == "monodromy":
        v = np.column_stack([_fd_velocity(kappas, e[:, j]) for j in (0, 1)])
    # near-degeneracies of the folded pair behave like avoided crossings
    gap = np.abs(fold_energy(e[:, 1] - e[:, 0], df))
    flags |= (gap < 0.05 * df)[:, None]
    bands = []
    for j, tag in enumerate(("minus", "plus")):
        bands.append(
            WSBand(
                ladder=tag, kappa=kappas, e=e[:, j], v=v[:, j],
                crossing_flags=flags[:, j], method=method,
            )
        )
    bands.sort(key=lambda b: b.e.mean())
    bands[0].ladder, bands[1].ladder = "minus", "plus"
    return bands[0], bands[1]


def _fd_velocity(kappa, e):
    """Centered finite differences on a uniform (non-wrapping) grid."""
    return np.gradient(e, kappa, edge_order=2)


# ---------------------------------------------------------------------------
# integrated band characteristics


@dataclass
class SpreadingRate:
    """Mean squared group velocity per ladder; predicts ballistic spreading."""

    a_minus: float
    a_plus: float

    @property
    def a_mean(self) -> float:
        return 0.5 * (self.a_minus + self.a_plus)


def spreading_rate_a(bands: tuple[WSBand, WSBand], f: float) -> SpreadingRate:
    """A = (2pi)^-1 integral of v(kappa)^2 over d*kappa in [0, 2pi].

    The integrand is periodic, so the periodic trapezoid rule reduces to a
    plain mean over one uniform grid period.
    """
    values = []
    for band in bands:
        dk = np.diff(band.kappa)
        if not np.allclose(dk, dk[0], rtol=1e-9, atol=0.0):
            raise ConfigError("spreading rate needs a uniform kappa grid")
        values.append(float(np.mean(band.v**2)))
    return SpreadingRate(a_minus=values[0], a_plus=values[1])


@dataclass
class WSFan:
    """Raw central-window energies per field strength (fixed kappa)."""

    f_values: np.ndarray
    levels: list             # one ascending energy array per F
    kappa: float
    window: float


def ws_fan(
    params: LatticeParams,
    orientation: Orientation,
    kappa_frac: float,
    f_values,
    window: float | None = None,
    workers: int | None = None,
) -> WSFan:
    """Central-window eigenvalues versus F at fixed d*kappa/2pi.

    Levels are reported raw per F (no sorting across F) so avoided
    crossings stay visible in the fan.
    """
    from .parallel import pmap

    f_values = np.asarray(f_values, dtype=float)
    if window is None:
        window = 1.25 * orientation.d * f_values.max() + abs(params.delta)

    def levels_at(f):
        fieldspec = FieldSpec.from_rq(f, orientation.r, orientation.q)
        kappa = 2.0 * np.pi * kappa_frac / orientation.d
        # the central third spans n/6 cells either side of l = 0: make it
        # wide enough in energy to fill the requested window
        span = window + abs(params.delta) + 4.0 * (params.j1 + params.j2)
        n = max(
            default_chain_cells(params, fieldspec),
            int(math.ceil(6.5 * span / fieldspec.df)),
        )
        spec = central_spectrum(build_ws_chain, params, fieldspec, kappa, n)
        ev = spec.energies
        return ev[np.abs(ev) <= window]

    levels = pmap(levels_at, f_values, workers=workers)
    kappa = 2.0 * np.pi * kappa_frac / orientation.d
    return WSFan(f_values=f_values, levels=levels, kappa=kappa, window=window)


def fan_min_gap(fan: WSFan) -> float:
    """Smallest adjacent-level spacing across the fan (avoided-crossing
    pronouncedness statistic; larger means stronger level repulsion)."""
    gaps = [np.diff(lev).min() for lev in fan.levels if len(lev) > 1]
    return float(min(gaps))
