"""Strong-, moderate- and weak-field asymptotics of the WS bands.

Three independent approximations, each validated against the numeric bands:

* strong field: the bandwidth decays as a power law Delta ~ F^-nu with an
  integer exponent set by the lattice geometry and field orientation, and
  the dispersion approaches a pure cosine of period 2pi/(N d);
* moderate field: a first-iteration averaging formula expresses the band
  correction through products of Bessel functions (valid for unequal
  tunneling amplitudes and r != q, +-(r+q) != 0);
* weak field (gapped lattice): the band ladder follows from the
  theta-averaged eigenvalues of the two-level generator plus a geometric
  (Berry) phase computed as a discrete Wilson loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import jv

from .errors import ConvergenceError, UnsupportedOrientationError
from .lattice import FieldSpec, LatticeParams, Orientation, bloch_bands
from .wsbands import WSBand, band_sweep, fold_energy, kappa_grid
from .wsbands import _chain_pauli
from . import twolevel


# ---------------------------------------------------------------------------
# strong field


@dataclass
class StrongFieldLaw:
    """Power-law fit Delta(F) ~ prefactor / F^nu over a strong-field range."""

    nu: int
    slope: float            # unrounded decay exponent from the log-log fit
    prefactor: float
    residual: float         # rms residual of the log-log fit
    f_range: tuple[float, float]
    flagged: bool

    @classmethod
    def fit(cls, f_values, widths, residual_threshold: float = 0.05):
        logf = np.log(np.asarray(f_values, dtype=float))
        logd = np.log(np.asarray(widths, dtype=float))
        coef = np.polyfit(logf, logd, 1)
        resid = float(np.sqrt(np.mean((np.polyval(coef, logf) - logd) ** 2)))
        slope = -float(coef[0])
        return cls(
            nu=int(round(slope)),
            slope=slope,
            prefactor=float(np.exp(coef[1])),
            residual=resid,
            f_range=(float(f_values[0]), float(f_values[-1])),
            flagged=resid > residual_threshold,
        )


def strong_field_exponent(
    params: LatticeParams,
    orientation: Orientation,
    f_lo: float = 10.0,
    f_hi: float = 100.0,
    n_f: int = 8,
    n_kappa: int = 48,
) -> StrongFieldLaw:
    """Fit the bandwidth decay exponent over a strong-field sweep."""
    f_values = np.geomspace(f_lo, f_hi, n_f)
    widths = []
    for f in f_values:
        fs = FieldSpec.from_rq(f, orientation.r, orientation.q)
        lo, hi = band_sweep(params, fs, kappa_grid(fs, n_kappa), method="monodromy")
        widths.append(0.5 * (lo.bandwidth + hi.bandwidth))
    return StrongFieldLaw.fit(f_values, widths)


@dataclass
class CosineShape:
    """Single-harmonic content of a band at the period 2pi/(N d)."""

    delta_fit: float        # amplitude of the fundamental cosine
    phase: float
    purity: float           # fundamental fraction of the AC spectral power


def cosine_shape_check(band: WSBand, orientation: Orientation) -> CosineShape:
    """Least-squares cosine fit via the FFT of the (periodic) band."""
    n = len(band.kappa)
    span = n * (band.kappa[1] - band.kappa[0])
    period = 2.0 * np.pi / (orientation.n_cells * orientation.d)
    fund = int(round(span / period))
    c = np.fft.rfft(band.e) / n
    power = 2.0 * np.abs(c[1:]) ** 2
    purity = float(power[fund - 1] / power.sum()) if power.sum() > 0 else 1.0
    return CosineShape(
        delta_fit=float(2.0 * np.abs(c[fund])),
        phase=float(np.angle(c[fund])),
        purity=purity,
    )


# ---------------------------------------------------------------------------
# moderate field (averaging formula)


def bm_z_arguments(params: LatticeParams, orientation: Orientation, f: float):
    """Bessel arguments of the averaging formula."""
    r, q, d = orientation.r, orientation.q, orientation.d
    if r == q:
        raise UnsupportedOrientationError("averaging formula is singular for r = q")
    if r + q == 0:
        raise UnsupportedOrientationError(
            "averaging formula is singular for r + q = 0"
        )
    z1 = 8.0 * params.j1 / (f * d * (r - q))
    z2 = 4.0 * (params.j1 + params.j2) / (f * d * (r + q))
    return z1, z2


def bm_correction(
    params: LatticeParams,
    orientation: Orientation,
    f: float,
    kappa,
    term_cutoff: int = 16,
):
    """First-iteration averaging correction to the flat ladder.

    Partial sum over integer pairs (n, m) obeying (r-q) m = -(r+q)(1+n)
    with |n|, |m| <= term_cutoff; each term carries J_m(z1) J_n(z2) and a
    cosine harmonic of the transverse quasimomentum.
    """
    z1, z2 = bm_z_arguments(params, orientation, f)
    r, q, d = orientation.r, orientation.q, orientation.d
    n_sq = orientation.n_cells
    kappa = np.asarray(kappa, dtype=float)
    total = np.zeros_like(kappa)
    for n in range(-term_cutoff, term_cutoff + 1):
        m_num = -(r + q) * (1 + n)
        if m_num % (r - q) != 0:
            continue
        m = m_num // (r - q)
        if abs(m) > term_cutoff:
            continue
        arg = kappa * d * n_sq * (1 + n) / (r - q)
        total = total + jv(m, z1) * jv(n, z2) * np.cos(arg)
    return (params.j2 - params.j1) * total


def bm_band_pair(
    params: LatticeParams,
    orientation: Orientation,
    f: float,
    kappa,
    term_cutoff: int = 16,
):
    """Folded (minus, plus) ladder energies from the averaging formula.

    The flat-ladder skeleton is dF(n -/+ (r+q)/4) +/- delta, and the
    correction enters with opposite signs on the two ladders (positive on
    the +delta ladder, calibrated term-by-term against the printed (2, 1)
    special case).
    """
    fs = FieldSpec.from_rq(f, orientation.r, orientation.q)
    df = fs.df
    corr = bm_correction(params, orientation, f, kappa, term_cutoff)
    e_a = fold_energy(-df * (orientation.r + orientation.q) / 4.0
                      + params.delta + corr, df)
    e_b = fold_energy(df * (orientation.r + orientation.q) / 4.0
                      - params.delta - corr, df)
    pair = np.stack(np.broadcast_arrays(e_a, e_b), axis=-1)
    pair.sort(axis=-1)
    return pair


# ---------------------------------------------------------------------------
# weak field (adiabatic ladder with geometric phase)


@dataclass
class AdiabaticBand:
    """Weak-field ladder data: dynamical averages and geometric phases."""

    kappa: np.ndarray
    c_minus: np.ndarray       # theta-average of the lower generator branch
    c_plus: np.ndarray
    gamma_minus: np.ndarray   # geometric phases, dimensionless mod 1
    gamma_plus: np.ndarray
    min_theta_gap: float      # smallest branch splitting met on the circle
    df: float

    def energies(self, n: int, kappa_index=slice(None)):
        """Ladder reconstruction E_{n,+-} = C_+- + dF (n + c_+-)."""
        lo = self.c_minus[kappa_index] + self.df * (n + self.gamma_minus[kappa_index])
        hi = self.c_plus[kappa_index] + self.df * (n + self.gamma_plus[kappa_index])
        return lo, hi

    def folded_pair(self):
        """Folded (minus, plus) energies per kappa for band comparisons."""
        pair = np.stack(
            [fold_energy(e, self.df) for e in self.energies(0)], axis=-1
        )
        pair.sort(axis=-1)
        return pair


def wilson_loop_phase(spinors: np.ndarray) -> np.ndarray:
    """Geometric phase of a closed eigenvector loop (gauge invariant).

    spinors has shape (n_theta, ..., 2); the loop closes back onto the
    first point.  Returns gamma = -arg prod <y_j|y_{j+1}> in (-pi, pi].
    """
    nxt = np.roll(spinors, -1, axis=0)
    ov = np.einsum("t...c,t...c->t...", spinors.conj(), nxt)
    return -np.angle(np.prod(ov, axis=0))


def adiabatic_bands(
    params: LatticeParams,
    fieldspec: FieldSpec,
    kappas=None,
    n_theta: int = 512,
    gap_tol: float = 1e-9,
) -> AdiabaticBand:
    """Weak-field band ladder from the theta-circle of the generator.

    The dynamical part is the periodic-trapezoid average of the generator
    eigenvalue branches; the geometric phase is a discrete Wilson loop
    over n_theta points (gauge invariant by construction).  Degenerate
    branches anywhere on the circle abort with the location.
    """
    if kappas is None:
        kappas = kappa_grid(fieldspec)
    kappas = np.asarray(kappas, dtype=float)
    pauli, _ = _chain_pauli(params, fieldspec, kappas)
    df = fieldspec.df
    thetas = np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False)
    avecs = np.empty((n_theta, len(kappas), 3))
    for i, th in enumerate(thetas):
        _, a = pauli(th)
        avecs[i] = a
    scale = df * np.linalg.norm(avecs, axis=-1)  # |branch splitting| / 2
    min_gap = float(2.0 * scale.min())
    if min_gap < gap_tol:
        it, ik = np.unravel_index(np.argmin(scale), scale.shape)
        raise ConvergenceError(
            f"generator branches touch at theta={thetas[it]:.6f}, "
            f"kappa={kappas[ik]:.6f}; adiabatic ladder undefined"
        )
    c_plus = scale.mean(axis=0)  # = + mean branch energy
    lo_spin, hi_spin = twolevel.branch_spinors(avecs)
    g_lo = wilson_loop_phase(lo_spin)
    g_hi = wilson_loop_phase(hi_spin)
    return AdiabaticBand(
        kappa=kappas,
        c_minus=-c_plus,
        c_plus=c_plus,
        gamma_minus=(-g_lo / (2.0 * np.pi)) % 1.0,
        gamma_plus=(-g_hi / (2.0 * np.pi)) % 1.0,
        min_theta_gap=min_gap,
        df=df,
    )


# ---------------------------------------------------------------------------
# zero-field limit of the band ladder


def limiting_dispersion(
    params: LatticeParams, orientation: Orientation, kappas, n_line: int = 256
):
    """Line average of the Bloch bands along the field direction.

    For each transverse quasimomentum the Bloch vector runs over one
    longitudinal period in the rotated frame; periodic trapezoid
    quadrature gives the F -> 0 limit of the ladder envelope.
    """
    kappas = np.atleast_1d(np.asarray(kappas, dtype=float))
    e_f = orientation.field_axis_primary()
    e_t = orientation.transverse_axis_primary()
    s = np.linspace(0.0, 2.0 * np.pi / orientation.d, n_line, endpoint=False)
    kx = kappas[:, None] * e_t[0] + s[None, :] * e_f[0]
    ky = kappas[:, None] * e_t[1] + s[None, :] * e_f[1]
    lo, hi = bloch_bands(params, kx, ky)
    return lo.mean(axis=1), hi.mean(axis=1)


def limiting_a(
    params: LatticeParams,
    orientation: Orientation,
    n_kappa: int = 256,
    n_line: int = 256,
) -> float:
    """Spreading-rate functional applied to the limiting dispersion.

    Both limiting bands are mirror images, so a single value describes
    the pair."""
    period = 2.0 * np.pi / (orientation.n_cells * orientation.d)
    kappas = np.linspace(0.0, period, n_kappa, endpoint=False)
    _, hi = limiting_dispersion(params, orientation, kappas, n_line)
    # spectral derivative of the periodic band
    freqs = np.fft.rfftfreq(n_kappa, d=period / n_kappa) * 2.0 * np.pi
    v = np.fft.irfft(1j * freqs * np.fft.rfft(hi), n=n_kappa)
    return float(np.mean(v**2))
