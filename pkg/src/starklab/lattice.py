"""Two-sublattice square lattice: model parameters, field geometry, Bloch bands.

Geometry conventions used throughout the package:

* Sites live on the integer (x, y) grid with unit spacing; sublattice A is
  x + y even (on-site +delta), B is x + y odd (on-site -delta).
* Every A site has one "odd" bond with amplitude J2 to the B site straight
  above it (A -> A + (0, 1)); the three remaining nearest-neighbour bonds
  (east, west, south) carry J1.  Hopping matrix elements enter the
  Hamiltonian with a minus sign.
* The primary axes of the doubled cell are rotated by 45 degrees from xy:
  e1 = (1, 1)/sqrt(2), e2 = (-1, 1)/sqrt(2), with lattice period A_PRIM =
  sqrt(2).  Quasimomenta (kx, ky) are the components of the Bloch vector
  along (e1, e2).
* A static field direction is `beta = Fx/Fy` in the xy frame or
  `tilde_beta = Ftx/Fty = r/q` in the primary frame, with r, q coprime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import least_squares

from .errors import ConfigError

A_PRIM = math.sqrt(2.0)
#: unit vectors of the primary axes, expressed in the xy frame
E1_XY = np.array([1.0, 1.0]) / math.sqrt(2.0)
E2_XY = np.array([-1.0, 1.0]) / math.sqrt(2.0)


@dataclass(frozen=True)
class LatticeParams:
    """Tunneling amplitudes and sublattice detuning of the model."""

    j1: float
    j2: float
    delta: float

    def __post_init__(self):
        if self.j1 < 0 or self.j2 < 0:
            raise ConfigError("tunneling amplitudes must be non-negative")


LATTICE_I = LatticeParams(j1=0.4, j2=0.4, delta=0.5)
LATTICE_II = LatticeParams(j1=0.5, j2=0.0, delta=0.0)
PRESETS = {"i": LATTICE_I, "ii": LATTICE_II}


def frame_convert(beta: float) -> float:
    """Map the xy-frame slope Fx/Fy to the primary-frame slope Ftx/Fty.

    The 45-degree rotation gives tilde_beta = (1 + beta)/(1 - beta);
    infinities are handled projectively (beta = 1 -> inf, beta = inf -> -1).
    """
    if math.isinf(beta):
        return -1.0
    if beta == 1.0:
        return math.inf
    return (1.0 + beta) / (1.0 - beta)


def frame_convert_inverse(tilde_beta: float) -> float:
    """Inverse of :func:`frame_convert` (tilde_beta = inf -> beta = 1)."""
    if math.isinf(tilde_beta):
        return 1.0
    if tilde_beta == -1.0:
        return math.inf
    return (tilde_beta - 1.0) / (tilde_beta + 1.0)


@dataclass(frozen=True)
class Orientation:
    """Canonical coprime field direction (r, q) in the primary-axes frame.

    Canonical form: gcd(|r|, |q|) = 1, q >= 0, and r > 0 when q = 0.
    Negative r is meaningful (F parallel to x maps to (-1, 1)).
    """

    r: int
    q: int

    @property
    def n_cells(self) -> int:
        """N = r^2 + q^2, the number of cells per magnetic-like supercell."""
        return self.r * self.r + self.q * self.q

    @property
    def d(self) -> float:
        """Spacing of lattice planes transverse to the field, d = a/sqrt(N)."""
        return A_PRIM / math.sqrt(self.n_cells)

    @property
    def tilde_beta(self) -> float:
        return math.inf if self.q == 0 else self.r / self.q

    @property
    def beta(self) -> float:
        return frame_convert_inverse(self.tilde_beta)

    def field_axis_primary(self) -> np.ndarray:
        """Unit vector along the field, components in the primary frame."""
        v = np.array([self.r, self.q], dtype=float)
        return v / np.linalg.norm(v)

    def transverse_axis_primary(self) -> np.ndarray:
        """Unit vector transverse to the field (primary-frame components)."""
        v = np.array([-self.q, self.r], dtype=float)
        return v / np.linalg.norm(v)


def canonical_orientation(r: int, q: int) -> Orientation:
    """Reduce (r, q) to the canonical coprime form with q >= 0."""
    if r == 0 and q == 0:
        raise ConfigError("orientation (0, 0) has no direction")
    g = math.gcd(abs(r), abs(q))
    r, q = r // g, q // g
    if q < 0 or (q == 0 and r < 0):
        r, q = -r, -q
    return Orientation(r, q)


def rationalize_angle(theta: float, max_denominator: int) -> Orientation:
    """Best rational orientation for angle theta = arctan(Fx/Fy).

    Rationalization is always explicit: callers choose the denominator
    bound; angle-specified fields are never snapped silently.
    """
    tilde = frame_convert(math.tan(theta))
    if math.isinf(tilde):
        return Orientation(1, 0)
    frac = Fraction(tilde).limit_denominator(max_denominator)
    if frac == 0 and tilde != 0:
        # keep a direction even when tilde rounds to zero
        frac = Fraction(0, 1)
    return canonical_orientation(frac.numerator, frac.denominator)


@dataclass(frozen=True)
class FieldSpec:
    """Static field of magnitude F > 0 with a rational or angular direction.

    ``orientation`` is an :class:`Orientation` for rational directions and
    None for angle-specified (generically irrational) ones; ``fx``/``fy``
    always hold the true xy components.
    """

    f: float
    fx: float
    fy: float
    orientation: Orientation | None = None

    def __post_init__(self):
        if self.f <= 0:
            raise ConfigError("field magnitude must be positive")

    @classmethod
    def from_rq(cls, f: float, r: int, q: int) -> "FieldSpec":
        """Field along the canonical representative of (r, q)."""
        orient = canonical_orientation(r, q)
        ftx, fty = (f * v for v in orient.field_axis_primary())
        fxy = ftx * E1_XY + fty * E2_XY
        return cls(f=f, fx=fxy[0], fy=fxy[1], orientation=orient)

    @classmethod
    def from_beta(cls, f: float, beta: Fraction | float) -> "FieldSpec":
        """Field with slope Fx/Fy = beta; exact Fractions yield a rational
        orientation, floats are kept as-is (no silent rationalization)."""
        if isinstance(beta, Fraction):
            tilde = (1 + beta) / (1 - beta) if beta != 1 else None
            if tilde is None:
                orient = Orientation(1, 0)
            else:
                orient = canonical_orientation(tilde.numerator, tilde.denominator)
        else:
            orient = None
        b = float(beta)
        scale = f / math.hypot(b, 1.0)
        return cls(f=f, fx=b * scale, fy=scale, orientation=orient)

    @classmethod
    def from_angle(cls, f: float, theta: float) -> "FieldSpec":
        """Field at angle theta = arctan(Fx/Fy) from the y axis."""
        return cls(f=f, fx=f * math.sin(theta), fy=f * math.cos(theta))

    @property
    def beta(self) -> float:
        return math.inf if self.fy == 0 else self.fx / self.fy

    @property
    def ft(self) -> tuple[float, float]:
        """Primary-frame components (Ftx, Fty)."""
        return (
            self.fx * E1_XY[0] + self.fy * E1_XY[1],
            self.fx * E2_XY[0] + self.fy * E2_XY[1],
        )

    @property
    def is_rational(self) -> bool:
        return self.orientation is not None

    def require_rational(self) -> Orientation:
        if self.orientation is None:
            raise ConfigError("this computation needs a rational orientation")
        return self.orientation

    @property
    def df(self) -> float:
        """Ladder step d*F of the tilted problem."""
        return self.require_rational().d * self.f


def bloch_offdiag(params: LatticeParams, kx, ky):
    """Off-diagonal element h12 of the two-band Bloch Hamiltonian."""
    ph = np.exp(-1j * A_PRIM * np.asarray(kx)) + np.exp(-1j * A_PRIM * np.asarray(ky))
    ph = ph + np.exp(-1j * A_PRIM * (np.asarray(kx) + np.asarray(ky)))
    return -params.j2 - params.j1 * ph


def bloch_hamiltonian(params: LatticeParams, kx: float, ky: float) -> np.ndarray:
    """2x2 Bloch Hamiltonian at quasimomentum (kx, ky), primary frame."""
    h12 = complex(bloch_offdiag(params, kx, ky))
    return np.array(
        [[-params.delta, h12], [np.conj(h12), params.delta]], dtype=complex
    )


def bloch_bands(params: LatticeParams, kx, ky):
    """Band energies (E_minus, E_plus) = -/+ sqrt(delta^2 + |h12|^2)."""
    eps = np.sqrt(params.delta**2 + np.abs(bloch_offdiag(params, kx, ky)) ** 2)
    return -eps, eps


@dataclass(frozen=True)
class BlochGrid:
    """Band energies sampled on a uniform grid over one Brillouin zone."""

    kx: np.ndarray
    ky: np.ndarray
    e_minus: np.ndarray
    e_plus: np.ndarray


def bloch_grid(params: LatticeParams, nx: int = 64, ny: int = 64) -> BlochGrid:
    """Sample the bands on an nx * ny grid covering one zone period."""
    kx = np.linspace(-np.pi / A_PRIM, np.pi / A_PRIM, nx, endpoint=False)
    ky = np.linspace(-np.pi / A_PRIM, np.pi / A_PRIM, ny, endpoint=False)
    kxg, kyg = np.meshgrid(kx, ky, indexing="ij")
    lo, hi = bloch_bands(params, kxg, kyg)
    return BlochGrid(kx=kx, ky=ky, e_minus=lo, e_plus=hi)


def dirac_points(
    params: LatticeParams, tol_gap: float = 1e-9, seed_grid: int = 121
) -> list[tuple[float, float]]:
    """All inequivalent zone points where the two bands touch.

    Returns an empty list for gapped parameters (the gap is bounded below
    by 2*delta, so any nonzero detuning short-circuits the search).
    """
    if 2.0 * abs(params.delta) > tol_gap:
        return []

    def residual(k):
        h = bloch_offdiag(params, k[0], k[1])
        return [h.real, h.imag]

    kvals = np.linspace(-np.pi / A_PRIM, np.pi / A_PRIM, seed_grid, endpoint=False)
    kxg, kyg = np.meshgrid(kvals, kvals, indexing="ij")
    gap = np.abs(bloch_offdiag(params, kxg, kyg))
    cut = max(3.0 * gap.min(), 1e-3)
    seeds = np.column_stack([kxg[gap <= cut], kyg[gap <= cut]])

    period = 2.0 * np.pi / A_PRIM
    found: list[tuple[float, float]] = []
    for seed in seeds:
        sol = least_squares(residual, seed, xtol=1e-15, ftol=1e-15, gtol=1e-15)
        if 2.0 * np.hypot(*sol.fun) > tol_gap:
            continue
        k = (np.asarray(sol.x) + period / 2) % period - period / 2
        if not any(
            np.linalg.norm((k - np.array(p) + period / 2) % period - period / 2) < 1e-6
            for p in found
        ):
            found.append((float(k[0]), float(k[1])))
    return sorted(found)
