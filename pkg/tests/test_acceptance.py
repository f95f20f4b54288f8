"""End-to-end acceptance suite.

Each test evaluates one numbered criterion at its stated tolerance and
prints a single PASS/FAIL line (run with ``pytest -s`` to see them all
live).  The dynamical criteria take a few minutes each on one core; the
whole suite is sized for a laptop.

Criterion 13 (figure rendering) lives in the separate figures package
(``figures/tests``), which consumes only the CLI's CSV output.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from starklab import (
    LATTICE_I,
    LATTICE_II,
    FieldSpec,
    LatticeParams,
    bloch_hamiltonian,
)
from starklab.asymptotics import (
    adiabatic_bands,
    bm_band_pair,
    limiting_a,
    limiting_dispersion,
    strong_field_exponent,
    wilson_loop_phase,
)
from starklab.lattice import canonical_orientation
from starklab.landauzener import (
    band_populations,
    drive_period,
    mean_upper_population,
    population_trace,
    revival_autocorrelation,
    t_j,
)
from starklab.twolevel import branch_spinors
from starklab.wavepacket import (
    ballistic_rate,
    build_real_space,
    count_local_maxima,
    dispersion_scan,
    propagate,
    single_site_state,
)
from starklab.wsbands import (
    band_sweep,
    build_ws_chain,
    central_bands,
    central_spectrum,
    kappa_grid,
    monodromy_spectrum,
    monodromy_sweep,
    spreading_rate_a,
)

T_REF = 2.0 * math.pi


def criterion(num: int, desc: str, ok: bool, detail: str = ""):
    line = f"ACCEPTANCE {num:02d} {'PASS' if ok else 'FAIL'} - {desc}"
    if detail:
        line += f" [{detail}]"
    print(line, flush=True)
    assert ok, line


def linfit_r2(x, y):
    coef = np.polyfit(x, y, 1)
    resid = np.polyval(coef, x) - y
    r2 = 1.0 - np.sum(resid**2) / np.sum((y - np.mean(y)) ** 2)
    return float(coef[0]), float(r2)


def test_01_ladder_exactness():
    t0 = time.time()
    fs = FieldSpec.from_rq(0.4, 1, 0)
    kap = math.pi / (2.0 * fs.orientation.d)
    spec = central_spectrum(build_ws_chain, LATTICE_I, fs, kap)
    worst = 0.0
    for label in (0, 1):
        e = spec.ladder_energies(label)
        worst = max(worst, float(np.abs(np.diff(e) - fs.df).max()))
    elapsed = time.time() - t0
    ok = (
        worst <= 1e-10 * fs.df
        and abs(fs.df - 0.565685) < 5e-7
        and elapsed < 1.0
    )
    criterion(
        1, "exact ladder step dF between consecutive central rungs", ok,
        f"worst step error {worst:.2e}, dF={fs.df:.6f}, {elapsed:.2f}s",
    )


def test_02_cross_method_oracle():
    t0 = time.time()
    worst = 0.0
    for params in (LATTICE_I, LATTICE_II):
        for f in (0.4, 2.0, 10.0):
            for r, q in ((1, 0), (1, 1), (2, 1)):
                fs = FieldSpec.from_rq(f, r, q)
                kaps = kappa_grid(fs, 64)
                mono, _, _ = monodromy_sweep(params, fs, kaps, tol=1e-12)
                for i, k in enumerate(kaps):
                    pair = np.array(central_bands(params, fs, k))
                    worst = max(worst, float(np.abs(pair - mono[i]).max()))
    elapsed = time.time() - t0
    ok = worst <= 1e-8 and elapsed < 60.0
    criterion(
        2, "chain and propagator-eigenphase bands agree on 64-point grids",
        ok, f"max deviation {worst:.2e}, {elapsed:.0f}s",
    )


def test_03_band_periodicity():
    worst = 0.0
    for params in (LATTICE_I, LATTICE_II):
        for r, q in ((1, 0), (1, 1), (2, 1)):
            fs = FieldSpec.from_rq(0.4, r, q)
            n = fs.orientation.n_cells
            period = 2.0 * np.pi / (n * fs.orientation.d)
            kaps = kappa_grid(fs, 24 * n, window="full")
            pairs, _, _ = monodromy_sweep(params, fs, kaps)
            shifted, _, _ = monodromy_sweep(params, fs, kaps + period)
            worst = max(worst, float(np.abs(shifted - pairs).max()))
    ok = worst <= 1e-8
    criterion(
        3, "bands repeat with period 2pi/(N d) across the full window", ok,
        f"max shift deviation {worst:.2e}",
    )


def test_04_strong_field_exponents():
    cases = [
        (LATTICE_I, (1, 0), 2, "lattice-i (1,0)"),
        (LATTICE_I, (2, 1), 3, "lattice-i (2,1)"),
        (LATTICE_II, (1, 1), 2, "lattice-ii (1,1)"),
        (LATTICE_II, (-1, 1), 0, "lattice-ii (-1,1)"),
    ]
    details = []
    ok = True
    for params, (r, q), expected, tag in cases:
        law = strong_field_exponent(params, canonical_orientation(r, q))
        good = abs(law.slope - expected) <= 0.1
        ok &= good
        details.append(f"{tag}: slope {law.slope:.3f} vs {expected}"
                       f" {'ok' if good else 'MISMATCH'}")
    criterion(4, "strong-field bandwidth exponents", ok, "; ".join(details))


def test_05_averaging_formula_accuracy():
    orient = canonical_orientation(2, 1)
    details = []
    ok = True
    for f in (1.0, 1.5, 2.0, 3.0, 5.0, 10.0):
        fs = FieldSpec.from_rq(f, 2, 1)
        kaps = kappa_grid(fs, 48)
        num, _, _ = monodromy_sweep(LATTICE_II, fs, kaps)
        bm = bm_band_pair(LATTICE_II, orient, f, kaps)
        width = float(num[:, 1].max() - num[:, 1].min())
        err = float(np.abs(num - bm).max())
        good = err <= 0.05 * width
        ok &= good
        details.append(f"F={f:g}: {err / width:.1%}{'' if good else '!'}")
    criterion(
        5, "averaging formula tracks the numeric band to 5% of the width "
        "for F >= 1", ok, "; ".join(details),
    )


def test_06_weak_field_adiabatic():
    fs = FieldSpec.from_rq(0.05, 1, 0)
    kaps = kappa_grid(fs, 24)
    ad = adiabatic_bands(LATTICE_I, fs, kaps)
    num, _, _ = monodromy_sweep(LATTICE_I, fs, kaps)
    band_range = float(num.max() - num.min())
    rec_err = float(np.abs(ad.folded_pair() - num).max())
    _, line_avg = limiting_dispersion(LATTICE_I, fs.orientation, kaps)
    dyn_err = float(np.abs(ad.c_plus - line_avg).max() / np.abs(line_avg).max())

    # gauge stability: random per-point phases and a cyclic start shift
    from starklab.wsbands import _chain_pauli

    pauli, _ = _chain_pauli(LATTICE_I, fs, kaps)
    thetas = np.linspace(0, 2 * np.pi, 512, endpoint=False)
    avecs = np.array([pauli(t)[1] for t in thetas])
    lo, hi = branch_spinors(avecs)
    rng = np.random.default_rng(0)
    gauge_err = 0.0
    for spin in (lo, hi):
        base = wilson_loop_phase(spin)
        phases = np.exp(1j * rng.uniform(0, 2 * np.pi, spin.shape[:-1]))
        gauge_err = max(
            gauge_err,
            float(np.abs(wilson_loop_phase(spin * phases[..., None]) - base).max()),
            float(np.abs(wilson_loop_phase(np.roll(spin, 37, axis=0)) - base).max()),
        )
    ok = rec_err <= 0.02 * band_range and dyn_err <= 0.02 and gauge_err <= 1e-8
    criterion(
        6, "weak-field ladder reconstruction, line-average and Berry phases",
        ok,
        f"reconstruction {rec_err / band_range:.2%} of range, "
        f"line-average {dyn_err:.2%}, gauge drift {gauge_err:.1e}",
    )


def test_07_spreading_rate_match():
    details = []
    ok = True
    for beta, tag in ((Fraction(0, 1), "(1,1)"), (Fraction(1, 3), "(2,1)")):
        for f in (0.5, 0.8):
            fs = FieldSpec.from_beta(f, beta)
            bands = band_sweep(LATTICE_I, fs, kappa_grid(fs, 128))
            rate = spreading_rate_a(bands, f)
            lattice = build_real_space(LATTICE_I, fs, 201)
            tg = np.linspace(0.0, 50.0 * T_REF, 41)
            trace = propagate(
                lattice, single_site_state(lattice), tg,
                keep_states=False, on_boundary="stop",
            )
            fit = ballistic_rate(trace.times, trace.m2)
            dev = abs(fit.b - rate.a_mean) / rate.a_mean
            good = dev <= 0.15
            ok &= good
            note = f"@{trace.times[-1] / T_REF:.0f}T" if trace.stopped else ""
            details.append(
                f"{tag} F={f}: B={fit.b:.4f} A={rate.a_mean:.4f} "
                f"dev {dev:.1%}{note}{'' if good else '!'}"
            )
    criterion(
        7, "measured ballistic rate B matches the band functional A to 15%",
        ok, "; ".join(details),
    )


def test_08_exponential_flattening():
    vals = [limiting_a(LATTICE_I, canonical_orientation(r, 1))
            for r in range(1, 9)]
    slope, r2 = linfit_r2(np.arange(1, 9), np.log(vals))
    ok = r2 >= 0.98 and slope < 0
    criterion(
        8, "zero-field spreading rate decays exponentially with r", ok,
        f"slope {slope:.2f}, R^2 {r2:.4f}",
    )


def test_09_interband_mean_asymptotics():
    fvals = np.linspace(0.2, 1.0, 6)
    means_i = []
    means_ii = []
    for f in fvals:
        fs = FieldSpec.from_beta(f, Fraction(1, 3))
        means_i.append(mean_upper_population(LATTICE_I, fs, n_grid=48))
        means_ii.append(mean_upper_population(LATTICE_II, fs, n_grid=48))
    slope, r2 = linfit_r2(1.0 / fvals, np.log(means_i))
    ratio = max(means_ii) / min(means_ii)
    ok = r2 >= 0.95 and slope < 0 and ratio <= 2.0
    criterion(
        9, "gapped lattice: log <P+> linear in 1/F; gapless: <P+> flat", ok,
        f"lattice-i R^2 {r2:.3f} slope {slope:.2f}; lattice-ii max/min {ratio:.2f}",
    )


def test_10_rational_vs_irrational_traces():
    f = 0.5
    fs_rat = FieldSpec.from_beta(f, Fraction(1, 3))
    fs_irr = FieldSpec.from_beta(f, (math.sqrt(5.0) - 1.0) / 4.0)
    t_total = 50.0 * t_j(LATTICE_I)

    bose = population_trace(LATTICE_I, fs_rat, "bose", t_total, n_times=2048)
    revival = revival_autocorrelation(bose, drive_period(fs_rat))

    def thirds_ratio(trace):
        n = len(trace.p_plus)
        first = float(np.std(trace.p_plus[: n // 3]))
        last = float(np.std(trace.p_plus[-(n // 3):]))
        return last / first

    fermi_rat = population_trace(
        LATTICE_I, fs_rat, "fermi", t_total, n_times=1500, n_grid=64
    )
    fermi_irr = population_trace(
        LATTICE_I, fs_irr, "fermi", t_total, n_times=1500, n_grid=64
    )
    ratio_rat = thirds_ratio(fermi_rat)
    ratio_irr = thirds_ratio(fermi_irr)
    ok = revival > 0.8 and ratio_rat < 1.0 / 3.0 and ratio_irr > 2.0 / 3.0
    criterion(
        10, "condensate revival and filled-band settling statistics", ok,
        f"bose revival {revival:.2f}; fermi std ratio rational {ratio_rat:.2f}"
        f" (<0.33), irrational {ratio_irr:.2f} (>0.67)",
    )


def test_11_fractal_development():
    th_rat = math.atan(1.0 / 3.0)
    th_irr = math.atan((math.sqrt(5.0) - 1.0) / 4.0)
    grid = list(np.linspace(0.0, math.pi / 2.0, 21))
    thetas = np.array(sorted(set(np.round(grid + [th_rat, th_irr], 10))))
    checkpoints = np.array([20.0, 40.0, 80.0, 160.0])
    scan = dispersion_scan(LATTICE_I, 0.8, thetas, checkpoints, size=221)
    i_rat = int(np.argmin(np.abs(thetas - th_rat)))
    i_irr = int(np.argmin(np.abs(thetas - th_irr)))
    growth_rat = scan.sigma[i_rat, -1] / scan.sigma[i_rat, -2]
    growth_irr = scan.sigma[i_irr, -1] / scan.sigma[i_irr, -2]
    counts = [count_local_maxima(scan.sigma[:, j], prominence=0.05)
              for j in range(len(checkpoints))]
    ok = (
        growth_rat >= 1.5
        and growth_irr <= 1.1
        and all(a <= b for a, b in zip(counts, counts[1:]))
        and not scan.failures
    )
    criterion(
        11, "rational direction keeps spreading, irrational saturates, "
        "peak count grows", ok,
        f"growth rational {growth_rat:.2f}, irrational {growth_irr:.2f}, "
        f"peak counts {counts}, failures {len(scan.failures)}",
    )


def test_12_universal_invariants():
    rng = np.random.default_rng(42)
    notes = []

    herm = 0.0
    for _ in range(500):
        p = LatticeParams(*rng.uniform(0, 2, 2), rng.uniform(-1, 1))
        h = bloch_hamiltonian(p, *rng.uniform(-5, 5, 2))
        herm = max(herm, float(np.linalg.norm(h - h.conj().T)))
    for r, q in ((1, 0), (2, 1), (-1, 1)):
        fs = FieldSpec.from_rq(0.7, r, q)
        hc = build_ws_chain(LATTICE_I, fs, 0.3, 40).to_dense()
        herm = max(herm, float(np.linalg.norm(hc - hc.conj().T)))
    notes.append(f"hermiticity {herm:.1e}")

    res = monodromy_spectrum(LATTICE_I, FieldSpec.from_rq(0.4, 2, 1), 0.3)
    unit = abs(abs(np.linalg.det(res.propagator)) - 1.0)
    notes.append(f"unitarity {unit:.1e}")

    fs = FieldSpec.from_beta(0.8, Fraction(1, 3))
    lattice = build_real_space(LATTICE_I, fs, 61)
    trace = propagate(lattice, single_site_state(lattice),
                      np.linspace(0, 25, 6), keep_states=False)
    notes.append(f"norm drift {trace.norm_error.max():.1e}")
    notes.append(f"energy drift {trace.energy_drift.max():.1e}")

    psi = rng.normal(size=(200, 2)) + 1j * rng.normal(size=(200, 2))
    psi /= np.linalg.norm(psi, axis=-1, keepdims=True)
    kx, ky = rng.uniform(-2, 2, (2, 200))
    pm, pp = band_populations(LATTICE_I, psi, kx, ky)
    closure = float(np.abs(pm + pp - 1.0).max())
    notes.append(f"population closure {closure:.1e}")

    flat = LatticeParams(0.0, 0.0, 0.5)
    fsf = FieldSpec.from_rq(0.4, 1, 0)
    bands = band_sweep(flat, fsf, kappa_grid(fsf, 16))
    rate = spreading_rate_a(bands, 0.4)
    fs_live = FieldSpec.from_rq(0.4, 2, 1)
    live = spreading_rate_a(
        band_sweep(LATTICE_I, fs_live, kappa_grid(fs_live, 32)), 0.4
    )
    flat_lat = build_real_space(flat, fsf, 41)
    flat_state = np.zeros(flat_lat.n_sites, dtype=complex)
    flat_state[flat_lat.origin_index()] = 1.0
    flat_trace = propagate(flat_lat, flat_state, [0.0, 10.0], keep_states=False)
    mean_flat = mean_upper_population(flat, fsf, t_total=10.0, n_grid=8,
                                      n_times=40)
    notes.append(f"flat A {rate.a_mean:.1e}, live A {live.a_mean:.2e}")

    ok = (
        herm < 1e-14
        and unit <= 1e-11
        and trace.norm_error.max() < 1e-10
        and trace.energy_drift.max() < 1e-8
        and closure < 1e-10
        and rate.a_mean == pytest.approx(0.0, abs=1e-24)
        and live.a_mean >= 0.0
        and np.allclose(flat_trace.m2, flat_trace.m2[0], atol=1e-10)
        and mean_flat == pytest.approx(0.0, abs=1e-12)
    )
    criterion(12, "hermiticity, unitarity, closure and flat-band zeros", ok,
              "; ".join(notes))
