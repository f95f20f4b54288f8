"""Batch command-line front end: one subcommand per figure family.

Every run resolves its configuration (defaults < TOML file < flags),
writes UTF-8 CSV tables with `#`-prefixed metadata lines (12 significant
digits, so identical configs give bit-identical files), emits the resolved
config as JSON next to the data, and finishes with a run manifest listing
files, parameters and timing.  Exit codes: 0 success, 2 configuration
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import asymptotics, landauzener, parallel, wavepacket, wsbands
from .errors import ConfigError, StarklabError
from .lattice import PRESETS, FieldSpec, LatticeParams, canonical_orientation

T_BLOCH_REF = 2.0 * math.pi  # reference period T


# ---------------------------------------------------------------------------
# small parsing helpers


def parse_lattice(value: str) -> LatticeParams:
    if value in PRESETS:
        return PRESETS[value]
    try:
        j1, j2, delta = (float(x) for x in value.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad lattice spec {value!r}: use 'i', 'ii' or 'J1,J2,delta'") from exc
    return LatticeParams(j1, j2, delta)


def parse_orient(value: str):
    try:
        r, q = (int(x) for x in value.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad orientation {value!r}: use 'r,q'") from exc
    return canonical_orientation(r, q)


def parse_beta(value: str):
    if "/" in value:
        num, den = value.split("/")
        return Fraction(int(num), int(den))
    return float(value)


def parse_grid(value: str, default_n: int = 25) -> np.ndarray:
    """'a:b' or 'a:b:step' inclusive numeric grids."""
    parts = value.split(":")
    try:
        if len(parts) == 2:
            a, b = float(parts[0]), float(parts[1])
            return np.linspace(a, b, default_n)
        if len(parts) == 3:
            a, b, step = (float(x) for x in parts)
            n = int(round((b - a) / step)) + 1
            return a + step * np.arange(n)
    except ValueError:
        pass
    raise ConfigError(f"bad range {value!r}: use 'a:b' or 'a:b:step'")


def fieldspec_from_config(cfg: dict) -> FieldSpec:
    f = float(cfg["f"])
    if cfg.get("orient"):
        o = parse_orient(cfg["orient"])
        return FieldSpec.from_rq(f, o.r, o.q)
    if cfg.get("beta") is not None:
        return FieldSpec.from_beta(f, parse_beta(str(cfg["beta"])))
    if cfg.get("theta") is not None:
        return FieldSpec.from_angle(f, float(cfg["theta"]))
    raise ConfigError("field direction missing: give --orient, --beta or --theta")


# ---------------------------------------------------------------------------
# output machinery


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


class RunWriter:
    """Collects CSV tables plus the manifest of one CLI run."""

    def __init__(self, out_dir: Path, command: str, config: dict):
        self.out_dir = out_dir
        self.command = command
        self.config = config
        blob = json.dumps(config, sort_keys=True, default=str)
        self.config_hash = hashlib.sha256(blob.encode()).hexdigest()[:16]
        self.files: list[dict] = []
        self.t0 = time.time()
        out_dir.mkdir(parents=True, exist_ok=True)

    def write_csv(self, name: str, columns, rows, meta: dict | None = None):
        path = self.out_dir / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"# command = {self.command}\n")
            fh.write(f"# config_hash = {self.config_hash}\n")
            for key, val in (meta or {}).items():
                fh.write(f"# {key} = {val}\n")
            fh.write(",".join(columns) + "\n")
            count = 0
            for row in rows:
                fh.write(",".join(fmt(x) for x in row) + "\n")
                count += 1
        self.files.append({"name": name, "rows": count})
        return path

    def finish(self) -> None:
        resolved = self.out_dir / f"{self.command.replace('-', '_')}_config.json"
        with open(resolved, "w", encoding="utf-8") as fh:
            json.dump(self.config, fh, indent=2, sort_keys=True, default=str)
        manifest = {
            "command": self.command,
            "config": self.config,
            "config_hash": self.config_hash,
            "files": self.files,
            "elapsed_seconds": round(time.time() - self.t0, 3),
        }
        with open(self.out_dir / "run_manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=str)


# ---------------------------------------------------------------------------
# subcommand implementations


def cmd_bloch(cfg, writer):
    params = parse_lattice(cfg["lattice"])
    from .lattice import bloch_grid

    grid = bloch_grid(params, int(cfg["nx"]), int(cfg["ny"]))
    rows = []
    for i, kx in enumerate(grid.kx):
        for j, ky in enumerate(grid.ky):
            rows.append((kx, ky, grid.e_minus[i, j], grid.e_plus[i, j]))
    writer.write_csv(
        "bloch.csv", ["kx", "ky", "e_minus", "e_plus"], rows,
        {"lattice": cfg["lattice"]},
    )


def cmd_ws_bands(cfg, writer):
    params = parse_lattice(cfg["lattice"])
    fs = fieldspec_from_config(cfg)
    kaps = wsbands.kappa_grid(fs, int(cfg["nk"]), cfg["window"])
    lo, hi = wsbands.band_sweep(
        params, fs, kaps, method=cfg["method"], workers=int(cfg["workers"])
    )
    rows = [
        (k, lo.e[i], hi.e[i], lo.v[i], hi.v[i],
         bool(lo.crossing_flags[i]), bool(hi.crossing_flags[i]))
        for i, k in enumerate(kaps)
    ]
    writer.write_csv(
        "ws_bands.csv",
        ["kappa", "e_minus", "e_plus", "v_minus", "v_plus",
         "flag_minus", "flag_plus"],
        rows,
        {"df": fmt(fs.df), "method": cfg["method"],
         "orient": f"{fs.orientation.r},{fs.orientation.q}"},
    )


def cmd_ws_fan(cfg, writer):
    params = parse_lattice(cfg["lattice"])
    orient = parse_orient(cfg["orient"])
    fvals = parse_grid(cfg["f_range"])
    fan = wsbands.ws_fan(
        params, orient, float(cfg["kappa_frac"]), fvals,
        window=float(cfg["window"]) if cfg.get("window") else None,
        workers=int(cfg["workers"]),
    )
    rows = []
    for f, levels in zip(fan.f_values, fan.levels):
        for idx, e in enumerate(levels):
            rows.append((f, idx, e))
    writer.write_csv(
        "ws_fan.csv", ["f", "level_index", "energy"], rows,
        {"kappa_frac": fmt(cfg["kappa_frac"]), "window": fmt(fan.window)},
    )


def cmd_rate_scan(cfg, writer):
    params = parse_lattice(cfg["lattice"])
    orient = parse_orient(cfg["orient"])
    inv_f = parse_grid(cfg["invf_range"])
    rows = []
    for invf in inv_f:
        f = 1.0 / invf
        fs = FieldSpec.from_rq(f, orient.r, orient.q)
        bands = wsbands.band_sweep(
            params, fs, wsbands.kappa_grid(fs, int(cfg["nk"])),
            method="monodromy", workers=int(cfg["workers"]),
        )
        rate = wsbands.spreading_rate_a(bands, f)
        rows.append((f, invf, rate.a_minus, rate.a_plus, rate.a_mean))
    writer.write_csv(
        "rate_scan.csv", ["f", "inv_f", "a_minus", "a_plus", "a_mean"], rows,
        {"note": "a_minus/a_plus per ladder; a_mean is their average"},
    )


def cmd_asymptotics(cfg, writer):
    params = parse_lattice(cfg["lattice"])
    mode = cfg["mode"]
    if mode == "nu":
        orient = parse_orient(cfg["orient"])
        law = asymptotics.strong_field_exponent(
            params, orient, float(cfg["f_lo"]), float(cfg["f_hi"])
        )
        fvals = np.geomspace(float(cfg["f_lo"]), float(cfg["f_hi"]), 8)
        rows = []
        for f in fvals:
            fs = FieldSpec.from_rq(f, orient.r, orient.q)
            lo, hi = wsbands.band_sweep(
                params, fs, wsbands.kappa_grid(fs, 48), method="monodromy"
            )
            rows.append((f, 0.5 * (lo.bandwidth + hi.bandwidth)))
        writer.write_csv(
            "asym_nu.csv", ["f", "delta"], rows,
            {"nu": law.nu, "slope": fmt(law.slope),
             "residual": fmt(law.residual), "flagged": int(law.flagged)},
        )
    elif mode == "bm":
        orient = parse_orient(cfg["orient"])
        f = float(cfg["f"])
        fs = FieldSpec.from_rq(f, orient.r, orient.q)
        kaps = wsbands.kappa_grid(fs, int(cfg["nk"]))
        num, _, _ = wsbands.monodromy_sweep(params, fs, kaps)
        bm = asymptotics.bm_band_pair(params, orient, f, kaps)
        rows = [
            (k, num[i, 0], num[i, 1], bm[i, 0], bm[i, 1])
            for i, k in enumerate(kaps)
        ]
        writer.write_csv(
            "asym_bm.csv",
            ["kappa", "e_minus_num", "e_plus_num", "e_minus_bm", "e_plus_bm"],
            rows, {"f": fmt(f)},
        )
    elif mode == "adiabatic":
        fs = fieldspec_from_config(cfg)
        kaps = wsbands.kappa_grid(fs, int(cfg["nk"]))
        ad = asymptotics.adiabatic_bands(params, fs, kaps)
        num, _, _ = wsbands.monodromy_sweep(params, fs, kaps)
        rec = ad.folded_pair()
        rows = [
            (k, ad.c_minus[i], ad.c_plus[i], ad.gamma_minus[i], ad.gamma_plus[i],
             rec[i, 0], rec[i, 1], num[i, 0], num[i, 1])
            for i, k in enumerate(kaps)
        ]
        writer.write_csv(
            "asym_adiabatic.csv",
            ["kappa", "c_minus", "c_plus", "gamma_minus", "gamma_plus",
             "e_minus_rec", "e_plus_rec", "e_minus_num", "e_plus_num"],
            rows, {"min_theta_gap": fmt(ad.min_theta_gap)},
        )
    elif mode == "limiting":
        rows = []
        for spec in cfg["orients"].split(";"):
            orient = parse_orient(spec)
            period = 2 * np.pi / (orient.n_cells * orient.d)
            kaps = np.linspace(0, period, int(cfg["nk"]), endpoint=False)
            lo, hi = asymptotics.limiting_dispersion(params, orient, kaps)
            for i, k in enumerate(kaps):
                rows.append((orient.r, orient.q, k / period, lo[i], hi[i]))
        writer.write_csv(
            "asym_limiting_dispersion.csv",
            ["r", "q", "kappa_frac", "e_minus", "e_plus"], rows,
        )
        rows = []
        for q in (1, 2, 3):
            for r in range(1, int(cfg["r_max"]) + 1):
                if math.gcd(r, q) != 1:
                    continue
                orient = canonical_orientation(r, q)
                rows.append((r, q, asymptotics.limiting_a(params, orient)))
        writer.write_csv("asym_limiting_rate.csv", ["r", "q", "a_limit"], rows)
    else:
        raise ConfigError(f"unknown asymptotics mode {mode!r}")


def cmd_wavepacket(cfg, writer):
    params = parse_lattice(cfg["lattice"])
    size = int(cfg["size"])
    if cfg["mode"] == "trace":
        fs = fieldspec_from_config(cfg)
        lattice = wavepacket.build_real_space(params, fs, size)
        psi0 = wavepacket.single_site_state(lattice)
        t_max = float(cfg["t_max"]) * T_BLOCH_REF
        tg = np.linspace(0.0, t_max, int(cfg["n_out"]))
        trace = wavepacket.propagate(lattice, psi0, tg, on_boundary="stop")
        rows = [
            (t, trace.m2[i], trace.sigma[i], trace.norm_error[i],
             trace.energy_drift[i])
            for i, t in enumerate(trace.times)
        ]
        meta = {"size": size, "beta": fmt(fs.beta), "stopped": trace.stopped or ""}
        writer.write_csv(
            "wavepacket_trace.csv",
            ["t", "m2", "sigma", "norm_error", "energy_drift"], rows, meta,
        )
        psi = trace.states[-1].psi
        prob = np.abs(psi) ** 2
        keep = prob > 1e-12
        rows = list(zip(lattice.x[keep], lattice.y[keep], prob[keep]))
        writer.write_csv(
            "wavepacket_snapshot.csv", ["x", "y", "prob"], rows,
            {"t": fmt(trace.times[-1])},
        )
    elif cfg["mode"] == "rate-compare":
        orient = parse_orient(cfg["orient"])
        fvals = parse_grid(cfg["f_range"], default_n=4)
        t_max = float(cfg["t_max"]) * T_BLOCH_REF
        rows = []
        for f in fvals:
            fs = FieldSpec.from_rq(f, orient.r, orient.q)
            bands = wsbands.band_sweep(
                params, fs, wsbands.kappa_grid(fs, 128),
                workers=int(cfg["workers"]),
            )
            rate = wsbands.spreading_rate_a(bands, f)
            lattice = wavepacket.build_real_space(params, fs, size)
            tg = np.linspace(0.0, t_max, int(cfg["n_out"]))
            trace = wavepacket.propagate(
                lattice, wavepacket.single_site_state(lattice), tg,
                keep_states=False, on_boundary="stop",
            )
            fit = wavepacket.ballistic_rate(trace.times, trace.m2)
            rows.append(
                (f, fit.b, rate.a_minus, rate.a_plus, rate.a_mean,
                 abs(fit.b - rate.a_mean) / rate.a_mean, fit.flagged)
            )
        writer.write_csv(
            "wavepacket_rates.csv",
            ["f", "b", "a_minus", "a_plus", "a_mean", "rel_dev", "flagged"],
            rows, {"size": size, "t_max_T": fmt(cfg["t_max"])},
        )
    else:
        raise ConfigError(f"unknown wavepacket mode {cfg['mode']!r}")


def cmd_fractal_scan(cfg, writer):
    params = parse_lattice(cfg["lattice"])
    thetas = parse_grid(cfg["theta_range"], default_n=int(cfg["n_theta"]))
    t0 = float(cfg["t0"])
    checkpoints = t0 * 2.0 ** np.arange(int(cfg["n_checkpoints"]))
    scan = wavepacket.dispersion_scan(
        params, float(cfg["f"]), thetas, checkpoints,
        size=int(cfg["size"]), workers=int(cfg["workers"]),
    )
    rows = []
    for i, th in enumerate(scan.thetas):
        for j, t in enumerate(scan.checkpoints):
            rows.append((th, t, scan.sigma[i, j]))
    writer.write_csv(
        "fractal_scan.csv", ["theta", "t", "sigma"], rows,
        {"f": fmt(cfg["f"]), "failures": len(scan.failures)},
    )


def cmd_lz_map(cfg, writer):
    params = parse_lattice(cfg["lattice"])
    fs = fieldspec_from_config(cfg)
    tj = landauzener.t_j(params)
    snaps = [float(x) * tj for x in str(cfg["snapshots"]).split(",")]
    kx, ky, p = landauzener.bz_population_map(
        params, fs, snaps, n_grid=int(cfg["n_grid"])
    )
    times = [0.0] + snaps if snaps[0] != 0.0 else snaps
    rows = []
    for it, t in enumerate(times):
        for i in range(len(kx)):
            for j in range(len(ky)):
                rows.append((kx[i], ky[j], t / tj, p[it, i, j]))
    writer.write_csv(
        "lz_map.csv", ["kx", "ky", "t_over_tj", "p_plus"], rows,
        {"n_grid": cfg["n_grid"]},
    )


def cmd_lz_mean(cfg, writer):
    params = parse_lattice(cfg["lattice"])
    inv_f = parse_grid(cfg["invf_range"], default_n=6)
    beta = parse_beta(str(cfg["beta"]))
    t_total = float(cfg["t_total"]) * landauzener.t_j(params)
    rows = []
    for invf in inv_f:
        fs = FieldSpec.from_beta(1.0 / invf, beta)
        mean = landauzener.mean_upper_population(
            params, fs, t_total, n_grid=int(cfg["n_grid"])
        )
        rows.append((1.0 / invf, invf, mean))
    writer.write_csv(
        "lz_mean.csv", ["f", "inv_f", "p_plus_mean"], rows,
        {"t_total_tj": fmt(cfg["t_total"]), "beta": str(cfg["beta"])},
    )


def cmd_lz_trace(cfg, writer):
    params = parse_lattice(cfg["lattice"])
    fs = fieldspec_from_config(cfg)
    t_total = float(cfg["t_total"]) * landauzener.t_j(params)
    trace = landauzener.population_trace(
        params, fs, cfg["initial"], t_total,
        n_times=int(cfg["n_times"]), n_grid=int(cfg["n_grid"]),
    )
    rows = [
        (t / landauzener.t_j(params), trace.p_plus[i], trace.p_minus[i])
        for i, t in enumerate(trace.times)
    ]
    writer.write_csv(
        "lz_trace.csv", ["t_over_tj", "p_plus", "p_minus"], rows,
        {"initial": trace.initial, "beta": fmt(trace.beta),
         "rational": int(trace.rational)},
    )


COMMANDS = {
    "bloch": cmd_bloch,
    "ws-bands": cmd_ws_bands,
    "ws-fan": cmd_ws_fan,
    "rate-scan": cmd_rate_scan,
    "asymptotics": cmd_asymptotics,
    "wavepacket": cmd_wavepacket,
    "fractal-scan": cmd_fractal_scan,
    "lz-map": cmd_lz_map,
    "lz-mean": cmd_lz_mean,
    "lz-trace": cmd_lz_trace,
}


# ---------------------------------------------------------------------------
# argument plumbing


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="starklab",
        description="Wannier-Stark bands and dynamics in a tilted "
        "two-sublattice lattice",
    )
    sub = top.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML file with defaults for this run")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--lattice", default="i", help="'i', 'ii' or 'J1,J2,delta'")

    def field_args(p):
        p.add_argument("--F", dest="f", type=float, default=0.4)
        p.add_argument("--orient", help="rational direction 'r,q'")
        p.add_argument("--beta", help="Fx/Fy, e.g. '1/3' (exact) or 0.31")
        p.add_argument("--theta", type=float, help="angle arctan(Fx/Fy)")

    p = sub.add_parser("bloch", help="Bloch band surfaces")
    common(p)
    p.add_argument("--nx", type=int, default=64)
    p.add_argument("--ny", type=int, default=64)

    p = sub.add_parser("ws-bands", help="WS band ladder at fixed F")
    common(p)
    field_args(p)
    p.add_argument("--nk", type=int, default=256)
    p.add_argument("--window", choices=["period", "full"], default="period")
    p.add_argument("--method", choices=["chain", "monodromy"], default="chain")

    p = sub.add_parser("ws-fan", help="levels versus F at fixed kappa")
    common(p)
    p.add_argument("--orient", required=True)
    p.add_argument("--kappa-frac", dest="kappa_frac", type=float, default=0.25)
    p.add_argument("--F-range", dest="f_range", default="0.2:1:0.01")
    p.add_argument("--window", type=float)

    p = sub.add_parser("rate-scan", help="spreading-rate functional vs 1/F")
    common(p)
    p.add_argument("--orient", required=True)
    p.add_argument("--invF-range", dest="invf_range", default="0.5:10:0.25")
    p.add_argument("--nk", type=int, default=128)

    p = sub.add_parser("asymptotics", help="strong/moderate/weak field laws")
    common(p)
    field_args(p)
    p.add_argument("--mode", choices=["nu", "bm", "adiabatic", "limiting"],
                   required=True)
    p.add_argument("--f-lo", dest="f_lo", type=float, default=10.0)
    p.add_argument("--f-hi", dest="f_hi", type=float, default=100.0)
    p.add_argument("--nk", type=int, default=64)
    p.add_argument("--orients", default="1,0;1,1;2,1")
    p.add_argument("--r-max", dest="r_max", type=int, default=8)

    p = sub.add_parser("wavepacket", help="real-space spreading runs")
    common(p)
    field_args(p)
    p.add_argument("--mode", choices=["trace", "rate-compare"], default="trace")
    p.add_argument("--size", type=int, default=201)
    p.add_argument("--t-max", dest="t_max", type=float, default=50.0,
                   help="horizon in units of T = 2pi")
    p.add_argument("--n-out", dest="n_out", type=int, default=41)
    p.add_argument("--F-range", dest="f_range", default="0.5:0.8:0.3")

    p = sub.add_parser("fractal-scan", help="sigma(theta, t) scan")
    common(p)
    p.add_argument("--F", dest="f", type=float, default=0.8)
    p.add_argument("--theta-range", dest="theta_range", default="0:1.5707963")
    p.add_argument("--n-theta", dest="n_theta", type=int, default=25)
    p.add_argument("--t0", type=float, default=20.0)
    p.add_argument("--n-checkpoints", dest="n_checkpoints", type=int, default=4)
    p.add_argument("--size", type=int, default=201)

    p = sub.add_parser("lz-map", help="upper-band population over the zone")
    common(p)
    field_args(p)
    p.add_argument("--snapshots", default="0.5,1,2,4",
                   help="comma list in units of T_J")
    p.add_argument("--n-grid", dest="n_grid", type=int, default=128)

    p = sub.add_parser("lz-mean", help="time-averaged upper population vs 1/F")
    common(p)
    p.add_argument("--beta", default="1/3")
    p.add_argument("--invF-range", dest="invf_range", default="1:5")
    p.add_argument("--n-grid", dest="n_grid", type=int, default=64)
    p.add_argument("--t-total", dest="t_total", type=float, default=50.0,
                   help="averaging window in units of T_J")

    p = sub.add_parser("lz-trace", help="band-population traces")
    common(p)
    field_args(p)
    p.add_argument("--initial", choices=["bose", "fermi"], default="bose")
    p.add_argument("--t-total", dest="t_total", type=float, default=50.0)
    p.add_argument("--n-times", dest="n_times", type=int, default=1024)
    p.add_argument("--n-grid", dest="n_grid", type=int, default=64)

    return top


def resolve_config(args: argparse.Namespace, argv: list[str]) -> dict:
    """defaults < TOML file < explicitly passed flags."""
    cfg = {k: v for k, v in vars(args).items() if k not in ("config",)}
    if args.config:
        try:
            with open(args.config, "rb") as fh:
                file_cfg = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {args.config}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"bad TOML in {args.config}: {exc}") from exc
        passed = _explicit_flags(argv)
        for key, val in file_cfg.items():
            key = key.replace("-", "_")
            if key not in cfg:
                raise ConfigError(f"unknown config key {key!r}")
            if key not in passed:
                cfg[key] = val
    return cfg


def _explicit_flags(argv: list[str]) -> set[str]:
    names = set()
    for tok in argv:
        if tok.startswith("--"):
            names.add(tok[2:].split("=")[0].replace("-", "_"))
    return names


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        cfg = resolve_config(args, argv)
        parallel.set_default_workers(int(cfg.get("workers", 1)))
        writer = RunWriter(Path(cfg.pop("out")), args.command, cfg)
        COMMANDS[args.command](cfg, writer)
        writer.finish()
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except StarklabError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
