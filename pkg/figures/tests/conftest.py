"""Build one shared directory of real CLI outputs for the render tests."""

import shutil
import subprocess
import sys
from pathlib import Path

import pytest

PRIMARY = [sys.executable, "-m", "starklab"]


def run_primary(args, out_dir):
    res = subprocess.run(
        PRIMARY + args + ["--out", str(out_dir)],
        capture_output=True, text=True,
    )
    assert res.returncode == 0, f"{args}: {res.stderr}"


@pytest.fixture(scope="session")
def input_dir(tmp_path_factory) -> Path:
    """Small but genuine outputs for every figure recipe."""
    root = tmp_path_factory.mktemp("inputs")
    final = root / "all"
    final.mkdir()

    def collect(src_dir, renames):
        for src, dst in renames.items():
            shutil.copy(src_dir / src, final / dst)

    for tag, lattice in (("i", "i"), ("ii", "ii")):
        d = root / f"bloch_{tag}"
        run_primary(["bloch", "--lattice", lattice, "--nx", "12", "--ny", "12"], d)
        collect(d, {"bloch.csv": f"bloch_{tag}.csv"})

        d = root / f"wsb_{tag}"
        run_primary(
            ["ws-bands", "--lattice", lattice, "--F", "0.4", "--orient", "1,0",
             "--nk", "16"], d)
        collect(d, {"ws_bands.csv": f"ws_bands_{tag}.csv"})

        d = root / f"fan_{tag}"
        run_primary(
            ["ws-fan", "--lattice", lattice, "--orient", "1,0",
             "--kappa-frac", "0.25", "--F-range", "0.3:0.5:0.1"], d)
        collect(d, {"ws_fan.csv": f"ws_fan_{tag}.csv"})

        d = root / f"rate_{tag}"
        run_primary(
            ["rate-scan", "--lattice", lattice, "--orient", "2,1",
             "--invF-range", "1:3:1", "--nk", "16"], d)
        collect(d, {"rate_scan.csv": f"rate_scan_{tag}.csv"})

        d = root / f"lzmean_{tag}"
        run_primary(
            ["lz-mean", "--lattice", lattice, "--beta", "1/3",
             "--invF-range", "1:2:1", "--n-grid", "8", "--t-total", "4"], d)
        collect(d, {"lz_mean.csv": f"lz_mean_{tag}.csv"})

    d = root / "limiting"
    run_primary(
        ["asymptotics", "--mode", "limiting", "--lattice", "i",
         "--r-max", "3", "--nk", "16"], d)
    collect(d, {"asym_limiting_dispersion.csv": "asym_limiting_dispersion.csv",
                "asym_limiting_rate.csv": "asym_limiting_rate.csv"})

    d = root / "lzmap"
    run_primary(
        ["lz-map", "--lattice", "ii", "--F", "0.2", "--beta", "1/3",
         "--snapshots", "0.5,1", "--n-grid", "12"], d)
    collect(d, {"lz_map.csv": "lz_map.csv"})

    d = root / "wp"
    run_primary(
        ["wavepacket", "--mode", "trace", "--lattice", "i", "--F", "0.8",
         "--beta", "1/3", "--size", "41", "--t-max", "2", "--n-out", "9"], d)
    collect(d, {"wavepacket_trace.csv": "wavepacket_trace.csv",
                "wavepacket_snapshot.csv": "wavepacket_snapshot.csv"})

    d = root / "wprates"
    run_primary(
        ["wavepacket", "--mode", "rate-compare", "--lattice", "i",
         "--orient", "1,1", "--size", "41", "--t-max", "3", "--n-out", "17",
         "--F-range", "0.5:0.8:0.3"], d)
    collect(d, {"wavepacket_rates.csv": "wavepacket_rates.csv"})

    d = root / "fractal"
    run_primary(
        ["fractal-scan", "--lattice", "i", "--F", "0.8",
         "--theta-range", "0.1:1.4", "--n-theta", "5", "--t0", "4",
         "--n-checkpoints", "3", "--size", "41"], d)
    collect(d, {"fractal_scan.csv": "fractal_scan.csv"})

    for init in ("bose", "fermi"):
        for tag, beta in (("rational", "1/3"), ("irrational", "0.30901699")):
            d = root / f"lzt_{init}_{tag}"
            run_primary(
                ["lz-trace", "--lattice", "i", "--F", "0.5", "--beta", beta,
                 "--initial", init, "--t-total", "4", "--n-times", "64",
                 "--n-grid", "8"], d)
            collect(d, {"lz_trace.csv": f"lz_trace_{init}_{tag}.csv"})

    return final
