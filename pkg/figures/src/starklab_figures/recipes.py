"""Figure recipes: which CSVs feed each panel and how it is drawn.

Each recipe lists its required input files (produced by the starklab CLI
and placed in one input directory) and the columns it consumes; rendering
is read-only and deterministic.  Output is a static PNG or SVG.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from matplotlib.figure import Figure

from .io import InputError, Table, read_table


@dataclass(frozen=True)
class FigureRecipe:
    figure_id: str
    inputs: dict                      # logical name -> filename
    columns: dict                     # logical name -> required columns
    builder: Callable
    notes: str = ""


def _load(recipe: FigureRecipe, input_dir: Path) -> dict:
    tables = {}
    for key, fname in recipe.inputs.items():
        table = read_table(Path(input_dir) / fname)
        table.require(*recipe.columns.get(key, ()))
        tables[key] = table
    return tables


# ---------------------------------------------------------------------------
# builders


def _grid(tab: Table, zcol: str):
    kx = np.unique(tab["kx"])
    ky = np.unique(tab["ky"])
    z = tab[zcol].reshape(len(kx), len(ky))
    return kx, ky, z


def build_fig2(tables) -> Figure:
    """Bloch band surfaces for the gapped and gapless presets."""
    fig = Figure(figsize=(9, 4))
    for i, key in enumerate(("lattice_i", "lattice_ii")):
        ax = fig.add_subplot(1, 2, i + 1, projection="3d")
        tab = tables[key]
        kx, ky, lo = _grid(tab, "e_minus")
        _, _, hi = _grid(tab, "e_plus")
        kxg, kyg = np.meshgrid(kx, ky, indexing="ij")
        ax.plot_surface(kxg, kyg, lo, cmap="viridis", linewidth=0)
        ax.plot_surface(kxg, kyg, hi, cmap="plasma", linewidth=0)
        ax.set_xlabel(r"$\kappa_x$")
        ax.set_ylabel(r"$\kappa_y$")
        ax.set_title(f"lattice ({'i' * (i + 1)})")
    return fig


def _plot_ladder(ax, tab: Table, n_rungs: int = 3):
    df = float(tab.meta["df"])
    kap = tab["kappa"]
    for n in range(-n_rungs, n_rungs + 1):
        ax.plot(kap, tab["e_minus"] + n * df, color="C0", lw=1)
        ax.plot(kap, tab["e_plus"] + n * df, color="C3", lw=1)
    ax.set_xlabel(r"$\kappa$")
    ax.set_ylabel("E")


def build_fig3(tables) -> Figure:
    """Ladders of WS energy bands, one panel per preset."""
    fig = Figure(figsize=(9, 4))
    for i, key in enumerate(("lattice_i", "lattice_ii")):
        ax = fig.add_subplot(1, 2, i + 1)
        _plot_ladder(ax, tables[key])
        ax.set_title(f"lattice ({'i' * (i + 1)})")
    fig.tight_layout()
    return fig


def build_fig4(tables) -> Figure:
    """WS fan: raw central levels versus F."""
    fig = Figure(figsize=(9, 4))
    for i, key in enumerate(("lattice_i", "lattice_ii")):
        ax = fig.add_subplot(1, 2, i + 1)
        tab = tables[key]
        ax.plot(tab["f"], tab["energy"], ".", ms=1.5, color="k")
        ax.set_xlabel("F")
        ax.set_ylabel("E")
        ax.set_title(f"lattice ({'i' * (i + 1)})")
    fig.tight_layout()
    return fig


def build_fig5(tables) -> Figure:
    """Spreading-rate functional versus 1/F, with a log-scale inset."""
    fig = Figure(figsize=(7, 5))
    ax = fig.add_subplot(1, 1, 1)
    styles = {"lattice_i": "--", "lattice_ii": "-"}
    for key, ls in styles.items():
        tab = tables[key]
        ax.plot(tab["inv_f"], tab["a_mean"], ls, label=key.replace("_", " "))
    ax.set_xlabel("1/F")
    ax.set_ylabel("A")
    ax.legend()
    inset = ax.inset_axes([0.55, 0.55, 0.42, 0.4])
    for key, ls in styles.items():
        tab = tables[key]
        inset.semilogy(tab["inv_f"], tab["a_mean"], ls)
    inset.set_xlabel("1/F", fontsize=8)
    return fig


def build_fig6(tables) -> Figure:
    """Zero-field band envelopes and their exponential flattening."""
    fig = Figure(figsize=(9, 4))
    ax = fig.add_subplot(1, 2, 1)
    disp = tables["dispersion"]
    pairs = sorted(set(zip(disp["r"].astype(int), disp["q"].astype(int))))
    styles = ["-.", "--", "-", ":"]
    for (r, q), ls in zip(pairs, styles):
        sel = (disp["r"] == r) & (disp["q"] == q)
        ax.plot(disp["kappa_frac"][sel], disp["e_plus"][sel], ls,
                label=f"({r},{q})")
    ax.set_xlabel(r"$\kappa d N / 2\pi$")
    ax.set_ylabel("E")
    ax.legend()
    ax2 = fig.add_subplot(1, 2, 2)
    rate = tables["rate"]
    markers = {1: "*", 2: "o", 3: "+"}
    for q, m in markers.items():
        sel = rate["q"] == q
        if sel.any():
            ax2.semilogy(rate["r"][sel], rate["a_limit"][sel], m, label=f"q={q}")
    ax2.set_xlabel("r")
    ax2.set_ylabel("A limit")
    ax2.legend()
    fig.tight_layout()
    return fig


def build_fig7(tables) -> Figure:
    """Snapshots of the upper-band population over the zone."""
    tab = tables["map"]
    times = np.unique(tab["t_over_tj"])
    fig = Figure(figsize=(3.2 * len(times), 3.2))
    for i, t in enumerate(times):
        ax = fig.add_subplot(1, len(times), i + 1)
        sel = tab["t_over_tj"] == t
        kx = np.unique(tab["kx"][sel])
        ky = np.unique(tab["ky"][sel])
        z = tab["p_plus"][sel].reshape(len(kx), len(ky))
        ax.imshow(z.T, origin="lower", vmin=0, vmax=1,
                  extent=[kx[0], kx[-1], ky[0], ky[-1]], cmap="inferno")
        ax.set_title(f"t = {t:g} $T_J$", fontsize=9)
    fig.tight_layout()
    return fig


def build_fig8(tables) -> Figure:
    """Packet dispersion trace plus the final site-population map."""
    fig = Figure(figsize=(6, 7))
    ax = fig.add_subplot(2, 1, 1)
    tr = tables["trace"]
    ax.plot(tr["t"], tr["sigma"], "-")
    ax.set_xlabel("t")
    ax.set_ylabel(r"$\sqrt{M_2}$")
    ax2 = fig.add_subplot(2, 1, 2)
    snap = tables["snapshot"]
    ax2.scatter(snap["x"], snap["y"], c=np.log10(snap["prob"]), s=2,
                cmap="magma")
    ax2.set_aspect("equal")
    ax2.set_xlabel("x")
    ax2.set_ylabel("y")
    fig.tight_layout()
    return fig


def build_fig9(tables) -> Figure:
    """Measured ballistic rates against the band-theory estimate."""
    fig = Figure(figsize=(6, 4.5))
    ax = fig.add_subplot(1, 1, 1)
    markers = ["o", "*", "s", "d"]
    for i, (key, tab) in enumerate(sorted(tables.items())):
        inv_f = 1.0 / tab["f"]
        order = np.argsort(inv_f)
        label = key.replace("_", " ")
        ax.plot(inv_f[order], tab["a_mean"][order], "-", color=f"C{i}")
        ax.plot(inv_f[order], tab["b"][order], markers[i % 4], color=f"C{i}",
                mfc="none", label=label)
    ax.set_xlabel("1/F")
    ax.set_ylabel("rate")
    ax.legend()
    return fig


def build_fig10(tables) -> Figure:
    """Dispersion versus time for a set of field orientations."""
    fig = Figure(figsize=(7, 5))
    ax = fig.add_subplot(1, 1, 1)
    tab = tables["scan"]
    for th in np.unique(tab["theta"]):
        sel = tab["theta"] == th
        ax.plot(tab["t"][sel], tab["sigma"][sel], "-o", ms=3,
                label=f"$\\theta$ = {th:.3f}")
    ax.set_xlabel("t")
    ax.set_ylabel(r"$\sigma$")
    if len(np.unique(tab["theta"])) <= 8:
        ax.legend(fontsize=8)
    return fig


def build_fig11(tables) -> Figure:
    """Stacked sigma(theta) panels at geometrically spaced times."""
    tab = tables["scan"]
    times = np.unique(tab["t"])
    fig = Figure(figsize=(6, 2.1 * len(times)))
    for i, t in enumerate(sorted(times)):
        ax = fig.add_subplot(len(times), 1, i + 1)
        sel = tab["t"] == t
        th = tab["theta"][sel]
        order = np.argsort(th)
        ax.plot(th[order], tab["sigma"][sel][order], "-o", ms=3)
        ax.set_ylabel(rf"$\sigma(t={t:g})$", fontsize=9)
    ax.set_xlabel(r"$\theta$")
    fig.tight_layout()
    return fig


def build_fig17(tables) -> Figure:
    """Time-averaged upper-band population versus 1/F (log main panel,
    linear inset)."""
    fig = Figure(figsize=(6.5, 5))
    ax = fig.add_subplot(1, 1, 1)
    styles = {"lattice_i": "-", "lattice_ii": "--"}
    for key, ls in styles.items():
        tab = tables[key]
        ax.semilogy(tab["inv_f"], tab["p_plus_mean"], ls,
                    label=key.replace("_", " "))
    ax.set_xlabel("1/F")
    ax.set_ylabel(r"$\langle P_+ \rangle$")
    ax.legend()
    inset = ax.inset_axes([0.55, 0.15, 0.4, 0.35])
    for key, ls in styles.items():
        tab = tables[key]
        inset.plot(tab["inv_f"], tab["p_plus_mean"], ls)
    return fig


def build_fig18(tables) -> Figure:
    """Population traces: rational versus irrational orientation, each
    with condensate (solid) and filled-band (dashed) initial states."""
    fig = Figure(figsize=(6.5, 6))
    panels = [("bose_rational", "fermi_rational"), ("bose_irrational", "fermi_irrational")]
    for i, (bose_key, fermi_key) in enumerate(panels):
        ax = fig.add_subplot(2, 1, i + 1)
        bose = tables[bose_key]
        fermi = tables[fermi_key]
        ax.plot(bose["t_over_tj"], bose["p_plus"], "-", lw=0.8, label="bose")
        ax.plot(fermi["t_over_tj"], fermi["p_plus"], "--", lw=1.2, label="fermi")
        ax.set_ylabel(r"$P_+$")
        ax.legend(fontsize=8)
    ax.set_xlabel(r"$t/T_J$")
    fig.tight_layout()
    return fig


# ---------------------------------------------------------------------------
# registry


RECIPES = {
    "fig2": FigureRecipe(
        "fig2",
        {"lattice_i": "bloch_i.csv", "lattice_ii": "bloch_ii.csv"},
        {k: ("kx", "ky", "e_minus", "e_plus") for k in ("lattice_i", "lattice_ii")},
        build_fig2,
    ),
    "fig3": FigureRecipe(
        "fig3",
        {"lattice_i": "ws_bands_i.csv", "lattice_ii": "ws_bands_ii.csv"},
        {k: ("kappa", "e_minus", "e_plus") for k in ("lattice_i", "lattice_ii")},
        build_fig3,
    ),
    "fig4": FigureRecipe(
        "fig4",
        {"lattice_i": "ws_fan_i.csv", "lattice_ii": "ws_fan_ii.csv"},
        {k: ("f", "energy") for k in ("lattice_i", "lattice_ii")},
        build_fig4,
    ),
    "fig5": FigureRecipe(
        "fig5",
        {"lattice_i": "rate_scan_i.csv", "lattice_ii": "rate_scan_ii.csv"},
        {k: ("inv_f", "a_mean") for k in ("lattice_i", "lattice_ii")},
        build_fig5,
        notes="log-scale inset",
    ),
    "fig6": FigureRecipe(
        "fig6",
        {"dispersion": "asym_limiting_dispersion.csv",
         "rate": "asym_limiting_rate.csv"},
        {"dispersion": ("r", "q", "kappa_frac", "e_plus"),
         "rate": ("r", "q", "a_limit")},
        build_fig6,
    ),
    "fig7": FigureRecipe(
        "fig7", {"map": "lz_map.csv"},
        {"map": ("kx", "ky", "t_over_tj", "p_plus")}, build_fig7,
    ),
    "fig8": FigureRecipe(
        "fig8",
        {"trace": "wavepacket_trace.csv", "snapshot": "wavepacket_snapshot.csv"},
        {"trace": ("t", "sigma"), "snapshot": ("x", "y", "prob")},
        build_fig8,
    ),
    "fig9": FigureRecipe(
        "fig9", {"rates": "wavepacket_rates.csv"},
        {"rates": ("f", "b", "a_mean")}, build_fig9,
    ),
    "fig10": FigureRecipe(
        "fig10", {"scan": "fractal_scan.csv"},
        {"scan": ("theta", "t", "sigma")}, build_fig10,
    ),
    "fig11": FigureRecipe(
        "fig11", {"scan": "fractal_scan.csv"},
        {"scan": ("theta", "t", "sigma")}, build_fig11,
    ),
    "fig17": FigureRecipe(
        "fig17",
        {"lattice_i": "lz_mean_i.csv", "lattice_ii": "lz_mean_ii.csv"},
        {k: ("inv_f", "p_plus_mean") for k in ("lattice_i", "lattice_ii")},
        build_fig17,
        notes="log main panel, linear inset",
    ),
    "fig18": FigureRecipe(
        "fig18",
        {"bose_rational": "lz_trace_bose_rational.csv",
         "fermi_rational": "lz_trace_fermi_rational.csv",
         "bose_irrational": "lz_trace_bose_irrational.csv",
         "fermi_irrational": "lz_trace_fermi_irrational.csv"},
        {k: ("t_over_tj", "p_plus")
         for k in ("bose_rational", "fermi_rational",
                   "bose_irrational", "fermi_irrational")},
        build_fig18,
    ),
}


def build(figure_id: str, input_dir) -> Figure:
    """Assemble the matplotlib figure for one recipe (no file output)."""
    try:
        recipe = RECIPES[figure_id]
    except KeyError:
        raise InputError(
            f"unknown figure id {figure_id!r}; known: {sorted(RECIPES)}"
        ) from None
    return recipe.builder(_load(recipe, Path(input_dir)))


def render(figure_id: str, input_dir, output_path) -> Path:
    """Render one figure from its CSV inputs to a static image file."""
    fig = build(figure_id, input_dir)
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(output_path, dpi=150)
    return output_path
