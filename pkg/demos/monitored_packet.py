"""A free wavepacket under continuous position monitoring.

Runs the conditioned (selective) evolution for a packet whose position
record is pinned at a = 0, next to the same packet left unmonitored,
and prints how the squared norm (the record's likelihood) and the
spatial spread respond as the measurement strength grows.  Writes the
time series for one strength to monitored_packet.txt.
"""

import argparse
from pathlib import Path

import numpy as np

from corridors.grids import (
    HamiltonianSpec,
    ObservableSpec,
    build_grids,
    gaussian_packet,
)
from corridors.scenario import emit_plot_data
from corridors.selective import evolve_selective_ideal


def spread(psi, grid):
    prob = np.abs(psi) ** 2
    prob /= prob.sum() * grid.spacing
    mean = prob @ grid.coords * grid.spacing
    return float(prob @ (grid.coords - mean) ** 2 * grid.spacing) ** 0.5


def main():
    cli = argparse.ArgumentParser(description=__doc__)
    cli.add_argument("--outdir", type=Path, default=Path("demo_out"))
    args = cli.parse_args()
    args.outdir.mkdir(parents=True, exist_ok=True)

    sgrid, tgrid = build_grids(extent=24.0, n_points=128, duration=4.0, n_steps=400)
    ham = HamiltonianSpec.free(sgrid)
    obs = ObservableSpec.position(sgrid)
    psi0 = gaussian_packet(sgrid, center=-2.0, width=1.5, momentum=0.8)
    record = np.zeros(tgrid.n_steps)  # the detector keeps reading a = 0

    print("free packet, center -2, momentum 0.8, record pinned at a = 0")
    print(f"{'kappa':>8} {'norm^2(T)':>12} {'spread(T)':>10} {'mean(T)':>9}")
    for kappa in (0.0, 0.05, 0.25, 1.0):
        res = evolve_selective_ideal(psi0, record, kappa, ham, obs, sgrid, tgrid)
        prob = np.abs(res.final_state) ** 2
        prob /= prob.sum() * sgrid.spacing
        mean = prob @ sgrid.coords * sgrid.spacing
        print(
            f"{kappa:8.2f} {res.norm_sq:12.4e} {spread(res.final_state, sgrid):10.3f} "
            f"{mean:9.3f}"
        )
    print("monitoring suppresses the ballistic spread and drags the packet")
    print("toward the recorded value; the squared norm is the price of the")
    print("record: unlikely records leave little weight behind.")

    kappa = 0.25
    rows = []

    def watch(i, psi):
        rows.append((tgrid.times[i + 1], float(np.sum(np.abs(psi) ** 2) * sgrid.spacing),
                     spread(psi, sgrid)))

    evolve_selective_ideal(psi0, record, kappa, ham, obs, sgrid, tgrid, observer=watch)
    t, norms, widths = map(np.asarray, zip(*rows))
    path = emit_plot_data(
        args.outdir / "monitored_packet.txt",
        [("t[time]", t), ("norm_sq", norms), ("spread[pos]", widths)],
        header=[f"conditioned evolution at kappa = {kappa}, record a = 0"],
    )
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
