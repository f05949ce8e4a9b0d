"""Lattice toolkit for continuously monitored quantum dynamics.

Subpackages by theme:

- :mod:`corridors.grids` — lattices, Hamiltonians, states, unitary stepping
- :mod:`corridors.readout` — measurement records, Gaussian weights, windows
- :mod:`corridors.selective` — readout-conditioned (selective) evolution
- :mod:`corridors.nonselective` — averaged dynamics, decoherence, unitarity
- :mod:`corridors.medium` — oscillator-medium influence functionals
- :mod:`corridors.scenario` — config files, manifests, plot-data output
- :mod:`corridors.cli` — the ``corridors`` command-line front end
"""

__version__ = "0.1.0"
