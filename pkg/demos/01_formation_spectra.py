"""Walk through the network layer: positions in, spectra out.

Every team of robots induces a weighted graph: the edge between robots i
and j carries weight exp(-c * dist_z(x_i, x_j)), so nearby robots couple
strongly and distant ones barely at all.  The controller never looks at
this matrix entry by entry; it watches the normalized traces of its
powers, m_k = tr(A^k) / n.  This script builds a few teams and shows what
those numbers look like.

Run:  python3 demos/01_formation_spectra.py
"""

import numpy as np

from momentflow.network import (
    build_adjacency,
    complete_graph_moments,
    eigenvalues,
    spectral_moments,
)
from momentflow.scenarios import hexagon_formation, random_geometric_config


def describe(title, config, decay=1.0, metric=2, order=None):
    order = config.n if order is None else order
    adjacency = build_adjacency(config, decay, metric)
    moments = spectral_moments(adjacency, order)
    eigs = eigenvalues(adjacency)
    print(f"\n{title}  (n={config.n}, d={config.d}, c={decay:g}, z={metric})")
    print("  eigenvalues:", ", ".join(f"{v:+.4f}" for v in eigs))
    for k in range(1, order + 1):
        print(f"  m_{k} = {moments.values[k - 1]:.6g}")
    return moments


print("=" * 68)
print("1. A regular hexagon with a robot at its center")
print("=" * 68)
hexagon = hexagon_formation(side_length=1.0)
describe("hexagon, side 1", hexagon, order=4)

# m_1 is always exactly zero: the graph has no self-loops, so tr(A) = 0.
# m_2 is the mean squared edge weight mass per robot; it grows as the
# team contracts.
describe("hexagon, side 0.5", hexagon_formation(side_length=0.5), order=4)

print()
print("=" * 68)
print("2. The same shape under the taxicab metric (z=1)")
print("=" * 68)
describe("hexagon, side 1, taxicab", hexagon, metric=1, order=4)

print()
print("=" * 68)
print("3. A random team in the unit box")
print("=" * 68)
team = random_geometric_config(10, 2, seed=0)
describe("random 10-robot team", team, order=6)

print()
print("=" * 68)
print("4. Hard ceilings: no team can beat the coincident cluster")
print("=" * 68)
# With every robot at the same point all weights are 1 and the moments
# hit their suprema.  Any realizable target must sit strictly below.
ceiling = complete_graph_moments(10, 6)
actual = spectral_moments(build_adjacency(team, 1.0, 2), 6)
print(f"  {'k':>2}  {'random team':>12}  {'ceiling':>12}")
for k in range(2, 7):
    print(f"  {k:>2}  {actual.values[k - 1]:>12.5g}  {ceiling.values[k - 1]:>12.5g}")
print("\nTargets for the controller are chosen below these ceilings;")
print("the flow then approaches them from above.")
