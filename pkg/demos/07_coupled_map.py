"""A random map into a bigger tree that is exactly uniform yet keeps cousins together.

Run: python3 demos/07_coupled_map.py
"""

import numpy as np

from phylocsp.gap import CoupledMap, child_label_divergence, coupling_experiment, divergence_bound, lmn_pmf

print("shortcut-tree law of source 1, M=4, d'=2:", np.round(lmn_pmf(4, 2, 1) * 16, 3), "/16")
cm = CoupledMap(4, 3)
print("per-coordinate TV to uniform:", [round(t, 4) for t in cm.tv])
rep = coupling_experiment(4, 3, 200_000, np.random.default_rng(0))
print(f"chi2 p = {rep['chi2_pvalue']:.3f}; cousins kept {rep['min_cousin_rate']:.3f} (bound {rep['cousin_bound']:.3f})")

# How far a child's label histogram drifts from its parent's.
lab = np.arange(81) % 2
print(f"divergence {child_label_divergence(3, 4, lab, 2):.3f} <= {divergence_bound(2, 4):.3f}")
