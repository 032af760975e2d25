"""Coarsening a solution into a small coloured tree.

Run: python3 demos/05_coarse_solutions.py
"""

import numpy as np

from phylocsp.coarse import coarsen, fixed_coloring_experiment, is_in_class, mc_weight, monochrome_experiment, val_pm
from phylocsp.csp import gaifman, value_exact
from phylocsp.gap import GapSpec, build_gap, satisfying_solution

spec = GapSpec("triplet", 3)
inst = build_gap(spec)
phi = satisfying_solution(spec)
eps = 0.25
xi = coarsen(phi, eps)
lo, hi = val_pm(xi, inst)
print(f"{len(inst.variables)} variables -> {xi.n_labels()} leaves, {xi.n_colors()} colours")
print("in class:", is_in_class(xi, eps, 16 / eps, phi.order()))
print(f"value {float(value_exact(phi, inst)):.3f}; val- {float(lo):.3f}, val+ {float(hi):.3f}")
print(f"val+ - val- = {float(hi - lo):.3f} <= monochromatic weight {mc_weight(xi, gaifman(inst)):.3f}")

rng = np.random.default_rng(0)
fixed = fixed_coloring_experiment(inst, 3, 500, rng)
print(f"three fixed colour blocks, random orders: mean mc {fixed['mean']:.3f} of weight(E) {fixed['weight_E']}")
rep = monochrome_experiment(build_gap(GapSpec("triplet", 2)), 0.5, 4, 20, rng)
print(f"best admissible colouring per order: mean {rep.mean:.3f}, 3*eps*weight(E) = {rep.bound}, "
      f"m* = {rep.m_star} (bound claimed: {rep.bound_applies})")
