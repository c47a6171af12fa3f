"""Where stratified and GADS samples land on a single ray through a wall.

The wall starts at z = 3.2 with density 60, so transmittance crosses one half
ln(2)/60 behind the entry.  Stratified samples spread over the whole range;
GADS concentrates its dynamic samples around the crossing.
"""
import numpy as np

from gads.fields import Primitive, SceneDescription, SceneField, ground_truth_depths
from gads.sampling import SamplerBudget, dynamic_samples_batch, geometry_intervals, stratified_samples

scene = SceneDescription([Primitive("box", (0, 0, 8.2), (10, 10, 5), 60.0)])
field = SceneField(scene)
o, d = np.zeros((1, 3)), np.array([[0.0, 0.0, 1.0]])
near, far = 1.0, 9.0
truth = ground_truth_depths(scene, o, d, near, far)[0]
print(f"true T=0.5 crossing: {truth:.4f}")

strat = stratified_samples(near, far, 16, seed=0)
print("stratified 16:      ", np.round(strat, 3))
print(f"  nearest to truth: {np.min(np.abs(strat - truth)):.4f}")

# a coarse depth 0.3 off the truth, as a plane sweep might give
lo, hi = geometry_intervals(np.array([truth + 0.3]), 0.8, near, far)
s = dynamic_samples_batch(field, o, d, lo, hi, SamplerBudget(4, 12), seed=0)
t, dyn = s.t[0], s.dynamic[0]
print(f"interval [{lo[0]:.2f}, {hi[0]:.2f}]")
print("gads coarse 4:      ", np.round(t[~dyn], 3))
print("gads dynamic 12:    ", np.round(t[dyn], 3))
print(f"  nearest to truth: {np.min(np.abs(t[dyn] - truth)):.2e}")
