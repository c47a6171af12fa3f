"""Plane sweep on the textured wall: cost curve at one pixel and the depth map error."""
import numpy as np

from gads.coarse_depth import build_cost_volume, inverse_depth_hypotheses, regress_depth
from gads.fusion import PosedImage
from gads.harness.experiment import oracle_render
from gads.harness.scenes import PLANE_FAR, PLANE_HYPOTHESES, PLANE_NEAR, textured_plane

spec = textured_plane(0, 64, 64, 5)
refs = [PosedImage(c, oracle_render(spec, c, 2048, i)) for i, c in enumerate(spec.refs)]
hyp = inverse_depth_hypotheses(PLANE_NEAR, PLANE_FAR, PLANE_HYPOTHESES)
vol = build_cost_volume(spec.target, refs, hyp)
wall = spec.scene.primitives[0]
true = wall.center[2] - wall.size[2]

cost = vol.cost[32, 32]
k = int(np.argmin(cost))
print(f"true depth {true:.4f}; argmin hypothesis {k} at {hyp[k]:.4f}")
for i in range(max(0, k - 4), min(len(hyp), k + 5)):
    bar = "#" * int(40 * cost[i] / cost.max())
    print(f"  {hyp[i]:6.3f} {cost[i]:.5f} {bar}")

dc = regress_depth(vol).depth[6:-6, 6:-6]
rel = np.abs(dc - true) / true
print(f"interior mean relative error {rel.mean():.4f}, 95th percentile {np.quantile(rel, 0.95):.4f}")
