"""Volume rendering with geometry-aware dynamic sampling.

Modules:

* :mod:`gads.geometry` - pinhole cameras, poses, rays, homographies
* :mod:`gads.fields` - analytic scene fields and the photo-consistency field
* :mod:`gads.sampling` - stratified and geometry-aware dynamic samplers
* :mod:`gads.rendering` - transmittance compositing and view rendering
* :mod:`gads.coarse_depth` - plane-sweep coarse depth
* :mod:`gads.fusion` - multi-view feature fusion
* :mod:`gads.metrics` - image and depth metrics
* :mod:`gads.harness` - scenes, experiments and the command line
"""
from .coarse_depth import CostVolume, build_cost_volume, inverse_depth_hypotheses, regress_depth, rescale_depth
from .fields import (DEPTH_SENTINEL, FieldSample, PhotoconsistencyField, Primitive, SceneDescription, SceneField,
                     ground_truth_depth, ground_truth_depth_map, query_field, query_photoconsistency_field)
from .fusion import PosedImage, ViewFetch, fetch_views, fuse
from .geometry import (BehindCameraError, Camera, CameraIntrinsics, DomainError, Pose, Ray, plane_homography,
                       project, ray_for_pixel)
from .metrics import DepthMetrics, ImageMetrics, composite_score, depth_metrics, image_metrics, msc
from .rendering import (DepthMap, RenderedImage, RenderResult, SamplerConfig, composite_color, fine_depth,
                        render_rays, render_view, transmittances)
from .samples import RaySamples
from .sampling import (SamplerBudget, SamplingInterval, TransmittanceModel, dynamic_samples, geometry_interval,
                       solve_t_half, stratified_samples)

__version__ = "0.1.0"
