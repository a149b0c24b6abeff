"""Learning tabletop cleaning from human demonstrations.

The package covers the full loop: mapping robot-camera images to a metric
bird-view of the table, augmenting small demonstration sets, encoding
trajectories in a task-parameterized Gaussian mixture, predicting task
frames from images, and scoring reproduction quality in a 2D simulator.
"""

from .augment import (AugmentPlan, PerlinParams, apply_illumination, apply_translation,
                      augment_dataset, augment_sample, jitter_illumination, perlin2,
                      perlin_background, perlin_texture, sample_translation)
from .config import (DEFAULT_COLORS, DEFAULT_RENDER, DEFAULT_SPONGE_RADIUS, DEFAULT_TABLE,
                     ColorBox, ColorConfig, Rect, RenderConfig, TableConfig)
from .dataset_io import (Dataset, DatasetWriter, Demonstration, NoiseConfig,
                         generate_synthetic_demos, load_dataset, load_png,
                         save_dataset, save_png, scene_dirt_points,
                         split_dataset, synthesize_demo)
from .errors import (AmbiguousColor, CollapsedComponent, DegenerateAxis,
                     DegenerateConfiguration, DegenerateFrameGeometry, EmptyDirtMask,
                     FewerThanFourPairs, InsufficientData, InvariantViolation,
                     MaskOutsideTable, MissingFile, NonInvertibleHomography,
                     NonPositiveScale, NonSpdCovariance, ParamsOutOfBounds,
                     PointAtInfinity, SchemaVersionMismatch, SingularPrecisionSum,
                     ToolkitError, UntrainedModel, ZeroInitialArea, ZeroInitialDistance)
from .experiment import CurvePoint, demos_curve, reproduction_error, validation_error
from .geometry import (Homography, TablePoint, VirtualImage, apply_homography,
                       estimate_homography, load_homography, read_correspondences,
                       save_homography, table_to_virtual, virtual_to_table, warp_image)
from .perception import (BaselineFramePredictor, DirtMask, DirtType, FramePrediction,
                         classify_dirt, frame_triplet_from_points, mean_hue,
                         predict_frames, segment_dirt)
from .simulator import (LentilSpawnParams, MarkerSpawnParams, MetricSeries, Pipeline,
                        Scene, dirt_area, execute_trajectory, ink_mass,
                        mask_corner_distance, metric_m1, metric_m2,
                        metric_m2_from_distances, quadratic_through, render_scene,
                        run_episode, spawn_scene)
from .tpgmm import (EmConfig, Gaussian, ReferenceFrame, TpGmmModel, Trajectory,
                    em_fit, frame_orientations, fuse_gaussians, gmr_trajectory,
                    load_model, log_likelihood, make_frames, mixture_density,
                    project_gaussian, save_model)

__version__ = "0.1.0"
