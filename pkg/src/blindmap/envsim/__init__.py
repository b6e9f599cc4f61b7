from .channel import (
    ChannelSampler,
    ChannelTensor,
    CoverageGapError,
    Path,
    PathSet,
    assemble_channel,
    channel_entries,
    steering_vector,
    synth_channel,
)
from .dataset import MeasurementDataset, generate_dataset, load_dataset, save_dataset
from .deployment import sample_aod, sample_ppp_aps
from .lattice import ImageCluster, MirrorLattice, build_mirror_lattice, trace_cluster, visible_images
from .mobility import simulate_bounded_trajectory, simulate_trajectory
from .scene import load_scene, save_scene, scene_from_dict, scene_to_dict
from .types import (
    ArrayGeometry,
    EnvironmentModel,
    MobilityParams,
    OfdmConfig,
    Scatterer,
    Surface,
    rectangle_room,
)

__all__ = [
    "ArrayGeometry",
    "ChannelSampler",
    "ChannelTensor",
    "CoverageGapError",
    "EnvironmentModel",
    "ImageCluster",
    "MeasurementDataset",
    "MirrorLattice",
    "MobilityParams",
    "OfdmConfig",
    "Path",
    "PathSet",
    "Scatterer",
    "Surface",
    "assemble_channel",
    "build_mirror_lattice",
    "channel_entries",
    "generate_dataset",
    "load_dataset",
    "load_scene",
    "rectangle_room",
    "sample_aod",
    "sample_ppp_aps",
    "save_dataset",
    "save_scene",
    "scene_from_dict",
    "scene_to_dict",
    "simulate_bounded_trajectory",
    "simulate_trajectory",
    "steering_vector",
    "synth_channel",
    "trace_cluster",
    "visible_images",
]
