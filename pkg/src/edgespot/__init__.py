"""Few-shot keyword spotting for edge targets: mel/PCEN frontend, a
broadcast-residual embedding network with temporal attention, prototype-based
open-set detection, evaluation metrics, and footprint accounting."""

from .config import ModelConfig, TAUS, VARIANT_BCRESNET, VARIANT_EDGESPOT
from .errors import (
    AudioFormatError,
    BundleError,
    DatasetError,
    EdgeSpotError,
    ParameterError,
    ShapeError,
    StoreError,
)
from .evaluate import (
    DetPoint,
    KdConfig,
    Sample,
    TrialSet,
    acc_at_far,
    auroc,
    det_at_far,
    kd_loss,
    kd_loss_grad,
    make_episodes,
)
from .footprint import REFERENCE_FOOTPRINTS, count_macs, count_params, footprint
from .frontend import (
    AugmentSpec,
    PcenParams,
    load_waveform,
    melspec,
    pcen,
    pcen_smooth,
    spec_augment,
)
from .graph import (
    AttentionParams,
    BlockParams,
    RpeParams,
    bc_resblock,
    embed,
    embed_waveform,
    rpe,
    sdpa,
)
from .prototypes import (
    Detection,
    Prototype,
    PrototypeStore,
    calibrate_threshold,
    detect,
    enroll,
    load_store,
    save_store,
    score,
)
from .weights import (
    WeightBundle,
    load_bundle,
    load_tensors,
    random_bundle,
    save_bundle,
    save_tensors,
)

__version__ = "0.1.0"

__all__ = [
    "AttentionParams", "AudioFormatError", "AugmentSpec", "BlockParams",
    "BundleError", "DatasetError", "DetPoint", "Detection", "EdgeSpotError",
    "KdConfig", "ModelConfig", "ParameterError", "PcenParams", "Prototype",
    "PrototypeStore", "REFERENCE_FOOTPRINTS", "RpeParams", "Sample",
    "ShapeError", "StoreError", "TAUS", "TrialSet", "VARIANT_BCRESNET",
    "VARIANT_EDGESPOT", "WeightBundle", "acc_at_far", "auroc", "bc_resblock",
    "calibrate_threshold", "count_macs", "count_params", "det_at_far",
    "detect", "embed", "embed_waveform", "enroll", "footprint", "kd_loss",
    "kd_loss_grad", "load_bundle", "load_store", "load_tensors",
    "load_waveform", "make_episodes", "melspec", "pcen", "pcen_smooth",
    "random_bundle", "rpe", "save_bundle", "save_store", "save_tensors",
    "score", "sdpa", "spec_augment",
]
