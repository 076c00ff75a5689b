"""Dense CRF inference with permutohedral-lattice Gaussian filtering."""

from ._latticecrf import (
    DenseCRF,
    PermutohedralLattice,
    average_accuracy,
    brute_force_filter,
    global_accuracy,
    load_compatibility,
    load_image,
    load_labelmap,
    load_unary,
    map_labeling,
    save_compatibility,
    save_labelmap,
    save_ppm,
    save_unary,
    trimap_error,
    voc_iou,
    whiten_features,
)

__all__ = [
    "DenseCRF",
    "PermutohedralLattice",
    "average_accuracy",
    "brute_force_filter",
    "global_accuracy",
    "load_compatibility",
    "load_image",
    "load_labelmap",
    "load_unary",
    "map_labeling",
    "save_compatibility",
    "save_labelmap",
    "save_ppm",
    "save_unary",
    "trimap_error",
    "voc_iou",
    "whiten_features",
]
