"""GUI screenshot preprocessing: information-sensitive cropping, spectral
hard-case mining and a self-refining grounding/referring annotation loop."""

from .budget import TokenBudgetModel, modeled_costs, scaling_probe, token_count_full, token_count_isc
from .crop import CropManifest, ISCConfig, Region, adaptive_extract, finalize_crops, isc_pipeline
from .edges import EdgeConfig, InfoMatrix, detect_information
from .imaging import GrayImage, PixelImage, Rect, bilinear_resize, crop_rect, to_grayscale
from .spectral import dft2, entropy_report, select_visual_hard_cases, spectral_entropy
from .srdl import BBox, DualLoopConfig, ElementDescription, dual_loop, iou, run_srdl
from .synth import GroundTruth, ScreenSpec, generate_screen

__version__ = "0.1.0"

__all__ = [
    "BBox", "CropManifest", "DualLoopConfig", "EdgeConfig", "ElementDescription", "GrayImage",
    "GroundTruth", "ISCConfig", "InfoMatrix", "PixelImage", "Rect", "Region", "ScreenSpec",
    "TokenBudgetModel", "adaptive_extract", "bilinear_resize", "crop_rect", "detect_information",
    "dft2", "dual_loop", "entropy_report", "finalize_crops", "generate_screen", "iou",
    "isc_pipeline", "modeled_costs", "run_srdl", "scaling_probe", "select_visual_hard_cases",
    "spectral_entropy", "to_grayscale", "token_count_full", "token_count_isc",
]
