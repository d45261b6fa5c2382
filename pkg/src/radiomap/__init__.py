"""Radiomic feature maps (concentration rate, GLCM Renyi entropy) and
segmentation evaluation tools for FLAIR slices."""

from radiomap.cr import CrParams, cr_map_fast, cr_map_naive
from radiomap.glcm import Glcm, GlcmParams, re_map_fast, re_map_naive, renyi_entropy, window_glcm
from radiomap.imgio import FormatError, GrayImage, VolumeMeta

__version__ = "0.1.0"

__all__ = [
    "CrParams",
    "FormatError",
    "Glcm",
    "GlcmParams",
    "GrayImage",
    "VolumeMeta",
    "cr_map_fast",
    "cr_map_naive",
    "re_map_fast",
    "re_map_naive",
    "renyi_entropy",
    "window_glcm",
]
