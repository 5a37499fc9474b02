"""Photoelectric-feedback ("naked-eye") ghost imaging simulator."""

__version__ = "0.1.0"

from .feedback import (
    AnalogControllerConfig,
    ControllerState,
    DigitalControllerConfig,
    analog_step,
    digital_step,
    monotonicity_check,
    settle,
)
from .imaging import (
    closed_form_feedback_g2,
    integrate_exposure,
    negative_image_check,
    noise_sensitivity,
    segment_recover_exact,
    sliding_persistence,
    traditional_g2,
    visibility,
)
from .mask import MaskSequence, build_mask_sequence, hadamard_block_contrast, hadamard_matrix, s_matrix
from .optics import NoiseModel, bucket_signal, transmissivity, transmissivities
from .scene import MotionDescriptor, Scene, letter_stencil, shift_scene
