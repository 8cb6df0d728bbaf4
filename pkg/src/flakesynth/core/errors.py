"""Exception hierarchy shared by all flakesynth modules."""

from typing import Optional


class FlakeSynthError(Exception):
    """Base class for every error raised by flakesynth."""


class ConfigError(FlakeSynthError):
    """Invalid or unreadable configuration."""

    def __init__(self, reason: str, file: Optional[str] = None, key: Optional[str] = None):
        self.reason = reason
        self.file = file
        self.key = key
        parts = []
        if file:
            parts.append(f"file={file}")
        if key:
            parts.append(f"key={key}")
        parts.append(f"reason={reason}")
        super().__init__(" ".join(parts))


class OpticsError(FlakeSynthError):
    """Invalid optical input (dispersion data, spectra, stacks)."""


class OutOfRangeError(OpticsError):
    """A wavelength lies outside a tabulated range."""

    def __init__(self, name: str, wavelength: float, lo: float, hi: float):
        self.name = name
        self.wavelength = wavelength
        super().__init__(
            f"wavelength {wavelength:g} nm outside the range [{lo:g}, {hi:g}] nm of '{name}'"
        )


class ShapeLibraryError(FlakeSynthError):
    """Shape mining or shape library problems."""


class GenerationError(FlakeSynthError):
    """Synthetic image generation failed for a given image index."""

    def __init__(self, index: int, reason: str):
        self.index = index
        super().__init__(f"image {index}: {reason}")


class BackgroundEstimationError(FlakeSynthError):
    """The substrate background of an image could not be estimated."""


class ContrastError(FlakeSynthError):
    """Invalid contrast extraction request."""


class PreprocessError(FlakeSynthError):
    """Contrast preprocessing failed."""

    def __init__(self, reason: str, class_name: Optional[str] = None):
        self.class_name = class_name
        if class_name is not None:
            reason = f"class '{class_name}': {reason}"
        super().__init__(reason)


class TrainingError(FlakeSynthError):
    """Classifier training diverged."""

    def __init__(self, iteration: int, loss: float, grad_norm: float):
        self.iteration = iteration
        self.loss = loss
        self.grad_norm = grad_norm
        super().__init__(
            f"non-finite loss at iteration {iteration} (loss={loss}, grad_norm={grad_norm})"
        )


class ModelFormatError(FlakeSynthError):
    """A model file could not be read."""


class EvaluationError(FlakeSynthError):
    """Inconsistent detections or ground truth."""


class DatasetImportError(FlakeSynthError):
    """A dataset directory failed validation."""

    def __init__(self, reason: str, file: Optional[str] = None):
        self.file = file
        super().__init__(f"{file}: {reason}" if file else reason)
