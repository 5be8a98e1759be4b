"""
Custom exceptions for the tactile sensing pipeline.

This module defines the exception hierarchy used by every stage:

Geometry and Calibration Errors:
- NoPath, InvalidTransform, InconsistentFrames: frame graph and transform problems
- BehindCamera, Degenerate, InsufficientViews: camera model and planar calibration
- TooFewPairs, DegenerateMotion, MisalignedInput: hand-eye calibration

Simulation and Dataset Errors:
- OutOfBounds: phantom field queried outside the working area
- NoContact, ForceNotReached: the phantom never touches the gel, or not hard enough
- RetryExhausted, InsufficientPhantoms: collection and splitting

Learning Errors:
- ZeroSize, ShapeMismatch, SingularBatch, InvalidConfig, LabelOutOfRange
- NonFiniteGradient, MissingValLoss, LengthMismatch, UnknownClassLabel, MissingCheckpoint

Command Line Errors:
- MissingStageOutput: a stage was run before the stage that feeds it
- UnknownSubcommand, BadFlag, ConfigParse

Everything inherits from AgcSimException so the command line can report any stage
failure with a single handler and the right exit status.
"""

from __future__ import annotations


class AgcSimException(Exception):
    """Base exception for pipeline errors."""

    summary_exception: str
    long_exception: str

    def __init__(self, summary_exception: str, long_exception: str | None = None) -> None:
        """
        Initialize pipeline exception.

        Args:
            summary_exception: Brief error description
            long_exception: Optional detailed error message
        """
        super().__init__(summary_exception, long_exception)
        self.summary_exception = summary_exception
        self.long_exception = long_exception or ""

    def __str__(self) -> str:
        if self.long_exception:
            return f"{self.summary_exception}: {self.long_exception}"
        return self.summary_exception


# Rigid transforms and frames
class GeometryError(AgcSimException):
    """Base error for rigid transform and frame graph problems."""


class InvalidTransform(GeometryError):
    """Rotation is not orthonormal with determinant +1, or the shapes are wrong."""


class NoPath(GeometryError):
    """The two frames are not connected in the frame graph."""

    def __init__(self, from_frame: str, to_frame: str) -> None:
        super().__init__(f"No path from frame '{from_frame}' to frame '{to_frame}'")
        self.from_frame = from_frame
        self.to_frame = to_frame


class InconsistentFrames(GeometryError):
    """Two routes through the frame graph disagree beyond tolerance."""


# Camera model and planar calibration
class CameraError(AgcSimException):
    """Base error for projection and planar calibration."""


class BehindCamera(CameraError):
    """A point, or every pose candidate, lies at non-positive depth."""


class Degenerate(CameraError):
    """The linear system is rank deficient (collinear points, parallel views, too few points)."""


class InsufficientViews(CameraError):
    """Fewer than three views of the planar target."""


# Hand-eye
class CalibrationError(AgcSimException):
    """Base error for hand-eye calibration."""


class TooFewPairs(CalibrationError):
    """Fewer than two motion pairs."""


class DegenerateMotion(CalibrationError):
    """Every relative motion rotates about the same axis."""


class MisalignedInput(CalibrationError):
    """Robot pose and camera view lists are not index-aligned."""


# Phantoms and contact
class PhantomError(AgcSimException):
    """Base error for phantom generation and lookup."""


class OutOfBounds(PhantomError):
    """Query point lies outside the phantom working area."""


class ContactError(AgcSimException):
    """Base error for the contact solver."""


class NoContact(ContactError):
    """The phantom surface never reaches the gel within the travel limit."""


class ForceNotReached(NoContact):
    """Contact happens, but the travel limit stops short of the force band."""


# Collection
class CollectionError(AgcSimException):
    """Base error for dataset collection and splitting."""


class RetryExhausted(CollectionError):
    """A view could not achieve contact after the configured number of pose resamples."""


class InsufficientPhantoms(CollectionError):
    """A class has too few tumors for the requested split or fold count."""


# Augmentation
class AugmentError(AgcSimException):
    """Base error for preprocessing."""


class ZeroSize(AugmentError):
    """Image or target size has a zero dimension."""


# Network
class ModelError(AgcSimException):
    """Base error for layers and models."""


class ShapeMismatch(ModelError):
    """Tensor shapes disagree with the layer contract."""


class SingularBatch(ModelError):
    """Batch statistics are undefined for a batch of one in training mode."""


class InvalidConfig(AgcSimException):
    """A configuration value is outside its allowed range."""


class LabelOutOfRange(ModelError):
    """A label is not a valid class index."""


class MissingCheckpoint(ModelError):
    """Checkpoint header or parameter blob not found."""


# Training
class TrainingError(AgcSimException):
    """Base error for optimizers, schedulers and the training loop."""


class NonFiniteGradient(TrainingError):
    """A gradient contains NaN or Inf."""


class MissingValLoss(TrainingError):
    """The plateau scheduler needs a validation loss for every epoch."""


# Experiment
class ExperimentError(AgcSimException):
    """Base error for search, cross-validation and evaluation."""


class LengthMismatch(ExperimentError):
    """Label and score arrays differ in length, or are empty."""


class UnknownClassLabel(ExperimentError):
    """A label falls outside the known class indices."""


# Stage orchestration
class MissingStageOutput(AgcSimException):
    """A stage needs an artifact that an earlier stage has not written yet."""


# Command line
class UsageError(AgcSimException):
    """Base error for command line misuse."""


class UnknownSubcommand(UsageError):
    """The subcommand is not one of the pipeline stages."""


class BadFlag(UsageError):
    """A flag is unknown or its value does not parse."""


class ConfigParse(UsageError):
    """The configuration file could not be read or parsed."""
