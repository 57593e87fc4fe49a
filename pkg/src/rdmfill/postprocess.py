"""Post-processing of completed RDMs.

Three steps, applied in order where enabled: put the exactly-known sampled
elements back, rescale each sector to its particle-number trace, and shift
by the model's own completion residual.  The first and last assume the
observed values are exact, so they are refused in noisy mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .completion import SampleSet
from .errors import ModeMismatch, SampleSetMismatch, ZeroTrace
from .rdm_core import PackedRDM, SpinRDMSet, SystemMeta, trace_targets

STEP_RESTORE = "restore-sampled"
STEP_NORMALIZE = "normalize-trace"
STEP_MODEL = "model-correction"
_KNOWN_STEPS = (STEP_RESTORE, STEP_NORMALIZE, STEP_MODEL)

NOISELESS_STEPS = (STEP_RESTORE, STEP_NORMALIZE, STEP_MODEL)
NOISY_STEPS = (STEP_NORMALIZE,)


@dataclass(frozen=True)
class PostprocessConfig:
    steps: tuple = NOISELESS_STEPS
    noisy: bool = False

    def __post_init__(self):
        for step in self.steps:
            if step not in _KNOWN_STEPS:
                raise ModeMismatch(f"unknown step {step!r}")
        if self.noisy and (STEP_RESTORE in self.steps or STEP_MODEL in self.steps):
            raise ModeMismatch(
                "restore-sampled and model-correction need exact observations"
            )


def restore_sampled(completed: np.ndarray, observed, sample: SampleSet,
                    noisy: bool = False) -> np.ndarray:
    """Overwrite the sampled positions with their exactly-known values."""
    if noisy:
        raise ModeMismatch("restore_sampled is only valid in noiseless mode")
    obs = observed.data if isinstance(observed, PackedRDM) else np.asarray(observed)
    out = np.array(completed, dtype=np.float64)
    vals = obs[sample.rows, sample.cols]
    out[sample.rows, sample.cols] = vals
    out[sample.cols, sample.rows] = vals
    return out


def normalize_trace(rdms: SpinRDMSet, meta: SystemMeta | None = None) -> SpinRDMSet:
    """Rescale every stored sector to its particle-number trace.

    A sector whose target trace is zero is zeroed outright; a vanishing
    current trace with a nonzero target cannot be rescaled.
    """
    meta = rdms.meta if meta is None else meta
    targets = trace_targets(meta)
    out = rdms
    for sector, block in rdms.items():
        target = targets[sector]
        if target == 0.0:
            out = out.replace(sector, np.zeros_like(block.data))
            continue
        current = block.trace()
        if abs(current) < 1e-14 * max(1.0, abs(target)):
            raise ZeroTrace(
                f"sector {sector.value} trace {current:.3e} cannot reach {target}"
            )
        out = out.replace(sector, block.data * (target / current))
    return out


def model_correction(completed_target: np.ndarray, model, completed_model,
                     target_sample: SampleSet | None = None,
                     model_sample: SampleSet | None = None) -> np.ndarray:
    """Add the model's truncation-plus-completion residual to the target.

    The residual only transfers when both completions saw the same element
    set, so mismatched samplings are rejected when both are given.
    """
    if target_sample is not None and model_sample is not None:
        if not target_sample.same_positions(model_sample):
            raise SampleSetMismatch("target and model used different samples")
    model_mat = model.data if isinstance(model, PackedRDM) else np.asarray(model)
    model_fit = (completed_model.data if isinstance(completed_model, PackedRDM)
                 else np.asarray(completed_model))
    return np.asarray(completed_target) + (model_mat - model_fit)
