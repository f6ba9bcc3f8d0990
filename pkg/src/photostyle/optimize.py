"""Adam-driven optimization of the transfer image.

The image variable is optimized on the 0..255 pixel scale: the unit
Adam step size the method was tuned with corresponds to one 8-bit pixel
level there. Module boundaries stay in [0, 1]; gradients from the loss
are rescaled by the chain rule and pixels are clamped to the valid
range after every step.
"""

from dataclasses import dataclass, field

import numpy as np

from . import losses
from .errors import NumericalError, ShapeError
from .images import resize_bilinear

PIXEL_SCALE = 255.0


@dataclass
class AdamState:
    """First/second moment accumulators and hyperparameters."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, lr=1.0, beta1=0.9, beta2=0.999, eps=1e-8):
        return cls(
            m=np.zeros_like(params),
            v=np.zeros_like(params),
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
        )


def adam_step(state, params, grad):
    """One bias-corrected Adam update; returns the new parameters.

    The state's moments and step count are updated in place.
    """
    grad = np.asarray(grad)
    if grad.shape != params.shape or state.m.shape != params.shape:
        raise ShapeError(
            "gradient/state shape mismatch", expected=params.shape, got=grad.shape
        )
    if not np.all(np.isfinite(grad)):
        raise NumericalError("non-finite gradient", iteration=state.t)
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * (grad * grad)
    m_hat = state.m / (1.0 - state.beta1**state.t)
    v_hat = state.v / (1.0 - state.beta2**state.t)
    return params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def init_transfer_image(mode, content, style, seed=0):
    """Starting image at the content image's size, values in [0, 1].

    Modes: ``content`` copies the content image, ``style`` resizes the
    style image to the content dimensions, ``noise`` draws uniform
    pixels deterministically from the seed.
    """
    content = np.asarray(content)
    if mode == "content":
        return content.copy()
    if mode == "style":
        h, w = content.shape[:2]
        style = np.asarray(style)
        if style.shape[:2] == (h, w):
            return style.copy()
        return resize_bilinear(style, h, w).astype(content.dtype)
    if mode == "noise":
        gen = np.random.default_rng(seed)
        return gen.random((content.shape[0], content.shape[1], 3)).astype(content.dtype)
    raise ShapeError(f"unknown initialization mode {mode!r}")


@dataclass
class RunJob:
    """A prepared optimization problem; see cli.execute for the wiring."""

    content: np.ndarray
    style: np.ndarray
    precomputed: losses.Precomputed
    config: losses.LossConfig
    iterations: int
    init_mode: str = "content"
    seed: int = 0
    checkpoint_every: int = 100
    checkpoint_writer: object = None  # callable (iteration, image) or None
    log_writer: object = None  # callable (line: str) or None
    reports: list = field(default_factory=list)


def run(job):
    """Optimize the transfer image and return (image, loss report series).

    Logs one report per evaluated iterate, including the final image, so
    ``reports[0]``/``reports[-1]`` give the initial and final losses.
    Fixed inputs and seed reproduce the series exactly.
    """
    image = init_transfer_image(job.init_mode, job.content, job.style, job.seed)
    x = image.astype(np.float64) * PIXEL_SCALE
    state = AdamState.for_params(x)

    if job.log_writer is not None:
        job.log_writer(losses.LossReport.csv_header())

    def emit(iteration, report):
        job.reports.append(report)
        if job.log_writer is not None:
            job.log_writer(report.csv_row(iteration))

    for t in range(job.iterations):
        image = (x / PIXEL_SCALE).astype(job.content.dtype, copy=False)
        report, grad = losses.total_loss(image, job.precomputed, job.config)
        emit(t, report)
        try:
            x = adam_step(state, x, grad.astype(np.float64) / PIXEL_SCALE)
        except NumericalError:
            raise NumericalError("non-finite gradient", iteration=t) from None
        np.clip(x, 0.0, PIXEL_SCALE, out=x)
        if (
            job.checkpoint_writer is not None
            and job.checkpoint_every > 0
            and (t + 1) % job.checkpoint_every == 0
        ):
            job.checkpoint_writer(t + 1, x / PIXEL_SCALE)

    if job.iterations == 0:
        final = image  # the untouched initialization
    else:
        final = np.clip(x / PIXEL_SCALE, 0.0, 1.0).astype(job.content.dtype, copy=False)
    report, _ = losses.total_loss(final, job.precomputed, job.config)
    emit(job.iterations, report)
    return final, job.reports
