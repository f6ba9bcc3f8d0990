"""Loss terms of the transfer objective and their image gradients.

The total objective combines feature-matching content loss, a style
loss computed per semantic class from masked Gram matrices, the matting
Laplacian photorealism penalty, and an aesthetics term driven by a
pluggable scorer. Feature-space gradients are routed through the
extractor's backward pass; the matting and assessment gradients live
directly in pixel space.
"""

from dataclasses import dataclass, field

import numpy as np

from . import matting, vgg
from .errors import ClassTableMismatchError, PhotostyleError, ShapeError


@dataclass
class LossConfig:
    """Per-layer weights and the scalar factors of the objective."""

    content_weights: dict
    style_weights: dict
    gamma: float = 1.0
    photorealism_weight: float = 0.0
    assessment_weight: float = 0.0
    semantic_threshold: float = 0.6  # carried for provenance

    def __post_init__(self):
        values = (
            list(self.content_weights.values())
            + list(self.style_weights.values())
            + [self.gamma, self.photorealism_weight, self.assessment_weight]
        )
        if any(v < 0 for v in values):
            raise PhotostyleError("loss weights must be nonnegative")
        if not self.content_weights and not self.style_weights:
            raise PhotostyleError("at least one content or style layer must be set")

    @classmethod
    def defaults(
        cls,
        content_weight=1.0,
        style_weight=100.0,
        photorealism_weight=10000.0,
        assessment_weight=100000.0,
        semantic_threshold=0.6,
    ):
        """Single-scalar weights spread over the default layer sets."""
        styles = vgg.DEFAULT_STYLE_LAYERS
        return cls(
            content_weights={l: content_weight for l in vgg.DEFAULT_CONTENT_LAYERS},
            style_weights={l: style_weight / len(styles) for l in styles},
            gamma=1.0,
            photorealism_weight=photorealism_weight,
            assessment_weight=assessment_weight,
            semantic_threshold=semantic_threshold,
        )

    def layers(self):
        wanted = [l for l, w in self.content_weights.items() if w > 0]
        wanted += [l for l, w in self.style_weights.items() if w > 0]
        return sorted(set(wanted), key=vgg.CONV_NAMES.index)


@dataclass
class LossReport:
    """Weighted term values; ``total`` is their sum."""

    content: float
    style: float
    photorealism: float
    assessment: float
    total: float
    content_layers: dict = field(default_factory=dict)
    style_layers: dict = field(default_factory=dict)

    def csv_row(self, iteration):
        return (
            f"{iteration},{self.content:.9g},{self.style:.9g},"
            f"{self.photorealism:.9g},{self.assessment:.9g},{self.total:.9g}"
        )

    @staticmethod
    def csv_header():
        return "iteration,content,style,photorealism,assessment,total"


def gram(features):
    """Gram matrix F F^T of an (N, D) feature matrix."""
    return features @ features.T


def masked_gram(features, mask):
    """Gram of column-masked features; mask is length D in [0, 1]."""
    if mask.shape != (features.shape[1],):
        raise ShapeError(
            "mask length must match the feature map size",
            expected=(features.shape[1],),
            got=mask.shape,
        )
    masked = features * mask[None, :]
    return masked @ masked.T


def content_loss(capture_out, capture_ref, weights):
    """Feature matching: sum_l alpha_l / (2 N D) * ||F[O] - F[I]||^2.

    Returns the weighted scalar, per-layer feature gradients, and the
    per-layer weighted values.
    """
    total = 0.0
    grads = {}
    per_layer = {}
    for layer, alpha in weights.items():
        if alpha == 0:
            continue
        f_out = capture_out[layer]
        f_ref = capture_ref[layer]
        if f_out.shape != f_ref.shape:
            raise ShapeError(
                f"content features at {layer} disagree",
                expected=f_ref.shape,
                got=f_out.shape,
            )
        n, d = f_out.shape
        diff = f_out - f_ref
        value = alpha * float(np.sum(diff * diff)) / (2.0 * n * d)
        per_layer[layer] = value
        total += value
        grads[layer] = (alpha / (n * d)) * diff
    return total, grads, per_layer


def augmented_style_loss(capture_out, capture_style, pyramid_content, pyramid_style,
                         weights, gamma=1.0):
    """Per-class Gram matching: Gamma * sum_l beta_l * sum_c ||G_c[O]-G_c[S]||^2 / (2 N^2).

    Output-side features are masked by the content image's pyramid,
    style-side features by the style image's own pyramid. Both pyramids
    must carry the identical class table produced by semantic grouping.
    """
    if pyramid_content.classes != pyramid_style.classes:
        raise ClassTableMismatchError(
            "mask pyramids carry different class tables; run semantic grouping first"
        )
    n_classes = None
    total = 0.0
    grads = {}
    per_layer = {}
    for layer, beta in weights.items():
        if beta == 0:
            continue
        f_out = capture_out[layer]
        f_sty = capture_style[layer]
        n = f_out.shape[0]
        if f_sty.shape[0] != n:
            raise ShapeError(
                f"style features at {layer} have a different map count",
                expected=n,
                got=f_sty.shape[0],
            )
        masks_out = pyramid_content.levels[layer].reshape(
            pyramid_content.levels[layer].shape[0], -1
        )
        masks_sty = pyramid_style.levels[layer].reshape(
            pyramid_style.levels[layer].shape[0], -1
        )
        if masks_out.shape[1] != f_out.shape[1]:
            raise ShapeError(
                f"content mask grid at {layer} does not match the features",
                expected=f_out.shape[1],
                got=masks_out.shape[1],
            )
        n_classes = masks_out.shape[0]
        layer_value = 0.0
        layer_grad = np.zeros_like(f_out)
        for c in range(n_classes):
            m_out = masks_out[c].astype(f_out.dtype)
            m_sty = masks_sty[c].astype(f_sty.dtype)
            masked_out = f_out * m_out[None, :]
            g_out = masked_out @ masked_out.T
            g_sty = masked_gram(f_sty, m_sty)
            diff = g_out - g_sty
            layer_value += float(np.sum(diff * diff)) / (2.0 * n * n)
            layer_grad += (2.0 / (n * n)) * (diff @ masked_out) * m_out[None, :]
        weighted = gamma * beta * layer_value
        per_layer[layer] = weighted
        total += weighted
        grads[layer] = gamma * beta * layer_grad
    return total, grads, per_layer


def assessment_loss(scorer, image):
    """Distance from the best possible rating: 10 - score(image)."""
    try:
        mean, grad = scorer.score(image)
    except PhotostyleError:
        raise
    except Exception as exc:
        raise PhotostyleError(f"assessment scorer failed: {exc}") from exc
    if not 1.0 <= mean <= 10.0:
        raise PhotostyleError(f"scorer mean {mean} outside [1, 10]")
    if np.asarray(grad).shape != np.asarray(image).shape:
        raise ShapeError(
            "scorer gradient shape mismatch",
            expected=np.asarray(image).shape,
            got=np.asarray(grad).shape,
        )
    return 10.0 - mean, -np.asarray(grad)


def mean_rating(histogram):
    """Mean of a rating histogram over the scores 1..10."""
    hist = np.asarray(histogram, dtype=np.float64)
    if hist.ndim != 1 or hist.shape[0] != 10:
        raise ShapeError("rating histogram must have 10 bins", got=hist.shape)
    hist = hist / hist.sum()
    return float(np.arange(1, 11) @ hist)


class FixedScorer:
    """Constant rating with zero gradient; for tests and ablations."""

    def __init__(self, mean=None, histogram=None):
        if histogram is not None:
            mean = mean_rating(histogram)
        self.mean = float(mean)

    def score(self, image):
        return self.mean, np.zeros_like(np.asarray(image))


class ToyScorer:
    """Differentiable stand-in for a learned aesthetics model.

    Builds a soft rating histogram centered on a contrast statistic:
    low-variance images rate poorly, moderate contrast rates well. Only
    exercises the assessment plumbing; it is not a quality model.
    """

    def __init__(self, pivot=0.05, gain=30.0, width=2.0):
        self.pivot = pivot
        self.gain = gain
        self.width = width

    def histogram(self, image):
        mu = self._center(np.asarray(image, dtype=np.float64))[0]
        logits = -((np.arange(1, 11) - mu) ** 2) / (2.0 * self.width**2)
        p = np.exp(logits - logits.max())
        return p / p.sum()

    def _center(self, x):
        m = x.mean()
        v = float(((x - m) ** 2).mean())
        z = self.gain * (v - self.pivot)
        sig = 1.0 / (1.0 + np.exp(-z))
        mu = 1.0 + 9.0 * sig
        dmu_dv = 9.0 * sig * (1.0 - sig) * self.gain
        return mu, dmu_dv, m

    def score(self, image):
        x = np.asarray(image, dtype=np.float64)
        mu, dmu_dv, m = self._center(x)
        ratings = np.arange(1, 11, dtype=np.float64)
        logits = -((ratings - mu) ** 2) / (2.0 * self.width**2)
        p = np.exp(logits - logits.max())
        p /= p.sum()
        mean = float(ratings @ p)

        # d mean / d mu through the softmax: covariance of rating and dlogit
        dlogits = (ratings - mu) / self.width**2
        dmean_dmu = float(ratings @ (p * dlogits) - mean * (p @ dlogits))
        dv_dx = 2.0 * (x - m) / x.size
        grad = dmean_dmu * dmu_dv * dv_dx
        return mean, grad.astype(np.asarray(image).dtype, copy=False)


@dataclass
class Precomputed:
    """Everything the objective needs that does not change per iteration."""

    model: object
    content_capture: vgg.FeatureCapture
    style_capture: vgg.FeatureCapture
    pyramid_content: object
    pyramid_style: object
    laplacian: object = None
    scorer: object = None


def _term(name, fn):
    try:
        return fn()
    except PhotostyleError as exc:
        raise PhotostyleError(f"{name} term: {exc}") from exc


def total_loss(image, pre, config):
    """Evaluate the full objective and its gradient w.r.t. the raw image.

    ``image`` is (H, W, 3) in [0, 1]; the gradient has the same shape.
    """
    image = np.asarray(image)
    x = vgg.preprocess(pre.model, image)
    tape = []
    layers = config.layers()
    if layers:
        capture = vgg.forward(pre.model, x, layers, tape=tape)
    else:
        capture = vgg.FeatureCapture({}, {})

    c_value, c_grads, c_layers = _term(
        "content", lambda: content_loss(capture, pre.content_capture, config.content_weights)
    )
    s_value, s_grads, s_layers = _term(
        "style",
        lambda: augmented_style_loss(
            capture,
            pre.style_capture,
            pre.pyramid_content,
            pre.pyramid_style,
            config.style_weights,
            config.gamma,
        ),
    )

    merged = dict(c_grads)
    for layer, g in s_grads.items():
        merged[layer] = merged[layer] + g if layer in merged else g
    grad_pre = vgg.backward_from_tape(tape, x.shape, x.dtype, merged)
    # chain through preprocessing: d(preprocessed)/d(raw pixel) = 255
    grad = grad_pre.transpose(1, 2, 0) * 255.0

    m_value = 0.0
    if config.photorealism_weight > 0:
        if pre.laplacian is None:
            raise PhotostyleError("photorealism term: no matting Laplacian prepared")
        m_value = _term("photorealism", lambda: matting.affine_loss(pre.laplacian, image))
        grad = grad + config.photorealism_weight * matting.affine_loss_grad(
            pre.laplacian, image
        )
    m_value *= config.photorealism_weight

    a_value = 0.0
    if config.assessment_weight > 0:
        if pre.scorer is None:
            raise PhotostyleError("assessment term: no scorer attached")
        a_raw, a_grad = _term("assessment", lambda: assessment_loss(pre.scorer, image))
        a_value = config.assessment_weight * a_raw
        grad = grad + config.assessment_weight * a_grad

    report = LossReport(
        content=c_value,
        style=s_value,
        photorealism=m_value,
        assessment=a_value,
        total=c_value + s_value + m_value + a_value,
        content_layers=c_layers,
        style_layers=s_layers,
    )
    return report, grad.astype(image.dtype, copy=False)
