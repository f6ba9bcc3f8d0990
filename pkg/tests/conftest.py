"""Shared fixtures and the finite-difference gradient harness."""

import numpy as np
import pytest

from photostyle import vgg
from photostyle.tensor_ops import ConvSpec

VGG_MEAN = np.array([123.68, 116.779, 103.939], dtype=np.float32)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_random_model(seed=7):
    """Full VGG19 architecture with He-initialized random weights."""
    gen = np.random.default_rng(seed)
    specs = {}
    for name, cin, cout in vgg.CONV_LAYERS:
        scale = np.sqrt(2.0 / (cin * 9))
        kernel = (gen.standard_normal((cout, cin, 3, 3)) * scale).astype(np.float32)
        bias = gen.uniform(-0.05, 0.05, cout).astype(np.float32)
        specs[name] = ConvSpec(kernel, bias)
    return vgg.VggModel(specs, VGG_MEAN.copy())


@pytest.fixture(scope="session")
def vgg_model():
    return make_random_model()


@pytest.fixture(scope="session")
def vgg_file(vgg_model, tmp_path_factory):
    path = tmp_path_factory.mktemp("weights") / "vgg19_random.vggw"
    vgg.write_weights(path, vgg_model.specs, vgg_model.mean)
    return path


def numerical_grad(f, x, h=1e-4):
    """Centered finite differences of a scalar function, double precision."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def rel_err(got, want):
    """L2 relative error, guarded against a zero reference."""
    got = np.asarray(got, dtype=np.float64)
    want = np.asarray(want, dtype=np.float64)
    denom = max(np.linalg.norm(want), 1e-12)
    return np.linalg.norm(got - want) / denom
