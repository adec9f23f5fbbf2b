import numpy as np
import pytest


def jiggle_biases(obj, rng, scale=0.05):
    """Move bias vectors off their zero init so ReLU inputs avoid exact
    zeros, where the subgradient convention and central differences
    legitimately disagree. Gradchecks must run at a generic point."""
    if hasattr(obj, "parameters"):
        params = obj.parameters()
    else:
        params = list(obj.params.items())
    for _, arr in params:
        if arr.ndim == 1:
            arr += rng.normal(0.0, scale, arr.shape)


def finite_difference_gradcheck(net, x, y, eps=1e-5):
    """Max relative error between analytic and central-difference gradients.

    The per-element denominator floors at 1e-6*(1+max|g|) so that
    mathematically-zero gradients (whose FD estimate is pure rounding noise)
    do not dominate the ratio.
    """
    net.loss_and_grads(x, y)
    analytic = {name: g.copy() for name, g in net.gradients()}
    gmax = max(np.max(np.abs(g)) for g in analytic.values())
    floor = 1e-6 * (1.0 + gmax)
    worst = 0.0
    for name, p in net.parameters():
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + eps
            lp, _ = net.loss_and_grads(x, y)
            p[idx] = orig - eps
            lm, _ = net.loss_and_grads(x, y)
            p[idx] = orig
            fd = (lp - lm) / (2 * eps)
            a = analytic[name][idx]
            worst = max(worst, abs(a - fd) / max(abs(a), abs(fd), floor))
    return worst


def layer_gradcheck(layer, x, eps=1e-6, rng=None):
    """Gradcheck one layer through the linear functional L = sum(out * R).

    Returns (worst_param_rel_err, worst_input_rel_err).
    """
    rng = rng or np.random.default_rng(0)
    out = layer.forward(x)
    R = rng.normal(size=out.shape)

    layer.zero_grads()
    layer.forward(x)
    dx = layer.backward(R)
    analytic = {k: g.copy() for k, g in layer.grads.items()}

    def loss():
        return float(np.sum(layer.forward(x) * R))

    gmax = 1.0
    if analytic:
        gmax += max(np.max(np.abs(g)) for g in analytic.values())
    floor = 1e-6 * gmax

    worst_p = 0.0
    for key, p in layer.params.items():
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + eps
            lp = loss()
            p[idx] = orig - eps
            lm = loss()
            p[idx] = orig
            fd = (lp - lm) / (2 * eps)
            a = analytic[key][idx]
            worst_p = max(worst_p, abs(a - fd) / max(abs(a), abs(fd), floor))

    worst_x = 0.0
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + eps
        lp = loss()
        x[idx] = orig - eps
        lm = loss()
        x[idx] = orig
        fd = (lp - lm) / (2 * eps)
        a = dx[idx]
        worst_x = max(worst_x, abs(a - fd) / max(abs(a), abs(fd), floor))
    return worst_p, worst_x


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
