"""Central finite-difference oracle shared by the gradient tests."""
import numpy as np

from gmtraj import nn


def numeric_grad(f, arrays, h=1e-6):
    """d f / d arrays[k] by central differences; ``f`` maps a list of arrays to a float."""
    out = []
    for k, a in enumerate(arrays):
        g = np.zeros_like(a)
        it = np.nditer(a, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = a[idx]
            a[idx] = orig + h
            fp = f(arrays)
            a[idx] = orig - h
            fm = f(arrays)
            a[idx] = orig
            g[idx] = (fp - fm) / (2 * h)
        out.append(g)
    return out


def rel_error(a, b):
    a, b = np.ravel(a), np.ravel(b)
    scale = max(np.linalg.norm(a) + np.linalg.norm(b), 1e-8)
    return float(np.linalg.norm(a - b) / scale)


def check(build, arrays, h=1e-6):
    """Max relative error between tape gradients and finite differences.

    ``build`` maps a list of Tensors to a scalar Tensor.
    """
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    tensors = [nn.Tensor(a.copy(), requires_grad=True) for a in arrays]
    analytic = nn.grad(build(tensors), tensors)
    numeric = numeric_grad(lambda arrs: float(build([nn.Tensor(x) for x in arrs]).data), arrays, h)
    return max(rel_error(a, n) for a, n in zip(analytic, numeric))
