"""Scalar kernels on R^n and their analytic gradients.

Three families are supported::

    gaussian         K(x, y) = exp(-|x - y|^2 / mu)
    linear           K(x, y) = x . y
    exponential      K(x, y) = exp(x . y / mu)

Point-wise functions (`evaluate`, `grad1`, `grad2`) take single vectors.
The ``*_matrix`` variants take row-stacked point sets and are what the
decomposition code uses for assembly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InputError


class Family(str, enum.Enum):
    GAUSSIAN = "gaussian"
    LINEAR = "linear"
    EXPONENTIAL = "exponential"


_ALIASES = {
    "gaussian": Family.GAUSSIAN,
    "rbf": Family.GAUSSIAN,
    "linear": Family.LINEAR,
    "lineardot": Family.LINEAR,
    "exponential": Family.EXPONENTIAL,
    "exponentialdot": Family.EXPONENTIAL,
    "expdot": Family.EXPONENTIAL,
}


def parse_family(name) -> Family:
    if isinstance(name, Family):
        return name
    try:
        return _ALIASES[str(name).strip().lower()]
    except KeyError:
        raise InputError(f"unknown kernel family {name!r}") from None


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family, shape parameter and state dimension.

    ``shape`` is ignored by the linear family but is still stored so a
    serialized model records exactly what was requested.
    """

    family: Family
    shape: float
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "family", parse_family(self.family))
        object.__setattr__(self, "shape", float(self.shape))
        object.__setattr__(self, "dim", int(self.dim))
        if self.dim < 1:
            raise InputError(f"kernel dimension must be positive, got {self.dim}")
        if self.family is not Family.LINEAR and not (self.shape > 0 and np.isfinite(self.shape)):
            raise InputError(f"{self.family.value} kernel needs shape > 0, got {self.shape}")

    def to_dict(self):
        return {"family": self.family.value, "shape": self.shape, "dim": self.dim}

    @classmethod
    def from_dict(cls, d):
        return cls(parse_family(d["family"]), float(d["shape"]), int(d["dim"]))


def default_shape(family, samples) -> float:
    """Data-driven shape parameter for `family` from training samples.

    Gaussian: twice the median pairwise squared distance. Exponential:
    mean |x . y| over distinct pairs. Linear: 1.0 (unused).
    """
    family = parse_family(family)
    if family is Family.LINEAR:
        return 1.0
    pts = np.asarray(samples, dtype=float).reshape(-1, np.shape(samples)[-1])
    if len(pts) < 2:
        return 1.0
    iu = np.triu_indices(len(pts), k=1)
    if family is Family.GAUSSIAN:
        sq = np.sum(pts**2, axis=1)
        d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * pts @ pts.T, 0.0)[iu]
        value = 2.0 * float(np.median(d2))
    else:
        value = float(np.mean(np.abs((pts @ pts.T)[iu])))
    return value if value > 0 else 1.0


def _check(spec, *vecs):
    out = []
    for v in vecs:
        a = np.asarray(v, dtype=float)
        if a.ndim != 1 or a.shape[0] != spec.dim:
            raise InputError(f"expected a vector of length {spec.dim}, got shape {a.shape}")
        out.append(a)
    return out


def evaluate(spec: KernelSpec, x, y) -> float:
    x, y = _check(spec, x, y)
    return float(matrix(spec, x[None, :], y[None, :])[0, 0])


def grad2(spec: KernelSpec, x, y) -> np.ndarray:
    """Gradient of K(x, y) with respect to ``y``."""
    x, y = _check(spec, x, y)
    if spec.family is Family.LINEAR:
        return x.copy()
    k = evaluate(spec, x, y)
    if spec.family is Family.GAUSSIAN:
        return (2.0 / spec.shape) * (x - y) * k
    return (x / spec.shape) * k


def grad1(spec: KernelSpec, x, y) -> np.ndarray:
    """Gradient of K(x, y) with respect to ``x``; equals ``grad2(y, x)``."""
    return grad2(spec, y, x)


def _points(spec, X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != spec.dim:
        raise InputError(f"expected points of dimension {spec.dim}, got shape {X.shape}")
    return X


def matrix(spec: KernelSpec, X, Y) -> np.ndarray:
    """Kernel matrix ``K[p, q] = K(X[p], Y[q])``."""
    X = _points(spec, X)
    Y = _points(spec, Y)
    dots = X @ Y.T
    if spec.family is Family.LINEAR:
        return dots
    if spec.family is Family.EXPONENTIAL:
        return np.exp(dots / spec.shape)
    d2 = np.sum(X**2, axis=1)[:, None] + np.sum(Y**2, axis=1)[None, :] - 2.0 * dots
    return np.exp(-np.maximum(d2, 0.0) / spec.shape)


def grad2_dot_matrix(spec: KernelSpec, X, Y, V) -> np.ndarray:
    """Directional derivatives ``D[p, q] = grad2 K(X[p], Y[q]) . V[q]``.

    ``V`` holds one direction per row of ``Y``.
    """
    X = _points(spec, X)
    Y = _points(spec, Y)
    V = _points(spec, V)
    if V.shape != Y.shape:
        raise InputError(f"direction array shape {V.shape} does not match points {Y.shape}")
    xv = X @ V.T
    if spec.family is Family.LINEAR:
        return xv
    K = matrix(spec, X, Y)
    if spec.family is Family.EXPONENTIAL:
        return xv / spec.shape * K
    yv = np.sum(Y * V, axis=1)
    return (2.0 / spec.shape) * (xv - yv[None, :]) * K
