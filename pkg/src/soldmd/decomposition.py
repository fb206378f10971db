"""Second-order Liouville DMD with occupation kernels.

Given trajectories ``gamma_i`` of an unknown system ``x'' = f(x)`` sampled on
a common grid over ``[0, T]``, the fit assembles

    G[i, j] = int int (T - t)(T - s) K(gamma_i(t), gamma_j(s)) dt ds
    A[i, j] = int (T - t) [ K(gamma_i(T), gamma_j(t)) - K(gamma_i(0), gamma_j(t))
                            - T grad_2 K(gamma_j(t), gamma_i(0)) . gamma_i'(0) ] dt

solves ``G X = A``, eigendecomposes ``X`` and projects the identity
observable onto the resulting eigenfunctions. Only endpoint values, one
initial velocity per trajectory and kernel gradients enter; the
trajectories themselves are never differentiated.

Predictions use the closed form for ``phi'' = lambda phi``::

    x(t) = Re sum_m xi_m [phi_m(0) cosh(s_m t) + dphi_m(0) sinh(s_m t) / s_m],
    s_m = sqrt(lambda_m)

which is the two-exponential expansion written with hyperbolic functions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DegenerateDataError, InputError, NumericalError
from .kernels import KernelSpec
from .quadrature import QuadratureRule, make_rule
from .signals import Dataset, Trajectory

log = logging.getLogger(__name__)

COND_LIMIT = 1e15
PINV_RCOND = 1e-12
RANK_TOL = 1e-8
DROP_TOL = 1e-12
DUPLICATE_TOL = 1e-12
LAMBDA_EPS = 1e-10
IMAG_WARN = 1e-3


def _check_rule(rule: QuadratureRule, grid):
    if rule.order != 2:
        raise InputError(f"second-order occupation kernels need an order-2 rule, got {rule.order}")
    if not rule.grid.matches(grid):
        raise InputError(f"quadrature grid {rule.grid} does not match data grid {grid}")


def _stack(dataset):
    if isinstance(dataset, Trajectory):
        dataset = Dataset((dataset,))
    return dataset, dataset.samples()


# ---------------------------------------------------------------- assembly


def occupation_eval(kernel: KernelSpec, rule: QuadratureRule, gamma: Trajectory, point) -> float:
    """Value of the occupation kernel of `gamma` at a state `point`."""
    _check_rule(rule, gamma.grid)
    point = np.asarray(point, dtype=float)
    return float(kernels.matrix(kernel, point, gamma.samples)[0] @ rule.order_weights)


def occupation_matrix(kernel, rule, samples, points) -> np.ndarray:
    """``Y[p, i]``: occupation kernel of trajectory ``i`` evaluated at ``points[p]``.

    `samples` has shape ``(M, count, n)``.
    """
    M, count, n = samples.shape
    K = kernels.matrix(kernel, points, samples.reshape(M * count, n))
    return K.reshape(len(K), M, count) @ rule.order_weights


def occupation_grad_matrix(kernel, rule, samples, points, directions) -> np.ndarray:
    """``D[p, i]``: derivative of occupation kernel ``i`` at ``points[p]`` along ``directions[p]``."""
    M, count, n = samples.shape
    points = np.atleast_2d(np.asarray(points, dtype=float))
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    # grad_1 K(x, y) . v == grad_2 K(y, x) . v
    D = kernels.grad2_dot_matrix(kernel, samples.reshape(M * count, n), points, directions)
    return (D.T.reshape(len(points), M, count)) @ rule.order_weights


def gram(kernel: KernelSpec, rule: QuadratureRule, dataset) -> np.ndarray:
    dataset, S = _stack(dataset)
    _check_rule(rule, dataset.grid)
    M, count, n = S.shape
    w = rule.order_weights
    flat = S.reshape(M * count, n)
    G = np.zeros((M, M))
    for i in range(M):
        block = kernels.matrix(kernel, S[i], flat[i * count:])
        G[i, i:] = np.einsum("s,smt,t->m", w, block.reshape(count, M - i, count), w)
    return np.triu(G) + np.triu(G, 1).T


def interaction(kernel: KernelSpec, rule: QuadratureRule, dataset) -> np.ndarray:
    dataset, S = _stack(dataset)
    _check_rule(rule, dataset.grid)
    V = dataset.velocities()
    T = rule.grid.T
    end = occupation_matrix(kernel, rule, S, S[:, -1, :])
    start = occupation_matrix(kernel, rule, S, S[:, 0, :])
    slope = occupation_grad_matrix(kernel, rule, S, S[:, 0, :], V)
    return end - start - T * slope


def identity_projections(rule: QuadratureRule, samples) -> np.ndarray:
    """``V[k, j]``: weighted integral of coordinate ``k`` along trajectory ``j``."""
    return (np.swapaxes(samples, 1, 2) @ rule.order_weights).T


# ------------------------------------------------------------------ solves


@dataclass
class SolveInfo:
    ridge: float
    condition: float
    rank: int
    truncated: bool


def default_ridge(G) -> float:
    return 1e-8 * float(np.trace(G)) / len(G)


def duplicate_pairs(G, tol=DUPLICATE_TOL):
    """Index pairs whose occupation kernels coincide, from ``|Gi - Gj|^2``."""
    d = np.diag(G)
    pairs = []
    for i in range(len(G)):
        for j in range(i + 1, len(G)):
            scale = max(d[i], d[j])
            if scale > 0 and d[i] + d[j] - 2.0 * G[i, j] <= tol * scale:
                pairs.append((i, j))
    return pairs


def gram_basis(G, ridge=0.0, rank_tol=None):
    """Retained spectral basis of ``G + ridge I``; returns ``(U, evals, SolveInfo)``.

    With ``rank_tol=None`` every direction is kept unless the condition
    number exceeds ``COND_LIMIT``, in which case directions below
    ``PINV_RCOND`` (relative) are dropped. A float ``rank_tol`` always drops
    directions below ``rank_tol`` times the largest eigenvalue.
    """
    G = np.asarray(G, dtype=float)
    evals, U = np.linalg.eigh(G + ridge * np.eye(len(G)))
    top = max(evals[-1], np.finfo(float).tiny)
    cond = np.inf if evals[0] <= 0 else evals[-1] / evals[0]
    if rank_tol is None:
        tol = 0.0 if cond <= COND_LIMIT else PINV_RCOND
    else:
        tol = float(rank_tol)
    keep = evals > tol * top
    info = SolveInfo(ridge, float(cond), int(keep.sum()), not bool(keep.all()))
    return U[:, keep], evals[keep], info


def _prepare(G, A, ridge):
    G = np.asarray(G, dtype=float)
    A = np.asarray(A, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1] or A.shape != G.shape:
        raise InputError(f"Gram {G.shape} and interaction {A.shape} must be equal square matrices")
    if not (np.all(np.isfinite(G)) and np.all(np.isfinite(A))):
        raise NumericalError("non-finite entries in Gram or interaction matrix")
    if ridge is None:
        ridge = default_ridge(G)
    ridge = float(ridge)
    if ridge < 0:
        raise InputError(f"ridge must be nonnegative, got {ridge}")
    pairs = duplicate_pairs(G)
    if pairs:
        names = ", ".join(f"{i}~{j}" for i, j in pairs)
        raise DegenerateDataError(
            f"singular Gram matrix: near-duplicate trajectories {names}", pairs
        )
    return G, A, ridge


def finite_rank(G, A, ridge=None, rank_tol=None, return_info=False):
    """Matrix of the projected operator on the occupation-kernel span.

    Solves ``(G + ridge I) X = A``; ``ridge=None`` uses ``1e-8 trace(G) / M``.
    Numerically singular systems are solved on the retained spectral
    subspace of the Gram matrix (see `gram_basis`). Coinciding trajectories
    raise `DegenerateDataError`.
    """
    G, A, ridge = _prepare(G, A, ridge)
    U, ev, info = gram_basis(G, ridge, rank_tol)
    if info.truncated:
        log.info("Gram matrix truncated to rank %d (cond %.3g)", info.rank, info.condition)
        X = (U / ev) @ (U.T @ A)
    else:
        X = np.linalg.solve(G + ridge * np.eye(len(G)), A)
    return (X, info) if return_info else X


def eigendecompose(matrix):
    """General eigendecomposition sorted by descending ``|lambda|``, then descending imaginary part."""
    X = np.asarray(matrix, dtype=float)
    if not np.all(np.isfinite(X)):
        raise InputError("matrix has non-finite entries")
    try:
        vals, vecs = np.linalg.eig(X)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition did not converge: {exc}") from exc
    if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(vecs))):
        raise NumericalError("eigendecomposition produced non-finite values")
    vals = vals.astype(complex)
    vecs = vecs.astype(complex)
    scale = max(np.abs(vals).max(initial=0.0), 1e-300)
    # round magnitudes so conjugate pairs tie exactly
    mag = np.round(np.abs(vals) / scale, 12)
    order = np.lexsort((-vals.imag, -mag))
    return vals[order], vecs[:, order]


# ------------------------------------------------------------------- model


@dataclass(frozen=True, eq=False)
class SodmdModel:
    kernel: KernelSpec
    rule: QuadratureRule
    training_samples: np.ndarray
    training_iv: np.ndarray
    eigenvalues: np.ndarray
    coeffs: np.ndarray
    modes: np.ndarray
    ridge: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def T(self) -> float:
        return self.rule.grid.T

    @property
    def dim(self) -> int:
        return self.training_samples.shape[2]

    @property
    def rank(self) -> int:
        return len(self.eigenvalues)


def _normalize(vecs, G):
    norms = np.einsum("im,ij,jm->m", vecs, G, vecs)
    keep = np.abs(norms) >= DROP_TOL * np.linalg.norm(G, 2)
    coeffs = (vecs[:, keep] / np.sqrt(norms[keep])).T
    return coeffs, keep


def _modes(coeffs, G, V):
    # xi (W G) = V, least squares when modes were dropped
    P = coeffs @ G
    if P.shape[0] == P.shape[1]:
        try:
            cond = np.linalg.cond(P)
        except np.linalg.LinAlgError:
            cond = np.inf
        if cond < COND_LIMIT:
            return np.linalg.solve(P.T, V.T.astype(complex)).T
    return np.linalg.lstsq(P.T, V.T.astype(complex), rcond=None)[0].T


def fit(dataset, kernel: KernelSpec, method="trapezoid", ridge=None, rank_tol=RANK_TOL) -> SodmdModel:
    """Fit a second-order Liouville DMD model.

    Trajectories without a stored initial velocity get one from
    `signals.estimate_initial_velocity`. ``ridge=None`` selects the default
    Tikhonov shift ``1e-8 trace(G) / M``. Gram directions weaker than
    ``rank_tol`` times the strongest are discarded before the
    eigendecomposition; pass ``rank_tol=None`` to keep all of them unless
    the Gram matrix is numerically singular.
    """
    if isinstance(dataset, Trajectory):
        dataset = Dataset((dataset,))
    if kernel.dim != dataset.dim:
        raise InputError(f"kernel dimension {kernel.dim} != data dimension {dataset.dim}")
    dataset = dataset.with_estimated_velocities()
    rule = make_rule(dataset.grid, 2, method)
    S = dataset.samples()
    G = gram(kernel, rule, dataset)
    A = interaction(kernel, rule, dataset)
    G, A, ridge = _prepare(G, A, ridge)
    U, ev, info = gram_basis(G, ridge, rank_tol)
    # eigenproblem of G^-1 A restricted to the retained subspace
    vals, small = eigendecompose((U.T @ A @ U) / ev[:, None])
    vecs = U @ small
    coeffs, keep = _normalize(vecs, G)
    V = identity_projections(rule, S)
    modes = _modes(coeffs, G, V)
    residual = np.linalg.norm(modes @ coeffs @ G - V) / max(np.linalg.norm(V), 1e-300)
    diagnostics = {
        "gram_condition": info.condition,
        "gram_rank": info.rank,
        "dropped_eigenvalues": [complex(v) for v in vals[~keep]],
        "mode_residual": float(residual),
    }
    model = SodmdModel(
        kernel, rule, S, dataset.velocities(), vals[keep], coeffs, modes, ridge, diagnostics
    )
    diagnostics["projection_error"] = projection_error(model)
    return model


# ------------------------------------------------------------- evaluation


def eigenfunctions_at(model: SodmdModel, x0, v0):
    """All eigenfunction values and directional derivatives at ``(x0, v0)``.

    Returns ``(phi0, dphi0)``, each of length ``model.rank``.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    v0 = np.asarray(v0, dtype=float).reshape(-1)
    n = model.dim
    if x0.shape[0] != n or v0.shape[0] != n:
        raise InputError(f"initial conditions must have length {n}")
    occ = occupation_matrix(model.kernel, model.rule, model.training_samples, x0[None, :])[0]
    docc = occupation_grad_matrix(
        model.kernel, model.rule, model.training_samples, x0[None, :], v0[None, :]
    )[0]
    return model.coeffs @ occ, model.coeffs @ docc


def eigenfunction_at(model: SodmdModel, m: int, x0, v0):
    if not 0 <= m < model.rank:
        raise InputError(f"mode index {m} out of range [0, {model.rank})")
    phi0, dphi0 = eigenfunctions_at(model, x0, v0)
    return complex(phi0[m]), complex(dphi0[m])


@dataclass(frozen=True)
class ReconstructionRequest:
    x0: np.ndarray
    v0: np.ndarray
    times: np.ndarray

    def __post_init__(self):
        for name in ("x0", "v0", "times"):
            a = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if not np.all(np.isfinite(a)):
                raise InputError(f"{name} must be finite")
            object.__setattr__(self, name, a)
        if np.any(self.times < 0):
            raise InputError("reconstruction times must be nonnegative")


@dataclass(frozen=True, eq=False)
class Reconstruction:
    times: np.ndarray
    states: np.ndarray
    imag_residual: float

    @property
    def ill_conditioned(self) -> bool:
        return self.imag_residual > IMAG_WARN


def modal_response(eigenvalues, phi0, dphi0, times, eps=LAMBDA_EPS):
    """``c[t, m] = phi0_m cosh(s_m t) + dphi0_m sinh(s_m t) / s_m``.

    The ``lambda -> 0`` limit ``phi0 + dphi0 t`` is used when ``|lambda| < eps``.
    """
    lam = np.asarray(eigenvalues, dtype=complex)
    t = np.asarray(times, dtype=float)[:, None]
    small = np.abs(lam) < eps
    s = np.sqrt(np.where(small, 1.0, lam))
    with np.errstate(over="ignore", invalid="ignore"):
        ch = np.cosh(s * t)
        sh = np.sinh(s * t) / s
    ch = np.where(small, 1.0, ch)
    sh = np.where(small, t, sh)
    return phi0 * ch + dphi0 * sh


def synthesize(coefficients, modes) -> np.ndarray:
    """``x[t] = sum_m modes[:, m] c[t, m]``, row by row.

    A plain loop kernel keeps each row independent of how many rows are
    requested, so a multi-row call reproduces single-row results bit for bit.
    """
    return np.einsum("tm,km->tk", np.atleast_2d(coefficients), modes, optimize=False)


def reconstruct(model: SodmdModel, request: ReconstructionRequest, eps=LAMBDA_EPS) -> Reconstruction:
    phi0, dphi0 = eigenfunctions_at(model, request.x0, request.v0)
    c = modal_response(model.eigenvalues, phi0, dphi0, request.times, eps)
    x = synthesize(c, model.modes)
    real = x.real
    scale = np.max(np.abs(real), initial=0.0)
    imag = np.max(np.abs(x.imag), initial=0.0)
    residual = imag / scale if scale > 0 else (0.0 if imag == 0 else np.inf)
    if residual > IMAG_WARN:
        log.warning("reconstruction imaginary residual %.3g exceeds %.0e", residual, IMAG_WARN)
    return Reconstruction(request.times, real, float(residual))


def projection_error(model: SodmdModel) -> float:
    """Worst relative error of the t = 0 prediction over the training set."""
    S = model.training_samples
    scale = np.max(np.abs(S))
    if scale == 0:
        return 0.0
    worst = 0.0
    for x0, v0 in zip(S[:, 0, :], model.training_iv):
        phi0, _ = eigenfunctions_at(model, x0, v0)
        worst = max(worst, float(np.max(np.abs(synthesize(phi0, model.modes)[0].real - x0))))
    return worst / scale


def reconstruct_trajectory(model: SodmdModel, x0, v0, times) -> np.ndarray:
    return reconstruct(model, ReconstructionRequest(x0, v0, times)).states
