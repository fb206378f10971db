"""Versioned JSON persistence for fitted models.

The training trajectories are stored alongside the spectral data because
evaluating eigenfunctions at a new initial condition integrates the kernel
along every training trajectory. Complex numbers are ``[re, im]`` pairs.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .decomposition import SodmdModel
from .errors import FormatError
from .kernels import KernelSpec
from .quadrature import TimeGrid, make_rule

FORMAT_VERSION = 1


def _pairs(a):
    a = np.asarray(a, dtype=complex)
    if a.ndim == 1:
        return [[float(z.real), float(z.imag)] for z in a]
    return [_pairs(row) for row in a]


def _complex(x):
    a = np.asarray(x, dtype=float)
    if a.shape[-1:] != (2,):
        raise ValueError("complex entries must be [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]


def _finite_or_none(x):
    x = float(x)
    return x if math.isfinite(x) else None


def to_dict(model: SodmdModel) -> dict:
    grid = model.rule.grid
    diag = model.diagnostics
    return {
        "format_version": FORMAT_VERSION,
        "kernel": model.kernel.to_dict(),
        "grid": {"dt": grid.dt, "count": grid.count},
        "quadrature": model.rule.method.value,
        "ridge": float(model.ridge),
        "eigenvalues": _pairs(model.eigenvalues),
        "coeffs": _pairs(model.coeffs),
        "modes": _pairs(model.modes),
        "training_samples": np.asarray(model.training_samples, dtype=float).tolist(),
        "training_iv": np.asarray(model.training_iv, dtype=float).tolist(),
        "diagnostics": {
            "gram_condition": _finite_or_none(diag.get("gram_condition", float("nan"))),
            "gram_rank": int(diag.get("gram_rank", len(model.training_samples))),
            "projection_error": _finite_or_none(diag.get("projection_error", float("nan"))),
        },
    }


def from_dict(d: dict) -> SodmdModel:
    try:
        version = d["format_version"]
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported model format_version {version}")
        kernel = KernelSpec.from_dict(d["kernel"])
        grid = TimeGrid(d["grid"]["dt"], d["grid"]["count"])
        rule = make_rule(grid, 2, d.get("quadrature", "trapezoid"))
        samples = np.array(d["training_samples"], dtype=float)
        iv = np.array(d["training_iv"], dtype=float)
        eigenvalues = _complex(d["eigenvalues"]) if d["eigenvalues"] else np.zeros(0, complex)
        M = samples.shape[0]
        coeffs = _complex(d["coeffs"]) if d["coeffs"] else np.zeros((0, M), complex)
        modes = _complex(d["modes"]) if d["modes"] else np.zeros((kernel.dim, 0), complex)
        diagnostics = {
            k: (float("inf") if v is None and k == "gram_condition" else v)
            for k, v in d.get("diagnostics", {}).items()
        }
        ridge = float(d["ridge"])
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed model file: {exc}") from None
    R = len(eigenvalues)
    if samples.ndim != 3 or samples.shape[1] != grid.count or samples.shape[2] != kernel.dim:
        raise FormatError(f"training_samples shape {samples.shape} inconsistent with grid/kernel")
    if iv.shape != (M, kernel.dim):
        raise FormatError(f"training_iv shape {iv.shape}, expected {(M, kernel.dim)}")
    if coeffs.shape != (R, M) or modes.shape != (kernel.dim, R):
        raise FormatError("coeffs/modes shapes inconsistent with eigenvalue count")
    return SodmdModel(kernel, rule, samples, iv, eigenvalues, coeffs, modes, ridge, diagnostics)


def dumps(model: SodmdModel) -> str:
    return json.dumps(to_dict(model), allow_nan=False) + "\n"


def loads(text: str) -> SodmdModel:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    return from_dict(d)


def save_model(model: SodmdModel, path) -> None:
    Path(path).write_text(dumps(model), encoding="utf-8", newline="\n")


def load_model(path) -> SodmdModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot read model: {exc}", path=path) from None
    return loads(text)
