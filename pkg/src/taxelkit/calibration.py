"""Per-taxel flux-to-force calibration.

Each taxel gets an independent second-order least-squares fit with no bias
term, so zero flux always maps to zero force. The feature basis is the nine
degree-2 monomials of (bx, by, bz) excluding the constant.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .geometry import ForceVector
from .magnetics import FluxSample

N_FEATURES = 9
FEATURE_NAMES = ["bx", "by", "bz", "bx^2", "by^2", "bz^2", "bx*by", "bx*bz", "by*bz"]

# Conditioning threshold above which the normal-equation solve falls back
# to a rank-revealing least-squares solve.
COND_LIMIT = 1e12


class DegenerateFitError(ValueError):
    """Feature matrix is rank-deficient; carries the unidentifiable directions."""

    def __init__(self, null_directions: np.ndarray):
        self.null_directions = null_directions
        named = "; ".join(
            " + ".join(f"{v:+.3f}*{n}" for v, n in zip(vec, FEATURE_NAMES) if abs(v) > 1e-6)
            for vec in null_directions
        )
        super().__init__(f"degenerate calibration fit, unidentifiable feature directions: {named}")


@dataclass(frozen=True)
class CalibrationSample:
    flux: FluxSample
    force: ForceVector


@dataclass(frozen=True)
class CalibrationModel:
    """3x9 coefficient matrix; rows (fx, fy, fz), columns the feature basis."""

    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != (3, N_FEATURES):
            raise ValueError(f"coeffs must be 3x{N_FEATURES}, got {self.coeffs.shape}")

    def to_json_dict(self, taxel_index: int) -> dict:
        return {"taxel_index": taxel_index, "coeffs": self.coeffs.ravel().tolist()}

    @classmethod
    def from_json_dict(cls, d: dict) -> "CalibrationModel":
        return cls(coeffs=np.asarray(d["coeffs"], dtype=float).reshape(3, N_FEATURES))


def quadratic_features(b: FluxSample | np.ndarray) -> np.ndarray:
    """[bx, by, bz, bx^2, by^2, bz^2, bx*by, bx*bz, by*bz]."""
    bx, by, bz = b.as_array() if isinstance(b, FluxSample) else np.asarray(b, dtype=float)
    return np.array([bx, by, bz, bx * bx, by * by, bz * bz, bx * by, bx * bz, by * bz])


def _feature_matrix(samples: list[CalibrationSample]) -> tuple[np.ndarray, np.ndarray]:
    A = np.stack([quadratic_features(s.flux) for s in samples])
    F = np.stack([s.force.as_array() for s in samples])
    return A, F


def fit_taxel(samples: list[CalibrationSample]) -> CalibrationModel:
    """Ordinary least squares per output axis, no intercept.

    Raises DegenerateFitError when the feature matrix is rank-deficient.
    """
    if len(samples) < N_FEATURES:
        raise ValueError(f"need at least {N_FEATURES} samples, got {len(samples)}")
    A, F = _feature_matrix(samples)
    svals = np.linalg.svd(A, compute_uv=False)
    if svals[-1] <= svals[0] * 1e-10:
        _, _, vt = np.linalg.svd(A)
        null = vt[np.sum(svals > svals[0] * 1e-10):]
        raise DegenerateFitError(null)
    gram = A.T @ A
    if np.linalg.cond(gram) < COND_LIMIT:
        coeffs = np.linalg.solve(gram, A.T @ F).T
    else:
        coeffs = np.linalg.lstsq(A, F, rcond=None)[0].T
    return CalibrationModel(coeffs=coeffs)


def predict_force(model: CalibrationModel, b: FluxSample | np.ndarray) -> ForceVector:
    fx, fy, fz = model.coeffs @ quadratic_features(b)
    return ForceVector(float(fx), float(fy), float(fz))


def rms_error(model: CalibrationModel, samples: list[CalibrationSample]) -> tuple[float, float, float]:
    """Per-axis RMS of predicted minus ground-truth force, N."""
    if not samples:
        raise ValueError("rms_error needs at least one sample")
    A, F = _feature_matrix(samples)
    residuals = A @ model.coeffs.T - F
    rms = np.sqrt(np.mean(residuals**2, axis=0))
    return (float(rms[0]), float(rms[1]), float(rms[2]))


def save_models(models: dict[int, CalibrationModel], path) -> None:
    payload = [models[i].to_json_dict(i) for i in sorted(models)]
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)


def load_models(path) -> dict[int, CalibrationModel]:
    with open(path) as fh:
        payload = json.load(fh)
    return {d["taxel_index"]: CalibrationModel.from_json_dict(d) for d in payload}
