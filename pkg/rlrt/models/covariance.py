import logging

import numpy as np
import scipy.linalg

from rlrt.errors import DomainError, NumericalError, raise_domain_error
from rlrt.models.schemas import (
    DataMatrix,
    SampleCovariance,
    ShrinkageParams,
    ShrunkenCovariance,
)

logger = logging.getLogger(__name__)

SYMMETRY_RTOL = 1e-8


def sample_covariance(data: DataMatrix) -> SampleCovariance:
    x = data.values
    centered = x - x.mean(axis=0)
    n_tilde = data.n - 1
    matrix = centered.T @ centered / n_tilde
    matrix = (matrix + matrix.T) / 2.0
    return SampleCovariance(matrix=matrix, n_tilde=n_tilde)


def shrink(s: SampleCovariance, params: ShrinkageParams) -> ShrunkenCovariance:
    matrix = s.matrix
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise_domain_error("covariance shape", matrix.shape, "square matrices")
    lam = params.lam
    shrunk = lam * matrix + (1.0 - lam) * np.eye(matrix.shape[0])
    return ShrunkenCovariance(matrix=shrunk, lam=lam)


def sym_eigenvalues(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise_domain_error("matrix shape", m.shape, "square matrices")
    scale = max(float(np.max(np.abs(m))), np.finfo(float).tiny)
    asymmetry = float(np.max(np.abs(m - m.T)))
    if asymmetry > SYMMETRY_RTOL * scale:
        raise DomainError(
            f"matrix is not symmetric (max |M - M^T| = {asymmetry:.3g})"
        )
    sym = (m + m.T) / 2.0
    try:
        # dsyev: Householder tridiagonalisation followed by implicit QL/QR
        values = scipy.linalg.eigvalsh(sym, driver="ev")
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver did not converge: {exc}") from exc
    return values[::-1].copy()


def log_det_from_spectrum(values: np.ndarray) -> float:
    if np.any(values <= 0.0):
        raise NumericalError("log-determinant of a singular matrix")
    return float(np.sum(np.log(values)))
