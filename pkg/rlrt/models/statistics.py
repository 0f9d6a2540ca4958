import logging
import math
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from rlrt.config import DEFAULT_ETA
from rlrt.errors import (
    DomainError,
    check_open_unit,
    raise_regime_error,
    raise_singular_covariance,
)
from rlrt.models.covariance import (
    log_det_from_spectrum,
    sample_covariance,
    sym_eigenvalues,
)
from rlrt.models.rmt import null_asymptotics
from rlrt.models.schemas import (
    DataMatrix,
    DimensionSetup,
    MethodSpec,
    SampleCovariance,
    ShrinkageParams,
    TestResult,
)

logger = logging.getLogger(__name__)

CLRT = ShrinkageParams(lam=1.0)


def spectrum_statistic(values: np.ndarray, params: ShrinkageParams) -> float:
    values = np.asarray(values, dtype=float)
    if params.lam == 1.0:
        top = float(np.max(np.abs(values))) if values.size else 0.0
        # eigensolver noise around exact zeros
        floor = 100.0 * top * values.size * np.finfo(float).eps
        if np.any(values <= floor):
            raise_singular_covariance()
    psi = params.psi(values)
    return float(np.sum(psi)) - log_det_from_spectrum(psi) - psi.size


def rlrt_statistic(s: SampleCovariance, params: ShrinkageParams) -> float:
    return spectrum_statistic(sym_eigenvalues(s.matrix), params)


def _result(
    method: str,
    raw: float,
    z: float,
    eta: float,
    setup: DimensionSetup,
    lam: Optional[float] = None,
) -> TestResult:
    p_value = float(stats.norm.sf(z))
    return TestResult(
        method=method,
        raw=raw,
        z=z,
        p_value=p_value,
        reject=p_value < eta,
        eta=eta,
        setup=setup,
        lam=lam,
    )


class Sample:
    """One data matrix with its covariance and spectrum computed on demand."""

    def __init__(self, data: DataMatrix):
        self.data = data
        self.setup = data.setup

    @cached_property
    def covariance(self) -> SampleCovariance:
        return sample_covariance(self.data)

    @cached_property
    def spectrum(self) -> np.ndarray:
        return sym_eigenvalues(self.covariance.matrix)


def _spectral_raw(sample: Sample, params: ShrinkageParams) -> float:
    return spectrum_statistic(sample.spectrum, params)


def _lw_raw(sample: Sample) -> float:
    n, p = sample.setup.n, sample.setup.p
    s = sample.covariance.matrix
    diff = s - np.eye(p)
    return (
        float(np.sum(diff * diff)) / p
        - (p / n) * (float(np.trace(s)) / p) ** 2
        + p / n
    )


def _chen_raw(sample: Sample) -> float:
    n, p = sample.setup.n, sample.setup.p
    if n < 4:
        raise DomainError(f"Chen's test needs n >= 4, got n={n}")
    x = sample.data.values
    v1, v2 = chen_statistic(x - x.mean(axis=0))
    return v2 / p - 2.0 * v1 / p + 1.0


def _calibrated_lrt(
    sample: Sample, params: ShrinkageParams, eta: float, label: str
) -> TestResult:
    setup = sample.setup
    if not 0.0 < setup.gamma_tilde < 1.0:
        raise_regime_error(setup.gamma_tilde)
    null = null_asymptotics(params, setup)
    raw = _spectral_raw(sample, params)
    z = (raw - setup.p * null.centering - null.mu) / math.sqrt(null.v)
    return _result(label, raw, z, eta, setup, lam=params.lam)


def _rlrt(sample: Sample, params: ShrinkageParams, eta: float) -> TestResult:
    return _calibrated_lrt(sample, params, eta, f"rLRT({params.lam:g})")


def _clrt(sample: Sample, eta: float) -> TestResult:
    return _calibrated_lrt(sample, CLRT, eta, "cLRT")


def _lw(sample: Sample, eta: float) -> TestResult:
    n, p = sample.setup.n, sample.setup.p
    raw = _lw_raw(sample)
    z = (n * raw - p - 1.0) / 2.0
    return _result("LW", raw, z, eta, sample.setup)


def _chen(sample: Sample, eta: float) -> TestResult:
    raw = _chen_raw(sample)
    z = sample.setup.n * raw / 2.0
    return _result("Chen", raw, z, eta, sample.setup)


def rlrt_test(
    data: DataMatrix, params: ShrinkageParams, eta: float = DEFAULT_ETA
) -> TestResult:
    check_open_unit("eta", eta)
    return _rlrt(Sample(data), params, eta)


def clrt_test(data: DataMatrix, eta: float = DEFAULT_ETA) -> TestResult:
    check_open_unit("eta", eta)
    return _clrt(Sample(data), eta)


def lw_test(data: DataMatrix, eta: float = DEFAULT_ETA) -> TestResult:
    check_open_unit("eta", eta)
    return _lw(Sample(data), eta)


def chen_test(data: DataMatrix, eta: float = DEFAULT_ETA) -> TestResult:
    check_open_unit("eta", eta)
    return _chen(Sample(data), eta)


def _falling_factorial(n: int, r: int) -> float:
    return float(math.perm(n, r))


def chen_statistic(x: np.ndarray) -> Tuple[float, float]:
    """(V1, V2) from traces of the off-diagonal Gram matrix, O(n^2 p + n^3)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    gram = x @ x.T
    diag = np.diag(gram).copy()
    off = gram - np.diag(diag)

    off_sum = float(off.sum())
    frob = float(np.sum(off * off))
    rows = off.sum(axis=1)
    row_sq = float(rows @ rows)

    pairs = frob
    paths = row_sq - frob
    quads = off_sum * off_sum - 4.0 * row_sq + 2.0 * frob

    p2 = _falling_factorial(n, 2)
    p3 = _falling_factorial(n, 3)
    p4 = _falling_factorial(n, 4)
    v1 = float(diag.sum()) / n - off_sum / p2
    v2 = pairs / p2 - 2.0 * paths / p3 + quads / p4
    return v1, v2


def chen_statistic_reference(x: np.ndarray) -> Tuple[float, float]:
    """(V1, V2) by literal sums over distinct indices, O(n^4 p)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    gram = x @ x.T
    idx = range(n)

    diag_sum = sum(gram[i, i] for i in idx)
    off_sum = sum(gram[i, j] for i in idx for j in idx if i != j)
    pairs = sum(gram[i, j] ** 2 for i in idx for j in idx if i != j)
    paths = sum(
        gram[i, j] * gram[j, k]
        for i in idx
        for j in idx
        for k in idx
        if len({i, j, k}) == 3
    )
    quads = sum(
        gram[i, j] * gram[k, l]
        for i in idx
        for j in idx
        for k in idx
        for l in idx
        if len({i, j, k, l}) == 4
    )

    p2 = _falling_factorial(n, 2)
    p3 = _falling_factorial(n, 3)
    p4 = _falling_factorial(n, 4)
    v1 = diag_sum / n - off_sum / p2
    v2 = pairs / p2 - 2.0 * paths / p3 + quads / p4
    return v1, v2


def size_corrected(result: TestResult, cutoff: float) -> TestResult:
    # shift z so that the empirical cutoff lands on z_{1-eta}
    z = result.z - cutoff + float(stats.norm.isf(result.eta))
    return _result(
        result.method + "*", result.raw, z, result.eta, result.setup, result.lam
    )


def evaluate_method(
    sample: Sample,
    method: MethodSpec,
    eta: float,
    cutoff: Optional[float] = None,
) -> TestResult:
    if method.name == "rlrt":
        result = _rlrt(sample, method.params, eta)
    elif method.name == "clrt":
        result = _clrt(sample, eta)
    elif method.name == "lw":
        result = _lw(sample, eta)
    else:
        result = _chen(sample, eta)
    if method.size_corrected:
        if cutoff is None:
            raise DomainError(f"no empirical cutoff for {method.label}")
        result = size_corrected(result, cutoff)
    return result


def raw_statistic(sample: Sample, method: MethodSpec) -> float:
    """Uncalibrated statistic; defined for rLRT beyond the calibrated regime."""
    if method.name == "rlrt":
        return _spectral_raw(sample, method.params)
    if method.name == "clrt":
        return _spectral_raw(sample, CLRT)
    if method.name == "lw":
        return _lw_raw(sample)
    return _chen_raw(sample)


def evaluate_methods(
    data: DataMatrix,
    methods: Sequence[MethodSpec],
    eta: float = DEFAULT_ETA,
    cutoffs: Optional[Dict[MethodSpec, float]] = None,
) -> List[TestResult]:
    """Run several tests on one data matrix, sharing S and its spectrum."""
    check_open_unit("eta", eta)
    cutoffs = cutoffs or {}
    sample = Sample(data)
    return [
        evaluate_method(sample, method, eta, cutoffs.get(method))
        for method in methods
    ]


def raw_statistics(
    data: DataMatrix, methods: Sequence[MethodSpec]
) -> List[float]:
    """Raw statistics in method order, without the calibrated regime check."""
    sample = Sample(data)
    return [raw_statistic(sample, method) for method in methods]
