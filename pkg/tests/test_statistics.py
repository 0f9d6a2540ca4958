import math

import numpy as np
import pytest
from scipy import stats

from rlrt.errors import DomainError, RegimeError, SingularCovarianceError
from rlrt.models.covariance import sample_covariance, shrink
from rlrt.models.schemas import (
    DataMatrix,
    MethodSpec,
    SampleCovariance,
    ShrinkageParams,
)
from rlrt.models.statistics import (
    chen_statistic,
    chen_statistic_reference,
    chen_test,
    clrt_test,
    evaluate_methods,
    lw_test,
    raw_statistics,
    rlrt_statistic,
    rlrt_test,
    spectrum_statistic,
)

ALL_METHODS = [
    MethodSpec(name="rlrt", lam=0.5),
    MethodSpec(name="clrt"),
    MethodSpec(name="lw"),
    MethodSpec(name="chen"),
]


def test_rlrt_statistic_hand_cases():
    half = ShrinkageParams(lam=0.5)
    identity = SampleCovariance(matrix=np.eye(4), n_tilde=10)
    assert rlrt_statistic(identity, half) == pytest.approx(0.0, abs=1e-14)
    assert rlrt_statistic(identity, ShrinkageParams(lam=1.0)) == pytest.approx(
        0.0, abs=1e-14
    )

    s = SampleCovariance(matrix=np.diag([3.0, 1.0]), n_tilde=10)
    assert rlrt_statistic(s, half) == pytest.approx(1.0 - math.log(2.0))
    assert rlrt_statistic(s, half) == pytest.approx(0.3068528, abs=1e-7)


def test_rlrt_statistic_trace_logdet_form(rng):
    for lam in (0.2, 0.5, 1.0):
        params = ShrinkageParams(lam=lam)
        data = DataMatrix(values=rng.standard_normal((30, 8)))
        s = sample_covariance(data)
        shrunk = shrink(s, params).matrix
        sign, logdet = np.linalg.slogdet(shrunk)
        expected = np.trace(shrunk) - logdet - 8
        assert sign == 1.0
        assert rlrt_statistic(s, params) == pytest.approx(expected, abs=1e-10)
        assert rlrt_statistic(s, params) >= 0.0


def test_rlrt_statistic_vanishes_with_lambda(rng):
    s = sample_covariance(DataMatrix(values=rng.standard_normal((20, 5))))
    assert rlrt_statistic(s, ShrinkageParams(lam=1e-8)) == pytest.approx(
        0.0, abs=1e-6
    )


def test_singular_covariance():
    with pytest.raises(SingularCovarianceError, match="singular sample"):
        spectrum_statistic(np.array([2.0, 1.0, 0.0]), ShrinkageParams(lam=1.0))
    assert spectrum_statistic(
        np.array([2.0, 1.0, 0.0]), ShrinkageParams(lam=0.5)
    ) > 0.0


def test_rlrt_test_result(null_data):
    result = rlrt_test(null_data, ShrinkageParams(lam=0.5), eta=0.05)
    assert result.method == "rLRT(0.5)"
    assert result.lam == 0.5
    assert result.setup.n == 60
    assert result.setup.p == 20
    assert result.p_value == pytest.approx(stats.norm.sf(result.z), abs=1e-12)
    assert result.reject == (result.p_value < 0.05)

    with pytest.raises(DomainError):
        rlrt_test(null_data, ShrinkageParams(lam=0.5), eta=1.5)


def test_regime_errors(rng):
    wide = DataMatrix(values=rng.standard_normal((10, 12)))
    with pytest.raises(RegimeError):
        rlrt_test(wide, ShrinkageParams(lam=0.5))
    with pytest.raises(RegimeError):
        clrt_test(wide)
    # the raw rLRT statistic stays defined beyond the calibrated regime
    (raw,) = raw_statistics(wide, [MethodSpec(name="rlrt", lam=0.5)])
    assert raw > 0.0
    with pytest.raises(SingularCovarianceError):
        raw_statistics(wide, [MethodSpec(name="clrt")])


def test_rotation_invariance(null_data, rng):
    q, _ = np.linalg.qr(rng.standard_normal((20, 20)))
    rotated = DataMatrix(values=null_data.values @ q)
    for test in (
        lambda d: rlrt_test(d, ShrinkageParams(lam=0.5)),
        clrt_test,
    ):
        before, after = test(null_data), test(rotated)
        assert after.raw == pytest.approx(before.raw, abs=1e-10)
        assert after.z == pytest.approx(before.z, abs=1e-9)


def test_row_permutation_invariance(null_data, rng):
    shuffled = DataMatrix(values=rng.permutation(null_data.values))
    before = evaluate_methods(null_data, ALL_METHODS)
    after = evaluate_methods(shuffled, ALL_METHODS)
    for a, b in zip(before, after):
        assert b.raw == pytest.approx(a.raw, rel=1e-10, abs=1e-10)


def test_lw_at_identity():
    p, n = 3, 6
    block = np.eye(p) * math.sqrt((n - 1) / 2.0)
    data = DataMatrix(values=np.vstack([block, -block]))
    np.testing.assert_allclose(
        sample_covariance(data).matrix, np.eye(p), atol=1e-12
    )

    result = lw_test(data)
    assert result.method == "LW"
    assert result.raw == pytest.approx(p / n)
    assert result.z == pytest.approx(-0.5)
    assert not result.reject


@pytest.mark.parametrize("seed", range(100))
def test_chen_reduced_matches_reference(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 11))
    p = int(rng.integers(1, 7))
    x = rng.standard_normal((n, p))
    v1, v2 = chen_statistic(x)
    r1, r2 = chen_statistic_reference(x)
    assert v1 == pytest.approx(r1, rel=1e-10, abs=1e-10)
    assert v2 == pytest.approx(r2, rel=1e-10, abs=1e-10)


def test_chen_edge_cases():
    rows = DataMatrix(values=np.tile([1.0, -2.0, 3.0], (8, 1)))
    result = chen_test(rows)
    assert result.raw == pytest.approx(1.0)
    assert result.z == pytest.approx(4.0)
    assert chen_test(rows).z == result.z

    with pytest.raises(DomainError):
        chen_test(DataMatrix(values=np.eye(3)))


def test_evaluate_methods_matches_single_tests(null_data):
    results = evaluate_methods(null_data, ALL_METHODS, eta=0.05)
    singles = [
        rlrt_test(null_data, ShrinkageParams(lam=0.5)),
        clrt_test(null_data),
        lw_test(null_data),
        chen_test(null_data),
    ]
    assert [r.method for r in results] == ["rLRT(0.5)", "cLRT", "LW", "Chen"]
    for batch, single in zip(results, singles):
        assert batch.z == pytest.approx(single.z)
        assert batch.p_value == pytest.approx(single.p_value)
        assert batch.reject == single.reject


def test_size_corrected(null_data):
    plain = MethodSpec(name="lw")
    corrected = MethodSpec(name="lw", size_corrected=True)

    with pytest.raises(DomainError):
        evaluate_methods(null_data, [corrected])

    (base,) = evaluate_methods(null_data, [plain])
    for cutoff in (base.z - 0.1, base.z + 0.1):
        (result,) = evaluate_methods(
            null_data, [corrected], cutoffs={corrected: cutoff}
        )
        assert result.method == "LW*"
        assert result.raw == base.raw
        assert result.reject == (base.z > cutoff)
        assert result.p_value == pytest.approx(stats.norm.sf(result.z))


def test_raw_statistics_match_calibrated_tests(null_data):
    raws = raw_statistics(null_data, ALL_METHODS)
    results = evaluate_methods(null_data, ALL_METHODS)
    assert len(raws) == len(ALL_METHODS)
    for raw, result in zip(raws, results):
        assert raw == pytest.approx(result.raw, rel=1e-12, abs=1e-12)
    assert raw_statistics(null_data, []) == []
