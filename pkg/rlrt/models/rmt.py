"""Asymptotic quantities of the regularized LRT.

Everything here is a pure function of its arguments. Quantities are given
for the shrinkage map psi(x) = lam*x + (1 - lam) and the statistic kernel
g(x) = psi(x) - log psi(x) - 1, under Marchenko-Pastur asymptotics with
aspect ratio gamma in (0, 1).
"""
import logging
import math
import warnings
from functools import lru_cache
from typing import Callable, Tuple

import numpy as np
from scipy import stats

from rlrt.errors import (
    CloseSpikeError,
    NumericalError,
    check_open_unit,
    raise_domain_error,
    raise_regime_error,
)
from rlrt.models.schemas import (
    DimensionSetup,
    MnRoots,
    MpLaw,
    NullAsymptotics,
    ShrinkageParams,
    SpikedModel,
)
from rlrt.utils import integrate

logger = logging.getLogger(__name__)


def _check_gamma(gamma: float) -> float:
    return check_open_unit("gamma", gamma)


def _calibrated_gamma(setup: DimensionSetup) -> float:
    gamma = setup.gamma_tilde
    if not 0.0 < gamma < 1.0:
        raise_regime_error(gamma)
    return gamma


def mp_law(gamma: float) -> MpLaw:
    return MpLaw(gamma=_check_gamma(gamma))


def mp_support(gamma: float) -> Tuple[float, float]:
    law = mp_law(gamma)
    return law.a, law.b


def mp_density(x, gamma: float):
    a, b = mp_support(gamma)
    x = np.asarray(x, dtype=float)
    inside = (x >= a) & (x <= b)
    # clip keeps sqrt/division finite outside the support; those entries are zeroed
    xs = np.where(inside, x, 1.0)
    root = np.sqrt(np.clip((b - xs) * (xs - a), 0.0, None))
    density = np.where(inside, root / (2.0 * math.pi * gamma * xs), 0.0)
    return float(density) if density.ndim == 0 else density


def mp_integral(func: Callable[[float], float], gamma: float) -> float:
    """Integral of func against the Marchenko-Pastur law.

    Uses x = a + (b - a) sin^2(t), under which the density times dx becomes
    (b - a)^2 sin^2(2t) / (4 pi gamma x) dt on [0, pi/2], free of the
    square-root endpoint singularities.
    """
    a, b = mp_support(gamma)
    width = b - a

    def integrand(t: float) -> float:
        x = a + width * math.sin(t) ** 2
        weight = width**2 * math.sin(2.0 * t) ** 2 / (4.0 * math.pi * gamma * x)
        return float(func(x)) * weight

    return integrate(integrand, 0.0, math.pi / 2.0)


def lss_null_mean(func: Callable[[float], float], gamma: float) -> float:
    """Null mean of p * integral of func d(F^{S_n} - F^{gamma, delta_1})."""
    a, b = mp_support(gamma)
    root = math.sqrt(gamma)
    inner = integrate(
        lambda theta: float(func(1.0 + gamma - 2.0 * root * math.cos(theta))),
        0.0,
        math.pi,
    )
    return (float(func(a)) + float(func(b))) / 4.0 - inner / (2.0 * math.pi)


def mn_roots(params: ShrinkageParams, gamma: float) -> MnRoots:
    lam = params.lam
    if not 0.0 < lam < 1.0:
        raise_domain_error("lambda", lam, "(0, 1)")
    _check_gamma(gamma)

    # roots of (1 - lam) m^2 + (1 - 2 lam + lam gamma) m - lam = 0
    lin = 1.0 - 2.0 * lam + lam * gamma
    root = math.sqrt(lin * lin + 4.0 * lam * (1.0 - lam))
    # take the larger-magnitude root without cancellation, the other by Vieta
    if lin >= 0.0:
        m_root = -(lin + root) / (2.0 * (1.0 - lam))
        n_root = 2.0 * lam / (lin + root)
    else:
        n_root = (root - lin) / (2.0 * (1.0 - lam))
        m_root = -2.0 * lam / (root - lin)

    lower = -1.0 / (1.0 - math.sqrt(gamma))
    upper = -1.0 / (1.0 + math.sqrt(gamma))
    if not (lower < m_root < upper and n_root > 0.0):
        raise NumericalError(
            f"root branch violated: M={m_root!r} not in ({lower!r}, {upper!r}) "
            f"or N={n_root!r} <= 0"
        )
    return MnRoots(m_root=m_root, n_root=n_root)


def _log_psi_circle_integral(lam: float, gamma: float) -> float:
    # integral over [0, 2pi] of log(1 + lam*gamma - 2 lam sqrt(gamma) cos t),
    # folded onto [0, pi] by symmetry
    root = math.sqrt(gamma)
    half = integrate(
        lambda t: math.log(1.0 + lam * gamma - 2.0 * lam * root * math.cos(t)),
        0.0,
        math.pi,
    )
    return 2.0 * half


def null_mean(
    params: ShrinkageParams, gamma: float, closed_form: bool = True
) -> float:
    lam = params.lam
    _check_gamma(gamma)
    if lam == 1.0 and closed_form:
        return -math.log(1.0 - gamma) / 2.0
    disc = (1.0 + lam * gamma) ** 2 - 4.0 * lam * lam * gamma
    return -math.log(math.sqrt(disc)) / 2.0 + _log_psi_circle_integral(
        lam, gamma
    ) / (4.0 * math.pi)


def null_variance(params: ShrinkageParams, gamma: float) -> float:
    lam = params.lam
    _check_gamma(gamma)
    if lam == 1.0:
        variance = -2.0 * gamma - 2.0 * math.log(1.0 - gamma)
    else:
        roots = mn_roots(params, gamma)
        m, n = roots.m_root, roots.n_root
        ratio = (m - n) / (m * (1.0 + n))
        if ratio <= 0.0:
            raise NumericalError(f"variance log argument {ratio!r} <= 0")
        variance = 2.0 * (
            -lam / m
            - lam * (1.0 + gamma - lam * gamma)
            + lam * gamma / (1.0 + n)
            - math.log(ratio)
        )
    if not variance > 0.0:
        raise NumericalError(f"non-positive asymptotic variance {variance!r}")
    return variance


def _centering(lam: float, gamma: float, closed_form: bool = True) -> float:
    if lam == 1.0 and closed_form:
        return 1.0 - (gamma - 1.0) / gamma * math.log(1.0 - gamma)
    root = math.sqrt(gamma)

    def integrand(theta: float) -> float:
        cos = math.cos(theta)
        numerator = math.log(1.0 + lam * gamma - 2.0 * lam * root * cos)
        return numerator / (1.0 + gamma - 2.0 * root * cos) * math.sin(theta) ** 2

    return -2.0 / math.pi * integrate(integrand, 0.0, math.pi)


def centering_integral(
    params: ShrinkageParams, setup: DimensionSetup, closed_form: bool = True
) -> float:
    return _centering(params.lam, _calibrated_gamma(setup), closed_form)


@lru_cache(maxsize=256)
def _null_asymptotics(lam: float, gamma: float) -> NullAsymptotics:
    params = ShrinkageParams(lam=lam)
    return NullAsymptotics(
        lam=lam,
        gamma=gamma,
        mu=null_mean(params, gamma),
        v=null_variance(params, gamma),
        centering=_centering(lam, gamma),
    )


def null_asymptotics(
    params: ShrinkageParams, setup: DimensionSetup
) -> NullAsymptotics:
    return _null_asymptotics(params.lam, _calibrated_gamma(setup))


def spike_phi(a: float, gamma: float) -> float:
    if a == 1.0:
        raise_domain_error("a", a, "R \\ {1}")
    return a + gamma * a / (a - 1.0)


def _log_psi_phi(lam: float, a: float, gamma: float) -> float:
    psi = lam * spike_phi(a, gamma) + (1.0 - lam)
    if psi <= 0.0:
        raise_domain_error("psi(phi(a))", psi, "(0, inf)")
    return math.log(psi)


def spike_constant(params: ShrinkageParams, gamma: float, a: float) -> float:
    """Contribution c(a) of one spike a to the spiked centering.

    p * integral of g dF^{gamma, H_p} = (p - K) * centering + sum_i n_i c(a_i).
    """
    lam = params.lam
    _check_gamma(gamma)
    if lam == 1.0:
        # exact: E log|S| shifts by log a, E tr S by a - 1
        return _centering(1.0, gamma) + (a - 1.0 - math.log(a))

    roots = mn_roots(params, gamma)
    m, n = roots.m_root, roots.n_root
    one_am = 1.0 + a * m
    log_ratio = (1.0 - a) / one_am
    if log_ratio <= 0.0:
        raise_domain_error("(1 - a)/(1 + a M)", log_ratio, "(0, inf)")

    linear = lam * a - lam - _log_psi_phi(lam, a, gamma)
    bracket = (
        math.log(-m) / gamma
        + math.log(log_ratio)
        - (1.0 / one_am - 1.0 / (1.0 - a))
    )
    first = (
        a * (m + 1.0) / one_am
        - a * gamma * m * m / (one_am * (m + 1.0))
        - 1.0
        + gamma * m * m / (m + 1.0) ** 2
    ) / (m - n)
    second = (
        a * gamma / (1.0 - a)
        + gamma * (2.0 * m * n + m + n) / ((m + 1.0) * (n + 1.0))
    ) / ((m + 1.0) * (n + 1.0))
    return linear - bracket + lam / (1.0 - lam) * (first - second)


def spike_constant_single(
    params: ShrinkageParams, gamma: float, beta: float
) -> float:
    """Single-spike constant for Sigma = I + (beta/p) J, in its reduced form."""
    lam = params.lam
    _check_gamma(gamma)
    a = 1.0 + beta
    if lam == 1.0:
        return _centering(1.0, gamma) + (beta - math.log(a))

    roots = mn_roots(params, gamma)
    m, n = roots.m_root, roots.n_root
    one_am = 1.0 + a * m
    braces = (
        a * (m + 1.0) / one_am
        - gamma * a * m * m / (one_am * (m + 1.0))
        - 1.0
        + gamma * m * m / (m + 1.0) ** 2
    )
    return (
        lam * beta
        - _log_psi_phi(lam, a, gamma)
        + (1.0 / lam + math.log(-1.0 / m)) / gamma
        + 1.0 / one_am
        - math.log(-beta / one_am)
        + lam / ((1.0 - lam) * (m - n)) * braces
    )


def _check_spikes(
    model: SpikedModel, gamma: float, allow_close_spike: bool, lam: float
):
    close = model.close_spikes(gamma)
    if not close or lam == 1.0:
        return
    values = ", ".join(f"{s.value:g}" for s in close)
    if not allow_close_spike:
        raise CloseSpikeError(
            f"spikes {values} satisfy |a - 1| <= sqrt(gamma)={math.sqrt(gamma):.6g}; "
            "the distant-spike centering does not apply"
        )
    message = (
        f"close spikes {values}: extending the distant-spike centering "
        "beyond its range, no accuracy guarantee"
    )
    logger.warning(message)
    warnings.warn(message, RuntimeWarning, stacklevel=3)


def spiked_centering(
    params: ShrinkageParams,
    setup: DimensionSetup,
    model: SpikedModel,
    allow_close_spike: bool = False,
) -> float:
    gamma = _calibrated_gamma(setup)
    base = _centering(params.lam, gamma)
    if model.k_total == 0:
        return setup.p * base
    _check_spikes(model, gamma, allow_close_spike, params.lam)
    spiked = sum(
        s.multiplicity * spike_constant(params, gamma, s.value)
        for s in model.spikes
    )
    return (setup.p - model.k_total) * base + spiked


def analytic_power(
    params: ShrinkageParams,
    setup: DimensionSetup,
    model: SpikedModel,
    eta: float,
    allow_close_spike: bool = False,
) -> float:
    """Asymptotic power of the upper-tail level-eta rLRT against a spiked model."""
    check_open_unit("eta", eta)
    gamma = _calibrated_gamma(setup)
    _check_spikes(model, gamma, allow_close_spike, params.lam)
    base = _centering(params.lam, gamma)
    shift = sum(
        s.multiplicity * (spike_constant(params, gamma, s.value) - base)
        for s in model.spikes
    )
    scale = math.sqrt(null_variance(params, gamma))
    return float(stats.norm.sf(stats.norm.isf(eta) - shift / scale))


def analytic_power_cs(
    params: ShrinkageParams,
    setup: DimensionSetup,
    beta: float,
    eta: float,
    allow_close_spike: bool = False,
) -> float:
    if beta <= 0.0:
        raise_domain_error("beta", beta, "(0, inf)")
    return analytic_power(
        params,
        setup,
        SpikedModel.compound_symmetry(beta),
        eta,
        allow_close_spike=allow_close_spike,
    )
