import logging
import math
from typing import Optional

import numpy as np
import scipy.linalg

from rlrt.errors import DomainError, NumericalError, raise_domain_error
from rlrt.models.schemas import DataMatrix, Scenario

logger = logging.getLogger(__name__)

PSD_RTOL = 1e-10


def a1_twos_count(p: int, rule: str = "max") -> int:
    tenth = int(math.floor(0.2 * p))
    if rule == "max":
        count = max(1, tenth)
    elif rule == "min":
        count = min(1, tenth)
    elif rule.startswith("fixed:"):
        count = int(rule.split(":", 1)[1])
    else:
        raise_domain_error("a1_twos_rule", rule, "{max, min, fixed:k}")
    return min(count, p)


def parse_scenario(text: str, a1_twos_rule: str = "max") -> Scenario:
    """Scenario from its command-line name: null, a1..a4 or cs:BETA."""
    key = text.strip().lower()
    if key.startswith("cs:"):
        try:
            beta = float(key[3:])
        except ValueError:
            raise_domain_error("scenario", text, "cs:<float>")
        return Scenario(kind="cs_beta", beta=beta)
    if key in ("null", "a2", "a3", "a4"):
        return Scenario(kind=key)
    if key == "a1":
        return Scenario(kind="a1", a1_twos_rule=a1_twos_rule)
    raise_domain_error("scenario", text, "{null, a1, a2, a3, a4, cs:<beta>}")


def _compound_symmetry(p: int, rho: float) -> np.ndarray:
    return np.eye(p) + rho * np.ones((p, p))


def materialize_sigma(scenario: Scenario, p: int) -> np.ndarray:
    if p < 1:
        raise_domain_error("p", p, "[1, inf)")
    kind = scenario.kind
    if kind == "null":
        return np.eye(p)
    if kind == "a1":
        diag = np.ones(p)
        diag[: a1_twos_count(p, scenario.a1_twos_rule)] = 2.0
        return np.diag(diag)
    if kind == "a2":
        diag = np.ones(p)
        diag[0] = 1.0 + 0.2 * p
        return np.diag(diag)
    if kind == "a3":
        return _compound_symmetry(p, 0.2)
    if kind == "a4":
        return _compound_symmetry(p, 0.1)
    if kind == "cs_beta":
        # spectrum {1 + beta, 1, ..., 1}
        if scenario.beta < -1.0:
            raise_domain_error("beta", scenario.beta, "[-1, inf)")
        return _compound_symmetry(p, scenario.beta / p)

    sigma = np.asarray(scenario.sigma, dtype=float)
    if sigma.shape != (p, p):
        raise DomainError(
            f"custom sigma has shape {sigma.shape}, expected {(p, p)}"
        )
    mvn_factor(sigma)
    return sigma


def mvn_factor(sigma: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix through its spectral decomposition."""
    sigma = np.asarray(sigma, dtype=float)
    tol = PSD_RTOL * max(1.0, float(np.abs(sigma).max(initial=0.0)))
    if not np.allclose(sigma, sigma.T, rtol=0.0, atol=tol):
        raise DomainError("covariance is not symmetric")
    try:
        values, vectors = scipy.linalg.eigh((sigma + sigma.T) / 2.0)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(f"factorization failed: {exc}") from exc
    if values.size and values.min() < -tol:
        raise DomainError(
            "covariance is not positive semi-definite "
            f"(min eigenvalue {values.min():.3g})"
        )
    root = np.sqrt(np.clip(values, 0.0, None))
    return (vectors * root) @ vectors.T


def sample_mvn(
    n: int,
    sigma: Optional[np.ndarray],
    rng: np.random.Generator,
    factor: Optional[np.ndarray] = None,
) -> DataMatrix:
    """n zero-mean rows from N(0, sigma); pass a precomputed factor to skip eigh."""
    if factor is None:
        factor = mvn_factor(sigma)
    z = rng.standard_normal((n, factor.shape[0]))
    return DataMatrix(values=z @ factor)
