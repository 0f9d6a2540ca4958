import hashlib
import json
import logging
import warnings
from typing import Any, Callable

import numpy as np
from scipy import integrate as sp_integrate

from rlrt.config import QUAD_EPSABS, QUAD_LIMIT
from rlrt.errors import NumericalError

logger = logging.getLogger(__name__)


def integrate(
    func: Callable[[float], float],
    lower: float,
    upper: float,
    epsabs: float = QUAD_EPSABS,
    limit: int = QUAD_LIMIT,
) -> float:
    """Adaptive Gauss-Kronrod quadrature (QUADPACK qags) with a hard panel cap.

    Raises NumericalError when QUADPACK reports a problem or the error
    estimate misses the requested absolute tolerance.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("error", sp_integrate.IntegrationWarning)
        try:
            value, abserr = sp_integrate.quad(
                func, lower, upper, epsabs=epsabs, epsrel=0.0, limit=limit
            )
        except sp_integrate.IntegrationWarning as exc:
            raise NumericalError(f"quadrature failed: {exc}") from exc
    if abserr > epsabs:
        raise NumericalError(
            f"quadrature error estimate {abserr:.3g} exceeds {epsabs:.3g}"
        )
    return value


def replication_rng(master_seed: int, *key: int) -> np.random.Generator:
    # Philox is counter based: the stream depends on the key only, never on
    # which worker draws it or in what order.
    seq = np.random.SeedSequence([int(master_seed), *(int(k) for k in key)])
    return np.random.Generator(np.random.Philox(seq))


def config_hash(payload: Any) -> str:
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf8")).hexdigest()
