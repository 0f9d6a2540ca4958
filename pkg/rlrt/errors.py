from typing import Optional


class RlrtError(Exception):
    exit_code = 1


class DomainError(RlrtError, ValueError):
    pass


class RegimeError(RlrtError, ValueError):
    pass


class CloseSpikeError(RlrtError, ValueError):
    pass


class SingularCovarianceError(RlrtError, ArithmeticError):
    pass


class NumericalError(RlrtError, ArithmeticError):
    pass


class DataFormatError(RlrtError, ValueError):
    def __init__(
        self,
        message: str,
        line: Optional[int] = None,
        column: Optional[int] = None,
    ):
        self.line = line
        self.column = column
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            message = f"{where}: {message}"
        super().__init__(message)


class ConfigError(RlrtError, ValueError):
    pass


def raise_domain_error(name: str, value, interval: str):
    raise DomainError(f"{name}={value!r} is outside {interval}")


def raise_regime_error(gamma_tilde: float):
    raise RegimeError(
        f"gamma_tilde={gamma_tilde:.6g} is not in (0, 1); the asymptotic "
        "calibration is only valid for p < n - 1"
    )


def raise_singular_covariance():
    raise SingularCovarianceError(
        "statistic undefined: singular sample covariance"
    )


def check_open_unit(name: str, value: float):
    if not 0.0 < value < 1.0:
        raise_domain_error(name, value, "(0, 1)")
    return value
