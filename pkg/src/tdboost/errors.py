"""Exception types; the CLI maps each to an exit code."""


class TDBoostError(Exception):
    exit_code = 1


class ConfigError(TDBoostError, ValueError):
    exit_code = 2


class DataError(TDBoostError, ValueError):
    exit_code = 3


class NumericError(TDBoostError, ArithmeticError):
    exit_code = 4
