"""
Exception hierarchy for the AWVA simulator.

Library code raises these; only the CLI layer turns them into exit codes.
"""

EXIT_CONFIG_ERROR = 2
EXIT_IO_ERROR = 3
EXIT_ESTIMATION_FAILURE = 4


class AWVAError(Exception):
    """Base class for every error raised by the simulator"""

    exit_code = 1


class DomainError(AWVAError, ValueError):
    """Argument outside the mathematical domain of an operation"""

    exit_code = EXIT_CONFIG_ERROR


class ConfigurationError(AWVAError):
    """Invalid configuration or violated precondition"""

    exit_code = EXIT_CONFIG_ERROR


class AlignmentError(ConfigurationError):
    """Two traces do not share the same sample grid"""


class CalibrationError(AWVAError):
    """Phase calibration has no unique minimum"""

    exit_code = EXIT_ESTIMATION_FAILURE


class EstimationError(AWVAError):
    """An estimator could not identify a peak in its input"""

    exit_code = EXIT_ESTIMATION_FAILURE


class EstimationFailureThreshold(AWVAError):
    """Too many Monte Carlo trials failed to produce an estimate"""

    exit_code = EXIT_ESTIMATION_FAILURE


class ScopeParseError(AWVAError):
    """Malformed scope CSV export"""

    exit_code = EXIT_IO_ERROR

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        location = ''
        if path is not None:
            location = f'{path}'
            if line is not None:
                location += f':{line}'
            location += ': '
        super().__init__(f'{location}{message}')


class ScopeFormatError(ScopeParseError):
    """Scope CSV parsed but its time column is not uniformly sampled"""


class OutputError(AWVAError):
    """Output file or directory could not be written"""

    exit_code = EXIT_IO_ERROR
