import sys
from contextlib import contextmanager

from loguru import logger
from pydantic import ValidationError

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_EMPTY_RESULT = 3


class PersimError(Exception):
    """Base class for every error raised by the pipeline."""

    exit_code = EXIT_INTERNAL


class InputError(PersimError):
    """Bad or missing input (files, ids, flags)."""

    exit_code = EXIT_INPUT


class EmptyResultError(PersimError):
    """A stage ran correctly but produced nothing to work with."""

    exit_code = EXIT_EMPTY_RESULT


class MalformedLineError(InputError):
    def __init__(self, line_no, reason=""):
        self.line_no = line_no
        self.reason = reason
        message = f"Malformed event on line {line_no}"
        if reason:
            message += f": {reason}"
        super().__init__(message)


class EmptyInputError(InputError):
    pass


class ArtifactNotFoundError(InputError):
    def __init__(self, path):
        self.path = path
        super().__init__(f"Missing file: {path}")


class TooFewItemsError(InputError):
    pass


class DimensionMismatchError(PersimError, ValueError):
    pass


class SingularSystemError(PersimError):
    pass


class NoNegativesAvailableError(PersimError):
    pass


class NoTrainableUsersError(InputError):
    pass


class IndexOutOfRangeError(PersimError, IndexError):
    pass


class UnknownQueryItemError(InputError):
    def __init__(self, item):
        self.item = item
        super().__init__(f"Query item {item!r} has no candidate list")


class EmptyTruthError(PersimError, ValueError):
    pass


class NoQueriesError(EmptyResultError):
    pass


@contextmanager
def exit_on_error():
    """Runs a script body and converts failures into the documented exit codes.

    Input problems (bad files, ids, flags or config values) exit with 2,
    EmptyResultError with 3 and anything else with 1.
    """
    try:
        yield
    except PersimError as e:
        logger.error(str(e))
        sys.exit(e.exit_code)
    except (ValidationError, FileNotFoundError) as e:
        logger.error(str(e))
        sys.exit(EXIT_INPUT)
    except Exception:
        logger.exception("Unexpected failure")
        sys.exit(EXIT_INTERNAL)
