"""
Error Types

Domain errors are plain ``ValueError``s; numeric failures get their own type so
the CLI can tell them apart.
"""


class NumericalFailure(RuntimeError):
    """A numeric routine could not produce a valid result.

    Raised for exhausted rejection loops, failed re-initialization of the
    generative process, starved acceptance during triplet generation and
    non-finite training losses.
    """
