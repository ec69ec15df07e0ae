"""Random interlacements on Z^d: potential theory, sampling and chemical distances."""

from ._core import (
    Field,
    InterlaceError,
    __version__,
    a_closed,
    a_seq,
    beta,
    capacity,
    green,
    green_stopped,
    hit_probability,
    hit_sandwich,
    run,
    sample_ball,
)

__all__ = [
    "Field",
    "InterlaceError",
    "__version__",
    "a_closed",
    "a_seq",
    "beta",
    "capacity",
    "green",
    "green_stopped",
    "hit_probability",
    "hit_sandwich",
    "run",
    "sample_ball",
]
