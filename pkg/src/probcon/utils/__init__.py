"""
Utilities

Seeded random streams and the report writers shared by the CLI and the
training loop.
"""

from probcon.utils.report_writer import (
    ReportWriter,
    embed_provenance,
    read_csv_table,
    to_jsonable,
)
from probcon.utils.rng import child_seed, named_stream, stream_key

__all__ = [
    "ReportWriter",
    "child_seed",
    "embed_provenance",
    "named_stream",
    "read_csv_table",
    "stream_key",
    "to_jsonable",
]
