"""Figure renderer for summation-error CSV datasets.

Consumes the versioned CSV schema written by the experiment harness
and turns it into log-log figures: one marker per recorded trial (`+`
round-to-nearest, `x` stochastic rounding), median curves for the
requested error bounds, and a horizontal unit-roundoff reference.  The
renderer never recomputes errors or bounds; figures reflect recorded
data only.
"""

from .figures import PRESETS, FigureSpec, render, spec_for
from .schema import (
    LEAD_COLUMNS,
    MODES,
    SUPPORTED_VERSION,
    Dataset,
    Row,
    SchemaError,
    load_csv,
    merge,
    parse_csv,
)

__version__ = "0.1.0"
