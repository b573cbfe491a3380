"""Refactoring recommendations for large, frequently changed source files.

Functions of a target file are clustered by the files that depend on them
(interface splitting) and, together with client functions, by the commits
they share (interface redrawing). Clusters from several model-selection
guesses are pooled and ranked by how often they recur and how often their
members change.
"""

__version__ = "0.1.0"

from largeactive.errors import (  # noqa: E402
    AnalysisError,
    InputError,
    LargeActiveError,
    NumericError,
    ParseError,
    ValidationError,
)
from largeactive.model import (  # noqa: E402
    AnalysisConfig,
    ChangeHistory,
    CommitRecord,
    DependencyMode,
    FactsDb,
    FileRef,
    FunctionRef,
    Kind,
    Recommendation,
)
from largeactive.recommend import (  # noqa: E402
    detect_large_active,
    ensemble_redraw,
    ensemble_split,
    file_activity_stats,
)
