"""
Error Types
Exceptions raised by the pidforge modules, each carrying the CLI exit code
"""

from typing import Any, List, Optional


class PidForgeError(Exception):
    """Base class for data errors (bad input files, inconsistent artifacts)"""

    exit_code = 2


class UsageError(PidForgeError):
    """Invalid command line usage"""

    exit_code = 1


class InvariantError(PidForgeError):
    """An internal invariant failed; indicates a bug, not bad input"""

    exit_code = 3


class GraphMLParseError(PidForgeError):
    """Malformed XML in a GraphML file"""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(message)
        self.line = line


class GraphSchemaError(PidForgeError):
    """A GraphML node or edge is missing a required attribute"""


class VocabularyError(PidForgeError):
    """A class string outside the node/edge vocabulary"""


class GraphValidationError(PidForgeError):
    """A graph failed validate() where a valid graph is required"""

    def __init__(self, message: str, violations: List[Any]):
        super().__init__(message)
        self.violations = violations


class StageError(PidForgeError):
    """An operation received a graph at the wrong pipeline stage"""


class SymbolLibraryError(PidForgeError):
    """The symbol library has no template for a requested class"""


class FoldError(PidForgeError):
    """Fold split request cannot be satisfied"""


class ImageTooSmallError(PidForgeError):
    """Image below the minimum size for perceptual hashing"""


class WindowIndexError(PidForgeError):
    """Patch predictions and window index do not agree"""


class GenerationError(PidForgeError):
    """Corpus generation accepted nothing before the attempts cap"""

    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report
