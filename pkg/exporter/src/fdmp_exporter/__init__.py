"""Model-side adapter: dump dense feature/softmax maps to FDMP files."""

__version__ = "0.1.0"

from .export import ExportError, ExportSpec, export, load_container
from .format import write_fdmp
