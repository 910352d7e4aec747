"""gpal-extract: image directories to gpal feature files via a frozen backbone."""

from .extract import ExtractReport, ExtractSpec, extract

__version__ = "0.1.0"

__all__ = ["ExtractReport", "ExtractSpec", "extract"]
