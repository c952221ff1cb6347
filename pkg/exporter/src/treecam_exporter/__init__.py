"""Adapters from native tree-model ecosystems to the treecam document format."""

__version__ = "0.1.0"

from .convert import (ExportError, export_gradient_boosting, export_model,
                      export_random_forest, export_xgboost_dump,
                      write_document)

__all__ = ["ExportError", "export_gradient_boosting", "export_model",
           "export_random_forest", "export_xgboost_dump", "write_document",
           "__version__"]
