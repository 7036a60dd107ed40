"""Turn exported quantizer-report CSVs into styled PNG figures."""

from .render import SCHEMAS, SchemaError, render_all

__all__ = ["SCHEMAS", "SchemaError", "render_all"]
