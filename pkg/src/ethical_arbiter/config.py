"""Loading and schema validation for configuration documents (YAML or JSON)."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Mapping

import jsonschema
import yaml

from .core import ValidationError


class ConfigError(ValidationError):
    """A configuration document is missing, unreadable or does not match its schema."""

    def __init__(self, message: str, path: str | None = None, field: str | None = None):
        self.message = message
        self.path = path
        self.field = field
        where = ""
        if path:
            where += f"{path}: "
        if field:
            where += f"at '{field}': "
        super().__init__(where + message)

    def at(self, path: str) -> "ConfigError":
        """The same error, attributed to the file it came from."""
        return ConfigError(self.message, path=path, field=self.field)


def validate_document(document: Any, schema: Mapping, what: str, path: str | None = None) -> None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(document), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        field = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"invalid {what}: {err.message}", path=path, field=field)


def load_document(path: str | Path) -> Any:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read file: {exc.strerror}", path=str(p)) from None
    try:
        # YAML is a superset of JSON, so one parser covers both
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"not valid YAML/JSON: {exc}", path=str(p)) from None
