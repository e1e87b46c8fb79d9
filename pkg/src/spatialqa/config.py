"""Key-value run configuration files.

One ``key = value`` per line; ``#`` starts a comment. Keys are CLI option
names with or without leading dashes (``doa-tol`` and ``doa_tol`` are the
same key). Command-line flags override file values.
"""

from __future__ import annotations

import json
import os
from typing import Mapping

from .errors import ValidationError


def load_kv_config(path: str | os.PathLike) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key.lstrip("-").replace("-", "_")] = value
    return out


def load_class_names(path: str | os.PathLike) -> Mapping[int, str]:
    """Class id to name mapping from JSON (``{"0": "speech"}``) or ``id,name`` lines."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        try:
            return {int(k): str(v) for k, v in json.loads(text).items()}
        except (ValueError, AttributeError) as exc:
            raise ValidationError(f"{path}: bad class-name JSON ({exc})") from None
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        idx, _, name = line.partition(",")
        try:
            out[int(idx)] = name.strip()
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: expected 'id,name'") from None
    return out
