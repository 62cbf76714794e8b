"""
JSON file boundary (configs, distributions, codes files, manifests).

Design & invariants
-------------------
* Writes are atomic: temp file in the target directory + os.replace(...), so
  a reader never observes a half-written document.
* Output is pretty-printed with sorted keys so identical inputs produce
  byte-identical files.
* Reads are forgiving only when the caller passes a `default`; otherwise a
  corrupt file is a ConfigError and a missing one an OSError (CLI exit 3).
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Union

from errors import ConfigError

logger = logging.getLogger(__name__)

PathLike = Union[str, "os.PathLike[str]"]
_MISSING = object()


def read_json(path: PathLike, default: Any = _MISSING) -> Any:
    """Load a JSON document.

    With `default` given, missing or unparseable files return it instead of
    raising (used for optional codes files).
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        if default is not _MISSING:
            return default
        raise
    except json.JSONDecodeError as exc:
        if default is not _MISSING:
            logger.warning("ignoring corrupt JSON file %s: %s", path, exc)
            return default
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    except UnicodeDecodeError as exc:
        if default is not _MISSING:
            logger.warning("ignoring non-UTF-8 JSON file %s", path)
            return default
        raise ConfigError(f"{path}: not valid UTF-8 ({exc.reason} at byte {exc.start})") from exc


def dumps(payload: Any) -> str:
    """Canonical text form used for every JSON artifact."""
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def write_json_atomic(path: PathLike, payload: Any) -> None:
    """Write `payload` as JSON atomically next to its final location."""
    target = os.path.abspath(path)
    directory = os.path.dirname(target) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(dumps(payload))
        os.replace(tmp, target)
    finally:
        # tmp only survives when something failed before the replace
        if os.path.exists(tmp):
            try:
                os.remove(tmp)
            except OSError:
                pass
    logger.debug("wrote %s", target)


def write_text_atomic(path: PathLike, text: str) -> None:
    """Same contract as write_json_atomic for CSV and other text outputs."""
    target = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(target) or ".", prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, target)
    finally:
        if os.path.exists(tmp):
            try:
                os.remove(tmp)
            except OSError:
                pass


def parse_json_argument(text: str) -> Any:
    """Interpret a CLI value as inline JSON, or as a path to a JSON file."""
    stripped = text.strip()
    if stripped[:1] in ("[", "{"):
        try:
            return json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid inline JSON: {exc.msg}") from exc
    if not os.path.isfile(text):
        raise ConfigError(f"{text!r} is neither inline JSON nor an existing JSON file")
    return read_json(Path(text))


# -----------------------------------------------------------------------------
# Typed helpers (imported lazily to keep this module free of dist at import)
# -----------------------------------------------------------------------------
def load_config(path: PathLike):
    from dist import SystemConfig

    return SystemConfig.from_dict(read_json(path))


def save_config(path: PathLike, config) -> None:
    write_json_atomic(path, config.to_dict())


def load_distribution(path: PathLike):
    from dist import DiscreteDistribution

    return DiscreteDistribution.from_dict(read_json(path))


def save_distribution(path: PathLike, distribution) -> None:
    write_json_atomic(path, distribution.to_dict())
