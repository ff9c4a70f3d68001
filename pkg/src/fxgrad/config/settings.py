"""
Process-level settings read from the environment.

Run configuration (effects, trainer, loss, ...) lives in ``run_config``; this
module only covers what varies per machine: log level, default worker count,
default output directory and seed overrides. A ``.env`` file and an optional
``.env.local`` overlay are loaded once, before the first lookup.
"""
from __future__ import annotations

import logging
import os
import re
from typing import Optional

_ENV_PREFIX = "FXGRAD_"
_LOADED = False

LOG_FORMAT = "%(asctime)s | %(levelname)-7s | %(name)s | %(message)s"


def load_env(base_dir: Optional[str] = None) -> None:
    global _LOADED
    if _LOADED:
        return
    _LOADED = True
    try:
        from dotenv import load_dotenv

        base = base_dir or os.getcwd()
        load_dotenv(dotenv_path=os.path.join(base, ".env"), override=False)
        # .env.local never overrides values already present in the environment
        load_dotenv(dotenv_path=os.path.join(base, ".env.local"), override=False)
    except ImportError:
        pass


def get_setting(name: str, default: Optional[str] = None) -> Optional[str]:
    """Look up ``FXGRAD_<NAME>``; also accepts the normalized upper-case form."""
    load_env()
    normalized = re.sub(r"[^A-Za-z0-9]+", "_", name).upper()
    return os.getenv(f"{_ENV_PREFIX}{name}") or os.getenv(f"{_ENV_PREFIX}{normalized}") or default


def get_int_setting(name: str, default: Optional[int] = None) -> Optional[int]:
    raw = get_setting(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        logging.getLogger(__name__).warning("Ignoring non-integer %s%s=%r", _ENV_PREFIX, name, raw)
        return default


def configure_logging(level: Optional[str] = None) -> None:
    lvl_name = (level or get_setting("LOG_LEVEL", "INFO") or "INFO").upper()
    lvl = getattr(logging, lvl_name, logging.INFO)
    root = logging.getLogger("fxgrad")
    root.setLevel(lvl)
    if not any(getattr(h, "_fxgrad", False) for h in root.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._fxgrad = True  # type: ignore[attr-defined]
        root.addHandler(handler)
