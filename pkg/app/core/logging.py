# File: app/core/logging.py
"""
Logging configuration.
"""
import logging
import sys
from typing import Optional

from app.config import Settings, get_settings

def setup_logging(settings: Optional[Settings] = None, level: Optional[str] = None) -> logging.Logger:
    """Configure application logging."""
    settings = settings or get_settings()
    level_name = (level or settings.log_level).upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format=settings.log_format,
        handlers=[
            logging.StreamHandler(sys.stdout)
        ],
        force=True,
    )

    # Third-party libraries stay quiet unless something is wrong
    loggers_config = {
        "numpy": logging.WARNING,
        "scipy": logging.WARNING,
        "matplotlib": logging.WARNING,
    }

    for logger_name, logger_level in loggers_config.items():
        logging.getLogger(logger_name).setLevel(logger_level)

    if settings.debug:
        logging.getLogger("app").setLevel(logging.DEBUG)

    return logging.getLogger("app")
