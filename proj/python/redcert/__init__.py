"""Redaction certificates for label-pair predictions."""

from ._redcert import *  # noqa: F401,F403
from ._redcert import __doc__  # noqa: F401

__version__ = "0.1.0"
