"""Backend families serving the seven cognition roles."""

from .base import BackendProfile, BackendSet, Family, Role
from .oracle import OracleFamily, oracle_backends

__all__ = ["BackendProfile", "BackendSet", "Family", "OracleFamily", "Role", "oracle_backends"]
