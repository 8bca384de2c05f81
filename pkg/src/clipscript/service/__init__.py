"""Persistence, background jobs, HTTP API, and service assembly."""

from .core import Service, ServiceConfig
from .jobs import Job, JobInterrupted, JobRunner, JobStore
from .storage import SessionStore

__all__ = [
    "Service",
    "ServiceConfig",
    "Job",
    "JobInterrupted",
    "JobRunner",
    "JobStore",
    "SessionStore",
]
