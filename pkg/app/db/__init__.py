"""Database package for the audit history."""

from app.db.db_manager import get_db_manager

__all__ = ['get_db_manager']
