"""Parsers for decision log and trajectory files."""

from app.parsers.decision_log_parser import parse_log_file, parse_trajectory_file

__all__ = ['parse_log_file', 'parse_trajectory_file']
