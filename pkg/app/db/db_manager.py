import logging
import os
import uuid
from typing import Any, Dict, List, Optional

import duckdb
import yaml

from app.models import AuditReport
from app.reports.report_writer import report_to_dict

logger = logging.getLogger(__name__)


class AuditDBManager:
    """
    Audit history store using DuckDB.
    Keeps one row per CLI run with the headline numbers and the full report.
    """

    def __init__(self, db_path: str = "audit_history.duckdb"):
        """
        Initialize the database manager.

        Args:
            db_path: Path to the DuckDB database file, or ":memory:"
        """
        self.db_path = db_path
        self.conn = None
        self.initialize_db()

    def initialize_db(self):
        """Initialize the database connection and create tables if they don't exist."""
        try:
            db_dir = os.path.dirname(self.db_path)
            if db_dir and self.db_path != ":memory:" and not os.path.exists(db_dir):
                os.makedirs(db_dir)

            self.conn = duckdb.connect(self.db_path)
            logger.info(f"Connected to database: {self.db_path}")
            self.initialize_db_tables()
        except Exception as e:
            logger.error(f"Error initializing database: {str(e)}")
            raise

    def initialize_db_tables(self):
        """Create database tables if they don't exist."""
        self.conn.execute("""
            CREATE TABLE IF NOT EXISTS audit_runs (
                run_id VARCHAR PRIMARY KEY,
                command VARCHAR,
                agent_id VARCHAR,
                method VARCHAR,
                recovered_ratio DOUBLE,
                weight_ratio DOUBLE,
                seed BIGINT,
                report_yaml VARCHAR,
                created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
            )
        """)
        logger.debug("Database tables initialized")

    def close(self):
        """Close the database connection."""
        if self.conn:
            try:
                self.conn.close()
                logger.info("Database connection closed")
            except Exception as e:
                logger.error(f"Error closing database connection: {str(e)}")
            self.conn = None

    def store_report(self, report: AuditReport) -> str:
        """
        Store one report.

        Args:
            report: The report written for the run

        Returns:
            The generated run_id
        """
        run_id = f"run_{uuid.uuid4().hex[:12]}"
        weight_ratio = None
        if report.weight_ratio:
            weight_ratio = report.weight_ratio.get(report.weight_ratio.get("selected"))
        report_yaml = yaml.safe_dump(report_to_dict(report), sort_keys=False)

        self.conn.execute(
            """
            INSERT INTO audit_runs
            (run_id, command, agent_id, method, recovered_ratio, weight_ratio, seed, report_yaml)
            VALUES (?, ?, ?, ?, ?, ?, ?, ?)
            """,
            (run_id, report.metadata.get("command"), report.agent_id, report.method,
             report.recovered_ratio, weight_ratio, report.seed, report_yaml)
        )
        logger.info(f"Stored {report.metadata.get('command')} run as {run_id}")
        return run_id

    def get_all_runs(self, limit: Optional[int] = None) -> List[Dict[str, Any]]:
        """
        Get the headline numbers of stored runs, newest first.

        Returns:
            List of dictionaries with run information
        """
        query = """
            SELECT run_id, command, agent_id, method, recovered_ratio, weight_ratio, seed, created_at
            FROM audit_runs
            ORDER BY created_at DESC, run_id
        """
        if limit is not None:
            query += f" LIMIT {int(limit)}"
        result = self.conn.execute(query).fetchall()

        columns = ['run_id', 'command', 'agent_id', 'method', 'recovered_ratio',
                   'weight_ratio', 'seed', 'created_at']
        return [dict(zip(columns, row)) for row in result]

    def get_run_details(self, run_id: str) -> Optional[Dict[str, Any]]:
        """
        Get the full stored report of one run.

        Args:
            run_id: The ID of the run

        Returns:
            The report as a dictionary, or None if the run is unknown
        """
        row = self.conn.execute(
            "SELECT report_yaml FROM audit_runs WHERE run_id = ?", (run_id,)
        ).fetchone()
        if row is None:
            logger.warning(f"No run with id {run_id}")
            return None
        return yaml.safe_load(row[0])


# Create a singleton instance
db_manager = None


def get_db_manager(db_path: str = None) -> AuditDBManager:
    """
    Get a singleton instance of the AuditDBManager.

    Args:
        db_path: Optional path to the database file; a different path
            replaces the current instance

    Returns:
        AuditDBManager instance
    """
    global db_manager

    if db_manager is not None and db_path is not None and db_manager.db_path != db_path:
        db_manager.close()
        db_manager = None

    if db_manager is not None and db_manager.conn is None:
        db_manager = None

    if db_manager is None:
        if db_path is None:
            project_root = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
            db_path = os.path.join(project_root, "data", "audit_history.duckdb")
        db_manager = AuditDBManager(db_path)

    return db_manager
