import logging
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import pandas as pd

from app.config import DESTINATION_KM, HORIZON_TOLERANCE, LOG_HEADER, TRAJECTORY_HEADER
from app.errors import ParseError
from app.models import DecisionLog, Trajectory

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class CsvRecordParser:
    """Reads a headed CSV file whose columns must all be present and well formed."""

    required_columns: List[str] = []

    def __init__(self, file_path: PathLike):
        """Initialize the parser with the file path."""
        self.file_path = str(file_path)
        self.frame: Optional[pd.DataFrame] = None
        self.header_line = 1
        self.line_numbers: List[int] = []

    def _read_file(self) -> None:
        """Read the file as text so that every cell can be validated with its line number."""
        logger.info(f"Reading file: {self.file_path}")
        try:
            self.frame = pd.read_csv(self.file_path, dtype=str, keep_default_na=False,
                                     skipinitialspace=True, encoding="utf-8")
        except FileNotFoundError:
            raise ParseError("file not found", self.file_path)
        except pd.errors.EmptyDataError:
            raise ParseError("file is empty; expected a header line", self.file_path, line=1)
        except (pd.errors.ParserError, UnicodeDecodeError) as e:
            raise ParseError(f"not a valid UTF-8 CSV file: {e}", self.file_path)
        self.frame.columns = [str(c).strip() for c in self.frame.columns]
        self._number_lines()
        logger.info(f"Read {len(self.frame)} rows")

    def _check_columns(self) -> None:
        for column in self.required_columns:
            if column not in self.frame.columns:
                raise ParseError(f"missing column '{column}' (header is {','.join(self.frame.columns)})",
                                 self.file_path, line=self.header_line, column=column)

    def _number_lines(self) -> None:
        # pandas drops blank lines, so rows are matched to the non-blank physical lines
        with open(self.file_path, encoding="utf-8") as f:
            content = [number for number, line in enumerate(f.read().splitlines(), start=1) if line.strip()]
        self.header_line = content[0] if content else 1
        self.line_numbers = content[1:]

    def _line_of(self, row_index: int) -> int:
        if row_index < len(self.line_numbers):
            return self.line_numbers[row_index]
        return row_index + 2

    def _float_column(self, column: str) -> np.ndarray:
        values = np.empty(len(self.frame))
        for i, cell in enumerate(self.frame[column]):
            try:
                values[i] = float(cell)
            except ValueError:
                raise ParseError(f"'{cell}' is not a number", self.file_path, self._line_of(i), column)
            if not np.isfinite(values[i]):
                raise ParseError(f"'{cell}' is not finite", self.file_path, self._line_of(i), column)
        return values

    def _binary_column(self, column: str) -> np.ndarray:
        values = np.empty(len(self.frame), dtype=np.int8)
        for i, cell in enumerate(self.frame[column]):
            if cell not in ("0", "1"):
                raise ParseError(f"'{cell}' must be literally 0 or 1", self.file_path,
                                 self._line_of(i), column)
            values[i] = int(cell)
        return values


class DecisionLogParser(CsvRecordParser):
    """Parser for decision log files with header score,action,truth."""

    required_columns = LOG_HEADER

    def parse(self) -> DecisionLog:
        """Parse the log file into a DecisionLog."""
        self._read_file()
        self._check_columns()
        log = DecisionLog(scores=self._float_column("score"),
                          actions=self._binary_column("action"),
                          truths=self._binary_column("truth"))
        logger.info(f"Parsed decision log: {len(log)} records, {log.n_negative} with truth=0, "
                    f"{log.n_positive} with truth=1")
        return log


class TrajectoryParser(CsvRecordParser):
    """Parser for observed trajectories with header t,x,u and a uniform time step."""

    required_columns = TRAJECTORY_HEADER

    def __init__(self, file_path: PathLike, destination: float = DESTINATION_KM):
        super().__init__(file_path)
        self.destination = destination

    def parse(self) -> Trajectory:
        """Parse the trajectory file; dt is the spacing of the t column."""
        self._read_file()
        self._check_columns()
        times = self._float_column("t")
        positions = self._float_column("x")
        speeds = self._float_column("u")
        if len(times) < 2:
            raise ParseError("a trajectory needs at least two rows", self.file_path)

        dt = float(times[1] - times[0])
        arrived = positions >= self.destination - HORIZON_TOLERANCE
        try:
            trajectory = Trajectory(times=times, positions=positions, speeds=speeds, arrived=arrived,
                                    dt=dt, destination=self.destination)
        except ValueError as e:
            raise ParseError(f"not a valid trajectory: {e}", self.file_path)
        logger.info(f"Parsed trajectory: {len(trajectory)} steps, dt={dt}, "
                    f"final x={trajectory.final_position}")
        return trajectory


def parse_log_file(file_path: PathLike) -> DecisionLog:
    """
    Parse a decision log file.

    Args:
        file_path: Path to a CSV file with header score,action,truth

    Returns:
        DecisionLog
    """
    return DecisionLogParser(file_path).parse()


def parse_trajectory_file(file_path: PathLike, destination: float = DESTINATION_KM) -> Trajectory:
    """
    Parse an observed trajectory file.

    Args:
        file_path: Path to a CSV file with header t,x,u
        destination: Destination in km; rows at it count as arrived

    Returns:
        Trajectory
    """
    return TrajectoryParser(file_path, destination).parse()
