"""
Logging and Error Handling System
"""
import logging
import sys
from pathlib import Path
from datetime import datetime
from logging.handlers import RotatingFileHandler
from config import LOG_CONFIG, DIRS

class ToolkitLogger:
    """Centralized logging system for the toolkit"""

    def __init__(self, name: str = 'HenonToolkit'):
        self.logger = logging.getLogger(name)
        self.logger.setLevel(logging.DEBUG)

        # Prevent duplicate handlers
        if self.logger.handlers:
            return

        # File handler with rotation
        file_handler = RotatingFileHandler(
            LOG_CONFIG['log_file'],
            maxBytes=LOG_CONFIG['max_log_size'],
            backupCount=LOG_CONFIG['backup_count']
        )
        file_handler.setLevel(logging.DEBUG)
        file_formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )
        file_handler.setFormatter(file_formatter)

        # Console handler
        console_handler = logging.StreamHandler(sys.stdout)
        console_handler.setLevel(getattr(logging, LOG_CONFIG['log_level'], logging.INFO))
        console_handler.setFormatter(logging.Formatter('%(levelname)s: %(message)s'))

        self.logger.addHandler(file_handler)
        self.logger.addHandler(console_handler)

    def info(self, message: str):
        """Log info message"""
        self.logger.info(message)

    def error(self, message: str):
        """Log error message"""
        self.logger.error(message)

    def warning(self, message: str):
        """Log warning message"""
        self.logger.warning(message)

    def debug(self, message: str):
        """Log debug message"""
        self.logger.debug(message)

    def critical(self, message: str):
        """Log critical message"""
        self.logger.critical(message)

    def log_run_start(self, command: str, params: dict):
        """Log the start of a run"""
        self.info("=" * 80)
        self.info(f"RUN STARTED: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
        self.info(f"Command: {command}")
        for key in ('a', 'b', 'orientation'):
            if key in params:
                self.info(f"{key}: {params[key]}")
        self.info("=" * 80)

    def log_run_complete(self, output_files: list):
        """Log successful completion"""
        self.info("=" * 80)
        self.info(f"RUN COMPLETED: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
        self.info(f"Generated {len(output_files)} output files:")
        for file in output_files:
            self.info(f"  - {file}")
        self.info("=" * 80)

    def log_run_error(self, error: Exception, stage: str):
        """Log run failure"""
        self.error("=" * 80)
        self.error(f"RUN FAILED at stage: {stage}")
        self.error(f"Error: {str(error)}")
        self.error(f"Error Type: {type(error).__name__}")
        self.error("=" * 80)

    def create_run_report(self, run_id: str, status: str, details: dict) -> Path:
        """
        Create a detailed run report

        Args:
            run_id: Unique run identifier
            status: Run status (success/failed)
            details: Dictionary with run details

        Returns:
            Path to the report file
        """
        report_dir = DIRS['logs'] / 'reports'
        report_dir.mkdir(exist_ok=True)

        report_file = report_dir / f"run_{run_id}_{datetime.now().strftime('%Y%m%d_%H%M%S')}.txt"

        with open(report_file, 'w', encoding='utf-8') as f:
            f.write("RUN REPORT\n")
            f.write(f"{'=' * 80}\n")
            f.write(f"Run ID: {run_id}\n")
            f.write(f"Status: {status}\n")
            f.write(f"Timestamp: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}\n")
            f.write(f"{'=' * 80}\n\n")

            for key, value in details.items():
                f.write(f"{key}: {value}\n")

        self.debug(f"Run report created: {report_file}")
        return report_file


class ToolkitError(Exception):
    """Base exception for toolkit errors"""
    exit_code = 1

class ConfigError(ToolkitError):
    """Malformed or out-of-range configuration"""
    exit_code = 2

class MissingPrerequisite(ToolkitError):
    """A command needs an artifact that has not been computed yet"""
    exit_code = 3

class NumericalError(ToolkitError):
    """Base class for failures of a numerical construction"""
    exit_code = 4

class PreconditionError(NumericalError):
    """Inputs violate the precondition of an operation"""
    pass

class ModifiedFamilyUnavailable(NumericalError):
    """The trapping region was not built for these parameters"""
    pass

class NumericOverflow(NumericalError):
    """Orbit left the overflow bound; carries the step and the points so far"""

    def __init__(self, message: str, step: int = None, points=None):
        super().__init__(message)
        self.step = step
        self.points = points

class NotInvertible(NumericalError):
    """Degenerate family has no inverse"""
    pass

class DegenerateSingularValues(NumericalError):
    """Singular values too close for a most contracting direction"""
    pass

class ExpansionHypothesisViolated(NumericalError):
    """Cocycle norms fell below the required exponential rate"""
    pass

class NoHyperbolicTimes(NumericalError):
    """Greedy hyperbolic-time search failed"""
    pass

class NewtonDiverged(NumericalError):
    """Newton iteration did not converge"""
    pass

class ResolutionExhausted(NumericalError):
    """Adaptive refinement hit the vertex cap"""
    pass

class BoundaryNotClosed(NumericalError):
    """Unstable and stable boundary pieces do not close up"""
    pass

class FieldDegenerate(NumericalError):
    """Contracting direction field undefined or horizontal"""
    pass

class AmbiguousTangency(NumericalError):
    """Quadratic fit cannot decide between tangency and two roots"""
    pass

class LeafMissesTarget(NumericalError):
    """A stable leaf does not reach the target curve"""
    pass

class NoSignChange(NumericalError):
    """Tangency function has no bracket on the host curve"""
    pass

class HypothesisViolated(NumericalError):
    """Closeness or angle hypothesis of an update step failed"""
    pass

class NoTangency(NumericalError):
    """Free segment does not cross the fold region"""
    pass

class ComponentResolutionLost(NumericalError):
    """Critical region components thinner than the working precision"""

    def __init__(self, message: str, regions=None):
        super().__init__(message)
        self.regions = regions or []

class CriticalPosition(NumericalError):
    """Return lands too deep for a bound period"""
    pass

class LadderExhausted(NumericalError):
    """No ladder level gives tangential position"""
    pass

class ControlLost(NumericalError):
    """Free return with no binding point available"""
    pass

class NoBracket(NumericalError):
    """Bisection indicator does not change across the bracket"""
    pass

class TrackLost(NumericalError):
    """Deformation re-solve failed or jumped"""
    pass

class NoCrossing(NumericalError):
    """Tracks never cross"""
    pass

class MultipleCrossings(NumericalError):
    """Tracks cross more than once"""
    pass

class DepthExhausted(NumericalError):
    """Stopping-time recursion reached its depth with mass left; carries the partial partition"""

    def __init__(self, message: str, partition=None):
        super().__init__(message)
        self.partition = partition

class RegionUnavailable(NumericalError):
    """Close-return region level above the resolved range"""
    pass

class SampleStarved(NumericalError):
    """Too few Monte Carlo survivors"""
    pass


# Global logger instance
logger = ToolkitLogger()


if __name__ == '__main__':
    logger.info("Logger initialized successfully")
    logger.debug("This is a debug message")
    logger.warning("This is a warning message")
    logger.error("This is an error message")

    test_details = {
        'command': 'fixed-points',
        'a': 2.0,
        'b': 1e-4,
        'orientation': 'reversing',
    }
    logger.create_run_report('TEST123', 'success', test_details)
    print(f"\nLog file location: {LOG_CONFIG['log_file']}")
