"""
Configuration file for PLP-GEM
Centralizes all hard-coded values for easy maintenance
"""
from pathlib import Path


class Config:
    """Application configuration"""

    # Application Info
    APP_NAME = "PLP-GEM - Parameter Learning for Logic Programs"
    VERSION = "1.0.0"

    # Paths
    BASE_DIR = Path(__file__).parent.parent.absolute()
    DATA_DIR = (BASE_DIR / "data").absolute()
    LOGS_DIR = (BASE_DIR / "logs").absolute()
    PROGRAMS_DIR = (DATA_DIR / "programs").absolute()

    # Run database
    DB_NAME = "runs.db"
    DB_PATH = (DATA_DIR / DB_NAME).absolute()

    # Logging
    LOG_FILE = "plpgem.log"
    LOG_LEVEL = "INFO"  # DEBUG, INFO, WARNING, ERROR, CRITICAL
    LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s"
    LOG_MAX_BYTES = 10 * 1024 * 1024  # 10MB
    LOG_BACKUP_COUNT = 5
    CONSOLE_LOG_LEVEL = "WARNING"  # stdout is reserved for command output
    LOGGER_NAME = "plpgem"

    # Numeric tolerances
    SUM_TOLERANCE = 1e-12  # switch rows must sum to 1 within this
    MONOTONE_TOLERANCE = 1e-9  # allowed log-likelihood decrease per iteration

    # EM defaults
    EPSILON = 1e-6
    MAX_ITERATIONS = 1000
    INIT_MODES = ['uniform', 'random']
    DEFAULT_INIT_MODE = 'uniform'
    DEFAULT_SEED = 0

    # Search bounds
    MAX_RESOLUTION_STEPS = 10 ** 6
    MAX_EXPLANATIONS = 10 ** 6  # cap for exhaustive enumeration and flattening
    MAX_BN_STATES = 10 ** 6  # cap for joint enumeration in the BN oracle

    # Output
    PROBABILITY_DIGITS = 12

    # CLI exit codes
    EXIT_OK = 0
    EXIT_MODEL_ERROR = 1
    EXIT_USAGE_ERROR = 2

    @classmethod
    def ensure_directories(cls):
        """Ensure all required directories exist"""
        cls.DATA_DIR.mkdir(exist_ok=True, parents=True)
        cls.LOGS_DIR.mkdir(exist_ok=True, parents=True)

    @classmethod
    def get_db_path(cls):
        """Get run database path as string"""
        return str(cls.DB_PATH)

    @classmethod
    def get_log_path(cls):
        """Get log file path as string"""
        return str(cls.LOGS_DIR / cls.LOG_FILE)

    @classmethod
    def get_program_path(cls, name):
        """Get the path of a bundled example program"""
        return cls.PROGRAMS_DIR / f"{name}.psm"

    @classmethod
    def is_valid_init_mode(cls, mode):
        """Check if parameter initialization mode is valid"""
        return str(mode).lower() in cls.INIT_MODES

    @classmethod
    def format_probability(cls, value):
        """Format a probability for printing"""
        return f"{value:.{cls.PROBABILITY_DIGITS}g}"


# Initialize directories on module import
Config.ensure_directories()
