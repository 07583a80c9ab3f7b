import sqlite3
import os
import sys
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))
from config import Config
from core.em import METHODS
from core.terms import format_term
from utils.logger import setup_logger

logger = setup_logger(__name__)


class RunStore:
    """sqlite record of learning runs and benchmark timings"""

    def __init__(self, db_path=None):
        self.db_path = db_path or Config.get_db_path()
        self.ensure_database_exists()

    def ensure_database_exists(self):
        try:
            db_dir = os.path.dirname(self.db_path)
            if db_dir:
                os.makedirs(db_dir, exist_ok=True)
            if not os.path.exists(self.db_path):
                logger.info(f"Run store not found, initializing: {self.db_path}")
                self.initialize_database()
            else:
                logger.info(f"Using existing run store: {self.db_path}")
        except Exception as e:
            logger.error(f"Failed to ensure run store exists: {e}", exc_info=True)
            raise

    def get_connection(self):
        try:
            return sqlite3.connect(self.db_path)
        except sqlite3.Error as e:
            logger.error(f"Run store connection failed: {e}", exc_info=True)
            raise

    def initialize_database(self):
        with self.get_connection() as conn:
            cursor = conn.cursor()

            cursor.execute('''
                CREATE TABLE runs (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    program TEXT NOT NULL,
                    observations TEXT,
                    method TEXT NOT NULL,
                    init_mode TEXT,
                    seed INTEGER,
                    epsilon REAL,
                    iterations INTEGER,
                    converged BOOLEAN,
                    log_likelihood REAL,
                    created_at DATETIME DEFAULT CURRENT_TIMESTAMP
                )
            ''')

            # One row per iteration, λ(0) included
            cursor.execute('''
                CREATE TABLE trace (
                    run_id INTEGER,
                    iteration INTEGER,
                    log_likelihood REAL,
                    PRIMARY KEY(run_id, iteration),
                    FOREIGN KEY(run_id) REFERENCES runs(id)
                )
            ''')

            cursor.execute('''
                CREATE TABLE parameters (
                    run_id INTEGER,
                    switch TEXT NOT NULL,
                    value TEXT NOT NULL,
                    probability REAL,
                    FOREIGN KEY(run_id) REFERENCES runs(id)
                )
            ''')

            cursor.execute('''
                CREATE TABLE timings (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    label TEXT NOT NULL,
                    sentence_length INTEGER,
                    graph_size INTEGER,
                    gem_seconds REAL,
                    oracle_seconds REAL,
                    created_at DATETIME DEFAULT CURRENT_TIMESTAMP
                )
            ''')
            conn.commit()

    def record_learn_run(self, program_name, result, observations_name=None, cfg=None):
        try:
            if not program_name or not program_name.strip():
                raise ValueError("Program name cannot be empty")
            if result.method not in METHODS:
                raise ValueError(f"Invalid method: {result.method}. Must be one of: {', '.join(METHODS)}")

            with self.get_connection() as conn:
                cursor = conn.cursor()
                cursor.execute('''
                    INSERT INTO runs
                    (program, observations, method, init_mode, seed, epsilon, iterations, converged, log_likelihood)
                    VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)
                ''', (
                    program_name.strip(), observations_name, result.method,
                    cfg.init_mode if cfg else None, cfg.seed if cfg else None,
                    cfg.epsilon if cfg else None, result.iterations,
                    bool(result.converged), result.log_likelihood
                ))
                run_id = cursor.lastrowid
                cursor.executemany(
                    'INSERT INTO trace (run_id, iteration, log_likelihood) VALUES (?, ?, ?)',
                    [(run_id, m, value) for m, value in enumerate(result.trace)]
                )
                cursor.executemany(
                    'INSERT INTO parameters (run_id, switch, value, probability) VALUES (?, ?, ?, ?)',
                    [(run_id, format_term(name, 999), format_term(value, 999), p)
                     for name, value, p in result.params.items()]
                )
                logger.info(f"Recorded {result.method} run on '{program_name}' (ID: {run_id})")
                return run_id
        except Exception as e:
            logger.error(f"Failed to record learning run: {e}", exc_info=True)
            raise

    def get_runs(self, program_name=None):
        with self.get_connection() as conn:
            cursor = conn.cursor()
            if program_name:
                cursor.execute('''
                    SELECT id, program, method, iterations, converged, log_likelihood, created_at
                    FROM runs WHERE program = ? ORDER BY id ASC
                ''', (program_name,))
            else:
                cursor.execute('''
                    SELECT id, program, method, iterations, converged, log_likelihood, created_at
                    FROM runs ORDER BY id ASC
                ''')
            return cursor.fetchall()

    def get_trace(self, run_id):
        with self.get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute(
                'SELECT log_likelihood FROM trace WHERE run_id = ? ORDER BY iteration ASC',
                (run_id,)
            )
            return [row[0] for row in cursor.fetchall()]

    def get_parameters(self, run_id):
        with self.get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute(
                'SELECT switch, value, probability FROM parameters WHERE run_id = ? ORDER BY rowid ASC',
                (run_id,)
            )
            return cursor.fetchall()

    def record_benchmark(self, label, points):
        """points: BenchmarkPoint rows from core.benchmark"""
        try:
            with self.get_connection() as conn:
                cursor = conn.cursor()
                cursor.executemany('''
                    INSERT INTO timings (label, sentence_length, graph_size, gem_seconds, oracle_seconds)
                    VALUES (?, ?, ?, ?, ?)
                ''', [(label, p.length, p.graph_size, p.gem_seconds, p.oracle_seconds) for p in points])
                logger.info(f"Recorded {len(points)} timings under '{label}'")
        except Exception as e:
            logger.error(f"Failed to record timings: {e}", exc_info=True)
            raise

    def get_timings(self, label=None):
        with self.get_connection() as conn:
            cursor = conn.cursor()
            if label:
                cursor.execute('''
                    SELECT label, sentence_length, graph_size, gem_seconds, oracle_seconds
                    FROM timings WHERE label = ? ORDER BY id ASC
                ''', (label,))
            else:
                cursor.execute('''
                    SELECT label, sentence_length, graph_size, gem_seconds, oracle_seconds
                    FROM timings ORDER BY id ASC
                ''')
            return cursor.fetchall()
