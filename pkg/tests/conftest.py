"""
Pytest configuration and fixtures
"""
import pytest
import sys
import os
from pathlib import Path
import tempfile
import shutil

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from config import Config
from core.parameters import load_parameters
from core.program import parse_program, parse_observations

BUNDLED_PROGRAMS = ('coin', 'blood', 'dbp', 'hmm', 'pcfg', 'pcsg', 'bn')


def read_bundled(kind, name, suffix):
    with open(Config.DATA_DIR / kind / f"{name}.{suffix}", 'r', encoding='utf-8') as f:
        return f.read()


def load_bundled(name, with_params=True):
    """A bundled program, with its parameter file applied when there is one"""
    program = parse_program(read_bundled('programs', name, 'psm'))
    params_path = Config.DATA_DIR / 'params' / f"{name}.params"
    if with_params and params_path.exists():
        load_parameters(read_bundled('params', name, 'params'), program.params)
    return program


def load_observations(name):
    return parse_observations(read_bundled('observations', name, 'obs'))


@pytest.fixture
def temp_dir():
    """Create a temporary directory for tests"""
    temp_path = tempfile.mkdtemp()
    yield temp_path
    shutil.rmtree(temp_path, ignore_errors=True)


@pytest.fixture
def temp_db_path(temp_dir):
    """Provide a temporary database path"""
    return os.path.join(temp_dir, "test_runs.db")


@pytest.fixture
def coin_program():
    return load_bundled('coin')


@pytest.fixture
def blood_program():
    """Blood-type program with gene probabilities a=0.5, b=0.2, o=0.3"""
    return load_bundled('blood')


@pytest.fixture
def dbp_program():
    """f/g/h program with s_ab=(0.3,0.7), s_cd=(0.4,0.6), s_m=(0.5,0.5)"""
    return load_bundled('dbp')


@pytest.fixture
def hmm_program_bundled():
    return load_bundled('hmm')


@pytest.fixture
def bn_program():
    return load_bundled('bn')


@pytest.fixture(params=BUNDLED_PROGRAMS)
def bundled(request):
    """(name, program, observations) for every bundled example"""
    name = request.param
    return name, load_bundled(name), load_observations(name)


@pytest.fixture
def bundled_program():
    """Loader for bundled programs by name"""
    return load_bundled


@pytest.fixture
def bundled_observations():
    """Loader for bundled observation files by name"""
    return load_observations
