import numpy as np
import pytest

from willmore_lab import spectral as sp
from willmore_lab import surface as sf

_RUNS = {}


@pytest.fixture(scope="session")
def flower2():
    return sf.flower_data(2)


@pytest.fixture(scope="session")
def flower3():
    return sf.flower_data(3)


@pytest.fixture(scope="session")
def index_run():
    """Cached full or equivariant index runs keyed by (p, L, equivariant)."""
    flowers = {}

    def get(p, L, equivariant=False):
        key = (p, L, equivariant)
        if key not in _RUNS:
            data = flowers.setdefault(p, sf.flower_data(p))
            if equivariant:
                _RUNS[key] = sp.equivariant_index(data, L, p)
            else:
                _RUNS[key] = sp.compute_index(data, L)
        return _RUNS[key]
    return get


@pytest.fixture(scope="session")
def small_run(flower2):
    """Low degree basis with the three translation fields appended."""
    basis = sp.GalerkinBasis(4, extra=(sp.InvertedNormalField(),))
    seq = sp.assemble_form_eps(flower2, basis)
    form = sp.extrapolate_form(seq, strict=False)
    M = sp.mass_matrix(flower2, basis, check=False)
    return basis, seq, form, M


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
