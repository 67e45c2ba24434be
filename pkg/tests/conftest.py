import numpy as np
import pytest

from stochnse import fields, spectral_basis
from stochnse.fields import SpectralField
from stochnse.spectral_basis import ModeIndex


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def two_mode_xi():
    return SpectralField.from_modes({ModeIndex.vec0(1, 0): 0.5, ModeIndex.vec0(0, 1): 0.5})


@pytest.fixture
def cosine_sign_bug(monkeypatch):
    """Flip the sign of d/dx on the cosine factors only (a plausible transcription slip)."""
    original = spectral_basis.derivative_mode

    def broken(mode, j):
        c, target = original(mode, j)
        return (-c if j == 1 and mode.k > 0 else c), target

    monkeypatch.setattr(spectral_basis, "derivative_mode", broken)
    fields.clear_caches()
    yield
    monkeypatch.undo()
    fields.clear_caches()


def random_field(rng, n, decay=1.0):
    ms = spectral_basis.build_mode_set(n)
    lam = ms.eigenvalues()
    return SpectralField(ms, rng.standard_normal(len(ms)) * (lam / lam[0]) ** (-decay / 2))


# one line per acceptance criterion, echoed after the run (visible without -s)
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
