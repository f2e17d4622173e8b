import itertools

import numpy as np
import pytest

from subgroup_crt.design import Design, FixedEffects, setting_components
from subgroup_crt.simulate import simulate, substream_seed


def small_design(level, dims):
    return Design.level_one(*dims) if level == 1 else Design.level_two(*dims)


def small_instances(level, count, master=2024):
    """Seeded datasets with every size in {2, 3, 4}."""
    rng = np.random.default_rng(master + level)
    vc = setting_components("I", level)
    fx = FixedEffects(0.3, -0.2, 0.5, 0.4)
    out = []
    for r in range(count):
        design = small_design(level, rng.integers(2, 5, size=3))
        out.append(simulate(design, fx, vc, substream_seed(master, 100 * level + r)))
    return out


def all_small_designs(limit=4):
    """Every valid design with all three sizes at most ``limit``."""
    for level, dims in itertools.product((1, 2), itertools.product(range(1, limit + 1), repeat=3)):
        try:
            yield small_design(level, dims)
        except ValueError:
            continue


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# One line per acceptance criterion, collected by test_acceptance.py and
# printed at the end of the run whatever the capture mode.
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
