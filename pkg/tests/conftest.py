import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from csiorient.synth import SynthConfig, synth_generate  # noqa: E402


@pytest.fixture(scope="session")
def small_cfg():
    return SynthConfig(S=6, T=64, A=3, users=2, samples_per_cell=5, noise_std=0.5, seed=3)


@pytest.fixture(scope="session")
def small_dataset(small_cfg):
    return synth_generate(small_cfg)


@pytest.fixture(scope="session")
def small_dir(tmp_path_factory, small_cfg):
    out = tmp_path_factory.mktemp("synth")
    synth_generate(small_cfg, out)
    return out


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
