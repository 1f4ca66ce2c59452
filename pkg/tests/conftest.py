import pytest
import yaml

SMALL = {
    "master_seed": 7,
    "cohort": {"cases_per_disease": 12, "volume_shape": [16, 16, 16]},
    "autoencoder": {"encoder_widths": [16, 4], "epochs": 3, "n_train_per_disease": 8},
    "stream": {"n_known_per_disease": 12, "n_novel": 12},
    "detector": {"w_s": [4, 6], "R": [1.1, 1.3], "n_replicates": 3, "n_calibration_streams": 10},
    "ablation": {"n_per_disease": 6, "n_components": 4},
}


@pytest.fixture
def small_config(tmp_path):
    def write(**overrides):
        raw = yaml.safe_load(yaml.safe_dump(SMALL))
        for section, values in overrides.items():
            if isinstance(values, dict):
                raw.setdefault(section, {}).update(values)
            else:
                raw[section] = values
        path = tmp_path / f"cfg{len(list(tmp_path.glob('cfg*.yaml')))}.yaml"
        path.write_text(yaml.safe_dump(raw))
        return path

    return write


def pytest_configure(config):
    config.acceptance_lines = []


@pytest.fixture(scope="session")
def acceptance_log(request):
    return request.config.acceptance_lines


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
