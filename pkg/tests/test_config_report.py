import numpy as np
import pytest

from tsdsim import errors
from tsdsim.config import ExperimentConfig, parse_config
from tsdsim.report import (
    Report,
    emit_report,
    fmt,
    probability_rows,
    render_table,
    render_text,
)


def write_config(tmp_path, text):
    path = tmp_path / "config.toml"
    path.write_text(text)
    return path


class TestParseConfig:
    def test_defaults(self):
        config = parse_config(experiment="chsh")
        assert config.model_kind == "singlet"
        assert config.e0 == 25.0
        assert config.seed == 1

    def test_file_values(self, tmp_path):
        path = write_config(tmp_path, """
[model]
kind = "singlet"
e0 = 9.0

[detector]
dt = 0.02
kappa = 0.08
threshold = 100.0

[run]
trials = 123
seed = 77
""")
        config = parse_config(path=path, experiment="born-joint")
        assert config.e0 == 9.0
        assert config.trials == 123
        assert config.seed == 77

    def test_override_precedence(self, tmp_path):
        path = write_config(tmp_path, "[run]\nseed = 5\n")
        config = parse_config(
            path=path,
            overrides={"run": {"seed": 9}},
            experiment="chsh",
            preset={"run": {"seed": 1, "trials": 50}},
        )
        assert config.seed == 9      # flag beats file
        assert config.trials == 50   # preset fills the gap

    def test_none_override_ignored(self, tmp_path):
        path = write_config(tmp_path, "[run]\nseed = 5\n")
        config = parse_config(
            path=path, overrides={"run": {"seed": None}}, experiment="chsh"
        )
        assert config.seed == 5

    def test_unknown_section_rejected(self, tmp_path):
        path = write_config(tmp_path, "[detctor]\ndt = 0.01\n")
        with pytest.raises(errors.ValidationError, match="detctor"):
            parse_config(path=path, experiment="chsh")

    def test_unknown_key_rejected(self, tmp_path):
        path = write_config(tmp_path, "[detector]\nthreshhold = 4.0\n")
        with pytest.raises(errors.ValidationError, match="threshhold"):
            parse_config(path=path, experiment="chsh")

    def test_malformed_toml(self, tmp_path):
        path = write_config(tmp_path, "[detector\ndt = 0.01\n")
        with pytest.raises(errors.ParseError):
            parse_config(path=path, experiment="chsh")

    def test_complex_matrix_entries(self, tmp_path):
        path = write_config(tmp_path, """
[model]
kind = "matrix"
sigma12 = [[0.0, 0.5], [0.5, 0.0], [-0.5, 0.0], [0.0, -0.5]]
e0 = 4.0
""")
        config = parse_config(path=path, experiment="born-joint")
        mat = config.sigma12_matrix()
        np.testing.assert_allclose(
            mat, [[0.5j, 0.5], [-0.5, -0.5j]], atol=1e-15
        )
        model = config.correlation_model()
        assert model.background_energy == 4.0


class TestConfigValidation:
    def kwargs(self, **over):
        base = dict(experiment="chsh", dt=0.01, kappa=0.04, threshold=50.0)
        base.update(over)
        return base

    def test_kappa_must_be_multiple_of_dt(self):
        with pytest.raises(errors.ValidationError):
            ExperimentConfig(**self.kwargs(kappa=0.015, dt=0.01))

    def test_window_must_be_multiple_of_dt(self):
        with pytest.raises(errors.ValidationError):
            ExperimentConfig(**self.kwargs(coincidence_window=0.017))

    def test_bad_mode(self):
        with pytest.raises(errors.ValidationError):
            ExperimentConfig(**self.kwargs(mode="sequential"))

    def test_bad_angle_count(self):
        with pytest.raises(errors.ValidationError):
            ExperimentConfig(**self.kwargs(angles=(0.0, 1.0)))

    def test_negative_trials(self):
        with pytest.raises(errors.ValidationError):
            ExperimentConfig(**self.kwargs(trials=0))

    def test_matrix_kind_requires_sigma12(self):
        config = ExperimentConfig(**self.kwargs(model_kind="matrix"))
        with pytest.raises(errors.ValidationError):
            config.correlation_model()

    def test_single_kind_has_no_bi_signal(self):
        config = ExperimentConfig(**self.kwargs(model_kind="single"))
        with pytest.raises(errors.ValidationError):
            config.correlation_model()

    def test_builders(self):
        config = ExperimentConfig(
            **self.kwargs(e0=25.0, max_time=200.0, coincidence_window=0.04)
        )
        det = config.detector_params()
        assert det.background == 25.0
        assert det.max_time == 200.0
        assert config.coincidence_params().coincidence_window == 0.04
        assert config.discretization().max_bins == 20000
        model = config.correlation_model()
        assert model.dim == 2


def sample_report():
    return Report(
        kind="born-single",
        config_items=[("run.seed", 1), ("detector.dt", 0.01)],
        rows=[
            {"label": "channel 0", "count": 10, "probability": 0.25,
             "std_error": 0.01, "oracle": 0.3},
            {"label": "channel 1", "count": 30, "probability": 0.75,
             "std_error": 0.01, "oracle": 0.7},
        ],
        scalars=[
            {"label": "mean_click_time", "value": 12.3456789,
             "std_error": 0.5, "oracle": None},
        ],
        diagnostics=[("total_clicks", 40)],
    )


class TestRendering:
    def test_fmt_six_significant_digits(self):
        assert fmt(12.3456789) == "12.3457"
        assert fmt(0.000123456789) == "0.000123457"
        assert fmt(7) == "7"
        assert fmt(True) == "True"
        assert fmt("abc") == "abc"

    def test_text_sections(self):
        text = render_text(sample_report())
        assert "experiment: born-single" in text
        assert "[config]" in text
        assert "[probabilities]" in text
        assert "channel 0, 10, 0.25, 0.01, 0.3, -0.05" in text
        assert "mean_click_time = 12.3457 +/- 0.5" in text
        assert "regime_violation = false" in text

    def test_table_rows(self):
        table = render_table(sample_report())
        lines = table.strip().split("\n")
        assert lines[0] == "section,label,value,std_error,oracle,discrepancy"
        assert "probability,channel 0,0.25,0.01,0.3,-0.05" in lines
        assert "diagnostic,total_clicks,40,,," in lines

    def test_rendering_deterministic(self):
        assert render_text(sample_report()) == render_text(sample_report())
        assert render_table(sample_report()) == render_table(sample_report())

    def test_exit_code(self):
        report = sample_report()
        assert report.exit_code == 0
        report.regime_violation = True
        assert report.exit_code == 2

    def test_emit_writes_both_files(self, tmp_path):
        paths = emit_report(sample_report(), tmp_path, "table")
        assert paths["report"].read_text() == render_text(sample_report())
        assert paths["table"].read_text() == render_table(sample_report())

    def test_probability_rows_roundtrip(self):
        from tsdsim.detector import ProbabilityReport

        rep = ProbabilityReport(
            labels=("a", "b"),
            counts=np.array([5, 15]),
            probabilities=np.array([0.25, 0.75]),
            std_errors=np.array([0.02, 0.02]),
            oracle=np.array([0.3, 0.7]),
            tau_mean=1.0,
            tau_se=0.1,
            n_trials=20,
            n_successful=20,
        )
        rows = probability_rows(rep)
        assert rows[0]["label"] == "a"
        assert rows[1]["count"] == 15
        assert rep.max_discrepancy == pytest.approx(0.05)
