"""End-to-end tests of the JSON-config command line front end.

Each test writes a config to a temp directory and drives main() in process,
so exit codes and stdout/stderr are checked exactly as a shell user sees
them. Three Bernoulli(1/2) variables serve as the workhorse discrete case:
every derived number is a dyadic rational that survives JSON round trips.
"""
import json
import math

import pytest

from summax.cli import main, parse_config, serialize_config
from summax.errors import ConfigError
from summax.models import canonical_text


def write_config(tmp_path, doc, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def bernoulli_doc(n=3, p=0.5):
    return [{"kind": "discrete", "family": "bernoulli", "params": {"p": p}}
            for _ in range(n)]


EXP_VAR = {"kind": "continuous", "family": "exponential", "params": {"rate": 1.0}}


class TestParseConfig:
    def test_rejects_unknown_task(self):
        with pytest.raises(ConfigError, match="unknown task"):
            parse_config(json.dumps({"task": "quantile", "variables": [EXP_VAR]}))

    def test_rejects_invalid_json_with_line_number(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config("{task:")

    def test_rejects_empty_variables(self):
        with pytest.raises(ConfigError, match="at least one variable"):
            parse_config(json.dumps({"task": "pmf", "variables": []}))

    def test_rejects_unknown_family(self):
        doc = {"task": "pmf",
               "variables": [{"kind": "discrete", "family": "zeta",
                              "params": {"s": 2.0}}]}
        with pytest.raises(ConfigError, match="unknown discrete family"):
            parse_config(json.dumps(doc))

    def test_bad_tabulated_table_names_the_variable(self):
        doc = {"task": "cdf",
               "variables": [EXP_VAR,
                             {"kind": "continuous", "family": "tabulated",
                              "params": {"abscissae": [0.0, 1.0],
                                         "densities": [5.0, 5.0]}}],
               "query": {"points": [[1.0, 0.5]]}}
        with pytest.raises(ConfigError, match=r"variables\[1\]"):
            parse_config(json.dumps(doc))

    def test_rejects_mixed_variables_outside_cdf(self):
        doc = {"task": "papr",
               "variables": [EXP_VAR] + bernoulli_doc(1),
               "query": {"alpha": 1.0, "beta": 2.0}}
        with pytest.raises(ConfigError, match="mixed"):
            parse_config(json.dumps(doc))

    def test_rejects_unknown_keys(self):
        doc = {"task": "pmf", "variables": bernoulli_doc(), "grdi": {}}
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config(json.dumps(doc))

    def test_rejects_half_specified_grid_extent(self):
        doc = {"task": "pdf", "variables": [EXP_VAR, EXP_VAR],
               "grid": {"y_max": 8.0}}
        with pytest.raises(ConfigError, match="both y_max and z_max"):
            parse_config(json.dumps(doc))

    def test_rejects_papr_without_band(self):
        doc = {"task": "papr", "variables": bernoulli_doc()}
        with pytest.raises(ConfigError, match="alpha and beta"):
            parse_config(json.dumps(doc))

    def test_rejects_cdf_without_points(self):
        doc = {"task": "cdf", "variables": [EXP_VAR]}
        with pytest.raises(ConfigError, match="points"):
            parse_config(json.dumps(doc))

    def test_rejects_small_oracle_sample_budget(self):
        doc = {"task": "validate", "variables": bernoulli_doc(),
               "query": {"samples": 500}}
        with pytest.raises(ConfigError, match="1e4"):
            parse_config(json.dumps(doc))

    def test_rejects_shifted_variables_for_density_tasks(self):
        shifted = dict(EXP_VAR, shift=1.0)
        doc = {"task": "pdf", "variables": [shifted, EXP_VAR]}
        with pytest.raises(ConfigError, match="unshifted"):
            parse_config(json.dumps(doc))

    def test_round_trip_preserves_every_field(self):
        doc = {
            "task": "papr",
            "variables": [{"kind": "continuous", "family": "gamma",
                           "params": {"shape": 2.0, "rate": 1.5}},
                          {"kind": "continuous", "family": "uniform",
                           "params": {"lower": 0.0, "upper": 2.0}}],
            "grid": {"y_max": 10.0, "z_max": 5.0, "n_y": 128, "n_z": 64},
            "query": {"alpha": 1.0, "beta": 1.8},
            "output": {"format": "csv", "path": "out.csv"},
            "seed": 7,
            "epsilon": 1e-5,
        }
        first = parse_config(json.dumps(doc))
        second = parse_config(serialize_config(first))
        assert second.task == first.task
        assert [canonical_text(m) for m in second.models] \
            == [canonical_text(m) for m in first.models]
        assert second.grid == first.grid
        assert (second.alpha, second.beta) == (first.alpha, first.beta)
        assert second.seed == first.seed
        assert second.epsilon == first.epsilon
        assert second.output_format == first.output_format
        assert second.output_path == first.output_path


class TestCdfTask:
    def test_single_exponential_point(self, tmp_path, capsys):
        doc = {"task": "cdf", "variables": [EXP_VAR],
               "grid": {"y_max": 8.0, "z_max": 4.0, "n_y": 65, "n_z": 65},
               "query": {"points": [[2.0, 1.0]]}}
        assert main(["--config", write_config(tmp_path, doc)]) == 0
        envelope = json.loads(capsys.readouterr().out)
        assert envelope["spec"] == "summax-run-1"
        assert envelope["task"] == "cdf"
        assert envelope["n"] == 1
        y, z, value = envelope["results"]["points"][0]
        assert value == pytest.approx(1 - math.exp(-1.0), abs=1e-9)

    def test_csv_format_prints_point_rows(self, tmp_path, capsys):
        # both ones is the only outcome with sum above 1
        doc = {"task": "cdf", "variables": bernoulli_doc(2),
               "query": {"points": [[1.0, 1.0]]},
               "output": {"format": "csv"}}
        assert main(["--config", write_config(tmp_path, doc)]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "y,z,value"
        assert float(lines[1].split(",")[2]) == pytest.approx(0.75, abs=1e-15)

    def test_output_file_and_quiet(self, tmp_path, capsys):
        out = tmp_path / "res.json"
        doc = {"task": "cdf", "variables": bernoulli_doc(2),
               "query": {"points": [[1.0, 1.0]]}}
        cfg = write_config(tmp_path, doc)
        assert main(["--config", cfg, "--output", str(out)]) == 0
        assert f"wrote {out}" in capsys.readouterr().out
        assert main(["--config", cfg, "--output", str(out), "--quiet"]) == 0
        assert capsys.readouterr().out == ""
        assert json.loads(out.read_text())["results"]["points"][0][2] \
            == pytest.approx(0.75, abs=1e-15)

    def test_mixed_variables_point(self, tmp_path, capsys):
        doc = {"task": "cdf",
               "variables": [EXP_VAR] + bernoulli_doc(1),
               "grid": {"y_max": 16.0, "z_max": 8.0, "n_y": 257, "n_z": 257},
               "query": {"points": [[2.0, 1.0]]}}
        assert main(["--config", write_config(tmp_path, doc)]) == 0
        envelope = json.loads(capsys.readouterr().out)
        want = 0.5 * (1 - math.exp(-1.0)) + 0.5 * (1 - math.exp(-1.0))
        assert envelope["results"]["points"][0][2] == pytest.approx(want, abs=1e-4)


class TestDiscreteTasks:
    def test_pmf_envelope_carries_the_triangle(self, tmp_path, capsys):
        doc = {"task": "pmf", "variables": bernoulli_doc()}
        assert main(["--config", write_config(tmp_path, doc)]) == 0
        tri = json.loads(capsys.readouterr().out)["results"]["triangle"]
        assert tri["n"] == 3
        assert tri["l_max"] == 3
        masses = {(l, m): v for l, m, v in tri["entries"]}
        assert masses[(0, 0)] == pytest.approx(1 / 8, abs=1e-15)
        assert masses[(3, 1)] == pytest.approx(1 / 8, abs=1e-15)

    def test_papr_band_probability(self, tmp_path, capsys):
        doc = {"task": "papr", "variables": bernoulli_doc(),
               "query": {"alpha": 1.0, "beta": 3.0}}
        assert main(["--config", write_config(tmp_path, doc)]) == 0
        res = json.loads(capsys.readouterr().out)["results"]
        assert res["probability"] == pytest.approx(7 / 8, abs=1e-12)
        assert res["zero_sum_mass"] == pytest.approx(1 / 8, abs=1e-12)

    def test_moments_rows(self, tmp_path, capsys):
        doc = {"task": "moments",
               "variables": [{"kind": "discrete", "family": "uniform_int",
                              "params": {"lower": 1, "upper": 2}}] * 2,
               "query": {"exponents": [[1.0, 0.0], [-1.0, 0.0]]}}
        assert main(["--config", write_config(tmp_path, doc)]) == 0
        rows = json.loads(capsys.readouterr().out)["results"]["moments"]
        assert rows[0][2] == pytest.approx(3.0, abs=1e-12)
        assert rows[1][2] == pytest.approx(17 / 48, abs=1e-12)

    def test_marginal_csv_table(self, tmp_path, capsys):
        doc = {"task": "marginal", "variables": bernoulli_doc(),
               "query": {"axis": "sum"}, "output": {"format": "csv"}}
        assert main(["--config", write_config(tmp_path, doc)]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "coordinate,value"
        assert len(lines) == 1 + 4
        assert float(lines[2].split(",")[1]) == pytest.approx(3 / 8, abs=1e-15)

    def test_conditional_table(self, tmp_path, capsys):
        doc = {"task": "conditional", "variables": bernoulli_doc(),
               "query": {"axis": "max", "value": 1}}
        assert main(["--config", write_config(tmp_path, doc)]) == 0
        table = json.loads(capsys.readouterr().out)["results"]["table"]
        assert table["values"] == pytest.approx([0.0, 3 / 7, 3 / 7, 1 / 7], abs=1e-12)


class TestValidateTask:
    def test_bernoulli_triple_passes(self, tmp_path, capsys):
        doc = {"task": "validate", "variables": bernoulli_doc()}
        assert main(["--config", write_config(tmp_path, doc), "--quiet"]) == 0
        envelope = json.loads(capsys.readouterr().out)
        checks = envelope["results"]["checks"]
        assert len(checks) == 3
        for check in checks:
            assert check["passed"]
            assert check["max_abs_diff"] <= 1e-12

    def test_progress_lines_without_quiet(self, tmp_path, capsys):
        doc = {"task": "validate", "variables": bernoulli_doc(2),
               "output": {"path": "unused.json"}}
        out = tmp_path / "v.json"
        assert main(["--config", write_config(tmp_path, doc),
                     "--output", str(out)]) == 0
        stdout = capsys.readouterr().out
        assert "[pass] recurrence vs enumeration" in stdout


class TestSampleTask:
    def test_draws_are_seeded_and_ordered(self, tmp_path, capsys):
        doc = {"task": "sample", "variables": [EXP_VAR, EXP_VAR],
               "query": {"count": 50}}
        cfg = write_config(tmp_path, doc)
        assert main(["--config", cfg]) == 0
        first = json.loads(capsys.readouterr().out)["results"]["samples"]
        assert len(first) == 50
        assert all(y >= z > 0.0 for y, z in first)
        assert main(["--config", cfg]) == 0
        again = json.loads(capsys.readouterr().out)["results"]["samples"]
        assert again == first
        assert main(["--config", cfg, "--seed", "7"]) == 0
        reseeded = json.loads(capsys.readouterr().out)["results"]["samples"]
        assert reseeded != first

    def test_seed_override_lands_in_envelope(self, tmp_path, capsys):
        doc = {"task": "sample", "variables": [EXP_VAR], "query": {"count": 3}}
        assert main(["--config", write_config(tmp_path, doc), "--seed", "7"]) == 0
        assert json.loads(capsys.readouterr().out)["seed"] == 7


class TestExitCodes:
    def test_missing_config_file_is_a_config_error(self, tmp_path, capsys):
        assert main(["--config", str(tmp_path / "absent.json")]) == 2
        assert "config error" in capsys.readouterr().err

    def test_parse_failure_is_a_config_error(self, tmp_path, capsys):
        doc = {"task": "pmf",
               "variables": [{"kind": "discrete", "family": "zeta",
                              "params": {"s": 2.0}}]}
        assert main(["--config", write_config(tmp_path, doc)]) == 2
        assert "unknown discrete family" in capsys.readouterr().err

    def test_bad_epsilon_override(self, tmp_path, capsys):
        doc = {"task": "pmf", "variables": bernoulli_doc()}
        assert main(["--config", write_config(tmp_path, doc), "--epsilon", "2.0"]) == 2

    def test_bad_grid_points_override(self, tmp_path, capsys):
        doc = {"task": "pmf", "variables": bernoulli_doc()}
        assert main(["--config", write_config(tmp_path, doc), "--grid-points", "8"]) == 2

    def test_runtime_failure_is_exit_three(self, tmp_path, capsys):
        doc = {"task": "conditional", "variables": bernoulli_doc(),
               "query": {"axis": "max", "value": 0.5}}
        assert main(["--config", write_config(tmp_path, doc)]) == 3
        assert "error:" in capsys.readouterr().err


class TestReproducibility:
    def test_reruns_differ_only_in_timestamp(self, tmp_path):
        doc = {"task": "papr", "variables": bernoulli_doc(),
               "query": {"alpha": 1.0, "beta": 3.0}}
        cfg = write_config(tmp_path, doc)
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert main(["--config", cfg, "--output", str(a), "--quiet"]) == 0
        assert main(["--config", cfg, "--output", str(b), "--quiet"]) == 0
        keep = lambda line: "timestamp" not in line
        assert list(filter(keep, a.read_text().splitlines())) \
            == list(filter(keep, b.read_text().splitlines()))
