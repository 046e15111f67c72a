import copy
import csv
import io
import json
import math
from pathlib import Path

import pytest

from homindex.errors import ConfigurationError, ParameterError
from homindex.harness import config_from_dict, load_config, run, run_experiment
from homindex.harness.cli import main
from homindex.harness.config import parse_json
from homindex.harness.convergence import (
    convergence_table,
    fixed_spacing_disc,
    observed_orders,
    richardson_orders,
)
from homindex.harness.runner import CSV_HEADER, format_tolerance, model_spectral_flow, results_csv
from homindex.model import LineDiscretization, scalar_model

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

BASE = {
    "experiment": "verify-main",
    "model": {
        "inner_dim": 1,
        "d2": {"kind": "scalar", "value": 0.0},
        "a": {"kind": "scalar", "value": 1.0},
        "profile": "half-kink",
    },
    "disc": {"T": 40.0, "n": 1024},
    "m": 1,
    "lambda_values": [1.0],
    "seed": 0,
}


def make(**changes):
    raw = copy.deepcopy(BASE)
    for key, value in changes.items():
        raw[key] = value
    return raw


def write_config(tmp_path, raw, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- configuration --------------------------------------------------------------


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIG_DIR.glob("*.json")))
def test_shipped_configs_validate(name):
    cfg = load_config(CONFIG_DIR / name)
    assert cfg.experiment in name.replace("_", "-")


def test_defaults_are_normalized():
    cfg = config_from_dict(make())
    assert cfg.raw["disc"]["safety_factor"] == 4.0
    assert cfg.raw["epsilon_values"] == [1.0]
    assert cfg.tolerance == 1e-3
    assert cfg.record_wall_time is False


def test_seed_injected_into_random_generators():
    raw = make(seed=7)
    raw["model"] = {"inner_dim": 3, "d2": {"kind": "random"}, "a": {"kind": "random", "seed": 2}}
    cfg = config_from_dict(raw)
    assert cfg.raw["model"]["d2"]["seed"] == 7
    assert cfg.raw["model"]["a"]["seed"] == 2


def test_digest_depends_on_content_only():
    a = config_from_dict(make())
    b = config_from_dict(json.loads(json.dumps(make())))
    c = config_from_dict(make(m=2))
    assert a.digest == b.digest != c.digest


def test_unknown_field_rejected_with_path():
    raw = make()
    raw["disc"]["bogus"] = 1
    with pytest.raises(ConfigurationError, match=r"\$\.disc"):
        config_from_dict(raw)


def test_nested_unknown_field_in_generator():
    raw = make()
    raw["model"]["a"]["colour"] = "red"
    with pytest.raises(ConfigurationError, match=r"\$\.model\.a"):
        config_from_dict(raw)


def test_string_number_rejected():
    with pytest.raises(ConfigurationError, match=r"\$\.m"):
        config_from_dict(make(m="1"))


def test_expression_rejected():
    with pytest.raises(ConfigurationError, match=r"\$\.lambda_values\[0\]"):
        config_from_dict(make(lambda_values=["1/2"]))


def test_nan_rejected_by_parser():
    with pytest.raises(ConfigurationError, match="non-finite"):
        parse_json('{"m": NaN}')
    with pytest.raises(ConfigurationError, match="non-finite"):
        parse_json('{"m": Infinity}')


def test_syntax_error_reports_position():
    with pytest.raises(ConfigurationError, match="line 2"):
        parse_json('{\n "m": }')


def test_semantic_error_wrapped():
    raw = make()
    raw["model"]["inner_dim"] = 2
    with pytest.raises(ConfigurationError):
        config_from_dict(raw)


def test_missing_file():
    with pytest.raises(ConfigurationError):
        load_config("/nonexistent/config.json")


# -- experiments -----------------------------------------------------------------


def test_verify_main_summary_and_artifacts(tmp_path):
    cfg = config_from_dict(make(lambda_values=[0.5, 1.0]))
    result = run(cfg, tmp_path)
    assert result.passed
    assert result.summary[0].startswith("max|LHS−RHS| = ")
    assert result.summary[0].endswith(": PASS")
    rows = read_csv(tmp_path / "results.csv")
    assert [r["experiment"] for r in rows] == ["verify-main:lhs"] * 2 + ["verify-main:rhs"] * 2
    assert all(r["wall_time_s"] == "" for r in rows)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert {"config", "digest", "versions", "records", "wall_time_s", "passed"} <= set(manifest)
    assert manifest["digest"] == cfg.digest
    assert all(rec["digest"] == cfg.digest for rec in manifest["records"])
    assert (tmp_path / "summary.txt").read_text().splitlines()[1] == result.summary[0]


def test_csv_header_fixed(tmp_path):
    run(config_from_dict(make()), tmp_path)
    header = (tmp_path / "results.csv").read_text().splitlines()[0]
    assert tuple(header.split(",")) == CSV_HEADER


def test_wall_time_recorded_on_request(tmp_path):
    run(config_from_dict(make(record_wall_time=True)), tmp_path)
    rows = read_csv(tmp_path / "results.csv")
    assert all(float(r["wall_time_s"]) >= 0 for r in rows)


def test_csv_byte_identical_across_reruns_and_workers(tmp_path):
    cfg = config_from_dict(make(lambda_values=[0.5, 1.0, 2.0], refine=False))
    run(cfg, tmp_path / "a")
    run(cfg, tmp_path / "b")
    run(cfg, tmp_path / "c", workers=3)
    first = (tmp_path / "a" / "results.csv").read_bytes()
    assert first == (tmp_path / "b" / "results.csv").read_bytes()
    assert first == (tmp_path / "c" / "results.csv").read_bytes()


def test_sweep_lambda_zero_a_gives_zero_column():
    raw = make(experiment="sweep-lambda", lambda_values=[0.25, 1.0, 4.0], refine=False)
    raw["model"]["a"]["value"] = 0.0
    result = run_experiment(config_from_dict(raw))
    text = results_csv(result.records)
    rows = list(csv.DictReader(io.StringIO(text)))
    assert all(float(r["value"]) == 0.0 for r in rows)
    assert result.passed


def test_sweep_epsilon_rows():
    raw = make(experiment="sweep-epsilon", epsilon_values=[1.0, 0.5], refine=False)
    raw["disc"] = {"T": 80.0, "n": 2048, "safety_factor": 2.0}
    raw["model"]["profile"] = "full-kink"
    result = run_experiment(config_from_dict(raw))
    lhs = [r for r in result.records if r.point["experiment"] == "sweep-epsilon:lhs"]
    assert sorted(r.point["epsilon"] for r in lhs) == [0.5, 1.0]
    assert any("epsilon spread" in line for line in result.summary)


def test_sf_demo_matches_flow():
    raw = make(experiment="sf-demo", tolerance=1e-6)
    raw["model"] = {"inner_dim": 4, "d2": {"kind": "random", "seed": 1},
                    "a": {"kind": "conjugation-shift", "seed": 5}, "profile": "half-kink"}
    result = run_experiment(config_from_dict(raw))
    assert result.passed
    assert result.summary[0] == "spectral flow = 0"


def test_model_spectral_flow_scalar():
    assert model_spectral_flow(scalar_model("full-kink", d2=1.5)) == 0
    assert model_spectral_flow(scalar_model("full-kink", d2=0.5)) == 1
    assert model_spectral_flow(scalar_model("half-kink", d2=-0.5)) == 1


def test_identities_experiment():
    raw = make(experiment="identities")
    raw["model"] = {"inner_dim": 2, "d2": {"kind": "random", "seed": 3},
                    "a": {"kind": "random", "seed": 4}, "profile": "full-kink"}
    result = run_experiment(config_from_dict(raw))
    labels = {r.point["experiment"] for r in result.records}
    assert "identities:flow-trace" in labels
    assert result.passed


def test_format_tolerance():
    assert format_tolerance(1e-3) == "1e-3"
    assert format_tolerance(2.5e-10) == "2.5e-10"


# -- convergence ------------------------------------------------------------------


def test_observed_orders_second_order():
    h = [0.1, 0.05, 0.025]
    assert observed_orders(h, [x**2 for x in h]) == pytest.approx([2.0, 2.0])
    assert math.isnan(observed_orders(h, [1.0, 0.0, 0.0])[0])


def test_richardson_orders_second_order():
    h = [0.1, 0.05, 0.025]
    vals = [3.0 + 5 * x**2 for x in h]
    assert richardson_orders(h, vals) == pytest.approx([2.0])


def test_fixed_spacing_disc_keeps_spacing():
    disc = LineDiscretization(40.0, 1023)
    wide = fixed_spacing_disc(disc, 80.0)
    assert wide.spacing == pytest.approx(disc.spacing)


def test_convergence_full_kink_second_order():
    table = convergence_table(scalar_model("full-kink"), 1, 1.0, LineDiscretization(40.0, 512), [512, 1024, 2048], [40.0, 80.0])
    assert table.grid_order == pytest.approx(2.0, abs=0.5)
    assert not table.flagged
    assert table.tail_changes[0] < 1e-8


def test_convergence_zero_a_is_exact():
    table = convergence_table(scalar_model("full-kink", a=0.0), 1, 1.0, LineDiscretization(40.0, 256), [256, 512], [40.0, 80.0])
    assert table.exact and table.grid_order is None and not table.flagged


def test_convergence_needs_two_levels():
    with pytest.raises(ParameterError):
        convergence_table(scalar_model("full-kink"), 1, 1.0, LineDiscretization(40.0, 256), [256])


# -- command line -----------------------------------------------------------------


def test_cli_run_exit_zero(tmp_path, capsys):
    path = write_config(tmp_path, make(refine=False))
    code = main(["run", "--config", path, "--out", str(tmp_path / "out")])
    assert code == 0
    assert "PASS" in capsys.readouterr().out
    assert (tmp_path / "out" / "results.csv").exists()


def test_cli_invalid_config_exit_two(tmp_path, capsys):
    raw = make()
    raw["extra"] = True
    code = main(["run", "--config", write_config(tmp_path, raw), "--out", str(tmp_path / "out")])
    assert code == 2
    assert "$" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_cli_nan_exit_two(tmp_path):
    path = tmp_path / "nan.json"
    path.write_text(json.dumps(make()).replace('"m": 1', '"m": NaN'))
    assert main(["run", "--config", str(path)]) == 2


def test_cli_failed_verdict_exit_one(tmp_path):
    path = write_config(tmp_path, make(refine=False, tolerance=1e-12, disc={"T": 40.0, "n": 64}))
    assert main(["run", "--config", path, "--out", str(tmp_path / "out")]) == 1


def test_cli_converge_requires_converge_experiment(tmp_path):
    assert main(["converge", "--config", write_config(tmp_path, make())]) == 2


def test_cli_converge_zero_a(tmp_path, capsys):
    raw = make(experiment="converge", ladder={"n": [256, 512], "T": [40.0, 80.0]})
    raw["model"]["a"]["value"] = 0.0
    assert main(["converge", "--config", write_config(tmp_path, raw), "--out", str(tmp_path / "out")]) == 0
    assert "exact" in capsys.readouterr().out


def test_cli_bad_arguments_exit_two():
    assert main(["frobnicate"]) == 2
    assert main(["run"]) == 2


def test_cli_acceptance_empty_list_exit_two(tmp_path):
    path = tmp_path / "crit.json"
    path.write_text('{"criteria": []}')
    assert main(["acceptance", "--config", str(path)]) == 2


def test_cli_acceptance_unknown_criterion_exit_two():
    assert main(["acceptance", "A99"]) == 2


def test_cli_acceptance_single_criterion(capsys):
    assert main(["acceptance", "A1"]) == 0
    out = capsys.readouterr().out
    assert "A1" in out and "PASS" in out
