import json

import numpy as np
import pytest

from slowvec import (
    AnalysisConfig,
    Compactum,
    Operator,
    asymptotic_report,
    make_cyclic_shift,
    make_split_operator,
    make_truncated_shift,
)
from slowvec._jsonutil import to_jsonable
from slowvec.errors import ScenarioError
from slowvec.runner import run_scenario
from slowvec.scenario import build_compactum, build_operator, parse_scenario, peripheral_compactum

from conftest import diag, unit

FAST = AnalysisConfig(sample_count=8, net_samples=256, sphere_samples=8)


def hull(*vectors):
    return Compactum(np.array(vectors, dtype=complex))


class TestAsymptoticReport:
    def test_diag_fixture(self):
        rep = asymptotic_report(diag(0.5, 1.0), hull([0, 1]), 0.5, FAST)
        assert rep.status == "pass"
        assert rep.codim == 1 and rep.max_slow_dimension == 1
        (entry,) = rep.stages["peripheral"]
        assert entry["flattening"]["passed"]
        assert all(rep.verdicts.values())

    def test_nilpotent_has_no_slow_vectors(self):
        rep = asymptotic_report(make_truncated_shift(8, "left"), hull(0.01 * unit(8, 0)), 0.5, FAST)
        assert rep.status == "pass" and rep.codim == 0 and rep.max_slow_dimension == 0
        assert rep.stages["synthesize_slow"]["result"] == "no slow vectors"
        assert rep.verdicts["codim_zero_iff_no_slow_vectors"]

    def test_small_hull_is_inconclusive_but_downstream_runs(self):
        rep = asymptotic_report(make_cyclic_shift(4), hull(0.1 * unit(4, 0)), 0.5, FAST)
        assert rep.stages["star_condition"]["status"] == "horizon-limited-fail"
        assert rep.status == "inconclusive"
        assert rep.codim == 4
        assert len(rep.stages["peripheral"]) == 4

    def test_identity_codim_is_dimension(self):
        d = 3
        rep = asymptotic_report(Operator(np.eye(d)), Compactum(np.sqrt(d) * np.eye(d)), 0.5, FAST)
        assert rep.status == "pass" and rep.codim == d and rep.max_slow_dimension == d

    def test_multiplicities(self):
        rep = asymptotic_report(diag(1.0, 1.0, -1.0, 0.3), Compactum(2 * np.eye(4)), 0.5, FAST)
        mults = sorted(m["multiplicity"] for m in rep.multiplicities)
        assert mults == [1, 2] and rep.codim == 3

    def test_parallel_matches_serial(self):
        T = make_split_operator([1.0, -1.0], 0.5, 3, conditioning=2.0, seed=0)
        K = peripheral_compactum(T)
        serial = asymptotic_report(T, K, 0.6, FAST)
        parallel = asymptotic_report(T, K, 0.6, AnalysisConfig(sample_count=8, net_samples=256, sphere_samples=8, workers=3))
        assert json.dumps(to_jsonable(serial), sort_keys=True) == json.dumps(to_jsonable(parallel), sort_keys=True)

    def test_json_ready(self):
        rep = asymptotic_report(diag(0.5, 1.0), hull([0, 1]), 0.5, FAST)
        text = json.dumps(to_jsonable(rep), sort_keys=True)
        assert json.loads(text)["codim_x0"] == 1


def scenario_text(**overrides):
    doc = {
        "schema_version": 1,
        "name": "t",
        "operator": {"family": "diagonal", "entries": [0.5, 1.0]},
        "compactum": {"generators": [[0, 1]]},
        "parameters": {"alpha": 0.5},
        "analyses": ["stable_split"],
    }
    doc.update(overrides)
    return json.dumps(doc, indent=2)


class TestScenarioValidation:
    def test_round_trip(self):
        sc = parse_scenario(scenario_text())
        assert sc.name == "t" and sc.parameters["alpha"] == 0.5
        assert parse_scenario(json.dumps(sc.to_dict())).to_dict() == sc.to_dict()

    def test_json_syntax_error_has_line(self):
        with pytest.raises(ScenarioError) as info:
            parse_scenario('{\n  "name": "t",\n  "operator": \n}')
        assert info.value.line == 4

    @pytest.mark.parametrize(
        "overrides, field",
        [
            ({"bogus": 1}, "bogus"),
            ({"schema_version": 2}, "schema_version"),
            ({"operator": {"family": "nope"}}, "operator.family"),
            ({"operator": {"family": "diagonal", "entries": [1.0], "extra": 1}}, "operator.extra"),
            ({"parameters": {"alpha": 1.5}}, "parameters.alpha"),
            ({"parameters": {"alpha": 0.5, "epsilon": -1}}, "parameters.epsilon"),
            ({"parameters": {"alpha": 0.5, "what": 1}}, "parameters.what"),
            ({"analyses": ["stable_split", "fly"]}, "analyses"),
            ({"analyses": []}, "analyses"),
        ],
    )
    def test_rejections_name_the_field(self, overrides, field):
        with pytest.raises(ScenarioError) as info:
            parse_scenario(scenario_text(**overrides))
        assert info.value.field is not None and info.value.field.startswith(field)

    def test_invalid_alpha_message_and_line(self):
        text = scenario_text(parameters={"alpha": 1.5})
        with pytest.raises(ScenarioError, match="invalid alpha") as info:
            parse_scenario(text)
        assert text.splitlines()[info.value.line - 1].strip().startswith('"alpha"')

    def test_alpha_required_by_attractor_analyses(self):
        with pytest.raises(ScenarioError, match="alpha"):
            parse_scenario(scenario_text(parameters={}, analyses=["greedy"]))

    def test_compactum_required(self):
        doc = json.loads(scenario_text(analyses=["verify_attraction"]))
        del doc["compactum"]
        with pytest.raises(ScenarioError, match="compactum"):
            parse_scenario(json.dumps(doc))

    def test_dimension_mismatches_caught_before_running(self):
        with pytest.raises(ScenarioError, match="dimension"):
            parse_scenario(scenario_text(compactum={"generators": [[0, 1, 0]]}))
        with pytest.raises(ScenarioError, match="dimension"):
            parse_scenario(scenario_text(parameters={"alpha": 0.5, "x": [1, 0, 0]}))

    def test_lambda_forms(self):
        sc = parse_scenario(scenario_text(parameters={"alpha": 0.5, "lambda": {"angle": np.pi / 2}}))
        assert sc.parameters["lambda"] == {"angle": np.pi / 2}
        with pytest.raises(ScenarioError):
            parse_scenario(scenario_text(parameters={"alpha": 0.5, "lambda": 0.5}))

    def test_families_build(self):
        T = build_operator({"family": "split", "peripheral": [1.0, {"angle": 1.0}], "interior_dim": 2, "seed": 3})
        assert T.dim == 4
        assert build_operator({"family": "swap"}).dim == 2
        inline = build_operator({"matrix": {"re": [[0.5, 0.0], [0.25, 1.0]]}})
        assert inline.entries[1, 0] == 0.25 and inline.dim == 2
        K = build_compactum({"family": "basis", "scale": 2.0, "indices": [1]}, T)
        assert np.allclose(K.generators, [2 * unit(4, 1)])


class TestRunner:
    def test_stage_order_and_records(self):
        sc = parse_scenario(scenario_text(analyses=["asymptotic_report", "greedy", "stable_split"]))
        result = run_scenario(sc)
        assert [r["analysis"] for r in result.records] == ["stable_split", "greedy", "asymptotic_report"]
        assert result.status == "pass" and result.exit_code == 0

    def test_errors_keep_stage_labels_and_later_analyses_run(self):
        doc = json.loads(scenario_text(analyses=["ergodic_projection", "stable_split"]))
        doc["parameters"]["proj_tol"] = 1e-30
        doc["operator"] = {"family": "diagonal", "entries": [0.999, 1.0]}
        doc["parameters"]["horizon"] = 4
        result = run_scenario(parse_scenario(json.dumps(doc)))
        statuses = {r["analysis"]: r for r in result.records}
        assert statuses["stable_split"]["status"] == "pass"
        assert result.exit_code in (0, 1)
        if statuses["ergodic_projection"]["status"] == "error":
            assert statuses["ergodic_projection"]["stage"] == "ergodic"
            assert result.exit_code == 1

    def test_horizon_override(self):
        sc = parse_scenario(scenario_text(analyses=["star_condition"]))
        result = run_scenario(sc, horizon=3)
        assert result.records[0]["result"]["horizon"] == 3

    def test_inconclusive_exit_code(self):
        sc = parse_scenario(
            scenario_text(
                operator={"family": "cyclic_shift", "dim": 4},
                compactum={"family": "basis", "scale": 0.1, "indices": [0]},
                analyses=["star_condition"],
            )
        )
        result = run_scenario(sc)
        assert result.status == "inconclusive" and result.exit_code == 2
