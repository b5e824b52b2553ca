"""The shipped .model files stay in lockstep with the in-code fixtures.

Golden numbers below were produced once by the exhaustive oracle and are
frozen; solve and the VOI routes must keep reproducing them.
"""

from pathlib import Path

import pytest

from idvoi.model import Evidence, ObservationScenario, parse_model, serialize_model
from idvoi.solve import solve_meu
from idvoi.voi import voi_report, voi_table_expansion

from _corpus import make_staged_chain, make_two_branch, make_weather_vendor

MODELS = Path(__file__).resolve().parents[1] / "models"

GOLDEN = {
    "staged_chain": {"meu": 72.59975, "voi_B_D1": 20.40025},
    "two_branch": {"meu": 117.875, "meu_h_at_2": 130.975},
    "weather_vendor": {"meu": 69.6, "voi_H_dry": 12.0, "voi_A_dry": 4.2},
}

MAKERS = {
    "staged_chain": make_staged_chain,
    "two_branch": make_two_branch,
    "weather_vendor": make_weather_vendor,
}


def load(name):
    return (MODELS / f"{name}.model").read_text()


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


@pytest.mark.parametrize("name", sorted(MAKERS))
def test_file_matches_fixture(name):
    assert parse_model(load(name)) == MAKERS[name]()


@pytest.mark.parametrize("name", sorted(MAKERS))
def test_serialization_round_trips_to_identical_bytes(name):
    text = load(name)
    assert serialize_model(parse_model(text)) == text


def test_staged_chain_goldens():
    diagram = parse_model(load("staged_chain"))
    assert close(solve_meu(diagram).meu, GOLDEN["staged_chain"]["meu"])
    early, late, voi = voi_table_expansion(diagram, "B", 1)
    assert close(late, GOLDEN["staged_chain"]["meu"])
    assert close(voi, GOLDEN["staged_chain"]["voi_B_D1"])


def test_two_branch_goldens():
    diagram = parse_model(load("two_branch"))
    assert close(solve_meu(diagram).meu, GOLDEN["two_branch"]["meu"])
    moved = solve_meu(diagram, scenario=ObservationScenario({"h": 2}))
    assert close(moved.meu, GOLDEN["two_branch"]["meu_h_at_2"])


def test_weather_vendor_goldens():
    diagram = parse_model(load("weather_vendor"))
    assert close(solve_meu(diagram).meu, GOLDEN["weather_vendor"]["meu"])
    report = voi_report(diagram, "d", ("H", "A"), Evidence({"S": "dry"}))
    assert close(report.candidate("H").voi, GOLDEN["weather_vendor"]["voi_H_dry"])
    assert close(report.candidate("A").voi, GOLDEN["weather_vendor"]["voi_A_dry"])
