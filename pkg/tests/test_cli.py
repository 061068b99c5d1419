from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from markovswarm import build_moore_grid, normalize_adjacency
from markovswarm.cli import main
from markovswarm.config import (
    dump_graph_document,
    load_graph_document,
    load_synthesis_document,
    parse_scenario,
)
from markovswarm.errors import ConfigError
from markovswarm.simulator import CSV_COLUMNS

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

TWO_STATE = """\
graph:
  edges: [[1, 1], [1, 1]]
initial:
  task: 0
target:
  distribution: [0.25, 0.75]
controller:
  kind: central
run:
  epochs: 50
"""


def write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_grid_command(tmp_path):
    out = tmp_path / "g.yaml"
    assert main(["grid", "5", "7", "--out", str(out)]) == 0
    g, K = load_graph_document(out.read_text())
    assert g.num_tasks == 35
    np.testing.assert_array_equal(K, normalize_adjacency(build_moore_grid(5, 7)))


def test_grid_single_and_square(tmp_path, capsys):
    assert main(["grid", "1", "1"]) == 0
    g, K = load_graph_document(capsys.readouterr().out)
    assert g.edges.tolist() == [[True]] and K.tolist() == [[1.0]]
    assert main(["grid", "2", "2"]) == 0
    _, K = load_graph_document(capsys.readouterr().out)
    assert (K == 0.25).all()


def test_grid_bad_args():
    assert main(["grid", "0", "3"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["grid", "x", "3"])
    assert exc.value.code == 2


def test_graph_document_round_trip_is_bit_equal():
    g = build_moore_grid(5, 7)
    K = normalize_adjacency(g)
    text = dump_graph_document(g, K)
    g2, K2 = load_graph_document(text)
    assert g2 == g
    assert K2.tobytes() == K.tobytes()
    assert dump_graph_document(g2, K2) == text


@settings(deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_kernel_floats_round_trip(seed):
    rng = np.random.default_rng(seed)
    W = rng.random((4, 4)) * 10.0 ** rng.integers(-20, 3, (4, 4))
    K = W / W.sum(axis=1, keepdims=True)
    _, K2 = load_graph_document(dump_graph_document(build_moore_grid(2, 2), K))
    assert K2.tobytes() == K.tobytes()


def test_synthesize_two_state(tmp_path, capsys):
    cfg = write(tmp_path, TWO_STATE)
    out = tmp_path / "k.yaml"
    assert main(["synthesize", "--config", str(cfg), "--out", str(out)]) == 0
    doc = load_synthesis_document(out.read_text())
    np.testing.assert_allclose(doc["kernel"], [[0.625, 0.375], [0.125, 0.875]], atol=1e-15)
    np.testing.assert_allclose(doc["gain"], [0.75, 0.25], atol=1e-15)
    assert doc["sparsity_ok"] and doc["irreducible"]
    assert doc["stationary_residual"] <= 1e-12
    # round trip of the synthesis document
    from markovswarm.config import dump_synthesis_document
    again = dump_synthesis_document(doc["kernel"], doc["gain"], doc["stationary_residual"],
                                    doc["sparsity_ok"], doc["irreducible"], doc["target"], doc["gain_source"])
    assert again == out.read_text()


def test_synthesize_zero_target_entry(tmp_path, capsys):
    cfg = write(tmp_path, TWO_STATE.replace("[0.25, 0.75]", "[0.0, 1.0]"))
    assert main(["synthesize", "--config", str(cfg), "--out", str(tmp_path / "k.yaml")]) == 2
    err = capsys.readouterr().err
    assert "target.distribution.0" in err and "entry 0" in err and "line 6" in err


def test_synthesize_paper_grid_residual(tmp_path, capsys):
    out = tmp_path / "k.yaml"
    assert main(["synthesize", "--config", str(CONFIGS / "paper_central.yaml"), "--out", str(out)]) == 0
    doc = load_synthesis_document(out.read_text())
    assert doc["stationary_residual"] <= 1e-8
    assert "target_error=" in capsys.readouterr().out


def test_synthesize_literal_initial_source_fails(tmp_path, capsys):
    cfg = write(tmp_path, TWO_STATE)
    code = main(["synthesize", "--config", str(cfg), "--out", str(tmp_path / "k.yaml"),
                 "--gain-source", "initial"])
    assert code == 3
    assert "task 1" in capsys.readouterr().err


@pytest.mark.parametrize("text,fragment", [
    ("graph: [1, 2\n", "invalid YAML"),
    (TWO_STATE.replace("edges: [[1, 1], [1, 1]]", "grid: [0, 2]"), "graph.grid"),
    (TWO_STATE.replace("task: 0", "task: 5"), "initial.task"),
    (TWO_STATE.replace("kind: central", "kind: magic"), "controller.kind"),
    (TWO_STATE.replace("epochs: 50", "epochs: many"), "run.epochs"),
    (TWO_STATE + "extra: 1\n", "extra"),
    (TWO_STATE.replace("[0.25, 0.75]", "[0.25, 0.70]"), "sum"),
    (TWO_STATE.replace("[[1, 1], [1, 1]]", "[[1, 1], [0, 1]]"), "strongly connected"),
])
def test_config_errors_exit_2(tmp_path, capsys, text, fragment):
    cfg = write(tmp_path, text)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "t.csv")]) == 2
    assert fragment in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_parse_scenario_fields():
    cfg, out = parse_scenario(
        (CONFIGS / "paper_exponential.yaml").read_text(), base=CONFIGS
    )
    assert cfg.graph.num_tasks == 35 and cfg.controller == "distributed"
    assert cfg.feedback.schedule.kind == "exponential" and cfg.feedback.schedule.gamma == 2000
    assert cfg.feedback.theta == 0.02 and cfg.feedback.lam == 0.2
    assert cfg.gain_ceiling == 0.75 and out["csv"] == "paper_exponential.csv"


def test_graph_file_reference(tmp_path):
    assert main(["grid", "2", "3", "--out", str(tmp_path / "g.yaml")]) == 0
    cfg, _ = parse_scenario("graph:\n  file: g.yaml\ninitial:\n  task: 1\ntarget:\n  uniform: true\n",
                            base=tmp_path)
    assert cfg.graph.num_tasks == 6 and cfg.kernel.shape == (6, 6)


def test_simulate_two_state(tmp_path, capsys):
    cfg = write(tmp_path, TWO_STATE)
    out = tmp_path / "t.csv"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].split(",")[:8] == list(CSV_COLUMNS)
    assert len(lines) == 51 and len(lines[0].split(",")) == 10
    summary = capsys.readouterr().out
    assert "epochs=50" in summary and "oscillating=false" in summary


def test_simulate_constant_beta_flags_oscillation(tmp_path, capsys):
    out = tmp_path / "t.csv"
    assert main(["simulate", "--config", str(CONFIGS / "paper_constant_beta.yaml"), "--out", str(out)]) == 0
    assert "oscillating=true" in capsys.readouterr().out


def test_simulate_agents_seed_reproducible(tmp_path):
    cfg = write(tmp_path, TWO_STATE)
    a, b, c = (tmp_path / f"{n}.csv" for n in "abc")
    for path, seed in ((a, "11"), (b, "11"), (c, "12")):
        assert main(["simulate", "--config", str(cfg), "--out", str(path),
                     "--mode", "agents:5000", "--seed", seed]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


def test_simulate_bad_mode(tmp_path):
    cfg = write(tmp_path, TWO_STATE)
    assert main(["simulate", "--config", str(cfg), "--mode", "agents:x"]) == 2


def test_simulate_directory(tmp_path, capsys):
    write(tmp_path, TWO_STATE, "a.yaml")
    write(tmp_path, TWO_STATE.replace("epochs: 50", "epochs: 10"), "b.yaml")
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(tmp_path), "--out", str(out)]) == 0
    assert len((out / "a.csv").read_text().splitlines()) == 51
    assert len((out / "b.csv").read_text().splitlines()) == 11


def test_config_error_carries_line():
    with pytest.raises(ConfigError) as exc:
        parse_scenario(TWO_STATE.replace("epochs: 50", "epochs: -3"))
    assert exc.value.field == "run.epochs" and exc.value.line == 10
