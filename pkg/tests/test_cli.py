from pathlib import Path

import numpy as np
import pytest

from convaccel.cli import main, run_config
from convaccel.config import MNIST_NETWORK, build_model, load_config, parse_config
from convaccel.errors import ConfigError, MissingFileError, ShapeChainError
from convaccel.network import mnist_model
from convaccel.tensors import KernelSet, decode_tensor, save_tensor

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_default_config_matches_mnist_structure():
    cfg = parse_config("")
    assert cfg.network == MNIST_NETWORK
    assert build_model(cfg).parameter_counts() == mnist_model(0).parameter_counts()


def test_parse_error_has_line_and_column():
    with pytest.raises(ConfigError) as exc:
        parse_config("run:\n  seed: [1, 2\n")
    assert exc.value.line is not None and exc.value.column is not None


def test_stride_zero_names_field():
    text = "network:\n  - {type: conv, kernel: 3, count: 2, stride: 0}\n"
    with pytest.raises(ConfigError, match=r"network\[0\]\.stride"):
        parse_config(text)


@pytest.mark.parametrize("text, field", [
    ("run: {variants: [fancy]}", "run.variants"),
    ("run: {pn: 0}", "run.pn"),
    ("network: [{type: conv, count: 2}]", "network[0].kernel"),
    ("network: [{type: warp}]", "network[0].type"),
    ("input: {shape: [1, 0, 3]}", "input.shape"),
    ("tree: {eta: [5, 2]}", "tree.eta"),
    ("bogus: 1", "<top>"),
])
def test_validation_errors_name_field(text, field):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.field == field


def test_missing_config(tmp_path):
    with pytest.raises(MissingFileError):
        load_config(tmp_path / "absent.yaml")


def test_weights_from_tensor_file(tmp_path, rng):
    k = KernelSet(rng.integers(-100, 100, (4, 1, 3, 3)).astype(np.int16),
                  rng.integers(-100, 100, 4).astype(np.int16))
    save_tensor(k, tmp_path / "w.ct16")
    (tmp_path / "run.yaml").write_text(
        "input: {shape: [1, 6, 6]}\nnetwork: [{type: conv, kernel: 3, count: 4, weights: w.ct16}]\n")
    model = build_model(load_config(tmp_path / "run.yaml"))
    assert model.layers[0].kernels == k
    (tmp_path / "bad.yaml").write_text(
        "input: {shape: [1, 6, 6]}\nnetwork: [{type: conv, name: cx, kernel: 2, count: 4, weights: w.ct16}]\n")
    with pytest.raises(ShapeChainError, match="cx"):
        build_model(load_config(tmp_path / "bad.yaml"))


def test_network_config_both_variants():
    res = run_config(CONFIGS / "mnist.yaml", "network")
    out = res.outputs
    assert set(out) == {"classic", "improved"}
    assert np.array_equal(out["classic"], out["improved"])
    stats = res.reports["network_stats.csv"].splitlines()
    header = stats[0].split(",")
    rows = [dict(zip(header, line.split(","))) for line in stats[1:]]
    assert len(rows) == 4
    by_variant = {(r["variant"], r["name"]): r for r in rows}
    c1c, c1i = by_variant["classic", "conv1"], by_variant["improved", "conv1"]
    assert c1c["tree_adders"] != c1i["tree_adders"] and c1c["tree_registers"] != c1i["tree_registers"]
    assert c1c["cycles"] == c1i["cycles"]
    summary = res.reports["summary.txt"]
    assert "parameters: 150 / 10820 / 3210" in summary
    assert summary.count("matches reference: True") == 2
    assert "seed: 7" in summary


def test_layer_command_writes_tensor(tmp_path):
    res = run_config(CONFIGS / "conv2_partial.yaml", "layer")
    out = decode_tensor(res.reports["layer_output_improved.ct16"])
    assert out.shape == (20, 8, 8)
    assert "matches reference: True" in res.reports["summary.txt"]
    row = res.reports["layer_stats.csv"].splitlines()[1]
    assert ",5,4,15," in row     # pn, pm, passes = 3 * 5


def test_tree_and_trace_commands():
    res = run_config(CONFIGS / "mnist.yaml", "tree")
    assert "9,15,31,4,8,20,4," in res.reports["tree_compare.csv"]
    assert res.reports["tree_dump_improved_eta9.txt"].startswith("variant improved\ninputs 9\n")
    res = run_config(CONFIGS / "mnist.yaml", "trace")
    assert len(res.reports["trace.csv"].splitlines()) == 26
    assert len(res.reports["trace_strided.csv"].splitlines()) == 5
    assert "first valid window: cycle 13" in res.reports["summary.txt"]


def test_main_exit_codes(tmp_path, capsys):
    assert main(["tree", "--out", str(tmp_path / "t")]) == 0
    assert (tmp_path / "t" / "tree_compare.csv").is_file()
    assert main(["network", "--config", str(tmp_path / "nope.yaml"), "--out", str(tmp_path)]) == 3
    bad = tmp_path / "bad.yaml"
    bad.write_text("network: [{type: conv, kernel: 3, count: 2, stride: 0}]\n")
    assert main(["layer", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "network[0].stride" in capsys.readouterr().err
    chain = tmp_path / "chain.yaml"
    chain.write_text("input: {shape: [1, 4, 4]}\nnetwork: [{type: conv, kernel: 5, count: 2}]\n")
    assert main(["layer", "--config", str(chain), "--out", str(tmp_path)]) == 4
    assert main(["layer", "--pn", "0", "--out", str(tmp_path)]) == 2
    assert main(["network", "--clock-mhz", "-1", "--out", str(tmp_path)]) == 2


def test_cli_overrides(tmp_path):
    assert main(["layer", "--config", str(CONFIGS / "mnist.yaml"), "--out", str(tmp_path),
                 "--variant", "classic", "--seed", "3", "--clock-mhz", "200", "--pn", "1", "--pm", "5"]) == 0
    summary = (tmp_path / "summary.txt").read_text()
    assert "seed: 3" in summary and "clock_mhz: 200.0" in summary and "variants: classic" in summary
    assert not (tmp_path / "layer_output_improved.ct16").exists()


def test_reports_independent_of_worker_count():
    from dataclasses import replace
    cfg = load_config(CONFIGS / "mnist.yaml")
    serial = run_config(replace(cfg, workers=1), "network").reports
    pooled = run_config(replace(cfg, workers=4), "network").reports
    assert serial == pooled
