import csv
import hashlib
import io
import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from pathboltz import __version__
from pathboltz.cli import main
from pathboltz.network import LayeredNetwork, LayerSpec
from pathboltz.operators import write_matrix_csv
from pathboltz.rbm import RbmParams


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


@pytest.fixture
def files(tmp_path):
    def write(name, text):
        p = tmp_path / name
        p.write_text(text)
        return p
    return write


@pytest.fixture
def two_level(files):
    return files("twolevel.csv", write_matrix_csv(np.diag([0.0, 1.0])))


@pytest.fixture
def pauli_pair(files):
    sx = np.array([[0, 1], [1, 0]])
    sz = np.diag([1.0, -1.0])
    h = np.kron(sz, sz) + 0.7 * np.kron(sx, np.eye(2)) + 0.4 * np.kron(np.eye(2), sx) + 0.3 * np.kron(sz, np.eye(2))
    return files("pair.csv", write_matrix_csv(h))


@pytest.fixture
def chain_net(files):
    rng = np.random.default_rng(0)
    layers = (LayerSpec("x", 2, "visible"), LayerSpec("h1", 2), LayerSpec("h2", 2, "visible"))
    net = LayeredNetwork(layers, [rng.normal(size=2) for _ in range(3)],
                         [rng.normal(size=(2, 2)) for _ in range(2)])
    return files("net.json", net.to_json())


def test_partition_two_level(two_level, capsys):
    code, out, _ = run(["partition", "--hamiltonian", two_level, "--beta", math.log(2)], capsys)
    assert code == 0
    assert out.startswith("Z = ")
    assert float(out.split("=")[1]) == pytest.approx(1.5, abs=1e-12)


def test_propagate_methods_agree(pauli_pair, capsys, tmp_path):
    results = []
    for method in ("contract", "enumerate"):
        code, out, _ = run(["propagate", "--hamiltonian", pauli_pair, "--beta", "0.8", "--slices", 4,
                            "--start", 1, "--end", 2, "--method", method,
                            "--dump-chain", tmp_path / f"{method}.json"], capsys)
        assert code == 0
        (_, (s, e, re, im)) = rows(out)
        results.append(complex(float(re), float(im)))
    assert abs(results[0] - results[1]) <= 1e-12
    assert json.loads((tmp_path / "contract.json").read_text())["P"] == 4


def test_propagate_real_time(pauli_pair, capsys):
    code, out, _ = run(["propagate", "--hamiltonian", pauli_pair, "--beta", "1.3j", "--slices", 3], capsys)
    assert code == 0
    assert float(rows(out)[1][3]) != 0


def test_trotter_first_order_ratios(pauli_pair, capsys):
    code, out, _ = run(["trotter", "--hamiltonian", pauli_pair, "--beta", 1, "--scheme", "first",
                        "--slices", "8,16,32"], capsys)
    assert code == 0
    table = rows(out)
    assert table[0] == ["P", "error", "ratio_P_to_2P"]
    assert [int(r[0]) for r in table[1:]] == [8, 16, 32]
    for r in table[1:]:
        assert 1.6 <= float(r[2]) <= 2.4


def test_rbm_exact_zero_params(files, capsys):
    spec = files("rbm.json", RbmParams.zeros(1, 1).to_json())
    code, out, _ = run(["rbm", "--spec", spec, "--exact"], capsys)
    assert code == 0
    table = rows(out)
    assert table[0] == ["v", "h", "probability"]
    assert len(table) == 5
    assert all(float(r[2]) == 0.25 for r in table[1:])


def test_rbm_sample_is_seeded(files, capsys):
    spec = files("rbm.json", RbmParams.random(2, 2, np.random.default_rng(1)).to_json())
    argv = ["rbm", "--spec", spec, "--sample", "--sweeps", 3000, "--seed", 5]
    a = run(argv, capsys)[1]
    b = run(argv, capsys)[1]
    assert a == b
    assert sum(float(r[2]) for r in rows(a)[1:]) == pytest.approx(1, abs=1e-12)


@pytest.mark.parametrize("mode", ["chain", "bethe", "kikuchi"])
def test_entropy_modes(chain_net, capsys, mode):
    code, out, _ = run(["entropy", "--network", chain_net, "--mode", mode], capsys)
    assert code == 0
    table = rows(out)
    assert table[0] == ["kind", "variables", "entropy", "weight", "contribution"]
    assert table[-1][0] == "total"
    total = sum(float(r[4]) for r in table[1:-1])
    assert float(table[-1][4]) == pytest.approx(total, abs=1e-12)


def test_entropy_bethe_and_kikuchi_agree_on_a_chain(chain_net, capsys):
    totals = {}
    for mode in ("bethe", "kikuchi"):
        totals[mode] = float(rows(run(["entropy", "--network", chain_net, "--mode", mode], capsys)[1])[-1][4])
    assert abs(totals["bethe"] - totals["kikuchi"]) <= 1e-12


def test_circuit_emit_and_sim(chain_net, capsys):
    code, out, _ = run(["circuit", "emit", "--network", chain_net, "--time", 0.7], capsys)
    assert code == 0
    assert out.splitlines()[0] == "PBQASM 1.0;"
    code, out, _ = run(["circuit", "emit", "--network", chain_net, "--format", "json"], capsys)
    assert json.loads(out)["qubits"] == 6 + 8
    code, out, _ = run(["circuit", "sim", "--network", chain_net, "--shots", 2000, "--seed", 3], capsys)
    assert code == 0
    table = rows(out)
    assert table[0] == ["bitstring", "count", "probability"]
    assert sum(int(r[1]) for r in table[1:]) == 2000


def test_train_writes_network_and_trace(files, tmp_path, capsys):
    layers = (LayerSpec("x", 2), LayerSpec("h", 3), LayerSpec("y", 2))
    zero = LayeredNetwork(layers, [np.zeros(2), np.zeros(3), np.zeros(2)], [np.zeros((2, 3)), np.zeros((3, 2))])
    net = files("init.json", zero.to_json())
    rng = np.random.default_rng(2)
    x = rng.normal(size=(10, 2))
    y = x @ np.array([[0.5, -0.2], [0.1, 0.3]])
    pairs = files("pairs.csv", "".join(",".join(format(v, ".17g") for v in (*a, *b)) + "\n" for a, b in zip(x, y)))
    out_net, trace = tmp_path / "trained.json", tmp_path / "trace.csv"
    code, out, _ = run(["train", "--network", net, "--data", pairs, "--steps", 300, "--seed", 11, "--init",
                        "--out", out_net, "--trace", trace], capsys)
    assert code == 0
    summary = rows(out)
    assert summary[0] == ["steps", "initial_loss", "best_loss"]
    assert float(summary[1][2]) < float(summary[1][1])
    assert LayeredNetwork.from_json(out_net.read_text()).dims == (2, 3, 2)
    assert len(rows(trace.read_text())) == 302


def test_train_rbm_target(files, capsys):
    layers = (LayerSpec("v", 4), LayerSpec("h", 4))
    net = files("init.json", LayeredNetwork(layers, [np.zeros(4)] * 2, [np.zeros((4, 4))]).to_json())
    spec = files("rbm.json", RbmParams.random(2, 2, np.random.default_rng(3)).to_json())
    code, out, _ = run(["train", "--network", net, "--rbm-target", spec, "--loss", "kl", "--lr", 0.05,
                        "--steps", 500], capsys)
    assert code == 0
    assert float(rows(out)[1][2]) <= 1e-3


def test_manifest_contents(two_level, tmp_path, capsys):
    out = tmp_path / "z.txt"
    code, _, _ = run(["partition", "--hamiltonian", two_level, "--beta", "0.5", "--output", out], capsys)
    assert code == 0
    manifest = json.loads((tmp_path / "z.txt.manifest.json").read_text())
    assert manifest["version"] == __version__
    assert manifest["subcommand"] == "partition"
    assert manifest["parameters"]["beta"] == "0.5"
    assert manifest["inputs"][str(two_level)] == hashlib.sha256(two_level.read_bytes()).hexdigest()
    assert manifest["outputs"][str(out)] == hashlib.sha256(out.read_bytes()).hexdigest()


def test_explicit_manifest_path(files, tmp_path, capsys):
    spec = files("rbm.json", RbmParams.zeros(1, 1).to_json())
    m = tmp_path / "run.json"
    assert run(["rbm", "--spec", spec, "--sample", "--sweeps", 10, "--seed", 4, "--manifest", m], capsys)[0] == 0
    assert json.loads(m.read_text())["seed"] == 4


def test_reruns_are_byte_identical(files, tmp_path, capsys):
    spec = files("rbm.json", RbmParams.random(2, 2, np.random.default_rng(4)).to_json())
    outputs = []
    for k in range(2):
        out = tmp_path / f"out{k}.csv"
        man = tmp_path / f"out{k}.manifest.json"
        run(["rbm", "--spec", spec, "--sample", "--sweeps", 2000, "--seed", 9, "--output", out, "--manifest", man],
            capsys)
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]


@pytest.mark.parametrize("argv", [
    ["propagate", "--hamiltonian", "missing.csv", "--beta", "1"],
    ["partition", "--beta", "1"],
    ["trotter", "--hamiltonian", "x.csv", "--beta", "1", "--slices", "8,zero"],
    ["nosuchcommand"],
])
def test_invalid_invocations_exit_2(argv, capsys):
    assert run(argv, capsys)[0] == 2


def test_malformed_files_exit_2(files, capsys):
    bad = files("bad.csv", "rows,cols\n1,2\nre,im\n1,0\nx,0\n")
    code, _, err = run(["partition", "--hamiltonian", bad, "--beta", "1"], capsys)
    assert code == 2 and "line 5" in err
    nonherm = files("nh.csv", write_matrix_csv(np.array([[0, 1], [0, 0]])))
    assert run(["partition", "--hamiltonian", nonherm, "--beta", "1"], capsys)[0] == 2
    net = files("net.json", '{"layers": [{"name": "x", "dim": 2}], "biases": {"x": [1]}}')
    code, _, err = run(["entropy", "--network", net], capsys)
    assert code == 2 and "length" in err
    two = files("h.csv", write_matrix_csv(np.eye(2)))
    assert run(["propagate", "--hamiltonian", two, "--beta", "1", "--start", 5], capsys)[0] == 2
    assert run(["propagate", "--hamiltonian", two, "--beta", "1", "--slices", 0], capsys)[0] == 2


def test_numeric_failures_exit_3(files, capsys):
    h = files("deep.csv", write_matrix_csv(np.diag([-1000.0, 0.0])))
    code, _, err = run(["partition", "--hamiltonian", h, "--beta", "1"], capsys)
    assert code == 3 and "overflow" in err
    layers = (LayerSpec("x", 1), LayerSpec("y", 1))
    net = files("net.json", LayeredNetwork(layers, [[0.0], [0.0]], [[[0.0]]]).to_json())
    pairs = files("pairs.csv", "1,inf\n")
    assert run(["train", "--network", net, "--data", pairs, "--steps", 5], capsys)[0] == 3


def test_version_flag(capsys):
    assert run(["--version"], capsys)[0] == 0


def _cli(argv, threads):
    env = dict(os.environ, PATHBOLTZ_THREADS=str(threads))
    return subprocess.run([sys.executable, "-m", "pathboltz", *map(str, argv)],
                          capture_output=True, env=env, check=True).stdout


def test_outputs_are_stable_across_thread_counts(files):
    rng = np.random.default_rng(5)
    a = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    h = files("h6.csv", write_matrix_csv(a + a.conj().T))
    spec = files("rbm.json", RbmParams.random(2, 2, rng).to_json())
    commands = [
        ["propagate", "--hamiltonian", h, "--beta", "0.6", "--slices", 8, "--method", "enumerate", "--end", 3],
        ["rbm", "--spec", spec, "--sample", "--sweeps", 5000, "--seed", 2],
    ]
    for argv in commands:
        assert len({_cli(argv, t) for t in (1, 3, 8)}) == 1
