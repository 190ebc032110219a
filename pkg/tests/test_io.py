import json

import numpy as np
import pytest

from netblock.errors import DataError
from netblock.io import (
    ingest_sample,
    read_labels,
    read_layer,
    read_matrix,
    write_json,
    write_labels,
    write_layer,
    write_matrix,
    write_sample,
)
from netblock.model import MembershipMatrix, NetworkSample, sample_mono, sample_multi


def write_text(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def manifest_for(tmp_path, n, names, **extra):
    doc = {"format_version": 1, "n": n, "L": len(names), "rho": 1.0, "layers": names, **extra}
    return write_text(tmp_path / "manifest.json", json.dumps(doc))


def test_layer_round_trip(tmp_path, rng):
    rows = np.array([3, 0, 1, 0])
    cols = np.array([4, 2, 1, 0])
    write_layer(tmp_path / "a.txt", 5, rows, cols)
    n, r, c = read_layer(tmp_path / "a.txt")
    assert n == 5
    assert r.tolist() == [0, 0, 1, 3] and c.tolist() == [0, 2, 1, 4]


def test_labels_round_trip(tmp_path, rng):
    labels = rng.integers(0, 4, 30)
    labels[:4] = np.arange(4)
    write_labels(tmp_path / "z.txt", labels, 4)
    Z = read_labels(tmp_path / "z.txt")
    assert Z.K == 4 and np.array_equal(Z.labels, labels)


def test_labels_out_of_range(tmp_path):
    write_text(tmp_path / "z.txt", "K 2\n0\n2\n")
    with pytest.raises(DataError, match="z.txt"):
        read_labels(tmp_path / "z.txt")
    write_text(tmp_path / "y.txt", "0\n1\n")
    with pytest.raises(DataError):
        read_labels(tmp_path / "y.txt")


def test_matrix_round_trip(tmp_path, rng):
    M = rng.standard_normal((4, 4)) * 1e-7 + rng.uniform(0, 1, (4, 4))
    write_matrix(tmp_path / "m.csv", M)
    assert np.array_equal(read_matrix(tmp_path / "m.csv"), M)
    assert (tmp_path / "m.csv").read_text().startswith("# format_version 1")


def test_single_edge_layer(tmp_path):
    write_text(tmp_path / "l0.txt", "n 2\n0 1\n")
    s = ingest_sample(manifest_for(tmp_path, 2, ["l0.txt"]))
    assert np.array_equal(s.dense(0), np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_sample_round_trip_is_bit_identical(tmp_path):
    Z = MembershipMatrix.from_sizes([10, 15, 5])
    B = np.array([[0.6, 0.2, 0.1], [0.2, 0.5, 0.3], [0.1, 0.3, 0.7]])
    s = sample_mono(B, Z, 0.7, 4, seed=11)
    back = ingest_sample(write_sample(s, tmp_path / "out"))
    assert back.n == s.n and back.L == s.L and back.rho == s.rho
    for (r1, c1), (r2, c2) in zip(s.layers, back.layers):
        assert np.array_equal(r1, r2) and np.array_equal(c1, c2)


def test_group_labels_survive_round_trip(tmp_path):
    Z = MembershipMatrix.from_sizes([6, 6])
    s = sample_multi([np.eye(2) * 0.5, np.full((2, 2), 0.3)], Z, 1.0, [2, 3], seed=1)
    back = ingest_sample(write_sample(s, tmp_path))
    assert np.array_equal(back.group_labels, s.group_labels)


def test_rho_override_and_self_loop_drop(tmp_path):
    write_text(tmp_path / "l0.txt", "n 3\n0 0\n0 1\n")
    path = manifest_for(tmp_path, 3, ["l0.txt"])
    s = ingest_sample(path, rho=0.25, drop_self_loops=True)
    assert s.rho == 0.25
    assert s.dense(0)[0, 0] == 0 and s.dense(0)[0, 1] == 1


def test_missing_layer_file_names_path(tmp_path):
    path = manifest_for(tmp_path, 3, ["absent.txt"])
    with pytest.raises(DataError, match="absent.txt"):
        ingest_sample(path)
    with pytest.raises(DataError, match="nowhere.json"):
        ingest_sample(tmp_path / "nowhere.json")


@pytest.mark.parametrize("body,message", [
    ("nodes 3\n0 1\n", "header"),
    ("n x\n", "integer"),
    ("n 3\n0 3\n", "out of range"),
    ("n 3\n-1 2\n", "out of range"),
    ("n 3\n2 1\n", "i <= j"),
    ("n 3\n0 1\n1 2\n0 1\n", "duplicate"),
    ("n 3\n0 1 1\n", "expected"),
    ("", "empty"),
])
def test_malformed_layer_files(tmp_path, body, message):
    write_text(tmp_path / "bad.txt", body)
    with pytest.raises(DataError, match=message):
        read_layer(tmp_path / "bad.txt")


def test_manifest_consistency_checks(tmp_path):
    write_text(tmp_path / "l0.txt", "n 4\n0 1\n")
    with pytest.raises(DataError, match="n=4"):
        ingest_sample(manifest_for(tmp_path, 3, ["l0.txt"]))
    doc = {"format_version": 1, "n": 4, "L": 2, "layers": ["l0.txt"]}
    write_text(tmp_path / "m2.json", json.dumps(doc))
    with pytest.raises(DataError, match="L=2"):
        ingest_sample(tmp_path / "m2.json")
    write_text(tmp_path / "m3.json", "{not json")
    with pytest.raises(DataError, match="invalid JSON"):
        ingest_sample(tmp_path / "m3.json")
    write_text(tmp_path / "m4.json", json.dumps({"format_version": 9, "n": 4, "layers": ["l0.txt"]}))
    with pytest.raises(DataError, match="format_version"):
        ingest_sample(tmp_path / "m4.json")


def test_json_is_deterministic(tmp_path):
    write_json(tmp_path / "a.json", {"b": [1, 2.5], "a": {"z": 1, "y": None}})
    write_json(tmp_path / "b.json", {"a": {"y": None, "z": 1}, "b": [1, 2.5]})
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    with pytest.raises(ValueError):
        write_json(tmp_path / "c.json", {"x": float("nan")})


def test_empty_layers_round_trip(tmp_path):
    s = NetworkSample(3, ((np.array([], dtype=np.int64), np.array([], dtype=np.int64)),), 1.0)
    back = ingest_sample(write_sample(s, tmp_path))
    assert back.layers[0][0].size == 0
