#!/usr/bin/env python3
"""
Tests for chip topologies, chip records and chip-spec file handling
"""

import json
import os
import sys
import tempfile
from unittest.mock import patch

import networkx as nx
import numpy as np

from services.chip_io import load_chip, save_chip
from services.errors import ChipParseError, LasiqError, ParameterError, ValidationError
from services.freq_model import PowerLawModel
from services.lattice import ChipState, LatticeBuilder, QubitRecord


def _write(directory, name, text):
    path = os.path.join(directory, name)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text)
    return path


def _two_qubit_spec(**overrides):
    spec = {
        "name": "pair",
        "qubits": [
            {"id": 0, "r_n_ohm": 9800.0, "f01_ghz": 5.1, "anharmonicity_mhz": -330.0},
            {"id": 1, "r_n_ohm": 10100.0, "f01_ghz": None, "anharmonicity_mhz": -320.0},
        ],
        "edges": [[0, 1]],
    }
    spec.update(overrides)
    return spec


def test_falcon_preset():
    chip = LatticeBuilder.build_preset("falcon")
    assert len(chip.qubits) == 27
    assert chip.max_degree() == 3
    assert nx.is_connected(chip.graph())


def test_hummingbird_preset():
    chip = LatticeBuilder.build_preset("hummingbird")
    assert len(chip.qubits) == 65
    assert chip.max_degree() == 3
    assert nx.is_connected(chip.graph())


def test_unknown_preset():
    try:
        LatticeBuilder.build_preset("eagle")
    except ParameterError:
        return
    raise AssertionError("unknown preset accepted")


def test_smallest_heavy_hex_cell():
    chip = LatticeBuilder.build_heavy_hex(1, 1)
    graph = chip.graph()
    assert nx.is_connected(graph)
    assert chip.max_degree() <= 3
    # one hexagon with a qubit on every vertex and edge
    assert len(nx.cycle_basis(graph)) == 1
    assert len(chip.qubits) == 12


def test_heavy_hex_grids_are_connected_degree_three():
    for rows, cols in [(1, 2), (2, 2), (3, 2), (2, 3)]:
        chip = LatticeBuilder.build_heavy_hex(rows, cols)
        assert nx.is_connected(chip.graph()), (rows, cols)
        assert chip.max_degree() == 3, (rows, cols)
        assert len(nx.cycle_basis(chip.graph())) == rows * cols, (rows, cols)


def test_heavy_hex_is_deterministic():
    first = LatticeBuilder.build_heavy_hex(2, 3)
    second = LatticeBuilder.build_heavy_hex(2, 3)
    assert first.edges == second.edges


def test_invalid_dimensions():
    for rows, cols in [(0, 1), (1, 0), (-1, 2)]:
        try:
            LatticeBuilder.build_heavy_hex(rows, cols)
        except ParameterError:
            continue
        raise AssertionError(f"accepted rows={rows}, cols={cols}")


def test_chip_validation_rules():
    good = QubitRecord(id=0, r_n=10000.0), QubitRecord(id=1, r_n=10000.0)
    cases = [
        ChipState("dup", (good[0], QubitRecord(id=0, r_n=9000.0)), ()),
        ChipState("loop", good, ((0, 0),)),
        ChipState("dangling", good, ((0, 99),)),
        ChipState("double", good, ((0, 1), (1, 0))),
        ChipState("negative", (QubitRecord(id=0, r_n=-100.0),), ()),
        ChipState("window", (QubitRecord(id=0, r_n=100.0, f01=9000.0),), ()),
    ]
    for chip in cases:
        try:
            chip.validate()
        except ValidationError as e:
            assert e.item, chip.name
            continue
        raise AssertionError(f"{chip.name} passed validation")


def test_load_valid_two_qubit_spec():
    with tempfile.TemporaryDirectory() as tmp:
        chip = load_chip(_write(tmp, "chip.json", json.dumps(_two_qubit_spec())))
    assert len(chip.qubits) == 2
    assert len(chip.edges) == 1
    assert abs(chip.qubit(0).f01 - 5100.0) < 1e-9
    assert chip.qubit(1).f01 is None


def test_load_rejects_negative_resistance():
    spec = _two_qubit_spec()
    spec["qubits"][0]["r_n_ohm"] = -100.0
    with tempfile.TemporaryDirectory() as tmp:
        try:
            load_chip(_write(tmp, "chip.json", json.dumps(spec)))
        except ValidationError as e:
            assert "qubit 0" in e.item
            return
    raise AssertionError("negative resistance accepted")


def test_load_rejects_dangling_edge():
    with tempfile.TemporaryDirectory() as tmp:
        try:
            load_chip(_write(tmp, "chip.json", json.dumps(_two_qubit_spec(edges=[[0, 99]]))))
        except ValidationError as e:
            assert "99" in str(e)
            return
    raise AssertionError("dangling edge accepted")


def test_load_reports_json_line():
    text = '{\n  "name": "bad",\n  "qubits": [\n    {"id": 0,,}\n  ]\n}\n'
    with tempfile.TemporaryDirectory() as tmp:
        try:
            load_chip(_write(tmp, "chip.json", text))
        except ChipParseError as e:
            assert e.line == 4
            assert "line 4" in str(e)
            return
    raise AssertionError("malformed JSON accepted")


def test_read_failures_are_logged():
    with tempfile.TemporaryDirectory() as tmp, patch("services.chip_io.logger") as logger:
        for text in ('{"name": "bad",', json.dumps({"name": "bad"})):
            try:
                load_chip(_write(tmp, "chip.json", text))
            except LasiqError:
                pass
        assert logger.error.call_count == 2
    with patch("services.freq_model.logger") as logger:
        try:
            PowerLawModel.from_dict({"a": 1.0})
        except LasiqError:
            pass
        assert logger.error.called


def test_missing_chip_file():
    try:
        load_chip("/nonexistent/chip.json")
    except FileNotFoundError:
        return
    raise AssertionError("missing file accepted")


def test_save_load_round_trip():
    chip = LatticeBuilder.build_preset("falcon")
    rng = np.random.default_rng(3)
    chip = chip.with_frequencies({qid: float(f) for qid, f in zip(chip.ids, rng.normal(5000.0, 80.0, len(chip.ids)))})
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "chip.json")
        save_chip(chip, path)
        loaded = load_chip(path)
    assert loaded.edges == chip.edges
    assert loaded.name == chip.name
    for original, restored in zip(chip.qubits, loaded.qubits):
        assert original.id == restored.id
        assert original.r_n == restored.r_n
        assert original.f01 == restored.f01
    assert loaded == chip


def test_neighbors_follow_both_orientations():
    chip = LatticeBuilder.build_heavy_hex(1, 1)
    for control, target in chip.edges:
        assert target in chip.neighbors(control)
        assert control in chip.neighbors(target)


def run_comprehensive_tests():
    """Run every test in this module and print a summary"""
    tests = [(name, fn) for name, fn in sorted(globals().items()) if name.startswith("test_") and callable(fn)]
    passed = 0
    for name, fn in tests:
        try:
            fn()
            print(f"✅ {name}")
            passed += 1
        except Exception as e:
            print(f"❌ {name}: {e!r}")
    print(f"\n📊 {passed}/{len(tests)} lattice tests passed")
    return passed == len(tests)


if __name__ == "__main__":
    sys.exit(0 if run_comprehensive_tests() else 1)
