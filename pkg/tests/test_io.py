import json
import struct

import numpy as np
import pytest

from anisolab.solver import Field, Grid, Trajectory, read_trajectory, write_trajectory
from anisolab.solver.io import (SnapshotFormatError, decode_snapshot, dumps, encode_snapshot,
                                read_snapshot, write_snapshot)


@pytest.mark.parametrize("dims, bc", [((7,), "dirichlet-profile"), ((5, 6), "periodic"),
                                      ((4, 5, 6), "noflux")])
def test_snapshot_round_trip(tmp_path, dims, bc):
    g = Grid.uniform([-1.0] * len(dims), [2.0] * len(dims), dims, bc)
    fld = Field(g, np.random.default_rng(0).normal(size=dims), 0.125)
    write_snapshot(tmp_path / "a.anip", fld)
    back = read_snapshot(tmp_path / "a.anip")
    assert back.grid == g and back.time == fld.time
    assert np.array_equal(back.values, fld.values)


def test_header_layout():
    g = Grid.uniform([0.0, 0.0], [1.0, 2.0], [4, 5], "periodic")
    buf = encode_snapshot(Field(g, np.zeros((4, 5)), 3.0))
    assert buf[:4] == b"ANIP" and buf[4] == 1
    assert struct.unpack_from("<Q", buf, 5) == (2,)
    assert struct.unpack_from("<2Q", buf, 13) == (4, 5)
    assert len(buf) == 13 + 16 + 16 + 16 + 8 + 1 + 8 * 20


def test_corrupt_input_rejected():
    g = Grid.uniform([0.0], [1.0], [4])
    buf = encode_snapshot(Field(g, np.ones(4)))
    with pytest.raises(SnapshotFormatError):
        decode_snapshot(b"XNIP" + buf[4:])
    with pytest.raises(SnapshotFormatError):
        decode_snapshot(buf[:4] + b"\x02" + buf[5:])
    with pytest.raises(SnapshotFormatError):
        decode_snapshot(buf[:-8])
    bad_code = bytearray(buf)
    bad_code[13 + 8 + 8 + 8 + 8] = 9
    with pytest.raises(SnapshotFormatError):
        decode_snapshot(bytes(bad_code))


def test_trajectory_directory_deterministic(tmp_path):
    g = Grid.uniform([0.0] * 2, [1.0] * 2, [6, 6])
    traj = Trajectory([Field(g, np.full((6, 6), float(k)), 0.1 * k) for k in range(3)],
                      {"params": {"exponents": [2.5, 2.5]}})
    write_trajectory(tmp_path / "a", traj)
    write_trajectory(tmp_path / "b", traj)
    for name in ["manifest.json", "snap_00000.anip", "snap_00002.anip"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    back = read_trajectory(tmp_path / "a")
    assert np.array_equal(back.times, traj.times) and back.metadata == traj.metadata
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["format"] == "ANIP" and len(manifest["snapshots"]) == 3


def test_dumps_sorted_and_stable():
    assert dumps({"b": 1, "a": [1.5, None]}) == dumps({"a": [1.5, None], "b": 1})
    assert dumps({"b": 1}).endswith("\n")
