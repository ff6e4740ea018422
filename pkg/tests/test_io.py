import numpy as np
import pytest

from triblock.energy import PhaseDensity
from triblock.io import (
    FormatError,
    labels_to_pgm,
    read_json,
    read_pgm,
    read_ppm,
    read_rows_csv,
    read_snapshot,
    read_tdf,
    render_rgb,
    write_json,
    write_pgm,
    write_ppm,
    write_rows_csv,
    write_snapshot,
    write_tdf,
)


def density(n=16, seed=0):
    rng = np.random.default_rng(seed)
    return PhaseDensity.from_arrays(rng.uniform(0, 0.5, (n, n)), rng.uniform(0, 0.5, (n, n)))


def test_tdf_round_trip_bitwise(tmp_path):
    arr = np.random.default_rng(1).standard_normal((3, 8, 8))
    write_tdf(tmp_path / "a.tdf", arr)
    back = read_tdf(tmp_path / "a.tdf")
    assert back.tobytes() == arr.tobytes()
    raw = (tmp_path / "a.tdf").read_bytes()
    assert raw[:4] == b"TDF1" and len(raw) == 12 + 8 * 3 * 64


def test_snapshot_round_trip(tmp_path):
    u = density()
    write_snapshot(tmp_path / "s.tdf", u)
    v = read_snapshot(tmp_path / "s.tdf")
    assert np.array_equal(u.u1.data, v.u1.data) and np.array_equal(u.u2.data, v.u2.data)


@pytest.mark.parametrize("payload", [b"XXXX" + bytes(8), b"TD", b"TDF1" + (4).to_bytes(4, "little") + (1).to_bytes(4, "little")])
def test_tdf_rejects_bad_files(tmp_path, payload):
    p = tmp_path / "bad.tdf"
    p.write_bytes(payload)
    with pytest.raises(FormatError):
        read_tdf(p)


def test_snapshot_channel_count(tmp_path):
    write_tdf(tmp_path / "one.tdf", np.zeros((8, 8)))
    with pytest.raises(FormatError):
        read_snapshot(tmp_path / "one.tdf")


def test_pgm_labels_round_trip(tmp_path):
    labels = np.random.default_rng(2).integers(0, 3, (12, 12))
    write_pgm(tmp_path / "l.pgm", labels_to_pgm(labels))
    assert np.array_equal(read_pgm(tmp_path / "l.pgm") // 127, labels)


def test_ppm_round_trip(tmp_path):
    rgb = render_rgb(density())
    write_ppm(tmp_path / "r.ppm", rgb)
    assert np.array_equal(read_ppm(tmp_path / "r.ppm"), rgb)
    with pytest.raises(FormatError):
        read_pgm(tmp_path / "r.ppm")


def test_json_and_csv(tmp_path):
    doc = {"a": np.float64(1.5), "b": np.arange(3)}
    write_json(tmp_path / "d.json", doc)
    assert read_json(tmp_path / "d.json") == {"a": 1.5, "b": [0, 1, 2]}
    rows = [{"x": 1, "y": "p"}, {"x": 2, "z": 3.5}]
    write_rows_csv(tmp_path / "r.csv", rows)
    back = read_rows_csv(tmp_path / "r.csv")
    assert back == [{"x": "1", "y": "p", "z": ""}, {"x": "2", "y": "", "z": "3.5"}]
