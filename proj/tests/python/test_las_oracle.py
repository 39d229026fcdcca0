# LAS decoding checked against laspy in both directions.
import subprocess

import laspy
import numpy as np
import pytest


def dump(tool, path):
    out = subprocess.run([tool, str(path)], check=True, capture_output=True, text=True).stdout.splitlines()
    head = out[0].split()
    assert head[0] == "count"
    count = int(head[1])
    box = [float(v) for v in head[3:6]], [float(v) for v in head[7:10]]
    rows = np.array([[float(v) for v in line.split()] for line in out[1:]]).reshape(-1, 8)
    assert len(rows) == count
    return box, rows


def write_with_laspy(path, xyz, scale, offset, point_format, rgb=None, intensity=None, cls=None):
    header = laspy.LasHeader(point_format=point_format, version="1.2")
    header.scales = np.array(scale)
    header.offsets = np.array(offset)
    las = laspy.LasData(header)
    las.x, las.y, las.z = xyz[:, 0], xyz[:, 1], xyz[:, 2]
    if rgb is not None:
        las.red, las.green, las.blue = rgb[:, 0], rgb[:, 1], rgb[:, 2]
    if intensity is not None:
        las.intensity = intensity
    if cls is not None:
        las.classification = cls
    las.write(str(path))


def test_scale_and_offset_example(tmp_path, ingest_dump):
    # raw 250 with scale 0.01 and offset 100 decodes to 102.5
    path = tmp_path / "one.las"
    write_with_laspy(path, np.array([[102.5, 100.0, 99.99]]), [0.01, 0.01, 0.01], [100.0, 100.0, 100.0], 0)
    _, rows = dump(ingest_dump, path)
    assert rows[0, 0] == pytest.approx(102.5, abs=1e-9)
    assert rows[0, 1] == pytest.approx(100.0, abs=1e-9)
    assert rows[0, 2] == pytest.approx(99.99, abs=1e-9)


@pytest.mark.parametrize("point_format", [0, 1, 2, 3])
def test_laspy_written_file_decodes(tmp_path, ingest_dump, point_format):
    rng = np.random.default_rng(point_format)
    n = 5000
    xyz = rng.uniform(-500, 500, size=(n, 3)) + np.array([651000.0, 6862000.0, 40.0])
    rgb8 = rng.integers(0, 256, size=(n, 3))
    intensity = rng.integers(0, 65536, size=n)
    cls = rng.integers(0, 32, size=n)
    scale, offset = [0.001, 0.001, 0.001], [651000.0, 6862000.0, 0.0]
    has_rgb = point_format in (2, 3)
    path = tmp_path / "cloud.las"
    write_with_laspy(path, xyz, scale, offset, point_format,
                     rgb=rgb8 * 257 if has_rgb else None, intensity=intensity, cls=cls)

    ref = laspy.read(str(path))
    box, rows = dump(ingest_dump, path)
    assert len(rows) == n
    np.testing.assert_allclose(rows[:, 0], ref.x, rtol=0, atol=1e-6)
    np.testing.assert_allclose(rows[:, 1], ref.y, rtol=0, atol=1e-6)
    np.testing.assert_allclose(rows[:, 2], ref.z, rtol=0, atol=1e-6)
    np.testing.assert_array_equal(rows[:, 6], intensity)
    np.testing.assert_array_equal(rows[:, 7], cls)
    if has_rgb:
        # 16-bit color reduced to 8 bits
        np.testing.assert_array_equal(rows[:, 3:6], rgb8)
    else:
        # formats without color decode as mid gray
        assert (rows[:, 3:6] == 128).all()
    assert box[0] == pytest.approx([ref.x.min(), ref.y.min(), ref.z.min()], abs=1e-6)
    assert box[1] == pytest.approx([ref.x.max(), ref.y.max(), ref.z.max()], abs=1e-6)


@pytest.mark.parametrize("kind", ["uniform", "gaussian", "duplicates"])
def test_fixture_writer_agrees_with_laspy(tmp_path, ingest_dump, make_fixture, kind):
    path = tmp_path / f"{kind}.las"
    subprocess.run([make_fixture, kind, "3000", "5", str(path)], check=True)
    ref = laspy.read(str(path))
    assert ref.header.point_count == 3000
    assert ref.header.mins == pytest.approx([ref.x.min(), ref.y.min(), ref.z.min()], abs=1e-9)
    assert ref.header.maxs == pytest.approx([ref.x.max(), ref.y.max(), ref.z.max()], abs=1e-9)
    _, rows = dump(ingest_dump, path)
    np.testing.assert_allclose(rows[:, 0:3], np.column_stack([ref.x, ref.y, ref.z]), rtol=0, atol=1e-9)
