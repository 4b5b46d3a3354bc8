import numpy as np
import pytest

from surfreg.exceptions import CloudIOError, EmptyCloudError, NonFiniteCoordinateError, ParseError
from surfreg.fileio import (
    file_sha256,
    format_correspondences,
    load_cloud,
    load_correspondences,
    save_cloud,
)
from surfreg.geometry import PointCloud
from surfreg.icp import CorrespondencePair
from surfreg.spatial import build


def test_xyz_example(tmp_path):
    p = tmp_path / "a.xyz"
    p.write_text("0 0 0\n1 2 3\n")
    cloud = load_cloud(p)
    assert np.array_equal(cloud.points, [[0, 0, 0], [1, 2, 3]])


def test_xyz_comments_and_blank_lines(tmp_path):
    p = tmp_path / "a.xyz"
    p.write_text("# header\n\n1 2 3  # trailing\n   \n4 5 6\n")
    assert len(load_cloud(p)) == 2


@pytest.mark.parametrize("ext", ["xyz", "ply"])
def test_round_trip_exact(tmp_path, rng, ext):
    pts = rng.uniform(-1e3, 1e3, size=(2000, 3)) * 10.0 ** rng.integers(-5, 5, size=(2000, 1))
    cloud = PointCloud(pts)
    path = tmp_path / f"c.{ext}"
    save_cloud(cloud, path)
    assert load_cloud(path) == cloud


@pytest.mark.parametrize("ext", ["xyz", "ply"])
def test_empty_cloud_round_trip(tmp_path, ext):
    path = tmp_path / f"e.{ext}"
    save_cloud(PointCloud(np.empty((0, 3))), path)
    cloud = load_cloud(path)
    assert len(cloud) == 0
    with pytest.raises(EmptyCloudError):
        build(cloud)
    if ext == "xyz":
        assert path.read_text() == ""


def test_nan_names_line(tmp_path):
    p = tmp_path / "bad.xyz"
    p.write_text("0 0 0\n1 nan 3\n")
    with pytest.raises(NonFiniteCoordinateError) as err:
        load_cloud(p)
    assert err.value.line == 2
    assert err.value.exit_code == 4
    assert str(err.value).startswith(f"{p}:2:2:")


@pytest.mark.parametrize("text,line", [
    ("0 0 0\n1 2\n", 2),
    ("0 0 0\n1 2 x\n", 2),
    ("1 2 3 4\n", 1),
])
def test_xyz_parse_errors(tmp_path, text, line):
    p = tmp_path / "bad.xyz"
    p.write_text(text)
    with pytest.raises(ParseError) as err:
        load_cloud(p)
    assert err.value.line == line


def test_missing_file_is_io_error(tmp_path):
    with pytest.raises(CloudIOError) as err:
        load_cloud(tmp_path / "nope.xyz")
    assert "nope.xyz" in str(err.value)
    assert err.value.exit_code == 3


PLY_WITH_EXTRAS = """ply
format ascii 1.0
comment made by hand
element vertex 2
property float nx
property float x
property float y
property float z
property uchar red
element face 1
property list uchar int vertex_indices
end_header
0.5 1 2 3 255
0.5 4 5 6 0
3 0 1 1
"""


def test_ply_skips_other_properties_and_elements(tmp_path):
    p = tmp_path / "x.ply"
    p.write_text(PLY_WITH_EXTRAS)
    assert np.array_equal(load_cloud(p).points, [[1, 2, 3], [4, 5, 6]])


@pytest.mark.parametrize("text", [
    "ply\nformat binary_little_endian 1.0\nelement vertex 0\nend_header\n",
    "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n1 2\n",
    "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n",
    "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\n",
    "plx\n",
    "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 inf 3\n",
])
def test_ply_malformed(tmp_path, text):
    p = tmp_path / "m.ply"
    p.write_text(text)
    with pytest.raises(ParseError):
        load_cloud(p)


def test_binary_content_is_parse_error(tmp_path):
    p = tmp_path / "b.ply"
    p.write_bytes(b"ply\nformat ascii 1.0\n\xff\xfe\n")
    with pytest.raises(ParseError):
        load_cloud(p)


def test_explicit_format_overrides_extension(tmp_path):
    p = tmp_path / "cloud.txt"
    save_cloud(PointCloud([[1.0, 2.0, 3.0]]), p, fmt="ply")
    assert p.read_text().startswith("ply\n")
    assert len(load_cloud(p, "ply")) == 1
    with pytest.raises(ParseError):
        load_cloud(p, "obj")


def test_save_leaves_no_temp_files(tmp_path):
    save_cloud(PointCloud([[1.0, 2.0, 3.0]]), tmp_path / "a.xyz")
    assert [q.name for q in tmp_path.iterdir()] == ["a.xyz"]


def test_save_to_missing_directory_is_io_error(tmp_path):
    with pytest.raises(CloudIOError):
        save_cloud(PointCloud([[1.0, 2.0, 3.0]]), tmp_path / "no" / "a.xyz")


def test_correspondence_round_trip(tmp_path):
    pairs = [CorrespondencePair((0.1, 0.2, 0.3), (1.0, 2.0, 3.0)),
             CorrespondencePair((1e-17, -5.0, 7.0), (4.0, 5.0, 6.0))]
    p = tmp_path / "c.txt"
    p.write_text(format_correspondences(pairs))
    assert load_correspondences(p) == pairs


def test_correspondence_bad_line(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("1 2 3 4 5\n")
    with pytest.raises(ParseError):
        load_correspondences(p)


def test_sha256(tmp_path):
    p = tmp_path / "h"
    p.write_bytes(b"abc")
    assert file_sha256(p) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
