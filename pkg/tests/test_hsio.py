import numpy as np
import pytest

from hsldmm import DataCube, MaskSet, make_mask
from hsldmm.hsio import (
    FormatError,
    export_band_csv,
    export_band_pgm,
    read_cube,
    read_mask,
    write_cube,
    write_mask,
)


def f32_cube(shape, seed):
    rng = np.random.default_rng(seed)
    return DataCube(rng.random(shape).astype(np.float32).astype(np.float64))


def test_cube_roundtrip_bitwise(tmp_path):
    cube = f32_cube((3, 5, 4), 0)
    path = tmp_path / "c.hsc"
    write_cube(path, cube)
    back = read_cube(path)
    assert back.dims == cube.dims
    assert np.array_equal(back.values, cube.values)


def test_cube_file_layout(tmp_path):
    cube = DataCube(np.arange(8.0).reshape(2, 2, 2))
    path = tmp_path / "c.hsc"
    write_cube(path, cube)
    blob = path.read_bytes()
    assert blob.startswith(b"HSC1\nm=2 n=2 B=2 dtype=f32 order=bsq\n")
    payload = blob.split(b"order=bsq\n", 1)[1]
    assert len(payload) == 8 * 4
    assert np.array_equal(np.frombuffer(payload, "<f4"), np.arange(8.0, dtype="<f4"))


def test_mask_roundtrip(tmp_path):
    masks = make_mask((6, 5, 3), 0.4, 1)
    path = tmp_path / "m.hsc"
    write_mask(path, masks)
    back = read_mask(path)
    assert np.array_equal(back.masks, masks.masks)


def test_read_rejects_bad_magic(tmp_path):
    path = tmp_path / "x.hsc"
    path.write_bytes(b"XXXX\nm=1 n=1 B=1 dtype=f32 order=bsq\n" + b"\x00" * 4)
    with pytest.raises(FormatError):
        read_cube(path)


def test_read_rejects_wrong_payload_size(tmp_path):
    path = tmp_path / "x.hsc"
    path.write_bytes(b"HSC1\nm=2 n=2 B=1 dtype=f32 order=bsq\n" + b"\x00" * 8)
    with pytest.raises(FormatError):
        read_cube(path)


def test_read_rejects_bad_header_fields(tmp_path):
    path = tmp_path / "x.hsc"
    path.write_bytes(b"HSC1\nm=2 n=2 dtype=f32 order=bsq\n")
    with pytest.raises(FormatError):
        read_cube(path)
    path.write_bytes(b"HSC1\nm=2 n=2 B=0 dtype=f32 order=bsq\n")
    with pytest.raises(FormatError):
        read_cube(path)
    path.write_bytes(b"HSC1\nm=1 n=1 B=1 dtype=f32 order=bip\n")
    with pytest.raises(FormatError):
        read_cube(path)


def test_cube_and_mask_dtypes_not_interchangeable(tmp_path):
    cube = f32_cube((1, 2, 2), 2)
    write_cube(tmp_path / "c.hsc", cube)
    with pytest.raises(FormatError):
        read_mask(tmp_path / "c.hsc")
    write_mask(tmp_path / "m.hsc", make_mask((2, 2, 1), 0.5, 0))
    with pytest.raises(FormatError):
        read_cube(tmp_path / "m.hsc")


def test_mask_bytes_must_be_binary(tmp_path):
    path = tmp_path / "m.hsc"
    path.write_bytes(b"HSC1\nm=1 n=2 B=1 dtype=u8 order=bsq\n" + bytes([0, 2]))
    with pytest.raises(FormatError):
        read_mask(path)


def test_pgm_export(tmp_path):
    cube = DataCube(np.array([[[0.0, 1.0], [0.5, 0.25]]]))
    path = tmp_path / "b.pgm"
    export_band_pgm(path, cube, 0)
    blob = path.read_bytes()
    assert blob.startswith(b"P5\n# scale min=0.0 max=1.0\n2 2\n65535\n")
    pixels = np.frombuffer(blob.rsplit(b"65535\n", 1)[1], dtype=">u2").reshape(2, 2)
    assert pixels[0, 0] == 0 and pixels[0, 1] == 65535
    assert pixels[1, 0] == round(0.5 * 65535)


def test_pgm_constant_band_is_midgray(tmp_path):
    cube = DataCube(np.full((1, 3, 2), 0.7))
    path = tmp_path / "b.pgm"
    export_band_pgm(path, cube, 0)
    pixels = np.frombuffer(path.read_bytes().rsplit(b"65535\n", 1)[1], dtype=">u2")
    assert np.all(pixels == 32768)


def test_csv_export(tmp_path):
    cube = DataCube(np.array([[[0.0, 1.0], [0.5, 0.25]]]))
    path = tmp_path / "b.csv"
    export_band_csv(path, cube, 0)
    back = np.loadtxt(path, delimiter=",")
    assert np.array_equal(back, cube.band(0))


def test_export_band_index_validation(tmp_path):
    cube = f32_cube((2, 3, 3), 3)
    with pytest.raises(ValueError):
        export_band_pgm(tmp_path / "b.pgm", cube, 2)
    with pytest.raises(ValueError):
        export_band_csv(tmp_path / "b.csv", cube, -1)


def test_many_random_roundtrips(tmp_path):
    rng = np.random.default_rng(4)
    for i in range(10):
        shape = (int(rng.integers(1, 4)), int(rng.integers(1, 6)), int(rng.integers(1, 6)))
        cube = DataCube(rng.standard_normal(shape).astype(np.float32).astype(np.float64))
        p = tmp_path / f"r{i}.hsc"
        write_cube(p, cube)
        assert np.array_equal(read_cube(p).values, cube.values)
        masks = MaskSet(rng.random(shape) < 0.5)
        pm = tmp_path / f"r{i}.mask.hsc"
        write_mask(pm, masks)
        assert np.array_equal(read_mask(pm).masks, masks.masks)
