"""Packed template container, rotation, and the on-disk format."""

import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from visiris.errors import ShapeError, TemplateFormatError
from visiris.template import (
    HEIGHT,
    IrisTemplate,
    MAGIC,
    WIDTH,
    WORDS_PER_ROW,
    load_template,
    pack_plane,
    rotate_template,
    save_template,
    unpack_plane,
)


def random_template(seed=0, planes=2):
    rng = np.random.default_rng(seed)
    code = rng.random((planes, HEIGHT, WIDTH)) > 0.5
    mask = rng.random((planes, HEIGHT, WIDTH)) > 0.2
    return IrisTemplate.from_bit_planes(code, mask)


class TestPacking:
    def test_round_trip(self):
        bits = np.random.default_rng(1).random((HEIGHT, WIDTH)) > 0.5
        np.testing.assert_array_equal(unpack_plane(pack_plane(bits)), bits)

    def test_first_column_is_lsb(self):
        bits = np.zeros((HEIGHT, WIDTH), dtype=bool)
        bits[0, 0] = True
        bits[0, 63] = True
        bits[0, 64] = True
        words = pack_plane(bits)
        assert words[0, 0] == (1 | (1 << 63))
        assert words[0, 1] == 1
        assert words[1:].sum() == 0

    def test_wrong_shape(self):
        with pytest.raises(ShapeError):
            pack_plane(np.zeros((HEIGHT, WIDTH + 1), dtype=bool))
        with pytest.raises(ShapeError):
            unpack_plane(np.zeros((HEIGHT, 7), dtype="<u8"))

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31))
    def test_round_trip_property(self, seed):
        bits = np.random.default_rng(seed).random((HEIGHT, WIDTH)) > 0.5
        np.testing.assert_array_equal(unpack_plane(pack_plane(bits)), bits)


class TestContainer:
    def test_bit_plane_round_trip(self):
        t = random_template(7)
        rebuilt = IrisTemplate.from_bit_planes(t.code_bits(), t.mask_bits())
        np.testing.assert_array_equal(rebuilt.code, t.code)
        np.testing.assert_array_equal(rebuilt.mask, t.mask)

    def test_plane_count_must_be_even(self):
        words = np.zeros((3, HEIGHT, WORDS_PER_ROW), dtype="<u8")
        with pytest.raises(ShapeError, match="even"):
            IrisTemplate(words, words)
        with pytest.raises(ShapeError, match="even"):
            IrisTemplate(words[:1], words[:1])

    def test_mask_shape_must_match(self):
        code = np.zeros((2, HEIGHT, WORDS_PER_ROW), dtype="<u8")
        mask = np.zeros((4, HEIGHT, WORDS_PER_ROW), dtype="<u8")
        with pytest.raises(ShapeError, match="mask shape"):
            IrisTemplate(code, mask)

    def test_arrays_are_frozen(self):
        t = random_template(2)
        with pytest.raises(ValueError):
            t.code[0, 0, 0] = 0


class TestRotation:
    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31), shift=st.integers(-600, 600))
    def test_packed_rotation_matches_bit_roll(self, seed, shift):
        t = random_template(seed)
        rotated = rotate_template(t, shift)
        np.testing.assert_array_equal(
            rotated.code_bits(), np.roll(t.code_bits(), shift, axis=2)
        )
        np.testing.assert_array_equal(
            rotated.mask_bits(), np.roll(t.mask_bits(), shift, axis=2)
        )

    def test_zero_shift_is_identity(self):
        t = random_template(3)
        r = rotate_template(t, 0)
        np.testing.assert_array_equal(r.code, t.code)

    def test_full_turn_is_identity(self):
        t = random_template(4)
        r = rotate_template(t, WIDTH)
        np.testing.assert_array_equal(r.code, t.code)

    def test_composition(self):
        t = random_template(5)
        a = rotate_template(rotate_template(t, 9), 30)
        b = rotate_template(t, 39)
        np.testing.assert_array_equal(a.code, b.code)

    def test_inverse(self):
        t = random_template(6)
        back = rotate_template(rotate_template(t, 17), -17)
        np.testing.assert_array_equal(back.code, t.code)
        np.testing.assert_array_equal(back.mask, t.mask)


class TestFileFormat:
    def test_round_trip(self, tmp_path):
        t = random_template(8)
        p = tmp_path / "a.irt"
        save_template(t, p)
        back = load_template(p)
        np.testing.assert_array_equal(back.code, t.code)
        np.testing.assert_array_equal(back.mask, t.mask)

    def test_four_plane_round_trip(self, tmp_path):
        t = random_template(9, planes=4)
        p = tmp_path / "b.irt"
        save_template(t, p)
        assert load_template(p).planes == 4

    def test_header_layout(self, tmp_path):
        p = tmp_path / "c.irt"
        save_template(random_template(10), p)
        blob = p.read_bytes()
        assert blob[:4] == MAGIC
        assert struct.unpack("<IIII", blob[4:20]) == (1, 2, WIDTH, HEIGHT)
        assert len(blob) == 20 + 2 * 2 * HEIGHT * WORDS_PER_ROW * 8

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.irt"
        p.write_bytes(b"NOPE" + bytes(64))
        with pytest.raises(TemplateFormatError, match="magic"):
            load_template(p)

    def test_truncated_header(self, tmp_path):
        p = tmp_path / "cut.irt"
        p.write_bytes(MAGIC + b"\x01\x00")
        with pytest.raises(TemplateFormatError, match="truncated"):
            load_template(p)

    def test_unsupported_version(self, tmp_path):
        p = tmp_path / "v2.irt"
        save_template(random_template(11), p)
        blob = bytearray(p.read_bytes())
        blob[4:8] = struct.pack("<I", 2)
        p.write_bytes(bytes(blob))
        with pytest.raises(TemplateFormatError, match="version"):
            load_template(p)

    def test_unsupported_geometry(self, tmp_path):
        p = tmp_path / "geo.irt"
        save_template(random_template(12), p)
        blob = bytearray(p.read_bytes())
        blob[12:16] = struct.pack("<I", 256)
        p.write_bytes(bytes(blob))
        with pytest.raises(TemplateFormatError, match="geometry"):
            load_template(p)

    def test_odd_plane_count(self, tmp_path):
        p = tmp_path / "odd.irt"
        blob = MAGIC + struct.pack("<IIII", 1, 3, WIDTH, HEIGHT)
        p.write_bytes(blob + bytes(3 * HEIGHT * WORDS_PER_ROW * 8 * 2))
        with pytest.raises(TemplateFormatError, match="plane count"):
            load_template(p)

    def test_wrong_payload_length(self, tmp_path):
        p = tmp_path / "short.irt"
        save_template(random_template(13), p)
        p.write_bytes(p.read_bytes()[:-8])
        with pytest.raises(TemplateFormatError, match="bytes"):
            load_template(p)
