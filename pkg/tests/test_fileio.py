import numpy as np
import pytest

from rainmix import (Image, ImageIOError, load_depth, load_image, read_pfm,
                     save_image, write_pfm)


class TestPngRoundTrip:
    def test_full_scale_maps_to_one(self, tmp_path, rng):
        path = tmp_path / "x.png"
        save_image(Image(np.ones((3, 3, 3))), path, bits=8)
        assert np.all(load_image(path).data == 1.0)

    def test_zero_maps_to_zero(self, tmp_path):
        path = tmp_path / "x.png"
        save_image(Image(np.zeros((3, 3, 1))), path, bits=8)
        assert np.all(load_image(path).data == 0.0)

    def test_16bit_midpoint_value(self, tmp_path):
        # frozen scalar: 32768 / 65535 = 0.5000076295109483
        path = tmp_path / "x.png"
        save_image(Image(np.full((2, 2, 1), 32768.0 / 65535.0)), path, bits=16)
        loaded = load_image(path)
        assert loaded.data[0, 0, 0] == pytest.approx(0.5000076295109483, abs=0)

    def test_half_rounds_up_at_8_bits(self, tmp_path):
        # round-half-up: 0.5 * 255 = 127.5 -> stored 128
        path = tmp_path / "x.png"
        save_image(Image(np.full((2, 2, 1), 0.5)), path, bits=8)
        assert load_image(path).data[0, 0, 0] == 128.0 / 255.0

    def test_8bit_lattice_round_trip_identity(self, tmp_path, rng):
        for i in range(5):
            quantized = np.round(rng.random((6, 7, 3)) * 255) / 255.0
            path = tmp_path / f"rt{i}.png"
            save_image(Image(quantized), path, bits=8)
            assert np.array_equal(load_image(path).data, quantized)

    def test_16bit_lattice_round_trip_identity(self, tmp_path, rng):
        quantized = np.round(rng.random((6, 7, 1)) * 65535) / 65535.0
        path = tmp_path / "rt16.png"
        save_image(Image(quantized), path, bits=16)
        assert np.array_equal(load_image(path).data, quantized)

    def test_rgb_channel_order_preserved(self, tmp_path):
        img = np.zeros((1, 1, 3))
        img[0, 0] = [1.0, 0.5, 0.0]
        path = tmp_path / "rgb.png"
        save_image(Image(img), path, bits=8)
        loaded = load_image(path)
        assert loaded.data[0, 0, 0] == 1.0
        assert loaded.data[0, 0, 2] == 0.0

    def test_load_output_satisfies_image_invariant(self, tmp_path, rng):
        path = tmp_path / "x.png"
        save_image(Image(rng.random((4, 4, 3))), path, bits=8)
        loaded = load_image(path)
        assert loaded.data.min() >= 0.0 and loaded.data.max() <= 1.0


class TestPngErrors:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ImageIOError, match="not found"):
            load_image(tmp_path / "absent.png")

    def test_corrupt_stream(self, tmp_path):
        path = tmp_path / "bad.png"
        path.write_bytes(b"\x89PNG\r\n\x1a\nnot really a png")
        with pytest.raises(ImageIOError, match="corrupt"):
            load_image(path)

    def test_unsupported_channel_count(self, tmp_path):
        import cv2
        path = tmp_path / "rgba.png"
        cv2.imwrite(str(path), np.zeros((2, 2, 4), dtype=np.uint8))
        with pytest.raises(ImageIOError, match="channel count"):
            load_image(path)

    def test_unwritable_path(self, tmp_path):
        with pytest.raises(ImageIOError, match="write failed"):
            save_image(Image(np.zeros((2, 2, 1))), tmp_path / "nodir" / "x.png")

    def test_bad_bit_depth_argument(self, tmp_path):
        with pytest.raises(ValueError, match="bits"):
            save_image(Image(np.zeros((2, 2, 1))), tmp_path / "x.png", bits=12)


class TestPfm:
    def test_round_trip(self, tmp_path, rng):
        data = rng.random((5, 7)) * 200.0
        path = tmp_path / "d.pfm"
        write_pfm(path, data)
        back = read_pfm(path)
        assert back.shape == (5, 7)
        assert np.array_equal(back, data.astype(np.float32).astype(np.float64))

    def test_big_endian_read(self, tmp_path):
        data = np.arange(6, dtype=np.float64).reshape(2, 3)
        path = tmp_path / "be.pfm"
        with open(path, "wb") as fh:
            fh.write(b"Pf\n3 2\n1.0\n")
            fh.write(data[::-1].astype(">f4").tobytes())
        assert np.array_equal(read_pfm(path), data)

    def test_all_zeros(self, tmp_path):
        path = tmp_path / "z.pfm"
        write_pfm(path, np.zeros((3, 3)))
        depth = load_depth(path, convention="pfm")
        assert np.all(depth.data == 0.0)

    def test_negative_depth_rejected(self, tmp_path):
        path = tmp_path / "neg.pfm"
        write_pfm(path, np.full((2, 2), -1.0))
        with pytest.raises(ImageIOError, match="negative depth"):
            load_depth(path, convention="pfm")

    def test_color_pfm_rejected(self, tmp_path):
        path = tmp_path / "c.pfm"
        with open(path, "wb") as fh:
            fh.write(b"PF\n1 1\n-1.0\n" + b"\x00" * 12)
        with pytest.raises(ImageIOError, match="colour PFM"):
            read_pfm(path)

    def test_truncated_raster_rejected(self, tmp_path):
        path = tmp_path / "t.pfm"
        path.write_bytes(b"Pf\n4 4\n-1.0\n\x00\x00")
        with pytest.raises(ImageIOError, match="truncated"):
            read_pfm(path)

    def test_scanline_order_bottom_to_top(self, tmp_path):
        # first raster scanline in the file is the image's bottom row
        path = tmp_path / "o.pfm"
        bottom_then_top = np.array([[3.0, 4.0], [1.0, 2.0]], dtype="<f4")
        with open(path, "wb") as fh:
            fh.write(b"Pf\n2 2\n-1.0\n")
            fh.write(bottom_then_top.tobytes())
        assert np.array_equal(read_pfm(path), [[1.0, 2.0], [3.0, 4.0]])


class TestDepthPng:
    def test_png16_scale(self, tmp_path):
        import cv2
        path = tmp_path / "d.png"
        cv2.imwrite(str(path), np.full((2, 2), 1000, dtype=np.uint16))
        depth = load_depth(path, convention="png16", scale=0.1)
        assert np.all(depth.data == 100.0)

    def test_png16_requires_scale(self, tmp_path):
        with pytest.raises(ValueError, match="scale"):
            load_depth(tmp_path / "d.png", convention="png16")

    def test_png16_rejects_8bit(self, tmp_path):
        import cv2
        path = tmp_path / "d8.png"
        cv2.imwrite(str(path), np.zeros((2, 2), dtype=np.uint8))
        with pytest.raises(ImageIOError, match="16-bit"):
            load_depth(path, convention="png16", scale=1.0)

    def test_unknown_convention(self, tmp_path):
        with pytest.raises(ValueError, match="convention"):
            load_depth(tmp_path / "d.png", convention="exr")
