import numpy as np
import pytest

from mapstitch.geometry import Pose, random_rotation
from mapstitch.tum import format_row, parse_tum, rotation_to_quat, write_tum


class TestQuaternions:
    def test_unit_norm_and_roundtrip(self, rng):
        for _ in range(50):
            rot = random_rotation(rng)
            quat = rotation_to_quat(rot)
            assert np.linalg.norm(quat) == pytest.approx(1.0, abs=1e-12)
            from mapstitch.tum import quat_to_rotation

            assert np.allclose(quat_to_rotation(quat), rot, atol=1e-9)

    def test_identity_rotation(self):
        quat = rotation_to_quat(np.eye(3))
        assert np.allclose(np.abs(quat), [0, 0, 0, 1], atol=1e-12)


class TestTumFormat:
    def test_row_layout(self):
        row = format_row(1.5, [1, 2, 3], [0, 0, 0, 1])
        assert row.split() == ["1.5", "1", "2", "3", "0", "0", "0", "1"]

    def test_nine_significant_digits(self):
        row = format_row(0.123456789123, [1.0 / 3.0, 0, 0], [0, 0, 0, 1])
        assert row.split()[0] == "0.123456789"
        assert row.split()[1] == "0.333333333"

    def test_write_parse_roundtrip(self, rng):
        rows = [
            (0.1 * i, Pose(random_rotation(rng), rng.normal(0, 10, 3)))
            for i in range(25)
        ]
        parsed = parse_tum(write_tum(rows))
        assert len(parsed) == 25
        for (ts, pose), (pts, ppose) in zip(rows, parsed):
            assert pts == pytest.approx(ts, abs=1e-9)
            # Within the 9-significant-digit print precision.
            assert np.allclose(ppose.translation, pose.translation, rtol=1e-8, atol=1e-7)
            assert np.allclose(ppose.rotation, pose.rotation, atol=1e-7)

    def test_empty(self):
        assert write_tum([]) == ""
        assert parse_tum("") == []

    def test_comments_and_blank_lines_skipped(self):
        text = "# header\n\n1 0 0 0 0 0 0 1\n"
        assert len(parse_tum(text)) == 1

    def test_malformed_line_rejected(self):
        with pytest.raises(ValueError):
            parse_tum("1 2 3\n")
