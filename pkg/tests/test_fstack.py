import matplotlib.pyplot as plt
import numpy as np
import pytest

from components.lifted_lasso import FrameStackFormatError
from components.smi import FrameStack, HighResImage, parse_fstack, read_fstack, write_fstack, write_pgm, write_png

VALID = """FSTACK 1 2 3 2
0 1 2
3 4 5
0.5 -1e-3 7
1 1 1
"""


def _error(text):
    with pytest.raises(FrameStackFormatError) as exc:
        parse_fstack(text)
    return exc.value


def test_parse_valid_stack():
    stack = parse_fstack(VALID)
    assert stack.count == 2
    assert stack.frame_shape == (2, 3)
    np.testing.assert_array_equal(stack.frames[1], [[0.5, -1e-3, 7.0], [1.0, 1.0, 1.0]])
    assert not stack.mean_subtracted


def test_trailing_blank_lines_are_ignored():
    assert parse_fstack(VALID + "\n\n  \n").count == 2


def test_empty_stack():
    stack = parse_fstack("FSTACK 1 4 4 0\n")
    assert stack.count == 0
    assert stack.frames.shape == (0, 4, 4)


def test_bad_magic():
    err = _error("FSTAK 1 2 2 1\n0 0\n0 0\n")
    assert (err.line, err.column) == (1, 1)


def test_unsupported_version():
    err = _error("FSTACK 2 2 2 1\n0 0\n0 0\n")
    assert (err.line, err.column) == (1, 8)


def test_short_header():
    err = _error("FSTACK 1 2 2\n")
    assert err.line == 1
    assert err.column == 13


def test_non_integer_dimension():
    err = _error("FSTACK 1 two 2 1\n")
    assert (err.line, err.column) == (1, 10)


def test_non_numeric_value_reports_position():
    err = _error("FSTACK 1 2 2 1\n0 0\n0  abc\n")
    assert (err.line, err.column) == (3, 4)


def test_wrong_row_width():
    err = _error("FSTACK 1 2 2 1\n0 0 0\n0 0\n")
    assert (err.line, err.column) == (2, 5)


def test_missing_rows():
    err = _error("FSTACK 1 2 2 2\n0 0\n0 0\n0 0\n")
    assert err.line == 5


def test_extra_content():
    err = _error("FSTACK 1 1 2 1\n0 0\n9 9\n")
    assert err.line == 3


def test_written_stack_reads_back(tmp_path):
    rng = np.random.default_rng(3)
    stack = FrameStack(rng.standard_normal((3, 4, 5)))
    path = write_fstack(stack, tmp_path / "s.fstack")
    assert path.read_text(encoding="ascii").startswith("FSTACK 1 4 5 3\n")
    np.testing.assert_array_equal(read_fstack(path).frames, stack.frames)


def test_pgm_is_scaled_to_16_bits(tmp_path):
    image = HighResImage(np.array([[0.0, 1.0], [2.0, 4.0]]))
    lines = write_pgm(image, tmp_path / "img.pgm").read_text(encoding="ascii").splitlines()
    assert lines[0] == "P2"
    assert lines[1] == "# pixel_pitch_nm=20"
    assert lines[2] == "2 2"
    assert lines[3] == "65535"
    assert lines[4].split() == ["0", "16384"]
    assert lines[5].split() == ["32768", "65535"]


def test_pgm_of_empty_image_is_zero(tmp_path):
    lines = write_pgm(HighResImage(np.zeros((2, 3))), tmp_path / "z.pgm").read_text(encoding="ascii").splitlines()
    assert lines[2] == "3 2"
    assert all(v == "0" for row in lines[4:] for v in row.split())


def test_png_dimensions(tmp_path):
    path = write_png(HighResImage(np.ones((5, 7))), tmp_path / "img.png")
    assert plt.imread(path).shape[:2] == (5, 7)
