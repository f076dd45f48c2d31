import json

import numpy as np
import pytest

from gmdkit.exceptions import DimensionError, GmdkitError
from gmdkit.io import (
    load_matrix,
    load_with_sidecar,
    write_descriptor,
    write_matrix,
)


class TestLoadMatrix:
    def test_small_example(self, tmp_path):
        f = tmp_path / "m.csv"
        f.write_text("1,2\n3,4\n")
        assert np.array_equal(load_matrix(str(f)),
                              [[1.0, 2.0], [3.0, 4.0]])

    def test_blank_lines_skipped(self, tmp_path):
        f = tmp_path / "m.csv"
        f.write_text("1,2\n\n3,4\n\n")
        assert load_matrix(str(f)).shape == (2, 2)

    def test_ragged_row_names_line(self, tmp_path):
        f = tmp_path / "m.csv"
        f.write_text("1,2\n3,4,5\n")
        with pytest.raises(GmdkitError, match="ragged row 2"):
            load_matrix(str(f))

    def test_parse_failure_names_position(self, tmp_path):
        f = tmp_path / "m.csv"
        f.write_text("1,2\n3,oops\n")
        with pytest.raises(GmdkitError, match="line 2, column 2"):
            load_matrix(str(f))

    def test_non_finite_rejected(self, tmp_path):
        for bad in ("nan", "inf", "-inf"):
            f = tmp_path / f"{bad.strip('-')}.csv"
            f.write_text(f"1,{bad}\n")
            with pytest.raises(GmdkitError, match="non-finite"):
                load_matrix(str(f))

    def test_empty_file_rejected(self, tmp_path):
        f = tmp_path / "empty.csv"
        f.write_text("\n")
        with pytest.raises(GmdkitError, match="empty"):
            load_matrix(str(f))

    def test_descriptor_shape_enforced(self, tmp_path):
        f = tmp_path / "m.csv"
        f.write_text("1,2\n3,4\n")
        with pytest.raises(DimensionError):
            load_matrix(str(f), {"rows": 3, "cols": 2})
        load_matrix(str(f), {"rows": 2, "cols": 2, "role": "X"})

    def test_descriptor_unknown_role_rejected(self, tmp_path):
        f = tmp_path / "m.csv"
        f.write_text("1,2\n")
        with pytest.raises(GmdkitError, match="role"):
            load_matrix(str(f), {"rows": 1, "cols": 2, "role": "Z"})


class TestRoundTrip:
    def test_write_read_is_lossless(self, tmp_path):
        rng = np.random.default_rng(0)
        M = rng.standard_normal((5, 3)) * np.pi
        f = tmp_path / "m.csv"
        write_matrix(str(f), M)
        assert np.array_equal(load_matrix(str(f)), M)

    def test_vector_written_as_row(self, tmp_path):
        f = tmp_path / "v.csv"
        write_matrix(str(f), np.array([1.0, 2.0, 3.0]))
        assert load_matrix(str(f)).shape == (1, 3)

    def test_descriptor_roundtrip(self, tmp_path):
        d = tmp_path / "m.csv.json"
        write_descriptor(str(d), 4, 2, "H")
        assert json.loads(d.read_text()) == {"rows": 4, "cols": 2,
                                             "role": "H"}

    def test_descriptor_bad_role_raises(self, tmp_path):
        with pytest.raises(GmdkitError):
            write_descriptor(str(tmp_path / "x.json"), 1, 1, "W")

    def test_sidecar_is_honored(self, tmp_path):
        f = tmp_path / "m.csv"
        write_matrix(str(f), np.eye(3))
        write_descriptor(str(f) + ".json", 3, 3, "Q")
        assert load_with_sidecar(str(f)).shape == (3, 3)
        write_descriptor(str(f) + ".json", 2, 3, "Q")
        with pytest.raises(DimensionError):
            load_with_sidecar(str(f))
