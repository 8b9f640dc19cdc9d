import struct
import warnings

import numpy as np
import pytest

from dtclust.ingest import (
    CsvParseError,
    MalformedFile,
    RaggedCsv,
    TruncatedPayload,
    WindowSpec,
    ZeroVarianceWarning,
    import_matrix_csv,
    read_tensor,
    sliding_corr,
    write_tensor,
)
from dtclust.tensor import DenseTensor


class TestTensorFile:
    def test_roundtrip(self, tmp_path):
        T = DenseTensor(np.random.default_rng(0).standard_normal((2, 3, 4)))
        write_tensor(T, tmp_path / "t.dtns")
        assert read_tensor(tmp_path / "t.dtns") == T

    def test_layout(self, tmp_path):
        write_tensor(DenseTensor(np.arange(6.0).reshape(2, 3)), tmp_path / "t.dtns")
        raw = (tmp_path / "t.dtns").read_bytes()
        assert raw[:4] == b"DTNS"
        assert struct.unpack("<HH2Q", raw[4:24]) == (1, 2, 2, 3)
        np.testing.assert_array_equal(np.frombuffer(raw[24:], "<f8"), np.arange(6.0))

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "t.dtns"
        p.write_bytes(b"XXXX" + b"\0" * 20)
        with pytest.raises(MalformedFile):
            read_tensor(p)

    def test_bad_version(self, tmp_path):
        p = tmp_path / "t.dtns"
        p.write_bytes(b"DTNS" + struct.pack("<HHQ", 2, 1, 1) + b"\0" * 8)
        with pytest.raises(MalformedFile, match="version"):
            read_tensor(p)

    def test_truncated_and_trailing(self, tmp_path):
        p = tmp_path / "t.dtns"
        write_tensor(DenseTensor(np.ones((2, 2))), p)
        raw = p.read_bytes()
        p.write_bytes(raw[:-1])
        with pytest.raises(TruncatedPayload):
            read_tensor(p)
        p.write_bytes(raw + b"\0")
        with pytest.raises(MalformedFile):
            read_tensor(p)
        p.write_bytes(raw[:10])
        with pytest.raises(MalformedFile):
            read_tensor(p)


class TestCsv:
    def test_header_detected(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("t1,t2,t3\n1,2,3\n4,5,6\n")
        np.testing.assert_array_equal(import_matrix_csv(p), [[1, 2, 3], [4, 5, 6]])

    def test_no_header(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("1,2\n3, 4\n")
        np.testing.assert_array_equal(import_matrix_csv(p), [[1, 2], [3, 4]])

    def test_ragged(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("1,2,3\n4,5\n")
        with pytest.raises(RaggedCsv):
            import_matrix_csv(p)

    def test_parse_error_location(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("a,b\n1,2\n3,x\n")
        with pytest.raises(CsvParseError) as info:
            import_matrix_csv(p)
        assert (info.value.row, info.value.col, info.value.cell) == (3, 2, "x")


class TestSlidingCorr:
    def test_window_count(self):
        assert WindowSpec(20, 1).count(100) == 81
        assert WindowSpec(10, 5).count(32) == 5
        with pytest.raises(ValueError):
            WindowSpec(20, 1).count(10)
        with pytest.raises(ValueError):
            WindowSpec(1, 1).count(10)
        with pytest.raises(ValueError):
            WindowSpec(5, 0).count(10)

    def test_matches_corrcoef(self):
        X = np.random.default_rng(0).standard_normal((4, 30))
        T = sliding_corr(X, WindowSpec(10, 4))
        assert T.dims == (4, 4, 6)
        for k in range(6):
            np.testing.assert_allclose(T.array[:, :, k], np.corrcoef(X[:, 4 * k:4 * k + 10]),
                                       atol=1e-12)

    def test_symmetric_unit_diagonal(self):
        T = sliding_corr(np.random.default_rng(1).standard_normal((5, 40)), WindowSpec(8, 3))
        A = T.array
        np.testing.assert_array_equal(A, A.transpose(1, 0, 2))
        np.testing.assert_array_equal(np.diagonal(A, axis1=0, axis2=1), 1.0)
        assert np.abs(A).max() <= 1.0

    def test_constant_series_flagged(self):
        X = np.random.default_rng(2).standard_normal((3, 20))
        X[1, :10] = 4.0
        with pytest.warns(ZeroVarianceWarning):
            T, flags = sliding_corr(X, WindowSpec(10, 5), return_flags=True)
        assert flags.tolist() == [True, False, False]
        np.testing.assert_array_equal(T.array[1, [0, 2], 0], 0.0)
        assert T.array[1, 1, 0] == 1.0

    def test_no_warning_when_clean(self):
        X = np.random.default_rng(3).standard_normal((3, 20))
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            sliding_corr(X, WindowSpec(10, 5))
