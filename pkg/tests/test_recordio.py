import math
import struct

import numpy as np
import pytest

from dcesim.errors import RecordFormatError, VersionError
from dcesim.gaussian import TwoModeState, covariance_matrix
from dcesim.measurement import AmplifierModel, DigitizerConfig, VoltageRecord, sample_record
from dcesim.recordio import (
    MAGIC,
    read_record,
    record_from_bytes,
    record_from_csv,
    record_to_bytes,
    record_to_csv,
    write_record,
)

CENTER = 2 * math.pi * 5.65e9


@pytest.fixture(scope="module")
def rec():
    cov = covariance_matrix(TwoModeState.squeezed_vacuum(0.1, 0.3, CENTER + 1e8, CENTER - 1e8))
    cfg = DigitizerConfig(samples_per_channel=1000, rng_seed=99, max_lag=5)
    return sample_record(cov, AmplifierModel(6.0), cfg, CENTER)


def test_binary_layout(rec):
    data = record_to_bytes(rec)
    magic, version, n_ch, n, meta_len = struct.unpack_from("<8sHHQI", data)
    assert magic == MAGIC == b"DCEVREC\x00"
    assert (version, n_ch, n) == (1, 4, 1000)
    assert len(data) == 24 + meta_len + 8 * 4 * 1000
    first = struct.unpack_from("<d", data, 24 + meta_len)[0]
    assert first == rec.channels[0, 0]
    second_channel = struct.unpack_from("<d", data, 24 + meta_len + 8 * 1000)[0]
    assert second_channel == rec.channels[1, 0]


def test_binary_round_trip(rec, tmp_path):
    assert record_from_bytes(record_to_bytes(rec)) == rec
    path = tmp_path / "r.dcerec"
    write_record(rec, path)
    back = read_record(path)
    assert back == rec
    assert back.config == rec.config and back.seed == 99


def test_csv_round_trip(rec, tmp_path):
    assert record_from_csv(record_to_csv(rec)) == rec
    path = tmp_path / "r.csv"
    write_record(rec, path)
    assert read_record(path) == rec
    assert path.read_text().splitlines()[1] == "I_plus,Q_plus,I_minus,Q_minus"


def test_plain_record_round_trip():
    x = np.arange(40, dtype=float).reshape(4, 10) / 7
    rec = VoltageRecord(x)
    assert record_from_bytes(record_to_bytes(rec)) == rec
    assert record_from_csv(record_to_csv(rec)) == rec


def test_bad_inputs(rec):
    data = bytearray(record_to_bytes(rec))
    with pytest.raises(RecordFormatError):
        record_from_bytes(b"short")
    with pytest.raises(RecordFormatError):
        record_from_bytes(b"NOTAREC\x00" + bytes(data[8:]))
    with pytest.raises(RecordFormatError):
        record_from_bytes(bytes(data[:-8]))
    bumped = bytearray(data)
    struct.pack_into("<H", bumped, 8, 2)
    with pytest.raises(VersionError):
        record_from_bytes(bytes(bumped))
    with pytest.raises(RecordFormatError):
        record_from_csv("a,b,c,d\n1,2,3,4\n")
    with pytest.raises(RecordFormatError):
        record_from_csv("I_plus,Q_plus,I_minus,Q_minus\n1,2,3\n")
