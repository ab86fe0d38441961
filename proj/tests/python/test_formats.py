"""Format conformance: build files byte-by-byte from the documented layouts
(docs/formats.md) and feed them to the C++ readers through the bindings."""

import math
import struct

import numpy as np
import pytest

import aegis


def pack_window_file(path, n, windows, mu=(1.0, 0.05, 9.0), sigma=(1.0, 0.5, 0.8)):
    blob = b"AEGT"
    blob += struct.pack("<IIIQ", 1, n, 6, len(windows))
    blob += struct.pack("<3d", *mu)
    blob += struct.pack("<3d", *sigma)
    blob += struct.pack("<d", 1e-5)
    for flow_id, start, label, data in windows:
        blob += struct.pack("<Qdb", flow_id, start, label)
        blob += np.asarray(data, dtype="<f4").tobytes()
    with open(path, "wb") as f:
        f.write(blob)


def test_window_file_layout(tmp_path):
    path = str(tmp_path / "packed.aegt")
    rng = np.random.default_rng(5)
    data0 = rng.normal(size=(4, 6)).astype(np.float32)
    data1 = rng.normal(size=(4, 6)).astype(np.float32)
    pack_window_file(path, 4, [(11, 1.5, 0, data0), (22, 2.5, 1, data1)])

    got = aegis.read_windows(path)
    assert got["n"] == 4
    ws = got["windows"]
    assert len(ws) == 2
    assert ws[0]["flow_id"] == 11
    assert ws[0]["start_time"] == 1.5
    assert ws[0]["label"] == 0
    assert ws[1]["label"] == 1
    np.testing.assert_array_equal(ws[0]["data"], data0)
    np.testing.assert_array_equal(ws[1]["data"], data1)


def test_window_file_bad_magic(tmp_path):
    path = str(tmp_path / "bad.aegt")
    with open(path, "wb") as f:
        f.write(b"NOPE" + b"\x00" * 64)
    with pytest.raises(aegis.AegisError):
        aegis.read_windows(path)


def pack_checkpoint(path, d, d_h, d_s, n, baseline, tau, lam, tensors):
    blob = b"AEGM"
    blob += struct.pack("<IIIII", 1, d, d_h, d_s, n)
    blob += struct.pack("<3d", baseline, tau, lam)
    blob += struct.pack("<3d", 1.0, 0.05, 9.0)  # mu_log
    blob += struct.pack("<3d", 1.0, 0.5, 0.8)   # sigma_log
    blob += struct.pack("<d", 1e-5)
    for name, dims, values in tensors:
        blob += struct.pack("<I", len(name)) + name.encode()
        blob += struct.pack("<I", len(dims))
        for dim in dims:
            blob += struct.pack("<I", dim)
        blob += np.asarray(values, dtype="<f4").reshape(-1).tobytes()
    with open(path, "wb") as f:
        f.write(blob)


def test_checkpoint_layout_drives_inference(tmp_path):
    d, d_h, d_s, n = 2, 2, 1, 4
    head_b = 0.3
    tensors = [
        ("w_p", (d, 6), np.zeros((d, 6))),
        ("tau_theta", (d_h,), np.full(d_h, 1.0)),
        ("w_h", (d_h, d_h), np.zeros((d_h, d_h))),
        ("w_x", (d_h, d), np.zeros((d_h, d))),
        ("b", (d_h,), np.zeros(d_h)),
        ("a_diag", (d_h, d_s), np.full((d_h, d_s), -0.5)),
        ("w_delta", (d_h,), np.zeros(d_h)),
        ("w_delta_t", (), [0.0]),
        ("b_delta", (), [0.0]),
        ("w_b", (d_s, d_h), np.zeros((d_s, d_h))),
        ("w_c", (d_s, d_h), np.zeros((d_s, d_h))),
        ("head_w", (d_h,), np.zeros(d_h)),
        ("head_b", (), [head_b]),
    ]
    path = str(tmp_path / "packed.aegm")
    pack_checkpoint(path, d, d_h, d_s, n, baseline=2.0, tau=0.12, lam=0.1, tensors=tensors)

    m = aegis.Model(path)
    assert m.hyper == {"d": d, "d_h": d_h, "d_s": d_s, "n": n}
    assert m.baseline_entropy == 2.0
    assert m.tau_threshold == 0.12

    # zero window through zero weights: constant hidden states, so entropy is
    # exactly log2(n) and the verdict reduces to the head bias
    v = m.forward(np.zeros((n, 6), dtype=np.float32))
    assert v["entropy_bits"] == pytest.approx(2.0, abs=1e-12)
    assert v["probability"] == pytest.approx(1.0 / (1.0 + math.exp(-head_b)), abs=1e-6)
    assert v["tvd_flag"] is False  # H == baseline: strict inequality stays benign
    assert v["malicious"] is True  # classifier side of the OR rule


def test_checkpoint_shape_mismatch_rejected(tmp_path):
    path = str(tmp_path / "badshape.aegm")
    tensors = [("w_p", (3, 6), np.zeros((3, 6)))]  # header says d=2
    pack_checkpoint(path, 2, 2, 1, 4, 2.0, 0.12, 0.1, tensors)
    with pytest.raises(aegis.AegisError):
        aegis.Model(path)
