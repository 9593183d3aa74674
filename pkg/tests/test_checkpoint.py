import os
import struct
import sys
import tempfile
import unittest

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from core.checkpoint import (
    HEADER_FORMAT, HEADER_SIZE, Checkpoint, load_checkpoint, pack, save_checkpoint, unpack,
)
from core.errors import CheckpointError
from core.models import ExperimentConfig
from core.policy import AdamState, init_policy


def trained_looking_state():
    rng = np.random.default_rng(0)
    params = init_policy(34, (64, 64), rng, head_scale=0.7)
    opt = AdamState.for_params(params)
    for name, array in params.arrays.items():
        opt.m[name] = rng.normal(size=array.shape)
        opt.v[name] = rng.random(size=array.shape)
    opt.t = 1234
    return params, opt


class TestCheckpoint(unittest.TestCase):

    def setUp(self):
        self.params, self.opt = trained_looking_state()
        self.config = ExperimentConfig().to_dict()

    def test_round_trip_is_bit_exact(self):
        restored = unpack(pack(Checkpoint(self.params, self.opt, self.config, {"timestep": 42})))
        self.assertEqual(restored.params.names(), self.params.names())
        for name, array in self.params.arrays.items():
            self.assertEqual(restored.params.arrays[name].tobytes(), array.tobytes())
            self.assertEqual(restored.optimizer.m[name].tobytes(), self.opt.m[name].tobytes())
            self.assertEqual(restored.optimizer.v[name].tobytes(), self.opt.v[name].tobytes())
        self.assertEqual(restored.optimizer.t, 1234)
        self.assertEqual(restored.config, self.config)
        self.assertEqual(restored.metadata, {"timestep": 42})
        self.assertEqual(ExperimentConfig.from_dict(restored.config), ExperimentConfig())

    def test_pack_is_deterministic(self):
        ckpt = Checkpoint(self.params, self.opt, self.config)
        self.assertEqual(pack(ckpt), pack(ckpt))

    def test_file_round_trip(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = save_checkpoint(os.path.join(tmp, "run", "policy.ckpt"), self.params, self.opt)
            restored = load_checkpoint(path)
        np.testing.assert_array_equal(restored.params.arrays["Wpi"], self.params.arrays["Wpi"])

    def test_corruption_is_detected(self):
        data = bytearray(pack(Checkpoint(self.params, self.opt)))
        data[-1] ^= 0x01
        with self.assertRaisesRegex(CheckpointError, "CRC"):
            unpack(bytes(data))

    def test_bad_magic_and_version(self):
        data = pack(Checkpoint(self.params, self.opt))
        with self.assertRaisesRegex(CheckpointError, "magic"):
            unpack(b"XXXX" + data[4:])
        _, _, manifest_len, blob_len, crc = struct.unpack(HEADER_FORMAT, data[:HEADER_SIZE])
        future = struct.pack(HEADER_FORMAT, b"CRLK", 99, manifest_len, blob_len, crc) + data[HEADER_SIZE:]
        with self.assertRaisesRegex(CheckpointError, "version"):
            unpack(future)

    def test_truncation(self):
        data = pack(Checkpoint(self.params, self.opt))
        with self.assertRaisesRegex(CheckpointError, "Truncated"):
            unpack(data[:-8])
        with self.assertRaises(CheckpointError):
            unpack(data[:5])

    def test_missing_file(self):
        with self.assertRaises(CheckpointError):
            load_checkpoint(os.path.join(tempfile.gettempdir(), "no-such-dir", "policy.ckpt"))


if __name__ == "__main__":
    unittest.main()
