import struct

import numpy as np
import pytest

from seed_embed.checkpoint import load_checkpoint, save_checkpoint
from seed_embed.errors import DataError
from seed_embed.gradcheck import random_model
from seed_embed.network import model_forward
from seed_embed.schedule import make_scaled_linear_schedule


@pytest.fixture
def saved(tmp_path):
    m = random_model(6, 4, 2, seed=0).astype(np.float32)
    s = make_scaled_linear_schedule(200, 0.001, 0.02)
    p = tmp_path / "m.ckpt"
    save_checkpoint(p, m, s)
    return p, m, s


def test_round_trip_is_bit_exact(saved, rng):
    p, m, s = saved
    m2, s2 = load_checkpoint(p)
    assert (s2.T, s2.beta_start, s2.beta_end) == (200, 0.001, 0.02)
    assert m2.standardize and m2.n_blocks == 2 and m2.temb_dim == 4
    for (na, a), (nb, b) in zip(m.named_parameters(), m2.named_parameters()):
        assert na == nb and a.tobytes() == b.tobytes()
    assert m.mean.tobytes() == m2.mean.tobytes() and m.scale.tobytes() == m2.scale.tobytes()
    e = rng.normal(size=6).astype(np.float32)
    assert model_forward(m, e, 7).tobytes() == model_forward(m2, e, 7).tobytes()
    save_checkpoint(p.with_suffix(".again"), m2, s2)
    assert p.read_bytes() == p.with_suffix(".again").read_bytes()


def test_header_layout(saved):
    p, m, _ = saved
    raw = p.read_bytes()
    assert raw[:8] == b"SEEDCKPT"
    assert struct.unpack_from("<5I", raw, 8) == (1, 6, 4, 2, 200)
    assert struct.unpack_from("<2dB", raw, 28) == (0.001, 0.02, 1)
    np.testing.assert_array_equal(np.frombuffer(raw, "<f4", 6, 45), m.mean)
    # first tensor after the standardizer is blocks.0.in_norm.gain
    np.testing.assert_array_equal(np.frombuffer(raw, "<f4", 6, 45 + 48), m.blocks[0].in_norm.gain)


def test_corruption_detected(saved):
    p, _, _ = saved
    raw = p.read_bytes()
    p.write_bytes(raw[:-4])
    with pytest.raises(DataError, match=f"expected {len(raw)} bytes, got {len(raw) - 4}"):
        load_checkpoint(p)
    p.write_bytes(b"SEEDCKPX" + raw[8:])
    with pytest.raises(DataError, match="bad magic"):
        load_checkpoint(p)
    p.write_bytes(raw[:20])
    with pytest.raises(DataError, match="truncated header"):
        load_checkpoint(p)
