#!/usr/bin/env python3
"""Regenerate the EDSR parity fixtures in tests/fixtures/edsr.

The reference forward pass is PyTorch in float64 with reflect padding; the
C++ inference must agree within 1e-4 max-abs. Output is byte-identical for a
given --seed.
"""
import argparse
import json
import struct
import zlib
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F


def shapes(n_blocks, c):
    s = [(c, 1, 3, 3), (c,)]
    for _ in range(n_blocks):
        s += [(c, c, 3, 3), (c,), (c, c, 3, 3), (c,)]
    return s + [(1, c, 3, 3), (1,)]


def encode(n_blocks, c, res_scale, rmax, tensors):
    b = bytearray(b"EDSW")
    b += struct.pack("<IIIff", 1, n_blocks, c, res_scale, rmax)
    for t in tensors:
        b += struct.pack("<I", t.ndim) + struct.pack(f"<{t.ndim}I", *t.shape)
        b += t.astype("<f4").tobytes()
    b += struct.pack("<I", zlib.crc32(bytes(b)) & 0xFFFFFFFF)
    return bytes(b)


def forward(x, n_blocks, res_scale, rmax, tensors):
    t = [torch.from_numpy(a.astype(np.float64)) for a in tensors]

    def conv(v, w, bias):
        return F.conv2d(F.pad(v, (1, 1, 1, 1), mode="reflect"), w, bias)

    v = torch.from_numpy(x.astype(np.float64))[:, None] / float(np.float32(rmax))
    head = conv(v, t[0], t[1])
    body = head
    for i in range(n_blocks):
        r = conv(F.relu(conv(body, t[2 + 4 * i], t[3 + 4 * i])), t[4 + 4 * i], t[5 + 4 * i])
        body = body + float(np.float32(res_scale)) * r
    y = conv(body + head, t[-2], t[-1])
    return (y[:, 0] * float(np.float32(rmax))).numpy().astype("<f4")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=20240611)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "tests/fixtures/edsr")
    ap.add_argument("--patches", type=int, default=16)
    ap.add_argument("--size", type=int, default=24)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    n_blocks, c, res_scale, rmax = 4, 32, 0.1, 2.0
    tensors = []
    for s in shapes(n_blocks, c):
        fan_in = s[1] * 9 if len(s) == 4 else 1
        scale = np.sqrt(2.0 / fan_in) if len(s) == 4 else 0.05
        tensors.append((rng.standard_normal(s) * scale).astype(np.float32))
    x = rng.uniform(0.0, rmax, size=(args.patches, args.size, args.size)).astype(np.float32)

    cases = {}
    (args.out / "inputs.f32").write_bytes(x.astype("<f4").tobytes())
    (args.out / "random.edsw").write_bytes(encode(n_blocks, c, res_scale, rmax, tensors))
    (args.out / "random_out.f32").write_bytes(forward(x, n_blocks, res_scale, rmax, tensors).tobytes())
    cases["random"] = {"weights": "random.edsw", "outputs": "random_out.f32"}

    zeros = [np.zeros(s, np.float32) for s in shapes(2, 8)]
    zeros[-1][0] = 0.375
    (args.out / "zero.edsw").write_bytes(encode(2, 8, res_scale, rmax, zeros))
    (args.out / "zero_out.f32").write_bytes(forward(x, 2, res_scale, rmax, zeros).tobytes())
    cases["zero"] = {"weights": "zero.edsw", "outputs": "zero_out.f32"}

    meta = {"seed": args.seed, "patches": args.patches, "height": args.size, "width": args.size,
            "inputs": "inputs.f32", "tolerance": 1e-4, "cases": cases}
    (args.out / "fixtures.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
