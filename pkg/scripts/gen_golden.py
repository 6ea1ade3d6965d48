"""Regenerate the golden wire-frame fixtures under src/bevshare/data/golden.

The fixtures pin the byte layout: once committed they should never change.
Rerunning this script must reproduce the identical files (seeded draws);
it exists so the provenance of the binaries is inspectable, not so they
can be casually regenerated.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from bevshare.grid import GridSpec, Pose2D
from bevshare.protocol import MessageKind, SparseFeatureMessage, encode_message

OUT = Path(__file__).resolve().parent.parent / "src" / "bevshare" / "data" / "golden"

FIXTURES = [
    # name, grid (rows, cols), entries, channels, sender, round, kind, pose, seed
    ("empty_c4.bin", (32, 32), 0, 4, 0, 0, MessageKind.CONFIDENCE, (0.0, 0.0, 0.0), 101),
    ("small_c64.bin", (32, 32), 3, 64, 2, 1, MessageKind.PRIOR, (1.5, -2.25, 0.75), 102),
    ("single_channel.bin", (64, 48), 17, 1, 7, 0, MessageKind.CONFIDENCE, (-10.0, 4.5, -1.5), 103),
    ("dense_c8.bin", (16, 16), 100, 8, 255, 3, MessageKind.PRIOR, (0.125, 0.0625, 3.0), 104),
]


def build(name, grid, n, channels, sender, round_k, kind, pose, seed):
    rows_n, cols_n = grid
    spec = GridSpec(rows_n, cols_n, 0.0, float(rows_n), 0.0, float(cols_n))
    rng = np.random.default_rng(seed)
    flat = rng.choice(rows_n * cols_n, size=n, replace=False)
    flat.sort()
    rows = (flat // cols_n).astype(np.uint16)
    cols = (flat % cols_n).astype(np.uint16)
    feats = rng.standard_normal((n, channels)).astype(np.float32)
    if n:
        # guarantee the all-nonzero invariant even for unlucky draws
        feats[feats == 0.0] = np.float32(1.0)
    msg = SparseFeatureMessage(
        sender=sender,
        round_k=round_k,
        kind=kind,
        channels=channels,
        pose=Pose2D(*pose),
        rows=rows,
        cols=cols,
        features=feats,
        spec=spec,
    )
    return encode_message(msg)


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    manifest = {"fixtures": []}
    for name, grid, n, channels, sender, round_k, kind, pose, seed in FIXTURES:
        frame = build(name, grid, n, channels, sender, round_k, kind, pose, seed)
        expect = 38 + n * (4 + 4 * channels)
        assert len(frame) == expect, (name, len(frame), expect)
        (OUT / name).write_bytes(frame)
        manifest["fixtures"].append(
            {
                "file": name,
                "grid": {"rows": grid[0], "cols": grid[1]},
                "entries": n,
                "channels": channels,
                "frame_bytes": len(frame),
                "sha256": hashlib.sha256(frame).hexdigest(),
            }
        )
        print(f"{name}: {len(frame)} bytes")
    (OUT / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )
    print(f"wrote {len(FIXTURES)} fixtures + manifest to {OUT}")


if __name__ == "__main__":
    main()
