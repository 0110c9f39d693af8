"""Regenerate the golden preprocessing vectors.

Run from the repository root after any intentional change to the resize,
normalization, or content-id contracts:

    python3 golden/generate.py

Any tool that claims byte compatibility with this pipeline (for example
an external embedding exporter) must reproduce expected.json from the
same images.
"""

import hashlib
import json
from pathlib import Path

import numpy as np
from PIL import Image

from spectranet import preprocessing as pp
from spectranet.dataset import content_id

HERE = Path(__file__).parent

SIZES = [(448, 448), (31, 47), (300, 200), (640, 480), (9, 7)]


def build_image(g, h, w):
    base = g.integers(0, 256, (h, w, 3), np.uint8).astype(np.float64)
    ramp = np.linspace(0, 80, w)[None, :, None]
    return np.clip(base * 0.7 + ramp, 0, 255).astype(np.uint8)


def main():
    img_dir = HERE / "images"
    img_dir.mkdir(exist_ok=True)
    g = np.random.default_rng(20240817)
    entries = []
    for idx, (h, w) in enumerate(SIZES):
        img = build_image(g, h, w)
        name = f"g{idx}.png"
        Image.fromarray(img, "RGB").save(img_dir / name)

        resized = pp.resize_bilinear(img)
        normalized = pp.normalize(resized)
        sample = normalized[:, :2, :3].astype(np.float32)
        entries.append({
            "file": name,
            "width": w,
            "height": h,
            "content_id": content_id(img).hex(),
            "resized_sha256": hashlib.sha256(resized.tobytes()).hexdigest(),
            "normalized_sha256": hashlib.sha256(normalized.tobytes()).hexdigest(),
            # exact float32 values (hex) of normalized[:, :2, :3]
            "normalized_corner_hex": [float(v).hex() for v in sample.ravel()],
        })
    out = HERE / "expected.json"
    out.write_text(json.dumps(entries, indent=2) + "\n")
    print(f"wrote {out} ({len(entries)} entries)")


if __name__ == "__main__":
    main()
