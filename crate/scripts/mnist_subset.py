"""Build the MNIST IDX subset from the `mnist` npm package (v1.1.0).

Usage: python3 scripts/mnist_subset.py PACKAGE_DIR [PER_DIGIT]

PACKAGE_DIR is the unpacked tarball (it holds src/digits/0.json ... 9.json,
each {"data": [784 floats per image, 3 decimals]}). Pixels are mapped back to
bytes with round(x * 255). Images are interleaved by digit so that any prefix
is class-balanced.
"""

import json
import struct
import sys
from pathlib import Path

ROWS = COLS = 28
PIXELS = ROWS * COLS


def main():
    pkg = Path(sys.argv[1])
    per_digit = int(sys.argv[2]) if len(sys.argv) > 2 else 400
    digits = []
    for d in range(10):
        flat = json.loads((pkg / "src" / "digits" / f"{d}.json").read_text())["data"]
        n = len(flat) // PIXELS
        if n < per_digit:
            sys.exit(f"digit {d} has only {n} images")
        digits.append(flat)

    images = bytearray()
    labels = bytearray()
    for i in range(per_digit):
        for d in range(10):
            px = digits[d][i * PIXELS:(i + 1) * PIXELS]
            images.extend(min(255, max(0, round(v * 255))) for v in px)
            labels.append(d)

    count = 10 * per_digit
    out = Path(__file__).resolve().parent.parent / "data" / "mnist"
    out.mkdir(parents=True, exist_ok=True)
    (out / "subset-images-idx3-ubyte").write_bytes(struct.pack(">IIII", 0x803, count, ROWS, COLS) + images)
    (out / "subset-labels-idx1-ubyte").write_bytes(struct.pack(">II", 0x801, count) + labels)
    print(f"wrote {count} images to {out}")


if __name__ == "__main__":
    main()
