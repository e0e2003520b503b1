#!/usr/bin/env python3
"""Convert the 5000-image MNIST subset shipped with mlxtend into IDX files.

The mlxtend wheel bundles ``mlxtend/data/data/mnist_5k.csv.gz``: 5000 rows of
784 pixel intensities (0-255) followed by the digit label, 500 images per
class. This script writes the two IDX files the loader expects.

Usage:
    pip download --no-deps mlxtend
    python3 scripts/mnist5k_to_idx.py mlxtend-*.whl data/mnist-5k
"""

import gzip
import struct
import sys
import zipfile
from pathlib import Path

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def main() -> None:
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    wheel, out_dir = Path(sys.argv[1]), Path(sys.argv[2])
    out_dir.mkdir(parents=True, exist_ok=True)

    with zipfile.ZipFile(wheel) as z:
        text = gzip.decompress(z.read(MEMBER)).decode()

    pixels = bytearray()
    labels = bytearray()
    count = 0
    for line in text.strip().splitlines():
        fields = [int(v) for v in line.split(",")]
        assert len(fields) == 785, len(fields)
        pixels.extend(fields[:784])
        labels.append(fields[784])
        count += 1

    with open(out_dir / "train-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, count, 28, 28))
        f.write(pixels)
    with open(out_dir / "train-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, count))
        f.write(labels)
    print(f"wrote {count} images to {out_dir}")


if __name__ == "__main__":
    main()
