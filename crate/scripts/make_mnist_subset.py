"""Build the bundled MNIST subset fixtures as gzipped IDX files.

Source: the 5000-image MNIST sample shipped inside the `mlxtend` wheel
(500 images per digit). The images are shuffled with a fixed seed and split
into 4000 training and 1000 test images.

    pip download --no-deps mlxtend -d /tmp/mlx
    python3 scripts/make_mnist_subset.py /tmp/mlx/mlxtend-*.whl data/mnist-subset
"""

import gzip
import io
import struct
import sys
import zipfile
from pathlib import Path

import numpy as np

SEED = 20190315
N_TRAIN = 4000


def write_idx(path, magic, dims, payload):
    header = struct.pack(">I", magic) + b"".join(struct.pack(">I", d) for d in dims)
    # mtime=0 keeps the gzip bytes reproducible
    with open(path, "wb") as raw:
        with gzip.GzipFile(fileobj=raw, mode="wb", mtime=0, filename="") as gz:
            gz.write(header + payload)


def main():
    wheel, out = sys.argv[1], Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    blob = zipfile.ZipFile(wheel).read("mlxtend/data/data/mnist_5k.csv.gz")
    table = np.loadtxt(io.BytesIO(gzip.decompress(blob)), delimiter=",")
    pixels = table[:, :-1].astype(np.uint8)
    labels = table[:, -1].astype(np.uint8)
    order = np.random.RandomState(SEED).permutation(len(labels))
    pixels, labels = pixels[order], labels[order]
    for name, sl in (("train", slice(0, N_TRAIN)), ("test", slice(N_TRAIN, None))):
        imgs, labs = pixels[sl], labels[sl]
        write_idx(out / f"{name}-images-idx3-ubyte.gz", 0x803, (len(imgs), 28, 28), imgs.tobytes())
        write_idx(out / f"{name}-labels-idx1-ubyte.gz", 0x801, (len(labs),), labs.tobytes())
        print(name, len(labs), np.bincount(labs, minlength=10).tolist())


if __name__ == "__main__":
    main()
