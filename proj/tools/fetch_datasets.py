#!/usr/bin/env python3
"""Populate data/ with the Cora citation graph and a desk-scale MNIST subset.

Both datasets are pulled from package registries rather than their original
hosts:

  * Cora (cora.content / cora.cites, LINQS release) ships inside the
    ``pgl`` wheel on PyPI.
  * ~10k MNIST digits ship inside the ``mnist`` npm package as JSON arrays of
    784 intensities in [0, 1] (three decimals). They are re-quantized to
    bytes and written as standard IDX files so the C++ reader sees the usual
    MNIST layout.

Usage: tools/fetch_datasets.py [--out data]
"""

import argparse
import glob
import json
import os
import random
import shutil
import struct
import subprocess
import sys
import tarfile
import tempfile
import zipfile


def fetch_cora(out_dir, work):
    target = os.path.join(out_dir, "cora")
    if os.path.exists(os.path.join(target, "cora.content")):
        print("cora: already present")
        return
    subprocess.check_call([sys.executable, "-m", "pip", "download", "--no-deps",
                           "pgl==2.2.6", "-d", work])
    wheel = glob.glob(os.path.join(work, "pgl-*.whl"))[0]
    os.makedirs(target, exist_ok=True)
    with zipfile.ZipFile(wheel) as z:
        for name in ("cora.content", "cora.cites", "README"):
            with open(os.path.join(target, name), "wb") as f:
                f.write(z.read("pgl/data/cora/" + name))
    print("cora: wrote", target)


def write_idx_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def fetch_mnist(out_dir, work, test_fraction=0.2, seed=20180322):
    target = os.path.join(out_dir, "mnist")
    if os.path.exists(os.path.join(target, "train-images-idx3-ubyte")):
        print("mnist: already present")
        return
    subprocess.check_call(["npm", "pack", "mnist@1.1.0"], cwd=work)
    with tarfile.open(os.path.join(work, "mnist-1.1.0.tgz")) as t:
        t.extractall(work)
    samples = []
    for digit in range(10):
        with open(os.path.join(work, "package", "src", "digits", f"{digit}.json")) as f:
            data = json.load(f)["data"]
        count = len(data) // 784
        for k in range(count):
            pixels = [min(255, max(0, round(v * 255.0))) for v in data[784 * k:784 * (k + 1)]]
            samples.append((pixels, digit))
    random.Random(seed).shuffle(samples)
    n_test = int(len(samples) * test_fraction)
    splits = {"t10k": samples[:n_test], "train": samples[n_test:]}
    os.makedirs(target, exist_ok=True)
    for prefix, rows in splits.items():
        write_idx_images(os.path.join(target, f"{prefix}-images-idx3-ubyte"), [r[0] for r in rows])
        write_idx_labels(os.path.join(target, f"{prefix}-labels-idx1-ubyte"), [r[1] for r in rows])
        print(f"mnist: {prefix} {len(rows)} images")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data"))
    args = parser.parse_args()
    os.makedirs(args.out, exist_ok=True)
    work = tempfile.mkdtemp(prefix="splinecnn-data-")
    try:
        fetch_cora(args.out, work)
        fetch_mnist(args.out, work)
    finally:
        shutil.rmtree(work, ignore_errors=True)


if __name__ == "__main__":
    main()
