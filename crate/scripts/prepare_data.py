#!/usr/bin/env python3
"""Rebuild data/ from dataset copies bundled inside two PyPI wheels.

Cora (LINQS .content/.cites) ships in the `pgl` wheel, MUTAG (TU flat format)
ships in the `grakel` wheel. Cora is rewritten into the edge-list/feature/label
layout read by `load_edgelist_dataset`; MUTAG is copied unchanged.

    python3 scripts/prepare_data.py [--out data]
"""
import argparse
import glob
import os
import shutil
import subprocess
import sys
import tempfile
import zipfile

WHEELS = {"pgl": "pgl==2.2.6", "grakel": "grakel==0.1.11"}


def fetch(spec, dest):
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "-q", spec, "-d", dest],
        check=True,
    )
    name = spec.split("==")[0]
    (whl,) = glob.glob(os.path.join(dest, f"{name}-*.whl"))
    return zipfile.ZipFile(whl)


def convert_cora(whl, out):
    content = whl.read("pgl/data/cora/cora.content").decode().splitlines()
    cites = whl.read("pgl/data/cora/cora.cites").decode().splitlines()
    ids, feats, names = {}, [], []
    for line in content:
        parts = line.split()
        ids[parts[0]] = len(ids)
        feats.append(parts[1:-1])
        names.append(parts[-1])
    classes = sorted(set(names))
    edges = set()
    for line in cites:
        a, b = line.split()
        i, j = ids[a], ids[b]
        if i != j:
            edges.add((min(i, j), max(i, j)))
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "cora.edges"), "w") as f:
        for i, j in sorted(edges):
            f.write(f"{i} {j}\n")
    with open(os.path.join(out, "cora.features"), "w") as f:
        for row in feats:
            f.write(" ".join(row) + "\n")
    with open(os.path.join(out, "cora.labels"), "w") as f:
        for n in names:
            f.write(f"{classes.index(n)}\n")
    print(f"cora: {len(ids)} nodes, {len(edges)} edges, {len(classes)} classes")


def copy_mutag(whl, out):
    os.makedirs(out, exist_ok=True)
    prefix = "grakel/tests/data/MUTAG/"
    for name in whl.namelist():
        if name.startswith(prefix) and name.endswith(".txt") and not name.endswith("README.txt"):
            with open(os.path.join(out, name[len(prefix):]), "wb") as f:
                f.write(whl.read(name))
    print("mutag: copied TU files")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data"))
    args = ap.parse_args()
    with tempfile.TemporaryDirectory() as tmp:
        convert_cora(fetch(WHEELS["pgl"], tmp), os.path.join(args.out, "cora"))
        copy_mutag(fetch(WHEELS["grakel"], tmp), os.path.join(args.out, "MUTAG"))


if __name__ == "__main__":
    main()
