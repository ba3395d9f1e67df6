#!/usr/bin/env python3
"""Convert a co-citation dataset in the common pickle layout into a manifest.

Expected input directory (the layout used by the widely shared co-citation
and co-authorship benchmark bundles):

    features.pickle    scipy sparse or dense array, n x d
    hypergraph.pickle  dict: hyperedge key -> iterable of node ids
    labels.pickle      list of class ids, or an n x c one-hot array
    splits/1.pickle    optional, dict with a "train" list

Output: hyperedges.txt, features.txt (row col value triples), labels.txt,
train_ids.txt (when a split is present) and manifest.json.

Nodes that appear in no hyperedge are left as they are; run
`hyperdiff preprocess add-self-loops` on the output before diffusing.
"""

import argparse
import json
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def load(path: Path):
    with path.open("rb") as fh:
        return pickle.load(fh)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("input", type=Path, help="directory with the pickle files")
    ap.add_argument("output", type=Path, help="directory to write the manifest into")
    ap.add_argument("--name", default=None, help="dataset name (defaults to the input directory name)")
    ap.add_argument("--split", type=int, default=1, help="which splits/<k>.pickle to export as train ids")
    args = ap.parse_args()

    features = load(args.input / "features.pickle")
    features = sp.csr_matrix(features) if not sp.issparse(features) else features.tocsr()
    n, d = features.shape

    labels = np.asarray(load(args.input / "labels.pickle"))
    if labels.ndim == 2:
        labels = labels.argmax(axis=1)
    labels = labels.astype(np.int64).ravel()
    if labels.shape[0] != n:
        print(f"labels has {labels.shape[0]} entries, features has {n} rows", file=sys.stderr)
        return 1
    classes = np.unique(labels)
    remap = {int(c): k for k, c in enumerate(classes)}

    raw = load(args.input / "hypergraph.pickle")
    edges, dropped = [], 0
    for key in sorted(raw, key=str):
        members = sorted({int(v) for v in raw[key]})
        if len(members) < 2:
            dropped += 1
            continue
        edges.append(members)

    out = args.output
    out.mkdir(parents=True, exist_ok=True)
    with (out / "hyperedges.txt").open("w") as fh:
        for e in edges:
            fh.write(" ".join(map(str, e)) + "\n")
    coo = features.tocoo()
    with (out / "features.txt").open("w") as fh:
        for r, c, v in zip(coo.row, coo.col, coo.data):
            if v != 0:
                fh.write(f"{r} {c} {float(v)!r}\n")
    with (out / "labels.txt").open("w") as fh:
        for i, y in enumerate(labels):
            fh.write(f"{i} {remap[int(y)]}\n")

    manifest = {
        "name": args.name or args.input.name,
        "hyperedges": "hyperedges.txt",
        "features": "features.txt",
        "features_format": "triples",
        "labels": "labels.txt",
        "n": int(n),
        "m": len(edges),
        "d": int(d),
        "c": len(classes),
    }
    split = args.input / "splits" / f"{args.split}.pickle"
    if split.exists():
        train = sorted(int(v) for v in load(split)["train"])
        (out / "train_ids.txt").write_text("".join(f"{v}\n" for v in train))
        manifest["train_ids"] = "train_ids.txt"
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    covered = np.zeros(n, dtype=bool)
    for e in edges:
        covered[e] = True
    print(f"n={n} m={len(edges)} d={d} c={len(classes)}; dropped {dropped} hyperedges with < 2 members; "
          f"{int((~covered).sum())} nodes in no hyperedge")
    return 0


if __name__ == "__main__":
    sys.exit(main())
