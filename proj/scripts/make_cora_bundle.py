#!/usr/bin/env python3
"""Convert the raw Cora citation files into a features.csv/edges.tsv bundle.

Input directory must contain cora.content (one line per paper: id, 1433
binary word indicators, class label) and cora.cites (one directed citation
per line). Node ids are assigned by order of appearance in cora.content.
Features are row-normalized (each row divided by its word count); citations
are undirected, deduplicated, and self-loops are dropped.

Usage: make_cora_bundle.py RAW_DIR OUT_DIR
"""

import argparse
import os
import sys


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("raw_dir", help="directory with cora.content and cora.cites")
    ap.add_argument("out_dir", help="bundle output directory")
    ap.add_argument("--force", action="store_true", help="overwrite an existing bundle")
    args = ap.parse_args()

    content_path = os.path.join(args.raw_dir, "cora.content")
    cites_path = os.path.join(args.raw_dir, "cora.cites")
    for p in (content_path, cites_path):
        if not os.path.exists(p):
            sys.exit(f"missing input file: {p}")

    ids = {}
    rows = []
    with open(content_path) as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            paper, words = parts[0], parts[1:-1]
            if paper in ids:
                sys.exit(f"duplicate paper id {paper}")
            ids[paper] = len(ids)
            rows.append([int(w) for w in words])

    dims = {len(r) for r in rows}
    if len(dims) != 1:
        sys.exit(f"inconsistent feature widths: {sorted(dims)}")

    edges = set()
    self_loops = 0
    with open(cites_path) as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            a, b = ids[parts[0]], ids[parts[1]]
            if a == b:
                self_loops += 1
                continue
            edges.add((min(a, b), max(a, b)))

    feat_path = os.path.join(args.out_dir, "features.csv")
    edge_path = os.path.join(args.out_dir, "edges.tsv")
    if not args.force and (os.path.exists(feat_path) or os.path.exists(edge_path)):
        sys.exit(f"bundle already exists in {args.out_dir} (use --force)")
    os.makedirs(args.out_dir, exist_ok=True)

    with open(feat_path, "w") as f:
        for r in rows:
            total = sum(r)
            if total:
                f.write(",".join("0" if w == 0 else repr(w / total) for w in r))
            else:
                f.write(",".join("0" for _ in r))
            f.write("\n")

    with open(edge_path, "w") as f:
        for a, b in sorted(edges):
            f.write(f"{a}\t{b}\n")

    print(f"nodes {len(rows)} features {dims.pop()} edges {len(edges)} "
          f"self_loops_dropped {self_loops}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
