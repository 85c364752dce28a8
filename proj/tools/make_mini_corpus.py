#!/usr/bin/env python3
# Copyright 2026 The cdqag-forge Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Writes the bundled mini corpus: three mask pairs plus the taxonomy.

Pixels come from Python's own seeded generator; nothing here depends on the
C++ library. Run golden_oracle.py afterwards to refresh the golden files.
"""

import argparse
import json
import pathlib
import random

NAMES = ["background", "building", "road", "water", "tree", "low_vegetation"]

# pair id -> (width, height, PGM flavour)
PAIRS = {
    "alpha": (16, 16, "P5"),
    "bravo": (24, 20, "P2"),
    "charlie": (32, 32, "P5"),
}


def blocky(rng, width, height, block, classes):
    grid = [[0] * width for _ in range(height)]
    for r0 in range(0, height, block):
        for c0 in range(0, width, block):
            cls = rng.choice(classes)
            for r in range(r0, min(r0 + block, height)):
                for c in range(c0, min(c0 + block, width)):
                    grid[r][c] = cls
    return grid


def mutate(rng, grid, block, classes, fraction):
    out = [row[:] for row in grid]
    height, width = len(grid), len(grid[0])
    for r0 in range(0, height, block):
        for c0 in range(0, width, block):
            if rng.random() >= fraction:
                continue
            cls = rng.choice(classes)
            for r in range(r0, min(r0 + block, height)):
                for c in range(c0, min(c0 + block, width)):
                    out[r][c] = cls
    return out


def write_pgm(path, grid, flavour):
    height, width = len(grid), len(grid[0])
    if flavour == "P5":
        header = f"P5\n# mini corpus\n{width} {height}\n255\n".encode()
        body = bytes(v for row in grid for v in row)
        path.write_bytes(header + body)
    else:
        lines = [f"P2\n# mini corpus\n{width} {height}\n255"]
        lines += [" ".join(str(v) for v in row) for row in grid]
        path.write_text("\n".join(lines) + "\n")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("out_dir", type=pathlib.Path)
    parser.add_argument("--seed", type=int, default=2026)
    args = parser.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(args.seed)

    # Water never appears; low_vegetation only appears after the change in
    # alpha, so absent subjects and one-sided classes are both covered.
    palettes = {
        "alpha": ([0, 1, 2], [0, 1, 2, 5]),
        "bravo": ([0, 1, 2, 4], [0, 1, 2, 4]),
        "charlie": ([0, 1, 2, 4, 5], [1, 2, 4, 5]),
    }
    for pair_id, (width, height, flavour) in PAIRS.items():
        before_classes, after_classes = palettes[pair_id]
        t1 = blocky(rng, width, height, 4, before_classes)
        t2 = mutate(rng, t1, 4, after_classes, 0.3)
        write_pgm(args.out_dir / f"{pair_id}_t1.pgm", t1, flavour)
        write_pgm(args.out_dir / f"{pair_id}_t2.pgm", t2, flavour)

    (args.out_dir / "taxonomy.json").write_text(json.dumps({"names": NAMES}, indent=2) + "\n")


if __name__ == "__main__":
    main()
