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
"""Brute-force reference generator for the golden files of the mini corpus.

Every answer is computed by looping over pixels; there is no transition
matrix. Template draws follow the documented SplitMix64 / FNV-1a recipe.

    golden_oracle.py data/mini_corpus --seed 7
writes golden.jsonl and golden_stats.json next to the pairs.
"""

import argparse
import json
import pathlib
import re

MASK64 = (1 << 64) - 1
QTYPES = ["CN", "CtW", "CfW", "IN", "DN", "LC", "SC", "CR"]
SCENE_LEVEL = {"LC", "SC"}
TIME_WORDS = {
    "ordinal": ("first", "second"),
    "phase": ("pre-change", "post-change"),
    "relative": ("before", "after"),
}
BUCKETS = ["0"] + [f"{10 * (b - 1)}_to_{10 * b}" for b in range(1, 11)]


class SplitMix64:
    def __init__(self, seed):
        self.state = seed & MASK64

    def next(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, bound):
        return self.next() % bound


def fnv1a64(text):
    h = 0xCBF29CE484222325
    for byte in text.encode():
        h ^= byte
        h = (h * 0x100000001B3) & MASK64
    return h


def derive_seed(seed, key):
    return SplitMix64(seed ^ fnv1a64(key)).next()


def read_pgm(path):
    data = path.read_bytes()
    magic = data[:2]
    # Header tokens, skipping comments.
    tokens, pos = [], 2
    while len(tokens) < 3:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while data[pos:pos + 1] not in (b"\n", b""):
                pos += 1
            continue
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(int(data[start:pos]))
    width, height, _ = tokens
    if magic == b"P5":
        body = data[pos + 1:pos + 1 + width * height]
        values = list(body)
    else:
        values = [int(v) for v in data[pos:].split()]
    return width, height, [values[r * width:(r + 1) * width] for r in range(height)]


def rle(bits, width, height):
    runs, current, count = [], 0, 0
    for b in bits:
        if b != current:
            runs.append(count)
            current, count = b, 0
        count += 1
    runs.append(count)
    return {"size": [height, width], "counts": runs}


class Scene:
    def __init__(self, t1, t2, names):
        self.t1, self.t2, self.names = t1, t2, names
        self.height, self.width = len(t1), len(t1[0])
        self.pixels = [(r, c) for r in range(self.height) for c in range(self.width)]

    def mask(self, pred):
        return rle([1 if pred(self.t1[r][c], self.t2[r][c]) else 0 for r, c in self.pixels],
                   self.width, self.height)

    def empty(self):
        return self.mask(lambda a, b: False)

    def count(self, pred):
        return sum(1 for r, c in self.pixels if pred(self.t1[r][c], self.t2[r][c]))

    def changed(self, k):
        return self.count(lambda a, b: a != b and (a == k or b == k))

    def either_mask(self, k):
        return self.mask(lambda a, b: a != b and (a == k or b == k))

    def answer(self, qtype, k, measure):
        K = len(self.names)
        if qtype == "CN":
            if self.changed(k) == 0:
                return "no", self.empty()
            return "yes", self.either_mask(k)
        if qtype == "CtW":
            counts = [self.count(lambda a, b, j=j: a == k and b == j) for j in range(K)]
            if sum(counts[j] for j in range(K) if j != k) == 0:
                return "none", self.empty()
            best = min((j for j in range(K) if j != k), key=lambda j: (-counts[j], j))
            return self.names[best], self.mask(lambda a, b: a == k and b == best)
        if qtype == "CfW":
            counts = [self.count(lambda a, b, i=i: a == i and b == k) for i in range(K)]
            if sum(counts[i] for i in range(K) if i != k) == 0:
                return "none", self.empty()
            best = min((i for i in range(K) if i != k), key=lambda i: (-counts[i], i))
            return self.names[best], self.mask(lambda a, b: a == best and b == k)
        area1 = self.count(lambda a, b: a == k)
        area2 = self.count(lambda a, b: b == k)
        if qtype == "IN":
            if area2 > area1:
                return "yes", self.mask(lambda a, b: b == k and a != k)
            return "no", self.empty()
        if qtype == "DN":
            if area2 < area1:
                return "yes", self.mask(lambda a, b: a == k and b != k)
            return "no", self.empty()
        if qtype in ("LC", "SC"):
            def score(j):
                if measure == "net":
                    return abs(self.count(lambda a, b: b == j) - self.count(lambda a, b: a == j))
                return self.changed(j)
            scores = [(score(j), j) for j in range(K) if score(j) > 0]
            if not scores:
                return "none", self.empty()
            if qtype == "LC":
                best = min(scores, key=lambda s: (-s[0], s[1]))[1]
            else:
                best = min(scores)[1]
            return self.names[best], self.either_mask(best)
        if qtype == "CR":
            changed = self.changed(k)
            if changed == 0:
                return "0", self.empty()
            bucket = min(10, -(-10 * changed // (self.width * self.height)))
            return BUCKETS[bucket], self.either_mask(k)
        raise ValueError(qtype)


def render(template, subject_name):
    text, words = template["text"], TIME_WORDS[template["time_words"]]
    if subject_name is not None:
        text = text.replace("{class}", subject_name.replace("_", " "))
    return text, words


def generate(corpus, names, templates, seed, measure="gross"):
    ids = sorted(p.name[:-len("_t1.pgm")] for p in corpus.glob("*_t1.pgm")
                 if (corpus / (p.name[:-len("_t1.pgm")] + "_t2.pgm")).exists())
    lines = []
    for pair_id in ids:
        _, _, t1 = read_pgm(corpus / f"{pair_id}_t1.pgm")
        _, _, t2 = read_pgm(corpus / f"{pair_id}_t2.pgm")
        scene = Scene(t1, t2, names)
        present = sorted({v for row in t1 + t2 for v in row})
        rng = SplitMix64(derive_seed(seed, pair_id))
        index = 0
        for qtype in QTYPES:
            subjects = [None] if qtype in SCENE_LEVEL else present
            for k in subjects:
                token, mask = scene.answer(qtype, k, measure)
                for time_index in (1, 2):
                    tid = rng.below(5)
                    subject = None if k is None else names[k]
                    text, words = render(templates[qtype][tid], subject)
                    text = text.replace("{time}", words[time_index - 1])
                    lines.append({
                        "id": f"{pair_id}_q{index:04d}",
                        "pair_id": pair_id,
                        "qtype": qtype,
                        "time_index": time_index,
                        "subject": subject,
                        "question": text,
                        "answer": token,
                        "mask": mask,
                    })
                    index += 1
    return lines


def stats(lines):
    answers, types = {}, {q: 0 for q in QTYPES}
    hist = {b: 0 for b in BUCKETS}
    words = []
    for line in lines:
        answers[line["answer"]] = answers.get(line["answer"], 0) + 1
        types[line["qtype"]] += 1
        h, w = line["mask"]["size"]
        on = sum(line["mask"]["counts"][1::2])
        hist[BUCKETS[0 if on == 0 else min(10, -(-10 * on // (h * w)))]] += 1
        words.append(len(re.findall(r"\S+", line["question"])))
    return {
        "num_triplets": len(lines),
        "num_pairs": len({line["pair_id"] for line in lines}),
        "answer_frequency": dict(sorted(answers.items())),
        "type_counts": types,
        "mask_area_ratio_histogram": hist,
        "question_words": {"mean": sum(words) / len(words), "min": min(words),
                           "max": max(words)},
    }


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("corpus", type=pathlib.Path)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()
    names = json.loads((args.corpus / "taxonomy.json").read_text())["names"]
    templates = json.loads((args.corpus / "templates.json").read_text())
    lines = generate(args.corpus, names, templates, args.seed)
    with open(args.corpus / "golden.jsonl", "w") as f:
        for line in lines:
            f.write(json.dumps(line, separators=(",", ":")) + "\n")
    (args.corpus / "golden_stats.json").write_text(json.dumps(stats(lines), indent=2) + "\n")


if __name__ == "__main__":
    main()
