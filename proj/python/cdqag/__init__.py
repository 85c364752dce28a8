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
"""Change question answering and grounding toolkit.

Masks are exchanged as dicts of the form {"size": [H, W], "counts": [...]}.
"""

import csv
import io
import json

from . import _cdqag
from ._cdqag import CdqagError, DEFAULT_THRESHOLD, default_taxonomy

__all__ = [
    "CdqagError",
    "DEFAULT_THRESHOLD",
    "answer",
    "binarize",
    "dataset_stats",
    "default_taxonomy",
    "evaluate",
    "generate",
    "gradcheck",
    "iou",
    "microfit",
    "rle_decode",
    "rle_encode",
    "split",
]


def rle_encode(bits, width, height):
    return json.loads(_cdqag.rle_encode([int(b) for b in bits], width, height))


def rle_decode(mask):
    return _cdqag.rle_decode(json.dumps(mask))


def answer(qtype, t1, t2, width, height, names, subject=None, net=False):
    """Returns (token, mask) for one question about a pair of label grids."""
    token, mask = _cdqag.answer(qtype, [int(v) for v in t1], [int(v) for v in t2], width,
                                height, list(names), subject, net)
    return token, json.loads(mask)


def generate(pairs_dir, seed=0, workers=1, taxonomy=None):
    """Triplets for every pair in a directory, as a list of dicts."""
    text = _cdqag.generate_jsonl(str(pairs_dir), seed, workers,
                                 None if taxonomy is None else str(taxonomy))
    return [json.loads(line) for line in text.splitlines()]


def _to_jsonl(triplets):
    return "".join(json.dumps(t, separators=(",", ":")) + "\n" for t in triplets)


def dataset_stats(triplets):
    return json.loads(_cdqag.stats_json(_to_jsonl(triplets)))


def split(triplets, seed=0, train=0.7, val=0.1, test=0.2):
    return json.loads(_cdqag.split_json(_to_jsonl(triplets), seed, train, val, test))


def iou(pred, gt):
    return _cdqag.iou(json.dumps(pred), json.dumps(gt))


def binarize(scores, width, height, threshold=DEFAULT_THRESHOLD, logits=False):
    return json.loads(_cdqag.binarize([float(s) for s in scores], width, height, threshold,
                                      logits))


def evaluate(gt_path, pred_path, threshold=DEFAULT_THRESHOLD, logits=False,
             missing_as_wrong=False, workers=1):
    return json.loads(_cdqag.evaluate_json(str(gt_path), str(pred_path), threshold, logits,
                                           missing_as_wrong, workers))


def gradcheck(seed=0, instances=50):
    return json.loads(_cdqag.gradcheck_json(seed, instances))


def microfit(seed=42, steps=200, lr=0.05):
    """Loss trace as a list of dicts with step, l_txt, l_mask, l_con and total."""
    rows = csv.DictReader(io.StringIO(_cdqag.microfit_csv(seed, steps, lr)))
    return [{k: (int(v) if k == "step" else float(v)) for k, v in row.items()} for row in rows]
