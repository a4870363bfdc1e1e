#!/usr/bin/env python3
"""Regenerates the YAKE golden fixtures with the reference `yake` package.

Usage: python3 make_golden.py   (writes *.jsonl and *.golden.json next to this file)
"""
import json
import os
import random

import yake

HERE = os.path.dirname(os.path.abspath(__file__))

CORPORA = {
    "blond_wrong": dict(
        subjects=["man", "young man", "actor", "man", "boy", "blond man", "the actor", "a man"],
        verbs=["smiling at", "posing for", "attending", "arriving at", "looking at"],
        objects=["the premiere", "the camera", "a party", "the event", "the awards ceremony",
                 "the film festival"],
        extras=["with blond hair", "in a suit", "wearing sunglasses", "with a beard", ""],
        lead=["portrait of a", "a photo of a", "", "the", "Image of a"],
    ),
    "waterbird_wrong": dict(
        subjects=["bird", "duck", "seagull", "bird", "gull", "heron"],
        verbs=["sitting on", "perched on", "standing in", "flying over", "walking through"],
        objects=["a tree branch", "the forest", "the woods", "a branch", "bamboo", "the trees"],
        extras=["in the forest", "with green leaves", "", "in the woods", "near the trees"],
        lead=["a", "the", "a photo of a", "Close-up of a"],
    ),
    "landbird_wrong": dict(
        subjects=["bird", "small bird", "sparrow", "bird", "woodpecker"],
        verbs=["standing on", "flying over", "sitting on", "resting on"],
        objects=["the beach", "the ocean", "a boat", "the dock", "the lake", "the water"],
        extras=["with a surfer", "at sunset", "", "near the ocean", "on a sunny day"],
        lead=["a", "the", "a photo of a", "Photo of the"],
    ),
    "nurse_generated": dict(
        subjects=["woman", "nurse", "young woman", "woman", "female nurse"],
        verbs=["wearing", "holding", "smiling in", "posing with", "standing in"],
        objects=["a stethoscope", "scrubs", "a white coat", "the hospital", "a mask"],
        extras=["with long hair", "in the hospital", "", "with a smile", "in blue scrubs"],
        lead=["portrait of a", "a", "the face of a", "A photo of a"],
    ),
    "firefighter_generated": dict(
        subjects=["man", "firefighter", "fireman", "man", "young man"],
        verbs=["wearing", "standing in front of", "holding", "posing with"],
        objects=["a helmet", "a fire truck", "the fire", "a uniform", "the hose"],
        extras=["with a beard", "in uniform", "", "at the fire station", "covered in soot"],
        lead=["portrait of a", "a", "the face of a", "A photo of a"],
    ),
}


def make_corpus(name, spec, count=60):
    rng = random.Random(name)
    out = []
    for i in range(count):
        lead = rng.choice(spec["lead"])
        parts = [lead, rng.choice(spec["subjects"]), rng.choice(spec["verbs"]),
                 rng.choice(spec["objects"]), rng.choice(spec["extras"])]
        caption = " ".join(p for p in parts if p).strip()
        if rng.random() < 0.2:
            caption += "."
        out.append({"id": f"{name}_{i:03d}", "caption": caption})
    return out


def join_captions(captions):
    pieces = []
    for c in captions:
        c = " ".join(c.split())
        if not c:
            continue
        if c[-1] not in ".!?":
            c += "."
        pieces.append(c)
    return " ".join(pieces)


def golden(captions, n=3):
    kw = yake.KeywordExtractor(lan="en", n=n, dedup_lim=0.9, dedup_func="levs",
                               window_size=1, top=20)
    return [{"phrase": k.lower(), "score": s} for k, s in kw.extract_keywords(join_captions(captions))]


def main():
    for name, spec in CORPORA.items():
        rows = make_corpus(name, spec)
        with open(os.path.join(HERE, f"{name}.jsonl"), "w") as f:
            for r in rows:
                f.write(json.dumps(r) + "\n")
        with open(os.path.join(HERE, f"{name}.golden.json"), "w") as f:
            json.dump(golden([r["caption"] for r in rows]), f, indent=1)
    hats = ["a man wearing a hat"] * 50
    with open(os.path.join(HERE, "man_hat.golden.json"), "w") as f:
        json.dump(golden(hats), f, indent=1)


if __name__ == "__main__":
    main()
