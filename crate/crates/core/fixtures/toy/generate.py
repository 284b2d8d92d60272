"""Regenerates the toy fixture files in this directory.

Deterministic: rerunning produces byte-identical files.
"""

import json
import math
import os
import random

HERE = os.path.dirname(os.path.abspath(__file__))
DIM = 16
rng = random.Random(20240601)

LABELS = ["dog", "car", "driver", "woman", "child", "chair", "table", "ball", "horse", "bird"]

# noun -> (label, cosine with the label vector)
NEAR_NOUNS = {
    "puppy": ("dog", 0.92),
    "automobile": ("car", 0.85),
    "lady": ("woman", 0.78),
    "pony": ("horse", 0.72),
    "kid": ("child", 0.66),
    "vehicle": ("car", 0.60),
    "stool": ("chair", 0.55),
}

ATTRIBUTES = [
    "red", "blue", "black", "white", "brown", "small", "big", "young", "old",
    "wooden", "male", "happy", "fluffy", "fast", "shiny", "round", "tall", "little",
]

OTHER_WORDS = [
    "grass", "sofa", "street", "book", "field", "park", "ball", "branch", "beach",
    "rider", "snow", "food", "light", "corner", "posing", "runs", "sits", "sleeps",
    "parked", "reading", "grazing", "throws", "laughing", "play", "waiting", "rides",
    "dogs", "nothing", "see", "two",
]


def unit(i):
    v = [0.0] * DIM
    v[i] = 1.0
    return v


def normalize(v):
    n = math.sqrt(sum(x * x for x in v))
    return [x / n for x in v]


def noise(lo=10):
    v = [0.0] * DIM
    for i in range(lo, DIM):
        v[i] = rng.gauss(0.0, 1.0)
    return normalize(v)


vectors = {}
for i, label in enumerate(LABELS):
    vectors[label] = unit(i)
for n, (noun, (label, c)) in enumerate(NEAR_NOUNS.items()):
    s = math.sqrt(1.0 - c * c)
    v = [c * x for x in unit(LABELS.index(label))]
    v[10 + n % 6] += s
    vectors[noun] = v
for a in ATTRIBUTES:
    v = [rng.gauss(0.0, 0.3) for _ in range(DIM)]
    for i in range(10, DIM):
        v[i] += rng.gauss(0.0, 1.0)
    vectors[a] = normalize(v)
for w in OTHER_WORDS:
    if w not in vectors:
        vectors[w] = normalize([rng.gauss(0.0, 1.0) for _ in range(DIM)])

# (id, text, image, gold label, detections)
EXAMPLES = [
    ("t01", "a driver posing with a car", "img01", "entailment", [("driver", "male"), ("car", "red")]),
    ("t02", "A dog runs across the grass.", "img02", "entailment", [("dog", "brown")]),
    ("t03", "a woman sits on a chair next to a table", "img03", "entailment", [("woman", "young"), ("chair", "wooden"), ("table", "round")]),
    ("t04", "the puppy sleeps on the sofa", "img04", "neutral", [("dog", "small")]),
    ("t05", "an automobile parked on the street", "img05", "entailment", [("car", "blue")]),
    ("t06", "a lady reading a book", "img06", "neutral", [("woman", "old")]),
    ("t07", "a pony grazing in a field", "img07", "entailment", [("horse", "white")]),
    ("t08", "the kid throws a ball", "img08", "entailment", [("child", "happy"), ("ball", "red")]),
    ("t09", "a kid laughing in the park", "img09", "neutral", [("child", "young")]),
    ("t10", "an old stool in the corner", "img10", "contradiction", [("chair", "wooden")]),
    ("t11", "a bird on a branch", "img11", "entailment", [("bird", "black")]),
    ("t12", "two dogs play with a ball", "img12", "neutral", [("dog", "brown"), ("ball", "blue")]),
    ("t13", "A horse and a rider on the beach.", "img13", "entailment", [("horse", "brown")]),
    ("t14", "nothing to see here", "img14", "contradiction", [("car", "red")]),
    ("t15", "the vehicle is waiting at the light", "img05", "neutral", [("car", "blue")]),
    ("t16", "a child and a dog in the snow", "img16", "entailment", [("child", "young"), ("dog", "white")]),
    ("t17", "a table with food", "img03", "neutral", [("table", "round")]),
    ("t18", "the car, the car and the driver", "img01", "contradiction", [("driver", "male"), ("car", "red")]),
    ("t19", "Dog.", "img02", "entailment", [("dog", "brown")]),
    ("t20", "a woman rides a horse", "img13", "contradiction", [("horse", "brown")]),
]

# next word -> ten candidates, descending probability
MASK_FILL = {
    "driver": ["male", "young", "the", "tall", "happy", "old", "bus", "his", "taxi", "little"],
    "car": ["red", "shiny", "fast", "the", "blue", "old", "big", "small", "black", "white"],
    "dog": ["brown", "big", "small", "the", "black", "white", "happy", "little", "young", "fluffy"],
    "woman": ["young", "old", "tall", "happy", "the", "little", "small", "big", "white", "black"],
    "chair": ["wooden", "old", "small", "big", "red", "the", "blue", "black", "white", "round"],
    "table": ["round", "wooden", "big", "small", "old", "the", "white", "black", "red", "little"],
    "puppy": ["small", "little", "fluffy", "brown", "the", "happy", "young", "big", "white", "black"],
    "automobile": ["blue", "old", "red", "shiny", "fast", "big", "the", "black", "white", "small"],
    "lady": ["old", "young", "little", "happy", "tall", "the", "white", "black", "small", "big"],
    "pony": ["white", "little", "small", "brown", "young", "the", "black", "big", "happy", "old"],
    "kid": ["happy", "little", "young", "small", "the", "tall", "big", "old", "white", "black"],
    "ball": ["red", "blue", "big", "round", "small", "the", "white", "black", "little", "old"],
    "stool": ["wooden", "old", "little", "small", "tall", "the", "round", "big", "red", "black"],
    "bird": ["black", "little", "small", "white", "the", "happy", "big", "red", "blue", "young"],
    "horse": ["brown", "white", "big", "tall", "black", "the", "young", "old", "fast", "small"],
    "vehicle": ["blue", "big", "red", "old", "fast", "the", "shiny", "black", "white", "small"],
    "child": ["young", "happy", "little", "small", "the", "tall", "big", "old", "white", "black"],
}

NOUNS = sorted(set(LABELS) | set(NEAR_NOUNS) | {
    "grass", "sofa", "street", "book", "field", "park", "branch", "beach", "rider",
    "snow", "food", "light", "corner", "dogs",
})


def image_vector(dets):
    v = [0.0] * DIM
    for label, _ in dets:
        for i, x in enumerate(unit(LABELS.index(label))):
            v[i] += x
    for i, x in enumerate(noise()):
        v[i] += 0.5 * x
    return normalize(v)


def fmt(x):
    return f"{x:.6f}"


def main():
    with open(os.path.join(HERE, "word_vectors.txt"), "w") as f:
        for w in sorted(vectors):
            f.write(w + " " + " ".join(fmt(x) for x in vectors[w]) + "\n")

    images, detections = {}, {}
    for _, _, image, _, dets in EXAMPLES:
        if image not in images:
            images[image] = [round(x, 6) for x in image_vector(dets)]
            detections[image] = [
                {"object": o, "attribute": a, "confidence": round(0.9 - 0.1 * i, 2)}
                for i, (o, a) in enumerate(dets)
            ]
    with open(os.path.join(HERE, "images.json"), "w") as f:
        json.dump(dict(sorted(images.items())), f, indent=1)
        f.write("\n")
    with open(os.path.join(HERE, "detections.json"), "w") as f:
        json.dump(dict(sorted(detections.items())), f, indent=1)
        f.write("\n")

    with open(os.path.join(HERE, "corpus.jsonl"), "w") as f:
        for ex_id, text, image, gold, _ in EXAMPLES:
            f.write(json.dumps({"id": ex_id, "text": text, "image_id": image, "gold_label": gold}) + "\n")

    table = {}
    for key, words in MASK_FILL.items():
        weights = [0.5 ** i for i in range(len(words))]
        total = sum(weights) * 1.25
        table[key] = [[w, round(x / total, 6)] for w, x in zip(words, weights)]
    with open(os.path.join(HERE, "maskfill.json"), "w") as f:
        json.dump(dict(sorted(table.items())), f, indent=1)
        f.write("\n")

    with open(os.path.join(HERE, "pos.tsv"), "w") as f:
        for n in NOUNS:
            f.write(f"{n}\tnoun\n")

    # Stand-in classifier outputs for the entailment harness.
    golds = [ex[3] for ex in EXAMPLES]
    flip = {"t01", "t07", "t11", "t16"}
    pred_orig = list(golds)
    pred_orig[9] = "neutral"
    pred_aug = [("contradiction" if ex[0] in flip else p) for ex, p in zip(EXAMPLES, pred_orig)]
    for name, labels in [("gold.txt", golds), ("pred_original.txt", pred_orig), ("pred_augmented.txt", pred_aug)]:
        with open(os.path.join(HERE, name), "w") as f:
            f.write("\n".join(labels) + "\n")


if __name__ == "__main__":
    main()
