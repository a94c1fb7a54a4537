"""Regenerates the toy fixture. Output is deterministic for a fixed seed."""
import random
from pathlib import Path

HERE = Path(__file__).parent
rng = random.Random(20240917)
DIM = 16

SHARED = {
    "PN": ["i", "you", "we"],
    "VV": ["go", "see", "want", "take"],
    "NN": ["tea", "road", "door", "rain"],
}
STYLE = {
    "alice": {
        "templates": [2, 3, 5, 5, 2, 3, 6],
        "IJ": ["nya", "hehe", "wow"],
        "SP": ["喵", "desu"],
        "JJ": ["fluffy", "sparkly", "tiny", "sweet"],
        "NN": ["cake", "ribbon", "star", "kitten", "candy", "bubble", "pillow", "cookie"],
        "VA": ["cute", "happy", "sleepy", "bright"],
        "VV": ["play", "nap", "bounce", "sing"],
        "AD": ["very"],
        "P": ["with"],
        "labels": ["playful", "cute", "energetic", "clingy", "optimistic"],
    },
    "borin": {
        "templates": [1, 4, 7, 1, 4, 7, 6],
        "IJ": ["hmph"],
        "SP": ["aye"],
        "JJ": ["grim", "old"],
        "NN": ["anvil", "stone", "hammer", "forge", "iron", "mountain", "axe", "oath", "beard"],
        "VA": ["cold"],
        "VV": ["guard", "endure", "hold", "strike", "temper"],
        "AD": ["silently", "firmly", "never", "always"],
        "P": ["with", "under", "beyond"],
        "labels": ["cold", "serious", "loyal", "strong", "rational"],
    },
}


def pick(c, tag):
    pool = STYLE[c].get(tag, []) + SHARED.get(tag, [])
    return rng.choice(pool)


def tree(c, t):
    w = lambda tag: f"({tag} {pick(c, tag)})"
    if t == 1:
        return f"(TOP (IP (NP {w('PN')}) (VP {w('VV')} (NP {w('NN')}))))"
    if t == 2:
        return f"(TOP (CP (IP (VP {w('VA')})) {w('SP')}))"
    if t == 3:
        return f"(TOP (IP (INTJ {w('IJ')}) (PU !) (VP {w('VV')} (NP {w('NN')}))))"
    if t == 4:
        return f"(TOP (IP (ADVP {w('AD')}) (VP {w('VV')})))"
    if t == 5:
        return f"(TOP (IP (NP (DNP (ADJP {w('JJ')}) (DEG de)) (NP {w('NN')})) (VP {w('VA')})))"
    if t == 6:
        return f"(TOP (IP (NP {w('NN')} (CC and) {w('NN')}) (VP {w('VV')})))"
    return f"(TOP (IP (NP {w('PN')}) (VP (PP {w('P')} (NP {w('NN')})) (VP {w('VV')}))))"


def leaves(t):
    out = []
    for part in t.replace("(", " ( ").replace(")", " ) ").split():
        out.append(part)
    toks, i = [], 0
    while i < len(out):
        if out[i] == "(" and i + 3 < len(out) and out[i + 2] not in "()" and out[i + 3] == ")":
            toks.append(out[i + 2])
            i += 4
        else:
            i += 1
    return toks


def unit(v):
    n = sum(x * x for x in v) ** 0.5
    return [x / n for x in v]


def vec():
    return unit([rng.gauss(0, 1) for _ in range(DIM)])


def fmt(v):
    return " ".join(f"{x:.6f}" for x in v)


all_labels = sorted({l for s in STYLE.values() for l in s["labels"]})
label_vec = {l: vec() for l in all_labels}

corpus, trees, emb, gold = [], [], [], []
for c, persona in STYLE.items():
    prev = None
    for k in range(50):
        uid = f"{c}_{k:02d}"
        t = tree(c, persona["templates"][k % len(persona["templates"])])
        toks = leaves(t)
        ctx = prev if k % 2 == 1 else ""
        corpus.append(f"{uid}\t{c}\t{ctx}\t{' '.join(toks)}")
        trees.append(f"{uid}\t{t}")
        labels = rng.sample(persona["labels"], rng.choice([1, 2, 2, 3]))
        base = [sum(label_vec[l][d] for l in labels) for d in range(DIM)]
        e = [x + rng.gauss(0, 0.08) for x in base]
        emb.append(f"{uid}\t{fmt(e)}")
        gold.append(f"{uid}\t{','.join(sorted(labels))}")
        prev = uid

(HERE / "corpus.tsv").write_text("\n".join(corpus) + "\n", encoding="utf-8")
(HERE / "treebank.txt").write_text("\n".join(trees) + "\n", encoding="utf-8")
(HERE / "embeddings.txt").write_text("\n".join(emb) + "\n", encoding="utf-8")
(HERE / "gold_labels.tsv").write_text("\n".join(gold) + "\n", encoding="utf-8")
(HERE / "stopwords.txt").write_text("de\nand\nthe\n", encoding="utf-8")

vocab = sorted({t for line in corpus for t in line.split("\t")[3].split()})
(HERE / "token_embeddings.txt").write_text(
    "".join(f"{t}\t{fmt(vec())}\n" for t in vocab), encoding="utf-8"
)
STANDARD = (
    "kind modest clingy playful cold proud sharp_tongued subservient submissive controlling strong defensive "
    "tsukkomi rational curious imaginative cautious idealistic conservative radical obsessive hesitant energetic "
    "optimistic confident passionate melancholy serious emotional sensitive shy irritable anxious lazy tsundere "
    "yandere chuunibyou cute naive airhead elegant humorous loyal responsible willful antisocial talkative "
    "masochistic sadistic evil"
).split()
(HERE / "label_embeddings.txt").write_text(
    "".join(f"{l}\t{fmt(label_vec.get(l) or vec())}\n" for l in STANDARD), encoding="utf-8"
)

neutral, stylized = [], []
SAY = {
    "alice": ("nya~ {} desu!", "cheerful, adds a cat sound"),
    "borin": ("Hmph. {}. Aye.", "terse, grim acknowledgement"),
}
THINGS = ["the tea is ready", "the road is long", "it will rain", "the door is open", "we should rest",
          "the bread is warm", "the wind is cold", "the lamp is lit", "the river rises", "the bell rang",
          "the cart is late", "the fire is low", "the gate is shut", "the map is torn", "the night is quiet",
          "the well is dry", "the bird sings", "the snow melts", "the path turns", "the market opens"]
for c, persona in STYLE.items():
    for k, text in enumerate(THINGS):
        nid, sid = f"n_{c}_{k:02d}", f"s_{c}_{k:02d}"
        neutral.append(f"{nid}\t{c}\t{text}")
        labels = ",".join(sorted(rng.sample(persona["labels"], 2)))
        style, trace = SAY[c]
        stylized.append(f"{sid}\t{nid}\t{c}\t{style.format(text)}\t{trace}\t{labels}")
(HERE / "neutral.tsv").write_text("\n".join(neutral) + "\n", encoding="utf-8")
(HERE / "stylized.tsv").write_text("\n".join(stylized) + "\n", encoding="utf-8")

MODELS = [
    ("Model v2 (Inf-only)", 0.88, 0.63), ("Model v2", 0.84, 0.58), ("Model v1", 0.83, 0.58),
    ("Baseline B", 0.71, 0.76), ("Baseline C", 0.74, 0.69), ("Baseline D", 0.77, 0.87),
    ("Baseline A", 0.51, 0.88),
]
rows = ["model,id,semantic,style_raw"]
for m, s, y in MODELS:
    for j, d in enumerate((-0.02, 0.0, 0.02)):
        rows.append(f"{m},{j},{s + d:.2f},{y - d:.2f}")
(HERE / "scores.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
