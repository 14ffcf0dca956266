"""Independent brute-force oracles used to freeze expected values.

Nothing here imports the code under test except the stopword resource.
Run ``python tests/oracles.py`` to regenerate tests/fixtures/keyword_oracle.json.
"""
import json
import math
from pathlib import Path

HERE = Path(__file__).resolve().parent
FIXTURE = HERE.parent / "src" / "fasemcom" / "data" / "fixture"
STOPWORDS = set(
    (HERE.parent / "src" / "fasemcom" / "data" / "stopwords_smart.txt").read_text().split()
)


def split_text(text):
    """Sentences as lists of words, scanning characters one at a time."""
    sentences, words, cur = [], [], ""
    for ch in text + " ":
        if ch.isalnum() or (ch == "'" and cur):
            cur += ch
            continue
        if cur:
            words.append(cur.rstrip("'"))
            cur = ""
        if ch in ".?!" and words:
            sentences.append(words)
            words = []
    if words:
        sentences.append(words)
    return sentences


def word_table(text):
    sentences = split_text(text)
    flat = []  # (word, sentence, first_in_sentence)
    for s_idx, sent in enumerate(sentences):
        for j, w in enumerate(sent):
            flat.append((w, s_idx, j == 0))
    keys = sorted({w.lower() for w, _, _ in flat if w.lower() not in STOPWORDS})
    tf = {k: sum(1 for w, _, _ in flat if w.lower() == k) for k in keys}
    n = len(keys)
    mean = sum(tf.values()) / n
    std = math.sqrt(sum((v - mean) ** 2 for v in tf.values()) / n)
    max_tf = max(tf.values())
    out = {}
    for k in keys:
        occ = [i for i, (w, _, _) in enumerate(flat) if w.lower() == k]
        acr = sum(1 for i in occ if len(flat[i][0]) > 1 and flat[i][0] == flat[i][0].upper()
                  and any(c.isalpha() for c in flat[i][0]))
        cap = sum(1 for i in occ if flat[i][0][0].isupper() and not flat[i][2]
                  and not (len(flat[i][0]) > 1 and flat[i][0] == flat[i][0].upper()))
        case = max(acr, cap) / (1 + math.log(tf[k]))
        sidx = sorted(flat[i][1] for i in occ)
        m = len(sidx)
        med = sidx[m // 2] if m % 2 else (sidx[m // 2 - 1] + sidx[m // 2]) / 2
        pos = math.log(math.log(3 + med))
        freq = tf[k] / (mean + std)
        lefts = [flat[i - 1][0].lower() for i in occ if i > 0 and flat[i - 1][1] == flat[i][1]]
        rights = [flat[i + 1][0].lower() for i in occ if i + 1 < len(flat) and flat[i + 1][1] == flat[i][1]]
        wl = len(set(lefts)) / len(lefts) if lefts else 0.0
        wr = len(set(rights)) / len(rights) if rights else 0.0
        rel = 1 + (wl + wr) * tf[k] / max_tf
        dif = len(set(sidx)) / len(sentences)
        score = rel * pos / (case + freq / rel + dif / rel)
        out[k] = {"tf": tf[k], "w_case": case, "w_position": pos, "w_freq": freq,
                  "w_rel": rel, "w_difsentence": dif, "score": score}
    return sentences, out


def keyword_table(text, max_len=3):
    sentences, words = word_table(text)
    counts = {}
    for sent in sentences:
        low = [w.lower() for w in sent]
        for i in range(len(low)):
            for n in range(1, max_len + 1):
                if i + n > len(low):
                    continue
                gram = low[i:i + n]
                if gram[0] in STOPWORDS or gram[-1] in STOPWORDS:
                    continue
                counts[" ".join(gram)] = counts.get(" ".join(gram), 0) + 1
    scored = []
    for phrase, tf in counts.items():
        ss = [words[w]["score"] for w in phrase.split() if w not in STOPWORDS]
        prod = 1.0
        for s in ss:
            prod *= s
        scored.append((prod / (tf * (1 + sum(ss))), phrase, tf))
    scored.sort()
    return words, scored


def load_table(path):
    table = {}
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if parts:
            table[parts[0]] = [float(x) for x in parts[1:]]
    return table


def mean_vec(words, table):
    vecs = [table[w] for w in words if w in table]
    if not vecs:
        return None
    return [sum(c) / len(vecs) for c in zip(*vecs)]


def cos(a, b):
    dot = sum(x * y for x, y in zip(a, b))
    return dot / (math.sqrt(sum(x * x for x in a)) * math.sqrt(sum(y * y for y in b)))


def exhaustive_match(keywords, labels, table):
    """All (keyword, label) similarities; keywords are (score, phrase) pairs."""
    pairs = []
    for score, phrase in keywords:
        kv = mean_vec(phrase.split(), table)
        for lab in labels:
            lv = mean_vec(lab.split(), table)
            if kv is not None and lv is not None:
                pairs.append((cos(kv, lv), score, lab, phrase))
    best = min(pairs, key=lambda p: (-round(p[0], 12), p[1], p[2]))
    return best, pairs


def build():
    questions = json.loads((FIXTURE / "questions.json").read_text())
    dets = json.loads((FIXTURE / "detections.json").read_text())
    labels = sorted({d["label"] for d in dets})
    table = load_table(FIXTURE / "embeddings.txt")
    out = []
    for q in questions:
        words, scored = keyword_table(q["question"])
        top = scored[:5]
        best, _ = exhaustive_match([(s, p) for s, p, _ in top], labels, table)
        out.append({
            "question": q["question"],
            "words": words,
            "candidates": [{"phrase": p, "score": s, "tf": tf} for s, p, tf in scored],
            "best": {"similarity": best[0], "label": best[2], "keyword": best[3]},
        })
    return out


if __name__ == "__main__":
    dest = HERE / "fixtures" / "keyword_oracle.json"
    dest.parent.mkdir(exist_ok=True)
    dest.write_text(json.dumps(build(), indent=1) + "\n")
    print("wrote", dest)
